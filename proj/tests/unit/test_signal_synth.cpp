#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "helpers.hpp"
#include "nvmag/errors.hpp"
#include "nvmag/signal_synth.hpp"

using namespace nvmag;
using testutil::kReferenceField;

namespace {

double mean(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double stdev(const std::vector<double>& v) {
  const double m = mean(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size() - 1));
}

}  // namespace

TEST_SUITE("signal_synth") {
  TEST_CASE("linspace and Lorentzian") {
    const auto x = linspace(0.0, 1.0, 5);
    REQUIRE(x.size() == 5);
    CHECK(x.front() == 0.0);
    CHECK(x.back() == 1.0);
    CHECK(x[2] == doctest::Approx(0.5));
    CHECK(lorentzian(3.0, 3.0, 0.8) == 1.0);
    CHECK(lorentzian(3.4, 3.0, 0.8) == doctest::Approx(0.5));
  }

  TEST_CASE("ODMR doublet at the reference field") {
    const NVParameters p;
    const MeasurementRecord rec = synth_odmr(kReferenceField, p, Sweep{2780.0, 2792.0, 6001});
    CHECK(rec.kind == RecordKind::odmr);
    CHECK_NOTHROW(rec.validate());
    for (double v : rec.values) REQUIRE((v > 0.0 && v <= 1.0));

    // The two deepest local minima sit at the exact transition lines.
    std::vector<std::size_t> minima;
    for (std::size_t i = 1; i + 1 < rec.size(); ++i)
      if (rec.values[i] < rec.values[i - 1] && rec.values[i] <= rec.values[i + 1]) minima.push_back(i);
    REQUIRE(minima.size() == 2);
    const auto lines = exact_transitions(kReferenceField, p).branch_lines(Branch::minus);
    CHECK(rec.axis[minima[0]] == doctest::Approx(lines[0]).epsilon(1e-6));
    CHECK(rec.axis[minima[1]] == doctest::Approx(lines[1]).epsilon(1e-6));
    // Separation close to the reported 3.09 MHz.
    CHECK(std::abs((lines[1] - lines[0]) - 3.09) < 0.1);
  }

  TEST_CASE("ODMR line shape identities") {
    const Sweep sw{2860.0, 2880.0, 401};
    const std::vector<double> centers{2870.0};
    const auto flat = synth_odmr_lines(centers, sw, 0.8, 0.0);
    for (double v : flat.values) REQUIRE(v == 1.0);
    const auto one = synth_odmr_lines(centers, sw, 0.8, 0.2);
    CHECK(odmr_value(2870.0, centers, 0.8, 0.2) == doctest::Approx(0.8));
    CHECK(odmr_value(2870.4, centers, 0.8, 0.2) == doctest::Approx(0.9));
    CHECK(one.values[200] == doctest::Approx(0.8));
  }

  TEST_CASE("empty sweep") {
    CHECK_THROWS_AS(synth_odmr(kReferenceField, NVParameters{}, Sweep{2000.0, 2100.0, 101}), EmptySweep);
  }

  TEST_CASE("precession trace") {
    const PrecessionModel m{1.0, 0.1, 0.1632, 156.0};
    const std::vector<double> t{0.0, 1.0 / (4.0 * m.omega_L), 50.0, 300.0};
    const auto rec = synth_precession(m, t);
    CHECK(rec.values[0] == doctest::Approx(1.1));
    CHECK(rec.values[1] == doctest::Approx(1.0).epsilon(1e-14));
    CHECK(rec.values[2] ==
          doctest::Approx(1.0 + 0.1 * std::cos(2.0 * std::numbers::pi * 0.1632 * 50.0) *
                                    std::exp(-50.0 / 156.0)));
    const auto dense = synth_precession(m, linspace(0.0, 600.0, 5001));
    for (double v : dense.values) REQUIRE(std::abs(v) <= m.I0 + m.Ic);
  }

  TEST_CASE("echo trace") {
    const EchoModel m;
    const std::vector<double> t{0.0};
    const double want = 0.5 + 0.5 * (1.0 + m.b * std::exp(-std::pow(m.tau_re / m.tau_c, 4)));
    CHECK(synth_echo(m, t).values[0] == doctest::Approx(want));

    // Revival envelope peaks at tau_re when tau_re >> tau_c.
    EchoModel sharp = m;
    sharp.tau_c = 4.0;
    const double e0 = echo_envelope(sharp, sharp.tau_re);
    CHECK(e0 > echo_envelope(sharp, sharp.tau_re - 0.5));
    CHECK(e0 > echo_envelope(sharp, sharp.tau_re + 0.5));
  }

  TEST_CASE("echo values stay in [0, 1] unless the envelope exceeds one") {
    const auto taus = linspace(0.0, 60.0, 601);
    for (double a : {0.0, 0.5, 1.0})
      for (double b : {0.0, 0.5, 1.0})
        for (double tc : {2.0, 10.0, 20.0}) {
          EchoModel m;
          m.a = a;
          m.b = b;
          m.tau_c = tc;
          const auto rec = synth_echo(m, taus);
          double env_max = 0.0;
          for (double t : taus) env_max = std::max(env_max, echo_envelope(m, t));
          const bool flagged = rec.meta.value("envelope_exceeds_one", false);
          CHECK(flagged == (env_max > 1.0));
          if (!flagged)
            for (double v : rec.values) REQUIRE((v >= 0.0 && v <= 1.0));
        }
  }

  TEST_CASE("shot noise follows counting statistics") {
    MeasurementRecord flat;
    flat.kind = RecordKind::precession;
    flat.axis = linspace(0.0, 1.0, 10000);
    flat.values.assign(10000, 1.0);
    const double rate = 3e4, dwell = 0.1;  // 3000 counts per point
    const auto noisy = add_shot_noise(flat, rate, dwell, 42);
    const double n = rate * dwell;
    CHECK(std::abs(stdev(noisy.values) * std::sqrt(n) - 1.0) < 0.2);
    CHECK(std::abs(mean(noisy.values) - 1.0) < 3.0 / std::sqrt(n) / std::sqrt(10000.0));
    CHECK(noisy.meta.at("noise").at("seed") == 42);

    const auto again = add_shot_noise(flat, rate, dwell, 42);
    CHECK(again.values == noisy.values);
    const auto other = add_shot_noise(flat, rate, dwell, 43);
    CHECK(other.values != noisy.values);

    // Relative deviation shrinks with the dwell time.
    const auto longer = add_shot_noise(flat, rate, 100.0, 42);
    CHECK(stdev(longer.values) < 0.05 * stdev(noisy.values));
  }

  TEST_CASE("noiseless synthesis is reproducible") {
    const NVParameters p;
    const auto a = synth_odmr(kReferenceField, p, Sweep{});
    const auto b = synth_odmr(kReferenceField, p, Sweep{});
    CHECK(a.values == b.values);
  }

  TEST_CASE("record validation") {
    MeasurementRecord r;
    r.axis = {0.0, 1.0, 1.0};
    r.values = {1.0, 1.0, 1.0};
    CHECK_THROWS_AS(r.validate(), InvalidArgument);
    r.axis = {0.0, 1.0, 2.0};
    r.values = {1.0, NAN, 1.0};
    CHECK_THROWS_AS(r.validate(), InvalidArgument);
    CHECK(record_kind_from_string("echo") == RecordKind::echo);
    CHECK_THROWS_AS(record_kind_from_string("rabi"), InvalidArgument);
  }
}
