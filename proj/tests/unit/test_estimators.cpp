#include <doctest.h>

#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <vector>

#include "helpers.hpp"
#include "nvmag/errors.hpp"
#include "nvmag/estimators.hpp"
#include "nvmag/signal_synth.hpp"

using namespace nvmag;
using testutil::kReferenceField;

namespace {

struct Stats {
  double mean = 0.0;
  double sd = 0.0;
};

Stats stats(const std::vector<double>& v) {
  Stats s;
  s.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  for (double x : v) s.sd += (x - s.mean) * (x - s.mean);
  s.sd = std::sqrt(s.sd / static_cast<double>(v.size() - 1));
  return s;
}

double rel(double a, double b) { return std::abs(a - b) / std::abs(b); }

const ParamTable kEchoTruth{{"tau_c", 10.0}, {"tau_re", 24.27}, {"a", 0.5},
                            {"b", 0.8},      {"omega1", 0.163}, {"omega2", 3.03}};

EchoModel echo_from(const ParamTable& t) {
  return {t.at("tau_c"), t.at("tau_re"), t.at("a"), t.at("b"), t.at("omega1"), t.at("omega2")};
}

MeasurementRecord scale_record(MeasurementRecord r, double f) {
  for (double& v : r.values) v *= f;
  return r;
}

}  // namespace

TEST_SUITE("estimators") {
  TEST_CASE("linear model matches closed-form least squares") {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> n(0.0, 0.3);
    std::vector<double> x, y;
    for (int i = 0; i < 40; ++i) {
      x.push_back(0.25 * i - 3.0);
      y.push_back(1.7 * x.back() + n(rng));
    }
    // y = a x
    CurveModel prop{{"a"}, [](double xv, std::span<const double> p) { return p[0] * xv; }, {}};
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      sxy += x[i] * y[i];
      sxx += x[i] * x[i];
    }
    const FitResult r = nlls_solve(prop, x, y, {{"a", 0.1}});
    CHECK(r.converged);
    CHECK(std::abs(r.value("a") - sxy / sxx) <= 1e-12 * std::abs(sxy / sxx));
    // 1-sigma from the residual variance: s^2 / sum x^2.
    double ss = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) ss += std::pow(y[i] - sxy / sxx * x[i], 2);
    const double s2 = ss / static_cast<double>(x.size() - 1);
    CHECK(r.sigma("a") == doctest::Approx(std::sqrt(s2 / sxx)).epsilon(1e-8));

    // y = c + a x, normal equations.
    CurveModel affine{{"c", "a"},
                      [](double xv, std::span<const double> p) { return p[0] + p[1] * xv; },
                      {}};
    const double nn = static_cast<double>(x.size());
    const double sx = std::accumulate(x.begin(), x.end(), 0.0);
    const double sy = std::accumulate(y.begin(), y.end(), 0.0);
    const double det = nn * sxx - sx * sx;
    const double a = (nn * sxy - sx * sy) / det;
    const double c = (sy - a * sx) / nn;
    const FitResult r2 = nlls_solve(affine, x, y, {{"c", 0.0}, {"a", 0.0}});
    CHECK(std::abs(r2.value("a") - a) <= 1e-12 * std::abs(a));
    CHECK(std::abs(r2.value("c") - c) <= 1e-12 * std::max(1.0, std::abs(c)));
  }

  TEST_CASE("init at truth and perturbed init") {
    const PrecessionModel m{1.0, 0.1, 0.1632, 156.0};
    const auto rec = synth_precession(m, linspace(0.0, 312.0, 625));
    const ParamTable truth{{"I0", 1.0}, {"Ic", 0.1}, {"omega_L", 0.1632}, {"T0", 156.0}};
    const FitResult at = nlls_solve(precession_model(), rec, truth);
    CHECK(at.converged);
    CHECK(at.residual_norm < 1e-12);
    for (const auto& [k, v] : truth) CHECK(std::abs(at.value(k) - v) <= 1e-12 * v);

    ParamTable init{{"I0", 1.1}, {"Ic", 0.09}, {"omega_L", 0.1632 * 1.002}, {"T0", 140.0}};
    const FitResult r = nlls_solve(precession_model(), rec, init);
    CHECK(r.converged);
    for (const auto& [k, v] : truth) CHECK(rel(r.value(k), v) < 1e-8);
    for (Eigen::Index i = 0; i < r.sigmas.size(); ++i) CHECK(r.sigmas(i) >= 0.0);
  }

  TEST_CASE("max iterations and singular Jacobian") {
    const PrecessionModel m{1.0, 0.1, 0.1632, 156.0};
    const auto rec = synth_precession(m, linspace(0.0, 312.0, 625));
    const ParamTable init{{"I0", 1.1}, {"Ic", 0.09}, {"omega_L", 0.1635}, {"T0", 140.0}};
    NllsOptions opt;
    opt.max_iterations = 1;
    const FitResult r = nlls_solve(precession_model(), rec, init, opt);
    CHECK_FALSE(r.converged);
    CHECK(r.stop_reason == "max_iterations");
    opt.throw_on_max_iterations = true;
    try {
      nlls_solve(precession_model(), rec, init, opt);
      FAIL("expected MaxIterationsReached");
    } catch (const MaxIterationsReached& e) {
      CHECK(e.best().residual_norm <= r.residual_norm * (1.0 + 1e-12));
    }
    CurveModel flat{{"a"}, [](double, std::span<const double>) { return 1.0; }, {}};
    const std::vector<double> x{0, 1, 2, 3}, y{1, 2, 3, 4};
    CHECK_THROWS_AS(nlls_solve(flat, x, y, {{"a", 1.0}}), SingularJacobian);
    CHECK_THROWS_AS(nlls_solve(flat, x, y, {}), InvalidArgument);
  }

  TEST_CASE("bounds") {
    const std::vector<double> x{0, 1, 2, 3, 4}, y{-1, -1, -1, -1, -1};
    CurveModel c{{"c"}, [](double, std::span<const double> p) { return p[0]; }, {}};
    NllsOptions opt;
    opt.bounds = BoundsTable{{"c", {0.0, 5.0}}};
    const FitResult r = nlls_solve(c, x, y, {{"c", 1.0}}, opt);
    CHECK(r.value("c") == 0.0);
    CHECK_THROWS_AS(nlls_solve(c, x, y, {{"c", -1.0}}, opt), InitOutOfBounds);
  }

  TEST_CASE("noise estimate") {
    std::mt19937_64 rng(3);
    std::normal_distribution<double> n(0.0, 0.02);
    std::vector<double> v;
    for (int i = 0; i < 5000; ++i) v.push_back(1.0 + 0.001 * std::sin(0.01 * i) + n(rng));
    CHECK(noise_mad(v) == doctest::Approx(0.02).epsilon(0.1));
  }

  TEST_CASE("ODMR doublet: noiseless round trip") {
    const NVParameters p;
    const auto rec = synth_odmr(kReferenceField, p, Sweep{2780.0, 2792.0, 601});
    const FitResult r = fit_odmr_doublet(rec);
    const auto lines = exact_transitions(kReferenceField, p).branch_lines(Branch::minus);
    CHECK(r.converged);
    CHECK(rel(r.value("c1"), lines[0]) < 1e-9);
    CHECK(rel(r.value("c2"), lines[1]) < 1e-9);
    CHECK(std::abs(r.value("c1") - lines[0]) < 0.01);
    CHECK(rel(r.value("linewidth"), kDefaultOdmrLinewidth) < 1e-6);
    CHECK(rel(r.value("contrast"), kDefaultOdmrContrast) < 1e-6);
    CHECK(rel(r.value("baseline"), 1.0) < 1e-6);
    CHECK(r.value("c1") < r.value("c2"));
  }

  TEST_CASE("ODMR doublet: counting noise at the quoted photon rate") {
    // 3e4 counts/s, 3 ms per point: centre sigmas of order 0.06 MHz.
    const NVParameters p;
    const auto clean = synth_odmr(kReferenceField, p, Sweep{2780.0, 2792.0, 601});
    std::vector<double> c1, s1;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const FitResult r = fit_odmr_doublet(add_shot_noise(clean, 3e4, 3e-3, seed));
      c1.push_back(r.value("c1"));
      s1.push_back(r.sigma("c1"));
    }
    const Stats c = stats(c1);
    const Stats s = stats(s1);
    CHECK(s.mean > 0.02);
    CHECK(s.mean < 0.2);
    const double ratio = c.sd / s.mean;
    CHECK(ratio >= 0.5);
    CHECK(ratio <= 2.0);
  }

  TEST_CASE("ODMR doublet: one dip") {
    const std::vector<double> one{2786.0};
    const auto rec = synth_odmr_lines(one, Sweep{2780.0, 2792.0, 601});
    CHECK_THROWS_AS(fit_odmr_doublet(rec), PeakSearchFailed);
    const auto noisy = add_shot_noise(rec, 3e4, 0.1, 5);
    CHECK_THROWS_AS(fit_odmr_doublet(noisy), PeakSearchFailed);
  }

  TEST_CASE("precession: noiseless round trip") {
    const PrecessionModel m{1.0, 0.1, 0.1632, 156.0};
    const auto rec = synth_precession(m, linspace(0.0, 312.0, 625));
    const FitResult r = fit_precession(rec);
    CHECK(r.converged);
    CHECK(rel(r.value("omega_L"), 0.1632) < 1e-6);
    CHECK(rel(r.value("T0"), 156.0) < 1e-6);
    CHECK(rel(r.value("Ic"), 0.1) < 1e-6);
    CHECK(rel(r.value("I0"), 1.0) < 1e-6);
  }

  TEST_CASE("precession: noisy trace at the quoted readout noise") {
    // Same photon budget as one readout at dI/Ic = 0.045 spread over 625 points.
    const PrecessionModel m{1.0, 0.1, 0.1632, 156.0};
    const auto clean = synth_precession(m, linspace(0.0, 312.0, 625));
    const double sigma = 0.045 * std::sqrt(625.0) * m.Ic;
    std::vector<double> w, s;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const FitResult r = fit_precession(add_gaussian_noise(clean, sigma, seed));
      w.push_back(r.value("omega_L"));
      s.push_back(r.sigma("omega_L"));
    }
    const Stats ws = stats(w);
    const Stats ss = stats(s);
    CHECK(std::abs(ws.mean - 0.1632) < 1e-4);
    CHECK(ss.mean == doctest::Approx(3e-4).epsilon(0.5));
    CHECK(ws.sd / ss.mean >= 0.5);
    CHECK(ws.sd / ss.mean <= 2.0);
  }

  TEST_CASE("precession: grid and identifiability") {
    const auto t = linspace(0.0, 312.0, 625);
    const PrecessionModel fast{1.0, 0.1, 0.7, 156.0};
    CHECK_THROWS_AS(fit_precession(synth_precession(fast, t)), GridTooCoarse);
    const PrecessionModel slow{1.0, 0.1, 0.1632, 156.0};
    CHECK_THROWS_AS(fit_precession(synth_precession(slow, linspace(0.0, 20.0, 100))),
                    InvalidArgument);

    const PrecessionModel none{1.0, 0.0, 0.1632, 156.0};
    const auto flat = add_gaussian_noise(synth_precession(none, t), 0.01, 9);
    const FitResult r = fit_precession(flat);
    CHECK(r.unidentifiable("omega_L"));
    CHECK(std::isinf(r.sigma("omega_L")));
    CHECK(r.has_flag("no_oscillation"));
  }

  TEST_CASE("echo: noiseless round trip from a 10% perturbed start") {
    const auto taus = linspace(0.0, 40.0, 2001);
    const auto rec = synth_echo(echo_from(kEchoTruth), taus);
    const ParamTable init{{"tau_c", 10.8}, {"tau_re", 25.5}, {"a", 0.46},
                          {"b", 0.75},     {"omega1", 0.17}, {"omega2", 3.1}};
    const FitResult r = fit_echo(rec, init);
    CHECK(r.converged);
    for (const auto& [k, v] : kEchoTruth) CHECK(rel(r.value(k), v) < 1e-6);
    CHECK(r.value("scale") == doctest::Approx(1.0).epsilon(1e-9));
  }

  TEST_CASE("echo: noisy revival time") {
    const auto taus = linspace(0.0, 40.0, 2001);
    const auto clean = synth_echo(echo_from(kEchoTruth), taus);
    std::vector<double> tr, s;
    for (std::uint64_t seed = 0; seed < 200; ++seed) {
      const FitResult r = fit_echo(add_gaussian_noise(clean, 0.02, seed), kEchoTruth);
      tr.push_back(r.value("tau_re"));
      s.push_back(r.sigma("tau_re"));
    }
    const Stats t = stats(tr);
    CHECK(std::abs(t.mean - 24.27) < 0.06);
    const double ratio = t.sd / stats(s).mean;
    CHECK(ratio >= 0.5);
    CHECK(ratio <= 2.0);
  }

  TEST_CASE("echo: no modulation and bad init") {
    ParamTable flat = kEchoTruth;
    flat["a"] = 0.0;
    const auto rec = synth_echo(echo_from(flat), linspace(0.0, 40.0, 2001));
    const FitResult r = fit_echo(add_gaussian_noise(rec, 0.005, 2), kEchoTruth);
    CHECK(r.unidentifiable("omega1"));
    CHECK(r.unidentifiable("omega2"));
    ParamTable bad = kEchoTruth;
    bad["a"] = 1.5;
    CHECK_THROWS_AS(fit_echo(rec, bad), InitOutOfBounds);
  }

  TEST_CASE("frequency estimates are invariant under intensity rescaling") {
    const double f = 1.7;
    const NVParameters p;
    const auto odmr = add_shot_noise(synth_odmr(kReferenceField, p, Sweep{}), 3e4, 0.01, 4);
    const FitResult a = fit_odmr_doublet(odmr);
    const FitResult b = fit_odmr_doublet(scale_record(odmr, f));
    CHECK(rel(b.value("c1"), a.value("c1")) < 1e-9);
    CHECK(rel(b.value("c2"), a.value("c2")) < 1e-9);

    const auto prec = add_gaussian_noise(
        synth_precession({1.0, 0.1, 0.1632, 156.0}, linspace(0.0, 312.0, 625)), 0.05, 4);
    CHECK(rel(fit_precession(scale_record(prec, f)).value("omega_L"),
              fit_precession(prec).value("omega_L")) < 1e-9);

    const auto echo = add_gaussian_noise(synth_echo(echo_from(kEchoTruth), linspace(0.0, 40.0, 2001)),
                                         0.01, 4);
    ParamTable init = kEchoTruth;
    const FitResult e1 = fit_echo(echo, init);
    init["scale"] = f;
    const FitResult e2 = fit_echo(scale_record(echo, f), init);
    CHECK(rel(e2.value("tau_re"), e1.value("tau_re")) < 1e-9);
    CHECK(rel(e2.value("scale"), f * e1.value("scale")) < 1e-9);
  }

  TEST_CASE("record kind is checked") {
    const auto rec = synth_precession({1.0, 0.1, 0.1632, 156.0}, linspace(0.0, 312.0, 625));
    CHECK_THROWS_AS(fit_odmr_doublet(rec), InvalidArgument);
  }
}
