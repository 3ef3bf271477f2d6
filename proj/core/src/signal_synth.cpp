#include "nvmag/signal_synth.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr const char* kRngName = "std::mt19937_64";

void require_nonempty(std::span<const double> xs, const char* what) {
  if (xs.empty()) throw InvalidArgument(std::string(what) + " must be nonempty");
}

MeasurementRecord trace(RecordKind kind, std::span<const double> axis) {
  MeasurementRecord rec;
  rec.kind = kind;
  rec.axis.assign(axis.begin(), axis.end());
  rec.values.resize(axis.size());
  return rec;
}

}  // namespace

std::string to_string(RecordKind k) {
  switch (k) {
    case RecordKind::odmr: return "odmr";
    case RecordKind::precession: return "precession";
    case RecordKind::echo: return "echo";
  }
  return "unknown";
}

RecordKind record_kind_from_string(const std::string& s) {
  if (s == "odmr") return RecordKind::odmr;
  if (s == "precession") return RecordKind::precession;
  if (s == "echo") return RecordKind::echo;
  throw InvalidArgument("unknown record kind '" + s + "'");
}

void MeasurementRecord::validate() const {
  if (axis.size() != values.size()) throw InvalidArgument("axis/values length mismatch");
  for (std::size_t i = 1; i < axis.size(); ++i)
    if (!(axis[i] > axis[i - 1])) throw InvalidArgument("axis must be strictly increasing");
  for (double v : values)
    if (!std::isfinite(v)) throw InvalidArgument("record contains non-finite values");
}

std::vector<double> linspace(double start, double stop, int n) {
  if (n < 1) throw InvalidArgument("linspace needs n >= 1");
  std::vector<double> out(static_cast<std::size_t>(n));
  if (n == 1) {
    out[0] = start;
    return out;
  }
  const double step = (stop - start) / (n - 1);
  for (int i = 0; i < n; ++i) out[static_cast<std::size_t>(i)] = start + step * i;
  out.back() = stop;
  return out;
}

double lorentzian(double f, double center, double fwhm) {
  const double hw = 0.5 * fwhm;
  const double d = f - center;
  return hw * hw / (d * d + hw * hw);
}

double odmr_value(double f, std::span<const double> centers, double linewidth, double contrast,
                  double baseline) {
  double dip = 0.0;
  for (double c : centers) dip += lorentzian(f, c, linewidth);
  return baseline * (1.0 - contrast * dip);
}

double precession_value(const PrecessionModel& m, double t) {
  return m.I0 + m.Ic * std::cos(kTwoPi * m.omega_L * t) * std::exp(-t / m.T0);
}

double echo_envelope(const EchoModel& m, double tau) {
  const double x = tau / m.tau_c;
  const double y = (tau - m.tau_re) / m.tau_c;
  return std::exp(-x * x * x * x) + m.b * std::exp(-y * y * y * y);
}

double echo_value(const EchoModel& m, double tau) {
  const double s1 = std::sin(kTwoPi * m.omega1 * tau / 2.0);
  const double s2 = std::sin(kTwoPi * m.omega2 * tau / 2.0);
  return 0.5 + 0.5 * echo_envelope(m, tau) * (1.0 - m.a * s1 * s1 * s2 * s2);
}

MeasurementRecord synth_odmr_lines(std::span<const double> centers, const Sweep& sweep,
                                   double linewidth, double contrast) {
  if (sweep.n < 2) throw InvalidArgument("sweep needs at least two points");
  if (!(sweep.stop > sweep.start)) throw InvalidArgument("sweep stop must exceed start");
  if (!(linewidth > 0.0)) throw InvalidArgument("linewidth must be positive");
  if (!(contrast >= 0.0 && contrast < 1.0)) throw InvalidArgument("contrast must be in [0, 1)");

  std::vector<double> inside;
  for (double c : centers)
    if (c >= sweep.start && c <= sweep.stop) inside.push_back(c);
  if (inside.empty()) throw EmptySweep("no transition inside the sweep window");

  MeasurementRecord rec;
  rec.kind = RecordKind::odmr;
  rec.axis = linspace(sweep.start, sweep.stop, sweep.n);
  rec.values.reserve(rec.axis.size());
  for (double f : rec.axis) rec.values.push_back(odmr_value(f, inside, linewidth, contrast));
  rec.meta = {{"generator", "synth_odmr"},
              {"centers_mhz", inside},
              {"linewidth_mhz", linewidth},
              {"contrast", contrast},
              {"sweep", {{"start", sweep.start}, {"stop", sweep.stop}, {"n", sweep.n}}}};
  return rec;
}

MeasurementRecord synth_odmr(const FieldVector& B, const NVParameters& p, const Sweep& sweep,
                             double linewidth, double contrast) {
  const TransitionSet ts = exact_transitions(B, p);
  std::array<double, 4> centers;
  for (std::size_t k = 0; k < 4; ++k) centers[k] = ts.lines[k].frequency;
  MeasurementRecord rec = synth_odmr_lines(centers, sweep, linewidth, contrast);
  rec.meta["field_mt"] = {B.bx, B.by, B.bz};
  return rec;
}

MeasurementRecord synth_precession(const PrecessionModel& model, std::span<const double> times) {
  require_nonempty(times, "times");
  if (!(model.T0 > 0.0)) throw InvalidArgument("T0 must be positive");
  if (model.Ic < 0.0) throw InvalidArgument("Ic must be non-negative");
  MeasurementRecord rec = trace(RecordKind::precession, times);
  for (std::size_t i = 0; i < times.size(); ++i) rec.values[i] = precession_value(model, times[i]);
  rec.meta = {{"generator", "synth_precession"},
              {"I0", model.I0},
              {"Ic", model.Ic},
              {"omega_L_mhz", model.omega_L},
              {"T0_us", model.T0}};
  return rec;
}

MeasurementRecord synth_echo(const EchoModel& model, std::span<const double> taus) {
  require_nonempty(taus, "taus");
  if (!(model.tau_c > 0.0) || !(model.tau_re > 0.0))
    throw InvalidArgument("tau_c and tau_re must be positive");
  if (model.a < 0.0 || model.a > 1.0 || model.b < 0.0 || model.b > 1.0)
    throw InvalidArgument("a and b must lie in [0, 1]");
  MeasurementRecord rec = trace(RecordKind::echo, taus);
  bool exceeds = false;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    rec.values[i] = echo_value(model, taus[i]);
    exceeds = exceeds || echo_envelope(model, taus[i]) > 1.0;
  }
  rec.meta = {{"generator", "synth_echo"},   {"tau_c_us", model.tau_c},
              {"tau_re_us", model.tau_re},   {"a", model.a},
              {"b", model.b},                {"omega1_mhz", model.omega1},
              {"omega2_mhz", model.omega2},  {"envelope_exceeds_one", exceeds}};
  return rec;
}

MeasurementRecord add_shot_noise(const MeasurementRecord& rec, double photon_rate, double dwell,
                                 std::uint64_t seed) {
  if (!(photon_rate > 0.0) || !(dwell > 0.0))
    throw InvalidArgument("photon_rate and dwell must be positive");
  const double scale = photon_rate * dwell;
  std::mt19937_64 rng(seed);
  MeasurementRecord out = rec;
  for (double& v : out.values) {
    const double mean = std::max(0.0, v) * scale;
    if (mean <= 0.0) {
      v = 0.0;
      continue;
    }
    // poisson_distribution takes an integer result type; long long covers
    // any realistic photon budget.
    std::poisson_distribution<long long> draw(mean);
    v = static_cast<double>(draw(rng)) / scale;
  }
  out.meta["noise"] = {{"model", "poisson"},
                       {"photon_rate_hz", photon_rate},
                       {"dwell_s", dwell},
                       {"seed", seed},
                       {"rng", kRngName}};
  return out;
}

MeasurementRecord add_gaussian_noise(const MeasurementRecord& rec, double sigma,
                                     std::uint64_t seed) {
  if (sigma < 0.0) throw InvalidArgument("sigma must be non-negative");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> draw(0.0, 1.0);
  MeasurementRecord out = rec;
  for (double& v : out.values) v += sigma * draw(rng);
  out.meta["noise"] = {{"model", "gaussian"}, {"sigma", sigma}, {"seed", seed}, {"rng", kRngName}};
  return out;
}

}  // namespace nvmag
