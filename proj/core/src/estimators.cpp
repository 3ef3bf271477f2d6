#include "nvmag/estimators.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>
#include <numbers>

namespace nvmag {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMaxDamping = 1e16;

std::size_t index_of(const std::vector<std::string>& names, std::string_view name) {
  const auto it = std::find(names.begin(), names.end(), name);
  if (it == names.end()) throw InvalidArgument("unknown parameter '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - names.begin());
}

struct Problem {
  const CurveModel& model;
  std::span<const double> x;
  std::span<const double> y;
  Eigen::VectorXd lower;
  Eigen::VectorXd upper;

  Eigen::Index n() const { return static_cast<Eigen::Index>(x.size()); }
  Eigen::Index m() const { return static_cast<Eigen::Index>(model.names.size()); }

  Eigen::VectorXd residuals(const Eigen::VectorXd& p) const {
    Eigen::VectorXd r(n());
    const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
    for (Eigen::Index i = 0; i < n(); ++i) r(i) = y[i] - model.eval(x[i], ps);
    return r;
  }

  // Jacobian of the model (not of the residuals).
  Eigen::MatrixXd jacobian(const Eigen::VectorXd& p) const {
    Eigen::MatrixXd J(n(), m());
    const std::span<const double> ps(p.data(), static_cast<std::size_t>(p.size()));
    if (model.gradient) {
      std::vector<double> g(static_cast<std::size_t>(m()));
      for (Eigen::Index i = 0; i < n(); ++i) {
        model.gradient(x[i], ps, g);
        for (Eigen::Index j = 0; j < m(); ++j) J(i, j) = g[static_cast<std::size_t>(j)];
      }
      return J;
    }
    Eigen::VectorXd q = p;
    for (Eigen::Index j = 0; j < m(); ++j) {
      const double h = 6e-6 * std::max(std::abs(p(j)), 1e-6);
      q(j) = p(j) + h;
      const std::span<const double> qs(q.data(), static_cast<std::size_t>(q.size()));
      Eigen::VectorXd fp(n());
      for (Eigen::Index i = 0; i < n(); ++i) fp(i) = model.eval(x[i], qs);
      q(j) = p(j) - h;
      for (Eigen::Index i = 0; i < n(); ++i) J(i, j) = (fp(i) - model.eval(x[i], qs)) / (2 * h);
      q(j) = p(j);
    }
    return J;
  }

  Eigen::VectorXd clamp(const Eigen::VectorXd& p) const { return p.cwiseMax(lower).cwiseMin(upper); }
};

// Covariance from the Gauss-Newton normal matrix, column-scaled so the
// rank test does not depend on parameter units. Parameters touching the
// numerical null space get infinite variance.
Eigen::MatrixXd covariance_of(const Eigen::MatrixXd& J, double residual_variance) {
  const Eigen::Index m = J.cols();
  Eigen::VectorXd colnorm = J.colwise().norm().transpose();
  Eigen::MatrixXd cov = Eigen::MatrixXd::Constant(m, m, kInf);
  std::vector<bool> dead(static_cast<std::size_t>(m), false);
  for (Eigen::Index j = 0; j < m; ++j)
    if (!(colnorm(j) > 0.0) || !std::isfinite(colnorm(j))) {
      dead[static_cast<std::size_t>(j)] = true;
      colnorm(j) = 1.0;
    }
  const Eigen::MatrixXd Js = J * colnorm.cwiseInverse().asDiagonal();
  const Eigen::MatrixXd N = Js.transpose() * Js;
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(N);
  const Eigen::VectorXd ev = es.eigenvalues();
  const double emax = std::max(ev.maxCoeff(), 0.0);
  Eigen::MatrixXd inv = Eigen::MatrixXd::Zero(m, m);
  for (Eigen::Index k = 0; k < m; ++k) {
    const Eigen::VectorXd v = es.eigenvectors().col(k);
    if (ev(k) > 1e-14 * emax && emax > 0.0) {
      inv += v * v.transpose() / ev(k);
    } else {
      for (Eigen::Index j = 0; j < m; ++j)
        if (std::abs(v(j)) > 1e-6) dead[static_cast<std::size_t>(j)] = true;
    }
  }
  for (Eigen::Index a = 0; a < m; ++a)
    for (Eigen::Index b = 0; b < m; ++b) {
      if (dead[static_cast<std::size_t>(a)] || dead[static_cast<std::size_t>(b)]) continue;
      cov(a, b) = residual_variance * inv(a, b) / (colnorm(a) * colnorm(b));
    }
  return cov;
}

void flag_unidentifiable(FitResult& r, std::string_view name) {
  const std::string flag = "unidentifiable:" + std::string(name);
  if (!r.has_flag(flag)) r.flags.push_back(flag);
}

void flag_wide_sigmas(FitResult& r) {
  for (std::size_t j = 0; j < r.names.size(); ++j) {
    const auto jj = static_cast<Eigen::Index>(j);
    if (!std::isfinite(r.sigmas(jj)) || r.sigmas(jj) > std::abs(r.values(jj)))
      flag_unidentifiable(r, r.names[j]);
  }
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2);
  std::nth_element(v.begin(), mid, v.end());
  double m = *mid;
  if (v.size() % 2 == 0) m = 0.5 * (m + *std::max_element(v.begin(), mid));
  return m;
}

void require_kind(const MeasurementRecord& rec, RecordKind kind) {
  if (rec.kind != kind)
    throw InvalidArgument("expected a " + to_string(kind) + " record, got " + to_string(rec.kind));
}

}  // namespace

double FitResult::value(std::string_view name) const {
  return values(static_cast<Eigen::Index>(index_of(names, name)));
}

double FitResult::sigma(std::string_view name) const {
  return sigmas(static_cast<Eigen::Index>(index_of(names, name)));
}

bool FitResult::has_flag(std::string_view flag) const {
  return std::find(flags.begin(), flags.end(), flag) != flags.end();
}

bool FitResult::unidentifiable(std::string_view name) const {
  return has_flag("unidentifiable:" + std::string(name));
}

ParamTable FitResult::params() const {
  ParamTable t;
  for (std::size_t j = 0; j < names.size(); ++j) t[names[j]] = values(static_cast<Eigen::Index>(j));
  return t;
}

FitResult nlls_solve(const CurveModel& model, std::span<const double> x, std::span<const double> y,
                     const ParamTable& init, const NllsOptions& options) {
  const auto m = static_cast<Eigen::Index>(model.names.size());
  if (x.size() != y.size()) throw InvalidArgument("x and y differ in length");
  if (static_cast<Eigen::Index>(x.size()) <= m)
    throw InvalidArgument("need more data points than parameters");

  Problem prob{model, x, y, Eigen::VectorXd::Constant(m, -kInf), Eigen::VectorXd::Constant(m, kInf)};
  Eigen::VectorXd p(m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& name = model.names[static_cast<std::size_t>(j)];
    const auto it = init.find(name);
    if (it == init.end()) throw InvalidArgument("missing initial value for '" + name + "'");
    if (!std::isfinite(it->second)) throw InvalidArgument("initial value for '" + name + "' is not finite");
    p(j) = it->second;
    if (options.bounds) {
      if (const auto b = options.bounds->find(name); b != options.bounds->end()) {
        prob.lower(j) = b->second.first;
        prob.upper(j) = b->second.second;
        if (p(j) < b->second.first || p(j) > b->second.second)
          throw InitOutOfBounds("initial value for '" + name + "' outside its bounds");
      }
    }
  }

  Eigen::VectorXd r = prob.residuals(p);
  double cost = r.squaredNorm();
  double lambda = options.initial_damping;
  Eigen::MatrixXd J = prob.jacobian(p);
  Eigen::VectorXd g = J.transpose() * r;

  FitResult out;
  out.names = model.names;
  int iter = 0;
  bool converged = false;
  std::string reason = "max_iterations";

  while (iter < options.max_iterations) {
    const Eigen::MatrixXd JtJ = J.transpose() * J;
    Eigen::VectorXd diag = JtJ.diagonal();
    if (!(diag.maxCoeff() > 0.0)) throw SingularJacobian("Jacobian is identically zero");
    if (g.cwiseAbs().maxCoeff() < options.gtol) {
      converged = true;
      reason = "gradient";
      break;
    }
    // Parameters with a vanishing column get unit damping and therefore a
    // zero step (their gradient entry is zero too).
    for (Eigen::Index j = 0; j < m; ++j)
      if (!(diag(j) > 0.0)) diag(j) = 1.0;

    bool accepted = false;
    while (lambda < kMaxDamping) {
      Eigen::MatrixXd Aug = JtJ;
      Aug.diagonal() += lambda * diag;
      const Eigen::VectorXd step = Aug.ldlt().solve(g);
      if (!step.allFinite()) throw SingularJacobian("damped normal equations are singular");
      const Eigen::VectorXd trial = prob.clamp(p + step);
      const Eigen::VectorXd rt = prob.residuals(trial);
      const double ct = rt.squaredNorm();
      if (std::isfinite(ct) && ct < cost) {
        const double dp = (trial - p).norm();
        p = trial;
        r = rt;
        cost = ct;
        lambda = std::max(lambda / 10.0, 1e-15);
        accepted = true;
        if (dp <= options.xtol * (p.norm() + options.xtol)) {
          converged = true;
          reason = "step";
        }
        break;
      }
      lambda *= 10.0;
    }
    ++iter;
    if (accepted) {
      J = prob.jacobian(p);
      g = J.transpose() * r;
    }
    if (converged) break;
    if (!accepted) {
      // No descent direction within machine precision: a numerical minimum.
      converged = true;
      reason = "stalled";
      break;
    }
  }

  const auto n = static_cast<double>(x.size());
  const double dof = n - static_cast<double>(m);
  out.values = p;
  out.covariance = covariance_of(J, cost / dof);
  out.sigmas = out.covariance.diagonal().cwiseMax(0.0).cwiseSqrt();
  for (Eigen::Index j = 0; j < m; ++j)
    if (!std::isfinite(out.covariance(j, j))) out.sigmas(j) = kInf;
  out.residual_norm = std::sqrt(cost / n);
  out.gradient_norm = g.cwiseAbs().maxCoeff();
  out.converged = converged;
  out.iterations = iter;
  out.stop_reason = reason;
  flag_wide_sigmas(out);
  if (!converged && options.throw_on_max_iterations)
    throw MaxIterationsReached("least squares did not converge in " +
                                   std::to_string(options.max_iterations) + " iterations",
                               out);
  return out;
}

FitResult nlls_solve(const CurveModel& model, const MeasurementRecord& data, const ParamTable& init,
                     const NllsOptions& options) {
  return nlls_solve(model, data.axis, data.values, init, options);
}

double noise_mad(std::span<const double> values) {
  if (values.size() < 3) return 0.0;
  std::vector<double> d(values.size() - 1);
  for (std::size_t i = 1; i < values.size(); ++i) d[i - 1] = values[i] - values[i - 1];
  const double med = median(d);
  for (double& v : d) v = std::abs(v - med);
  // Differences of iid noise have variance 2 sigma^2.
  return 1.4826 * median(d) / std::numbers::sqrt2;
}

CurveModel odmr_doublet_model() {
  CurveModel m;
  m.names = {"c1", "c2", "linewidth", "contrast", "baseline"};
  m.eval = [](double f, std::span<const double> p) {
    const double centers[2] = {p[0], p[1]};
    return odmr_value(f, centers, p[2], p[3], p[4]);
  };
  m.gradient = [](double f, std::span<const double> p, std::span<double> g) {
    const double h = 0.5 * p[2];
    const double k = p[3];
    const double b0 = p[4];
    double lsum = 0.0;
    double dldw = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double d = f - p[static_cast<std::size_t>(i)];
      const double q = d * d + h * h;
      lsum += h * h / q;
      g[static_cast<std::size_t>(i)] = -b0 * k * 2.0 * h * h * d / (q * q);
      dldw += h * d * d / (q * q);  // dL/dh * 1/2
    }
    g[2] = -b0 * k * dldw;
    g[3] = -b0 * lsum;
    g[4] = 1.0 - k * lsum;
  };
  return m;
}

CurveModel precession_model() {
  CurveModel m;
  m.names = {"I0", "Ic", "omega_L", "T0"};
  m.eval = [](double t, std::span<const double> p) {
    return precession_value({p[0], p[1], p[2], p[3]}, t);
  };
  m.gradient = [](double t, std::span<const double> p, std::span<double> g) {
    const double ph = kTwoPi * p[2] * t;
    const double e = std::exp(-t / p[3]);
    g[0] = 1.0;
    g[1] = std::cos(ph) * e;
    g[2] = -p[1] * std::sin(ph) * kTwoPi * t * e;
    g[3] = p[1] * std::cos(ph) * e * t / (p[3] * p[3]);
  };
  return m;
}

CurveModel echo_model() {
  CurveModel m;
  m.names = {"tau_c", "tau_re", "a", "b", "omega1", "omega2", "scale"};
  m.eval = [](double tau, std::span<const double> p) {
    return p[6] * echo_value({p[0], p[1], p[2], p[3], p[4], p[5]}, tau);
  };
  return m;
}

FitResult fit_odmr_doublet(const MeasurementRecord& rec) {
  require_kind(rec, RecordKind::odmr);
  rec.validate();
  const auto& f = rec.axis;
  const auto& v = rec.values;
  const std::size_t n = v.size();
  if (n < 8) throw PeakSearchFailed("too few points for a doublet fit");

  const double noise = noise_mad(v);
  const double baseline = median(v);

  // Minima are searched on a box-smoothed copy so single noisy samples do not
  // split a dip in two.
  const std::size_t half_w = std::max<std::size_t>(1, n / 100);
  std::vector<double> sm(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t a = i >= half_w ? i - half_w : 0;
    const std::size_t b = std::min(n - 1, i + half_w);
    double acc = 0.0;
    for (std::size_t k = a; k <= b; ++k) acc += v[k];
    sm[i] = acc / static_cast<double>(b - a + 1);
  }
  const double noise_sm = noise / std::sqrt(static_cast<double>(2 * half_w + 1));
  const double threshold = baseline - 2.0 * noise_sm;

  std::vector<std::size_t> minima;
  for (std::size_t i = 1; i + 1 < n; ++i)
    if (sm[i] < sm[i - 1] && sm[i] <= sm[i + 1] && sm[i] < threshold) minima.push_back(i);
  if (minima.size() < 2) throw PeakSearchFailed("fewer than two dips below the noise floor");
  std::sort(minima.begin(), minima.end(), [&](std::size_t a, std::size_t b) { return sm[a] < sm[b]; });

  const std::size_t first = minima.front();
  const double depth = baseline - sm[first];
  const double half = baseline - 0.5 * depth;
  std::size_t lo = first;
  std::size_t hi = first;
  while (lo > 0 && sm[lo] < half) --lo;
  while (hi + 1 < n && sm[hi] < half) ++hi;
  // Half-width estimate, capped so an unresolved neighbour does not inflate it.
  const double step = (f.back() - f.front()) / static_cast<double>(n - 1);
  double fwhm = std::max(f[hi] - f[lo], 2.0 * step);
  fwhm = std::min(fwhm, 0.25 * (f.back() - f.front()));

  // The second dip must be separated from the first by a genuine rise.
  std::size_t second = n;
  for (std::size_t k = 1; k < minima.size() && second == n; ++k) {
    const std::size_t m = minima[k];
    if (std::abs(f[m] - f[first]) < 0.5 * fwhm) continue;
    // Hyperfine partners have near-equal depths; shallow wiggles are noise.
    if (baseline - sm[m] < 0.25 * depth) continue;
    const auto [a, b] = std::minmax(m, first);
    const double ridge = *std::max_element(sm.begin() + static_cast<std::ptrdiff_t>(a),
                                           sm.begin() + static_cast<std::ptrdiff_t>(b) + 1);
    if (ridge - sm[m] > 3.0 * noise_sm) second = m;
  }
  if (second == n) throw PeakSearchFailed("no second dip separated from the deepest one");

  double c1 = f[first];
  double c2 = f[second];
  if (c1 > c2) std::swap(c1, c2);
  const double sep = c2 - c1;
  fwhm = std::min(fwhm, sep);
  const double contrast = std::clamp(depth / baseline, 1e-6, 0.99);

  NllsOptions opt;
  opt.bounds = BoundsTable{{"linewidth", {1e-9, kInf}}, {"contrast", {0.0, 1.0}}};
  FitResult r = nlls_solve(odmr_doublet_model(), rec,
                           {{"c1", c1}, {"c2", c2}, {"linewidth", fwhm},
                            {"contrast", contrast}, {"baseline", baseline}},
                           opt);
  if (r.values(0) > r.values(1)) {
    std::swap(r.values(0), r.values(1));
    std::swap(r.sigmas(0), r.sigmas(1));
    r.covariance.row(0).swap(r.covariance.row(1));
    r.covariance.col(0).swap(r.covariance.col(1));
  }
  return r;
}

FitResult fit_precession(const MeasurementRecord& rec, const FrequencyGrid& grid) {
  require_kind(rec, RecordKind::precession);
  rec.validate();
  if (!(grid.min > 0.0) || !(grid.max > grid.min))
    throw InvalidArgument("frequency grid needs 0 < min < max");
  const auto& t = rec.axis;
  const auto& v = rec.values;
  if (t.size() < 5) throw InvalidArgument("precession trace too short");
  const double span = t.back() - t.front();
  if (span * grid.min < 2.0)
    throw InvalidArgument("trace must span at least two periods of the lowest grid frequency");

  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= static_cast<double>(v.size());

  const double step = grid.step > 0.0 ? grid.step : 0.5 / span;
  const int nf = static_cast<int>(std::floor((grid.max - grid.min) / step)) + 1;
  if (nf < 3) throw GridTooCoarse("frequency grid has fewer than three points");
  double total = 0.0;
  for (double x : v) total += (x - mean) * (x - mean);
  const bool flat = !(total > 1e-24 * std::max(1.0, mean * mean) * static_cast<double>(v.size()));

  // The periodogram is also evaluated over a guard band of 1.5 resolution
  // widths on each side; a strongest peak there lies beyond the grid.
  const int guard = static_cast<int>(std::ceil(1.5 / (span * step)));
  int k_first = -guard;
  while (grid.min + step * k_first <= 0.0) ++k_first;
  const int k_last = nf - 1 + guard;
  const auto freq = [&](int k) { return grid.min + step * k; };
  std::vector<double> power(static_cast<std::size_t>(k_last - k_first + 1));
  const auto pw = [&](int k) -> double& { return power[static_cast<std::size_t>(k - k_first)]; };
  for (int k = k_first; k <= k_last; ++k) {
    const double fk = freq(k);
    std::complex<double> acc = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i)
      acc += (v[i] - mean) * std::polar(1.0, -kTwoPi * fk * t[i]);
    pw(k) = std::norm(acc);
  }
  const int kmax = k_first + static_cast<int>(std::max_element(power.begin(), power.end()) - power.begin());
  const double pmax = pw(kmax);

  // Candidate starting frequencies: the strongest interior local maxima.
  std::vector<double> starts;
  if (flat) {
    starts.push_back(0.5 * (grid.min + grid.max));
  } else {
    if (kmax <= 0 || kmax >= nf - 1) throw GridTooCoarse("periodogram peak at or beyond the grid edge");
    std::vector<int> peaks;
    for (int k = std::max(1, k_first + 1); k < std::min(nf - 1, k_last); ++k)
      if (pw(k) >= pw(k - 1) && pw(k) > pw(k + 1) && pw(k) >= 0.5 * pmax) peaks.push_back(k);
    std::sort(peaks.begin(), peaks.end(), [&](int a, int b) { return pw(a) > pw(b); });
    if (peaks.size() > 3) peaks.resize(3);
    for (int k : peaks) {
      double f0 = freq(k);
      const double pl = pw(k - 1);
      const double pr = pw(k + 1);
      const double denom = pl - 2.0 * pw(k) + pr;
      if (denom < 0.0) f0 += 0.5 * step * (pl - pr) / denom;
      starts.push_back(f0);
    }
  }

  NllsOptions opt;
  opt.bounds = BoundsTable{{"T0", {1e-9, kInf}}};
  const double T0_init = 0.5 * span + t.front();
  std::optional<FitResult> best;
  for (double f0 : starts) {
    // Amplitude seed from the projection onto a decaying cosine.
    double num = 0.0;
    double den = 0.0;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double basis = std::cos(kTwoPi * f0 * t[i]) * std::exp(-t[i] / T0_init);
      num += (v[i] - mean) * basis;
      den += basis * basis;
    }
    const double Ic_init = den > 0.0 ? num / den : 0.0;
    FitResult cand = nlls_solve(precession_model(), rec,
                                {{"I0", mean}, {"Ic", Ic_init}, {"omega_L", f0}, {"T0", T0_init}}, opt);
    if (!best || cand.residual_norm < best->residual_norm) best = std::move(cand);
  }
  FitResult r = std::move(*best);
  r.values(2) = std::abs(r.values(2));

  const double ic = std::abs(r.value("Ic"));
  const double scale = std::max(std::abs(r.value("I0")), 1e-300);
  if (flat || !(ic > 3.0 * r.sigma("Ic")) || ic < 1e-9 * scale) {
    for (const char* name : {"omega_L", "T0"}) {
      r.sigmas(static_cast<Eigen::Index>(index_of(r.names, name))) = kInf;
      flag_unidentifiable(r, name);
    }
    r.flags.push_back("no_oscillation");
  }
  return r;
}

// The modulation frequencies sit in narrow basins (a few kHz over a
// tens-of-us trace), far narrower than a 10% init error. With the envelope
// held at the init, the model is linear in (scale, scale * a), so a grid over
// (omega1, omega2) within +-12% of the init is cheap; the best cell seeds
// the full fit.
static void lock_echo_frequencies(const MeasurementRecord& rec, ParamTable& start) {
  const auto& tau = rec.axis;
  const auto& y = rec.values;
  const double span = tau.back() - tau.front();
  if (!(span > 0.0)) return;
  const EchoModel env{start.at("tau_c"), start.at("tau_re"), 0.0, start.at("b"), 0.0, 0.0};
  std::vector<double> e(tau.size());
  for (std::size_t i = 0; i < tau.size(); ++i) e[i] = echo_envelope(env, tau[i]);

  const double dstep = 0.25 / span;
  const auto axis = [&](double centre) {
    std::vector<double> out;
    const double lo = std::max(0.0, 0.88 * centre);
    const double hi = 1.12 * centre;
    const int n = std::max(1, static_cast<int>(std::ceil((hi - lo) / dstep)));
    for (int k = 0; k <= n; ++k) out.push_back(lo + (hi - lo) * k / n);
    return out;
  };
  const std::vector<double> w1s = axis(start.at("omega1"));
  const std::vector<double> w2s = axis(start.at("omega2"));

  std::vector<std::vector<double>> s2(w2s.size(), std::vector<double>(tau.size()));
  for (std::size_t j = 0; j < w2s.size(); ++j)
    for (std::size_t i = 0; i < tau.size(); ++i) {
      const double s = std::sin(kTwoPi * w2s[j] * tau[i] / 2.0);
      s2[j][i] = s * s;
    }

  double best = kInf;
  for (double w1 : w1s) {
    std::vector<double> s1(tau.size());
    for (std::size_t i = 0; i < tau.size(); ++i) {
      const double s = std::sin(kTwoPi * w1 * tau[i] / 2.0);
      s1[i] = s * s;
    }
    for (std::size_t j = 0; j < w2s.size(); ++j) {
      // y ~ c0 * u + c1 * w with u = 1/2 + e/2 and w = -e M / 2.
      double uu = 0, uw = 0, ww = 0, uy = 0, wy = 0, yy = 0;
      for (std::size_t i = 0; i < tau.size(); ++i) {
        const double u = 0.5 + 0.5 * e[i];
        const double w = -0.5 * e[i] * s1[i] * s2[j][i];
        uu += u * u;
        uw += u * w;
        ww += w * w;
        uy += u * y[i];
        wy += w * y[i];
        yy += y[i] * y[i];
      }
      const double det = uu * ww - uw * uw;
      if (!(det > 1e-300)) continue;
      const double c0 = (uy * ww - wy * uw) / det;
      const double c1 = (wy * uu - uy * uw) / det;
      const double sse = yy - c0 * uy - c1 * wy;
      if (sse < best && c0 > 0.0) {
        best = sse;
        start["omega1"] = w1;
        start["omega2"] = w2s[j];
        start["scale"] = c0;
        start["a"] = std::clamp(c1 / c0, 0.0, 1.0);
      }
    }
  }
}

FitResult fit_echo(const MeasurementRecord& rec, const ParamTable& init) {
  require_kind(rec, RecordKind::echo);
  rec.validate();
  ParamTable start = init;
  start.try_emplace("scale", 1.0);
  for (const char* name : {"tau_c", "tau_re", "a", "b", "omega1", "omega2"})
    if (!start.contains(name)) throw InvalidArgument(std::string("missing echo init '") + name + "'");

  NllsOptions opt;
  opt.bounds = BoundsTable{{"tau_c", {1e-9, kInf}}, {"tau_re", {1e-9, kInf}},
                           {"a", {0.0, 1.0}},       {"b", {0.0, 1.0}},
                           {"omega1", {0.0, kInf}}, {"omega2", {0.0, kInf}},
                           {"scale", {0.0, kInf}}};
  for (const auto& [name, lim] : *opt.bounds) {
    const double x = start.at(name);
    if (!(x >= lim.first && x <= lim.second))
      throw InitOutOfBounds("echo init '" + name + "' outside its bounds");
  }
  lock_echo_frequencies(rec, start);
  FitResult r = nlls_solve(echo_model(), rec, start, opt);

  const double a = r.value("a");
  if (!(a > 3.0 * r.sigma("a")) || a < 1e-9) {
    for (const char* name : {"omega1", "omega2"}) {
      r.sigmas(static_cast<Eigen::Index>(index_of(r.names, name))) = kInf;
      flag_unidentifiable(r, name);
    }
    r.flags.push_back("no_modulation");
  } else if (!r.converged) {
    // Without modulation the frequency directions are flat and a slow finish
    // is expected; otherwise it is an error.
    throw MaxIterationsReached("echo fit did not converge in " +
                                   std::to_string(opt.max_iterations) + " iterations",
                               r);
  }
  return r;
}

}  // namespace nvmag
