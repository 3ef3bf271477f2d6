#pragma once

// Curve fitting for measurement records: a damped Gauss-Newton
// (Levenberg-Marquardt) engine plus the three model-specific fits.

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nvmag/errors.hpp"
#include "nvmag/signal_synth.hpp"

namespace nvmag {

using ParamTable = std::map<std::string, double>;
using BoundsTable = std::map<std::string, std::pair<double, double>>;

struct FitResult {
  std::vector<std::string> names;
  Eigen::VectorXd values;
  Eigen::VectorXd sigmas;  // 1 sigma, +inf when unidentifiable
  Eigen::MatrixXd covariance;
  double residual_norm = 0.0;  // RMS residual
  double gradient_norm = 0.0;  // max |J^T r| at the returned point
  bool converged = false;
  int iterations = 0;
  std::string stop_reason;
  std::vector<std::string> flags;

  double value(std::string_view name) const;
  double sigma(std::string_view name) const;
  bool has_flag(std::string_view flag) const;
  // Convenience: "unidentifiable:<name>" present.
  bool unidentifiable(std::string_view name) const;
  ParamTable params() const;
};

// Parametric curve y = f(x; p). `gradient`, when set, fills df/dp; otherwise
// central differences are used.
struct CurveModel {
  std::vector<std::string> names;
  std::function<double(double x, std::span<const double> p)> eval;
  std::function<void(double x, std::span<const double> p, std::span<double> grad)> gradient;
};

struct NllsOptions {
  std::optional<BoundsTable> bounds;
  int max_iterations = 500;
  double xtol = 1e-10;  // relative parameter change
  double gtol = 1e-12;  // max |J^T r|
  double initial_damping = 1e-3;
  // Throw MaxIterationsReached instead of returning converged = false.
  bool throw_on_max_iterations = false;
};

class MaxIterationsReached : public MaxIterations {
 public:
  MaxIterationsReached(const std::string& what, FitResult best)
      : MaxIterations(what), best_(std::move(best)) {}
  const FitResult& best() const { return best_; }

 private:
  FitResult best_;
};

FitResult nlls_solve(const CurveModel& model, std::span<const double> x, std::span<const double> y,
                     const ParamTable& init, const NllsOptions& options = {});

FitResult nlls_solve(const CurveModel& model, const MeasurementRecord& data,
                     const ParamTable& init, const NllsOptions& options = {});

// Robust noise scale: MAD of first differences, scaled to a Gaussian sigma.
double noise_mad(std::span<const double> values);

// Two-Lorentzian-dip fit. Params: c1 < c2, linewidth, contrast, baseline.
FitResult fit_odmr_doublet(const MeasurementRecord& rec);

struct FrequencyGrid {
  double min = 0.05;  // MHz
  double max = 0.5;   // MHz
  double step = 0.0;  // 0 selects 0.5 / T_span
};

// Periodogram seed followed by a least-squares refinement.
// Params: I0, Ic, omega_L, T0.
FitResult fit_precession(const MeasurementRecord& rec, const FrequencyGrid& grid = {});

// Echo fit from a caller-supplied starting point. Params: tau_c, tau_re, a,
// b, omega1, omega2 and a nuisance intensity `scale` (defaults to 1 when
// absent from init).
FitResult fit_echo(const MeasurementRecord& rec, const ParamTable& init);

CurveModel odmr_doublet_model();
CurveModel precession_model();
CurveModel echo_model();

}  // namespace nvmag
