#include "nvmag/sensitivity.hpp"

#include <cmath>
#include <numbers>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {
constexpr double kTwoPi = 2.0 * std::numbers::pi;
constexpr double kMinTransverse = 1e-6;  // mT
}  // namespace

void NoiseBudget::validate() const {
  if (delta_omega_odmr < 0.0 || noise_ratio < 0.0 || dD_dT < 0.0 || delta_T < 0.0)
    throw InvalidArgument("noise budget entries must be non-negative");
  if (!(t_probe > 0.0) || !(T0 > 0.0)) throw InvalidArgument("t_probe and T0 must be positive");
}

double delta_bz_odmr(const NoiseBudget& budget, const NVParameters& p) {
  if (budget.delta_omega_odmr < 0.0) throw InvalidArgument("delta_omega_odmr must be non-negative");
  return budget.delta_omega_odmr / p.ge_be;
}

double delta_omega_precession(const NoiseBudget& budget) {
  budget.validate();
  return budget.noise_ratio * std::exp(budget.t_probe / budget.T0) / (kTwoPi * budget.t_probe);
}

double delta_bperp_precession(const NoiseBudget& budget, const NVParameters& p) {
  const double ax = std::abs(alpha_coefficients(p).x());
  return delta_omega_precession(budget) / (ax * std::abs(p.gn_beta_n()));
}

double delta_bperp_odmr_only(double sigma_plus, double sigma_minus, double b_perp,
                             const NVParameters& p) {
  if (b_perp < kMinTransverse)
    throw DivergesAtZeroTransverse("ODMR-only transverse error diverges as B_perp -> 0");
  return p.D * (sigma_plus + sigma_minus) / (6.0 * p.ge_be * p.ge_be * b_perp);
}

double temperature_sum_shift(double delta_T, const NoiseBudget& budget) {
  return 2.0 * budget.dD_dT * delta_T;
}

double temperature_error_odmr_only(double delta_T, double b_perp, const NoiseBudget& budget,
                                   const NVParameters& p) {
  // The drift enters both branch frequencies equally, so the whole sum
  // shift lands in the transverse estimate.
  const double shift = temperature_sum_shift(std::abs(delta_T), budget);
  return delta_bperp_odmr_only(0.5 * shift, 0.5 * shift, b_perp, p);
}

TransverseError delta_bperp_full_chain(const NoiseBudget& budget, const AxialTransverse& at,
                                       const NVParameters& p) {
  if (at.b_perp < kMinTransverse)
    throw DivergesAtZeroTransverse("transverse Jacobian diverges as B_perp -> 0");
  const double gnb = std::abs(p.gn_beta_n());
  const double ax = std::abs(alpha_coefficients(p).x());
  const double omega = gnb * std::sqrt(ax * ax * at.b_perp * at.b_perp + at.bz_abs * at.bz_abs);
  const double d_omega = omega / (gnb * gnb * ax * ax * at.b_perp);
  const double d_bz = at.bz_abs / (ax * ax * at.b_perp);
  const double s_omega = delta_omega_precession(budget);
  const double s_bz = delta_bz_odmr(budget, p);
  return {delta_bperp_precession(budget, p), std::hypot(d_omega * s_omega, d_bz * s_bz)};
}

double larmor_d_omega_dD(const FieldVector& B, const NVParameters& p) {
  const double h = 1e-3;
  NVParameters hi = p;
  NVParameters lo = p;
  hi.D += h;
  lo.D -= h;
  return (larmor_frequency(B, hi) - larmor_frequency(B, lo)) / (2.0 * h);
}

double equal_budget_point_noise(const NoiseBudget& budget, int n_points) {
  if (n_points < 1) throw InvalidArgument("n_points must be positive");
  return budget.noise_ratio * std::sqrt(static_cast<double>(n_points));
}

}  // namespace nvmag
