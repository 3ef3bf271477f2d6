#pragma once

// Analytic noise propagation for the two-frequency method and for the
// ODMR-only alternative.

#include "nvmag/inversion.hpp"
#include "nvmag/spin_model.hpp"

namespace nvmag {

struct NoiseBudget {
  double delta_omega_odmr = 0.060;  // MHz, resonance-frequency noise
  double noise_ratio = 0.045;       // dI / I_c of the precession readout
  double t_probe = 156.0;           // us
  double T0 = 156.0;                // us, nuclear coherence time
  double dD_dT = 0.084;             // MHz / K
  double delta_T = 0.0;             // K

  void validate() const;  // all fields non-negative, times positive
};

// delta B_z = delta_omega / ge_be.
double delta_bz_odmr(const NoiseBudget& budget, const NVParameters& p);

// Single-readout precession sensitivity at t_probe (cosine at a zero
// crossing, dominant Larmor term only).
double delta_bperp_precession(const NoiseBudget& budget, const NVParameters& p);

// Larmor-frequency noise implied by the readout noise at t_probe, MHz.
double delta_omega_precession(const NoiseBudget& budget);

// Throws DivergesAtZeroTransverse when b_perp < 1e-6 mT.
double delta_bperp_odmr_only(double sigma_plus, double sigma_minus, double b_perp,
                             const NVParameters& p);

// Spurious change of omega_+ + omega_- from a D drift: 2 dD/dT delta_T.
double temperature_sum_shift(double delta_T, const NoiseBudget& budget);

// B_perp error of the ODMR-only route caused by a temperature step.
double temperature_error_odmr_only(double delta_T, double b_perp, const NoiseBudget& budget,
                                   const NVParameters& p);

struct TransverseError {
  double dominant;    // Larmor term only
  double full_chain;  // Larmor and B_z terms in quadrature
};

// Full chain-rule propagation through B_perp(omega_L, B_z) at a given
// operating point, next to the dominant-term value.
TransverseError delta_bperp_full_chain(const NoiseBudget& budget, const AxialTransverse& at,
                                       const NVParameters& p);

// d omega_L / d D at fixed field (central difference), MHz per MHz.
double larmor_d_omega_dD(const FieldVector& B, const NVParameters& p);

// Per-point relative noise of an n-point trace that spends the same photon
// budget as one readout with ratio `budget.noise_ratio`.
double equal_budget_point_noise(const NoiseBudget& budget, int n_points);

}  // namespace nvmag
