#pragma once

// Ground-state spin model of an NV center coupled to its 15N nucleus.
//
// Units throughout: frequencies in MHz (ordinary, not angular), fields in mT.
// The NV frame has z along the N-V symmetry axis.

#include <array>
#include <complex>
#include <string>
#include <utility>

#include <Eigen/Dense>

namespace nvmag {

using Matrix6c = Eigen::Matrix<std::complex<double>, 6, 6>;

struct NVParameters {
  double D = 2870.0;              // zero-field splitting
  double ge_be = 28.0249;         // electron g * Bohr magneton, MHz/mT
  double gn = -0.566;             // 15N nuclear g factor
  double beta_n = 7.6226e-3;      // nuclear magneton, MHz/mT
  Eigen::Matrix3d A = Eigen::Vector3d(3.65, 3.65, 3.03).asDiagonal();
  Eigen::Matrix3d P = Eigen::Matrix3d::Zero();  // must stay zero for I = 1/2
  double g13c_b13c = 10.7084e-3;  // 13C gyromagnetic factor, MHz/mT

  double gn_beta_n() const { return gn * beta_n; }

  // True when A is diagonal with A_xx == A_yy (to 1e-9 MHz).
  bool axial_hyperfine() const;

  // Throws InvalidParameters when D <= 0, ge_be <= 0, A is not symmetric,
  // or P is non-zero.
  void validate() const;
};

struct FieldVector {
  double bx = 0.0;
  double by = 0.0;
  double bz = 0.0;

  double b_perp() const;
  double magnitude() const;
  // Azimuth of the transverse part in degrees, [0, 360).
  double azimuth_deg() const;
  // |B| * ge_be < D / 4.
  bool weak_field(const NVParameters& p) const;

  Eigen::Vector3d vec() const { return {bx, by, bz}; }
  static FieldVector from(const Eigen::Vector3d& v) { return {v.x(), v.y(), v.z()}; }
};

// Basis ordering of the 6x6 product space: index = 2 * s + i with
// s = 0, 1, 2 for m_s = +1, 0, -1 and i = 0, 1 for m_I = +1/2, -1/2.
struct BasisState {
  int ms;
  int two_mi;  // 2 * m_I, i.e. +1 or -1
};

inline constexpr std::array<BasisState, 6> kBasis{{
    {+1, +1}, {+1, -1}, {0, +1}, {0, -1}, {-1, +1}, {-1, -1}}};

std::string basis_label(int index);

struct SpinHamiltonian {
  Matrix6c matrix;

  double hermiticity_defect() const;  // max |H - H^dagger| / max |H|
};

enum class Branch { plus, minus };
enum class NuclearLabel { up, down };  // dominant m_I = +1/2 or -1/2

std::string to_string(Branch b);
std::string to_string(NuclearLabel n);

struct TransitionLine {
  double frequency;  // MHz, > 0
  Branch branch;
  NuclearLabel nuclear;
};

struct TransitionSet {
  // Four electron lines, ordered by branch (minus first) then frequency.
  std::array<TransitionLine, 4> lines;
  // Energy gap between the two m_s = 0 eigenstates.
  double nuclear_precession_ms0 = 0.0;
  // Energy gap between the two m_s = -1 eigenstates.
  double nuclear_precession_ms_minus1 = 0.0;
  // Sorted eigenvalues of the full Hamiltonian (diagnostics).
  std::array<double, 6> energies{};

  // Mean of the two hyperfine lines of a branch.
  double branch_mean(Branch b) const;
  // Branch mean minus D: the exact counterpart of the perturbative shift.
  double branch_shift(Branch b, const NVParameters& p) const;
  std::array<double, 2> branch_lines(Branch b) const;
};

struct ZeemanShifts {
  double plus;   // MHz
  double minus;  // MHz
  double second_order_plus;
  double second_order_minus;
};

enum class LarmorPath { axial, full_tensor };

// H_e (x) 1 + 1 (x) H_n + S.A.I on the S=1 (x) I=1/2 space.
SpinHamiltonian build_hamiltonian(const FieldVector& B, const NVParameters& p);

// Diagonalizes the Hamiltonian and labels the eigenstates. Branches are
// ordered by frequency (plus = higher), not by m_s identity. Throws
// DegenerateLabeling when the dominant-character overlap of a labeled
// state is below 0.6.
TransitionSet exact_transitions(const FieldVector& B, const NVParameters& p);

// Second-order electron Zeeman shifts of the two ODMR branches.
// Throws RegimeError when ge_be * |B_z| >= D.
ZeemanShifts zeeman_shifts_perturbative(double bz_abs, double b_perp, const NVParameters& p);

// Hyperfine-enhanced nuclear g tensor for the m_s = 0 manifold.
Eigen::Matrix3d g0_tensor(const NVParameters& p);

// alpha_i = 1 + 2 ge_be A_ii / (gn beta_n D)
Eigen::Vector3d alpha_coefficients(const NVParameters& p);

// 15N Larmor frequency in m_s = 0. The axial path uses the alpha
// coefficients and throws NonAxialTensor for a non-axial A; the full
// path evaluates |gn beta_n B.g0| with the whole tensor.
double larmor_frequency(const FieldVector& B, const NVParameters& p,
                        LarmorPath path = LarmorPath::axial);

}  // namespace nvmag
