#include "nvmag/spin_model.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <vector>

#include "nvmag/errors.hpp"

namespace nvmag {

namespace {

using Complex = std::complex<double>;
using Matrix3c = Eigen::Matrix3cd;
using Matrix2c = Eigen::Matrix2cd;

constexpr double kLabelThreshold = 0.6;
// Eigenvalues closer than this are treated as one degenerate cluster.
constexpr double kDegeneracyTol = 1e-8;

struct SpinOperators {
  std::array<Matrix3c, 3> S;
  std::array<Matrix2c, 3> I;
};

const SpinOperators& spin_operators() {
  static const SpinOperators ops = [] {
    SpinOperators o;
    const double r = 1.0 / std::numbers::sqrt2;
    const Complex i(0.0, 1.0);
    o.S[0] << 0, r, 0, r, 0, r, 0, r, 0;
    o.S[1] << 0, -i * r, 0, i * r, 0, -i * r, 0, i * r, 0;
    o.S[2] << 1, 0, 0, 0, 0, 0, 0, 0, -1;
    o.I[0] << 0, 0.5, 0.5, 0;
    o.I[1] << 0, -0.5 * i, 0.5 * i, 0;
    o.I[2] << 0.5, 0, 0, -0.5;
    return o;
  }();
  return ops;
}

Matrix6c kron(const Matrix3c& a, const Matrix2c& b) {
  Matrix6c out;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) out.block<2, 2>(2 * r, 2 * c) = a(r, c) * b;
  return out;
}

// Diagonal operator whose eigenvalues are distinct on every basis state;
// used to fix the eigenvector gauge inside degenerate clusters.
Matrix6c label_operator() {
  Matrix6c L = Matrix6c::Zero();
  for (int k = 0; k < 6; ++k) L(k, k) = 10.0 * kBasis[k].ms + 0.5 * kBasis[k].two_mi;
  return L;
}

struct Eigensystem {
  Eigen::Matrix<double, 6, 1> values;
  Matrix6c vectors;
};

Eigensystem diagonalize(const Matrix6c& H) {
  Eigen::SelfAdjointEigenSolver<Matrix6c> solver(H);
  Eigensystem es{solver.eigenvalues(), solver.eigenvectors()};

  static const Matrix6c L = label_operator();
  int start = 0;
  while (start < 6) {
    int end = start + 1;
    while (end < 6 && es.values(end) - es.values(end - 1) < kDegeneracyTol) ++end;
    const int n = end - start;
    if (n > 1) {
      const Eigen::MatrixXcd V = es.vectors.middleCols(start, n);
      const Eigen::MatrixXcd Lsub = V.adjoint() * L * V;
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXcd> sub(Lsub);
      es.vectors.middleCols(start, n) = V * sub.eigenvectors();
    }
    start = end;
  }
  return es;
}

double manifold_weight(const Matrix6c& V, int col, int ms) {
  double w = 0.0;
  for (int k = 0; k < 6; ++k)
    if (kBasis[k].ms == ms) w += std::norm(V(k, col));
  return w;
}

double nuclear_up_weight(const Matrix6c& V, int col) {
  double w = 0.0;
  for (int k = 0; k < 6; ++k)
    if (kBasis[k].two_mi > 0) w += std::norm(V(k, col));
  return w;
}

// Indices of the two columns with the largest weight on manifold ms.
std::array<int, 2> top_two(const Matrix6c& V, int ms) {
  std::array<int, 6> idx;
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    return manifold_weight(V, a, ms) > manifold_weight(V, b, ms);
  });
  std::array<int, 2> out{idx[0], idx[1]};
  std::sort(out.begin(), out.end());
  return out;
}

}  // namespace

bool NVParameters::axial_hyperfine() const {
  constexpr double tol = 1e-9;
  if (std::abs(A(0, 0) - A(1, 1)) > tol) return false;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c)
      if (r != c && std::abs(A(r, c)) > tol) return false;
  return true;
}

void NVParameters::validate() const {
  if (!(D > 0.0)) throw InvalidParameters("zero-field splitting D must be positive");
  if (!(ge_be > 0.0)) throw InvalidParameters("ge_be must be positive");
  if (!std::isfinite(gn) || !std::isfinite(beta_n) || !std::isfinite(g13c_b13c))
    throw InvalidParameters("non-finite gyromagnetic constant");
  const double scale = std::max(1.0, A.cwiseAbs().maxCoeff());
  if ((A - A.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw InvalidParameters("hyperfine tensor A must be symmetric");
  if (P.cwiseAbs().maxCoeff() != 0.0)
    throw InvalidParameters("quadrupole tensor must be zero for a spin-1/2 nucleus");
}

double FieldVector::b_perp() const { return std::hypot(bx, by); }

double FieldVector::magnitude() const { return std::sqrt(bx * bx + by * by + bz * bz); }

double FieldVector::azimuth_deg() const {
  double phi = std::atan2(by, bx) * 180.0 / std::numbers::pi;
  if (phi < 0.0) phi += 360.0;
  if (phi >= 360.0) phi -= 360.0;
  return phi;
}

bool FieldVector::weak_field(const NVParameters& p) const {
  return magnitude() * p.ge_be < p.D / 4.0;
}

std::string basis_label(int index) {
  const auto& b = kBasis.at(static_cast<std::size_t>(index));
  std::string ms = b.ms > 0 ? "+1" : (b.ms < 0 ? "-1" : "0");
  return "|" + ms + "," + (b.two_mi > 0 ? "+1/2" : "-1/2") + ">";
}

double SpinHamiltonian::hermiticity_defect() const {
  const double scale = std::max(1.0, matrix.cwiseAbs().maxCoeff());
  return (matrix - matrix.adjoint()).cwiseAbs().maxCoeff() / scale;
}

std::string to_string(Branch b) { return b == Branch::plus ? "plus" : "minus"; }
std::string to_string(NuclearLabel n) { return n == NuclearLabel::up ? "up" : "down"; }

std::array<double, 2> TransitionSet::branch_lines(Branch b) const {
  std::array<double, 2> out{};
  int k = 0;
  for (const auto& line : lines)
    if (line.branch == b && k < 2) out[static_cast<std::size_t>(k++)] = line.frequency;
  return out;
}

double TransitionSet::branch_mean(Branch b) const {
  const auto l = branch_lines(b);
  return 0.5 * (l[0] + l[1]);
}

double TransitionSet::branch_shift(Branch b, const NVParameters& p) const {
  return branch_mean(b) - p.D;
}

SpinHamiltonian build_hamiltonian(const FieldVector& B, const NVParameters& p) {
  const auto& ops = spin_operators();
  const Eigen::Vector3d b = B.vec();
  const Matrix2c I2 = Matrix2c::Identity();
  const Matrix3c I3 = Matrix3c::Identity();

  Matrix3c He = p.D * ops.S[2] * ops.S[2];
  Matrix2c Hn = Matrix2c::Zero();
  for (int a = 0; a < 3; ++a) {
    He += p.ge_be * b(a) * ops.S[a];
    Hn -= p.gn_beta_n() * b(a) * ops.I[a];
  }
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c) Hn += p.P(a, c) * ops.I[a] * ops.I[c];

  Matrix6c H = kron(He, I2) + kron(I3, Hn);
  for (int a = 0; a < 3; ++a)
    for (int c = 0; c < 3; ++c)
      if (p.A(a, c) != 0.0) H += p.A(a, c) * kron(ops.S[a], ops.I[c]);
  return {H};
}

TransitionSet exact_transitions(const FieldVector& B, const NVParameters& p) {
  const SpinHamiltonian H = build_hamiltonian(B, p);
  const Eigensystem es = diagonalize(H.matrix);
  const Matrix6c& V = es.vectors;

  TransitionSet out;
  for (int k = 0; k < 6; ++k) out.energies[static_cast<std::size_t>(k)] = es.values(k);

  const auto zero = top_two(V, 0);
  for (int c : zero)
    if (manifold_weight(V, c, 0) < kLabelThreshold)
      throw DegenerateLabeling("m_s = 0 eigenstate overlap below 0.6 at " + std::to_string(c));
  const double e0 = 0.5 * (es.values(zero[0]) + es.values(zero[1]));
  out.nuclear_precession_ms0 = std::abs(es.values(zero[1]) - es.values(zero[0]));

  // Remaining four states, split into two energy-ordered pairs.
  std::vector<int> rest;
  for (int k = 0; k < 6; ++k)
    if (k != zero[0] && k != zero[1]) rest.push_back(k);
  std::sort(rest.begin(), rest.end(),
            [&](int a, int b) { return es.values(a) < es.values(b); });

  std::array<std::array<TransitionLine, 2>, 2> pairs;
  std::array<double, 2> pair_mean{};
  for (int pr = 0; pr < 2; ++pr) {
    for (int j = 0; j < 2; ++j) {
      const int c = rest[static_cast<std::size_t>(2 * pr + j)];
      const double up = nuclear_up_weight(V, c);
      if (std::max(up, 1.0 - up) < kLabelThreshold)
        throw DegenerateLabeling("nuclear character of eigenstate " + std::to_string(c) +
                                 " below 0.6");
      pairs[pr][j] = {std::abs(es.values(c) - e0), Branch::minus,
                      up >= 0.5 ? NuclearLabel::up : NuclearLabel::down};
    }
    pair_mean[pr] = 0.5 * (pairs[pr][0].frequency + pairs[pr][1].frequency);
  }
  const int hi = pair_mean[1] >= pair_mean[0] ? 1 : 0;
  for (auto& line : pairs[hi]) line.branch = Branch::plus;

  auto by_freq = [](const TransitionLine& a, const TransitionLine& b) {
    return a.frequency < b.frequency;
  };
  std::sort(pairs[0].begin(), pairs[0].end(), by_freq);
  std::sort(pairs[1].begin(), pairs[1].end(), by_freq);
  const auto& minus = pairs[1 - hi];
  const auto& plus = pairs[hi];
  out.lines = {minus[0], minus[1], plus[0], plus[1]};

  const auto m1 = top_two(V, -1);
  out.nuclear_precession_ms_minus1 = std::abs(es.values(m1[1]) - es.values(m1[0]));
  return out;
}

ZeemanShifts zeeman_shifts_perturbative(double bz_abs, double b_perp, const NVParameters& p) {
  const double g = p.ge_be;
  const double gz = g * std::abs(bz_abs);
  if (gz >= p.D) throw RegimeError("ge_be * |B_z| must be below D");
  const double denom = p.D * p.D - gz * gz;
  const double common = 0.5 * g * g * b_perp * b_perp / denom;
  ZeemanShifts z{};
  z.second_order_plus = common * (3.0 * p.D - gz);
  z.second_order_minus = common * (3.0 * p.D + gz);
  z.plus = gz + z.second_order_plus;
  z.minus = -gz + z.second_order_minus;
  return z;
}

Eigen::Matrix3d g0_tensor(const NVParameters& p) {
  Eigen::Matrix3d correction = p.A;
  correction.row(2).setZero();
  return Eigen::Matrix3d::Identity() + (2.0 * p.ge_be / (p.gn_beta_n() * p.D)) * correction;
}

Eigen::Vector3d alpha_coefficients(const NVParameters& p) {
  const double k = 2.0 * p.ge_be / (p.gn_beta_n() * p.D);
  return {1.0 + k * p.A(0, 0), 1.0 + k * p.A(1, 1), 1.0};
}

double larmor_frequency(const FieldVector& B, const NVParameters& p, LarmorPath path) {
  const double gnb = std::abs(p.gn_beta_n());
  if (path == LarmorPath::full_tensor) {
    const Eigen::Vector3d beff = g0_tensor(p).transpose() * B.vec();
    return gnb * beff.norm();
  }
  if (!p.axial_hyperfine())
    throw NonAxialTensor("axial Larmor formula requires diagonal A with A_xx == A_yy");
  const Eigen::Vector3d a = alpha_coefficients(p);
  return gnb * std::sqrt(a.x() * a.x() * B.bx * B.bx + a.y() * a.y() * B.by * B.by +
                         B.bz * B.bz);
}

}  // namespace nvmag
