#include "nvmag/inversion.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <tuple>

namespace nvmag {

namespace {

constexpr double kDeg = 180.0 / std::numbers::pi;
constexpr double kStepTol = 1e-9;       // mT, fixed-point stopping rule
constexpr int kMaxFixedPoint = 100;
constexpr double kArccosSlack = 1e-9;

// Second-order Zeeman shift of one branch: sign +1 for plus, -1 for minus.
struct BranchShift {
  double g, D, c, sign;

  double value(double b) const {
    const double u = g * b;
    const double q = D * D - u * u;
    return sign * u + c * (3.0 * D - sign * u) / q;
  }
  double slope(double b) const {
    const double u = g * b;
    const double q = D * D - u * u;
    return g * (sign + c * (-sign * q + (3.0 * D - sign * u) * 2.0 * u) / (q * q));
  }
};

// |B_z| such that the branch shift equals dw, for fixed B_perp. The minus
// branch turns back up near ge_be |B_z| -> D, so the first crossing above
// zero is bracketed by a coarse upward scan, then refined by Newton with a
// bisection safeguard. Returns -1 when dw lies beyond the value at
// |B_z| = 0 (no non-negative root).
double solve_bz(double dw, double b_perp, const NVParameters& p, Branch branch) {
  const BranchShift s{p.ge_be, p.D, 0.5 * p.ge_be * p.ge_be * b_perp * b_perp,
                      branch == Branch::plus ? 1.0 : -1.0};
  // Orient so h(b) = sign * (shift - dw) increases through the root.
  auto h = [&](double b) { return s.sign * (s.value(b) - dw); };
  const double b_max = (p.D / p.ge_be) * (1.0 - 1e-9);
  if (h(0.0) > 0.0) return -1.0;
  const double step = b_max / 4096.0;
  double lo = 0.0;
  double hi = std::min(step, b_max);
  while (h(hi) < 0.0) {
    if (hi >= b_max) throw RegimeError("Zeeman shift beyond the perturbative range");
    lo = hi;
    hi = std::min(hi + step, b_max);
  }

  double b = std::clamp(std::abs(dw) / p.ge_be, lo, hi);
  for (int it = 0; it < 100; ++it) {
    const double hv = h(b);
    if (hv == 0.0) return b;
    if (hv < 0.0) lo = b; else hi = b;
    const double d = s.sign * s.slope(b);
    double next = d > 0.0 ? b - hv / d : 0.5 * (lo + hi);
    if (!(next > lo && next < hi)) next = 0.5 * (lo + hi);
    if (std::abs(next - b) <= 1e-15 * std::max(1.0, b)) return next;
    b = next;
  }
  return b;
}

}  // namespace

double AxialTransverse::magnitude() const { return std::hypot(bz_abs, b_perp); }

AxialTransverse AxialTransverse::from(double bz_abs, double b_perp) {
  AxialTransverse at;
  at.bz_abs = std::abs(bz_abs);
  at.b_perp = std::abs(b_perp);
  at.theta_deg = std::atan2(at.b_perp, at.bz_abs) * kDeg;
  return at;
}

AxialTransverse AxialTransverse::of(const FieldVector& B) { return from(B.bz, B.b_perp()); }

AxialTransverse reconstruct_exact(const FieldVector& B) { return AxialTransverse::of(B); }

AxialTransverse invert_axial_transverse(double dw, double omega_L, const NVParameters& p,
                                        Branch branch, const FrequencySigmas& sigmas) {
  if (!p.axial_hyperfine())
    throw NonAxialTensor("inversion uses the axial Larmor relation");
  if (!(std::abs(dw) < p.D)) throw RegimeError("|dw| must be below D");
  if (!(omega_L >= 0.0)) throw InvalidArgument("omega_L must be non-negative");

  const double gnb = std::abs(p.gn_beta_n());
  const double ax = std::abs(alpha_coefficients(p).x());
  const double w2 = (omega_L / gnb) * (omega_L / gnb);
  const double sigma_bz = sigmas.dw / p.ge_be;

  double bz = 0.0;
  double bp = 0.0;
  for (int k = 1; k <= kMaxFixedPoint; ++k) {
    // Clamp warnings describe the current iterate only.
    std::vector<std::string> warnings;
    double bz_new = solve_bz(dw, bp, p, branch);
    if (bz_new < 0.0) {
      bz_new = 0.0;
      warnings.push_back("axial_clamped");
    }
    const double target = w2 - bz_new * bz_new;
    double bp_new = 0.0;
    if (target >= 0.0) {
      bp_new = std::sqrt(target) / ax;
    } else {
      const double deficit = gnb * bz_new - omega_L;
      const double allowed = 3.0 * (sigmas.omega_L + gnb * sigma_bz) +
                             1e-9 * std::max(omega_L, gnb * bz_new);
      if (deficit > allowed)
        throw TransverseDeficit("Larmor frequency below the axial-only value by " +
                                std::to_string(deficit) + " MHz");
      warnings.push_back("transverse_clamped");
    }
    const bool done = std::abs(bz_new - bz) < kStepTol && std::abs(bp_new - bp) < kStepTol;
    bz = bz_new;
    bp = bp_new;
    if (done || (k == 1 && bp == 0.0)) {
      AxialTransverse at = AxialTransverse::from(bz, bp);
      at.iterations = k;
      at.warnings = std::move(warnings);
      if (p.ge_be * bz < 10.0 * p.ge_be * p.ge_be * bp * bp / p.D)
        at.warnings.push_back("branch_assignment_near_degenerate");
      return at;
    }
  }
  throw NoConvergence("fixed-point inversion did not converge in 100 iterations");
}

AxialTransverse invert_odmr_only(double dw_plus, double dw_minus, const NVParameters& p,
                                 double sum_sigma) {
  if (!(dw_plus > dw_minus) && !(dw_plus == 0.0 && dw_minus == 0.0))
    throw InvalidArgument("dw_plus must exceed dw_minus");
  const double g = p.ge_be;
  const double diff = dw_plus - dw_minus;
  double sum = dw_plus + dw_minus;
  std::vector<std::string> warnings;
  if (sum < 0.0) {
    if (sum < -3.0 * sum_sigma - 1e-12 * std::max(1.0, diff))
      throw NegativeSumInconsistent("dw_plus + dw_minus is negative beyond noise");
    sum = 0.0;
    warnings.push_back("transverse_clamped");
  }

  double bz = diff / (2.0 * g);
  double bp = 0.0;
  for (int k = 1; k <= kMaxFixedPoint; ++k) {
    if (g * bz >= p.D) throw RegimeError("ge_be * |B_z| must be below D");
    const double q = p.D * p.D - g * g * bz * bz;
    const double bp2 = sum * q / (3.0 * p.D * g * g);
    const double bz_new = diff / (2.0 * g - g * g * g * bp2 / q);
    const double bp_new = std::sqrt(std::max(bp2, 0.0));
    const bool done = std::abs(bz_new - bz) < 1e-13 && std::abs(bp_new - bp) < 1e-13;
    bz = bz_new;
    bp = bp_new;
    if (done) {
      AxialTransverse at = AxialTransverse::from(bz, bp);
      at.iterations = k;
      at.warnings = std::move(warnings);
      return at;
    }
  }
  throw NoConvergence("ODMR-only inversion did not converge in 100 iterations");
}

double field_magnitude_from_revival(double tau_re, const NVParameters& p) {
  if (!(tau_re > 0.0)) throw InvalidArgument("tau_re must be positive");
  return (1.0 / tau_re) / p.g13c_b13c;
}

double revival_time_for_field(double magnitude, const NVParameters& p) {
  if (!(magnitude > 0.0)) throw InvalidArgument("field magnitude must be positive");
  return 1.0 / (p.g13c_b13c * magnitude);
}

std::string to_string(CandidateStage s) {
  switch (s) {
    case CandidateStage::rings: return "rings";
    case CandidateStage::pair: return "pair";
    case CandidateStage::unique: return "unique";
  }
  return "unknown";
}

bool CalibratedField::degenerate(double tol) const {
  return vector.b_perp() <= tol || std::abs(vector.bz) <= tol;
}

CandidateSet candidate_rings(const AxialTransverse& at, double tol) {
  CandidateSet cs;
  cs.tolerance = tol;
  const double bz = at.bz_abs;
  const double bp = at.b_perp;
  if (bz <= tol && bp <= tol) {
    cs.stage = CandidateStage::unique;
    cs.rings = {{0.0, 0.0}};
    cs.vectors = {{0.0, 0.0, 0.0}};
  } else if (bz <= tol) {
    cs.stage = CandidateStage::rings;
    cs.rings = {{0.0, bp}};
  } else if (bp <= tol) {
    cs.stage = CandidateStage::pair;
    cs.rings = {{bz, 0.0}, {-bz, 0.0}};
    cs.vectors = {{0.0, 0.0, bz}, {0.0, 0.0, -bz}};
  } else {
    cs.stage = CandidateStage::rings;
    cs.rings = {{bz, bp}, {-bz, bp}};
  }
  return cs;
}

CandidateSet disambiguate(const AxialTransverse& base, const std::vector<CalibratedMeasurement>& cal,
                          double tol) {
  if (!(tol > 0.0)) throw InvalidArgument("tolerance must be positive");
  CandidateSet rings = candidate_rings(base, tol);
  if (cal.empty()) return rings;

  const double bz = base.bz_abs;
  const double bp = base.b_perp;
  std::vector<std::string> warnings;

  // Axial constraint: which signs of B_z survive every calibrated field.
  std::vector<double> signs = bz <= tol ? std::vector<double>{1.0} : std::vector<double>{1.0, -1.0};
  std::erase_if(signs, [&](double s) {
    for (const auto& m : cal)
      if (std::abs(std::abs(s * bz + m.field.vector.bz) - m.reconstruction.bz_abs) > tol) return true;
    return false;
  });
  if (signs.empty()) throw NoIntersection("no sign of B_z is consistent with the calibrated fields");

  for (std::size_t i = 0; i < cal.size(); ++i)
    if (cal[i].field.degenerate(tol))
      warnings.push_back("calibrated field " + std::to_string(i) +
                         " is purely axial or purely transverse");

  // Transverse constraint: azimuths from the first calibrated field with a
  // transverse component; the others are checked by residual.
  std::vector<double> azimuths;
  bool azimuth_free = true;
  if (bp <= tol) {
    azimuth_free = false;
    azimuths = {0.0};
    for (const auto& m : cal)
      if (std::abs(m.field.vector.b_perp() - m.reconstruction.b_perp) > tol)
        throw NoIntersection("transverse magnitudes inconsistent with an axial field");
  } else {
    for (const auto& m : cal) {
      const double cp = m.field.vector.b_perp();
      if (cp <= tol) {
        if (std::abs(bp - m.reconstruction.b_perp) > tol)
          throw NoIntersection("axial calibrated field changed B_perp beyond tolerance");
        continue;
      }
      const double arg = (m.reconstruction.b_perp * m.reconstruction.b_perp - bp * bp - cp * cp) /
                         (2.0 * bp * cp);
      if (std::abs(arg) > 1.0 + kArccosSlack)
        throw Degenerate("azimuth cosine argument outside [-1, 1]: " + std::to_string(arg));
      const double delta = std::acos(std::clamp(arg, -1.0, 1.0));
      const double psi = std::atan2(m.field.vector.by, m.field.vector.bx);
      azimuths = {psi - delta, psi + delta};
      if (delta * bp <= tol) azimuths = {psi};
      azimuth_free = false;
      break;
    }
  }

  if (azimuth_free) {
    CandidateSet partial;
    partial.stage = CandidateStage::rings;
    partial.tolerance = tol;
    for (double s : signs) partial.rings.push_back({s * bz, bp});
    partial.warnings = warnings;
    throw AmbiguityRemains("calibrated fields carry no transverse information", partial);
  }

  std::vector<FieldVector> vectors;
  for (double s : signs)
    for (double phi : azimuths) {
      const FieldVector v{bp * std::cos(phi), bp * std::sin(phi), s * bz};
      bool ok = true;
      for (const auto& m : cal) {
        const Eigen::Vector3d w = v.vec() + m.field.vector.vec();
        ok = ok && std::abs(std::abs(w.z()) - m.reconstruction.bz_abs) <= tol &&
             std::abs(std::hypot(w.x(), w.y()) - m.reconstruction.b_perp) <= tol;
      }
      const bool dup = std::any_of(vectors.begin(), vectors.end(), [&](const FieldVector& u) {
        return (u.vec() - v.vec()).norm() <= tol;
      });
      if (ok && !dup) vectors.push_back(v);
    }
  if (vectors.empty()) throw NoIntersection("calibrated reconstructions have no common candidate");
  std::sort(vectors.begin(), vectors.end(), [](const FieldVector& a, const FieldVector& b) {
    return std::tie(a.bz, a.by, a.bx) < std::tie(b.bz, b.by, b.bx);
  });

  CandidateSet out;
  out.tolerance = tol;
  out.warnings = std::move(warnings);
  for (double s : signs) out.rings.push_back({s * bz, bp});
  if (vectors.size() == 1) {
    out.stage = CandidateStage::unique;
    out.vectors = std::move(vectors);
    return out;
  }
  if (vectors.size() == 2) {
    out.stage = CandidateStage::pair;
    out.vectors = std::move(vectors);
    if (cal.size() >= 2)
      throw AmbiguityRemains("calibrated fields are coplanar with the NV axis", out);
    return out;
  }
  out.stage = CandidateStage::rings;
  out.warnings.push_back(std::to_string(vectors.size()) + " candidates: sign of B_z unresolved");
  throw AmbiguityRemains("more than two candidates remain", out);
}

}  // namespace nvmag
