#pragma once

// From fitted frequencies to field magnitudes, and from magnitudes plus
// calibrated auxiliary fields to the full field vector.

#include <optional>
#include <string>
#include <vector>

#include "nvmag/errors.hpp"
#include "nvmag/spin_model.hpp"

namespace nvmag {

struct AxialTransverse {
  double bz_abs = 0.0;  // mT
  double b_perp = 0.0;  // mT
  double theta_deg = 0.0;
  std::vector<std::string> warnings;
  int iterations = 0;

  double magnitude() const;
  static AxialTransverse from(double bz_abs, double b_perp);
  static AxialTransverse of(const FieldVector& B);
};

// Optional 1-sigma frequency noise used to decide whether a transverse
// deficit is within noise (clamped) or an inconsistency (thrown).
struct FrequencySigmas {
  double dw = 0.0;       // MHz
  double omega_L = 0.0;  // MHz
};

// Solves the Zeeman-shift and Larmor relations for (|B_z|, B_perp) by
// fixed-point iteration. `branch` says which ODMR branch `dw` belongs to;
// the lower-frequency (minus) branch is the default.
AxialTransverse invert_axial_transverse(double dw, double omega_L, const NVParameters& p,
                                        Branch branch = Branch::minus,
                                        const FrequencySigmas& sigmas = {});

// ODMR-only route: both branch shifts, no nuclear precession.
AxialTransverse invert_odmr_only(double dw_plus, double dw_minus, const NVParameters& p,
                                 double sum_sigma = 0.0);

// |B| from the 13C-driven echo revival time; the revival frequency is 1 / tau_re.
double field_magnitude_from_revival(double tau_re, const NVParameters& p);
double revival_time_for_field(double magnitude, const NVParameters& p);

struct Ring {
  double z;  // mT, signed
  double r;  // mT
};

enum class CandidateStage { rings, pair, unique };
std::string to_string(CandidateStage s);

struct CandidateSet {
  CandidateStage stage = CandidateStage::rings;
  std::vector<Ring> rings;
  std::vector<FieldVector> vectors;
  double tolerance = 0.0;
  std::vector<std::string> warnings;
};

struct CalibratedField {
  FieldVector vector;

  // Purely axial or purely transverse within tol.
  bool degenerate(double tol) const;
};

struct CalibratedMeasurement {
  CalibratedField field;
  AxialTransverse reconstruction;  // of B + C
};

// Raised when the inputs cannot remove the remaining ambiguity; carries the
// partially reduced set.
class AmbiguityRemains : public NumericalError {
 public:
  AmbiguityRemains(const std::string& what, CandidateSet partial)
      : NumericalError(what), partial_(std::move(partial)) {}
  const CandidateSet& partial() const { return partial_; }

 private:
  CandidateSet partial_;
};

inline constexpr double kDefaultCandidateTol = 1e-6;  // mT

CandidateSet candidate_rings(const AxialTransverse& at, double tol = kDefaultCandidateTol);

// Intersects the base rings with the rings of each calibrated reconstruction.
CandidateSet disambiguate(const AxialTransverse& base,
                          const std::vector<CalibratedMeasurement>& cal, double tol = kDefaultCandidateTol);

// Direct geometric forward model: (|B_z|, B_perp) of a known vector.
AxialTransverse reconstruct_exact(const FieldVector& B);

}  // namespace nvmag
