#pragma once

#include <cmath>
#include <cstdint>
#include <random>

#include "nvmag/spin_model.hpp"

namespace testutil {

inline const nvmag::FieldVector kReferenceField{2.426, 0.0, 3.129};

inline bool close(double a, double b, double abs_tol, double rel_tol = 0.0) {
  return std::abs(a - b) <= abs_tol + rel_tol * std::abs(b);
}

// Uniform field inside a ball of radius r (mT).
inline nvmag::FieldVector random_field(std::mt19937_64& rng, double r) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (;;) {
    const double x = u(rng), y = u(rng), z = u(rng);
    if (x * x + y * y + z * z <= 1.0) return {r * x, r * y, r * z};
  }
}

}  // namespace testutil
