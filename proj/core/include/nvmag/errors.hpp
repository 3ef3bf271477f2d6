#pragma once

#include <stdexcept>
#include <string>

namespace nvmag {

// Base of every error the library throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical failures (bad conditioning, no convergence, inconsistent data).
// The CLI maps these to exit status 2.
class NumericalError : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

#define NVMAG_DEFINE_ERROR(Name, Base) \
  class Name : public Base {           \
   public:                             \
    using Base::Base;                  \
  }

NVMAG_DEFINE_ERROR(InvalidParameters, InvalidArgument);
NVMAG_DEFINE_ERROR(DegenerateLabeling, NumericalError);
NVMAG_DEFINE_ERROR(RegimeError, NumericalError);
NVMAG_DEFINE_ERROR(NonAxialTensor, InvalidArgument);

NVMAG_DEFINE_ERROR(EmptySweep, InvalidArgument);

NVMAG_DEFINE_ERROR(SingularJacobian, NumericalError);
NVMAG_DEFINE_ERROR(MaxIterations, NumericalError);
NVMAG_DEFINE_ERROR(PeakSearchFailed, NumericalError);
NVMAG_DEFINE_ERROR(GridTooCoarse, NumericalError);
NVMAG_DEFINE_ERROR(InitOutOfBounds, InvalidArgument);

NVMAG_DEFINE_ERROR(NoConvergence, NumericalError);
NVMAG_DEFINE_ERROR(TransverseDeficit, NumericalError);
NVMAG_DEFINE_ERROR(NegativeSumInconsistent, NumericalError);
NVMAG_DEFINE_ERROR(NoIntersection, NumericalError);
NVMAG_DEFINE_ERROR(Degenerate, NumericalError);

NVMAG_DEFINE_ERROR(DivergesAtZeroTransverse, NumericalError);

NVMAG_DEFINE_ERROR(TooClose, InvalidArgument);
NVMAG_DEFINE_ERROR(ConfigError, InvalidArgument);

#undef NVMAG_DEFINE_ERROR

}  // namespace nvmag
