#ifndef ALLPASS_CONFIG_HPP
#define ALLPASS_CONFIG_HPP

#include <algorithm>
#include <stdexcept>
#include <string>

namespace allpass {

/// Numerical thresholds shared by every module.
///
/// `rel` is a relative tolerance: a quantity is treated as zero when it is
/// below `rel * max(1, scale)`, where `scale` is the norm of the data the
/// decision is about. Passed by value everywhere; there is no global state.
struct Tolerances {
  double rel = 1e-9;
  /// Number of equispaced unit-circle points used by grid checks.
  int grid = 64;
  /// Extra off-circle sample points used by transfer-function comparisons.
  int off_circle = 16;
  /// Seed for the off-circle sample points.
  unsigned long long seed = 20141013ULL;

  double scaled(double scale) const { return rel * std::max(1.0, scale); }
};

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not match the operation's contract.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A mathematical precondition (minimality, solvability, definiteness...)
/// does not hold for the supplied data.
class PreconditionError : public Error {
 public:
  using Error::Error;
};

/// A computed object failed its own post-condition check.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require_dims(bool ok, const std::string& what) {
  if (!ok) throw DimensionError(what);
}

inline void require(bool ok, const std::string& what) {
  if (!ok) throw PreconditionError(what);
}

}  // namespace detail
}  // namespace allpass

#endif  // ALLPASS_CONFIG_HPP
