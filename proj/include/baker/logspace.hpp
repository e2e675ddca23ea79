#pragma once

// Complex numbers stored as (log-modulus, argument).
//
// The construction multiplies and raises values whose moduli span far beyond
// the binary64 exponent range (|Pi(w)|^n with lnmod ~ 1e6 is routine), so all
// chain arithmetic happens here and only final, representable values are
// converted back to cartesian form.

#include <complex>
#include <limits>
#include <string>

namespace baker {

using cplx = std::complex<double>;

inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kTwoPi = 6.28318530717958647692;

/// Reduce an angle to (-pi, pi].
double reduce_angle(double a);

struct LogComplex {
  double lnmod = -std::numeric_limits<double>::infinity();
  double arg = 0.0;

  static LogComplex zero() { return {}; }
  static LogComplex unit() { return {0.0, 0.0}; }

  bool is_zero() const { return lnmod == -std::numeric_limits<double>::infinity(); }
};

/// exp(l) for a complex logarithm l; the imaginary part is reduced.
LogComplex lc_exp(cplx l);

LogComplex lc_mul(const LogComplex& a, const LogComplex& b);
LogComplex lc_div(const LogComplex& a, const LogComplex& b);
LogComplex lc_pow_int(const LogComplex& a, long long n);
LogComplex lc_neg(const LogComplex& a);
LogComplex lc_add(const LogComplex& a, const LogComplex& b);
LogComplex lc_sub(const LogComplex& a, const LogComplex& b);
LogComplex lc_scale(const LogComplex& a, cplx factor);

/// Throws OverflowSignal / UnderflowSignal outside the safe exponent range.
cplx lc_to_cartesian(const LogComplex& a);
LogComplex lc_from_cartesian(cplx z);

/// Largest |lnmod| accepted by lc_to_cartesian.
inline constexpr double kSafeLnmod = 708.0;

/// Modulus of a - b relative to |b|, computed without leaving log space.
double lc_rel_diff(const LogComplex& a, const LogComplex& b);

/// "lnmod:arg" in scientific notation with 17 significant digits.
std::string lc_to_string(const LogComplex& a);
LogComplex lc_parse(const std::string& text);

/// Continuous argument along a path: each update picks the branch nearest
/// to the previous value.
class TrackedArg {
 public:
  TrackedArg() = default;
  explicit TrackedArg(double start) : value_(start), started_(true) {}

  double update(double principal_arg);
  double value() const { return value_; }
  bool started() const { return started_; }

 private:
  double value_ = 0.0;
  bool started_ = false;
};

}  // namespace baker
