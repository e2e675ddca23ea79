#include "baker/logspace.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <utility>

#include "baker/errors.hpp"

namespace baker {

namespace {
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

double reduce_angle(double a) {
  if (!std::isfinite(a)) return a;
  double r = std::remainder(a, kTwoPi);
  if (r <= -kPi) r += kTwoPi;
  return r;
}

LogComplex lc_exp(cplx l) {
  if (l.real() == kNegInf) return LogComplex::zero();
  return {l.real(), reduce_angle(l.imag())};
}

LogComplex lc_mul(const LogComplex& a, const LogComplex& b) {
  if (a.is_zero() || b.is_zero()) return LogComplex::zero();
  return {a.lnmod + b.lnmod, reduce_angle(a.arg + b.arg)};
}

LogComplex lc_div(const LogComplex& a, const LogComplex& b) {
  if (b.is_zero()) throw DivideByZero("lc_div: division by zero");
  if (a.is_zero()) return LogComplex::zero();
  return {a.lnmod - b.lnmod, reduce_angle(a.arg - b.arg)};
}

LogComplex lc_pow_int(const LogComplex& a, long long n) {
  if (n == 0) return LogComplex::unit();
  if (a.is_zero()) {
    if (n < 0) throw DivideByZero("lc_pow_int: negative power of zero");
    return LogComplex::zero();
  }
  const double nd = static_cast<double>(n);
  return {nd * a.lnmod, reduce_angle(nd * a.arg)};
}

LogComplex lc_neg(const LogComplex& a) {
  if (a.is_zero()) return a;
  return {a.lnmod, reduce_angle(a.arg + kPi)};
}

LogComplex lc_add(const LogComplex& a, const LogComplex& b) {
  if (a.is_zero()) return b;
  if (b.is_zero()) return a;
  const LogComplex& big = a.lnmod >= b.lnmod ? a : b;
  const LogComplex& small = a.lnmod >= b.lnmod ? b : a;
  const double shift = small.lnmod - big.lnmod;  // <= 0
  // big * (1 + (small/big))
  const cplx ratio = std::polar(std::exp(shift), small.arg - big.arg);
  const cplx s = 1.0 + ratio;
  if (s == 0.0) return LogComplex::zero();
  const double m = std::abs(s);
  // below the rounding of the operands the difference is indistinguishable from 0
  if (m <= 4.0 * std::numeric_limits<double>::epsilon()) return LogComplex::zero();
  return {big.lnmod + std::log(m), reduce_angle(big.arg + std::arg(s))};
}

LogComplex lc_sub(const LogComplex& a, const LogComplex& b) { return lc_add(a, lc_neg(b)); }

LogComplex lc_scale(const LogComplex& a, cplx factor) {
  return lc_mul(a, lc_from_cartesian(factor));
}

cplx lc_to_cartesian(const LogComplex& a) {
  if (a.is_zero()) return {0.0, 0.0};
  if (std::isnan(a.lnmod)) throw NaNGuard("lc_to_cartesian: NaN log-modulus");
  if (a.lnmod > kSafeLnmod) throw OverflowSignal("lc_to_cartesian: overflow", a.lnmod);
  if (a.lnmod < -kSafeLnmod) throw UnderflowSignal("lc_to_cartesian: underflow", a.lnmod);
  return std::polar(std::exp(a.lnmod), a.arg);
}

LogComplex lc_from_cartesian(cplx z) {
  if (z == 0.0) return LogComplex::zero();
  const double m = std::abs(z);
  return {std::log(m), reduce_angle(std::arg(z))};
}

double lc_rel_diff(const LogComplex& a, const LogComplex& b) {
  if (b.is_zero()) return a.is_zero() ? 0.0 : std::numeric_limits<double>::infinity();
  const LogComplex q = lc_div(a, b);
  if (q.is_zero()) return 1.0;
  if (q.lnmod > 700.0) return std::numeric_limits<double>::infinity();
  return std::abs(std::polar(std::exp(q.lnmod), q.arg) - 1.0);
}

std::string lc_to_string(const LogComplex& a) {
  char buf[64];
  if (a.is_zero()) {
    std::snprintf(buf, sizeof buf, "-inf:%.16e", 0.0);
  } else {
    std::snprintf(buf, sizeof buf, "%.16e:%.16e", a.lnmod, a.arg);
  }
  return buf;
}

LogComplex lc_parse(const std::string& text) {
  const auto colon = text.find(':');
  if (colon == std::string::npos) throw DomainError("lc_parse: missing ':' in '" + text + "'");
  const std::string lhs = text.substr(0, colon);
  const std::string rhs = text.substr(colon + 1);
  char* end = nullptr;
  const double arg = std::strtod(rhs.c_str(), &end);
  if (end == rhs.c_str()) throw DomainError("lc_parse: bad argument in '" + text + "'");
  if (lhs == "-inf") return LogComplex::zero();
  const double lnmod = std::strtod(lhs.c_str(), &end);
  if (end == lhs.c_str()) throw DomainError("lc_parse: bad log-modulus in '" + text + "'");
  return {lnmod, arg};
}

double TrackedArg::update(double principal_arg) {
  if (!started_) {
    value_ = principal_arg;
    started_ = true;
    return value_;
  }
  value_ += reduce_angle(principal_arg - value_);
  return value_;
}

}  // namespace baker
