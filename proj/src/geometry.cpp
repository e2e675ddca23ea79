#include "baker/geometry.hpp"

#include <cmath>

#include "baker/errors.hpp"

namespace baker {

namespace {

// expm1 for complex arguments, accurate for small |x|.
cplx cexpm1(cplx x) {
  const double em1 = std::expm1(x.real());
  const double s = std::sin(0.5 * x.imag());
  const double cosm1 = -2.0 * s * s;
  return {em1 * std::cos(x.imag()) + cosm1, std::exp(x.real()) * std::sin(x.imag())};
}

}  // namespace

SpiralCoords to_spiral_coords(cplx z, double c) {
  const double r = std::abs(z);
  if (r == 0.0) return {0.0, 0.0};
  return {r, reduce_angle(std::arg(z) - c * std::log(r))};
}

cplx from_spiral_coords(const SpiralCoords& s, double c) {
  return std::polar(s.r, c * std::log(s.r) + s.theta);
}

double spiral_offset(const LogComplex& z, double c) { return reduce_angle(z.arg - c * z.lnmod); }

cplx spiral_point(double t, double c) {
  if (!(t > 0.0)) throw DomainError("spiral_point: t must be positive");
  return std::polar(t, c * std::log(t));
}

ZeroSequence::ZeroSequence(double delta, double rho, double c)
    : delta_(delta), rho_(rho), c_(c), k_min_(static_cast<std::int64_t>(std::ceil(delta))),
      exponent_(cplx(1.0, c) / rho) {
  if (!(delta > 0.0)) throw DomainError("ZeroSequence: delta must be positive");
  if (k_min_ < 1) k_min_ = 1;
}

double ZeroSequence::radius(std::int64_t k) const {
  if (k < k_min_) throw IndexError("zero index below k_min");
  return std::pow(static_cast<double>(k) / delta_, 1.0 / rho_);
}

double ZeroSequence::radius_at(double x) const { return std::pow(x / delta_, 1.0 / rho_); }

cplx ZeroSequence::zero(std::int64_t k) const {
  const double r = radius(k);
  return std::polar(r, c_ * std::log(r));
}

std::int64_t ZeroSequence::count_n(double r) const {
  if (!(r >= 1.0)) return 0;
  auto k = static_cast<std::int64_t>(std::floor(delta_ * std::pow(r, rho_)));
  if (k < k_min_ - 1) k = k_min_ - 1;
  // pow rounding can put the boundary index on the wrong side
  while (k >= k_min_ && radius(k) > r) --k;
  while (radius(k + 1) <= r) ++k;
  return k - k_min_ + 1;
}

bool in_region(const SpiralRegion& region, const SpiralCoords& s) {
  if (!(s.r > region.r_min)) return false;
  const double limit = region.taper ? region.theta_max - 1.0 / s.r : region.theta_max;
  return std::abs(s.theta) < limit;
}

bool in_region(const SpiralRegion& region, cplx z, double c) {
  return in_region(region, to_spiral_coords(z, c));
}

SigmaPath::SigmaPath(double c, int q, double t0) : c_(c), q_(q), t0_(t0), z0_(spiral_point(t0, c)) {
  if (!(t0 >= 1.0)) throw DomainError("SigmaPath: t0 must be >= 1");
}

void SigmaPath::offset(double t, double& modulus, double& cont_arg) const {
  if (!(t >= 0.0)) throw DomainError("sigma: t must be non-negative");
  // L(t0+t) - z0 = L(t0+t) * B with B = 1 - (t0/(t0+t))^{1+ic}; Re B > 0, so
  // the principal argument of B is already the continuous one.
  const cplx b = -cexpm1(-cplx(1.0, c_) * std::log1p(t / t0_));
  modulus = (t0_ + t) * std::abs(b);
  cont_arg = c_ * std::log(t0_ + t) + std::arg(b);
}

double SigmaPath::offset_arg(double t) const {
  double m, a;
  offset(t, m, a);
  return a;
}

cplx SigmaPath::sigma(double t) const {
  if (t == 0.0) return {0.0, 0.0};
  double m, a;
  offset(t, m, a);
  return std::polar(std::pow(m, 1.0 / q_), a / q_);
}

cplx SigmaPath::dsigma_ds(double s) const {
  const cplx one_ic(1.0, c_);
  if (s == 0.0) {
    // limit: L'(t0)^(1/q) on the branch continued from the path
    return std::polar(std::pow(std::abs(one_ic), 1.0 / q_), (c_ * std::log(t0_) + std::arg(one_ic)) / q_);
  }
  const double t = std::pow(s, q_);
  if (t == 0.0) return dsigma_ds(0.0);
  double m, a;
  offset(t, m, a);
  // sigma(t) / s
  const cplx sig_over_s = std::polar(std::pow(m / t, 1.0 / q_), a / q_);
  // t / D(t) and L'(t0+t) = (1 + ic) L(t0+t) / (t0+t)
  const cplx t_over_d = std::polar(t / m, -a);
  const cplx lprime = one_ic * spiral_point(t0_ + t, c_) / (t0_ + t);
  return sig_over_s * t_over_d * lprime;
}

}  // namespace baker
