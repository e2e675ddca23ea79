#pragma once

// Logarithmic-spiral coordinates, the zero sequence and the spiral regions.

#include <complex>
#include <cstdint>

#include "baker/logspace.hpp"
#include "baker/params.hpp"

namespace baker {

/// z = r * exp(i (c log r + theta)); theta is the angular offset from the
/// spiral, reduced to (-pi, pi].
struct SpiralCoords {
  double r = 0.0;
  double theta = 0.0;
};

SpiralCoords to_spiral_coords(cplx z, double c);
cplx from_spiral_coords(const SpiralCoords& s, double c);

/// Spiral offset of a point given in log-space form.
double spiral_offset(const LogComplex& z, double c);

/// L(t) = t exp(i c log t), the arclength-free parametrisation of the spiral.
cplx spiral_point(double t, double c);

/// a_k = r_k exp(i c log r_k) with r_k = (k / delta)^(1/rho), k >= k_min.
class ZeroSequence {
 public:
  ZeroSequence(double delta, double rho, double c);
  explicit ZeroSequence(const ConstructionParams& params)
      : ZeroSequence(params.delta, params.rho, params.c) {}

  double delta() const { return delta_; }
  double rho() const { return rho_; }
  double c() const { return c_; }
  std::int64_t k_min() const { return k_min_; }
  /// (1 + i c) / rho: a_k = (k / delta)^exponent.
  cplx exponent() const { return exponent_; }

  double radius(std::int64_t k) const;
  cplx zero(std::int64_t k) const;
  /// Continuous-index radius r(x) = (x / delta)^(1/rho).
  double radius_at(double x) const;
  /// Number of zeros with |a_k| <= r.
  std::int64_t count_n(double r) const;

 private:
  double delta_;
  double rho_;
  double c_;
  std::int64_t k_min_;
  cplx exponent_;
};

/// {r e^{i(c log r + theta)} : r > r_min, |theta| < theta_max [- 1/r]}.
struct SpiralRegion {
  double r_min = 1.0;
  double theta_max = 0.0;
  bool taper = false;
};

bool in_region(const SpiralRegion& region, cplx z, double c);
bool in_region(const SpiralRegion& region, const SpiralCoords& s);

/// sigma(t) = (L(t0 + t) - z0)^(1/q) with the argument of L(t0 + t) - z0
/// continued from its t -> 0+ limit, where z0 = L(t0).
class SigmaPath {
 public:
  SigmaPath(double c, int q, double t0);

  double t0() const { return t0_; }
  cplx z0() const { return z0_; }

  /// L(t0 + t) - z0 as (modulus, continuous argument).
  void offset(double t, double& modulus, double& cont_arg) const;
  /// Continuous argument of L(t0 + t) - z0, t > 0.
  double offset_arg(double t) const;
  cplx sigma(double t) const;
  /// d/ds sigma(s^q): smooth at s = 0, unlike d sigma / dt.
  cplx dsigma_ds(double s) const;

 private:
  double c_;
  int q_;
  double t0_;
  cplx z0_;
};

}  // namespace baker
