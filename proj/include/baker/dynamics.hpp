#pragma once

// The Newton map N(z) = z - f(z)/f'(z), orbits, the invariance check on the
// spiral region U and escape-time classification.
//
// Orbit points are carried as (log r, theta) spiral coordinates so that the
// p-fold growth per step does not leave the double range.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "baker/chain.hpp"

namespace baker {

/// z = exp(log_r) exp(i (c log_r + theta)); log_r = -inf encodes z = 0.
struct SpiralPoint {
  double log_r = -std::numeric_limits<double>::infinity();
  double theta = 0.0;
  bool is_zero() const { return log_r == -std::numeric_limits<double>::infinity(); }
  double r() const;
};

SpiralPoint to_spiral_point(cplx z, double c);
SpiralPoint to_spiral_point(const LogComplex& z, double c);
/// Throws OverflowSignal when |z| is not representable.
cplx to_cartesian(const SpiralPoint& s, double c);

enum class StepRegime { FullChain, AsymptoticNewton };
std::string to_string(StepRegime r);

struct NewtonStep {
  SpiralPoint next;
  StepRegime regime = StepRegime::FullChain;
  /// |N(z) + p z| (log), recorded for FullChain steps inside S3; NaN otherwise.
  double residual_lnmod = std::numeric_limits<double>::quiet_NaN();
  /// AsymptoticNewton: the calibrated bound -eta6 |z|^rho on log|N(z) + p z|.
  double residual_bound_lnmod = std::numeric_limits<double>::quiet_NaN();
  /// FullChain: log|g2/a| at the home root of z.
  double g2_rel_lnmod = std::numeric_limits<double>::quiet_NaN();
};

/// S3 beyond r_newton, where N = -p z up to exp(-eta6 |z|^rho) < 1e-18 p|z|.
bool in_asymptotic_regime(const ConstructionParams& params, const CalibratedBounds& bounds,
                          const SpiralPoint& z);

/// One Newton step.  Throws CriticalPoint when f'(z) = 0 and NaNGuard on
/// non-finite intermediates; evaluation errors of the chain propagate.
NewtonStep newton_step(const Chain& chain, const CalibratedBounds& bounds, const SpiralPoint& z);
NewtonStep newton_step(const Chain& chain, const CalibratedBounds& bounds, cplx z);

/// The region U = {r > r1, |theta| < theta3 - 1/r}.
SpiralRegion region_u(const ConstructionParams& params, const CalibratedBounds& bounds);
bool in_u(const ConstructionParams& params, const CalibratedBounds& bounds, const SpiralPoint& z);

struct OrbitStep {
  SpiralPoint z;  // z_k
  StepRegime regime = StepRegime::FullChain;
  double residual_lnmod = std::numeric_limits<double>::quiet_NaN();
  /// |z_{k+1}| / |z_k| (log); NaN for the last recorded point.
  double log_modulus_ratio = std::numeric_limits<double>::quiet_NaN();
};

enum class OrbitStop { MaxSteps, FixedPoint, Error };
std::string to_string(OrbitStop s);

struct OrbitRecord {
  cplx seed;
  std::vector<OrbitStep> steps;  // z_0 .. z_last
  OrbitStop stop = OrbitStop::MaxSteps;
  std::string reason;
  /// Radius of the first AsymptoticNewton step (inf if none).
  double switch_radius = std::numeric_limits<double>::infinity();
};

/// Iterates newton_step k_max times (or until a fixed point or an error).
OrbitRecord orbit(const Chain& chain, const CalibratedBounds& bounds, cplx seed, int k_max);

/// CSV with columns k, log_radius, theta, regime, residual.
void write_orbit_csv(const OrbitRecord& rec, const std::string& path);

struct InvarianceSample {
  SpiralPoint z;
  SpiralPoint image;
  StepRegime regime = StepRegime::FullChain;
  bool image_in_u = false;
  bool doubles = false;
  std::string error;
  bool pass() const { return image_in_u && doubles && error.empty(); }
};

struct InvarianceReport {
  int samples = 0;
  int failures = 0;
  int full_chain = 0;
  double r_lo = 0.0, r_hi = 0.0;
  /// Smallest observed |N(z)| / |z|.
  double min_ratio = std::numeric_limits<double>::infinity();
  std::vector<InvarianceSample> failed;
  bool pass() const { return failures == 0 && samples > 0; }
};

/// Radii (lo, hi] sampled in U: lo = max(r1, 1/theta3), below which U is
/// empty.  Throws PreconditionError when r_test_max <= lo.
std::pair<double, double> u_sampling_range(const ConstructionParams& params, const CalibratedBounds& bounds,
                                           double r_test_max);

/// `count` points of U, log-uniform in r over u_sampling_range and uniform
/// in the admissible theta, deterministic from rng_seed.
std::vector<SpiralPoint> sample_u(const ConstructionParams& params, const CalibratedBounds& bounds, int count,
                                  std::uint64_t rng_seed, double r_test_max);

/// Samples `samples` points of U, log-uniform in r over the part of
/// (r1, r_test_max] where U is non-empty and uniform in the admissible theta,
/// deterministically from rng_seed; checks N(z) in U and |N(z)| >= 2|z|.
InvarianceReport check_invariance(const Chain& chain, const CalibratedBounds& bounds, int samples,
                                  std::uint64_t rng_seed, double r_test_max);

/// Plain-text summary plus a CSV of the failures.
std::string invariance_summary(const InvarianceReport& rep);
void write_invariance_failures_csv(const InvarianceReport& rep, const std::string& path);

struct ClassifyLimits {
  int k_max = 16;
  /// Escaping once |z_k| exceeds this while z_k lies in U.
  double escape_radius = 0.0;
  /// Full-chain steps are not attempted from beyond this radius (the orbit
  /// is Unresolved there); asymptotic steps are unaffected.
  double full_chain_radius = HUGE_VAL;
  /// |z_{k+1} - z_k| < fixpoint_tol * max(1, |z_k|) marks a fixed point.
  double fixpoint_tol = 1e-10;
  /// ... together with |f(z)| < f_tol * max(1, |z|^(1/q)).
  double f_tol = 1e-8;
  /// Zeros of g4 are zeros of f of order m = q - 1, where Newton converges
  /// only linearly.  Where log|g2/a| < root_zone a modified Newton
  /// refinement (step m f/f') is tried; its root is accepted when Newton
  /// fixes it and it lies within 2 m |N(z) - z| of the orbit.  The probe
  /// runs only when m |N(z) - z| < root_reach |z|, when the root predicted
  /// as z + m (N(z) - z) moved by less than root_agree m |N(z) - z| since the
  /// previous step, and at most max_probes times per orbit.
  double root_zone = 1.0;
  double root_reach = 0.05;
  double root_agree = 0.1;
  int max_probes = 2;
  int refine_steps = 8;
};

/// escape_radius = 1e3 r1, full_chain_radius = 10 r1.
ClassifyLimits default_limits(const CalibratedBounds& bounds);

enum class Outcome { Escaping, Converged, Unresolved };
std::string to_string(Outcome o);

struct Classification {
  Outcome outcome = Outcome::Unresolved;
  int steps = 0;
  cplx root = 0.0;
};

/// Escape-time classification of one point; never throws.
Classification classify(const Chain& chain, const CalibratedBounds& bounds, cplx z, const ClassifyLimits& limits);

}  // namespace baker
