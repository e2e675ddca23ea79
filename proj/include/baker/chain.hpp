#pragma once

// The chain g1 -> g2 -> g3 -> g4 -> f built on the canonical product.
//
//   g1(zeta) = Pi(zeta^q + z0)
//   g2(zeta) = int_0^zeta g1^n            (a = the same integral along sigma)
//   g3(zeta) = g2(zeta) / (a zeta),  g4(zeta^q) = g3(zeta)
//   f(z)     = z g4(z)^(q-1)
//
// g2 is computed along paths in w = zeta^q + z0.  Near the spiral the
// integrand decays outward, so g2 = omega^m a - T with T the integral from
// zeta out to infinity (the "tail"); elsewhere it is integrated from 0.

#include <memory>
#include <string>
#include <vector>

#include "baker/geometry.hpp"
#include "baker/logspace.hpp"
#include "baker/params.hpp"
#include "baker/product.hpp"
#include "baker/quadrature.hpp"

namespace baker {

struct ChainSettings {
  int n_start = 4;
  int n_max = 64;
  double t_scan_max = 2000.0;
  int t_grid = 4000;
  double quad_tol = 1e-13;
  int quad_nodes = 16;
  /// |a| must exceed this multiple of its error estimate.
  double cert_ratio = 1e3;
  /// Relative size (log) below which the sigma integrand is dropped.
  double drop_log = 40.0 * 2.302585092994046;
  /// Spiral offset of the outward tail path, as a fraction of the positive
  /// h < 0 window.
  double valley_fraction = 0.2;
  /// |zeta^q| up to this radius uses the straight segment [0, zeta].
  double r_segment = 4.0;
  /// |w| beyond r_endpoint may use the endpoint expansion of the tail when
  /// its error estimate relative to max(|g2|, |a|) is below endpoint_tol and
  /// log|integrand * w| exceeds log|a| by endpoint_margin.
  double r_endpoint = 64.0;
  double endpoint_tol = 1e-10;
  double endpoint_margin = 45.0;
};

enum class G2Route { Zero, Segment, SigmaArc, Tail, Shortcut, Endpoint };
std::string to_string(G2Route r);

struct G2Value {
  LogComplex value;
  G2Route route = G2Route::Zero;
  /// For Tail / Shortcut / Endpoint: value = omega^sector a - tail.
  int sector = 0;
  LogComplex tail;
  /// Absolute error estimate (log of modulus).
  double err_lnmod = -HUGE_VAL;
  /// Pi(zeta^q + z0) when the route computed it.
  LogComplex pi_w;
  bool has_pi_w = false;
};

enum class FRegime { Chain, Asymptotic };

struct FValue {
  LogComplex value;
  /// f(z) - z^(1/q) on the home branch, accurate even when tiny.
  LogComplex deviation;
  bool deviation_known = false;
  FRegime regime = FRegime::Chain;
  double err_lnmod = -HUGE_VAL;
};

/// Least-squares fit -log Q = slope * x + intercept with x = r^rho.
struct FitRecord {
  std::string name;
  double slope = 0.0;
  double intercept = 0.0;
  double rms = 0.0;
  /// slope times the safety factor.
  double eta = 0.0;
  /// Smallest radius from which exp(-eta r^rho) bounds every sample.
  double valid_from = 0.0;
  double r_lo = 0.0, r_hi = 0.0;
  int samples = 0;
};

struct CalibratedBounds {
  FitRecord fit1, fit2, fit3, fit4, fit5, fit6;
  double eta1 = 0.0, eta2 = 0.0, eta3 = 0.0, eta4 = 0.0, eta5 = 0.0, eta6 = 0.0;
  double r0 = 0.0, r1 = 0.0;
  /// Start of the fitted decade (relative f deviation < 1e-2 from here).
  double r_fit = 0.0;
  double r_fit_hi = 0.0;
  /// g2 = omega^m a beyond this radius inside S2.
  double r_g2_cut = HUGE_VAL;
  /// f = z^(1/q) beyond this radius inside S2.
  double r_f_cut = HUGE_VAL;
  /// N = -p z beyond this radius inside S3.
  double r_newton = HUGE_VAL;
  /// Transition band [r_band_lo, r_newton): the calibrated Newton residual
  /// bound is below 1e-3 p|z| and the full chain is still used.
  double r_band_lo = HUGE_VAL;
};

class Chain {
 public:
  Chain(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval, ChainSettings settings,
        double t0, int n, LogComplex a, double a_err_lnmod);

  const ConstructionParams& params() const { return params_; }
  const ProductEvaluator& evaluator() const { return *eval_; }
  std::shared_ptr<const ProductEvaluator> evaluator_ptr() const { return eval_; }
  const ChainSettings& settings() const { return settings_; }
  const SigmaPath& sigma_path() const { return sigma_; }
  double t0() const { return t0_; }
  cplx z0() const { return sigma_.z0(); }
  int n() const { return n_; }
  int q() const { return params_.q; }
  const LogComplex& a() const { return a_; }
  double a_err_lnmod() const { return a_err_; }
  cplx omega() const { return omega_; }
  double theta_valley() const { return theta_valley_; }

  /// zeta^q (polar arithmetic, so (omega zeta)^q == zeta^q to rounding).
  cplx zeta_pow_q(cplx zeta) const;
  /// Home-branch root: arg = (c log r + theta) / q.
  cplx home_root(cplx z) const;

  EvalResult g1(cplx zeta) const;
  G2Value g2(cplx zeta, const CalibratedBounds* bounds = nullptr) const;
  /// g2 forced through a given route (Segment, SigmaArc or Tail).
  G2Value g2_route(cplx zeta, G2Route route) const;
  LogComplex g3(cplx zeta, const CalibratedBounds* bounds = nullptr) const;
  /// g4(w) = g3(any q-th root of w); `branch` selects omega^branch * home root.
  LogComplex g4(cplx w, int branch = 0, const CalibratedBounds* bounds = nullptr) const;

  FValue f(cplx z, const CalibratedBounds* bounds = nullptr) const;
  /// f with the tail always integrated (no cutoffs), so the deviation from
  /// z^(1/q) is known however small.
  FValue f_exact(cplx z) const;
  LogComplex f_prime(cplx z, const CalibratedBounds* bounds = nullptr) const;
  /// eps(z) = (q-1) zeta g1(zeta)^n / g2(zeta); f'/f = (1 + eps)/(q z).
  /// g2_out (optional) receives g2 at the home root.
  LogComplex epsilon(cplx z, const CalibratedBounds* bounds = nullptr, G2Value* g2_out = nullptr) const;

  /// Sector m of the tail path from zeta (value = omega^m a - T).
  int tail_sector(cplx zeta, long* winding = nullptr) const;
  /// g2 with the tail from the four-term endpoint expansion; route stays
  /// Zero when the error estimate exceeds max_err max(|g2|, |a|).
  G2Value endpoint_g2(cplx zeta, double max_err) const;

  /// Partial sigma integral int_0^{t_end} g1(sigma)^n dsigma.
  LogQuadResult sigma_integral(double t_end, int nodes, double rel_tol) const;
  /// Where the sigma integrand has dropped below its peak by drop_log.
  double sigma_cutoff() const;

 private:
  // The *_at variants take z = zeta^q from the caller: g2 is conditioned on
  // z, not zeta, so callers holding z exactly avoid re-deriving it.
  G2Value g2_at(cplx zeta, cplx z, const CalibratedBounds* bounds) const;
  G2Value g2_route_at(cplx zeta, cplx z, G2Route route) const;
  int tail_sector_at(cplx zeta, cplx w_t, long* winding) const;
  LogQuadResult tail_integral(cplx zeta, cplx w_t, int& sector) const;
  G2Value endpoint_from_sums(cplx zeta, cplx z, const DirectSums& ds, double max_err) const;
  double tail_start_offset(cplx w_t) const;
  LogQuadResult sigma_arc_integral(cplx zeta, cplx z, int& sector) const;
  LogQuadResult segment_integral(cplx zeta) const;

  ConstructionParams params_;
  std::shared_ptr<const ProductEvaluator> eval_;
  ChainSettings settings_;
  SigmaPath sigma_;
  double t0_;
  int n_;
  LogComplex a_;
  double a_err_;
  cplx omega_;
  double cross_pos_ = 0.0, cross_neg_ = 0.0;
  double theta_valley_ = 0.0;
  double theta_hmax_ = 0.0;
};

struct T0Scan {
  double t0 = 0.0;
  cplx z0;
  double lnmod_t0 = 0.0;
  double grid_cell = 0.0;  // log-spacing of the grid at t0
  double decay_eta = 0.0;
  double decay_intercept = 0.0;
  double decay_max_resid = 0.0;
};

/// Argmax of |Pi(L(t))| on a log grid over [1, t_scan_max], refined by
/// golden-section search; the tail beyond the grid is certified by a decay
/// fit of the spiral midpoints.
T0Scan select_t0(const ProductEvaluator& eval, double t_scan_max, int grid);

struct AValue {
  LogComplex a;
  double err_lnmod = -HUGE_VAL;
  double t_end = 0.0;
  int evaluations = 0;
  double ratio() const { return std::exp(a.lnmod - err_lnmod); }
};

/// a = int_sigma g1^n with the error from node doubling plus the adaptive
/// estimates.  Throws QuadratureStalled if doubling moves a by > tol |a|.
AValue compute_a(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval,
                 const ChainSettings& settings, double t0, int n, double tol);

struct NSelection {
  int n = 0;
  AValue a;
  std::vector<std::pair<int, double>> ratios;  // (n, |a|/err) for every n tried
};

NSelection select_n(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval,
                    const ChainSettings& settings, double t0, double tol);

struct ChainBuild {
  T0Scan scan;
  NSelection selection;
};

/// select_t0, select_n and compute_a in sequence.
Chain build_chain(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval,
                  const ChainSettings& settings, ChainBuild* report = nullptr);

/// Spine point near radius r: z on the spiral (theta = 0) whose shift z + z0
/// sits between zeros (local max of |Pi(z + z0)|).
cplx spine_point(const Chain& chain, double r);

struct CalibrationSettings {
  int fit_samples = 24;
  double safety = 0.5;
  /// Relative f deviation that marks the start of the fitted decade.
  double fit_start_dev = 1e-2;
  /// Decade for the eta1 fit of the product along spiral midpoints.
  double eta1_r_lo = 1e4, eta1_r_hi = 1e5;
  int r0_theta_points = 5;
  double r0_start = 1.25;
  double r0_factor = 1.1;
};

/// Fits the decay rates along the spine and locates r0, r1 and the regime
/// cutoffs.  Throws FitFailed when a bound is not observed to decay.
CalibratedBounds calibrate(const Chain& chain, const CalibrationSettings& settings = {});

/// Newton map value N(z) = z (eps - p) / (1 + eps) and N(z) + p z.
struct NewtonValue {
  LogComplex next;
  LogComplex residual;  // N(z) + p z
  /// log|g2 / a| at the home root; zeros of f need |g2| << |a|.
  double g2_rel_lnmod = 0.0;
};
NewtonValue newton_full(const Chain& chain, cplx z, const CalibratedBounds* bounds = nullptr);

}  // namespace baker
