#pragma once

// The genus-0 canonical product Pi(w) = prod_k (1 - w / a_k) over the spiral
// zero sequence, evaluated in log space.
//
// Regimes:
//   Direct           every zero up to kappa*|w| multiplied out, the tail
//                    summed as a power series in w with Hurwitz-zeta
//                    coefficients;
//   Hybrid           zeros in the near zone [|w|/kappa, kappa |w|] (and the
//                    first k_em) multiplied out, the far ranges replaced by
//                    the density integral plus Euler-Maclaurin corrections;
//   AsymptoticValue  |w|^rho A(theta), the angular limit, off the spiral;
//   UpperBoundOnly   near the spiral beyond r_asym: only -eta1 |w|^rho.

#include <cmath>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "baker/geometry.hpp"
#include "baker/logspace.hpp"
#include "baker/params.hpp"

namespace baker {

enum class Regime { Direct, Hybrid, AsymptoticValue, UpperBoundOnly };

std::string to_string(Regime r);

struct EvalResult {
  LogComplex value;
  Regime regime = Regime::Direct;
  double err_lnmod = 0.0;
  double err_arg = 0.0;
};

/// log Pi(w) together with s_m = sum_k 1/(w - a_k)^m, m = 1..4.
struct DirectSums {
  LogComplex value;
  cplx s1 = 0.0, s2 = 0.0, s3 = 0.0, s4 = 0.0;
};

struct ProductOptions {
  std::int64_t k_direct = 10'000'000;
  double window = 8.0;
  double r_asym = 1e7;
  int quad_nodes = 16;
  /// Half-width around the spiral where beyond r_asym only a bound is given.
  double theta_guard = 0.0;
  /// Calibrated decay rate used by the UpperBoundOnly regime (0 = unknown).
  double eta1 = 0.0;
  /// Reciprocal zeros are precomputed up to kappa * cache_radius.
  double cache_radius = 1e5;
  /// Zeros below this index are always multiplied out; Euler-Maclaurin is
  /// only applied from here on.
  std::int64_t k_em = 64;
};

class ProductEvaluator {
 public:
  ProductEvaluator(const ConstructionParams& params, ProductOptions opts = {});

  const ZeroSequence& seq() const { return seq_; }
  const ProductOptions& options() const { return opts_; }
  const ConstructionParams& params() const { return params_; }

  /// Copy with a calibrated eta1 (shares the zero cache).
  ProductEvaluator with_eta1(double eta1) const;

  /// Index of the last zero with |a_k| <= r (k_min - 1 when none).
  std::int64_t last_index(double r) const;

  /// Raw partial sum over k_min..K with the truncation bound in err_lnmod.
  /// Throws TruncationInsufficient when the bound exceeds tol.
  EvalResult log_pi_direct(cplx w, std::int64_t K, double tol = HUGE_VAL) const;

  /// Rigorous bound on |sum_{k>K} log(1 - w/a_k)|; requires r_K >= 2 |w|.
  double tail_bound(double absw, std::int64_t K) const;

  /// sum_{k>K} log(1 - w/a_k) via the Hurwitz-zeta power series; requires
  /// r_{K+1} > |w|.
  cplx tail_series(cplx w, std::int64_t K, double* err = nullptr) const;

  EvalResult log_pi_complete_direct(cplx w) const;
  EvalResult log_pi_hybrid(cplx w) const;
  /// Value or bound depending on the spiral offset of w.
  EvalResult log_pi_asymptotic(const LogComplex& w) const;

  /// Regime dispatch.
  EvalResult log_pi(cplx w) const;
  EvalResult log_pi(const LogComplex& w) const;

  /// log_pi that refuses bound-only answers (throws BoundOnlyContext).
  LogComplex value(cplx w) const;

  /// Pi'/Pi(w) = sum_k 1/(w - a_k).
  cplx log_derivative(cplx w, double* err = nullptr) const;
  cplx log_derivative_direct(cplx w, std::int64_t K) const;
  /// sum_k 1/(w - a_k)^m for m >= 2 (m = 2 gives -(Pi'/Pi)'); Direct regime only.
  cplx sum_inverse_power(cplx w, int m) const;
  /// value, log_derivative and the m = 2, 3, 4 power sums in one pass; Direct
  /// regime only (throws BoundOnlyContext, or PoleError at a zero).
  DirectSums direct_sums(cplx w) const;

  /// Max of log|Pi| over `samples` equispaced points on |w| = r.
  double max_log_modulus(double r, int samples) const;

  /// Spiral offset of w, reduced to (-pi, pi].
  double offset(cplx w) const;

 private:
  cplx inv_zero(std::int64_t k) const;
  /// prod_{k=from}^{to} (1 - w/a_k) in log space.
  LogComplex partial_product(cplx w, std::int64_t from, std::int64_t to) const;
  cplx partial_log_derivative(cplx w, std::int64_t from, std::int64_t to) const;
  /// sum_{k>=A} of the log kernel via the density integral and EM corrections.
  cplx outer_far_log(cplx w, std::int64_t A, double& err) const;
  cplx inner_far_log(cplx w, std::int64_t A, std::int64_t B, double& err) const;
  cplx outer_far_dlog(cplx w, std::int64_t A, double& err) const;
  cplx inner_far_dlog(cplx w, std::int64_t A, std::int64_t B, double& err) const;

  ConstructionParams params_;
  ProductOptions opts_;
  ZeroSequence seq_;
  std::shared_ptr<const std::vector<cplx>> inv_zeros_;  // 1/a_k, index k - k_min
};

}  // namespace baker
