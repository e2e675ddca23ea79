#include "baker/product.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "baker/errors.hpp"
#include "baker/quadrature.hpp"

namespace baker {

namespace {

constexpr double kSeriesCut = 1e-20;
constexpr int kMaxSeries = 400;

// Midpoint Euler-Maclaurin weights B_{2m}(1/2) / (2m)!.
constexpr std::array<double, 3> kEmWeights{-1.0 / 24.0, 7.0 / 5760.0, -31.0 / 967680.0};
constexpr std::array<int, 3> kEmOrders{1, 3, 5};

// Bernoulli numbers B_2 .. B_12.
constexpr std::array<double, 6> kBernoulli{1.0 / 6.0, -1.0 / 30.0, 1.0 / 42.0, -1.0 / 30.0, 5.0 / 66.0,
                                           -691.0 / 2730.0};

cplx falling(cplx alpha, int m) {
  cplx out = 1.0;
  for (int i = 0; i < m; ++i) out *= alpha - static_cast<double>(i);
  return out;
}

// log(1 - u) + u, accurate for small |u|.
cplx log1m_plus(cplx u) {
  if (std::abs(u) > 0.5) return std::log(1.0 - u) + u;
  cplx term = u * u, sum = 0.0;
  for (int j = 2; j < kMaxSeries; ++j) {
    sum -= term / static_cast<double>(j);
    if (std::abs(term) < kSeriesCut) break;
    term *= u;
  }
  return sum;
}

cplx log1m(cplx u) { return log1m_plus(u) - u; }

// N^z * zeta(z, N) by Euler-Maclaurin from N on; err receives the size of
// the last correction used.
cplx hurwitz_scaled(cplx z, double N, double* err) {
  cplx out = N / (z - 1.0) + 0.5;
  cplx rising = z;  // z (z+1) ... (z+2m-2)
  double fact = 2.0;  // (2m)!
  double npow = 1.0 / N;  // N^(1-2m)
  cplx last = 0.0;
  for (int m = 1; m <= static_cast<int>(kBernoulli.size()); ++m) {
    last = kBernoulli[m - 1] / fact * rising * npow;
    out += last;
    rising *= (z + (2.0 * m - 1.0)) * (z + 2.0 * m);
    fact *= (2.0 * m + 1.0) * (2.0 * m + 2.0);
    npow /= N * N;
  }
  if (err) *err = std::abs(last);
  return out;
}

// Composite Gauss-Legendre over t in [t0, t1] (unit-width panels) with
// a doubled-rule comparison.
template <class Kernel>
cplx panel_integral(const Kernel& kernel, double t0, double t1, int nodes, double& err) {
  if (!(t1 > t0)) return 0.0;
  const int panels = std::max(1, static_cast<int>(std::ceil(t1 - t0 - 1e-12)));
  const double h = (t1 - t0) / panels;
  cplx coarse = 0.0, fine = 0.0;
  for (int i = 0; i < panels; ++i) {
    const double a = t0 + i * h, b = a + h;
    coarse += gl_integrate(kernel, a, b, nodes);
    fine += gl_integrate(kernel, a, b, 2 * nodes);
  }
  err += std::abs(fine - coarse);
  return fine;
}

}  // namespace

std::string to_string(Regime r) {
  switch (r) {
    case Regime::Direct: return "Direct";
    case Regime::Hybrid: return "Hybrid";
    case Regime::AsymptoticValue: return "AsymptoticValue";
    case Regime::UpperBoundOnly: return "UpperBoundOnly";
  }
  return "?";
}

ProductEvaluator::ProductEvaluator(const ConstructionParams& params, ProductOptions opts)
    : params_(params), opts_(opts), seq_(params) {
  if (!(opts_.window > 1.0)) throw DomainError("ProductEvaluator: window must exceed 1");
  if (opts_.quad_nodes < 2 || 2 * opts_.quad_nodes > 128) throw DomainError("ProductEvaluator: bad quad_nodes");
  if (opts_.k_em < seq_.k_min()) opts_.k_em = seq_.k_min();
  const std::int64_t kcache = std::max<std::int64_t>(last_index(opts_.window * opts_.cache_radius), opts_.k_em);
  auto cache = std::make_shared<std::vector<cplx>>();
  cache->reserve(static_cast<std::size_t>(kcache - seq_.k_min() + 1));
  const cplx s = seq_.exponent();
  for (std::int64_t k = seq_.k_min(); k <= kcache; ++k)
    cache->push_back(std::exp(-s * std::log(static_cast<double>(k) / seq_.delta())));
  inv_zeros_ = std::move(cache);
}

ProductEvaluator ProductEvaluator::with_eta1(double eta1) const {
  ProductEvaluator out = *this;
  out.opts_.eta1 = eta1;
  return out;
}

std::int64_t ProductEvaluator::last_index(double r) const { return seq_.k_min() - 1 + seq_.count_n(r); }

cplx ProductEvaluator::inv_zero(std::int64_t k) const {
  const std::int64_t i = k - seq_.k_min();
  if (i >= 0 && static_cast<std::size_t>(i) < inv_zeros_->size()) return (*inv_zeros_)[static_cast<std::size_t>(i)];
  return std::exp(-seq_.exponent() * std::log(static_cast<double>(k) / seq_.delta()));
}

double ProductEvaluator::offset(cplx w) const { return to_spiral_coords(w, params_.c).theta; }

LogComplex ProductEvaluator::partial_product(cplx w, std::int64_t from, std::int64_t to) const {
  // block product with periodic renormalisation of the binary exponent
  cplx prod = 1.0;
  long long exp2 = 0;
  int since = 0;
  for (std::int64_t k = from; k <= to; ++k) {
    const cplx factor = 1.0 - w * inv_zero(k);
    if (factor == 0.0) return LogComplex::zero();
    prod *= factor;
    if (++since == 8) {
      since = 0;
      int e = 0;
      std::frexp(std::max(std::abs(prod.real()), std::abs(prod.imag())), &e);
      if (prod == 0.0) return LogComplex::zero();
      prod = {std::ldexp(prod.real(), -e), std::ldexp(prod.imag(), -e)};
      exp2 += e;
    }
  }
  if (prod == 0.0) return LogComplex::zero();
  return {std::log(std::abs(prod)) + static_cast<double>(exp2) * std::log(2.0), std::arg(prod)};
}

cplx ProductEvaluator::partial_log_derivative(cplx w, std::int64_t from, std::int64_t to) const {
  cplx sum = 0.0;
  for (std::int64_t k = from; k <= to; ++k) {
    const cplx ia = inv_zero(k);
    // 1/(w - a) = ia / (w ia - 1)
    const cplx d = w * ia - 1.0;
    if (d == 0.0) throw PoleError("log_derivative evaluated at a zero of Pi");
    sum += ia / d;
  }
  return sum;
}

EvalResult ProductEvaluator::log_pi_direct(cplx w, std::int64_t K, double tol) const {
  if (K > opts_.k_direct) throw PreconditionError("log_pi_direct: K exceeds k_direct");
  EvalResult out;
  out.regime = Regime::Direct;
  out.value = partial_product(w, seq_.k_min(), K);
  if (w == 0.0) {
    out.err_lnmod = 0.0;
    return out;
  }
  const double bound = seq_.radius(K) >= 2.0 * std::abs(w) ? tail_bound(std::abs(w), K) : HUGE_VAL;
  out.err_lnmod = bound;
  out.err_arg = bound;
  if (bound > tol) throw TruncationInsufficient("log_pi_direct: tail bound exceeds tolerance");
  return out;
}

double ProductEvaluator::tail_bound(double absw, std::int64_t K) const {
  if (K < seq_.k_min() || seq_.radius(K) < 2.0 * absw) throw PreconditionError("tail_bound: needs r_K >= 2|w|");
  // sum_{k>K} 2|w| / r_k <= 2|w| int_K^inf (x/delta)^(-1/rho) dx
  const double rho = seq_.rho();
  return 2.0 * absw * std::pow(seq_.delta(), 1.0 / rho) * std::pow(static_cast<double>(K), 1.0 - 1.0 / rho) /
         (1.0 / rho - 1.0);
}

cplx ProductEvaluator::tail_series(cplx w, std::int64_t K, double* err) const {
  const double N = static_cast<double>(K + 1);
  const cplx s = seq_.exponent();
  const cplx u = w * std::exp(-s * std::log(N / seq_.delta()));
  if (!(std::abs(u) < 0.9)) throw PreconditionError("tail_series: |w| too close to r_{K+1}");
  cplx sum = 0.0, upow = u;
  double em_err = 0.0, last = 0.0;
  for (int j = 1; j < kMaxSeries; ++j) {
    double e = 0.0;
    const cplx term = -upow * hurwitz_scaled(static_cast<double>(j) * s, N, &e) / static_cast<double>(j);
    sum += term;
    em_err += std::abs(upow) * e / j;
    last = std::abs(term);
    if (std::abs(upow) * N < kSeriesCut) break;
    upow *= u;
  }
  if (err) *err = em_err + last;
  return sum;
}

EvalResult ProductEvaluator::log_pi_complete_direct(cplx w) const {
  EvalResult out;
  out.regime = Regime::Direct;
  if (w == 0.0) {
    out.value = LogComplex::unit();
    return out;
  }
  const double R = std::abs(w);
  const std::int64_t K = std::max(last_index(opts_.window * R), opts_.k_em);
  if (K > opts_.k_direct) throw PreconditionError("Direct regime needs more than k_direct zeros");
  const LogComplex head = partial_product(w, seq_.k_min(), K);
  if (head.is_zero()) {
    out.value = head;
    return out;
  }
  double err = 0.0;
  const cplx tail = tail_series(w, K, &err);
  out.value = lc_mul(head, lc_exp(tail));
  out.err_lnmod = err + 1e-16 * static_cast<double>(K);
  out.err_arg = out.err_lnmod;
  return out;
}

cplx ProductEvaluator::outer_far_log(cplx w, std::int64_t A, double& err) const {
  const double X = static_cast<double>(A) - 0.5;
  const double rho = seq_.rho();
  const cplx s = seq_.exponent();
  const cplx one_ic(1.0, params_.c);
  const cplx uX = w * std::exp(-s * std::log(X / seq_.delta()));
  const double au = std::abs(uX);
  // -u integrated in closed form; the O(u^2) remainder numerically in
  // t = log(r / r(X))
  const cplx lead = -uX * X / (s - 1.0);
  const double decay = std::log(au * au * X) + 46.0;
  const double t_end = std::max(1.0, decay / (2.0 - rho));
  auto kernel = [&](double t) {
    const cplx u = uX * std::exp(-one_ic * t);
    return log1m_plus(u) * rho * X * std::exp(rho * t);
  };
  const cplx integral = panel_integral(kernel, 0.0, t_end, opts_.quad_nodes, err);

  std::array<cplx, 3> d{};
  cplx upow = uX;
  for (int j = 1; j < kMaxSeries; ++j) {
    const cplx js = static_cast<double>(j) * s;
    for (int m = 0; m < 3; ++m)
      d[m] += -upow / static_cast<double>(j) * falling(-js, kEmOrders[m]) / std::pow(X, kEmOrders[m]);
    if (std::abs(upow) < kSeriesCut) break;
    upow *= uX;
  }
  cplx em = 0.0;
  for (int m = 0; m < 3; ++m) em -= kEmWeights[m] * d[m];
  err += 0.1 * std::abs(kEmWeights[2] * d[2]);
  return lead + integral + em;
}

cplx ProductEvaluator::inner_far_log(cplx w, std::int64_t A, std::int64_t B, double& err) const {
  const double xa = static_cast<double>(A) - 0.5, xb = static_cast<double>(B) + 0.5;
  const double rho = seq_.rho(), delta = seq_.delta();
  const cplx s = seq_.exponent();
  const cplx one_ic(1.0, params_.c);
  // log(1 - w/a) = log(-w) - s log(x/delta) + log(1 - a/w) up to 2 pi i
  auto primitive = [&](double x) { return x * std::log(x / delta) - x; };
  const cplx analytic = std::log(-w) * (xb - xa) - s * (primitive(xb) - primitive(xa));
  const cplx vb = std::exp(s * std::log(xb / delta)) / w;
  const double t_len = std::log(xb / xa) / rho;
  auto kernel = [&](double t) {  // t = log(r / r(xb)) in [-t_len, 0]
    const cplx v = vb * std::exp(one_ic * t);
    return log1m(v) * rho * xb * std::exp(rho * t);
  };
  const cplx integral = panel_integral(kernel, -t_len, 0.0, opts_.quad_nodes, err);

  auto derivs = [&](double x) {
    std::array<cplx, 3> d{};
    const cplx v0 = std::exp(s * std::log(x / delta)) / w;
    for (int m = 0; m < 3; ++m) {
      const int order = kEmOrders[m];
      double fact = 1.0;
      for (int i = 2; i < order; ++i) fact *= i;
      d[m] = -s * ((order - 1) % 2 == 0 ? 1.0 : -1.0) * fact / std::pow(x, order);
    }
    cplx vpow = v0;
    for (int j = 1; j < kMaxSeries; ++j) {
      const cplx js = static_cast<double>(j) * s;
      for (int m = 0; m < 3; ++m)
        d[m] += -vpow / static_cast<double>(j) * falling(js, kEmOrders[m]) / std::pow(x, kEmOrders[m]);
      if (std::abs(vpow) < kSeriesCut) break;
      vpow *= v0;
    }
    return d;
  };
  const auto da = derivs(xa), db = derivs(xb);
  cplx em = 0.0;
  for (int m = 0; m < 3; ++m) em += kEmWeights[m] * (db[m] - da[m]);
  err += 0.1 * std::abs(kEmWeights[2] * (db[2] - da[2]));
  return analytic + integral + em;
}

EvalResult ProductEvaluator::log_pi_hybrid(cplx w) const {
  EvalResult out;
  out.regime = Regime::Hybrid;
  if (w == 0.0) {
    out.value = LogComplex::unit();
    return out;
  }
  const double R = std::abs(w);
  const std::int64_t k_hi = std::max(last_index(opts_.window * R), opts_.k_em);
  const std::int64_t k_lo = last_index(R / opts_.window);
  double err = 0.0;
  LogComplex exact;
  cplx far = 0.0;
  if (k_lo >= opts_.k_em + 16) {
    exact = lc_mul(partial_product(w, seq_.k_min(), opts_.k_em - 1), partial_product(w, k_lo + 1, k_hi));
    far += inner_far_log(w, opts_.k_em, k_lo, err);
  } else {
    exact = partial_product(w, seq_.k_min(), k_hi);
  }
  if (exact.is_zero()) {
    out.value = exact;
    return out;
  }
  far += outer_far_log(w, k_hi + 1, err);
  out.value = lc_mul(exact, lc_exp(far));
  out.err_lnmod = err + 1e-16 * static_cast<double>(k_hi - k_lo);
  out.err_arg = out.err_lnmod;
  return out;
}

EvalResult ProductEvaluator::log_pi_asymptotic(const LogComplex& w) const {
  EvalResult out;
  const double theta = spiral_offset(w, params_.c);
  const double rr = std::exp(seq_.rho() * w.lnmod);
  if (std::abs(theta) < opts_.theta_guard || theta == 0.0) {
    out.regime = Regime::UpperBoundOnly;
    out.value = {-opts_.eta1 * rr, std::nan("")};
    out.err_lnmod = 0.0;
    out.err_arg = HUGE_VAL;
    return out;
  }
  const cplx A = angular_limit(params_, theta < 0.0 ? theta + kTwoPi : theta);
  out.regime = Regime::AsymptoticValue;
  out.value = {A.real() * rr, reduce_angle(A.imag() * rr)};
  // the convergence rate is not known; report the 5% consistency budget
  out.err_lnmod = 0.05 * rr;
  out.err_arg = HUGE_VAL;
  return out;
}

EvalResult ProductEvaluator::log_pi(cplx w) const {
  if (w == 0.0) return log_pi_complete_direct(w);
  const double R = std::abs(w);
  if (seq_.count_n(opts_.window * R) <= opts_.k_direct) return log_pi_complete_direct(w);
  if (R <= opts_.r_asym) return log_pi_hybrid(w);
  return log_pi_asymptotic(lc_from_cartesian(w));
}

EvalResult ProductEvaluator::log_pi(const LogComplex& w) const {
  if (w.is_zero()) return log_pi(cplx(0.0));
  if (w.lnmod < kSafeLnmod) return log_pi(lc_to_cartesian(w));
  return log_pi_asymptotic(w);
}

LogComplex ProductEvaluator::value(cplx w) const {
  const EvalResult r = log_pi(w);
  if (r.regime == Regime::UpperBoundOnly) throw BoundOnlyContext("Pi value requested where only a bound is available");
  return r.value;
}

cplx ProductEvaluator::log_derivative_direct(cplx w, std::int64_t K) const {
  return partial_log_derivative(w, seq_.k_min(), K);
}

cplx ProductEvaluator::outer_far_dlog(cplx w, std::int64_t A, double& err) const {
  const double X = static_cast<double>(A) - 0.5;
  const double rho = seq_.rho();
  const cplx s = seq_.exponent();
  const cplx one_ic(1.0, params_.c);
  const cplx uX = w * std::exp(-s * std::log(X / seq_.delta()));
  const double au = std::abs(uX);
  // 1/(w - a) = -(1/w) (u + u^2/(1-u))
  const cplx lead = -uX * X / ((s - 1.0) * w);
  const double decay = std::log(au * au * X / std::abs(w)) + 46.0;
  const double t_end = std::max(1.0, decay / (2.0 - rho));
  auto kernel = [&](double t) {
    const cplx u = uX * std::exp(-one_ic * t);
    return -(u * u / (1.0 - u)) / w * rho * X * std::exp(rho * t);
  };
  const cplx integral = panel_integral(kernel, 0.0, t_end, opts_.quad_nodes, err);
  std::array<cplx, 3> d{};
  cplx upow = uX;
  for (int j = 1; j < kMaxSeries; ++j) {
    const cplx js = static_cast<double>(j) * s;
    for (int m = 0; m < 3; ++m) d[m] += -upow / w * falling(-js, kEmOrders[m]) / std::pow(X, kEmOrders[m]);
    if (std::abs(upow) < kSeriesCut) break;
    upow *= uX;
  }
  cplx em = 0.0;
  for (int m = 0; m < 3; ++m) em -= kEmWeights[m] * d[m];
  err += 0.1 * std::abs(kEmWeights[2] * d[2]);
  return lead + integral + em;
}

cplx ProductEvaluator::inner_far_dlog(cplx w, std::int64_t A, std::int64_t B, double& err) const {
  const double xa = static_cast<double>(A) - 0.5, xb = static_cast<double>(B) + 0.5;
  const double rho = seq_.rho(), delta = seq_.delta();
  const cplx s = seq_.exponent();
  const cplx one_ic(1.0, params_.c);
  // 1/(w - a) = (1/w) (1 + v/(1-v)), v = a/w
  const cplx analytic = (xb - xa) / w;
  const cplx vb = std::exp(s * std::log(xb / delta)) / w;
  const double t_len = std::log(xb / xa) / rho;
  auto kernel = [&](double t) {
    const cplx v = vb * std::exp(one_ic * t);
    return v / (1.0 - v) / w * rho * xb * std::exp(rho * t);
  };
  const cplx integral = panel_integral(kernel, -t_len, 0.0, opts_.quad_nodes, err);
  auto derivs = [&](double x) {
    std::array<cplx, 3> d{};
    const cplx v0 = std::exp(s * std::log(x / delta)) / w;
    cplx vpow = v0;
    for (int j = 1; j < kMaxSeries; ++j) {
      const cplx js = static_cast<double>(j) * s;
      for (int m = 0; m < 3; ++m) d[m] += vpow / w * falling(js, kEmOrders[m]) / std::pow(x, kEmOrders[m]);
      if (std::abs(vpow) < kSeriesCut) break;
      vpow *= v0;
    }
    return d;
  };
  const auto da = derivs(xa), db = derivs(xb);
  cplx em = 0.0;
  for (int m = 0; m < 3; ++m) em += kEmWeights[m] * (db[m] - da[m]);
  err += 0.1 * std::abs(kEmWeights[2] * (db[2] - da[2]));
  return analytic + integral + em;
}

cplx ProductEvaluator::sum_inverse_power(cplx w, int m) const {
  if (m < 2) throw DomainError("sum_inverse_power: m must be >= 2");
  const double R = std::abs(w);
  if (seq_.count_n(opts_.window * R) > opts_.k_direct) {
    throw BoundOnlyContext("sum_inverse_power: |w| beyond the Direct regime");
  }
  const std::int64_t K = std::max(last_index(opts_.window * R), opts_.k_em);
  cplx sum = 0.0;
  for (std::int64_t k = seq_.k_min(); k <= K; ++k) {
    const cplx ia = inv_zero(k);
    const cplx d = w * ia - 1.0;
    if (d == 0.0) throw PoleError("sum_inverse_power evaluated at a zero of Pi");
    const cplx t = ia / d;
    cplx tm = t;
    for (int i = 1; i < m; ++i) tm *= t;
    sum += tm;
  }
  // tail: 1/(w - a)^m = (-1)^m sum_{j>=m} C(j-1, m-1) w^(j-m) a^(-j) and
  // sum_{k>K} a_k^(-j) = c1^j N^{js} zeta(js, N)
  const double N = static_cast<double>(K + 1);
  const cplx s = seq_.exponent();
  const cplx c1 = std::exp(-s * std::log(N / seq_.delta()));
  const double sign = m % 2 == 0 ? 1.0 : -1.0;
  double ez = 0.0;
  if (w == 0.0) return sum + sign * std::pow(c1, m) * hurwitz_scaled(static_cast<double>(m) * s, N, &ez);
  const cplx u = w * c1;
  cplx upow = std::pow(u, m), tail = 0.0;
  double binom = 1.0;  // C(j-1, m-1)
  for (int j = m; j < kMaxSeries; ++j) {
    tail += binom * upow * hurwitz_scaled(static_cast<double>(j) * s, N, &ez);
    if (binom * std::abs(upow) * N < kSeriesCut) break;
    binom *= static_cast<double>(j) / (j - m + 1);
    upow *= u;
  }
  return sum + sign * tail / std::pow(w, m);
}

DirectSums ProductEvaluator::direct_sums(cplx w) const {
  const double R = std::abs(w);
  if (seq_.count_n(opts_.window * R) > opts_.k_direct) {
    throw BoundOnlyContext("direct_sums: |w| beyond the Direct regime");
  }
  const std::int64_t K = std::max(last_index(opts_.window * R), opts_.k_em);
  DirectSums out;
  cplx prod = 1.0;
  long long exp2 = 0;
  int since = 0;
  for (std::int64_t k = seq_.k_min(); k <= K; ++k) {
    const cplx ia = inv_zero(k);
    const cplx factor = 1.0 - w * ia;
    if (factor == 0.0) throw PoleError("direct_sums evaluated at a zero of Pi");
    // 1/(w - a_k) = -ia / factor, inline reciprocal (no __divdc3)
    const double inv = 1.0 / std::norm(factor);
    const cplx t = -ia * std::conj(factor) * inv;
    const cplx t2 = t * t;
    out.s1 += t;
    out.s2 += t2;
    out.s3 += t2 * t;
    out.s4 += t2 * t2;
    prod *= factor;
    if (++since == 8) {
      since = 0;
      int e = 0;
      std::frexp(std::max(std::abs(prod.real()), std::abs(prod.imag())), &e);
      prod = {std::ldexp(prod.real(), -e), std::ldexp(prod.imag(), -e)};
      exp2 += e;
    }
  }
  // tails share H_j = N^{js} zeta(js, N):
  //   log:  -sum_j u^j H_j / j
  //   m-th power sum: (-1)^m w^-m sum_{j>=m} C(j-1, m-1) u^j H_j
  const double N = static_cast<double>(K + 1);
  const cplx s = seq_.exponent();
  const cplx c1 = std::exp(-s * std::log(N / seq_.delta()));
  double ez = 0.0;
  cplx tail_log = 0.0;
  if (w == 0.0) {
    out.s1 += -c1 * hurwitz_scaled(s, N, &ez);
    out.s2 += c1 * c1 * hurwitz_scaled(2.0 * s, N, &ez);
    out.s3 += -c1 * c1 * c1 * hurwitz_scaled(3.0 * s, N, &ez);
    out.s4 += c1 * c1 * c1 * c1 * hurwitz_scaled(4.0 * s, N, &ez);
  } else {
    const cplx u = w * c1;
    cplx upow = u, t1 = 0.0, t2 = 0.0, t3 = 0.0, t4 = 0.0;
    for (int j = 1; j < kMaxSeries; ++j) {
      const cplx h = upow * hurwitz_scaled(static_cast<double>(j) * s, N, &ez);
      tail_log -= h / static_cast<double>(j);
      t1 += h;
      if (j >= 2) t2 += static_cast<double>(j - 1) * h;
      if (j >= 3) t3 += 0.5 * static_cast<double>((j - 1) * (j - 2)) * h;
      if (j >= 4) t4 += static_cast<double>((j - 1) * (j - 2) * (j - 3)) / 6.0 * h;
      if (std::abs(upow) * N * j * j < kSeriesCut) break;
      upow *= u;
    }
    out.s1 += -t1 / w;
    out.s2 += t2 / (w * w);
    out.s3 += -t3 / (w * w * w);
    out.s4 += t4 / (w * w * w * w);
  }
  out.value = lc_mul({std::log(std::abs(prod)) + static_cast<double>(exp2) * std::log(2.0), std::arg(prod)},
                     lc_exp(tail_log));
  return out;
}

cplx ProductEvaluator::log_derivative(cplx w, double* err) const {
  const double R = std::abs(w);
  double e = 0.0;
  cplx out;
  if (seq_.count_n(opts_.window * R) <= opts_.k_direct) {
    const std::int64_t K = std::max(last_index(opts_.window * R), opts_.k_em);
    out = partial_log_derivative(w, seq_.k_min(), K);
    // sum_{k>K} 1/(w - a_k) = -(1/w) sum_j u^j N^{js} zeta(js, N)
    if (w == 0.0) {
      double ez = 0.0;
      const double N = static_cast<double>(K + 1);
      const cplx s = seq_.exponent();
      out += -std::exp(-s * std::log(N / seq_.delta())) * hurwitz_scaled(s, N, &ez);
      e += ez;
    } else {
      const double N = static_cast<double>(K + 1);
      const cplx s = seq_.exponent();
      const cplx u = w * std::exp(-s * std::log(N / seq_.delta()));
      cplx upow = u, tail = 0.0;
      for (int j = 1; j < kMaxSeries; ++j) {
        double ez = 0.0;
        tail += -upow * hurwitz_scaled(static_cast<double>(j) * s, N, &ez) / w;
        e += std::abs(upow / w) * ez;
        if (std::abs(upow) * N < kSeriesCut) break;
        upow *= u;
      }
      out += tail;
    }
  } else if (R <= opts_.r_asym) {
    const std::int64_t k_hi = std::max(last_index(opts_.window * R), opts_.k_em);
    const std::int64_t k_lo = last_index(R / opts_.window);
    if (k_lo >= opts_.k_em + 16) {
      out = partial_log_derivative(w, seq_.k_min(), opts_.k_em - 1) + partial_log_derivative(w, k_lo + 1, k_hi);
      out += inner_far_dlog(w, opts_.k_em, k_lo, e);
    } else {
      out = partial_log_derivative(w, seq_.k_min(), k_hi);
    }
    out += outer_far_dlog(w, k_hi + 1, e);
  } else {
    throw BoundOnlyContext("log_derivative: |w| beyond the value-capable regimes");
  }
  if (err) *err = e;
  return out;
}

double ProductEvaluator::max_log_modulus(double r, int samples) const {
  if (r == 0.0) return 0.0;
  double best = -HUGE_VAL;
  for (int j = 0; j < samples; ++j) {
    const EvalResult v = log_pi(std::polar(r, kTwoPi * j / samples));
    best = std::max(best, v.value.lnmod);
  }
  return best;
}

}  // namespace baker
