#include "baker/quadrature.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "baker/errors.hpp"

namespace baker {

namespace {

constexpr int kMaxRule = 128;

GaussRule build_rule(int n) {
  GaussRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    // Newton iteration on P_n from the Chebyshev-like initial guess
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) { p1 = x; p0 = 1.0; }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    if (n == 1) { x = 0.0; dp = 1.0; }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.nodes[n - 1 - i] = x;
    rule.weights[i] = rule.weights[n - 1 - i] = n == 1 ? 2.0 : w;
  }
  return rule;
}

struct Panel {
  double a, b;
  LogComplex coarse;
  int depth;
};

}  // namespace

const GaussRule& gauss_legendre(int n) {
  if (n < 1 || n > kMaxRule) throw DomainError("gauss_legendre: unsupported rule size");
  static const std::array<GaussRule, kMaxRule + 1> table = [] {
    std::array<GaussRule, kMaxRule + 1> t;
    for (int k = 1; k <= kMaxRule; ++k) t[k] = build_rule(k);
    return t;
  }();
  return table[n];
}

double log_add_exp(double a, double b) {
  if (a == -HUGE_VAL) return b;
  if (b == -HUGE_VAL) return a;
  const double m = std::max(a, b);
  return m + std::log1p(std::exp(-std::abs(a - b)));
}

double LogQuadResult::rel_err() const {
  if (value.is_zero()) return err_lnmod <= -1e299 ? 0.0 : HUGE_VAL;
  return std::exp(err_lnmod - value.lnmod);
}

LogComplex log_panel(const LogIntegrand& f, double a, double b, int n, int* evals) {
  const GaussRule& rule = gauss_legendre(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  std::vector<LogComplex> vals(rule.nodes.size());
  double peak = -HUGE_VAL;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    vals[i] = f(mid + half * rule.nodes[i]);
    if (std::isnan(vals[i].lnmod)) throw NaNGuard("log_panel: NaN integrand");
    peak = std::max(peak, vals[i].lnmod);
  }
  if (evals) *evals += static_cast<int>(vals.size());
  if (peak == -HUGE_VAL) return LogComplex::zero();
  cplx sum = 0.0;
  for (std::size_t i = 0; i < vals.size(); ++i) {
    if (vals[i].is_zero()) continue;
    sum += rule.weights[i] * std::polar(std::exp(vals[i].lnmod - peak), vals[i].arg);
  }
  sum *= half;
  if (sum == 0.0) return LogComplex::zero();
  return {peak + std::log(std::abs(sum)), reduce_angle(std::arg(sum))};
}

LogQuadResult log_integrate(const LogIntegrand& f, const std::vector<double>& breaks, const LogQuadOptions& opts) {
  LogQuadResult out;
  out.value = LogComplex::zero();
  if (breaks.size() < 2) return out;

  std::vector<Panel> work;
  LogComplex total = LogComplex::zero();
  for (std::size_t i = 0; i + 1 < breaks.size(); ++i) {
    Panel p{breaks[i], breaks[i + 1], log_panel(f, breaks[i], breaks[i + 1], opts.nodes, &out.evaluations), 0};
    total = lc_add(total, p.coarse);
    work.push_back(p);
  }
  // the running total only sets the acceptance scale; the result is rebuilt
  // from accepted panels
  double scale = total.lnmod;
  LogComplex accepted = LogComplex::zero();
  const double log_tol = std::log(opts.rel_tol);
  while (!work.empty()) {
    Panel p = work.back();
    work.pop_back();
    // a panel far below the tolerance of the total needs no refinement
    if (p.coarse.is_zero() || p.coarse.lnmod < log_tol + scale - 20.0) {
      accepted = lc_add(accepted, p.coarse);
      if (!p.coarse.is_zero()) out.err_lnmod = log_add_exp(out.err_lnmod, p.coarse.lnmod);
      ++out.panels;
      continue;
    }
    const double m = 0.5 * (p.a + p.b);
    const LogComplex left = log_panel(f, p.a, m, opts.nodes, &out.evaluations);
    const LogComplex right = log_panel(f, m, p.b, opts.nodes, &out.evaluations);
    const LogComplex fine = lc_add(left, right);
    const LogComplex diff = lc_sub(fine, p.coarse);
    const double err = diff.is_zero() ? -HUGE_VAL : diff.lnmod;
    const double ref = std::max(scale, fine.is_zero() ? -HUGE_VAL : fine.lnmod - 40.0);
    const bool small = err <= log_tol + ref;
    if (small || p.depth >= opts.max_depth || out.panels + static_cast<int>(work.size()) >= opts.max_panels) {
      if (!small) out.converged = false;
      accepted = lc_add(accepted, fine);
      out.err_lnmod = log_add_exp(out.err_lnmod, err);
      ++out.panels;
      if (!accepted.is_zero()) scale = std::max(scale, accepted.lnmod);
      continue;
    }
    work.push_back({m, p.b, right, p.depth + 1});
    work.push_back({p.a, m, left, p.depth + 1});
  }
  out.value = accepted;
  return out;
}

}  // namespace baker
