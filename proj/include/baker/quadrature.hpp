#pragma once

// Gauss-Legendre rules and a panel-adaptive integrator for integrands that
// are only representable in log space.

#include <functional>
#include <vector>

#include "baker/logspace.hpp"

namespace baker {

struct GaussRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

/// n-point Gauss-Legendre rule, 1 <= n <= 128 (cached).
const GaussRule& gauss_legendre(int n);

/// Plain complex integral of f over [a, b] with an n-point rule.
template <class F>
cplx gl_integrate(const F& f, double a, double b, int n) {
  const GaussRule& rule = gauss_legendre(n);
  const double half = 0.5 * (b - a), mid = 0.5 * (a + b);
  cplx sum = 0.0;
  for (std::size_t i = 0; i < rule.nodes.size(); ++i) sum += rule.weights[i] * f(mid + half * rule.nodes[i]);
  return sum * half;
}

/// Integrand returning its value in log space (Jacobian included).
using LogIntegrand = std::function<LogComplex(double)>;

struct LogQuadOptions {
  int nodes = 16;
  double rel_tol = 1e-13;
  int max_depth = 30;
  int max_panels = 1 << 16;
};

struct LogQuadResult {
  LogComplex value;
  /// Sum over accepted panels of |fine - coarse| (absolute, log of modulus).
  double err_lnmod = -1e300;
  int panels = 0;
  int evaluations = 0;
  bool converged = true;

  double rel_err() const;
};

/// Integral over consecutive [breaks[i], breaks[i+1]] panels; each panel is
/// bisected until its coarse/fine difference is below rel_tol times the
/// running total.  Every panel sum is rescaled by its own peak, so the
/// integrand may exceed the double range.
LogQuadResult log_integrate(const LogIntegrand& f, const std::vector<double>& breaks,
                            const LogQuadOptions& opts = {});

/// One n-point Gauss-Legendre panel evaluated in log space.
LogComplex log_panel(const LogIntegrand& f, double a, double b, int n, int* evals = nullptr);

/// log(exp(a) + exp(b)) for real a, b.
double log_add_exp(double a, double b);

}  // namespace baker
