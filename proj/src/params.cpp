#include "baker/params.hpp"

#include <cmath>
#include <string>

#include "baker/errors.hpp"
#include "baker/logspace.hpp"

namespace baker {

namespace {

constexpr int kWindowSamples = 1 << 16;

cplx denominator(const ConstructionParams& p) {
  const cplx i(0.0, 1.0);
  return 1.0 - std::exp(i * kTwoPi * p.rho / cplx(1.0, p.c));
}

// First sign change of h_signed(sign * t) for t in (0, pi], refined by bisection.
// Returns pi and sets capped when none is found.
double first_crossing(const ConstructionParams& params, double sign, double tol, bool& capped) {
  const double step = kPi / kWindowSamples;
  double lo = tol;
  for (int k = 1; k <= kWindowSamples; ++k) {
    const double hi = k * step;
    if (h_signed(params, sign * hi) >= 0.0) {
      double a = lo, b = hi;
      while (b - a > tol) {
        const double m = 0.5 * (a + b);
        if (h_signed(params, sign * m) < 0.0) a = m; else b = m;
      }
      return a;
    }
    lo = hi;
  }
  capped = true;
  return kPi;
}

}  // namespace

ConstructionParams make_params(double rho, double delta, int p) {
  if (!(rho > 0.5 && rho < 1.0)) throw DomainError("rho must lie in (1/2, 1), got " + std::to_string(rho));
  if (!(delta > 0.0)) throw DomainError("delta must be positive");
  if (p < 2) throw DomainError("p must be at least 2");
  ConstructionParams out;
  out.rho = rho;
  out.delta = delta;
  out.p = p;
  out.q = p + 1;
  out.c = kPi / std::log(static_cast<double>(p));
  out.mu = rho / (1.0 + out.c * out.c);
  return out;
}

ConstructionParams derive_params(double rho, double margin, double delta, int p_max,
                                 std::array<double, 3> ratios, double tol) {
  if (!(rho > 0.5 && rho < 1.0)) throw DomainError("rho must lie in (1/2, 1), got " + std::to_string(rho));
  if (margin < 0.0) throw DomainError("margin must be non-negative");
  if (p_max < 24) throw DomainError("p_max must be at least 24");
  for (int p = 24; p <= p_max; ++p) {
    ConstructionParams params = make_params(rho, delta, p);
    if (params.mu > 0.5 && params.mu >= 0.5 + margin) {
      const ThetaWindow window = find_theta_window(params, tol);
      params.theta0 = window.theta0;
      params.theta0_capped = window.capped;
      select_angles(params, ratios);
      return params;
    }
  }
  throw NoAdmissibleP("no p <= " + std::to_string(p_max) + " gives mu >= 1/2 + " + std::to_string(margin));
}

cplx angular_limit(const ConstructionParams& params, double theta) {
  const cplx i(0.0, 1.0);
  const cplx num = -kTwoPi * i * params.delta * std::exp(i * params.rho * theta / cplx(1.0, params.c));
  return num / denominator(params);
}

double h_at(const ConstructionParams& params, double theta) {
  if (!(theta > 0.0 && theta < kTwoPi)) throw DomainError("h_at: theta must lie in (0, 2 pi)");
  return angular_limit(params, theta).real();
}

double h_signed(const ConstructionParams& params, double theta) {
  if (theta < 0.0) theta += kTwoPi;
  return h_at(params, theta);
}

double h0_closed_form(const ConstructionParams& params) {
  const double d = std::norm(denominator(params));
  return kTwoPi * params.delta * std::exp(kTwoPi * params.mu * params.c) *
         std::sin(kTwoPi * params.mu) / d;
}

ThetaWindow find_theta_window(const ConstructionParams& params, double tol) {
  if (!(h0_closed_form(params) < 0.0)) throw NoNegativeWindow("h(0) >= 0: no decay window around the spiral");
  ThetaWindow w;
  bool cap_pos = false, cap_neg = false;
  w.crossing_pos = first_crossing(params, 1.0, tol, cap_pos);
  w.crossing_neg = first_crossing(params, -1.0, tol, cap_neg);
  w.theta0 = std::min(w.crossing_pos, w.crossing_neg);
  w.capped = cap_pos && cap_neg;
  return w;
}

void select_angles(ConstructionParams& params, std::array<double, 3> ratios) {
  const bool ok = ratios[0] < 1.0 && ratios[0] > ratios[1] && ratios[1] > ratios[2] && ratios[2] > 0.0;
  if (!ok) throw DomainError("angle ratios must be strictly decreasing in (0, 1)");
  if (!(params.theta0 > 0.0)) throw DomainError("select_angles: theta0 not set");
  params.theta1 = ratios[0] * params.theta0;
  params.theta2 = ratios[1] * params.theta0;
  params.theta3 = ratios[2] * params.theta0;
}

void validate(const ConstructionParams& p) {
  if (!(p.rho > 0.5 && p.rho < 1.0)) throw DomainError("rho outside (1/2, 1)");
  if (p.q != p.p + 1) throw DomainError("q != p + 1");
  if (p.p < 24) throw DomainError("p < 24");
  if (std::abs(p.c - kPi / std::log(static_cast<double>(p.p))) > 1e-14 * p.c) throw DomainError("c != pi / log p");
  if (std::abs(p.mu - p.rho / (1.0 + p.c * p.c)) > 1e-14) throw DomainError("mu != rho / (1 + c^2)");
  if (!(p.mu > 0.5 && p.mu < 1.0)) throw DomainError("mu outside (1/2, 1)");
  if (!(0.0 < p.theta3 && p.theta3 < p.theta2 && p.theta2 < p.theta1 && p.theta1 < p.theta0 && p.theta0 <= kPi))
    throw DomainError("angle thresholds not ordered");
  constexpr int kChecks = 2048;
  for (int k = 1; k <= kChecks; ++k) {
    const double t = p.theta1 * k / kChecks;
    if (h_signed(p, t) >= 0.0 || h_signed(p, -t) >= 0.0) throw DomainError("h >= 0 inside the theta1 window");
  }
}

}  // namespace baker
