#include "baker/chain.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "baker/errors.hpp"

namespace baker {

namespace {

constexpr double kLog1e18 = 41.446531673892822;  // -log(1e-18)

cplx cexpm1(cplx x) {
  const double em1 = std::expm1(x.real());
  const double s = std::sin(0.5 * x.imag());
  return {em1 * std::cos(x.imag()) - 2.0 * s * s, std::exp(x.real()) * std::sin(x.imag())};
}

cplx clog1p(cplx x) {
  const double re = 0.5 * std::log1p(2.0 * x.real() + std::norm(x));
  return {re, std::atan2(x.imag(), 1.0 + x.real())};
}

LogQuadResult combine(const LogQuadResult& a, const LogQuadResult& b) {
  LogQuadResult out;
  out.value = lc_add(a.value, b.value);
  out.err_lnmod = log_add_exp(a.err_lnmod, b.err_lnmod);
  out.panels = a.panels + b.panels;
  out.evaluations = a.evaluations + b.evaluations;
  out.converged = a.converged && b.converged;
  return out;
}

LogComplex checked_pi(const ProductEvaluator& eval, cplx w) {
  EvalResult r = eval.log_pi(w);
  if (r.regime == Regime::UpperBoundOnly) throw BoundOnlyContext("chain: path enters the bound-only regime");
  return r.value;
}

// Integrand of int g1(sigma)^n dsigma in the s = t^(1/q) variable (s <= 1)
// and in t (t >= 1).
struct SigmaIntegrand {
  const ProductEvaluator& eval;
  const SigmaPath& sigma;
  int n, q;
  double c;

  LogComplex g1n(double t) const {
    return lc_pow_int(checked_pi(eval, spiral_point(sigma.t0() + t, c)), n);
  }
  LogComplex in_s(double s) const {
    const cplx d = sigma.dsigma_ds(s);
    return lc_mul(g1n(std::pow(s, q)), lc_from_cartesian(d));
  }
  LogComplex in_t(double t) const {
    const double s = std::pow(t, 1.0 / q);
    const LogComplex d = lc_from_cartesian(sigma.dsigma_ds(s));
    LogComplex jac{d.lnmod - std::log(static_cast<double>(q)) - (q - 1) * std::log(s), d.arg};
    return lc_mul(g1n(t), jac);
  }
};

LogQuadResult sigma_integral_impl(const ConstructionParams& params, const ProductEvaluator& eval,
                                  const SigmaPath& sigma, int n, double t_end, int nodes, double tol) {
  SigmaIntegrand in{eval, sigma, n, params.q, params.c};
  LogQuadOptions opts;
  opts.nodes = nodes;
  opts.rel_tol = tol;
  const double s_end = std::min(1.0, std::pow(t_end, 1.0 / params.q));
  std::vector<double> sb;
  for (double f : {0.0, 0.5, 0.75, 0.9, 0.97, 1.0}) sb.push_back(f * s_end);
  LogQuadResult res = log_integrate([&](double s) { return in.in_s(s); }, sb, opts);
  if (t_end <= 1.0) return res;
  // t panels split at the zeros the path passes (|Pi|^n vanishes there)
  std::vector<double> tb{1.0};
  const ZeroSequence& seq = eval.seq();
  const double r_lo = sigma.t0() + 1.0, r_hi = sigma.t0() + t_end;
  std::int64_t k = seq.k_min() + seq.count_n(r_lo);
  const std::int64_t k_end = seq.k_min() + seq.count_n(r_hi) - 1;
  const std::int64_t stride = std::max<std::int64_t>(1, (k_end - k + 1) / 4000);
  for (; k <= k_end; k += stride) {
    const double t = seq.radius(k) - sigma.t0();
    if (t > tb.back() + 1e-9 && t < t_end - 1e-9) tb.push_back(t);
  }
  tb.push_back(t_end);
  return combine(res, log_integrate([&](double t) { return in.in_t(t); }, tb, opts));
}

double sigma_cutoff_impl(const ProductEvaluator& eval, const SigmaPath& sigma, int n, double drop_log, double c) {
  const ZeroSequence& seq = eval.seq();
  const double peak = n * checked_pi(eval, sigma.z0()).lnmod;
  std::int64_t k = seq.k_min() + seq.count_n(sigma.t0() + 1.0);
  int below = 0;
  double t_last = 1.0;
  for (int it = 0; it < 100000; ++it) {
    const double rm = std::sqrt(seq.radius(k) * seq.radius(k + 1));
    const double l = n * checked_pi(eval, spiral_point(rm, c)).lnmod;
    t_last = rm - sigma.t0();
    if (l < peak - drop_log) {
      if (++below >= 3) return t_last;
    } else {
      below = 0;
    }
    k += std::max<std::int64_t>(1, k / 40);
  }
  throw QuadratureStalled("sigma integrand does not decay");
}

// Least squares y = slope x + intercept.
void line_fit(const std::vector<double>& x, const std::vector<double>& y, double& slope, double& intercept,
              double& rms) {
  const double m = static_cast<double>(x.size());
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sx += x[i];
    sy += y[i];
    sxx += x[i] * x[i];
    sxy += x[i] * y[i];
  }
  const double den = m * sxx - sx * sx;
  slope = den != 0.0 ? (m * sxy - sx * sy) / den : 0.0;
  intercept = (sy - slope * sx) / m;
  double ss = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double e = y[i] - (slope * x[i] + intercept);
    ss += e * e;
  }
  rms = std::sqrt(ss / m);
}

}  // namespace

std::string to_string(G2Route r) {
  switch (r) {
    case G2Route::Zero: return "zero";
    case G2Route::Segment: return "segment";
    case G2Route::SigmaArc: return "sigma-arc";
    case G2Route::Tail: return "tail";
    case G2Route::Shortcut: return "shortcut";
    case G2Route::Endpoint: return "endpoint";
  }
  return "?";
}

Chain::Chain(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval, ChainSettings settings,
             double t0, int n, LogComplex a, double a_err_lnmod)
    : params_(params), eval_(std::move(eval)), settings_(settings), sigma_(params.c, params.q, t0), t0_(t0), n_(n),
      a_(a), a_err_(a_err_lnmod), omega_(std::polar(1.0, kTwoPi / params.q)) {
  if (!eval_) throw PreconditionError("Chain: missing evaluator");
  if (a.is_zero()) throw PreconditionError("Chain: a must be nonzero");
  const ThetaWindow win = find_theta_window(params);
  cross_pos_ = win.crossing_pos;
  cross_neg_ = win.crossing_neg;
  theta_valley_ = settings_.valley_fraction * cross_pos_;
  double best = -HUGE_VAL;
  for (int i = 1; i < 4096; ++i) {
    const double th = -kPi + kTwoPi * i / 4096.0;
    if (th == 0.0) continue;
    const double h = h_signed(params, th);
    if (h > best) {
      best = h;
      theta_hmax_ = th;
    }
  }
}

cplx Chain::zeta_pow_q(cplx zeta) const {
  const double m = std::abs(zeta);
  if (m == 0.0) return 0.0;
  return std::polar(std::pow(m, q()), q() * std::arg(zeta));
}

cplx Chain::home_root(cplx z) const {
  const SpiralCoords s = to_spiral_coords(z, params_.c);
  if (s.r == 0.0) return 0.0;
  return std::polar(std::pow(s.r, 1.0 / q()), (params_.c * std::log(s.r) + s.theta) / q());
}

EvalResult Chain::g1(cplx zeta) const {
  const double m = std::abs(zeta);
  if (m == 0.0) return eval_->log_pi(z0());
  const double lm = q() * std::log(m);
  if (lm < kSafeLnmod) return eval_->log_pi(zeta_pow_q(zeta) + z0());
  // z0 is far below the rounding of zeta^q here
  EvalResult r = eval_->log_pi(LogComplex{lm, reduce_angle(q() * std::arg(zeta))});
  r.err_lnmod = log_add_exp(r.err_lnmod, std::log(std::abs(z0())) - lm);
  return r;
}

LogQuadResult Chain::sigma_integral(double t_end, int nodes, double rel_tol) const {
  return sigma_integral_impl(params_, *eval_, sigma_, n_, t_end, nodes, rel_tol);
}

double Chain::sigma_cutoff() const { return sigma_cutoff_impl(*eval_, sigma_, n_, settings_.drop_log, params_.c); }

LogQuadResult Chain::segment_integral(cplx zeta) const {
  const cplx zq = zeta_pow_q(zeta);
  const LogComplex lz = lc_from_cartesian(zeta);
  LogQuadOptions opts;
  opts.nodes = settings_.quad_nodes;
  opts.rel_tol = settings_.quad_tol;
  auto f = [&](double s) {
    const cplx w = z0() + std::pow(s, q()) * zq;
    return lc_mul(lc_pow_int(checked_pi(*eval_, w), n_), lz);
  };
  return log_integrate(f, {0.0, 0.5, 0.75, 0.9, 1.0}, opts);
}

namespace {

// Jacobian dzeta/dw * dw/dp in log space, given the continuous argument of
// w - z0.
LogComplex path_jacobian(cplx w, cplx z0, double cont_arg, cplx dwdp, int q) {
  const double e = 1.0 / q - 1.0;
  const double lnd = std::log(std::abs(w - z0));
  return {e * lnd - std::log(static_cast<double>(q)) + std::log(std::abs(dwdp)),
          reduce_angle(e * cont_arg + std::arg(dwdp))};
}

}  // namespace

double Chain::tail_start_offset(cplx w_t) const {
  // start on the side of the valley that avoids the maximum of h, so the
  // integrand falls monotonically along the arc
  const double th = to_spiral_coords(w_t, params_.c).theta;
  return th <= theta_hmax_ ? th + kTwoPi : th;
}

int Chain::tail_sector(cplx zeta, long* winding) const {
  return tail_sector_at(zeta, zeta_pow_q(zeta) + z0(), winding);
}

int Chain::tail_sector_at(cplx zeta, cplx w_t, long* winding) const {
  const double c = params_.c;
  const double th = tail_start_offset(w_t);
  const double base = c * std::log(std::abs(w_t)) + th + std::arg(1.0 - z0() / w_t);
  const long M = std::lround((q() * std::arg(zeta) - base) / kTwoPi);
  if (winding) *winding = M;
  return static_cast<int>(((M % q()) + q()) % q());
}

LogQuadResult Chain::tail_integral(cplx zeta, cplx w_t, int& sector) const {
  const double c = params_.c;
  const double R = std::abs(w_t), lR = std::log(R);
  const double th_t = tail_start_offset(w_t);
  const double th_v = theta_valley_;
  const cplx zz0 = z0();
  long M = 0;
  sector = tail_sector_at(zeta, w_t, &M);
  const double shift = kTwoPi * M;
  auto base = [&](cplx w, double lr, double th) { return c * lr + th + std::arg(1.0 - zz0 / w); };

  auto arc = [&](double th) {
    const cplx w = std::polar(R, c * lR + th);
    const LogComplex jac = path_jacobian(w, zz0, base(w, lR, th) + shift, cplx(0.0, 1.0) * w, q());
    return lc_mul(lc_pow_int(checked_pi(*eval_, w), n_), jac);
  };
  auto spiral = [&](double u) {
    const cplx w = std::polar(std::exp(u), c * u + th_v);
    const LogComplex jac = path_jacobian(w, zz0, base(w, u, th_v) + shift, cplx(1.0, c) * w, q());
    return lc_mul(lc_pow_int(checked_pi(*eval_, w), n_), jac);
  };

  LogQuadOptions opts;
  opts.nodes = settings_.quad_nodes;
  opts.rel_tol = settings_.quad_tol;
  std::vector<double> ab;
  const int na = std::max(2, static_cast<int>(std::ceil(std::abs(th_v - th_t) / 0.05)));
  for (int i = 0; i <= na; ++i) ab.push_back(th_t + (th_v - th_t) * i / na);
  LogQuadResult res = log_integrate(arc, ab, opts);

  const double start = spiral(lR).lnmod + lR;
  if (!res.value.is_zero() && start < res.value.lnmod - 50.0) {
    // the valley leg starts far below the arc contribution and only decays
    res.err_lnmod = log_add_exp(res.err_lnmod, start);
    return res;
  }
  // march outward until the integrand times the radius is negligible
  const double ref = std::max(arc(th_t).lnmod + lR, start);
  double u = lR;
  int below = 0;
  for (int it = 0;; ++it) {
    if (it > 4000) throw QuadratureStalled("g2 tail: integrand does not decay along the valley path");
    u += 0.05;
    const double l = spiral(u).lnmod + u;
    if (l < ref - 40.0) {
      if (++below >= 3) break;
    } else {
      below = 0;
    }
  }
  std::vector<double> sb;
  const int ns = std::max(2, static_cast<int>(std::ceil((u - lR) / 0.25)));
  for (int i = 0; i <= ns; ++i) sb.push_back(lR + (u - lR) * i / ns);
  return combine(res, log_integrate(spiral, sb, opts));
}

G2Value Chain::endpoint_g2(cplx zeta, double max_err) const {
  const cplx z = zeta_pow_q(zeta);
  return endpoint_from_sums(zeta, z, eval_->direct_sums(z + z0()), max_err);
}

G2Value Chain::endpoint_from_sums(cplx zeta, cplx z, const DirectSums& ds, double max_err) const {
  // integration by parts from the endpoint:
  //   T = int_zeta^inf e^phi = -(e^phi / phi1) (1 + A + B + C + ...),
  //   A = phi2 / phi1^2,  B = (3 phi2^2 - phi1 phi3) / phi1^4,
  //   C = phi4 / phi1^4 - 10 phi2 phi3 / phi1^5 + 15 phi2^3 / phi1^6,
  // phi = n log Pi(zeta^q + z0), phiK its K-th derivative.  With
  // dK = zeta^K phiK the ratios are scale free.
  G2Value out;
  const double qd = q(), nd = n_;
  const cplx p1 = nd * ds.s1;
  const cplx p2 = -nd * ds.s2;
  const cplx p3 = 2.0 * nd * ds.s3;
  const cplx p4 = -6.0 * nd * ds.s4;
  const double g1 = qd, g2 = qd * (qd - 1.0), g3 = g2 * (qd - 2.0), g4 = g3 * (qd - 3.0);
  const cplx d1 = p1 * g1 * z;
  const cplx d2 = p2 * g1 * g1 * z * z + p1 * g2 * z;
  const cplx d3 = p3 * g1 * g1 * g1 * z * z * z + 3.0 * p2 * g1 * g2 * z * z + p1 * g3 * z;
  const cplx d4 = p4 * std::pow(g1 * z, 4) + 6.0 * p3 * g1 * g1 * g2 * z * z * z +
                  p2 * (3.0 * g2 * g2 + 4.0 * g1 * g3) * z * z + p1 * g4 * z;
  const cplx d1sq = d1 * d1;
  const cplx A = d2 / d1sq;
  const cplx B = (3.0 * d2 * d2 - d1 * d3) / (d1sq * d1sq);
  const cplx C = d4 / (d1sq * d1sq) - 10.0 * d2 * d3 / (d1sq * d1sq * d1) + 15.0 * d2 * d2 * d2 / (d1sq * d1sq * d1sq);
  // asymptotic series: the omitted term, extrapolated from the growth of
  // the term ratios (factorial growth raises each ratio by about 4/3)
  const double ratio = std::max({std::abs(A), std::abs(B) / std::max(std::abs(A), 1e-300),
                                 std::abs(C) / std::max(std::abs(B), 1e-300)});
  // Contributions from away from the endpoint are invisible to the local
  // series; against the quadrature they stay below 1e-9 |T|.
  const double next = std::max(2.0 * std::abs(C) * ratio, 1e-9);
  const LogComplex g1n = lc_pow_int(ds.value, n_);
  const LogComplex t =
      lc_neg(lc_mul(lc_div(g1n, lc_from_cartesian(d1 / zeta)), lc_from_cartesian(1.0 + A + B + C)));
  out.route = G2Route::Endpoint;
  out.sector = tail_sector_at(zeta, z + z0(), nullptr);
  out.tail = t;
  out.value = lc_sub(lc_scale(a_, std::pow(omega_, out.sector)), t);
  out.err_lnmod = log_add_exp(t.lnmod + std::log(next), a_err_);
  out.pi_w = ds.value;
  out.has_pi_w = true;
  // relative to |g2|, or to |a| where g2 cancels (near zeros of f)
  if (!(out.err_lnmod - std::max(out.value.lnmod, a_.lnmod) < std::log(max_err))) return {};
  return out;
}

LogQuadResult Chain::sigma_arc_integral(cplx zeta, cplx z, int& sector) const {
  const double c = params_.c;
  const cplx w_t = z + z0();
  const double R = std::abs(w_t), lR = std::log(R);
  if (!(R > t0_ + 1.0)) throw PreconditionError("g2: sigma-arc route needs |w| > t0 + 1");
  const double th_t = to_spiral_coords(w_t, c).theta;
  // turn away from the maximum of h so that |integrand| rises monotonically
  double th_end = th_t;
  if (th_t <= theta_hmax_) th_end = th_t + kTwoPi;
  const cplx zz0 = z0();
  auto base = [&](cplx w, double th) { return c * lR + th + std::arg(1.0 - zz0 / w); };
  auto arc = [&](double th) {
    const cplx w = std::polar(R, c * lR + th);
    const LogComplex jac = path_jacobian(w, zz0, base(w, th), cplx(0.0, 1.0) * w, q());
    return lc_mul(lc_pow_int(checked_pi(*eval_, w), n_), jac);
  };
  LogQuadOptions opts;
  opts.nodes = settings_.quad_nodes;
  opts.rel_tol = settings_.quad_tol;
  std::vector<double> ab;
  const int na = std::max(2, static_cast<int>(std::ceil(std::abs(th_end) / 0.02)));
  for (int i = 0; i <= na; ++i) ab.push_back(th_end * i / na);
  LogQuadResult res = combine(sigma_integral(R - t0_, settings_.quad_nodes, settings_.quad_tol),
                              log_integrate(arc, ab, opts));
  const double cont_end = base(w_t, th_end);
  const long m = std::lround((std::arg(zeta) - cont_end / q()) * q() / kTwoPi);
  sector = static_cast<int>(((m % q()) + q()) % q());
  return res;
}

G2Value Chain::g2_route(cplx zeta, G2Route route) const {
  return g2_route_at(zeta, zeta_pow_q(zeta), route);
}

G2Value Chain::g2_route_at(cplx zeta, cplx z, G2Route route) const {
  G2Value out;
  if (zeta == 0.0) return out;
  out.route = route;
  int sector = 0;
  LogQuadResult r;
  switch (route) {
    case G2Route::Segment:
      r = segment_integral(zeta);
      out.value = r.value;
      out.err_lnmod = r.err_lnmod;
      break;
    case G2Route::SigmaArc:
      r = sigma_arc_integral(zeta, z, sector);
      out.value = lc_scale(r.value, std::pow(omega_, sector));
      out.err_lnmod = r.err_lnmod;
      break;
    case G2Route::Tail: {
      r = tail_integral(zeta, z + z0(), sector);
      out.sector = sector;
      out.tail = r.value;
      const LogComplex wa = lc_scale(a_, std::pow(omega_, sector));
      out.value = lc_sub(wa, r.value);
      out.err_lnmod = log_add_exp(r.err_lnmod, a_err_);
      break;
    }
    default:
      throw PreconditionError("g2_route: route must be Segment, SigmaArc or Tail");
  }
  if (!r.converged) throw QuadratureStalled("g2: adaptive quadrature did not converge");
  return out;
}

G2Value Chain::g2(cplx zeta, const CalibratedBounds* bounds) const {
  if (zeta == 0.0) return {};
  return g2_at(zeta, zeta_pow_q(zeta), bounds);
}

G2Value Chain::g2_at(cplx zeta, cplx z, const CalibratedBounds* bounds) const {
  if (zeta == 0.0) return {};
  const double c = params_.c;
  const double rz = std::abs(z);
  if (rz <= settings_.r_segment) return g2_route_at(zeta, z, G2Route::Segment);
  const cplx w = z + z0();
  const double th_w = to_spiral_coords(w, c).theta;
  const bool decaying = th_w > -cross_neg_ && th_w < cross_pos_;
  const double lR = std::log(std::abs(w));
  // log of |integrand * w| at the endpoint, a proxy for |T|
  auto lead_of = [&](const LogComplex& pi) { return n_ * pi.lnmod + (1.0 / q() - 1.0) * std::log(rz) + lR; };
  auto try_endpoint = [&](const DirectSums& ds, G2Value& out) {
    if (!(lead_of(ds.value) > a_.lnmod + settings_.endpoint_margin)) return false;
    out = endpoint_from_sums(zeta, z, ds, settings_.endpoint_tol);
    return out.route == G2Route::Endpoint;
  };
  const bool endpoint_ok = std::abs(w) > settings_.r_endpoint;
  if (!decaying) {
    if (endpoint_ok) {
      G2Value e;
      try {
        if (try_endpoint(eval_->direct_sums(w), e)) return e;
      } catch (const BoundOnlyContext&) {
      }
    }
    return g2_route_at(zeta, z, G2Route::Tail);
  }
  const LogComplex pi = checked_pi(*eval_, w);
  const int sector = tail_sector_at(zeta, w, nullptr);
  const LogComplex wa = lc_scale(a_, std::pow(omega_, sector));
  G2Value out;
  out.sector = sector;
  out.pi_w = pi;
  out.has_pi_w = true;
  if (bounds && rz >= bounds->r_g2_cut && std::abs(to_spiral_coords(z, c).theta) < params_.theta2) {
    out.route = G2Route::Shortcut;
    out.value = wa;
    out.err_lnmod = -bounds->eta3 * std::pow(rz, params_.rho);
    return out;
  }
  // tail below the resolution of a: skip the quadrature (the integrand only
  // decays along the outward path, so |T| <~ |integrand(w)| * |w|)
  const double lead = lead_of(pi);
  if (lead < a_.lnmod - 45.0) {
    out.route = G2Route::Shortcut;
    out.value = wa;
    out.err_lnmod = lead;
    return out;
  }
  if (endpoint_ok && lead > a_.lnmod + settings_.endpoint_margin) {
    G2Value e;
    try {
      if (try_endpoint(eval_->direct_sums(w), e)) return e;
    } catch (const BoundOnlyContext&) {
    }
  }
  return g2_route_at(zeta, z, G2Route::Tail);
}

LogComplex Chain::g3(cplx zeta, const CalibratedBounds* bounds) const {
  if (zeta == 0.0) return lc_div(lc_pow_int(g1(0.0).value, n_), a_);
  return lc_div(g2(zeta, bounds).value, lc_mul(a_, lc_from_cartesian(zeta)));
}

LogComplex Chain::g4(cplx w, int branch, const CalibratedBounds* bounds) const {
  if (w == 0.0) return g3(0.0, bounds);
  const SpiralCoords s = to_spiral_coords(w, params_.c);
  const cplx zeta = std::polar(std::pow(s.r, 1.0 / q()), (params_.c * std::log(s.r) + s.theta + kTwoPi * branch) / q());
  return lc_div(g2_at(zeta, w, bounds).value, lc_mul(a_, lc_from_cartesian(zeta)));
}

namespace {

// f = zeta0 (G/a)^(q-1) for the home root zeta0 with G = g2(zeta0).
void assemble_f(const Chain& ch, cplx zeta0, const G2Value& g, FValue& out) {
  const int q = ch.q();
  const LogComplex lz0 = lc_from_cartesian(zeta0);
  out.value = lc_mul(lz0, lc_pow_int(lc_div(g.value, ch.a()), q - 1));
  const bool has_tail = g.route == G2Route::Tail || g.route == G2Route::Shortcut || g.route == G2Route::Endpoint;
  if (has_tail && g.sector == 0) {
    // deviation = zeta0 expm1((q-1) log1p(-x)), x = T/a
    if (g.tail.is_zero()) {
      out.deviation = LogComplex::zero();
      out.deviation_known = g.route == G2Route::Tail;
    } else {
      const LogComplex x = lc_div(g.tail, ch.a());
      LogComplex ratio;
      if (x.lnmod > -20.0) {
        ratio = lc_from_cartesian(cexpm1(static_cast<double>(q - 1) * clog1p(-lc_to_cartesian(x))));
      } else {
        const cplx xc = x.lnmod > -700.0 ? lc_to_cartesian(x) : cplx(0.0);
        ratio = lc_scale(x, -static_cast<double>(q - 1) * (1.0 - 0.5 * (q - 2) * xc));
      }
      out.deviation = lc_mul(lz0, ratio);
      out.deviation_known = true;
    }
  } else {
    out.deviation = lc_sub(out.value, lz0);
    out.deviation_known = true;
  }
  out.err_lnmod = out.value.lnmod + std::log(static_cast<double>(q - 1)) + (g.err_lnmod - g.value.lnmod);
}

}  // namespace

FValue Chain::f(cplx z, const CalibratedBounds* bounds) const {
  FValue out;
  if (z == 0.0) {
    out.value = LogComplex::zero();
    out.deviation = LogComplex::zero();
    out.deviation_known = true;
    return out;
  }
  const cplx zeta0 = home_root(z);
  const SpiralCoords s = to_spiral_coords(z, params_.c);
  if (bounds && s.r >= bounds->r_f_cut && std::abs(s.theta) < params_.theta2) {
    out.value = lc_from_cartesian(zeta0);
    out.deviation = LogComplex::zero();
    out.regime = FRegime::Asymptotic;
    out.err_lnmod = -bounds->eta4 * std::pow(s.r, params_.rho);
    return out;
  }
  assemble_f(*this, zeta0, g2_at(zeta0, z, bounds), out);
  return out;
}

FValue Chain::f_exact(cplx z) const {
  FValue out;
  if (z == 0.0) return f(z);
  const cplx zeta0 = home_root(z);
  G2Value g = g2_at(zeta0, z, nullptr);
  if (g.route == G2Route::Shortcut) g = g2_route_at(zeta0, z, G2Route::Tail);
  assemble_f(*this, zeta0, g, out);
  return out;
}

LogComplex Chain::epsilon(cplx z, const CalibratedBounds* bounds, G2Value* g2_out) const {
  if (z == 0.0) return lc_from_cartesian(static_cast<double>(q() - 1));
  const cplx zeta0 = home_root(z);
  const G2Value g = g2_at(zeta0, z, bounds);
  if (g2_out) *g2_out = g;
  if (g.value.is_zero()) throw PoleError("epsilon: g2 vanishes");
  const LogComplex g1n = lc_pow_int(g.has_pi_w ? g.pi_w : eval_->value(z + z0()), n_);
  return lc_div(lc_mul(lc_from_cartesian(static_cast<double>(q() - 1) * zeta0), g1n), g.value);
}

LogComplex Chain::f_prime(cplx z, const CalibratedBounds* bounds) const {
  if (z == 0.0) throw PoleError("f_prime: z = 0");
  const FValue fv = f(z, bounds);
  if (fv.value.is_zero()) throw PoleError("f_prime: g4 vanishes");
  const LogComplex e = epsilon(z, bounds);
  const LogComplex one_e = lc_add(LogComplex::unit(), e);
  return lc_div(lc_mul(fv.value, one_e), lc_from_cartesian(static_cast<double>(q()) * z));
}

NewtonValue newton_full(const Chain& chain, cplx z, const CalibratedBounds* bounds) {
  NewtonValue out;
  const double p = chain.params().p, q = chain.params().q;
  if (z == 0.0) {
    out.next = LogComplex::zero();
    out.residual = LogComplex::zero();
    return out;
  }
  G2Value g;
  const LogComplex e = chain.epsilon(z, bounds, &g);
  out.g2_rel_lnmod = g.value.lnmod - chain.a().lnmod;
  const LogComplex one_e = lc_add(LogComplex::unit(), e);
  if (one_e.is_zero()) throw CriticalPoint("newton: f' vanishes");
  out.residual = lc_mul(lc_from_cartesian(q * z), lc_div(e, one_e));
  out.next = lc_add(lc_from_cartesian(-p * z), out.residual);
  return out;
}

// ---------------------------------------------------------------------------

T0Scan select_t0(const ProductEvaluator& eval, double t_scan_max, int grid) {
  if (grid < 8 || !(t_scan_max > 2.0)) throw DomainError("select_t0: grid too small");
  const ZeroSequence& seq = eval.seq();
  const double c = seq.c(), rho = seq.rho();
  auto lnpi = [&](double t) { return eval.log_pi(spiral_point(t, c)).value.lnmod; };
  auto dodge = [&](double t) {
    // a grid point on a zero moves to the geometric midpoint of its gap
    const std::int64_t k = seq.k_min() - 1 + seq.count_n(t);
    if (k >= seq.k_min() && std::abs(seq.radius(k) - t) <= 1e-9 * t) {
      return std::sqrt(seq.radius(k) * seq.radius(k + 1));
    }
    return t;
  };
  const double lmax = std::log(t_scan_max);
  std::vector<double> ts(grid), vs(grid);
  std::size_t best = 0;
  for (int i = 0; i < grid; ++i) {
    ts[i] = dodge(std::exp(lmax * i / (grid - 1)));
    vs[i] = lnpi(ts[i]);
    if (vs[i] > vs[best]) best = static_cast<std::size_t>(i);
  }
  if (best + 1 >= ts.size()) throw ScanInconclusive("select_t0: maximum at the end of the scan");

  // decay fit over the last decade of gap midpoints
  std::vector<double> x, y;
  const std::int64_t k_lo = seq.k_min() + seq.count_n(t_scan_max / 10.0);
  const std::int64_t k_hi = seq.k_min() + seq.count_n(t_scan_max) - 2;
  if (k_hi <= k_lo + 4) throw ScanInconclusive("select_t0: too few zeros in the last decade");
  const std::int64_t step = std::max<std::int64_t>(1, (k_hi - k_lo) / 200);
  for (std::int64_t k = k_lo; k <= k_hi; k += step) {
    const double rm = std::sqrt(seq.radius(k) * seq.radius(k + 1));
    x.push_back(std::pow(rm, rho));
    y.push_back(lnpi(rm));
  }
  double slope, icpt, rms;
  line_fit(x, y, slope, icpt, rms);
  double resid = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) resid = std::max(resid, y[i] - (slope * x[i] + icpt));
  T0Scan out;
  out.decay_eta = -slope;
  out.decay_intercept = icpt;
  out.decay_max_resid = resid;
  const double tail_bound = icpt + resid - out.decay_eta * std::pow(t_scan_max, rho) + 1.0;
  if (!(out.decay_eta > 0.0) || !(tail_bound < vs[best])) {
    std::ostringstream os;
    os << "select_t0: decay fit cannot certify the tail (eta=" << out.decay_eta << ", bound=" << tail_bound
       << ", max=" << vs[best] << ")";
    throw ScanInconclusive(os.str());
  }
  // golden-section refinement in log t between the neighbouring grid points
  double lo = std::log(best > 0 ? ts[best - 1] : ts[0]), hi = std::log(ts[best + 1]);
  const double g = 0.5 * (std::sqrt(5.0) - 1.0);
  double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
  double f1 = lnpi(std::exp(x1)), f2 = lnpi(std::exp(x2));
  for (int it = 0; it < 80 && hi - lo > 1e-13; ++it) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + g * (hi - lo);
      f2 = lnpi(std::exp(x2));
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - g * (hi - lo);
      f1 = lnpi(std::exp(x1));
    }
  }
  double t0 = std::exp(0.5 * (lo + hi));
  double v0 = lnpi(t0);
  if (v0 < vs[best]) {
    t0 = ts[best];
    v0 = vs[best];
  }
  out.t0 = t0;
  out.z0 = spiral_point(t0, c);
  out.lnmod_t0 = v0;
  out.grid_cell = lmax / (grid - 1);
  return out;
}

AValue compute_a(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval,
                 const ChainSettings& settings, double t0, int n, double tol) {
  const SigmaPath sigma(params.c, params.q, t0);
  AValue out;
  out.t_end = sigma_cutoff_impl(*eval, sigma, n, settings.drop_log, params.c);
  const LogQuadResult r1 = sigma_integral_impl(params, *eval, sigma, n, out.t_end, settings.quad_nodes, settings.quad_tol);
  const LogQuadResult r2 =
      sigma_integral_impl(params, *eval, sigma, n, out.t_end, 2 * settings.quad_nodes, settings.quad_tol);
  out.a = r2.value;
  out.evaluations = r1.evaluations + r2.evaluations;
  if (out.a.is_zero()) throw QuadratureStalled("compute_a: integral vanished");
  const LogComplex diff = lc_sub(r2.value, r1.value);
  const double dl = diff.is_zero() ? -HUGE_VAL : diff.lnmod;
  // the dropped part beyond t_end is below peak * exp(-drop_log) per unit length
  out.err_lnmod = log_add_exp(log_add_exp(dl, r2.err_lnmod),
                              n * checked_pi(*eval, sigma.z0()).lnmod - settings.drop_log);
  if (dl - out.a.lnmod > std::log(tol) || !r2.converged) {
    throw QuadratureStalled("compute_a: node doubling moved a by more than tol");
  }
  return out;
}

NSelection select_n(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval,
                    const ChainSettings& settings, double t0, double tol) {
  NSelection out;
  for (int n = settings.n_start; n <= settings.n_max; ++n) {
    double ratio = 0.0;
    try {
      AValue av = compute_a(params, eval, settings, t0, n, tol);
      ratio = av.ratio();
      out.ratios.emplace_back(n, ratio);
      if (ratio > settings.cert_ratio) {
        out.n = n;
        out.a = av;
        return out;
      }
    } catch (const QuadratureStalled&) {
      out.ratios.emplace_back(n, 0.0);
    }
  }
  std::ostringstream os;
  os << "select_n: no n in [" << settings.n_start << ", " << settings.n_max << "] certifies a;";
  for (auto& [n, r] : out.ratios) os << " n=" << n << ":" << r;
  throw NoAdmissibleN(os.str());
}

Chain build_chain(const ConstructionParams& params, std::shared_ptr<const ProductEvaluator> eval,
                  const ChainSettings& settings, ChainBuild* report) {
  ChainBuild b;
  b.scan = select_t0(*eval, settings.t_scan_max, settings.t_grid);
  b.selection = select_n(params, eval, settings, b.scan.t0, 1e-10);
  if (report) *report = b;
  return Chain(params, std::move(eval), settings, b.scan.t0, b.selection.n, b.selection.a.a,
               b.selection.a.err_lnmod);
}

cplx spine_point(const Chain& chain, double r) {
  const ConstructionParams& p = chain.params();
  const double spacing = std::pow(r, 1.0 - p.rho) / (p.rho * p.delta);
  double best_r = r, best = -HUGE_VAL;
  for (int i = 0; i <= 32; ++i) {
    const double ri = r + spacing * i / 32.0;
    const double v = chain.evaluator().log_pi(spiral_point(ri, p.c) + chain.z0()).value.lnmod;
    if (v > best) {
      best = v;
      best_r = ri;
    }
  }
  return spiral_point(best_r, p.c);
}

// ---------------------------------------------------------------------------

namespace {

FitRecord fit_decay(const std::string& name, const std::vector<double>& r, const std::vector<double>& lnq,
                    double rho, double safety) {
  FitRecord fr;
  fr.name = name;
  std::vector<double> x, y;
  for (std::size_t i = 0; i < r.size(); ++i) {
    x.push_back(std::pow(r[i], rho));
    y.push_back(-lnq[i]);
  }
  line_fit(x, y, fr.slope, fr.intercept, fr.rms);
  fr.samples = static_cast<int>(r.size());
  fr.r_lo = r.front();
  fr.r_hi = r.back();
  if (!(fr.slope > 0.0) || !std::isfinite(fr.slope)) {
    std::ostringstream os;
    os << "calibrate: " << name << " does not decay (slope " << fr.slope << ", intercept " << fr.intercept << ")";
    throw FitFailed(os.str());
  }
  fr.eta = safety * fr.slope;
  std::size_t last_bad = r.size();
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (lnq[i] > -fr.eta * x[i]) last_bad = i;
  }
  if (last_bad + 1 == r.size()) {
    throw FitFailed("calibrate: " + name + " bound fails at the end of the fitted range");
  }
  fr.valid_from = last_bad == r.size() ? r.front() : r[last_bad + 1];
  return fr;
}

// Smallest r >= from with -eta r^rho <= log_thr(r).
template <class F>
double solve_cut(double eta, double rho, double from, F log_thr) {
  double r = from;
  for (int it = 0; it < 100000; ++it) {
    if (-eta * std::pow(r, rho) <= log_thr(r)) return r;
    r *= 1.005;
  }
  return HUGE_VAL;
}

}  // namespace

CalibratedBounds calibrate(const Chain& chain, const CalibrationSettings& cs) {
  const ConstructionParams& p = chain.params();
  const ProductEvaluator& ev = chain.evaluator();
  const double rho = p.rho;
  CalibratedBounds b;

  // start of the fitted decade
  double r = 4.0 * std::abs(chain.z0());
  for (int it = 0;; ++it) {
    if (it > 200) throw FitFailed("calibrate: f deviation never drops below the fit threshold");
    const cplx z = spine_point(chain, r);
    const FValue fv = chain.f_exact(z);
    const double rel = fv.deviation.lnmod - std::log(std::abs(z)) / p.q;
    if (rel < std::log(cs.fit_start_dev)) break;
    r *= 1.25;
  }
  b.r_fit = r;
  b.r_fit_hi = 10.0 * r;

  std::vector<double> rs, q2, q3, q4, q5, q6;
  const int m = cs.fit_samples;
  for (int i = 0; i < m; ++i) {
    const double ri = b.r_fit * std::pow(10.0, static_cast<double>(i) / (m - 1));
    const cplx z = spine_point(chain, ri);
    const double rz = std::abs(z);
    rs.push_back(rz);
    q2.push_back(ev.value(z + chain.z0()).lnmod);
    const cplx zeta0 = chain.home_root(z);
    G2Value g = chain.g2_route(zeta0, G2Route::Tail);
    q3.push_back(g.tail.lnmod);
    const FValue fv = chain.f_exact(z);
    q4.push_back(fv.deviation.lnmod);
    const LogComplex e = chain.epsilon(z);
    const LogComplex dprime =
        lc_div(lc_add(fv.deviation, lc_mul(fv.value, e)), lc_from_cartesian(static_cast<double>(p.q) * z));
    q5.push_back(dprime.lnmod);
    const LogComplex res = lc_mul(lc_from_cartesian(static_cast<double>(p.q) * z),
                                  lc_div(e, lc_add(LogComplex::unit(), e)));
    q6.push_back(res.lnmod);
  }
  b.fit2 = fit_decay("eta2", rs, q2, rho, cs.safety);
  b.fit3 = fit_decay("eta3", rs, q3, rho, cs.safety);
  b.fit4 = fit_decay("eta4", rs, q4, rho, cs.safety);
  b.fit5 = fit_decay("eta5", rs, q5, rho, cs.safety);
  b.fit6 = fit_decay("eta6", rs, q6, rho, cs.safety);

  std::vector<double> r1s, q1;
  const ZeroSequence& seq = ev.seq();
  for (int i = 0; i < 12; ++i) {
    const double ri = cs.eta1_r_lo * std::pow(cs.eta1_r_hi / cs.eta1_r_lo, i / 11.0);
    const std::int64_t k = seq.k_min() - 1 + std::max<std::int64_t>(1, seq.count_n(ri));
    const double rm = std::sqrt(seq.radius(k) * seq.radius(k + 1));
    r1s.push_back(rm);
    q1.push_back(ev.log_pi(spiral_point(rm, p.c)).value.lnmod);
  }
  b.fit1 = fit_decay("eta1", r1s, q1, rho, cs.safety);

  b.eta1 = b.fit1.eta;
  b.eta2 = b.fit2.eta;
  b.eta3 = b.fit3.eta;
  b.eta4 = b.fit4.eta;
  b.eta5 = b.fit5.eta;
  b.eta6 = b.fit6.eta;

  const double la = chain.a().lnmod;
  b.r_g2_cut = solve_cut(b.eta3, rho, b.fit3.valid_from, [&](double) { return la - kLog1e18; });
  b.r_f_cut = solve_cut(b.eta4, rho, b.fit4.valid_from, [&](double x) { return std::log(x) / p.q - kLog1e18; });
  b.r_newton = solve_cut(b.eta6, rho, b.fit6.valid_from, [&](double x) { return std::log(p.p * x) - kLog1e18; });
  b.r_band_lo = solve_cut(b.eta6, rho, b.fit6.valid_from, [&](double x) { return std::log(1e-3 * p.p * x); });

  // r0: from here on |N(z)| > 2|z| on the theta grid in S3
  std::vector<double> grid;
  for (double x = cs.r0_start; x <= b.r_fit_hi; x *= cs.r0_factor) grid.push_back(x);
  double r0 = HUGE_VAL;
  for (std::size_t i = grid.size(); i-- > 0;) {
    bool ok = true;
    for (int j = 0; j < cs.r0_theta_points && ok; ++j) {
      const double th = p.theta3 * 0.75 * (2.0 * j / (cs.r0_theta_points - 1) - 1.0);
      const cplx z = from_spiral_coords({grid[i], th}, p.c);
      try {
        const NewtonValue nv = newton_full(chain, z);
        ok = nv.next.lnmod - std::log(grid[i]) > std::log(2.0);
      } catch (const Error&) {
        ok = false;
      }
    }
    if (!ok) break;
    r0 = grid[i];
  }
  if (!(r0 < HUGE_VAL)) throw FitFailed("calibrate: |N(z)| > 2|z| not observed on S3 up to the fit range");
  b.r0 = std::max(r0, cs.r0_start);
  b.r1 = 10.0 * b.r0;
  return b;
}

}  // namespace baker
