#include "baker/cli.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "baker/errors.hpp"
#include "baker/io.hpp"

namespace baker {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

std::string num(double x, int digits = 6) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*g", digits, x + 0.0);
  return buf;
}

std::string out_path(const RunConfig& cfg, const std::string& name) {
  return (std::filesystem::path(cfg.out_dir) / name).string();
}

}  // namespace

const std::vector<std::string>& subcommands() {
  static const std::vector<std::string> names{"derive",  "profile-h",  "verify-product", "calibrate",
                                              "verify-asymptotics", "invariance", "orbit", "render"};
  return names;
}

void Report::check(bool ok, const std::string& name, const std::string& detail) {
  text_ += (ok ? "PASS " : "FAIL ") + name + ": " + detail + "\n";
  if (!ok) failed_ = true;
}

void Report::info(const std::string& text) { text_ += text + "\n"; }

// ---------------------------------------------------------------------------

Pipeline make_base_pipeline(const RunConfig& cfg) {
  Pipeline pl;
  pl.cfg = cfg;
  pl.params = make_construction_params(cfg);
  pl.eval = std::make_shared<const ProductEvaluator>(pl.params, make_product_options(cfg, pl.params));
  return pl;
}

Pipeline make_pipeline(const RunConfig& cfg) {
  Pipeline pl = make_base_pipeline(cfg);
  const auto t = Clock::now();
  if (!cfg.chain_file.empty()) {
    const ChainRecord rec = parse_chain(read_file(cfg.chain_file), config_hash(cfg), cfg.chain_file);
    pl.eval = std::make_shared<const ProductEvaluator>(pl.eval->with_eta1(rec.bounds.eta1));
    pl.chain = std::make_unique<Chain>(pl.params, pl.eval, cfg.chain, rec.t0, rec.n, rec.a, rec.a_err_lnmod);
    pl.bounds = rec.bounds;
  } else {
    ChainBuild build;
    const Chain base = build_chain(pl.params, pl.eval, cfg.chain, &build);
    pl.bounds = calibrate(base, cfg.calibration);
    // the bound-only product regime needs the calibrated eta1
    pl.eval = std::make_shared<const ProductEvaluator>(pl.eval->with_eta1(pl.bounds.eta1));
    pl.chain = std::make_unique<Chain>(pl.params, pl.eval, cfg.chain, base.t0(), base.n(), base.a(),
                                       base.a_err_lnmod());
    pl.build = build;
  }
  pl.build_seconds = seconds_since(t);
  return pl;
}

Chain Pipeline::render_chain() const {
  ChainSettings rs = cfg.chain;
  rs.endpoint_tol = cfg.render_endpoint_tol;
  rs.endpoint_margin = cfg.render_endpoint_margin;
  return Chain(params, eval, rs, chain->t0(), chain->n(), chain->a(), chain->a_err_lnmod());
}

ChainRecord Pipeline::record() const {
  ChainRecord rec;
  rec.config_hash = config_hash(cfg);
  rec.t0 = chain->t0();
  rec.n = chain->n();
  rec.a = chain->a();
  rec.a_err_lnmod = chain->a_err_lnmod();
  rec.bounds = bounds;
  return rec;
}

// ---------------------------------------------------------------------------

namespace {

std::string params_text(const ConstructionParams& p) {
  std::ostringstream os;
  os << "rho = " << format_real(p.rho) << "\n"
     << "delta = " << format_real(p.delta) << "\n"
     << "p = " << p.p << "\n"
     << "q = " << p.q << "\n"
     << "c = " << format_real(p.c) << "\n"
     << "mu = " << format_real(p.mu) << "\n"
     << "theta0 = " << format_real(p.theta0) << (p.theta0_capped ? " (capped at pi)" : "") << "\n"
     << "theta1 = " << format_real(p.theta1) << "\n"
     << "theta2 = " << format_real(p.theta2) << "\n"
     << "theta3 = " << format_real(p.theta3);
  return os.str();
}

void cmd_derive(const RunConfig& cfg, Report& rep) {
  const ConstructionParams p = make_construction_params(cfg);
  rep.info(params_text(p));
  bool ok = true;
  std::string why = "all invariants hold";
  try {
    validate(p);
  } catch (const Error& e) {
    ok = false;
    why = e.what();
  }
  rep.check(ok, "params", why);
  rep.check(p.mu >= 0.5 + cfg.margin && p.mu < 1.0, "mu", "mu = " + num(p.mu, 10) + ", required >= " +
                                                              num(0.5 + cfg.margin, 10));
  rep.check(std::abs(p.c * std::log(static_cast<double>(p.p)) - kPi) < 1e-14, "pitch", "c log p = pi");
}

void cmd_profile_h(const RunConfig& cfg, Report& rep) {
  const ConstructionParams p = make_construction_params(cfg);
  CsvWriter csv(out_path(cfg, "h_profile.csv"), {"theta", "h"});
  double hmax = -HUGE_VAL;
  for (int i = 0; i < cfg.h_points; ++i) {
    const double th = -kPi + kTwoPi * (i + 0.5) / cfg.h_points;
    if (th == 0.0) continue;
    const double h = h_signed(p, th);
    hmax = std::max(hmax, h);
    csv.add(th).add(h);
    csv.end_row();
  }
  csv.close();
  const ThetaWindow win = find_theta_window(p, cfg.theta_tol);
  const double h0 = h0_closed_form(p);
  rep.info("h(0) = " + format_real(h0));
  rep.info("theta0 = " + format_real(win.theta0) + " (crossings +" + format_real(win.crossing_pos) + ", -" +
           format_real(win.crossing_neg) + ")");
  rep.check(h0 < 0.0, "h0-sign", "h(0) = " + num(h0) + " with mu = " + num(p.mu));
  const double lim = h_at(p, 1e-9);
  rep.check(std::abs(lim - h0) <= 1e-7 * std::abs(h0), "h0-limit",
            "|h(1e-9) - h0| / |h0| = " + num(std::abs(lim - h0) / std::abs(h0)));
  const double gap = std::abs(h_at(p, 1e-6) - h_signed(p, -1e-6));
  rep.check(gap < 1e-10, "h-continuity", "|h(1e-6) - h(-1e-6)| = " + num(gap));
  rep.check(hmax > 0.0, "h-max", "max h = " + num(hmax));
  bool neg = true;
  for (int i = 1; i <= 1000 && neg; ++i) {
    const double th = (win.theta0 - cfg.theta_tol) * i / 1000.0;
    neg = h_signed(p, th) < 0.0 && h_signed(p, -th) < 0.0;
  }
  rep.check(neg, "h-window", "h < 0 sampled on |theta| <= theta0 - tol");
}

void cmd_verify_product(const RunConfig& cfg, Report& rep) {
  const Pipeline pl = make_base_pipeline(cfg);
  const ProductEvaluator& ev = *pl.eval;
  const ConstructionParams& p = pl.params;
  std::mt19937_64 rng(cfg.rng_seed);

  // Direct vs Hybrid
  {
    const auto t = Clock::now();
    double worst = 0.0;
    CsvWriter csv(out_path(cfg, "product_consistency.csv"), {"r", "theta", "direct_lnmod", "hybrid_lnmod", "diff"});
    for (int i = 0; i < 200; ++i) {
      const double r = std::exp(std::log(1e5) * uniform01(rng));
      const double th = kPi * (2.0 * uniform01(rng) - 1.0);
      const cplx w = from_spiral_coords({r, th}, p.c);
      const EvalResult d = ev.log_pi_complete_direct(w);
      const EvalResult h = ev.log_pi_hybrid(w);
      const double diff = std::abs(d.value.lnmod - h.value.lnmod);
      worst = std::max(worst, diff);
      csv.add(r).add(th).add(d.value.lnmod).add(h.value.lnmod).add(diff);
      csv.end_row();
    }
    csv.close();
    rep.check(worst <= 1e-8, "direct-hybrid",
              "max |lnmod diff| = " + num(worst) + " over 200 points, " + num(seconds_since(t), 3) + " s");
  }
  // Hybrid vs Asymptotic at r_asym
  {
    const double r = ev.options().r_asym;
    const double rr = std::pow(r, p.rho);
    double worst = 0.0;
    for (double th : {kPi / 2, kPi, 3 * kPi / 2}) {
      const cplx w = from_spiral_coords({r, th}, p.c);
      const EvalResult h = ev.log_pi_hybrid(w);
      const EvalResult a = ev.log_pi_asymptotic(lc_from_cartesian(w));
      worst = std::max(worst, std::abs(h.value.lnmod - a.value.lnmod) / rr);
    }
    rep.check(worst <= 0.05, "hybrid-asymptotic", "max |lnmod diff| / r^rho = " + num(worst) + " at r = " + num(r));
  }
  // convergence to the angular limit at theta = pi
  {
    const double hpi = h_at(p, kPi);
    std::string detail;
    double prev = HUGE_VAL;
    bool decreasing = true;
    double last = 0.0;
    for (double r : {1e2, 1e3, 1e4}) {
      const EvalResult v = ev.log_pi(from_spiral_coords({r, kPi}, p.c));
      const double dev = std::abs(v.value.lnmod / std::pow(r, p.rho) - hpi);
      decreasing = decreasing && dev < prev;
      prev = last = dev;
      detail += "r=" + num(r) + ": " + num(dev) + "; ";
    }
    rep.check(decreasing && last < 0.05 * std::abs(hpi), "angular_limit",
              detail + "final / |h(pi)| = " + num(last / std::abs(hpi)));
  }
  // tail bound vs partial tails
  {
    int bad = 0;
    double tightest = HUGE_VAL;
    for (int i = 0; i < 100; ++i) {
      const std::int64_t K = static_cast<std::int64_t>(std::exp(std::log(50.0) + std::log(100.0) * uniform01(rng)));
      const double absw = 0.5 * ev.seq().radius(K) * uniform01(rng);
      const cplx w = std::polar(absw, kTwoPi * uniform01(rng));
      cplx tail = 0.0;
      for (std::int64_t k = K + 1; k <= 100 * K; ++k) tail += std::log(1.0 - w / ev.seq().zero(k));
      const double bound = ev.tail_bound(absw, K);
      if (!(std::abs(tail) <= bound)) ++bad;
      if (std::abs(tail) > 0.0) tightest = std::min(tightest, bound / std::abs(tail));
    }
    rep.check(bad == 0, "tail-bound", std::to_string(bad) + " violations in 100 draws, min bound/tail = " + num(tightest));
  }
}

void cmd_calibrate(const RunConfig& cfg, Report& rep) {
  const Pipeline pl = make_pipeline(cfg);
  const Chain& ch = *pl.chain;
  const CalibratedBounds& b = pl.bounds;
  rep.info("config_hash = " + config_hash(cfg));
  rep.info("t0 = " + format_real(ch.t0()));
  rep.info("z0 = " + format_real(ch.z0().real()) + " " + format_real(ch.z0().imag()) + "i");
  rep.info("n = " + std::to_string(ch.n()));
  rep.info("a = " + lc_to_string(ch.a()) + " (lnmod:arg), log error = " + format_real(ch.a_err_lnmod()));
  if (pl.build) {
    for (const auto& [n, ratio] : pl.build->selection.ratios) rep.info("n = " + std::to_string(n) + ": |a|/err = " + num(ratio));
  }
  for (const FitRecord* f : {&b.fit1, &b.fit2, &b.fit3, &b.fit4, &b.fit5, &b.fit6}) {
    rep.info(f->name + " = " + num(f->eta) + " (slope " + num(f->slope) + ", rms " + num(f->rms) + ", r in [" +
             num(f->r_lo) + ", " + num(f->r_hi) + "], valid from " + num(f->valid_from) + ")");
  }
  rep.info("r0 = " + num(b.r0) + ", r1 = " + num(b.r1) + ", r_fit = " + num(b.r_fit) + ", r_newton = " +
           num(b.r_newton) + ", band = [" + num(b.r_band_lo) + ", " + num(b.r_newton) + ")");
  rep.info("build and calibration: " + num(pl.build_seconds, 3) + " s");

  const double ratio = std::exp(ch.a().lnmod - ch.a_err_lnmod());
  rep.check(ratio > cfg.chain.cert_ratio, "a-certificate", "|a| / err = " + num(ratio));
  if (pl.build) {
    ChainSettings doubled = cfg.chain;
    doubled.quad_nodes = std::min(64, 2 * cfg.chain.quad_nodes);
    const AValue a2 = compute_a(pl.params, pl.eval, doubled, ch.t0(), ch.n(), 1e-6);
    const double moved = lc_rel_diff(a2.a, ch.a());
    rep.check(moved < 1e-6, "a-doubling", "node doubling moves a by " + num(moved) + " relative");
  }
  bool positive = true;
  for (double e : {b.eta1, b.eta2, b.eta3, b.eta4, b.eta5, b.eta6}) positive = positive && e > 0.0;
  rep.check(positive, "eta-positive", "every fitted rate > 0");
  rep.check(b.r1 > b.r0 && b.r0 > 1.0, "radii", "r1 = " + num(b.r1) + " > r0 = " + num(b.r0) + " > 1");

  write_file(out_path(cfg, "chain.txt"), serialize_chain(pl.record()));
  CsvWriter csv(out_path(cfg, "calibration.csv"), {"quantity", "value"});
  auto row = [&](const std::string& k, const std::string& v) {
    csv.add(k).add(v);
    csv.end_row();
  };
  row("t0", format_real(ch.t0()));
  row("z0_re", format_real(ch.z0().real()));
  row("z0_im", format_real(ch.z0().imag()));
  row("n", std::to_string(ch.n()));
  row("a", lc_to_string(ch.a()));
  row("a_ratio", format_real(ratio));
  for (const FitRecord* f : {&b.fit1, &b.fit2, &b.fit3, &b.fit4, &b.fit5, &b.fit6}) {
    row(f->name, format_real(f->eta));
    row(f->name + "_rms", format_real(f->rms));
  }
  row("r0", format_real(b.r0));
  row("r1", format_real(b.r1));
  row("r_fit", format_real(b.r_fit));
  row("r_newton", format_real(b.r_newton));
  row("r_band_lo", format_real(b.r_band_lo));
  csv.close();
}

// f'(z) by the trapezoid rule on |zeta - z| = delta |z|, delta shrunk until
// every node lies in S2.
cplx cauchy_derivative(const Chain& ch, const CalibratedBounds& b, cplx z, int nodes, double& delta) {
  const ConstructionParams& p = ch.params();
  const SpiralRegion s2{1.0, p.theta2, false};
  delta = 0.1;
  for (;;) {
    bool inside = true;
    for (int j = 0; j < nodes && inside; ++j) {
      inside = in_region(s2, z + delta * std::abs(z) * std::polar(1.0, kTwoPi * j / nodes), p.c);
    }
    if (inside) break;
    delta *= 0.5;
    if (delta < 1e-6) throw PreconditionError("cauchy: no disk around z fits in S2");
  }
  const double rad = delta * std::abs(z);
  cplx sum = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const cplx e = std::polar(1.0, kTwoPi * j / nodes);
    sum += lc_to_cartesian(ch.f(z + rad * e, &b).value) / e;
  }
  return sum / (static_cast<double>(nodes) * rad);
}

void cmd_verify_asymptotics(const RunConfig& cfg, Report& rep) {
  const Pipeline pl = make_pipeline(cfg);
  const Chain& ch = *pl.chain;
  const CalibratedBounds& b = pl.bounds;
  const ConstructionParams& p = pl.params;
  const double q = p.q;

  // (2g) and F -> 1 along the spine
  {
    CsvWriter csv(out_path(cfg, "f_decay.csv"), {"r", "rel_deviation", "F_minus_1"});
    double prev = HUGE_VAL, last = 0.0, lastF = 0.0;
    bool decreasing = true;
    std::string detail;
    for (double f : {1.0, 2.0, 4.0}) {
      const cplx z = spine_point(ch, f * b.r_fit);
      const FValue fv = ch.f_exact(z);
      const double rel = std::exp(fv.deviation.lnmod - std::log(std::abs(z)) / q);
      const LogComplex F = lc_div(lc_pow_int(fv.value, p.q), lc_from_cartesian(z));
      const double Fm1 = lc_rel_diff(F, LogComplex::unit());
      decreasing = decreasing && rel < prev;
      prev = last = rel;
      lastF = Fm1;
      detail += "r=" + num(std::abs(z)) + ": " + num(rel) + "; ";
      csv.add(std::abs(z)).add(rel).add(Fm1);
      csv.end_row();
    }
    csv.close();
    rep.check(decreasing && last < 1e-3, "f-asymptotic", detail + "final < 1e-3");
    rep.check(lastF < 1e-2, "F-to-1", "|f^q/z - 1| = " + num(lastF) + " at 4 r_fit");
  }

  // derivative and residual at transition-band points
  std::mt19937_64 rng(cfg.rng_seed);
  double worst_fd = 0.0, worst_cauchy = 0.0, worst_res = 0.0, worst_3a = 0.0, worst_3b = 0.0;
  int errors = 0;
  const double lo = std::log(b.r_band_lo), hi = std::log(b.r_newton);
  if (!(hi > lo)) {
    rep.check(false, "transition-band", "empty band [" + num(b.r_band_lo) + ", " + num(b.r_newton) + ")");
    return;
  }
  CsvWriter csv(out_path(cfg, "derivatives.csv"),
                {"r", "theta", "fd_rel", "cauchy_rel", "delta", "residual_rel", "dev_3a", "dev_3b"});
  for (int i = 0; i < 50; ++i) {
    const double r = std::exp(lo + (hi - lo) * uniform01(rng));
    const double th = p.theta3 * (2.0 * uniform01(rng) - 1.0);
    const cplx z = from_spiral_coords({r, th}, p.c);
    try {
      const cplx fp = lc_to_cartesian(ch.f_prime(z, &b));
      const double h = std::abs(z) * 1e-6;
      const cplx fd = (lc_to_cartesian(ch.f(z + h, &b).value) - lc_to_cartesian(ch.f(z - h, &b).value)) / (2.0 * h);
      double delta = 0.0;
      const cplx cd = cauchy_derivative(ch, b, z, 32, delta);
      const double e_fd = std::abs(fd - fp) / std::abs(fp), e_c = std::abs(cd - fp) / std::abs(fp);
      const NewtonValue nv = newton_full(ch, z, &b);
      const double az = std::abs(z);
      const double res = std::exp(nv.residual.lnmod);
      const double res_rel = res / (p.p * az);
      const double d3a = std::abs(nv.next.lnmod - std::log(p.p * az));
      const double d3b = std::abs(reduce_angle(nv.next.arg - std::arg(-static_cast<double>(p.p) * z)));
      worst_fd = std::max(worst_fd, e_fd);
      worst_cauchy = std::max(worst_cauchy, e_c);
      worst_res = std::max(worst_res, res_rel);
      worst_3a = std::max(worst_3a, d3a / (2.0 * res / az));
      worst_3b = std::max(worst_3b, d3b / (2.0 * res / az));
      csv.add(r).add(th).add(e_fd).add(e_c).add(delta).add(res_rel).add(d3a).add(d3b);
      csv.end_row();
    } catch (const Error& e) {
      ++errors;
      rep.info("band point r=" + num(r) + " theta=" + num(th) + ": " + e.what());
    }
  }
  csv.close();
  rep.check(errors == 0 && worst_cauchy <= 1e-8, "fprime-cauchy", "max relative diff " + num(worst_cauchy));
  rep.check(errors == 0 && worst_fd <= 1e-5, "fprime-fd", "max relative diff " + num(worst_fd));
  rep.check(errors == 0 && worst_res < 1e-3, "residual-band", "max |N + pz| / (p|z|) = " + num(worst_res));
  rep.check(errors == 0 && worst_3a <= 1.0 && worst_3b <= 1.0, "3a-3b",
            "max ratio to 2|N + pz|/|z|: modulus " + num(worst_3a) + ", argument " + num(worst_3b));
  {
    double prev = HUGE_VAL;
    bool decreasing = true;
    std::string detail;
    for (double f : {1.0, 2.0, 4.0}) {
      const cplx z = spine_point(ch, f * b.r_band_lo);
      const NewtonValue nv = newton_full(ch, z, &b);
      const double rel = std::exp(nv.residual.lnmod) / (p.p * std::abs(z));
      decreasing = decreasing && rel < prev;
      prev = rel;
      detail += "r=" + num(std::abs(z)) + ": " + num(rel) + "; ";
    }
    rep.check(decreasing, "residual-decay", detail);
  }
}

void cmd_invariance(const RunConfig& cfg, Report& rep) {
  const Pipeline pl = make_pipeline(cfg);
  const Chain& ch = *pl.chain;
  const CalibratedBounds& b = pl.bounds;
  const double r_max = cfg.r_test_max_factor * b.r1;
  const auto t = Clock::now();
  const InvarianceReport inv = check_invariance(ch, b, cfg.invariance_samples, cfg.rng_seed, r_max);
  std::string summary = invariance_summary(inv);
  if (!summary.empty() && summary.back() == '\n') summary.pop_back();
  rep.info(summary);
  write_invariance_failures_csv(inv, out_path(cfg, "invariance_failures.csv"));
  rep.check(inv.pass(), "invariance", std::to_string(inv.failures) + " failures in " + std::to_string(inv.samples) +
                                          " samples, " + num(seconds_since(t), 3) + " s");
  // 2^k growth along orbits from U
  int bad = 0;
  std::string first;
  for (const SpiralPoint& s : sample_u(pl.params, b, cfg.orbit_count, cfg.rng_seed + 1, r_max)) {
    const OrbitRecord rec = orbit(ch, b, to_cartesian(s, pl.params.c), cfg.orbit_steps);
    bool ok = rec.stop == OrbitStop::MaxSteps && static_cast<int>(rec.steps.size()) == cfg.orbit_steps + 1;
    for (std::size_t k = 0; ok && k < rec.steps.size(); ++k) {
      ok = rec.steps[k].z.log_r - s.log_r >= k * std::log(2.0) - 1e-12 && in_u(pl.params, b, rec.steps[k].z);
    }
    if (!ok) {
      ++bad;
      if (first.empty()) first = " (first: r=" + num(s.r()) + " theta=" + num(s.theta) + " " + rec.reason + ")";
    }
  }
  rep.check(bad == 0, "orbit-growth",
            std::to_string(bad) + " of " + std::to_string(cfg.orbit_count) + " orbits violate |z_k| >= 2^k |z_0| for k <= " +
                std::to_string(cfg.orbit_steps) + first);
}

void cmd_orbit(const RunConfig& cfg, Report& rep) {
  const Pipeline pl = make_pipeline(cfg);
  const Chain& ch = *pl.chain;
  const CalibratedBounds& b = pl.bounds;
  const cplx seed = resolve_point(cfg.orbit_seed, ch, b);
  const OrbitRecord rec = orbit(ch, b, seed, cfg.orbit_steps);
  write_orbit_csv(rec, out_path(cfg, "orbit.csv"));
  const SpiralPoint s0 = to_spiral_point(seed, pl.params.c);
  rep.info("seed = " + format_real(seed.real()) + " " + format_real(seed.imag()) + "i (r = " + num(s0.r()) +
           ", theta = " + num(s0.theta) + ")");
  rep.info("steps = " + std::to_string(rec.steps.size() - 1) + ", stop = " + to_string(rec.stop) +
           (rec.reason.empty() ? "" : " (" + rec.reason + ")") + ", switch radius = " + num(rec.switch_radius));
  rep.info("final log radius = " + num(rec.steps.back().z.log_r, 10) + ", theta = " + num(rec.steps.back().z.theta));
  if (in_u(pl.params, b, s0)) {
    bool ok = rec.stop == OrbitStop::MaxSteps;
    for (std::size_t k = 0; ok && k < rec.steps.size(); ++k) ok = rec.steps[k].z.log_r - s0.log_r >= k * std::log(2.0) - 1e-12;
    rep.check(ok, "orbit-growth", "seed in U, |z_k| >= 2^k |z_0| along the orbit");
  } else {
    rep.info("seed outside U: growth law not asserted");
  }
}

void cmd_render(const RunConfig& cfg, Report& rep) {
  const Pipeline pl = make_pipeline(cfg);
  const Chain rch = pl.render_chain();
  const GridSpec grid = make_grid(cfg, *pl.chain, pl.bounds);
  const auto t = Clock::now();
  const Image img = render_grid(rch, pl.bounds, grid, cfg.tiles, cfg.threads);
  const double secs = seconds_since(t);
  write_pnm(img, out_path(cfg, "render.ppm"));
  const RenderStats st = render_stats(rch, pl.bounds, grid, img);
  rep.info("window: center " + format_real(grid.center.real()) + " " + format_real(grid.center.imag()) + "i, " +
           num(grid.width) + " x " + num(grid.height) + ", " + std::to_string(grid.nx) + " x " + std::to_string(grid.ny) +
           " pixels, " + std::to_string(cfg.tiles) + " tiles");
  rep.info("escaping " + std::to_string(st.escaping) + ", converged " + std::to_string(st.converged) +
           ", unresolved " + std::to_string(st.unresolved) + ", in U " + std::to_string(st.in_u) + ", " +
           num(secs, 4) + " s");
  rep.check(st.in_u_not_escaping == 0, "render-u",
            std::to_string(st.in_u_not_escaping) + " of " + std::to_string(st.in_u) + " in-U pixels not Escaping");
}

}  // namespace

int run(const CliRequest& req, std::ostream& out, std::ostream& err) {
  RunConfig cfg;
  try {
    if (!req.config_path.empty()) apply_config_file(cfg, req.config_path);
    for (const auto& o : req.overrides) apply_override(cfg, o);
    if (req.out_dir) cfg.out_dir = *req.out_dir;
    if (req.threads) cfg.threads = *req.threads;
    validate(cfg);
    std::filesystem::create_directories(cfg.out_dir);
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::filesystem::filesystem_error& e) {
    err << "cannot create output directory: " << e.what() << "\n";
    return kExitUsage;
  }
  Report rep;
  try {
    write_file(out_path(cfg, "config.txt"), dump_config(cfg));
    const std::string& s = req.subcommand;
    if (s == "derive") {
      cmd_derive(cfg, rep);
    } else if (s == "profile-h") {
      cmd_profile_h(cfg, rep);
    } else if (s == "verify-product") {
      cmd_verify_product(cfg, rep);
    } else if (s == "calibrate") {
      cmd_calibrate(cfg, rep);
    } else if (s == "verify-asymptotics") {
      cmd_verify_asymptotics(cfg, rep);
    } else if (s == "invariance") {
      cmd_invariance(cfg, rep);
    } else if (s == "orbit") {
      cmd_orbit(cfg, rep);
    } else if (s == "render") {
      cmd_render(cfg, rep);
    } else {
      err << "unknown subcommand '" << s << "'\n";
      return kExitUsage;
    }
    write_file(out_path(cfg, s + ".txt"), rep.text());
  } catch (const ConfigError& e) {
    out << rep.text();
    err << "config error: " << e.what() << "\n";
    return kExitUsage;
  } catch (const std::exception& e) {
    rep.check(false, req.subcommand, e.what());
    out << rep.text();
    return kExitFail;
  }
  out << rep.text();
  return rep.failed() ? kExitFail : kExitPass;
}

int cli_main(int argc, char** argv) {
  CLI::App app{"Newton-map Baker domain construction: derive, calibrate, verify and render"};
  app.require_subcommand(1, 1);
  CliRequest req;
  std::string out_dir;
  int threads = -1;
  app.add_option("--config", req.config_path, "configuration file (key = value lines)");
  app.add_option("--set", req.overrides, "override one key: --set key=value (repeatable)");
  app.add_option("--out", out_dir, "output directory");
  app.add_option("--threads", threads, "worker threads (0 = auto)")->check(CLI::NonNegativeNumber);
  const std::vector<std::pair<std::string, std::string>> docs{
      {"derive", "print the construction parameters"},
      {"profile-h", "CSV of h(theta) and the theta0 report"},
      {"verify-product", "product regime consistency and convergence to the angular limit"},
      {"calibrate", "select t0, n and a, fit the decay rates, write chain.txt"},
      {"verify-asymptotics", "f asymptotics, F -> 1 and derivative cross-checks"},
      {"invariance", "sample U and check N(U) in U with |N| >= 2|z|"},
      {"orbit", "orbit CSV from a seed"},
      {"render", "escape-time image (PNM)"}};
  for (const auto& [name, doc] : docs) app.add_subcommand(name, doc)->fallthrough();
  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }
  req.subcommand = app.get_subcommands().front()->get_name();
  if (!out_dir.empty()) req.out_dir = out_dir;
  if (threads >= 0) req.threads = threads;
  return run(req, std::cout, std::cerr);
}

}  // namespace baker
