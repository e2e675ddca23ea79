#include "baker/dynamics.hpp"

#include <cmath>
#include <random>
#include <sstream>
#include <tuple>

#include "baker/errors.hpp"
#include "baker/io.hpp"

namespace baker {

double SpiralPoint::r() const { return std::exp(log_r); }

SpiralPoint to_spiral_point(cplx z, double c) {
  if (z == 0.0) return {};
  return to_spiral_point(lc_from_cartesian(z), c);
}

SpiralPoint to_spiral_point(const LogComplex& z, double c) {
  if (z.is_zero()) return {};
  return {z.lnmod, reduce_angle(z.arg - c * z.lnmod)};
}

cplx to_cartesian(const SpiralPoint& s, double c) {
  if (s.is_zero()) return 0.0;
  return lc_to_cartesian({s.log_r, reduce_angle(c * s.log_r + s.theta)});
}

std::string to_string(StepRegime r) { return r == StepRegime::FullChain ? "FullChain" : "AsymptoticNewton"; }

std::string to_string(OrbitStop s) {
  switch (s) {
    case OrbitStop::MaxSteps: return "MaxSteps";
    case OrbitStop::FixedPoint: return "FixedPoint";
    case OrbitStop::Error: return "Error";
  }
  return "?";
}

std::string to_string(Outcome o) {
  switch (o) {
    case Outcome::Escaping: return "Escaping";
    case Outcome::Converged: return "Converged";
    case Outcome::Unresolved: return "Unresolved";
  }
  return "?";
}

bool in_asymptotic_regime(const ConstructionParams& params, const CalibratedBounds& bounds, const SpiralPoint& z) {
  return !z.is_zero() && std::abs(z.theta) < params.theta3 && z.log_r > std::log(bounds.r_newton);
}

NewtonStep newton_step(const Chain& chain, const CalibratedBounds& bounds, const SpiralPoint& z) {
  const ConstructionParams& p = chain.params();
  NewtonStep out;
  if (z.is_zero()) return out;
  if (in_asymptotic_regime(p, bounds, z)) {
    // N = -p z: |N| = p|z| and, since c log p = pi, the spiral offset is kept
    out.regime = StepRegime::AsymptoticNewton;
    out.next = {z.log_r + std::log(static_cast<double>(p.p)), z.theta};
    out.residual_bound_lnmod = -bounds.eta6 * std::exp(p.rho * z.log_r);
    return out;
  }
  const cplx zc = to_cartesian(z, p.c);
  const NewtonValue nv = newton_full(chain, zc, &bounds);
  if (!std::isfinite(nv.next.arg) || std::isnan(nv.next.lnmod) || nv.next.lnmod == HUGE_VAL) {
    throw NaNGuard("newton_step: non-finite N(z)");
  }
  out.regime = StepRegime::FullChain;
  out.next = to_spiral_point(nv.next, p.c);
  out.g2_rel_lnmod = nv.g2_rel_lnmod;
  if (std::abs(z.theta) < p.theta3) out.residual_lnmod = nv.residual.lnmod;
  return out;
}

NewtonStep newton_step(const Chain& chain, const CalibratedBounds& bounds, cplx z) {
  return newton_step(chain, bounds, to_spiral_point(z, chain.params().c));
}

SpiralRegion region_u(const ConstructionParams& params, const CalibratedBounds& bounds) {
  return {bounds.r1, params.theta3, true};
}

bool in_u(const ConstructionParams& params, const CalibratedBounds& bounds, const SpiralPoint& z) {
  if (z.is_zero() || !(z.log_r > std::log(bounds.r1))) return false;
  return std::abs(z.theta) < params.theta3 - std::exp(-z.log_r);
}

// ---------------------------------------------------------------------------

namespace {

// |z_{k+1} - z_k| with both points representable; inf otherwise.
double step_length(const SpiralPoint& a, const SpiralPoint& b, double c) {
  if (a.log_r > kSafeLnmod || b.log_r > kSafeLnmod) return HUGE_VAL;
  return std::abs(to_cartesian(a, c) - to_cartesian(b, c));
}

}  // namespace

OrbitRecord orbit(const Chain& chain, const CalibratedBounds& bounds, cplx seed, int k_max) {
  const double c = chain.params().c;
  OrbitRecord rec;
  rec.seed = seed;
  SpiralPoint z = to_spiral_point(seed, c);
  for (int k = 0; k < k_max; ++k) {
    OrbitStep st;
    st.z = z;
    NewtonStep ns;
    try {
      ns = newton_step(chain, bounds, z);
    } catch (const Error& e) {
      rec.steps.push_back(st);
      rec.stop = OrbitStop::Error;
      rec.reason = e.what();
      return rec;
    }
    st.regime = ns.regime;
    st.residual_lnmod = ns.regime == StepRegime::FullChain ? ns.residual_lnmod : ns.residual_bound_lnmod;
    st.log_modulus_ratio = ns.next.log_r - z.log_r;
    if (ns.regime == StepRegime::AsymptoticNewton && !(rec.switch_radius < HUGE_VAL)) rec.switch_radius = z.r();
    rec.steps.push_back(st);
    const bool fixed = z.is_zero() || (ns.regime == StepRegime::FullChain &&
                                       step_length(z, ns.next, c) < 1e-10 * std::max(1.0, z.r()));
    z = ns.next;
    if (fixed) {
      OrbitStep last;
      last.z = z;
      rec.steps.push_back(last);
      rec.stop = OrbitStop::FixedPoint;
      return rec;
    }
  }
  OrbitStep last;
  last.z = z;
  rec.steps.push_back(last);
  return rec;
}

void write_orbit_csv(const OrbitRecord& rec, const std::string& path) {
  CsvWriter csv(path, {"k", "log_radius", "theta", "regime", "log_residual"});
  for (std::size_t k = 0; k < rec.steps.size(); ++k) {
    const OrbitStep& s = rec.steps[k];
    const bool last = k + 1 == rec.steps.size();
    csv.add(static_cast<long long>(k)).add(s.z.log_r).add(s.z.theta);
    csv.add(last ? std::string() : to_string(s.regime));
    csv.add(std::isnan(s.residual_lnmod) ? std::string() : format_real(s.residual_lnmod));
    csv.end_row();
  }
  csv.close();
}

// ---------------------------------------------------------------------------

namespace {

double uniform01(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

}  // namespace

std::pair<double, double> u_sampling_range(const ConstructionParams& params, const CalibratedBounds& bounds,
                                           double r_test_max) {
  // U is empty below 1/theta3
  const double lo = std::max(bounds.r1, 1.0 / params.theta3);
  if (!(r_test_max > lo)) throw PreconditionError("sample_u: U is empty below r_test_max");
  return {lo, r_test_max};
}

std::vector<SpiralPoint> sample_u(const ConstructionParams& params, const CalibratedBounds& bounds, int count,
                                  std::uint64_t rng_seed, double r_test_max) {
  const auto [lo, hi] = u_sampling_range(params, bounds, r_test_max);
  std::mt19937_64 rng(rng_seed);
  const double llo = std::log(lo), lhi = std::log(hi);
  std::vector<SpiralPoint> out;
  out.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int i = 0; i < count; ++i) {
    const double lr = lhi - (lhi - llo) * uniform01(rng);  // (llo, lhi]
    const double half = params.theta3 - std::exp(-lr);
    out.push_back({lr, half * (2.0 * uniform01(rng) - 1.0)});
  }
  return out;
}

InvarianceReport check_invariance(const Chain& chain, const CalibratedBounds& bounds, int samples,
                                  std::uint64_t rng_seed, double r_test_max) {
  const ConstructionParams& p = chain.params();
  InvarianceReport rep;
  std::tie(rep.r_lo, rep.r_hi) = u_sampling_range(p, bounds, r_test_max);
  const double log2 = std::log(2.0);
  for (const SpiralPoint& z : sample_u(p, bounds, samples, rng_seed, r_test_max)) {
    InvarianceSample s;
    s.z = z;
    const double lr = z.log_r;
    ++rep.samples;
    try {
      const NewtonStep ns = newton_step(chain, bounds, s.z);
      s.image = ns.next;
      s.regime = ns.regime;
      double log_ratio = ns.next.log_r - lr;
      SpiralPoint worst = ns.next;
      if (ns.regime == StepRegime::AsymptoticNewton) {
        // N = -p z + R with |R| <= exp(bound): |N| >= p|z| - |R| and the spiral
        // offset moves by at most about |R| / (p|z| - |R|)
        const double rel = std::exp(ns.residual_bound_lnmod - (lr + std::log(static_cast<double>(p.p))));
        log_ratio += std::log1p(-std::min(rel, 0.5));
        worst.log_r = ns.next.log_r + std::log1p(-std::min(rel, 0.5));
        worst.theta = std::abs(ns.next.theta) + 2.0 * rel;
      } else {
        ++rep.full_chain;
      }
      s.image_in_u = in_u(p, bounds, worst);
      s.doubles = log_ratio >= log2;
      rep.min_ratio = std::min(rep.min_ratio, std::exp(log_ratio));
    } catch (const Error& e) {
      s.error = e.what();
    }
    if (!s.pass()) {
      ++rep.failures;
      rep.failed.push_back(s);
    }
  }
  return rep;
}

std::string invariance_summary(const InvarianceReport& rep) {
  std::ostringstream os;
  os.precision(6);
  os << (rep.pass() ? "PASS" : "FAIL") << " invariance: " << rep.samples << " samples of U over r in ("
     << rep.r_lo << ", " << rep.r_hi << "], " << rep.full_chain << " full-chain steps, " << rep.failures
     << " failures, min |N(z)|/|z| = " << rep.min_ratio << "\n";
  return os.str();
}

void write_invariance_failures_csv(const InvarianceReport& rep, const std::string& path) {
  CsvWriter csv(path, {"log_radius", "theta", "image_log_radius", "image_theta", "regime", "image_in_u", "doubles",
                       "error"});
  for (const auto& s : rep.failed) {
    csv.add(s.z.log_r).add(s.z.theta).add(s.image.log_r).add(s.image.theta).add(to_string(s.regime));
    csv.add(static_cast<long long>(s.image_in_u)).add(static_cast<long long>(s.doubles));
    std::string err = s.error;
    for (char& ch : err) {
      if (ch == ',' || ch == '\n') ch = ';';
    }
    csv.add(err);
    csv.end_row();
  }
  csv.close();
}

// ---------------------------------------------------------------------------

ClassifyLimits default_limits(const CalibratedBounds& bounds) {
  ClassifyLimits lim;
  lim.escape_radius = 1e3 * bounds.r1;
  lim.full_chain_radius = 10.0 * bounds.r1;
  return lim;
}

namespace {

bool f_small(const Chain& chain, const CalibratedBounds& bounds, cplx x, const ClassifyLimits& lim) {
  if (x == 0.0) return true;
  const double scale = std::max(0.0, std::log(std::abs(x)) / chain.q());
  return chain.f(x, &bounds).value.lnmod < std::log(lim.f_tol) + scale;
}

// Modified Newton x -> x - m f/f' for a zero of multiplicity m = q - 1
// (zeros of g4 are zeros of f of that order).  Returns true with the root
// when the Newton map itself fixes the result to fixpoint_tol.
bool refine_multiple(const Chain& chain, const CalibratedBounds& bounds, cplx x, const ClassifyLimits& lim,
                     cplx& root) {
  const double q = chain.q(), m = q - 1.0;
  double prev = HUGE_VAL;
  for (int i = 0; i < lim.refine_steps; ++i) {
    if (x == 0.0) break;
    const LogComplex one_e = lc_add(LogComplex::unit(), chain.epsilon(x, &bounds));
    if (one_e.is_zero()) return false;
    const cplx ratio = lc_to_cartesian(lc_div(lc_from_cartesian(q * x), one_e));  // f/f'
    const cplx nx = x - m * ratio;
    const double d = std::abs(nx - x);
    // near a root of order m the iteration is quadratic; anything slower is not one
    if (!(d < 0.5 * prev)) return false;
    prev = d;
    const bool done = d < lim.fixpoint_tol * std::max(1.0, std::abs(x));
    x = nx;
    if (done) break;
  }
  if (x != 0.0) {
    const NewtonValue nv = newton_full(chain, x, &bounds);
    const cplx nx = lc_to_cartesian(nv.next);
    if (!(std::abs(nx - x) < lim.fixpoint_tol * std::max(1.0, std::abs(x)))) return false;
  }
  if (!f_small(chain, bounds, x, lim)) return false;
  root = x;
  return true;
}

}  // namespace

Classification classify(const Chain& chain, const CalibratedBounds& bounds, cplx z0, const ClassifyLimits& lim) {
  const ConstructionParams& p = chain.params();
  Classification out;
  if (z0 == 0.0) {
    out.outcome = Outcome::Converged;
    return out;
  }
  const double log_escape = std::log(lim.escape_radius);
  const double log_full = std::log(lim.full_chain_radius);
  SpiralPoint z = to_spiral_point(z0, p.c);
  cplx last_prediction = 0.0;
  bool have_prediction = false;
  int probes = 0;
  try {
    for (int k = 0;; ++k) {
      out.steps = k;
      if (z.log_r >= log_escape) {
        out.outcome = in_u(p, bounds, z) ? Outcome::Escaping : Outcome::Unresolved;
        return out;
      }
      if (k >= lim.k_max) return out;
      if (z.log_r > log_full && !in_asymptotic_regime(p, bounds, z)) return out;
      const NewtonStep ns = newton_step(chain, bounds, z);
      if (ns.regime == StepRegime::FullChain && z.log_r < kSafeLnmod && ns.next.log_r < kSafeLnmod) {
        const cplx zc = to_cartesian(z, p.c);
        const cplx nc = to_cartesian(ns.next, p.c);
        const cplx step = nc - zc;
        const double d = std::abs(step);
        if (ns.next.is_zero() ||
            (d < lim.fixpoint_tol * std::max(1.0, std::abs(zc)) && f_small(chain, bounds, nc, lim))) {
          out.outcome = Outcome::Converged;
          out.root = nc;
          out.steps = k + 1;
          return out;
        }
        // a root of order m predicted from this step; consecutive predictions
        // agree once the orbit is in its linear approach
        const cplx predicted = zc + (p.q - 1.0) * step;
        const bool agree = have_prediction && std::abs(predicted - last_prediction) < lim.root_agree * (p.q - 1.0) * d;
        last_prediction = predicted;
        have_prediction = true;
        if (agree && probes < lim.max_probes && ns.g2_rel_lnmod < lim.root_zone &&
            (p.q - 1.0) * d < lim.root_reach * std::abs(nc)) {
          ++probes;
          cplx root;
          bool refined = false;
          try {
            refined = refine_multiple(chain, bounds, nc, lim, root) &&
                      std::abs(root - nc) < 2.0 * (p.q - 1.0) * d;
          } catch (const Error&) {
            refined = false;
          }
          if (refined) {
            out.outcome = Outcome::Converged;
            out.root = root;
            out.steps = k + 1;
            return out;
          }
        }
      } else {
        have_prediction = false;
      }
      z = ns.next;
    }
  } catch (const std::exception&) {
    out.outcome = Outcome::Unresolved;
  }
  return out;
}

}  // namespace baker
