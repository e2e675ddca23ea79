#include <cmath>
#include <random>
#include <vector>

#include "baker/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace baker;
using testing::reference;

namespace {

// zeta with zeta^q + z0 = w on branch j
cplx zeta_for(const Chain& ch, cplx w, int j) {
  return std::pow(w - ch.z0(), 1.0 / ch.q()) * std::pow(ch.omega(), j);
}

cplx cart(const LogComplex& x) { return lc_to_cartesian(x); }

}  // namespace

TEST_SUITE("chain") {
  TEST_CASE("reference calibration") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    CHECK(ch.n() >= 4);
    CHECK(std::exp(ch.a().lnmod - ch.a_err_lnmod()) > 1e3);
    CHECK(std::abs(ch.z0() - spiral_point(ch.t0(), pl.params.c)) < 1e-14);
    const CalibratedBounds& b = pl.bounds;
    for (double e : {b.eta1, b.eta2, b.eta3, b.eta4, b.eta5, b.eta6}) CHECK(e > 0.0);
    CHECK(b.r0 > 1.0);
    CHECK(b.r1 == doctest::Approx(10 * b.r0));
    CHECK(b.r_band_lo < b.r_newton);
    REQUIRE(pl.build);
    CHECK(pl.build->selection.n == ch.n());
    CHECK(pl.build->scan.t0 == ch.t0());
  }

  TEST_CASE("t0 is the last maximum of |Pi| along the spiral") {
    const Pipeline& pl = reference();
    const ProductEvaluator& ev = *pl.eval;
    const double t0 = pl.chain->t0(), c = pl.params.c;
    const double l0 = ev.value(spiral_point(t0, c)).lnmod;
    // dense independent scan
    for (int i = 1; i <= 20000; ++i) {
      const double t = t0 * std::exp(std::log(2000.0 / t0) * i / 20000.0);
      CHECK(ev.log_pi(spiral_point(t, c)).value.lnmod < l0);
    }
    for (double d : {1e-4, -1e-4}) CHECK(ev.value(spiral_point(t0 * (1 + d), c)).lnmod <= l0);
  }

  TEST_CASE("a is stable under node doubling") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    ChainSettings s = pl.cfg.chain;
    s.quad_nodes = 2 * s.quad_nodes;
    const AValue a2 = compute_a(pl.params, pl.eval, s, ch.t0(), ch.n(), 1e-6);
    CHECK(lc_rel_diff(a2.a, ch.a()) < 1e-6);
    CHECK(a2.ratio() > 1e3);
  }

  TEST_CASE("g2 is path independent") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    std::mt19937_64 rng(9);
    int compared = 0;
    for (int i = 0; i < 6; ++i) {
      const cplx w = pl.chain->z0() + std::polar(testing::uniform(rng, 1.0, 3.5), testing::uniform(rng, -M_PI, M_PI));
      const cplx zeta = zeta_for(ch, w, 0);
      // routes that do not apply at this point throw; compare the rest
      std::vector<G2Value> got;
      for (G2Route r : {G2Route::Segment, G2Route::SigmaArc, G2Route::Tail}) {
        try {
          got.push_back(ch.g2_route(zeta, r));
        } catch (const std::exception&) {
        }
      }
      REQUIRE(!got.empty());
      for (size_t k = 1; k < got.size(); ++k) {
        const LogComplex scale{std::max(got[0].value.lnmod, ch.a().lnmod), 0.0};
        CHECK(std::abs(cart(lc_div(lc_sub(got[0].value, got[k].value), scale))) < 1e-10);
        ++compared;
      }
    }
    CHECK(compared > 0);
    CHECK_THROWS_AS(ch.g2_route(cplx(1.0, 0.0), G2Route::Endpoint), PreconditionError);
  }

  TEST_CASE("g2 differences match the integral of g1^n") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    // 16-point Gauss-Legendre on [-1, 1]
    const double x[8] = {0.0950125098376374, 0.2816035507792589, 0.4580167776572274, 0.6178762444026438,
                         0.7554044083550030, 0.8656312023878318, 0.9445750230732326, 0.9894009349916499};
    const double wt[8] = {0.1894506104550685, 0.1826034150449236, 0.1691565193950025, 0.1495959888165767,
                          0.1246289712555339, 0.0951585116824928, 0.0622535239386479, 0.0271524594117541};
    for (cplx w : {cplx(3.0, 2.0), cplx(-20.0, 5.0), cplx(60.0, -80.0)}) {
      const cplx zeta = zeta_for(ch, w, 0);
      // keep the integrand's log-variation across the segment small
      const double h = 0.05 * std::abs(zeta) / (ch.n() * ch.q() * std::max(1.0, std::abs(w)));
      const LogComplex lo = ch.g2(zeta - h).value, hi = ch.g2(zeta + h).value;
      LogComplex quad = LogComplex::zero();
      for (int k = 0; k < 8; ++k)
        for (double sgn : {-1.0, 1.0}) {
          const LogComplex v = lc_pow_int(ch.g1(zeta + sgn * h * x[k]).value, ch.n());
          quad = lc_add(quad, lc_scale(v, cplx(h * wt[k], 0.0)));
        }
      const LogComplex diff = lc_sub(hi, lo);
      const double scale = std::max({hi.lnmod, lo.lnmod, ch.a().lnmod});
      CHECK(std::abs(cart(lc_div(lc_sub(diff, quad), LogComplex{scale, 0.0}))) < 1e-11);
      CHECK(lc_rel_diff(diff, quad) < 1e-6);
    }
  }

  TEST_CASE("endpoint expansion matches the tail quadrature") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    std::mt19937_64 rng(10);
    int used = 0;
    for (int i = 0; i < 40; ++i) {
      const double r = std::exp(testing::uniform(rng, std::log(80.0), std::log(450.0)));
      const cplx w = from_spiral_coords({r, testing::uniform(rng, -0.05, 0.05)}, pl.params.c);
      const cplx zeta = zeta_for(ch, w, 0);
      for (double tol : {1e-10, 1e-5}) {
        const G2Value e = ch.endpoint_g2(zeta, tol);
        if (e.route != G2Route::Endpoint) continue;
        ++used;
        const G2Value t = ch.g2_route(zeta, G2Route::Tail);
        CHECK(e.sector == t.sector);
        const double scale = std::max(t.value.lnmod, ch.a().lnmod);
        const double diff = std::abs(cart(lc_div(lc_sub(e.value, t.value), LogComplex{scale, 0.0})));
        CHECK(diff <= 10 * tol);
      }
    }
    CHECK(used > 0);
  }

  TEST_CASE("rotation symmetries and two-branch g4") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    const CalibratedBounds& b = pl.bounds;
    std::mt19937_64 rng(11);
    for (int i = 0; i < 20; ++i) {
      const double r = std::exp(testing::uniform(rng, 0.0, std::log(400.0)));
      const cplx w = std::polar(r, testing::uniform(rng, -M_PI, M_PI));
      const int j = static_cast<int>(rng() % ch.q());
      const cplx zeta = zeta_for(ch, w, j);
      const cplx wz = ch.omega() * zeta;
      const LogComplex g2a = ch.g2(zeta, &b).value, g2b = ch.g2(wz, &b).value;
      CHECK(testing::rel_diff(g2b, lc_scale(g2a, ch.omega())) <= 1e-10);
      CHECK(testing::rel_diff(ch.g3(wz, &b), ch.g3(zeta, &b)) <= 1e-10);
      CHECK(testing::rel_diff(ch.g1(wz).value, ch.g1(zeta).value) <= 1e-10);
      const int k = 1 + static_cast<int>(rng() % (ch.q() - 1));
      CHECK(testing::rel_diff(ch.g4(w, k, &b), ch.g4(w, 0, &b)) <= 1e-10);
    }
  }

  TEST_CASE("f tends to the q-th root along the spiral") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    const CalibratedBounds& b = pl.bounds;
    double prev = HUGE_VAL;
    for (double f : {1.0, 2.0, 4.0}) {
      const cplx z = spine_point(ch, f * b.r_fit);
      CHECK(std::abs(to_spiral_coords(z, pl.params.c).theta) < 1e-12);
      const FValue fv = ch.f_exact(z);
      REQUIRE(fv.deviation_known);
      const cplx root = ch.home_root(z);
      // independent deviation: f z^(-1/q) - 1 from the cartesian value
      const double rel = std::abs(cart(fv.value) / root - 1.0);
      const double lib = std::exp(fv.deviation.lnmod) / std::abs(root);
      if (rel > 1e-12) CHECK(lib == doctest::Approx(rel).epsilon(1e-3));
      CHECK(lib < prev);
      prev = lib;
      CHECK(std::abs(std::pow(root, ch.q()) / z - 1.0) < 1e-12);
    }
    CHECK(prev < 1e-3);
  }

  TEST_CASE("f' against Cauchy integrals and finite differences") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    const CalibratedBounds& b = pl.bounds;
    std::mt19937_64 rng(12);
    for (int i = 0; i < 8; ++i) {
      const double r = std::exp(testing::uniform(rng, std::log(b.r_band_lo), std::log(b.r_newton)));
      const cplx z = from_spiral_coords({r, testing::uniform(rng, -1.0, 1.0) * pl.params.theta3}, pl.params.c);
      const cplx fp = cart(ch.f_prime(z, &b));
      const double delta = testing::cauchy_delta(pl.params, z, 128);
      const cplx cd = testing::cauchy_fprime(ch, b, z, delta * std::abs(z), 128);
      CHECK(std::abs(cd - fp) <= 1e-8 * std::abs(fp));
      const double h = 1e-6 * r;
      const cplx fd = (cart(ch.f(z + h, &b).value) - cart(ch.f(z - h, &b).value)) / (2 * h);
      CHECK(std::abs(fd - fp) <= 1e-5 * std::abs(fp));
      // f'/f = (1 + eps) / (q z)
      const cplx eps = cart(ch.epsilon(z, &b));
      const cplx ratio = fp / cart(ch.f(z, &b).value);
      CHECK(std::abs(ratio - (1.0 + eps) / (static_cast<double>(ch.q()) * z)) <= 1e-10 * std::abs(ratio));
    }
  }

  TEST_CASE("Newton residual in the transition band") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    const CalibratedBounds& b = pl.bounds;
    const double p = pl.params.p;
    double prev = HUGE_VAL;
    for (double f : {1.0, 2.0, 4.0}) {
      const cplx z = spine_point(ch, f * b.r_band_lo);
      const NewtonValue nv = newton_full(ch, z, &b);
      // N from f and f' directly
      const cplx n_direct = z - cart(ch.f(z, &b).value) / cart(ch.f_prime(z, &b));
      const cplx res = n_direct + p * z;
      const double rel = std::exp(nv.residual.lnmod) / (p * std::abs(z));
      CHECK(rel < 1e-3);
      CHECK(rel < prev);
      prev = rel;
      CHECK(std::abs(cart(nv.next) - n_direct) <= 1e-9 * p * std::abs(z));
      if (std::abs(res) > 1e-6 * p * std::abs(z)) CHECK(std::abs(res) == doctest::Approx(std::exp(nv.residual.lnmod)).epsilon(1e-3));
    }
  }

  TEST_CASE("recalibration with more samples is stable") {
    const Pipeline& pl = reference();
    CalibrationSettings s = pl.cfg.calibration;
    s.fit_samples = 32;
    const CalibratedBounds b2 = calibrate(*pl.chain, s);
    const CalibratedBounds& b = pl.bounds;
    const double pairs[][2] = {{b.eta1, b2.eta1}, {b.eta2, b2.eta2}, {b.eta3, b2.eta3},
                               {b.eta4, b2.eta4}, {b.eta5, b2.eta5}, {b.eta6, b2.eta6}};
    for (const auto& pr : pairs) CHECK(std::abs(pr[1] - pr[0]) <= 0.2 * pr[0]);
    CHECK(b2.r0 == doctest::Approx(b.r0).epsilon(0.2));
  }
}
