#include <cmath>
#include <fstream>
#include <random>

#include "baker/errors.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace baker;
using testing::reference;

TEST_SUITE("dynamics") {
  TEST_CASE("spiral points round trip") {
    const double c = reference().params.c;
    for (cplx z : {cplx(3.0, 4.0), cplx(-1e5, 2.0), cplx(0.01, -0.02)}) {
      const SpiralPoint s = to_spiral_point(z, c);
      CHECK(std::abs(to_cartesian(s, c) - z) <= 1e-13 * std::abs(z));
      const SpiralPoint t = to_spiral_point(lc_from_cartesian(z), c);
      CHECK(t.log_r == doctest::Approx(s.log_r));
      CHECK(std::abs(t.theta - s.theta) < 1e-12);
    }
    CHECK(to_spiral_point(cplx(0.0, 0.0), c).is_zero());
    CHECK_THROWS_AS(to_cartesian(SpiralPoint{1000.0, 0.0}, c), OverflowSignal);
  }

  TEST_CASE("U sampling range and samples") {
    const Pipeline& pl = reference();
    const auto [lo, hi] = u_sampling_range(pl.params, pl.bounds, 1e3 * pl.bounds.r1);
    CHECK(lo == doctest::Approx(std::max(pl.bounds.r1, 1.0 / pl.params.theta3)));
    CHECK(hi == doctest::Approx(1e3 * pl.bounds.r1));
    CHECK_THROWS_AS(u_sampling_range(pl.params, pl.bounds, 0.5 * lo), PreconditionError);
    const auto a = sample_u(pl.params, pl.bounds, 500, 7, hi);
    const auto b = sample_u(pl.params, pl.bounds, 500, 7, hi);
    REQUIRE(a.size() == 500);
    for (std::size_t i = 0; i < a.size(); ++i) {
      CHECK(a[i].log_r == b[i].log_r);
      CHECK(a[i].theta == b[i].theta);
      CHECK(in_u(pl.params, pl.bounds, a[i]));
      CHECK(a[i].r() > lo);
      CHECK(a[i].r() <= hi * (1 + 1e-12));
    }
  }

  TEST_CASE("Newton steps: asymptotic regime and its overlap with the full chain") {
    const Pipeline& pl = reference();
    const Chain& ch = *pl.chain;
    const CalibratedBounds& b = pl.bounds;
    const double logp = std::log(static_cast<double>(pl.params.p));
    const SpiralPoint far{std::log(1e6), 0.3 * pl.params.theta3};
    const NewtonStep s = newton_step(ch, b, far);
    CHECK(s.regime == StepRegime::AsymptoticNewton);
    CHECK(s.next.log_r == doctest::Approx(far.log_r + logp).epsilon(1e-15));
    CHECK(std::abs(s.next.theta - far.theta) < 1e-12);
    // just inside r_newton the full chain already gives N = -p z
    const SpiralPoint near{std::log(0.95 * b.r_newton), 0.2 * pl.params.theta3};
    const NewtonStep t = newton_step(ch, b, near);
    CHECK(t.regime == StepRegime::FullChain);
    CHECK(std::abs(t.next.log_r - near.log_r - logp) < 1e-9);
    CHECK(std::abs(t.next.theta - near.theta) < 1e-9);
    CHECK(t.residual_lnmod - std::log(pl.params.p * near.r()) < std::log(1e-9));
  }

  TEST_CASE("invariance of U on a small sample") {
    const Pipeline& pl = reference();
    const InvarianceReport rep = check_invariance(*pl.chain, pl.bounds, 1000, 99, 1e3 * pl.bounds.r1);
    CHECK(rep.samples == 1000);
    CHECK(rep.failures == 0);
    CHECK(rep.pass());
    CHECK(rep.min_ratio >= 2.0);
    CHECK(rep.full_chain > 0);
    CHECK(invariance_summary(rep).find("0 failures") != std::string::npos);
  }

  TEST_CASE("orbits from U grow like 2^k") {
    const Pipeline& pl = reference();
    for (const SpiralPoint& s : sample_u(pl.params, pl.bounds, 10, 5, 1e3 * pl.bounds.r1)) {
      const OrbitRecord rec = orbit(*pl.chain, pl.bounds, to_cartesian(s, pl.params.c), 20);
      REQUIRE(rec.steps.size() == 21);
      CHECK(rec.stop == OrbitStop::MaxSteps);
      for (std::size_t k = 0; k < rec.steps.size(); ++k) {
        CHECK(rec.steps[k].z.log_r - s.log_r >= k * std::log(2.0));
        CHECK(in_u(pl.params, pl.bounds, rec.steps[k].z));
      }
    }
  }

  TEST_CASE("orbit CSV") {
    const Pipeline& pl = reference();
    const OrbitRecord rec = orbit(*pl.chain, pl.bounds, spine_point(*pl.chain, 3 * pl.bounds.r1), 5);
    const std::string path = testing::temp_dir("orbit") + "/orbit.csv";
    write_orbit_csv(rec, path);
    std::ifstream in(path);
    std::string line;
    std::getline(in, line);
    CHECK(line.rfind("k,log_radius,theta,regime,", 0) == 0);
    int rows = 0;
    while (std::getline(in, line)) ++rows;
    CHECK(rows == 6);
  }

  TEST_CASE("classification") {
    const Pipeline& pl = reference();
    const ClassifyLimits lim = default_limits(pl.bounds);
    CHECK(lim.escape_radius == doctest::Approx(1e3 * pl.bounds.r1));
    CHECK(lim.full_chain_radius == doctest::Approx(10 * pl.bounds.r1));
    for (const SpiralPoint& s : sample_u(pl.params, pl.bounds, 20, 3, 1e3 * pl.bounds.r1)) {
      const Classification c = classify(*pl.chain, pl.bounds, to_cartesian(s, pl.params.c), lim);
      CHECK(c.outcome == Outcome::Escaping);
    }
    // far outside every window the orbit is not claimed to escape
    const Classification z = classify(*pl.chain, pl.bounds, cplx(0.0, 0.0), lim);
    CHECK(z.outcome != Outcome::Escaping);
  }
}
