#include <cmath>
#include <random>

#include "baker/errors.hpp"
#include "baker/params.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace baker;
using testing::h_oracle;

namespace {

// smallest p >= 24 with mu >= 1/2 + margin, long double linear scan
int p_scan_oracle(long double rho, long double margin, int p_max) {
  const long double pi = 3.141592653589793238462643383279502884L;
  for (int p = 24; p <= p_max; ++p) {
    const long double c = pi / std::log(static_cast<long double>(p));
    const long double mu = rho / (1 + c * c);
    if (mu >= 0.5L + margin && mu > 0.5L) return p;
  }
  return -1;
}

}  // namespace

TEST_SUITE("params") {
  TEST_CASE("derive_params against the linear-scan oracle") {
    const ConstructionParams a = derive_params(0.99, 0.0, 1.0, 1000);
    CHECK(a.p == 24);
    CHECK(a.p == p_scan_oracle(0.99L, 0.0L, 1000));
    const ConstructionParams b = derive_params(0.95, 0.02, 1.0, 1000);
    CHECK(b.p == p_scan_oracle(0.95L, 0.02L, 1000));
    CHECK(b.p == 32);
    CHECK(b.q == b.p + 1);
    CHECK(b.c == doctest::Approx(M_PI / std::log(32.0)).epsilon(1e-15));
    CHECK(b.mu == doctest::Approx(0.95 / (1 + b.c * b.c)).epsilon(1e-15));
    std::mt19937_64 rng(3);
    for (int i = 0; i < 40; ++i) {
      const double rho = testing::uniform(rng, 0.7, 0.99), margin = testing::uniform(rng, 0.0, 0.1);
      const int expect = p_scan_oracle(rho, margin, 1000000);
      if (expect < 0) continue;
      CHECK(derive_params(rho, margin, 1.0).p == expect);
    }
  }

  TEST_CASE("derive_params errors") {
    CHECK_THROWS_AS(derive_params(0.51, 0.1, 1.0, 1000), NoAdmissibleP);
    CHECK_THROWS_AS(derive_params(0.5, 0.0, 1.0, 1000), DomainError);
    CHECK_THROWS_AS(derive_params(1.0, 0.0, 1.0, 1000), DomainError);
  }

  TEST_CASE("h_at against the long double formula") {
    const ConstructionParams p = derive_params(0.95, 0.02, 1.0);
    for (double th : {1e-6, 0.01, 0.5, 1.0, M_PI, 4.0, 6.0, 2 * M_PI - 1e-6}) {
      CHECK(h_at(p, th) == doctest::Approx(static_cast<double>(h_oracle(0.95L, 1.0L, 32, th))).epsilon(1e-13));
    }
    CHECK_THROWS_AS(h_at(p, 0.0), DomainError);
    CHECK_THROWS_AS(h_at(p, 2 * M_PI), DomainError);
    CHECK(h_signed(p, -0.3) == h_at(p, 2 * M_PI - 0.3));
    ConstructionParams p2 = p;
    p2.delta = 2.0;
    CHECK(h_at(p2, 1.3) == doctest::Approx(2 * h_at(p, 1.3)).epsilon(1e-15));
    CHECK(h0_closed_form(p2) == doctest::Approx(2 * h0_closed_form(p)).epsilon(1e-15));
  }

  TEST_CASE("h0_closed_form is the limit of h_at") {
    std::mt19937_64 rng(4);
    for (int i = 0; i < 100; ++i) {
      const double rho = testing::uniform(rng, 0.55, 0.99), delta = testing::uniform(rng, 0.1, 10.0);
      const int pp = 24 + static_cast<int>(rng() % 2000);
      const ConstructionParams p = make_params(rho, delta, pp);
      const long double lim = h_oracle(rho, delta, pp, 0.0L);
      CHECK(std::abs(h0_closed_form(p) - lim) <= 1e-12 * std::abs(lim));
      // the oracle itself: Richardson extrapolation of the one-sided values
      CHECK(std::abs(testing::h_limit_richardson(rho, delta, pp) - lim) <= 1e-12L * std::abs(lim));
    }
  }

  TEST_CASE("one-sided limits of h across the spiral agree") {
    // h has a kink at theta = 0 (the one-sided derivatives differ), so the
    // gap at offset d is O(d); its extrapolation to d = 0 vanishes.
    const ConstructionParams p = derive_params(0.95, 0.02, 1.0);
    auto gap = [&](double d) { return h_at(p, d) - h_signed(p, -d); };
    const double d = 1e-4, g1 = gap(d), g2 = gap(d / 2), g3 = gap(d / 4);
    const double r1 = 2 * g2 - g1, r2 = 2 * g3 - g2;
    CHECK(std::abs((4 * r2 - r1) / 3) < 1e-10);
    CHECK(std::abs(gap(1e-6)) < 1e-5);
  }

  TEST_CASE("sign law on a 50 x 50 grid") {
    for (int i = 0; i < 50; ++i) {
      for (int j = 0; j < 50; ++j) {
        const double rho = 0.51 + 0.48 * i / 49.0;
        const int pp = 24 + 40 * j;
        const ConstructionParams p = make_params(rho, 1.0, pp);
        const double c = M_PI / std::log(static_cast<double>(pp));
        const double mu = rho / (1 + c * c);
        CHECK((h0_closed_form(p) < 0) == (mu > 0.5 && mu < 1.0));
      }
    }
  }

  TEST_CASE("theta window against a dense grid scan") {
    const ConstructionParams p = derive_params(0.95, 0.02, 1.0);
    const ThetaWindow w = find_theta_window(p, 1e-10);
    // first sign change of h_signed on each side, 1e6-point grid on (0, 0.5]
    const int n = 1000000;
    const double hi = 0.5;
    double pos = -1, neg = -1;
    for (int i = 1; i <= n && (pos < 0 || neg < 0); ++i) {
      const double th = hi * i / n;
      if (pos < 0 && h_oracle(0.95L, 1.0L, p.p, th) >= 0) pos = th;
      if (neg < 0 && h_oracle(0.95L, 1.0L, p.p, 2 * M_PI - th) >= 0) neg = th;
    }
    const double grid_theta0 = std::min(pos, neg);
    CHECK(std::abs(w.theta0 - grid_theta0) <= hi / n + 2e-10);
    CHECK(p.theta0 == w.theta0);
    CHECK(std::abs(find_theta_window(p, 1e-11).theta0 - w.theta0) <= 1e-9);
    for (int i = 1; i <= 1000; ++i) {
      const double th = (w.theta0 - 1e-10) * i / 1000;
      CHECK(h_signed(p, th) < 0);
      CHECK(h_signed(p, -th) < 0);
    }
    // h is positive somewhere
    double hmax = -1;
    for (int i = 1; i < 10000; ++i) hmax = std::max(hmax, h_at(p, 2 * M_PI * i / 10000));
    CHECK(hmax > 0);
  }

  TEST_CASE("angle selection") {
    ConstructionParams p = derive_params(0.95, 0.02, 1.0);
    select_angles(p, {0.9, 0.6, 0.3});
    CHECK(p.theta3 < p.theta2);
    CHECK(p.theta2 < p.theta1);
    CHECK(p.theta1 < p.theta0);
    CHECK(p.theta1 == doctest::Approx(0.9 * p.theta0));
    CHECK_THROWS_AS(select_angles(p, {0.5, 0.5, 0.2}), DomainError);
    CHECK_THROWS_AS(select_angles(p, {1.2, 0.5, 0.2}), DomainError);
    CHECK_NOTHROW(validate(derive_params(0.8, 0.0, 2.0)));
  }
}
