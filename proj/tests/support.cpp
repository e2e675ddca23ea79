#include "support.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace baker::testing {

const Pipeline& reference() {
  static const Pipeline pl = make_pipeline(RunConfig{});
  return pl;
}

long double h_oracle(long double rho, long double delta, int p, long double theta) {
  const long double pi = 3.141592653589793238462643383279502884L;
  const long double c = pi / std::log(static_cast<long double>(p));
  const lcplx beta = rho / lcplx(1.0L, c);
  const lcplx i(0.0L, 1.0L);
  const lcplx num = i * std::exp(i * beta * theta);
  const lcplx den = 1.0L - std::exp(i * 2.0L * pi * beta);
  return -2.0L * pi * delta * (num / den).real();
}

long double h_limit_richardson(long double rho, long double delta, int p) {
  // h is smooth on (0, 2 pi); three-level Richardson on steps d, d/2, d/4
  const long double d = 1e-5L;
  const long double a = h_oracle(rho, delta, p, d), b = h_oracle(rho, delta, p, d / 2), e = h_oracle(rho, delta, p, d / 4);
  const long double r1 = 2 * b - a, r2 = 2 * e - b;
  return (4 * r2 - r1) / 3;
}

namespace {

lcplx cpow_neg(long double k, lcplx sigma) { return std::exp(-sigma * std::log(k)); }

// sum_{k=K+1}^inf k^-sigma, Re sigma > 1
lcplx zeta_tail(lcplx sigma, std::int64_t K) {
  const long double k = static_cast<long double>(K);
  const lcplx fk = cpow_neg(k, sigma);
  lcplx sum = k * fk / (sigma - 1.0L) - fk / 2.0L;
  static const long double bern[] = {1.0L / 6, -1.0L / 30, 1.0L / 42, -1.0L / 30, 5.0L / 66};
  lcplx rising = sigma;  // sigma (sigma+1) ... (sigma+m-1)
  long double fact = 1.0L;
  lcplx xpow = fk / k;  // k^(-sigma-1)
  for (int j = 1; j <= 5; ++j) {
    const int m = 2 * j - 1;
    if (j > 1) {
      rising *= (sigma + static_cast<long double>(m - 2)) * (sigma + static_cast<long double>(m - 1));
      xpow /= k * k;
    }
    fact *= (2.0L * j - 1) * (2.0L * j);
    // f^(m)(K) = (-1)^m rising K^(-sigma-m), m odd
    sum -= bern[j - 1] / fact * (-rising * xpow);
  }
  return sum;
}

lcplx zero_oracle(double rho, double delta, double c, std::int64_t k) {
  const lcplx s = lcplx(1.0L, c) / static_cast<long double>(rho);
  return std::exp(s * std::log(static_cast<long double>(k) / delta));
}

}  // namespace

lcplx log_pi_oracle(double rho, double delta, double c, std::complex<double> w, std::int64_t K) {
  const lcplx wl(w.real(), w.imag());
  const std::int64_t k0 = std::max<std::int64_t>(1, static_cast<std::int64_t>(std::ceil(delta)));
  lcplx sum = 0.0L;
  for (std::int64_t k = k0; k <= K; ++k) sum += std::log(1.0L - wl / zero_oracle(rho, delta, c, k));
  const lcplx s = lcplx(1.0L, c) / static_cast<long double>(rho);
  const lcplx dlog = std::log(static_cast<long double>(delta));
  lcplx wm = 1.0L;
  for (int m = 1; m <= 60; ++m) {
    wm *= wl;
    const lcplx sigma = static_cast<long double>(m) * s;
    const lcplx term = wm / static_cast<long double>(m) * std::exp(sigma * dlog) * zeta_tail(sigma, K);
    sum -= term;
    if (std::abs(term) < 1e-22L * (1.0L + std::abs(sum))) break;
  }
  return sum;
}

lcplx tail_sum_oracle(double rho, double delta, double c, std::complex<double> w, std::int64_t K,
                      std::int64_t terms) {
  const lcplx wl(w.real(), w.imag());
  lcplx sum = 0.0L;
  for (std::int64_t k = K + 1; k <= K + terms; ++k) sum += std::log(1.0L - wl / zero_oracle(rho, delta, c, k));
  return sum;
}

std::complex<double> cauchy_fprime(const Chain& chain, const CalibratedBounds& bounds, std::complex<double> z,
                                   double radius, int nodes) {
  std::complex<double> sum = 0.0;
  for (int j = 0; j < nodes; ++j) {
    const std::complex<double> e = std::polar(1.0, 2.0 * M_PI * j / nodes);
    sum += lc_to_cartesian(chain.f(z + radius * e, &bounds).value) / e;
  }
  return sum / (static_cast<double>(nodes) * radius);
}

double cauchy_delta(const ConstructionParams& params, std::complex<double> z, int nodes) {
  double delta = 0.1;
  for (;;) {
    bool inside = true;
    for (int j = 0; j < nodes && inside; ++j) {
      const std::complex<double> x = z + delta * std::abs(z) * std::polar(1.0, 2.0 * M_PI * j / nodes);
      const double th = std::remainder(std::arg(x) - params.c * std::log(std::abs(x)), 2.0 * M_PI);
      inside = std::abs(x) > 1.0 && std::abs(th) < params.theta2;
    }
    if (inside || delta < 1e-8) return delta;
    delta *= 0.5;
  }
}

double rel_diff(const LogComplex& a, const LogComplex& b) {
  const std::complex<double> ratio = std::exp(std::complex<double>(a.lnmod - b.lnmod, a.arg - b.arg));
  return std::abs(ratio - 1.0);
}

double uniform(std::mt19937_64& rng, double lo, double hi) {
  return lo + (hi - lo) * std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

std::string temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("baker_test_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir.string();
}

std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace baker::testing
