#pragma once

// Shared fixtures and independent oracles for the unit and acceptance tests.
// Oracles use long double and their own formulas; they never call the
// library routine they check.

#include <complex>
#include <cstdint>
#include <memory>
#include <random>
#include <string>

#include "baker/cli.hpp"

namespace baker::testing {

using lcplx = std::complex<long double>;

/// Reference configuration, calibrated once per process.
const Pipeline& reference();

/// h(theta) from its defining formula in long double; theta may be 0
/// (the formula is analytic there, so this is the one-sided limit).
long double h_oracle(long double rho, long double delta, int p, long double theta);

/// lim h(delta -> 0+) by Richardson extrapolation of h_oracle.
long double h_limit_richardson(long double rho, long double delta, int p);

/// log Pi(w): zeros up to K multiplied out, the rest as
/// -sum_m w^m/m sum_{k>K} a_k^{-m} with the inner sums by Euler-Maclaurin.
lcplx log_pi_oracle(double rho, double delta, double c, std::complex<double> w, std::int64_t K);

/// sum_{k=K+1}^{K+terms} log(1 - w/a_k) term by term.
lcplx tail_sum_oracle(double rho, double delta, double c, std::complex<double> w, std::int64_t K,
                      std::int64_t terms);

/// f'(z) by the trapezoid rule on |zeta - z| = radius.
std::complex<double> cauchy_fprime(const Chain& chain, const CalibratedBounds& bounds, std::complex<double> z,
                                   double radius, int nodes);

/// Largest radius fraction delta <= 0.1 (halving) such that the Cauchy
/// circle of radius delta |z| stays inside S2.
double cauchy_delta(const ConstructionParams& params, std::complex<double> z, int nodes);

/// |a - b| / |b| for reduced complex logs (lnmod, arg) compared as values.
double rel_diff(const LogComplex& a, const LogComplex& b);

double uniform(std::mt19937_64& rng, double lo, double hi);

/// Fresh empty directory under the system temp dir.
std::string temp_dir(const std::string& name);

std::string slurp(const std::string& path);

}  // namespace baker::testing
