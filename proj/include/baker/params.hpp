#pragma once

#include <array>
#include <complex>

namespace baker {

/// Parameter bundle of the construction.
///
/// The zeros lie on the spiral r*exp(i c log r) with counting function
/// ~ delta * r^rho.  The pitch c = pi / log p makes the spiral invariant under
/// z -> -p z, q = p + 1 is the root order of f, and mu = rho / (1 + c^2)
/// must lie in (1/2, 1) so that h(0) < 0.  theta0 is the half-width of the
/// window around the spiral where h < 0; theta1 > theta2 > theta3 are the
/// nested windows used by the chain and the Newton analysis.
struct ConstructionParams {
  double rho = 0.95;
  double delta = 1.0;
  int p = 32;
  int q = 33;
  double c = 0.0;
  double mu = 0.0;
  double theta0 = 0.0;
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  /// True when h stayed negative on the whole sampled range and theta0 was
  /// capped at pi.
  bool theta0_capped = false;
};

inline constexpr std::array<double, 3> kDefaultAngleRatios{0.8, 0.5, 0.25};
inline constexpr double kDefaultThetaTol = 1e-10;
inline constexpr int kDefaultPMax = 1000000;

/// Fill c, q and mu from rho, delta and p (no angle selection).
ConstructionParams make_params(double rho, double delta, int p);

/// Smallest p in [24, p_max] with mu >= 1/2 + margin (and mu > 1/2), with
/// the angle thresholds filled in.
ConstructionParams derive_params(double rho, double margin, double delta, int p_max = kDefaultPMax,
                                 std::array<double, 3> ratios = kDefaultAngleRatios,
                                 double tol = kDefaultThetaTol);

/// Complex limit A(theta) of log Pi / r^rho at spiral offset theta in (0, 2 pi).
std::complex<double> angular_limit(const ConstructionParams& params, double theta);

/// h(theta) = Re A(theta) for theta in (0, 2 pi).
double h_at(const ConstructionParams& params, double theta);

/// h extended to (-2 pi, 2 pi) \ {0}: negative offsets are shifted by 2 pi.
double h_signed(const ConstructionParams& params, double theta);

/// Closed form of lim h(theta) as theta -> 0.
double h0_closed_form(const ConstructionParams& params);

struct ThetaWindow {
  double theta0 = 0.0;
  double crossing_pos = 0.0;  // first sign change of h on (0, pi]
  double crossing_neg = 0.0;  // first sign change of h_signed on [-pi, 0), as a positive number
  bool capped = false;
};

/// Half-width of the largest symmetric window |theta| < theta0 where h < 0.
ThetaWindow find_theta_window(const ConstructionParams& params, double tol = kDefaultThetaTol);

/// theta_i = ratio_i * theta0.
void select_angles(ConstructionParams& params, std::array<double, 3> ratios = kDefaultAngleRatios);

/// Throws DomainError when any invariant of ConstructionParams is violated.
void validate(const ConstructionParams& params);

}  // namespace baker
