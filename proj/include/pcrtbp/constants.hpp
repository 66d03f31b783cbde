#pragma once

#include <cmath>
#include <numbers>

namespace pcrtbp {

inline constexpr double pi = std::numbers::pi;
inline constexpr double two_pi = 2.0 * std::numbers::pi;

// kappa = 3^{2/3} / 2^{1/3}; r = kappa t^{2/3} on the zero-energy Kepler parabola.
inline const double kappa = std::cbrt(9.0) / std::cbrt(2.0);

// Gamma(2/3), enough digits for double.
inline constexpr double gamma_two_thirds = 1.3541179394264004169452880281545;

inline double m0_of(double mu) { return std::sqrt(2.0 * (1.0 - mu)); }

// lambda(mu, h) in the straightened near-collision fields.
inline double lambda_of(double mu, double h) {
  return (mu * mu + 2.0 * h + 2.0 * mu) / (4.0 * m0_of(mu));
}

// Time a zero-energy parabola needs between the section r = delta^2 and collision.
inline double w_sigma(double delta) { return std::sqrt(2.0) / 3.0 * delta * delta * delta; }

// Wrap to (-pi, pi].
inline double wrap_pi(double a) {
  double w = std::remainder(a, two_pi);
  if (w <= -pi) w += two_pi;
  return w;
}

inline double wrap_2pi(double a) {
  double w = std::fmod(a, two_pi);
  if (w < 0) w += two_pi;
  return w;
}

}  // namespace pcrtbp
