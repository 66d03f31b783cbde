#include "pcrtbp/closedform.hpp"

#include <cmath>

#include "pcrtbp/constants.hpp"
#include "pcrtbp/errors.hpp"

namespace pcrtbp {

Polar eval_parabolic(const ParabolicOrbit& orbit, double t) {
  if (!(orbit.sign == 1 || orbit.sign == -1)) throw DomainError("parabolic orbit sign must be +1 or -1");
  if (!(orbit.sign * t > 0)) throw DomainError("parabolic orbit evaluated off its time half-line");
  const double at = std::abs(t);
  return {Center::CM, kappa * std::cbrt(at * at), orbit.theta_bar - t,
          orbit.sign * std::sqrt(2.0 / kappa) / std::cbrt(at), 0.0};
}

ReducedState eval_heteroclinic(const CollisionHeteroclinic& het, double tau, double mu) {
  const double a = 2.0 * std::atan(std::tanh(m0_of(mu) * tau / 4.0));
  return {0.0, het.theta_bar + pi + 2.0 * a, a, 0.0};
}

CollisionState eval_regularized_ejection(double theta_bar, double tau) {
  const double e3 = std::exp(3.0 * tau / std::sqrt(2.0));
  return {kappa * std::exp(std::sqrt(2.0) * tau), theta_bar - e3, std::sqrt(2.0),
          -std::pow(kappa, 1.5) * e3};
}

double ejection_time(double tau) {
  // dt = r^{3/2} dtau = kappa^{3/2} e^{(3/sqrt2) tau} dtau
  return std::pow(kappa, 1.5) * std::sqrt(2.0) / 3.0 * std::exp(3.0 * tau / std::sqrt(2.0));
}

}  // namespace pcrtbp
