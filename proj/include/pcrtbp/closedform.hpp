#pragma once

#include "pcrtbp/charts.hpp"

namespace pcrtbp {

// Zero-energy, zero-angular-momentum Kepler parabola in the rotating frame (mu = 0):
//   (kappa |t|^{2/3}, theta_bar - t, sign sqrt(2/kappa) |t|^{-1/3}, 0).
// sign = +1 lives on t > 0 (escaping), sign = -1 on t < 0 (arriving).
struct ParabolicOrbit {
  int sign = +1;
  double theta_bar = 0.0;
};

Polar eval_parabolic(const ParabolicOrbit& orbit, double t);

// Heteroclinic S^-_{theta_bar} -> S^+_{theta_bar} inside the collision torus s = 0:
//   alpha = 2 atan(tanh(m0 tau / 4)), theta = theta_bar + pi + 2 alpha.
struct CollisionHeteroclinic {
  double theta_bar = 0.0;
};

ReducedState eval_heteroclinic(const CollisionHeteroclinic& het, double tau, double mu);

// mu = 0 ejection orbit from S^+_{theta_bar} in the regularized chart:
//   (kappa e^{sqrt2 tau}, theta_bar - e^{3 tau / sqrt2}, sqrt2, -kappa^{3/2} e^{3 tau / sqrt2}).
CollisionState eval_regularized_ejection(double theta_bar, double tau);

// Physical time elapsed along the ejection orbit from tau = -inf to tau.
double ejection_time(double tau);

}  // namespace pcrtbp
