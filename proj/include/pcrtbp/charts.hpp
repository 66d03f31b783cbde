#pragma once

#include <array>
#include <string>

namespace pcrtbp {

// Conversions refuse radii below this instead of returning infinities.
inline constexpr double chart_guard = 1e-14;

enum class Center { CM, P1 };

struct Cartesian {
  double q1, q2, p1, p2;
};

// Synodic polar coordinates about the centre of mass or about the Sun (P1).
struct Polar {
  Center center;
  double r, theta, R, Theta;
};

// r_hat = 2 / xi^2
struct InfinityState {
  double xi, theta_hat, R_hat, Theta_hat;
};

// McGehee collision variables about P1:
//   R = v r^{-1/2} - mu sin(theta),  Theta = u r^{1/2} + r^2 - mu r cos(theta).
struct CollisionState {
  double r, theta, v, u;
};

// r = s^2, (v, u) = sqrt(2(1-mu) + rho) (sin alpha, cos alpha); rho fixed by the energy.
struct ReducedState {
  double s, theta, alpha, rho;
};

void check_mu(double mu);

Polar to_polar(const Cartesian& c, Center center, double mu);
Cartesian from_polar(const Polar& p, double mu);

Polar cm_polar_to_p1_polar(const Polar& p, double mu);
Polar p1_polar_to_cm_polar(const Polar& p, double mu);

InfinityState to_infinity_chart(const Polar& cm);
Polar from_infinity_chart(const InfinityState& s);

CollisionState to_collision(const Polar& p1, double mu);
Polar from_collision(const CollisionState& c, double mu);

// rho(s, theta; mu, h) solving M = 0.
double rho_on_shell(double s, double theta, double mu, double h);
// The energy relation M(s, theta, rho; mu, h); zero on shell.
double energy_relation_M(double s, double theta, double rho, double mu, double h);

struct ReducedConversion {
  ReducedState state;
  double residual;  // |rho(state) - rho_on_shell|
};
// Throws EnergyMismatchError when the residual exceeds tol.
ReducedConversion to_reduced(const CollisionState& c, double mu, double h, double tol = 1e-9);
CollisionState from_reduced(const ReducedState& s, double mu);
ReducedState make_reduced(double s, double theta, double alpha, double mu, double h);

double hamiltonian(const Cartesian& c, double mu);
double hamiltonian(const Polar& p, double mu);
double hamiltonian(const InfinityState& s, double mu);
double hamiltonian(const CollisionState& c, double mu);

// M~ = r (H - h), regular at r = 0.
double M_tilde(const CollisionState& c, double mu, double h);

// Time-reversal symmetry (q1, q2, p1, p2; t) -> (q1, -q2, -p1, p2; -t) in every chart.
Cartesian reflect(const Cartesian& c);
Polar reflect(const Polar& p);
InfinityState reflect(const InfinityState& s);
CollisionState reflect(const CollisionState& c);
ReducedState reflect(const ReducedState& s);

// Tagged state used by the integrator and the hybrid propagator.
enum class Chart { Cartesian, PolarCM, PolarP1, Infinity, Regularized, Reduced };

const char* chart_name(Chart c);
int chart_dim(Chart c);

struct ChartState {
  Chart chart;
  std::array<double, 4> x{};  // Reduced uses x[0..2] = (s, theta, alpha)
};

ChartState tag(const Cartesian& c);
ChartState tag(const Polar& p);
ChartState tag(const InfinityState& s);
ChartState tag(const CollisionState& c);
ChartState tag(const ReducedState& s);

Cartesian as_cartesian(const ChartState& s, double mu, double h);
Polar as_polar(const ChartState& s, Center center, double mu, double h);
CollisionState as_collision(const ChartState& s, double mu, double h);
ReducedState as_reduced(const ChartState& s, double mu, double h);
InfinityState as_infinity(const ChartState& s, double mu, double h);

// h is only used when the source or target is the reduced chart. Angles
// keep their lift when source and target share the angle variable.
ChartState convert(const ChartState& s, Chart target, double mu, double h);

// Distance to the Sun (P1) of the physical point.
double radius_p1(const ChartState& s, double mu);
double radius_cm(const ChartState& s, double mu);

double hamiltonian(const ChartState& s, double mu, double h);

}  // namespace pcrtbp
