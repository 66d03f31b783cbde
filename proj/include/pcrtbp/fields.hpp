#pragma once

#include <array>

#include "pcrtbp/charts.hpp"

namespace pcrtbp {

using Vec4 = std::array<double, 4>;

enum class FieldId {
  Cartesian,          // (q1, q2, p1, p2), time t
  PolarCM,            // (r_hat, theta_hat, R_hat, Theta_hat), t
  PolarP1,            // (r, theta, R, Theta), t
  Infinity,           // (xi, theta_hat, R_hat, Theta_hat), t
  Regularized,        // (r, theta, v, u), tau with dt = r^{3/2} dtau
  Reduced,            // (s, theta, alpha), tau
  CollisionTorus,     // (theta, alpha) on s = 0, tau
  StraightenedMinus,  // (s, beta~, z), leading order only
  StraightenedPlus,   // (s, iota~, w), leading order only
};

const char* field_name(FieldId id);
int field_dim(FieldId id);
bool field_uses_tau(FieldId id);
// Chart of the field's state; throws for the torus/straightened fields.
Chart field_chart(FieldId id);
FieldId field_for_chart(Chart c);

// dt/dtau for the tau-fields (1 for t-fields).
double time_factor(FieldId id, const Vec4& x);

// Vector field; h is used by Reduced and the straightened fields only.
Vec4 eval_field(FieldId id, const Vec4& x, double mu, double h = 0.0);

enum class IntegralId { H_hat, M_tilde, M };

// H_hat accepts any chart; M_tilde and M are evaluated from the collision variables.
double eval_integral(IntegralId id, const ChartState& s, double mu, double h);

struct ConsistencyResult {
  double max_deviation;
  bool inconclusive;  // too close to a chart singularity for the FD push-forward
};

// Pushes field A through the chart map A -> B by central differences (step 1e-6)
// and compares with field B, including the dt = r^{3/2} dtau factor.
ConsistencyResult consistency_check(FieldId a, FieldId b, const ChartState& s, double mu, double h);

}  // namespace pcrtbp
