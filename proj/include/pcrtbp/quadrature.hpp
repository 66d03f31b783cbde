#pragma once

#include <algorithm>
#include <cmath>

namespace pcrtbp {

struct QuadResult {
  double value = 0.0;
  double error = 0.0;  // sum over accepted panels of |K21 - G10|
  long evals = 0;
  bool converged = true;
};

namespace gk21 {
// Kronrod abscissae (positive half, descending, last is 0); Gauss nodes are the odd entries.
extern const double xk[11];
extern const double wk[11];
extern const double wg[5];
}  // namespace gk21

// One 21-point Gauss-Kronrod panel.
template <class F>
QuadResult gauss_kronrod21(F&& f, double a, double b) {
  const double c = 0.5 * (a + b), hw = 0.5 * (b - a);
  const double fc = f(c);
  double rk = fc * gk21::wk[10], rg = 0.0;
  for (int j = 0; j < 10; ++j) {
    const double dx = hw * gk21::xk[j];
    const double fs = f(c - dx) + f(c + dx);
    rk += gk21::wk[j] * fs;
    if (j % 2 == 1) rg += gk21::wg[j / 2] * fs;
  }
  QuadResult r;
  r.value = rk * hw;
  r.error = std::abs((rk - rg) * hw);
  r.evals = 21;
  return r;
}

namespace detail {
template <class F>
void adapt(F& f, double a, double b, double tol_density, int depth, QuadResult& acc) {
  QuadResult p = gauss_kronrod21(f, a, b);
  acc.evals += p.evals;
  const double tol = tol_density * (b - a);
  if (p.error <= tol || depth <= 0 || !std::isfinite(p.value)) {
    if (p.error > tol || !std::isfinite(p.value)) acc.converged = false;
    acc.value += p.value;
    acc.error += p.error;
    return;
  }
  const double m = 0.5 * (a + b);
  adapt(f, a, m, tol_density, depth - 1, acc);
  adapt(f, m, b, tol_density, depth - 1, acc);
}
}  // namespace detail

// Adaptive bisection; each panel must satisfy |K - G| <= tol * (panel length) / (b - a).
template <class F>
QuadResult integrate_adaptive(F&& f, double a, double b, double tol, int max_depth = 40) {
  QuadResult acc;
  if (b == a) return acc;
  detail::adapt(f, a, b, tol / std::abs(b - a), max_depth, acc);
  return acc;
}

// Splits [a, b] into equal panels no longer than max_panel, then integrates each adaptively.
template <class F>
QuadResult integrate_panels(F&& f, double a, double b, double max_panel, double tol, int max_depth = 40) {
  QuadResult acc;
  if (b <= a) return acc;
  const long n = std::max(1L, static_cast<long>(std::ceil((b - a) / max_panel)));
  const double hp = (b - a) / n;
  for (long i = 0; i < n; ++i) {
    const double lo = a + i * hp, hi = (i + 1 == n) ? b : a + (i + 1) * hp;
    detail::adapt(f, lo, hi, tol / (b - a), max_depth, acc);
  }
  return acc;
}

}  // namespace pcrtbp
