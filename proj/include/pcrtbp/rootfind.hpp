#pragma once

#include <cmath>

namespace pcrtbp {

// Secant iteration for f(x) = 0 from x0 with a unit-slope first step. f carries integration
// noise near the root, so the best iterate is kept. Returns whether |f| <= tol was reached.
template <class F>
bool secant_solve(F&& f, double x0, int max_iter, double tol, double& x, int& evals) {
  double xa = x0, fa = f(xa);
  ++evals;
  if (!std::isfinite(fa)) return false;
  double xb = xa - fa, fb = f(xb);
  ++evals;
  double best = xa, fbest = fa;
  for (int it = 0; it < max_iter; ++it) {
    if (!std::isfinite(fb)) break;
    if (std::abs(fb) < std::abs(fbest)) {
      best = xb;
      fbest = fb;
    }
    if (std::abs(fb) <= tol || xb == xa) break;
    double slope = (fb - fa) / (xb - xa);
    if (!(std::abs(slope) > 1e-3)) slope = 1.0;
    const double xn = xb - fb / slope;
    xa = xb;
    fa = fb;
    xb = xn;
    fb = f(xb);
    ++evals;
  }
  x = best;
  return std::abs(fbest) <= tol;
}

}  // namespace pcrtbp
