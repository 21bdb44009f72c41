#pragma once

#include <cmath>
#include <utility>

namespace paircal::detail {

/// Brent's method for a 1-D minimum of f on [a, b], absolute tolerance tol.
/// Classic parabolic-interpolation/golden-section hybrid.
template <typename F>
std::pair<double, double> brent_minimize(F&& f, double a, double b,
                                         double tol, int max_iter = 200) {
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = f(x), fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int iter = 0; iter < max_iter; ++iter) {
    const double m = 0.5 * (a + b);
    const double tol1 = tol + 1e-12 * std::fabs(x);
    const double tol2 = 2.0 * tol1;
    if (std::fabs(x - m) <= tol2 - 0.5 * (b - a)) break;

    bool use_golden = true;
    if (std::fabs(e) > tol1) {
      // Parabolic fit through x, v, w.
      const double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::fabs(q);
      const double e_old = e;
      e = d;
      if (std::fabs(p) < std::fabs(0.5 * q * e_old) && p > q * (a - x) &&
          p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = (x < m) ? tol1 : -tol1;
        use_golden = false;
      }
    }
    if (use_golden) {
      e = (x < m) ? b - x : a - x;
      d = golden * e;
    }

    const double u = (std::fabs(d) >= tol1) ? x + d : x + (d > 0 ? tol1 : -tol1);
    const double fu = f(u);
    if (fu <= fx) {
      if (u < x) b = x; else a = x;
      v = w; fv = fw;
      w = x; fw = fx;
      x = u; fx = fu;
    } else {
      if (u < x) a = u; else b = u;
      if (fu <= fw || w == x) {
        v = w; fv = fw;
        w = u; fw = fu;
      } else if (fu <= fv || v == x || v == w) {
        v = u; fv = fu;
      }
    }
  }
  return {x, fx};
}

/// Coarse grid scan followed by Brent refinement between the best point's
/// neighbors. Guards against picking a local valley when f is not unimodal.
template <typename F>
std::pair<double, double> grid_then_brent(F&& f, double lo, double hi,
                                          int grid_points, double tol) {
  if (!(hi > lo)) return {lo, f(lo)};
  int best = 0;
  double best_val = f(lo);
  for (int i = 1; i < grid_points; ++i) {
    const double t = lo + (hi - lo) * static_cast<double>(i) /
                              static_cast<double>(grid_points - 1);
    const double val = f(t);
    if (val < best_val) {
      best_val = val;
      best = i;
    }
  }
  const double step = (hi - lo) / static_cast<double>(grid_points - 1);
  const double a = lo + step * static_cast<double>(best > 0 ? best - 1 : 0);
  const double b = lo + step * static_cast<double>(
                            best < grid_points - 1 ? best + 1 : grid_points - 1);
  auto [x, fx] = brent_minimize(f, a, b, tol);
  if (best_val < fx) return {lo + step * best, best_val};
  return {x, fx};
}

}  // namespace paircal::detail
