#pragma once

// Bounded scalar minimization by golden-section search with parabolic
// interpolation steps (Brent's method, the algorithm behind fminbnd).

#include <cmath>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "stheat/errors.hpp"

namespace stheat {

struct ScalarMinimum {
  double x = 0.0;
  double value = 0.0;
  int evaluations = 0;
  std::vector<double> bracket_widths;  // width of [a, b] after each iteration
};

inline ScalarMinimum scalar_minimize(const std::function<double(double)>& f, double lo, double hi, double tol,
                                     int max_iterations = 500) {
  if (!(lo < hi)) throw InvalidArgument("scalar_minimize: empty bracket");
  if (!(tol > 0.0)) throw InvalidArgument("scalar_minimize: tolerance must be positive");
  const double golden = 0.5 * (3.0 - std::sqrt(5.0));
  const double eps = 4.0 * std::numeric_limits<double>::epsilon();

  ScalarMinimum out;
  auto eval = [&](double x) {
    const double v = f(x);
    ++out.evaluations;
    if (!std::isfinite(v)) {
      throw NumericalFailure("scalar_minimize: non-finite objective at x = " + std::to_string(x));
    }
    return v;
  };

  double a = lo, b = hi;
  double x = a + golden * (b - a);
  double w = x, v = x;
  double fx = eval(x);
  double fw = fx, fv = fx;
  double d = 0.0, e = 0.0;

  for (int it = 0; it < max_iterations; ++it) {
    const double xm = 0.5 * (a + b);
    const double tol1 = eps * std::abs(x) + tol / 4.0;
    const double tol2 = 2.0 * tol1;
    if (std::abs(x - xm) <= tol2 - 0.5 * (b - a)) break;

    bool golden_step = true;
    if (std::abs(e) > tol1) {
      double r = (x - w) * (fx - fv);
      double q = (x - v) * (fx - fw);
      double p = (x - v) * q - (x - w) * r;
      q = 2.0 * (q - r);
      if (q > 0.0) p = -p;
      q = std::abs(q);
      const double e_prev = e;
      e = d;
      if (std::abs(p) < std::abs(0.5 * q * e_prev) && p > q * (a - x) && p < q * (b - x)) {
        d = p / q;
        const double u = x + d;
        if (u - a < tol2 || b - u < tol2) d = xm >= x ? tol1 : -tol1;
        golden_step = false;
      }
    }
    if (golden_step) {
      e = x >= xm ? a - x : b - x;
      d = golden * e;
    }
    const double u = std::abs(d) >= tol1 ? x + d : x + (d > 0.0 ? tol1 : -tol1);
    const double fu = eval(u);
    if (fu <= fx) {
      if (u >= x) a = x; else b = x;
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
    out.bracket_widths.push_back(b - a);
  }
  out.x = x;
  out.value = fx;
  return out;
}

}  // namespace stheat
