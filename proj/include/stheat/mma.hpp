#pragma once

// Method of moving asymptotes for one linear volume constraint
// sum_j V_j x_j <= V* and box bounds 0 <= x_j <= 1.
//
// The objective is approximated by the convex separable model
//   sum_j p_j / (U_j - x_j) + q_j / (x_j - L_j)
// and the linear constraint is kept exact. The subproblem dual has a single
// multiplier, found by bisection.

#include <algorithm>
#include <cmath>
#include <string>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"

namespace stheat {

struct MmaConfig {
  double asy_init = 0.5;
  double asy_incr = 1.2;
  double asy_decr = 0.7;
  double move_limit = 0.5;
  double raa0 = 1e-5;
};

struct MmaState {
  MmaConfig config;
  int iteration = 0;
  Vector x_old1;  // previous design
  Vector x_old2;  // design before that
  Vector low;
  Vector upp;
};

namespace detail {

// Minimizer over [lo, hi] of p/(U-x) + q/(x-L) + mu*v*x; the derivative is increasing in x.
inline double mma_primal(double p, double q, double l, double u, double mu, double v, double lo, double hi) {
  auto slope = [&](double x) { return p / ((u - x) * (u - x)) - q / ((x - l) * (x - l)) + mu * v; };
  if (slope(lo) >= 0.0) return lo;
  if (slope(hi) <= 0.0) return hi;
  double a = lo, b = hi;
  for (int it = 0; it < 200 && b - a > 1e-15 * (1.0 + std::abs(a)); ++it) {
    const double m = 0.5 * (a + b);
    if (slope(m) > 0.0) b = m; else a = m;
  }
  return 0.5 * (a + b);
}

}  // namespace detail

inline Vector mma_update(const Vector& x, const Vector& grad, const Vector& volumes, double volume_bound,
                         MmaState& state) {
  const Index n = x.size();
  if (grad.size() != n || volumes.size() != n) throw InvalidArgument("mma_update: size mismatch");
  if (!grad.allFinite()) throw InvalidArgument("mma_update: non-finite gradient");
  if (!x.allFinite() || x.minCoeff() < -1e-9 || x.maxCoeff() > 1.0 + 1e-9 ||
      x.dot(volumes) > volume_bound + 1e-9) {
    throw InvalidArgument("mma_update: current design is infeasible");
  }
  const MmaConfig& c = state.config;
  constexpr double range = 1.0;  // x_max - x_min
  // Asymptotes stay within [1e-5, 10] * range of the design. A wider floor
  // (the 0.01 of common reference codes) caps how far oscillation can contract
  // them and leaves a limit cycle of amplitude ~0.009 near an interior optimum.
  constexpr double gap_min = 1e-5, gap_max = 10.0;

  ++state.iteration;
  if (state.iteration <= 2 || state.low.size() != n) {
    state.low = x.array() - c.asy_init * range;
    state.upp = x.array() + c.asy_init * range;
  } else {
    for (Index j = 0; j < n; ++j) {
      const double sign = (x(j) - state.x_old1(j)) * (state.x_old1(j) - state.x_old2(j));
      const double factor = sign < 0.0 ? c.asy_decr : (sign > 0.0 ? c.asy_incr : 1.0);
      double l = x(j) - factor * (state.x_old1(j) - state.low(j));
      double u = x(j) + factor * (state.upp(j) - state.x_old1(j));
      l = std::clamp(l, x(j) - gap_max * range, x(j) - gap_min * range);
      u = std::clamp(u, x(j) + gap_min * range, x(j) + gap_max * range);
      state.low(j) = l;
      state.upp(j) = u;
    }
  }

  // Gradient scaled to unit max-norm, so the subproblem is invariant to positive scaling of J.
  const double gmax = grad.cwiseAbs().maxCoeff();
  const Vector g = gmax > 0.0 ? Vector(grad / gmax) : Vector(Vector::Zero(n));

  Vector p(n), q(n), alpha(n), beta(n);
  for (Index j = 0; j < n; ++j) {
    const double l = state.low(j), u = state.upp(j), xj = std::clamp(x(j), 0.0, 1.0);
    const double gp = std::max(g(j), 0.0), gm = std::max(-g(j), 0.0);
    const double reg = c.raa0 / range;
    p(j) = (u - xj) * (u - xj) * (1.001 * gp + 0.001 * gm + reg);
    q(j) = (xj - l) * (xj - l) * (0.001 * gp + 1.001 * gm + reg);
    alpha(j) = std::max({0.0, l + 0.1 * (xj - l), xj - c.move_limit * range});
    beta(j) = std::min({1.0, u - 0.1 * (u - xj), xj + c.move_limit * range});
  }

  auto primal = [&](double mu) {
    Vector y(n);
    for (Index j = 0; j < n; ++j) {
      y(j) = detail::mma_primal(p(j), q(j), state.low(j), state.upp(j), mu, volumes(j), alpha(j), beta(j));
    }
    return y;
  };

  Vector next = primal(0.0);
  if (next.dot(volumes) > volume_bound) {
    double mu_lo = 0.0, mu_hi = 1.0;
    while (primal(mu_hi).dot(volumes) > volume_bound) {
      mu_hi *= 2.0;
      if (mu_hi > 1e300) throw NumericalFailure("mma_update: volume constraint cannot be satisfied");
    }
    while (mu_hi - mu_lo > 1e-12 * std::max(1.0, mu_hi)) {
      const double mid = 0.5 * (mu_lo + mu_hi);
      if (primal(mid).dot(volumes) > volume_bound) mu_lo = mid; else mu_hi = mid;
    }
    next = primal(mu_hi);
  }

  state.x_old2 = state.x_old1.size() == n ? state.x_old1 : x;
  state.x_old1 = x;
  return next;
}

}  // namespace stheat
