#pragma once

// Exact solutions of u_t = (kappa u_x)_x + f on [0,1] with kappa = kappa_1 on
// (0, xi) and kappa_2 on (xi, 1), u(0, t) = 0, u(1, t) = u_R, constant f.
//
// Single-mode solution:  u(x, t) = u_s(x) + exp(-lambda t) w(x), with
//   w = sin(alpha_1 x) on (0, xi),  w = r sin(alpha_2 (1 - x)) on (xi, 1),
//   alpha_i = sqrt(lambda / kappa_i),  r = sin(alpha_1 xi) / sin(alpha_2 (1 - xi)),
// and lambda a root of  sqrt(kappa_1) cot(alpha_1 xi) + sqrt(kappa_2) cot(alpha_2 (1 - xi)) = 0.
//
// For an arbitrary initial state the solution is an eigenfunction series,
// which gives the space-time integral of u^2 to near machine precision.

#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <string>
#include <vector>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"

namespace stheat {

struct SteadyCoefficients {
  double A1 = 0.0, A2 = 0.0, B2 = 0.0;
};

inline SteadyCoefficients steady_coefficients(double kappa1, double kappa2, double xi, double f, double u_right) {
  if (!(kappa1 > 0.0 && kappa2 > 0.0)) throw InvalidArgument("steady_coefficients: diffusivities must be positive");
  if (!(xi > 0.0 && xi < 1.0)) throw InvalidArgument("steady_coefficients: interface must lie in (0, 1)");
  SteadyCoefficients c;
  c.A1 = (kappa2 * u_right + 0.5 * f * (1.0 + xi * xi * (kappa2 / kappa1 - 1.0))) /
         (xi * kappa2 + (1.0 - xi) * kappa1);
  c.A2 = kappa1 * c.A1 / kappa2;
  c.B2 = u_right + f / (2.0 * kappa2) - c.A2;
  return c;
}

namespace detail {

inline double eigen_condition(double lambda, double kappa1, double kappa2, double xi) {
  const double a1 = std::sqrt(lambda / kappa1);
  const double a2 = std::sqrt(lambda / kappa2);
  return std::sqrt(kappa1) / std::tan(a1 * xi) + std::sqrt(kappa2) / std::tan(a2 * (1.0 - xi));
}

struct EigenBracket {
  double lo = 0.0, hi = 0.0;
  bool at_pole = false;  // both cotangents are singular: the pole itself is an eigenvalue
};

// Intervals between consecutive cotangent poles up to lambda_max; the
// condition decreases from +inf to -inf on each, so each holds one root.
inline std::vector<EigenBracket> eigen_brackets(double kappa1, double kappa2, double xi, double lambda_max) {
  std::vector<double> p1, p2;
  const double pi = std::numbers::pi;
  for (int m = 1;; ++m) {
    const double v = kappa1 * std::pow(m * pi / xi, 2);
    if (v > lambda_max) break;
    p1.push_back(v);
  }
  for (int m = 1;; ++m) {
    const double v = kappa2 * std::pow(m * pi / (1.0 - xi), 2);
    if (v > lambda_max) break;
    p2.push_back(v);
  }
  struct Pole {
    double value;
    bool both;
  };
  std::vector<Pole> poles;
  std::size_t i = 0, j = 0;
  while (i < p1.size() || j < p2.size()) {
    if (i < p1.size() && j < p2.size() && std::abs(p1[i] - p2[j]) <= 1e-12 * std::max(p1[i], p2[j])) {
      poles.push_back({p1[i], true});
      ++i;
      ++j;
    } else if (j >= p2.size() || (i < p1.size() && p1[i] < p2[j])) {
      poles.push_back({p1[i++], false});
    } else {
      poles.push_back({p2[j++], false});
    }
  }
  std::vector<EigenBracket> out;
  double left = 0.0;
  for (const Pole& p : poles) {
    out.push_back({left, p.value, false});
    if (p.both) out.push_back({p.value, p.value, true});
    left = p.value;
  }
  return out;
}

inline double bisect_bracket(const EigenBracket& b, double kappa1, double kappa2, double xi) {
  if (b.at_pole) return b.lo;
  double lo = b.lo, hi = b.hi;
  for (int it = 0; it < 400; ++it) {
    const double mid = 0.5 * (lo + hi);
    if (mid <= lo || mid >= hi) break;
    if (eigen_condition(mid, kappa1, kappa2, xi) > 0.0) lo = mid; else hi = mid;
  }
  const double glo = std::abs(eigen_condition(lo, kappa1, kappa2, xi));
  const double ghi = std::abs(eigen_condition(hi, kappa1, kappa2, xi));
  return glo <= ghi ? lo : hi;
}

}  // namespace detail

// Root number `branch` (0 = smallest) of the eigenvalue condition.
inline double transient_eigenvalue(double kappa1, double kappa2, double xi, int branch = 0,
                                   double lambda_max = 0.0) {
  if (!(kappa1 > 0.0 && kappa2 > 0.0)) throw InvalidArgument("transient_eigenvalue: diffusivities must be positive");
  if (!(xi > 0.0 && xi < 1.0)) throw InvalidArgument("transient_eigenvalue: interface must lie in (0, 1)");
  if (branch < 0) throw InvalidArgument("transient_eigenvalue: negative branch");
  if (lambda_max <= 0.0) lambda_max = 400.0 * std::max(kappa1, kappa2);
  // Root `branch` needs branch + 1 poles beyond it; widen the scan if the default is too small.
  auto brackets = detail::eigen_brackets(kappa1, kappa2, xi, lambda_max);
  if (static_cast<int>(brackets.size()) <= branch) {
    throw NumericalFailure("transient_eigenvalue: branch " + std::to_string(branch) + " not bracketed in (0, " +
                           std::to_string(lambda_max) + "]");
  }
  return detail::bisect_bracket(brackets[static_cast<std::size_t>(branch)], kappa1, kappa2, xi);
}

// The first `count` eigenvalues in increasing order.
inline std::vector<double> transient_eigenvalues(double kappa1, double kappa2, double xi, int count) {
  const double pi = std::numbers::pi;
  double lambda_max = std::max(kappa1, kappa2) * std::pow((count + 2) * pi / std::min(xi, 1.0 - xi), 2);
  auto brackets = detail::eigen_brackets(kappa1, kappa2, xi, lambda_max);
  if (static_cast<int>(brackets.size()) < count) throw NumericalFailure("transient_eigenvalues: scan too short");
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(count));
  for (int n = 0; n < count; ++n) out.push_back(detail::bisect_bracket(brackets[static_cast<std::size_t>(n)], kappa1, kappa2, xi));
  return out;
}

// Eigenfunction continued from the left subdomain in a form with no
// division by sin(alpha_2 (1 - xi)); coincides with r sin(alpha_2 (1 - x)) when that is nonzero.
struct Eigenfunction {
  double kappa1 = 1.0, kappa2 = 1.0, xi = 0.5, lambda = 0.0;
  double a1 = 0.0, a2 = 0.0, v = 0.0, flux = 0.0;

  Eigenfunction() = default;
  Eigenfunction(double k1, double k2, double x, double lam) : kappa1(k1), kappa2(k2), xi(x), lambda(lam) {
    a1 = std::sqrt(lam / k1);
    a2 = std::sqrt(lam / k2);
    v = std::sin(a1 * xi);
    flux = k1 * a1 * std::cos(a1 * xi);
  }
  double operator()(double x) const {
    if (x <= xi) return std::sin(a1 * x);
    return v * std::cos(a2 * (x - xi)) + flux / (kappa2 * a2) * std::sin(a2 * (x - xi));
  }
  double derivative(double x) const {
    if (x <= xi) return a1 * std::cos(a1 * x);
    return -v * a2 * std::sin(a2 * (x - xi)) + flux / kappa2 * std::cos(a2 * (x - xi));
  }
};

struct TwoDomainSolution {
  double kappa1 = 1.0, kappa2 = 1.0, xi = 0.5, f = 0.0, u_right = 0.0;
  SteadyCoefficients steady;
  double lambda = 0.0, alpha1 = 0.0, alpha2 = 0.0, r = 0.0;

  static TwoDomainSolution make(double kappa1, double kappa2, double xi, double f, double u_right, int branch = 0) {
    TwoDomainSolution s;
    s.kappa1 = kappa1;
    s.kappa2 = kappa2;
    s.xi = xi;
    s.f = f;
    s.u_right = u_right;
    s.steady = steady_coefficients(kappa1, kappa2, xi, f, u_right);
    s.lambda = transient_eigenvalue(kappa1, kappa2, xi, branch);
    s.alpha1 = std::sqrt(s.lambda / kappa1);
    s.alpha2 = std::sqrt(s.lambda / kappa2);
    s.r = std::sin(s.alpha1 * xi) / std::sin(s.alpha2 * (1.0 - xi));
    return s;
  }

  bool left(double x) const { return x <= xi; }
  double kappa_at(double x) const { return left(x) ? kappa1 : kappa2; }

  double steady_value(double x) const {
    return left(x) ? -f * x * x / (2.0 * kappa1) + steady.A1 * x
                   : -f * x * x / (2.0 * kappa2) + steady.A2 * x + steady.B2;
  }
  double steady_derivative(double x) const {
    return left(x) ? -f * x / kappa1 + steady.A1 : -f * x / kappa2 + steady.A2;
  }
  double w(double x) const { return left(x) ? std::sin(alpha1 * x) : r * std::sin(alpha2 * (1.0 - x)); }
  double w_derivative(double x) const {
    return left(x) ? alpha1 * std::cos(alpha1 * x) : -r * alpha2 * std::cos(alpha2 * (1.0 - x));
  }

  double operator()(double x, double t) const { return steady_value(x) + std::exp(-lambda * t) * w(x); }
  double u_x(double x, double t) const { return steady_derivative(x) + std::exp(-lambda * t) * w_derivative(x); }
  double u_t(double x, double t) const { return -lambda * std::exp(-lambda * t) * w(x); }
  double u_xx(double x, double t) const {
    return -f / kappa_at(x) - std::exp(-lambda * t) * w(x) * lambda / kappa_at(x);
  }
  // One-sided values at the interface.
  double value_left(double t) const {
    return -f * xi * xi / (2.0 * kappa1) + steady.A1 * xi + std::exp(-lambda * t) * std::sin(alpha1 * xi);
  }
  double value_right(double t) const {
    return -f * xi * xi / (2.0 * kappa2) + steady.A2 * xi + steady.B2 +
           std::exp(-lambda * t) * r * std::sin(alpha2 * (1.0 - xi));
  }
  double flux_left(double t) const {
    return kappa1 * (-f * xi / kappa1 + steady.A1 + std::exp(-lambda * t) * alpha1 * std::cos(alpha1 * xi));
  }
  double flux_right(double t) const {
    return kappa2 * (-f * xi / kappa2 + steady.A2 - std::exp(-lambda * t) * r * alpha2 * std::cos(alpha2 * (1.0 - xi)));
  }
};

inline double evaluate_solution(const TwoDomainSolution& s, double x, double t) { return s(x, t); }

namespace detail {

// Composite Gauss-Legendre rule on [a, b].
struct Quadrature {
  std::vector<double> x, w;
};

inline Quadrature composite_gauss(double a, double b, int panels) {
  static const double gx[8] = {-0.9602898564975363, -0.7966664774136267, -0.5255324099163290, -0.1834346424956498,
                               0.1834346424956498,  0.5255324099163290,  0.7966664774136267,  0.9602898564975363};
  static const double gw[8] = {0.1012285362903763, 0.2223810344533745, 0.3137066458778873, 0.3626837833783620,
                               0.3626837833783620, 0.3137066458778873, 0.2223810344533745, 0.1012285362903763};
  Quadrature q;
  const double h = (b - a) / panels;
  for (int p = 0; p < panels; ++p) {
    const double c = a + (p + 0.5) * h;
    for (int i = 0; i < 8; ++i) {
      q.x.push_back(c + 0.5 * h * gx[i]);
      q.w.push_back(0.5 * h * gw[i]);
    }
  }
  return q;
}

}  // namespace detail

// Space-time integral of u^2 over [0,1] x [0,T] for the two-domain problem
// with an arbitrary initial state u0, by eigenfunction expansion.
struct SeriesOptions {
  int modes = 300;
  int panels = 0;  // per subdomain; 0 picks 2 * modes + 64
};

inline double two_domain_objective(double kappa1, double kappa2, double xi, double f, double u_right,
                                   double final_time, const std::function<double(double)>& u0,
                                   const SeriesOptions& options = {}) {
  const SteadyCoefficients sc = steady_coefficients(kappa1, kappa2, xi, f, u_right);
  TwoDomainSolution base;
  base.kappa1 = kappa1;
  base.kappa2 = kappa2;
  base.xi = xi;
  base.f = f;
  base.u_right = u_right;
  base.steady = sc;

  const int panels = options.panels > 0 ? options.panels : 2 * options.modes + 64;
  detail::Quadrature q = detail::composite_gauss(0.0, xi, panels);
  const detail::Quadrature q2 = detail::composite_gauss(xi, 1.0, panels);
  q.x.insert(q.x.end(), q2.x.begin(), q2.x.end());
  q.w.insert(q.w.end(), q2.w.begin(), q2.w.end());
  const std::size_t m = q.x.size();

  std::vector<double> us(m), d(m);
  double steady_norm = 0.0;
  for (std::size_t i = 0; i < m; ++i) {
    us[i] = base.steady_value(q.x[i]);
    d[i] = u0(q.x[i]) - us[i];
    steady_norm += q.w[i] * us[i] * us[i];
  }

  const std::vector<double> lambdas = transient_eigenvalues(kappa1, kappa2, xi, options.modes);
  double j = final_time * steady_norm;
  for (double lam : lambdas) {
    const Eigenfunction wn(kappa1, kappa2, xi, lam);
    double ww = 0.0, dw = 0.0, sw = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
      const double v = wn(q.x[i]);
      ww += q.w[i] * v * v;
      dw += q.w[i] * d[i] * v;
      sw += q.w[i] * us[i] * v;
    }
    const double c = dw / ww;
    j += 2.0 * c * sw * (-std::expm1(-lam * final_time)) / lam;
    j += c * c * ww * (-std::expm1(-2.0 * lam * final_time)) / (2.0 * lam);
  }
  return j;
}

}  // namespace stheat
