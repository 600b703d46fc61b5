#pragma once

// One-dimensional summation-by-parts operators on Legendre-Gauss-Lobatto
// nodes: D = P^{-1} Q with Q + Q^T = diag(-1, 0, ..., 0, 1).

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"

namespace stheat {

struct LglRule {
  int n_nodes = 0;
  Vector nodes;    // ascending on [-1, 1], endpoints included
  Vector weights;  // positive, sum to 2
};

struct SbpOperator1D {
  double a = -1.0;
  double b = 1.0;
  Vector nodes;  // mapped onto [a, b]
  Matrix D;
  Vector p;      // diagonal of P
  Matrix Q;
  int degree = 0;

  Index size() const noexcept { return D.rows(); }
  Matrix P() const { return p.asDiagonal(); }
  // Boundary matrix diag(-1, 0, ..., 0, 1).
  Matrix E() const {
    Matrix e = Matrix::Zero(size(), size());
    e(0, 0) = -1.0;
    e(size() - 1, size() - 1) = 1.0;
    return e;
  }
  double p_first() const { return p(0); }
  double p_last() const { return p(size() - 1); }
  double length() const { return b - a; }
};

struct SbpReport {
  double accuracy = 0.0;      // monomial exactness up to the operator degree
  double sbp_identity = 0.0;  // max |Q + Q^T - E|
  double spd = 0.0;           // max(0, -min diag P)
};

namespace detail {

// Legendre polynomials P_{n} and P_{n-1} at x by the three-term recurrence.
template <class Real>
std::pair<Real, Real> legendre_pair(int n, Real x) {
  Real prev = 1;
  if (n == 0) return {Real(1), Real(0)};
  Real cur = x;
  for (int k = 2; k <= n; ++k) {
    const Real next = ((2 * k - 1) * x * cur - (k - 1) * prev) / k;
    prev = cur;
    cur = next;
  }
  return {cur, prev};
}

}  // namespace detail

inline LglRule lgl_rule(int n_nodes) {
  if (n_nodes < 2) {
    throw InvalidArgument("lgl_rule: need at least 2 nodes, got " + std::to_string(n_nodes));
  }
  using Real = long double;
  constexpr int max_iterations = 100;
  constexpr Real tolerance = 1e-15L;
  const int degree = n_nodes - 1;

  // Newton on (1 - x^2) P'_N(x) written via the identity
  // (1 - x^2) P'_N = N (P_{N-1} - x P_N); step = (x P_N - P_{N-1}) / ((N + 1) P_N).
  // Carried out in extended precision so the rounded nodes are correctly rounded.
  std::vector<Real> x(static_cast<std::size_t>(n_nodes));
  const Real pi = 3.141592653589793238462643383279502884L;
  for (int i = 0; i < n_nodes; ++i) x[static_cast<std::size_t>(i)] = -std::cos(pi * i / degree);

  bool converged = false;
  for (int it = 0; it < max_iterations && !converged; ++it) {
    Real max_step = 0;
    for (int i = 1; i < degree; ++i) {
      Real& xi = x[static_cast<std::size_t>(i)];
      const auto [pn, pnm1] = detail::legendre_pair<Real>(degree, xi);
      const Real step = (xi * pn - pnm1) / ((degree + 1) * pn);
      xi -= step;
      max_step = std::max(max_step, std::abs(step));
    }
    converged = max_step <= tolerance;
  }
  if (!converged) {
    throw NumericalFailure("lgl_rule: Newton iteration did not converge for n_nodes=" +
                           std::to_string(n_nodes));
  }

  x.front() = -1;
  x.back() = 1;
  for (int i = 0; i < n_nodes / 2; ++i) {
    const auto lo = static_cast<std::size_t>(i), hi = static_cast<std::size_t>(degree - i);
    const Real sym = (x[hi] - x[lo]) / 2;
    x[lo] = -sym;
    x[hi] = sym;
  }
  if (n_nodes % 2 == 1) x[static_cast<std::size_t>(n_nodes / 2)] = 0;

  Vector nodes(n_nodes), w(n_nodes);
  for (int i = 0; i < n_nodes; ++i) {
    const Real xi = x[static_cast<std::size_t>(i)];
    const Real pn = detail::legendre_pair<Real>(degree, xi).first;
    nodes(i) = static_cast<double>(xi);
    w(i) = static_cast<double>(2 / (Real(n_nodes) * (n_nodes - 1) * pn * pn));
  }
  return {n_nodes, std::move(nodes), std::move(w)};
}

// Barycentric Lagrange differentiation matrix; diagonal by negative row sums.
// Accumulated in extended precision and rounded once.
inline Matrix lagrange_differentiation(const Vector& x) {
  using Real = long double;
  const Index n = x.size();
  std::vector<Real> bary(static_cast<std::size_t>(n), 1);
  for (Index j = 0; j < n; ++j) {
    Real& bj = bary[static_cast<std::size_t>(j)];
    for (Index i = 0; i < n; ++i) {
      if (i != j) bj *= static_cast<Real>(x(j)) - static_cast<Real>(x(i));
    }
    bj = 1 / bj;
  }
  Matrix d = Matrix::Zero(n, n);
  for (Index i = 0; i < n; ++i) {
    Real row_sum = 0;
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Real v = (bary[static_cast<std::size_t>(j)] / bary[static_cast<std::size_t>(i)]) /
                     (static_cast<Real>(x(i)) - static_cast<Real>(x(j)));
      d(i, j) = static_cast<double>(v);
      row_sum += v;
    }
    d(i, i) = static_cast<double>(-row_sum);
  }
  return d;
}

inline SbpOperator1D build_sbp_1d(int n_nodes, double a, double b) {
  if (!(a < b)) throw InvalidArgument("build_sbp_1d: interval must satisfy a < b");
  const LglRule rule = lgl_rule(n_nodes);
  const double half = 0.5 * (b - a);

  SbpOperator1D op;
  op.a = a;
  op.b = b;
  op.nodes = (rule.nodes.array() + 1.0) * half + a;
  op.nodes(0) = a;
  op.nodes(n_nodes - 1) = b;
  op.D = lagrange_differentiation(rule.nodes) / half;
  op.p = rule.weights * half;
  op.Q = op.p.asDiagonal() * op.D;
  op.degree = n_nodes - 1;
  return op;
}

inline SbpReport verify_sbp(const SbpOperator1D& op) {
  SbpReport report;
  const Index n = op.size();

  // Monomials in the normalized coordinate z = (x - mid) / half in [-1, 1];
  // exactness for these is exactness for all polynomials of the same degree.
  const double centre = 0.5 * (op.a + op.b);
  const double half = 0.5 * (op.b - op.a);
  const Vector z = (op.nodes.array() - centre) / half;
  for (int s = 0; s <= op.degree; ++s) {
    const Vector zs = z.array().pow(s);
    Vector dzs = Vector::Zero(n);
    if (s > 0) dzs = (s / half) * z.array().pow(s - 1);
    report.accuracy = std::max(report.accuracy, (op.D * zs - dzs).cwiseAbs().maxCoeff());
  }

  report.sbp_identity = (op.Q + op.Q.transpose() - op.E()).cwiseAbs().maxCoeff();
  report.spd = std::max(0.0, -op.p.minCoeff());
  return report;
}

}  // namespace stheat
