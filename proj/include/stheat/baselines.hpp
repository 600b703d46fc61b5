#pragma once

// Backward Euler in time with linear finite elements in space, solved either
// by sequential time stepping or as one all-at-once block lower-bidiagonal
// system, with the discrete adjoint of the time-stepping scheme.

#include <cmath>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"
#include "stheat/problem.hpp"

namespace stheat {

struct FeDiscretization {
  Vector x;        // K + 1 nodes
  Vector h;        // element lengths
  Vector rho;
  Vector kappa;
  Vector dkappa;
  Matrix M;        // consistent mass, all nodes
  Matrix K;        // stiffness, all nodes
  std::vector<Index> free;       // unknown nodes
  std::vector<Index> dirichlet;  // eliminated nodes
  std::vector<BoundaryCondition> dirichlet_data;

  Index nodes() const noexcept { return x.size(); }
  Index free_count() const noexcept { return static_cast<Index>(free.size()); }
  std::size_t elements() const noexcept { return static_cast<std::size_t>(h.size()); }
};

namespace detail {

inline Matrix select(const Matrix& a, const std::vector<Index>& rows, const std::vector<Index>& cols) {
  Matrix out(static_cast<Index>(rows.size()), static_cast<Index>(cols.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < cols.size(); ++j) out(static_cast<Index>(i), static_cast<Index>(j)) = a(rows[i], cols[j]);
  }
  return out;
}

inline Vector select(const Vector& a, const std::vector<Index>& rows) {
  Vector out(static_cast<Index>(rows.size()));
  for (std::size_t i = 0; i < rows.size(); ++i) out(static_cast<Index>(i)) = a(rows[i]);
  return out;
}

}  // namespace detail

inline FeDiscretization fe_assemble(const ProblemSpec& spec, const Vector& rho) {
  spec.validate();
  const std::size_t kc = spec.elements;
  if (static_cast<std::size_t>(rho.size()) != kc) throw InvalidArgument("fe_assemble: design size mismatch");
  const auto edges = spec.element_edges();
  const Index n = static_cast<Index>(kc) + 1;

  FeDiscretization fe;
  fe.x = Eigen::Map<const Vector>(edges.data(), n);
  fe.h = spec.element_lengths();
  fe.rho = rho;
  fe.kappa = kappa(rho, spec.material);
  fe.dkappa = dkappa_drho(rho, spec.material);
  fe.M = Matrix::Zero(n, n);
  fe.K = Matrix::Zero(n, n);
  for (Index e = 0; e < static_cast<Index>(kc); ++e) {
    const double h = fe.h(e);
    const double k = fe.kappa(e) / h;
    fe.M(e, e) += h / 3.0;
    fe.M(e + 1, e + 1) += h / 3.0;
    fe.M(e, e + 1) += h / 6.0;
    fe.M(e + 1, e) += h / 6.0;
    fe.K(e, e) += k;
    fe.K(e + 1, e + 1) += k;
    fe.K(e, e + 1) -= k;
    fe.K(e + 1, e) -= k;
  }
  for (Index i = 0; i < n; ++i) {
    const bool west_d = i == 0 && spec.west.kind == BoundaryKind::dirichlet;
    const bool east_d = i == n - 1 && spec.east.kind == BoundaryKind::dirichlet;
    if (west_d || east_d) {
      fe.dirichlet.push_back(i);
      fe.dirichlet_data.push_back(west_d ? spec.west : spec.east);
    } else {
      fe.free.push_back(i);
    }
  }
  if (fe.free.empty()) throw InvalidArgument("fe_assemble: no free nodes");
  return fe;
}

// Load vector on all nodes at time t: M f(., t) plus Neumann fluxes.
inline Vector fe_load(const FeDiscretization& fe, const ProblemSpec& spec, double t) {
  const Index n = fe.nodes();
  Vector f(n);
  // Nodal source on the element's own side; at an interior node the two sides are averaged.
  for (Index i = 0; i < n; ++i) {
    if (i == 0) {
      f(i) = spec.source(fe.x(i), t, 0);
    } else if (i == n - 1) {
      f(i) = spec.source(fe.x(i), t, static_cast<std::size_t>(n - 2));
    } else {
      f(i) = 0.5 * (spec.source(fe.x(i), t, static_cast<std::size_t>(i - 1)) +
                    spec.source(fe.x(i), t, static_cast<std::size_t>(i)));
    }
  }
  Vector load = fe.M * f;
  if (spec.west.kind == BoundaryKind::neumann) load(0) -= spec.west.data(t);
  if (spec.east.kind == BoundaryKind::neumann) load(n - 1) += spec.east.data(t);
  return load;
}

inline Vector dirichlet_values(const FeDiscretization& fe, double t) {
  Vector g(static_cast<Index>(fe.dirichlet.size()));
  for (std::size_t i = 0; i < fe.dirichlet.size(); ++i) g(static_cast<Index>(i)) = fe.dirichlet_data[i].data(t);
  return g;
}

struct MarchingSolution {
  Matrix states;  // all nodes x (steps + 1), column n is time level n
  double dt = 0.0;
  std::size_t steps = 0;
  long long unknowns = 0;  // size of the linear system solved

  Vector level(std::size_t n) const { return states.col(static_cast<Index>(n)); }
};

inline Vector fe_initial(const FeDiscretization& fe, const ProblemSpec& spec) {
  Vector u0(fe.nodes());
  for (Index i = 0; i < fe.nodes(); ++i) u0(i) = spec.initial(fe.x(i));
  const Vector g = dirichlet_values(fe, 0.0);
  for (std::size_t i = 0; i < fe.dirichlet.size(); ++i) u0(fe.dirichlet[i]) = g(static_cast<Index>(i));
  return u0;
}

inline MarchingSolution be_march(const FeDiscretization& fe, const ProblemSpec& spec, std::size_t steps) {
  if (steps < 1) throw InvalidArgument("be_march: need at least one time step");
  const double dt = spec.final_time / static_cast<double>(steps);
  const auto& fr = fe.free;
  const auto& di = fe.dirichlet;
  const Matrix mff = detail::select(fe.M, fr, fr);
  const Matrix mfd = detail::select(fe.M, fr, di);
  const Matrix kfd = detail::select(fe.K, fr, di);
  const Matrix step = mff / dt + detail::select(fe.K, fr, fr);
  const Eigen::PartialPivLU<Matrix> lu(step);
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0)) {
    throw SingularSystem(0, "be_march: singular step matrix");
  }

  MarchingSolution sol;
  sol.dt = dt;
  sol.steps = steps;
  sol.unknowns = fe.free_count();
  sol.states.resize(fe.nodes(), static_cast<Index>(steps) + 1);
  sol.states.col(0) = fe_initial(fe, spec);
  Vector uf = detail::select(Vector(sol.states.col(0)), fr);
  Vector g_prev = dirichlet_values(fe, 0.0);
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = dt * static_cast<double>(n);
    const Vector g = dirichlet_values(fe, t);
    Vector rhs = mff * uf / dt + detail::select(fe_load(fe, spec, t), fr);
    if (!di.empty()) rhs -= kfd * g + mfd * (g - g_prev) / dt;
    uf = lu.solve(rhs);
    auto col = sol.states.col(static_cast<Index>(n));
    for (std::size_t i = 0; i < fr.size(); ++i) col(fr[i]) = uf(static_cast<Index>(i));
    for (std::size_t i = 0; i < di.size(); ++i) col(di[i]) = g(static_cast<Index>(i));
    g_prev = g;
  }
  return sol;
}

// All-at-once system over every node and every time level, including the
// initial level and Dirichlet rows:
//   level 0:        u^0 = q
//   level n >= 1:   (M/dt + K) u^n - (M/dt) u^{n-1} = F^n   (free rows)
//                   u^n_D = g_D(t^n)                        (Dirichlet rows)
// Stored in block form: one diagonal block for n >= 1, one sub-diagonal block.
struct AaoSystem {
  Matrix diagonal;   // nodes x nodes
  Matrix subdiagonal;
  Matrix rhs;        // nodes x (steps + 1)
  double dt = 0.0;
  std::size_t steps = 0;

  Index nodes() const noexcept { return diagonal.rows(); }
  long long unknowns() const noexcept { return static_cast<long long>(nodes()) * static_cast<long long>(steps + 1); }
  // Stored entries of the assembled matrix: identity level plus the two blocks per level.
  long long nonzeros() const {
    const long long per = (diagonal.array() != 0.0).count() + (subdiagonal.array() != 0.0).count();
    return static_cast<long long>(nodes()) + per * static_cast<long long>(steps);
  }

  // Full matrix-vector product, for checking the assembled system.
  Matrix multiply(const Matrix& u) const {
    Matrix y(u.rows(), u.cols());
    y.col(0) = u.col(0);
    for (Index n = 1; n < u.cols(); ++n) y.col(n) = diagonal * u.col(n) + subdiagonal * u.col(n - 1);
    return y;
  }
};

inline AaoSystem be_aao_assemble(const FeDiscretization& fe, const ProblemSpec& spec, std::size_t steps) {
  if (steps < 1) throw InvalidArgument("be_aao_assemble: need at least one time step");
  AaoSystem sys;
  sys.dt = spec.final_time / static_cast<double>(steps);
  sys.steps = steps;
  sys.diagonal = fe.M / sys.dt + fe.K;
  sys.subdiagonal = -fe.M / sys.dt;
  for (Index d : fe.dirichlet) {
    sys.diagonal.row(d).setZero();
    sys.diagonal(d, d) = 1.0;
    sys.subdiagonal.row(d).setZero();
  }
  sys.rhs.resize(fe.nodes(), static_cast<Index>(steps) + 1);
  sys.rhs.col(0) = fe_initial(fe, spec);
  for (std::size_t n = 1; n <= steps; ++n) {
    const double t = sys.dt * static_cast<double>(n);
    Vector b = fe_load(fe, spec, t);
    const Vector g = dirichlet_values(fe, t);
    for (std::size_t i = 0; i < fe.dirichlet.size(); ++i) b(fe.dirichlet[i]) = g(static_cast<Index>(i));
    sys.rhs.col(static_cast<Index>(n)) = b;
  }
  return sys;
}

// Block forward elimination of the all-at-once system.
inline MarchingSolution be_aao_solve(const AaoSystem& sys) {
  const Eigen::PartialPivLU<Matrix> lu(sys.diagonal);
  if (!(lu.matrixLU().diagonal().cwiseAbs().minCoeff() > 0.0)) {
    throw SingularSystem(0, "be_aao_solve: singular diagonal block");
  }
  MarchingSolution sol;
  sol.dt = sys.dt;
  sol.steps = sys.steps;
  sol.unknowns = sys.unknowns();
  sol.states.resize(sys.nodes(), static_cast<Index>(sys.steps) + 1);
  sol.states.col(0) = sys.rhs.col(0);
  for (Index n = 1; n <= static_cast<Index>(sys.steps); ++n) {
    sol.states.col(n) = lu.solve(Vector(sys.rhs.col(n) - sys.subdiagonal * sol.states.col(n - 1)));
  }
  return sol;
}

inline MarchingSolution be_aao_solve(const FeDiscretization& fe, const ProblemSpec& spec, std::size_t steps) {
  return be_aao_solve(be_aao_assemble(fe, spec, steps));
}

// J = sum_{n >= 1} dt u^n^T M u^n
inline double be_objective(const FeDiscretization& fe, const MarchingSolution& sol) {
  double j = 0.0;
  for (std::size_t n = 1; n <= sol.steps; ++n) {
    const auto u = sol.states.col(static_cast<Index>(n));
    j += sol.dt * u.dot(fe.M * u);
  }
  return j;
}

struct BeAdjoint {
  Matrix lambda;  // free nodes x (steps + 1); column 0 unused
  Vector gradient;
  double objective = 0.0;
};

inline BeAdjoint be_adjoint_and_sensitivity(const FeDiscretization& fe, const MarchingSolution& sol) {
  const auto& fr = fe.free;
  const double dt = sol.dt;
  const Matrix mff = detail::select(fe.M, fr, fr);
  const Matrix step = mff / dt + detail::select(fe.K, fr, fr);
  const Eigen::PartialPivLU<Matrix> lu(step.transpose());
  const Index nf = fe.free_count();

  BeAdjoint out;
  out.objective = be_objective(fe, sol);
  out.lambda = Matrix::Zero(nf, static_cast<Index>(sol.steps) + 1);
  Vector next = Vector::Zero(nf);
  for (std::size_t n = sol.steps; n >= 1; --n) {
    const Vector mu = fe.M * sol.states.col(static_cast<Index>(n));
    const Vector rhs = mff.transpose() * next / dt + 2.0 * dt * detail::select(mu, fr);
    next = lu.solve(rhs);
    out.lambda.col(static_cast<Index>(n)) = next;
  }

  // dR^n/dkappa_e = dK_e u^n restricted to free rows, with dK_e = [1 -1; -1 1] / h_e.
  std::vector<Index> position(static_cast<std::size_t>(fe.nodes()), -1);
  for (std::size_t i = 0; i < fr.size(); ++i) position[static_cast<std::size_t>(fr[i])] = static_cast<Index>(i);
  const std::size_t kc = fe.elements();
  out.gradient = Vector::Zero(static_cast<Index>(kc));
  for (Index e = 0; e < static_cast<Index>(kc); ++e) {
    const Index a = position[static_cast<std::size_t>(e)];
    const Index b = position[static_cast<std::size_t>(e + 1)];
    double s = 0.0;
    for (std::size_t n = 1; n <= sol.steps; ++n) {
      const Index c = static_cast<Index>(n);
      const double jump = (sol.states(e, c) - sol.states(e + 1, c)) / fe.h(e);
      if (a >= 0) s += out.lambda(a, c) * jump;
      if (b >= 0) s -= out.lambda(b, c) * jump;
    }
    out.gradient(e) = -fe.dkappa(e) * s;
  }
  return out;
}

// L2(space-time) error sqrt(sum_{n >= 1} dt e^n^T M e^n) against an exact solution.
template <class Exact>
double be_l2_error(const FeDiscretization& fe, const MarchingSolution& sol, Exact&& exact) {
  double s = 0.0;
  Vector e(fe.nodes());
  for (std::size_t n = 1; n <= sol.steps; ++n) {
    const double t = sol.dt * static_cast<double>(n);
    for (Index i = 0; i < fe.nodes(); ++i) e(i) = sol.states(i, static_cast<Index>(n)) - exact(fe.x(i), t);
    s += sol.dt * e.dot(fe.M * e);
  }
  return std::sqrt(s);
}

enum class BeSolver { march, all_at_once };

struct BeEvaluation {
  double objective = 0.0;
  Vector gradient;
  long long dof = 0;
};

class BackwardEulerModel {
 public:
  BackwardEulerModel(ProblemSpec spec, std::size_t steps, BeSolver solver)
      : spec_(std::move(spec)), steps_(steps), solver_(solver) {
    spec_.validate();
    if (steps_ < 1) throw InvalidArgument("BackwardEulerModel: need at least one time step");
  }

  std::size_t design_size() const noexcept { return spec_.elements; }
  Vector element_volumes() const { return spec_.element_lengths(); }
  std::size_t steps() const noexcept { return steps_; }

  MarchingSolution forward(const FeDiscretization& fe) const {
    return solver_ == BeSolver::march ? be_march(fe, spec_, steps_) : be_aao_solve(fe, spec_, steps_);
  }

  double value(const Vector& rho) const {
    const FeDiscretization fe = fe_assemble(spec_, rho);
    return be_objective(fe, forward(fe));
  }

  BeEvaluation evaluate(const Vector& rho) const {
    const FeDiscretization fe = fe_assemble(spec_, rho);
    const MarchingSolution sol = forward(fe);
    BeAdjoint adj = be_adjoint_and_sensitivity(fe, sol);
    return {adj.objective, std::move(adj.gradient), sol.unknowns};
  }

 private:
  ProblemSpec spec_;
  std::size_t steps_;
  BeSolver solver_;
};

}  // namespace stheat
