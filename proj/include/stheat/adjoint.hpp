#pragma once

// Objective J = u^T P u, the discrete adjoint A^T Lambda = 2 P u, and the
// design sensitivities dJ/drho_k = -Lambda^T (dA/drho_k) u.

#include <cstddef>
#include <memory>
#include <string>

#include "stheat/block_solver.hpp"
#include "stheat/discretization.hpp"
#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"
#include "stheat/problem.hpp"

namespace stheat {

struct AdjointSolution {
  BlockVector lambda;
  double objective = 0.0;
};

inline double objective(const BlockVector& u, const DiscretizationParts& parts) {
  if (u.blocks() != parts.blocks() || u.block_size() != parts.block_size()) {
    throw InvalidArgument("objective: state does not match the discretization");
  }
  double j = 0.0;
  for (std::size_t k = 0; k < parts.blocks(); ++k) {
    j += u.block(k).dot(parts.elements[k].norm.cwiseProduct(u.block(k)));
  }
  return j;
}

inline double objective(const BlockVector& u, const GlobalSystem& system) { return objective(u, *system.parts); }

inline AdjointSolution solve_adjoint(const GlobalSystem& system, const BlockVector& u) {
  const DiscretizationParts& parts = *system.parts;
  BlockVector rhs(parts.blocks(), parts.block_size());
  for (std::size_t k = 0; k < parts.blocks(); ++k) {
    rhs.block(k) = 2.0 * parts.elements[k].norm.cwiseProduct(u.block(k));
  }
  const BlockTriFactorization f(system.matrix, true);
  return {f.solve(rhs), objective(u, parts)};
}

// dJ/dkappa_k: the kappa-linear parts of every block touching element k.
inline Vector kappa_sensitivities(const GlobalSystem& system, const BlockVector& u, const BlockVector& lambda) {
  const DiscretizationParts& parts = *system.parts;
  const std::size_t kc = parts.blocks();
  if (u.size() != system.matrix.size() || lambda.size() != system.matrix.size()) {
    throw InvalidArgument("sensitivities: state or adjoint does not match the system");
  }
  Vector g(static_cast<Index>(kc));
  for (std::size_t k = 0; k < kc; ++k) {
    const ElementParts& el = parts.elements[k];
    const Vector& pt = el.ops.op_t.p;
    double s = detail::bilinear_time_diagonal(pt, el.diag_kappa, lambda.block(k), u.block(k));
    if (k + 1 < kc) {
      s += detail::bilinear_time_diagonal(pt, el.upper_self, lambda.block(k), u.block(k + 1));
      s += detail::bilinear_time_diagonal(pt, parts.elements[k + 1].lower_other, lambda.block(k + 1), u.block(k));
    }
    if (k > 0) {
      s += detail::bilinear_time_diagonal(pt, el.lower_self, lambda.block(k), u.block(k - 1));
      s += detail::bilinear_time_diagonal(pt, parts.elements[k - 1].upper_other, lambda.block(k - 1), u.block(k));
    }
    g(static_cast<Index>(k)) = -s;
  }
  return g;
}

inline Vector sensitivities(const GlobalSystem& system, const BlockVector& u, const BlockVector& lambda) {
  return kappa_sensitivities(system, u, lambda).cwiseProduct(dkappa_drho(system.rho, system.parts->spec.material));
}

struct Evaluation {
  double objective = 0.0;
  Vector gradient;
  Index dof = 0;
};

// Objective and gradient of the space-time spectral element model at a design.
class SpaceTimeModel {
 public:
  SpaceTimeModel(const ProblemSpec& spec, const SatCoefficients& sat) : parts_(make_parts(spec, sat)) {}
  explicit SpaceTimeModel(const ProblemSpec& spec)
      : SpaceTimeModel(spec, choose_sat_coefficients(spec)) {}

  const DiscretizationParts& parts() const noexcept { return *parts_; }
  std::size_t design_size() const noexcept { return parts_->blocks(); }
  Index dof() const noexcept { return static_cast<Index>(parts_->blocks()) * parts_->block_size(); }
  Vector element_volumes() const { return parts_->spec.element_lengths(); }

  GlobalSystem assemble(const Vector& rho) const { return assemble_global(parts_, rho); }

  BlockVector state(const Vector& rho) const { return solve_state(assemble(rho)); }

  double value(const Vector& rho) const {
    const GlobalSystem sys = assemble(rho);
    return objective(solve_state(sys), sys);
  }

  Evaluation evaluate(const Vector& rho) const {
    const GlobalSystem sys = assemble(rho);
    const BlockVector u = solve_state(sys);
    const AdjointSolution adj = solve_adjoint(sys, u);
    return {adj.objective, sensitivities(sys, u, adj.lambda), dof()};
  }

 private:
  std::shared_ptr<const DiscretizationParts> parts_;
};

}  // namespace stheat
