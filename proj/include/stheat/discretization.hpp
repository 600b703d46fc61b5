#pragma once

// Space-time SBP-SAT discretization of u_t = (kappa u_x)_x + f on K spatial
// elements and one temporal element, assembled as a block-tridiagonal system
// A(rho) u = b, with every row already multiplied by the element norm P.
//
// Every block has the form  kron(T, P_x) + kron(P_t, S)  with small spatial
// matrices S that are affine in the element diffusivities. The parts are
// kept separately so the design derivative of each block is available
// without re-assembly.

#include <cstddef>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "stheat/block_solver.hpp"
#include "stheat/block_tridiagonal.hpp"
#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"
#include "stheat/problem.hpp"
#include "stheat/sbp.hpp"
#include "stheat/spacetime.hpp"

namespace stheat {

struct SatCoefficients {
  double sigma0 = 1.0;   // initial condition
  double sigma_w = 0.0;  // Dirichlet, west boundary
  double sigma_e = 0.0;  // Dirichlet, east boundary
  double s = 0.5;
  double sigma1 = 0.0;   // interface jump, west side of an element
  double sigma3 = 0.0;   // interface jump, east side of an element
  double sigma2 = 0.5;
  double sigma4 = 1.5;
  double tau1 = -1.5;
  double tau2 = -0.5;

  // Sets (sigma2, sigma4, tau1, tau2) on the one-parameter stable family.
  void set_family(double s_value) {
    s = s_value;
    sigma2 = s_value;
    sigma4 = 1.0 + s_value;
    tau1 = -(1.0 + s_value);
    tau2 = -s_value;
  }

  // Sufficient stability conditions for the given end-element operators.
  bool satisfies_stability(const SbpOperator1D& first_x, const SbpOperator1D& last_x,
                           const MaterialModel& m) const {
    return sigma0 > 0.5 && sigma_w >= m.kappa_max / (2.0 * first_x.p_first()) &&
           sigma_e >= m.kappa_max / (2.0 * last_x.p_last()) && sigma1 == sigma3 && sigma1 > 0.0 &&
           s > 0.0 && sigma2 == s && sigma4 == 1.0 + s && tau1 == -(1.0 + s) && tau2 == -s;
  }
};

struct SatOptions {
  double sigma0 = 1.0;
  double s = 0.5;
  double safety = 1.0;
  std::optional<double> sigma_interface;  // default kappa_max / element length
};

inline SatCoefficients choose_sat_coefficients(const SbpOperator1D& op_x, const MaterialModel& m, double s,
                                               double safety, double sigma0 = 1.0,
                                               std::optional<double> sigma_interface = std::nullopt) {
  if (!(s > 0.0)) throw InvalidArgument("choose_sat_coefficients: s must be positive");
  if (!(safety >= 1.0)) throw InvalidArgument("choose_sat_coefficients: safety must be >= 1");
  SatCoefficients sat;
  sat.sigma0 = sigma0;
  sat.sigma_w = safety * m.kappa_max / (2.0 * op_x.p_first());
  sat.sigma_e = safety * m.kappa_max / (2.0 * op_x.p_last());
  sat.sigma1 = sigma_interface.value_or(m.kappa_max / op_x.length());
  sat.sigma3 = sat.sigma1;
  sat.set_family(s);
  return sat;
}

inline SatCoefficients choose_sat_coefficients(const ProblemSpec& spec, const SatOptions& options = {}) {
  const auto edges = spec.element_edges();
  const SbpOperator1D op_x = build_sbp_1d(spec.nx_nodes, edges[0], edges[1]);
  return choose_sat_coefficients(op_x, spec.material, options.s, options.safety, options.sigma0,
                                 options.sigma_interface);
}

// kappa-independent and kappa-linear spatial factors of one element's blocks.
struct ElementParts {
  SpaceTimeElementOps ops;  // 1D operators and layout; dense caches not materialized
  Matrix time_factor;       // Q_t + sigma0 e_s e_s^T, paired with P_x
  Matrix diag_fixed;        // S of the diagonal block, kappa-free part
  Matrix diag_kappa;        // S of the diagonal block, coefficient of kappa_k
  // Upper coupling (to element k+1): S = fixed + kappa_k * self + kappa_{k+1} * other
  Matrix upper_fixed, upper_self, upper_other;
  // Lower coupling (to element k-1): S = fixed + kappa_k * self + kappa_{k-1} * other
  Matrix lower_fixed, lower_self, lower_other;
  Vector rhs;               // b^(k); independent of the design
  Vector norm;              // diagonal of P = P_t ⊗ P_x
};

struct DiscretizationParts {
  ProblemSpec spec;
  SatCoefficients sat;
  std::vector<ElementParts> elements;

  std::size_t blocks() const noexcept { return elements.size(); }
  Index block_size() const noexcept { return elements.empty() ? 0 : elements.front().ops.size(); }
};

struct GlobalSystem {
  BlockTridiagonal matrix;
  BlockVector rhs;
  Vector rho;
  Vector kappa;
  std::shared_ptr<const DiscretizationParts> parts;

  std::size_t blocks() const noexcept { return matrix.blocks(); }
  Index block_size() const noexcept { return matrix.block_size(); }
  const ElementParts& element(std::size_t k) const { return parts->elements[k]; }
};

namespace detail {

// kron(P_t, S) applied to u without forming the product: columns of the
// reshaped u are time levels.
inline Vector apply_time_diagonal(const Vector& pt, const Matrix& s, const Eigen::Ref<const Vector>& u) {
  const Index nx = s.cols();
  const Index nt = pt.size();
  Eigen::Map<const Matrix> levels(u.data(), nx, nt);
  Matrix out = s * levels * pt.asDiagonal();
  return Eigen::Map<const Vector>(out.data(), out.size());
}

// lambda^T kron(P_t, S) u
inline double bilinear_time_diagonal(const Vector& pt, const Matrix& s, const Eigen::Ref<const Vector>& lambda,
                                     const Eigen::Ref<const Vector>& u) {
  const Index nx = s.cols();
  const Index nt = pt.size();
  Eigen::Map<const Matrix> ul(u.data(), nx, nt);
  Eigen::Map<const Matrix> ll(lambda.data(), s.rows(), nt);
  return (ll.cwiseProduct(s * ul) * pt).sum();
}

inline Matrix outer(const Vector& a, const Vector& b) { return a * b.transpose(); }

}  // namespace detail

inline DiscretizationParts build_parts(const ProblemSpec& spec, const SatCoefficients& sat) {
  spec.validate();
  const std::size_t kc = spec.elements;
  const auto edges = spec.element_edges();
  const SbpOperator1D op_t = build_sbp_1d(spec.nt_nodes, 0.0, spec.final_time);
  const Index nx = spec.nx_nodes;
  const Index nt = spec.nt_nodes;

  DiscretizationParts parts;
  parts.spec = spec;
  parts.sat = sat;
  parts.elements.resize(kc);

  std::vector<SbpOperator1D> op_x(kc);
  for (std::size_t k = 0; k < kc; ++k) op_x[k] = build_sbp_1d(spec.nx_nodes, edges[k], edges[k + 1]);

  const Vector ew = unit_vector(nx, 0);
  const Vector ee = unit_vector(nx, nx - 1);
  const Vector es = unit_vector(nt, 0);
  const Vector& pt = op_t.p;

  for (std::size_t k = 0; k < kc; ++k) {
    ElementParts& el = parts.elements[k];
    el.ops = build_element_ops(op_x[k], op_t, kDefaultMaxElementNodes, false);
    const Matrix& d = op_x[k].D;
    const Matrix& q = op_x[k].Q;
    const bool first = k == 0;
    const bool last = k + 1 == kc;

    el.time_factor = op_t.Q + sat.sigma0 * detail::outer(es, es);
    el.diag_fixed = Matrix::Zero(nx, nx);
    el.diag_kappa = -q * d;  // P_x D_x^2 = Q_x D_x

    // West face.
    if (first) {
      if (spec.west.kind == BoundaryKind::dirichlet) {
        el.diag_fixed += sat.sigma_w * detail::outer(ew, ew);
      } else {
        el.diag_kappa -= ew * (ew.transpose() * d);
      }
    } else {
      el.diag_fixed += sat.sigma1 * detail::outer(ew, ew);
      el.diag_kappa += sat.sigma2 * ew * (ew.transpose() * d) + sat.tau1 * (d.transpose() * ew) * ew.transpose();
      const Matrix& d_prev = op_x[k - 1].D;
      el.lower_fixed = -sat.sigma1 * detail::outer(ew, ee);
      el.lower_other = -sat.sigma2 * ew * (ee.transpose() * d_prev);
      el.lower_self = -sat.tau1 * (d.transpose() * ew) * ee.transpose();
    }

    // East face.
    if (last) {
      if (spec.east.kind == BoundaryKind::dirichlet) {
        el.diag_fixed += sat.sigma_e * detail::outer(ee, ee);
      } else {
        el.diag_kappa += ee * (ee.transpose() * d);
      }
    } else {
      el.diag_fixed += sat.sigma3 * detail::outer(ee, ee);
      el.diag_kappa += sat.sigma4 * ee * (ee.transpose() * d) + sat.tau2 * (d.transpose() * ee) * ee.transpose();
      const Matrix& d_next = op_x[k + 1].D;
      el.upper_fixed = -sat.sigma3 * detail::outer(ee, ew);
      el.upper_other = -sat.sigma4 * ee * (ew.transpose() * d_next);
      el.upper_self = -sat.tau2 * (d.transpose() * ee) * ew.transpose();
    }

    // Right-hand side: P f + sigma0 R_s^T P_x R_s q + boundary data.
    const GridLayout& g = el.ops.layout;
    const Vector& px = op_x[k].p;
    el.norm = kron(pt, px);
    el.rhs = Vector::Zero(g.size());
    for (Index j = 0; j < nt; ++j) {
      for (Index i = 0; i < nx; ++i) {
        el.rhs(g.index(i, j)) = el.norm(g.index(i, j)) * spec.source(op_x[k].nodes(i), op_t.nodes(j), k);
      }
    }
    for (Index i = 0; i < nx; ++i) {
      el.rhs(g.index(i, 0)) += sat.sigma0 * px(i) * spec.initial(op_x[k].nodes(i));
    }
    if (first) {
      for (Index j = 0; j < nt; ++j) {
        const double h = spec.west.data(op_t.nodes(j));
        el.rhs(g.index(0, j)) += spec.west.kind == BoundaryKind::dirichlet ? sat.sigma_w * pt(j) * h : -pt(j) * h;
      }
    }
    if (last) {
      for (Index j = 0; j < nt; ++j) {
        const double gv = spec.east.data(op_t.nodes(j));
        el.rhs(g.index(nx - 1, j)) += spec.east.kind == BoundaryKind::dirichlet ? sat.sigma_e * pt(j) * gv : pt(j) * gv;
      }
    }
  }
  return parts;
}

inline std::shared_ptr<const DiscretizationParts> make_parts(const ProblemSpec& spec, const SatCoefficients& sat) {
  return std::make_shared<const DiscretizationParts>(build_parts(spec, sat));
}

struct ElementBlocks {
  Matrix A;
  Vector b;
  std::optional<Coupling> B;  // couples to element k+1
  std::optional<Coupling> C;  // couples to element k-1
};

namespace detail {

// kron(P_t, e_a x^T + y e_b^T) as U V^T with U = kron(I_t, [e_a y]), V = kron(P_t, [x e_b]).
inline Coupling rank_two_coupling(const Vector& pt, const Vector& e_a, const Vector& x, const Vector& y,
                                  const Vector& e_b) {
  const Index nx = e_a.size();
  const Index nt = pt.size();
  Matrix us(nx, 2), vs(nx, 2);
  us << e_a, y;
  vs << x, e_b;
  Matrix u = Matrix::Zero(nx * nt, 2 * nt);
  Matrix v = Matrix::Zero(nx * nt, 2 * nt);
  for (Index j = 0; j < nt; ++j) {
    u.block(j * nx, 2 * j, nx, 2) = us;
    v.block(j * nx, 2 * j, nx, 2) = pt(j) * vs;
  }
  return Coupling::from_factors(std::move(u), std::move(v));
}

}  // namespace detail

inline ElementBlocks assemble_element(std::size_t k, const DiscretizationParts& parts, const Vector& kappas) {
  const std::size_t kc = parts.blocks();
  if (k >= kc) throw InvalidArgument("assemble_element: element index out of range");
  if (static_cast<std::size_t>(kappas.size()) != kc) {
    throw InvalidArgument("assemble_element: expected " + std::to_string(kc) + " diffusivities");
  }
  const ElementParts& el = parts.elements[k];
  const Vector& pt = el.ops.op_t.p;
  const Index nx = el.ops.layout.nx;
  const double kap = kappas(static_cast<Index>(k));

  ElementBlocks out;
  out.A = kron(el.time_factor, el.ops.op_x.P()) + kron(pt.asDiagonal().toDenseMatrix(), el.diag_fixed + kap * el.diag_kappa);
  out.b = el.rhs;

  const Vector ew = unit_vector(nx, 0);
  const Vector ee = unit_vector(nx, nx - 1);
  const SatCoefficients& sat = parts.sat;
  if (k + 1 < kc) {
    // S = e_e a^T + d e_w^T with a = -sigma3 e_w - sigma4 kappa_{k+1} D_{k+1}^T e_w, d = -tau2 kappa_k D_k^T e_e.
    const double kap_next = kappas(static_cast<Index>(k + 1));
    const Matrix& d_next = parts.elements[k + 1].ops.op_x.D;
    const Vector a = -sat.sigma3 * ew - sat.sigma4 * kap_next * (d_next.transpose() * ew);
    const Vector dv = -sat.tau2 * kap * (el.ops.op_x.D.transpose() * ee);
    out.B = detail::rank_two_coupling(pt, ee, a, dv, ew);
  }
  if (k > 0) {
    // S = e_w c^T + d e_e^T with c = -sigma1 e_e - sigma2 kappa_{k-1} D_{k-1}^T e_e, d = -tau1 kappa_k D_k^T e_w.
    const double kap_prev = kappas(static_cast<Index>(k - 1));
    const Matrix& d_prev = parts.elements[k - 1].ops.op_x.D;
    const Vector c = -sat.sigma1 * ee - sat.sigma2 * kap_prev * (d_prev.transpose() * ee);
    const Vector dv = -sat.tau1 * kap * (el.ops.op_x.D.transpose() * ew);
    out.C = detail::rank_two_coupling(pt, ew, c, dv, ee);
  }
  return out;
}

inline GlobalSystem assemble_global(std::shared_ptr<const DiscretizationParts> parts, const Vector& rho) {
  const std::size_t kc = parts->blocks();
  if (static_cast<std::size_t>(rho.size()) != kc) {
    throw InvalidArgument("assemble_global: design has " + std::to_string(rho.size()) + " entries, expected " +
                          std::to_string(kc));
  }
  GlobalSystem sys;
  sys.rho = rho;
  sys.kappa = kappa(rho, parts->spec.material);
  sys.rhs = BlockVector(kc, parts->block_size());
  sys.matrix.diag.reserve(kc);
  for (std::size_t k = 0; k < kc; ++k) {
    ElementBlocks blocks = assemble_element(k, *parts, sys.kappa);
    sys.matrix.diag.push_back(std::move(blocks.A));
    sys.rhs.block(k) = blocks.b;
    if (blocks.B) sys.matrix.upper.push_back(std::move(*blocks.B));
    if (blocks.C) sys.matrix.lower.push_back(std::move(*blocks.C));
  }
  sys.parts = std::move(parts);
  return sys;
}

inline GlobalSystem assemble_global(const ProblemSpec& spec, const Vector& rho, const SatCoefficients& sat) {
  return assemble_global(make_parts(spec, sat), rho);
}

inline Vector residual(const Vector& u, const GlobalSystem& system) {
  if (u.size() != system.matrix.size()) {
    throw InvalidArgument("residual: state length " + std::to_string(u.size()) + " != system size " +
                          std::to_string(system.matrix.size()));
  }
  return system.matrix.multiply(u) - system.rhs.data();
}

// Block elimination does not pivot across blocks, so its round-off grows with
// the block size. Two refinement sweeps against the exact residual bring the
// state back to the conditioning limit (about 1e-13 on the spectral test
// problems instead of a few 1e-12).
inline BlockVector solve_state(const GlobalSystem& system, int refinement_steps = 2) {
  const BlockTriFactorization f(system.matrix, false);
  Vector u = f.solve(system.rhs.data());
  for (int it = 0; it < refinement_steps; ++it) u -= f.solve(Vector(residual(u, system)));
  return BlockVector(system.blocks(), system.block_size(), std::move(u));
}

// Nodal samples of g(x, t) on every element, stacked like the state.
template <class Fn>
BlockVector sample(const DiscretizationParts& parts, Fn&& g) {
  BlockVector out(parts.blocks(), parts.block_size());
  for (std::size_t k = 0; k < parts.blocks(); ++k) {
    const auto& ops = parts.elements[k].ops;
    for (Index j = 0; j < ops.layout.nt; ++j) {
      for (Index i = 0; i < ops.layout.nx; ++i) {
        out.block(k)(ops.layout.index(i, j)) = g(ops.op_x.nodes(i), ops.op_t.nodes(j), k);
      }
    }
  }
  return out;
}

}  // namespace stheat
