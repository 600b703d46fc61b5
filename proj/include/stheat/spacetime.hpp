#pragma once

// Tensor-product space-time operators for one element [a_k, b_k] x [0, T].
// Nodes are stacked space-fastest: index = j * (N_x + 1) + i for time level j
// and spatial node i, so every Kronecker product reads (time) ⊗ (space).

#include <cstddef>
#include <string>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"
#include "stheat/sbp.hpp"

namespace stheat {

enum class Face { west, east, south, north };

struct GridLayout {
  Index nx = 0;  // spatial nodes per element
  Index nt = 0;  // temporal nodes

  Index size() const noexcept { return nx * nt; }
  Index index(Index i, Index j) const noexcept { return j * nx + i; }
  Index space_of(Index idx) const noexcept { return idx % nx; }
  Index time_of(Index idx) const noexcept { return idx / nx; }
};

struct SpaceTimeElementOps {
  SbpOperator1D op_x;
  SbpOperator1D op_t;
  GridLayout layout;

  // Dense caches; left empty when built with materialize = false.
  Matrix P, Qx, Qt, Dx, Dt, Ex, Et;
  Matrix Rw, Re, Rs, Rn;

  bool materialized() const noexcept { return P.size() > 0; }

  Index size() const noexcept { return layout.size(); }
  // Node coordinates under the stacking convention.
  Vector x_coordinates() const { return kron(Vector::Ones(layout.nt), op_x.nodes); }
  Vector t_coordinates() const { return kron(op_t.nodes, Vector::Ones(layout.nx)); }
};

inline constexpr Index kDefaultMaxElementNodes = 100000;

inline SpaceTimeElementOps build_element_ops(const SbpOperator1D& op_x, const SbpOperator1D& op_t,
                                             Index max_nodes = kDefaultMaxElementNodes,
                                             bool materialize = true) {
  SpaceTimeElementOps ops;
  ops.layout = {op_x.size(), op_t.size()};
  const Index n = ops.layout.size();
  if (n > max_nodes) {
    throw ResourceLimit("build_element_ops: " + std::to_string(n) + " nodes exceeds the cap of " +
                        std::to_string(max_nodes));
  }
  ops.op_x = op_x;
  ops.op_t = op_t;
  if (!materialize) return ops;

  const Index nx = op_x.size();
  const Index nt = op_t.size();
  const Matrix ix = Matrix::Identity(nx, nx);
  const Matrix it = Matrix::Identity(nt, nt);
  const Matrix px = op_x.P();
  const Matrix pt = op_t.P();

  ops.P = kron(pt, px);
  ops.Qx = kron(pt, op_x.Q);
  ops.Qt = kron(op_t.Q, px);
  ops.Dx = kron(it, op_x.D);
  ops.Dt = kron(op_t.D, ix);

  const Matrix ew = unit_vector(nx, 0).transpose();
  const Matrix ee = unit_vector(nx, nx - 1).transpose();
  const Matrix es = unit_vector(nt, 0).transpose();
  const Matrix en = unit_vector(nt, nt - 1).transpose();
  ops.Rw = kron(it, ew);
  ops.Re = kron(it, ee);
  ops.Rs = kron(es, ix);
  ops.Rn = kron(en, ix);

  ops.Ex = ops.Re.transpose() * pt * ops.Re - ops.Rw.transpose() * pt * ops.Rw;
  ops.Et = ops.Rn.transpose() * px * ops.Rn - ops.Rs.transpose() * px * ops.Rs;
  return ops;
}

// R_face * u, computed by index arithmetic rather than a dense product.
inline Vector restrict(Face face, const SpaceTimeElementOps& ops, const Vector& u) {
  const GridLayout& g = ops.layout;
  if (u.size() != g.size()) {
    throw InvalidArgument("restrict: vector of length " + std::to_string(u.size()) +
                          " does not match element size " + std::to_string(g.size()));
  }
  switch (face) {
    case Face::west:
    case Face::east: {
      const Index i = face == Face::west ? 0 : g.nx - 1;
      Vector out(g.nt);
      for (Index j = 0; j < g.nt; ++j) out(j) = u(g.index(i, j));
      return out;
    }
    case Face::south:
      return u.head(g.nx);
    case Face::north:
      return u.tail(g.nx);
  }
  throw InvalidArgument("restrict: unknown face");
}

}  // namespace stheat
