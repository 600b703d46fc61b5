#pragma once

// Block LU (block Thomas) for block-tridiagonal systems, with dense
// partially pivoted LU inside each pivot block and no pivoting across blocks.
//
// Forward sweep:  S_0 = A_0,  S_{k+1} = A_{k+1} - C_{k+1} S_k^{-1} B_k
// Solve:          z_k = S_k^{-1}(b_k - C_k z_{k-1}),  x_k = z_k - S_k^{-1} B_k x_{k+1}
//
// Low-rank couplings B_k = U V^T only need S_k^{-1} U, which keeps the
// sweep at O(N^2 r) per interface apart from the pivot LUs.

#include <cmath>
#include <cstddef>
#include <limits>
#include <string>
#include <vector>

#include "stheat/block_tridiagonal.hpp"
#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"

namespace stheat {

class BlockTriFactorization {
 public:
  BlockTriFactorization(const BlockTridiagonal& m, bool transpose) : transpose_(transpose) {
    m.validate();
    if (transpose) {
      build(m.transposed());
    } else {
      build(m);
    }
  }

  std::size_t blocks() const noexcept { return pivots_.size(); }
  Index block_size() const noexcept { return n_; }
  bool transposed() const noexcept { return transpose_; }

  Vector solve(const Vector& rhs) const {
    const Index n = n_;
    const std::size_t k_count = blocks();
    if (rhs.size() != static_cast<Index>(k_count) * n) {
      throw InvalidArgument("BlockTriFactorization::solve: rhs length " + std::to_string(rhs.size()) +
                            " != " + std::to_string(static_cast<Index>(k_count) * n));
    }
    Vector x(rhs.size());
    for (std::size_t k = 0; k < k_count; ++k) {
      const Index r = static_cast<Index>(k) * n;
      Vector t = rhs.segment(r, n);
      if (k > 0) t -= lower_[k - 1].apply(x.segment(r - n, n));
      x.segment(r, n) = pivots_[k].solve(t);
    }
    for (std::size_t k = k_count - 1; k-- > 0;) {
      const Index r = static_cast<Index>(k) * n;
      const auto next = x.segment(r + n, n);
      if (right_factor_[k].size() > 0) {
        x.segment(r, n) -= elim_[k] * (right_factor_[k].transpose() * next);
      } else {
        x.segment(r, n) -= elim_[k] * next;
      }
    }
    return x;
  }

  BlockVector solve(const BlockVector& rhs) const {
    return {rhs.blocks(), rhs.block_size(), solve(rhs.data())};
  }

 private:
  void build(const BlockTridiagonal& m) {
    n_ = m.block_size();
    const std::size_t k_count = m.blocks();
    pivots_.reserve(k_count);
    elim_.resize(k_count > 0 ? k_count - 1 : 0);
    right_factor_.resize(elim_.size());
    lower_ = m.lower;

    Matrix s = m.diag[0];
    for (std::size_t k = 0; k < k_count; ++k) {
      pivots_.emplace_back(s);
      check_pivot(k);
      if (k + 1 == k_count) break;
      const Coupling& b = m.upper[k];
      const Coupling& c = m.lower[k];
      if (b.low_rank) {
        elim_[k] = pivots_[k].solve(b.low_rank->first);
        right_factor_[k] = b.low_rank->second;
        s = m.diag[k + 1];
        s.noalias() -= (c.dense * elim_[k]) * right_factor_[k].transpose();
      } else {
        elim_[k] = pivots_[k].solve(b.dense);
        s = m.diag[k + 1];
        s.noalias() -= c.dense * elim_[k];
      }
    }
  }

  void check_pivot(std::size_t k) const {
    const auto diag = pivots_[k].matrixLU().diagonal();
    const double smallest = diag.cwiseAbs().minCoeff();
    if (!(smallest > 0.0) || !std::isfinite(diag.cwiseAbs().maxCoeff())) {
      throw SingularSystem(k, "block factorization: pivot block of element " + std::to_string(k) +
                                  " is singular");
    }
  }

  bool transpose_ = false;
  Index n_ = 0;
  std::vector<Eigen::PartialPivLU<Matrix>> pivots_;
  std::vector<Matrix> elim_;          // S_k^{-1} B_k, or S_k^{-1} U_k for low-rank B_k
  std::vector<Matrix> right_factor_;  // V_k for low-rank B_k, empty otherwise
  std::vector<Coupling> lower_;
};

inline BlockTriFactorization factor(const BlockTridiagonal& m, bool transpose = false) {
  return BlockTriFactorization(m, transpose);
}

inline Vector solve(const BlockTriFactorization& f, const Vector& rhs) { return f.solve(rhs); }

// Hager-Higham estimate of the 1-norm condition number ||A||_1 ||A^{-1}||_1.
// Returns +inf when a pivot block is singular.
inline double condition_estimate(const BlockTridiagonal& m, int max_iterations = 5) {
  try {
    const BlockTriFactorization fwd(m, false);
    const BlockTriFactorization adj(m, true);
    const Index n = m.size();
    Vector x = Vector::Constant(n, 1.0 / static_cast<double>(n));
    double estimate = 0.0;
    Index last_j = -1;
    for (int it = 0; it < max_iterations; ++it) {
      const Vector y = fwd.solve(x);
      estimate = std::max(estimate, y.lpNorm<1>());
      Vector sign = y.unaryExpr([](double v) { return v >= 0.0 ? 1.0 : -1.0; });
      const Vector z = adj.solve(sign);
      Index j = 0;
      const double zmax = z.cwiseAbs().maxCoeff(&j);
      if (zmax <= z.dot(x) || j == last_j) break;
      last_j = j;
      x = unit_vector(n, j);
    }
    if (!std::isfinite(estimate)) return std::numeric_limits<double>::infinity();
    return m.norm1() * estimate;
  } catch (const SingularSystem&) {
    return std::numeric_limits<double>::infinity();
  }
}

}  // namespace stheat
