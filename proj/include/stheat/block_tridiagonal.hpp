#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"

namespace stheat {

// Off-diagonal block. When `low_rank` holds (U, V), the block equals U V^T;
// the dense form is always kept as well.
struct Coupling {
  Matrix dense;
  std::optional<std::pair<Matrix, Matrix>> low_rank;

  static Coupling from_dense(Matrix m) { return {std::move(m), std::nullopt}; }
  static Coupling from_factors(Matrix u, Matrix v) {
    Matrix d = u * v.transpose();
    return {std::move(d), std::make_pair(std::move(u), std::move(v))};
  }

  Coupling transposed() const {
    if (low_rank) return {dense.transpose(), std::make_pair(low_rank->second, low_rank->first)};
    return {dense.transpose(), std::nullopt};
  }

  Vector apply(const Eigen::Ref<const Vector>& x) const {
    if (low_rank) return low_rank->first * (low_rank->second.transpose() * x);
    return dense * x;
  }
};

// K x K block-tridiagonal matrix with square N x N blocks.
// upper[k] sits in block row k, column k+1; lower[k] in block row k+1, column k.
struct BlockTridiagonal {
  std::vector<Matrix> diag;
  std::vector<Coupling> upper;
  std::vector<Coupling> lower;

  std::size_t blocks() const noexcept { return diag.size(); }
  Index block_size() const noexcept { return diag.empty() ? 0 : diag.front().rows(); }
  Index size() const noexcept { return static_cast<Index>(blocks()) * block_size(); }

  void validate() const {
    const std::size_t k = blocks();
    if (k == 0) throw InvalidArgument("BlockTridiagonal: no blocks");
    if (upper.size() != k - 1 || lower.size() != k - 1) {
      throw InvalidArgument("BlockTridiagonal: expected " + std::to_string(k - 1) + " off-diagonal blocks");
    }
    const Index n = block_size();
    for (const auto& d : diag) {
      if (d.rows() != n || d.cols() != n) throw InvalidArgument("BlockTridiagonal: diagonal block shape mismatch");
    }
    for (std::size_t i = 0; i + 1 < k; ++i) {
      if (upper[i].dense.rows() != n || upper[i].dense.cols() != n || lower[i].dense.rows() != n ||
          lower[i].dense.cols() != n) {
        throw InvalidArgument("BlockTridiagonal: off-diagonal block shape mismatch");
      }
    }
  }

  Vector multiply(const Vector& x) const {
    if (x.size() != size()) throw InvalidArgument("BlockTridiagonal::multiply: dimension mismatch");
    const Index n = block_size();
    Vector y(size());
    for (std::size_t k = 0; k < blocks(); ++k) {
      const Index r = static_cast<Index>(k) * n;
      y.segment(r, n) = diag[k] * x.segment(r, n);
      if (k + 1 < blocks()) y.segment(r, n) += upper[k].apply(x.segment(r + n, n));
      if (k > 0) y.segment(r, n) += lower[k - 1].apply(x.segment(r - n, n));
    }
    return y;
  }

  BlockTridiagonal transposed() const {
    BlockTridiagonal t;
    t.diag.reserve(blocks());
    for (const auto& d : diag) t.diag.emplace_back(d.transpose());
    // (A^T) upper block k = (lower block k)^T and vice versa.
    for (const auto& c : lower) t.upper.push_back(c.transposed());
    for (const auto& b : upper) t.lower.push_back(b.transposed());
    return t;
  }

  Matrix to_dense() const {
    const Index n = block_size();
    Matrix m = Matrix::Zero(size(), size());
    for (std::size_t k = 0; k < blocks(); ++k) {
      const Index r = static_cast<Index>(k) * n;
      m.block(r, r, n, n) = diag[k];
      if (k + 1 < blocks()) {
        m.block(r, r + n, n, n) = upper[k].dense;
        m.block(r + n, r, n, n) = lower[k].dense;
      }
    }
    return m;
  }

  // Exact 1-norm (maximum absolute column sum).
  double norm1() const {
    double best = 0.0;
    for (std::size_t k = 0; k < blocks(); ++k) {
      Vector col = diag[k].cwiseAbs().colwise().sum().transpose();
      if (k > 0) col += upper[k - 1].dense.cwiseAbs().colwise().sum().transpose();
      if (k + 1 < blocks()) col += lower[k].dense.cwiseAbs().colwise().sum().transpose();
      best = std::max(best, col.maxCoeff());
    }
    return best;
  }
};

}  // namespace stheat
