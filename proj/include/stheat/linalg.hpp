#pragma once

#include <Eigen/Dense>

#include <cstddef>
#include <vector>

namespace stheat {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Dense Kronecker product a ⊗ b. With space-fastest stacking, time factors
// go on the left and space factors on the right.
inline Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

inline Vector unit_vector(Index n, Index i) {
  Vector e = Vector::Zero(n);
  e(i) = 1.0;
  return e;
}

// A block vector stored as one contiguous array of K blocks of equal size.
class BlockVector {
 public:
  BlockVector() = default;
  BlockVector(std::size_t blocks, Index block_size)
      : blocks_(blocks), block_size_(block_size), data_(Vector::Zero(static_cast<Index>(blocks) * block_size)) {}
  BlockVector(std::size_t blocks, Index block_size, Vector data)
      : blocks_(blocks), block_size_(block_size), data_(std::move(data)) {}

  std::size_t blocks() const noexcept { return blocks_; }
  Index block_size() const noexcept { return block_size_; }
  Index size() const noexcept { return data_.size(); }

  auto block(std::size_t k) { return data_.segment(static_cast<Index>(k) * block_size_, block_size_); }
  auto block(std::size_t k) const { return data_.segment(static_cast<Index>(k) * block_size_, block_size_); }

  Vector& data() noexcept { return data_; }
  const Vector& data() const noexcept { return data_; }

 private:
  std::size_t blocks_ = 0;
  Index block_size_ = 0;
  Vector data_;
};

}  // namespace stheat
