#include <gtest/gtest.h>

#include <random>

#include "stheat/block_solver.hpp"

using namespace stheat;

namespace {

Matrix random_matrix(Index n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Matrix m(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) m(i, j) = d(gen);
  return m;
}

Vector random_vector(Index n, std::mt19937_64& gen) {
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  Vector v(n);
  for (Index i = 0; i < n; ++i) v(i) = d(gen);
  return v;
}

// Diagonally weighted random block-tridiagonal system; optionally with low-rank couplings.
BlockTridiagonal random_system(std::size_t k, Index n, std::mt19937_64& gen, Index rank = 0) {
  BlockTridiagonal m;
  for (std::size_t i = 0; i < k; ++i) {
    m.diag.push_back(random_matrix(n, gen) + (2.0 * n) * Matrix::Identity(n, n));
  }
  for (std::size_t i = 0; i + 1 < k; ++i) {
    for (int side = 0; side < 2; ++side) {
      Coupling c;
      if (rank > 0) {
        Matrix u(n, rank), v(n, rank);
        for (Index r = 0; r < rank; ++r) {
          u.col(r) = random_vector(n, gen);
          v.col(r) = random_vector(n, gen);
        }
        c = Coupling::from_factors(u, v);
      } else {
        c = Coupling::from_dense(random_matrix(n, gen));
      }
      (side == 0 ? m.upper : m.lower).push_back(c);
    }
  }
  return m;
}

double rel_inf(const Vector& a, const Vector& b) { return (a - b).lpNorm<Eigen::Infinity>() / b.lpNorm<Eigen::Infinity>(); }

}  // namespace

TEST(BlockSolver, IdentityReturnsRhs) {
  BlockTridiagonal m;
  m.diag.push_back(Matrix::Identity(5, 5));
  const Vector b = Vector::LinSpaced(5, 1.0, 5.0);
  EXPECT_EQ(factor(m).solve(b), b);
}

TEST(BlockSolver, MatchesDenseLu) {
  std::mt19937_64 gen(1);
  const BlockTridiagonal m = random_system(4, 9, gen);
  const Vector b = random_vector(m.size(), gen);
  const Vector x = factor(m).solve(b);
  EXPECT_LE((m.multiply(x) - b).lpNorm<Eigen::Infinity>() / b.lpNorm<Eigen::Infinity>(), 1e-11);
  const Vector oracle = m.to_dense().partialPivLu().solve(b);
  EXPECT_LE(rel_inf(x, oracle), 1e-11);
}

TEST(BlockSolver, TransposeMatchesDenseTranspose) {
  std::mt19937_64 gen(2);
  const BlockTridiagonal m = random_system(4, 9, gen);
  const Vector b = random_vector(m.size(), gen);
  const Vector x = factor(m, true).solve(b);
  const Vector oracle = m.to_dense().transpose().partialPivLu().solve(b);
  EXPECT_LE(rel_inf(x, oracle), 1e-11);
}

TEST(BlockSolver, ZeroRhsGivesZero) {
  std::mt19937_64 gen(3);
  const BlockTridiagonal m = random_system(3, 4, gen);
  EXPECT_EQ(factor(m).solve(Vector::Zero(m.size())), Vector::Zero(m.size()));
}

TEST(BlockSolver, BlockVectorOverload) {
  std::mt19937_64 gen(4);
  const BlockTridiagonal m = random_system(3, 4, gen);
  const BlockVector b(3, 4, random_vector(12, gen));
  const BlockVector x = factor(m).solve(b);
  EXPECT_EQ(x.blocks(), 3u);
  EXPECT_LE((m.multiply(x.data()) - b.data()).norm(), 1e-12 * b.data().norm());
}

TEST(BlockSolver, RandomSystemsOracleAndAdjointIdentity) {
  std::mt19937_64 gen(5);
  std::uniform_int_distribution<int> kd(1, 6), nd(1, 12);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t k = static_cast<std::size_t>(kd(gen));
    const Index n = nd(gen);
    const Index rank = trial % 3 == 0 ? std::min<Index>(2, n) : 0;
    const BlockTridiagonal m = random_system(k, n, gen, rank);
    const Vector b = random_vector(m.size(), gen);
    const Vector y = random_vector(m.size(), gen);
    const auto f = factor(m);
    const auto ft = factor(m, true);
    const Vector x = f.solve(b);
    EXPECT_LE(rel_inf(x, m.to_dense().partialPivLu().solve(b)), 1e-10) << trial;
    const double lhs = ft.solve(y).dot(b);
    const double rhs = y.dot(x);
    EXPECT_LE(std::abs(lhs - rhs), 1e-10 * std::max(1.0, std::abs(rhs))) << trial;
  }
}

TEST(BlockSolver, LowRankCouplingsMatchDenseCouplings) {
  std::mt19937_64 gen(6);
  const BlockTridiagonal low = random_system(5, 10, gen, 2);
  BlockTridiagonal dense = low;
  for (auto& c : dense.upper) c = Coupling::from_dense(c.dense);
  for (auto& c : dense.lower) c = Coupling::from_dense(c.dense);
  const Vector b = random_vector(low.size(), gen);
  EXPECT_LE(rel_inf(factor(low).solve(b), factor(dense).solve(b)), 1e-12);
  EXPECT_LE(rel_inf(factor(low, true).solve(b), factor(dense, true).solve(b)), 1e-12);
}

TEST(BlockSolver, SingularPivotNamesElement) {
  std::mt19937_64 gen(7);
  BlockTridiagonal m = random_system(3, 4, gen);
  m.diag[0].setZero();
  try {
    factor(m);
    FAIL() << "expected SingularSystem";
  } catch (const SingularSystem& e) {
    EXPECT_EQ(e.element(), 0u);
  }
}

TEST(BlockSolver, DimensionMismatch) {
  std::mt19937_64 gen(8);
  const BlockTridiagonal m = random_system(2, 3, gen);
  EXPECT_THROW(factor(m).solve(Vector::Zero(5)), InvalidArgument);
  BlockTridiagonal bad = m;
  bad.upper.clear();
  EXPECT_THROW(factor(bad), InvalidArgument);
}

TEST(ConditionEstimate, Identity) {
  BlockTridiagonal m;
  for (int k = 0; k < 3; ++k) m.diag.push_back(Matrix::Identity(4, 4));
  for (int k = 0; k < 2; ++k) {
    m.upper.push_back(Coupling::from_dense(Matrix::Zero(4, 4)));
    m.lower.push_back(Coupling::from_dense(Matrix::Zero(4, 4)));
  }
  const double c = condition_estimate(m);
  EXPECT_GE(c, 0.5);
  EXPECT_LE(c, 2.0);
}

TEST(ConditionEstimate, DiagonalSpread) {
  BlockTridiagonal m;
  const Index n = 7;
  for (int k = 0; k < 2; ++k) {
    Vector d = Vector::LinSpaced(n, 0.0, 6.0).unaryExpr([](double e) { return std::pow(10.0, e); });
    m.diag.push_back(d.asDiagonal());
  }
  m.upper.push_back(Coupling::from_dense(Matrix::Zero(n, n)));
  m.lower.push_back(Coupling::from_dense(Matrix::Zero(n, n)));
  const double c = condition_estimate(m);
  EXPECT_GE(c, 1e5);
  EXPECT_LE(c, 1e7);
}

TEST(ConditionEstimate, SingularIsInfinite) {
  BlockTridiagonal m;
  m.diag.push_back(Matrix::Zero(3, 3));
  EXPECT_TRUE(std::isinf(condition_estimate(m)));
}
