#include <gtest/gtest.h>

#include <cmath>
#include <numbers>
#include <random>

#include "stheat/baselines.hpp"
#include "stheat/verification.hpp"

using namespace stheat;

namespace {

constexpr double kPi = std::numbers::pi;

ProblemSpec unit_spec(std::size_t elements) {
  ProblemSpec s;
  s.elements = elements;
  return s;
}

MaterialModel unit_material() { return {1.0, 1.0, 3.0}; }

// u = sin(pi x) exp(-t) with kappa = 1 and homogeneous Dirichlet ends.
ProblemSpec sine_problem(std::size_t elements) {
  ProblemSpec s = unit_spec(elements);
  s.material = unit_material();
  s.initial = [](double x) { return std::sin(kPi * x); };
  s.source = [](double x, double t, std::size_t) { return (kPi * kPi - 1.0) * std::sin(kPi * x) * std::exp(-t); };
  return s;
}

double sine_exact(double x, double t) { return std::sin(kPi * x) * std::exp(-t); }

double fit_slope(const std::vector<double>& n, const std::vector<double>& e) { return loglog_slope(n, e); }

template <class Model>
double fd_discrepancy(const Model& model, const Vector& rho, const Vector& grad) {
  double worst = 0.0;
  for (Index k = 0; k < rho.size(); ++k) {
    double best = std::numeric_limits<double>::infinity();
    for (double h : {1e-4, 1e-5, 1e-6}) {
      Vector rp = rho, rm = rho;
      rp(k) += h;
      rm(k) -= h;
      const double fd = (model.value(rp) - model.value(rm)) / (2.0 * h);
      best = std::min(best, std::abs(grad(k) - fd) / std::max(std::abs(fd), 1e-12));
    }
    worst = std::max(worst, best);
  }
  return worst;
}

}  // namespace

TEST(FeAssemble, TwoElementStiffnessByHand) {
  ProblemSpec s = unit_spec(2);
  s.material = unit_material();
  const FeDiscretization fe = fe_assemble(s, Vector::Constant(2, 0.5));
  EXPECT_NEAR(fe.K(1, 0), -2.0, 1e-14);
  EXPECT_NEAR(fe.K(1, 1), 4.0, 1e-14);
  EXPECT_NEAR(fe.K(1, 2), -2.0, 1e-14);
  EXPECT_NEAR(fe.M(1, 1), 1.0 / 3.0, 1e-15);
  EXPECT_NEAR(fe.M(0, 1), 1.0 / 12.0, 1e-15);
}

TEST(FeAssemble, MatrixInvariants) {
  ProblemSpec s = unit_spec(7);
  s.x_left = -1.0;
  s.x_right = 2.5;
  const Vector rho = Vector::LinSpaced(7, 0.05, 0.95);
  const FeDiscretization fe = fe_assemble(s, rho);
  EXPECT_NEAR(fe.M.sum(), 3.5, 1e-13);
  EXPECT_LE((fe.M - fe.M.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_LE((fe.K - fe.K.transpose()).cwiseAbs().maxCoeff(), 0.0);
  EXPECT_GT(Eigen::SelfAdjointEigenSolver<Matrix>(fe.M).eigenvalues().minCoeff(), 0.0);
  EXPECT_GE(Eigen::SelfAdjointEigenSolver<Matrix>(fe.K).eigenvalues().minCoeff(), -1e-12);
  EXPECT_LE((fe.K * Vector::Ones(fe.nodes())).cwiseAbs().maxCoeff(), 1e-12);
  EXPECT_EQ(fe.free_count(), 6);
  EXPECT_EQ(fe.dirichlet.size(), 2u);
}

TEST(FeAssemble, LinearSteadyStateIsExact) {
  // u = 1 + 2x: Dirichlet at both ends, then flux 2 on an insulated-style Neumann west face.
  ProblemSpec s = unit_spec(5);
  s.material = unit_material();
  s.west = {BoundaryKind::dirichlet, [](double) { return 1.0; }};
  s.east = {BoundaryKind::dirichlet, [](double) { return 3.0; }};
  FeDiscretization fe = fe_assemble(s, Vector::Constant(5, 0.5));
  const Vector u = (1.0 + 2.0 * fe.x.array()).matrix();
  const Vector ku = fe.K * u;
  for (Index i : fe.free) EXPECT_NEAR(ku(i), 0.0, 1e-12);

  s.west = {BoundaryKind::neumann, [](double) { return 2.0; }};
  fe = fe_assemble(s, Vector::Constant(5, 0.5));
  const Vector load = fe_load(fe, s, 0.0);
  const Vector ku2 = fe.K * u;
  for (Index i : fe.free) EXPECT_NEAR(ku2(i), load(i), 1e-12) << i;
}

TEST(FeAssemble, RejectsSizeMismatch) {
  EXPECT_THROW(fe_assemble(unit_spec(3), Vector::Constant(2, 0.5)), InvalidArgument);
}

TEST(BeMarch, ZeroDataStaysZero) {
  const ProblemSpec s = unit_spec(6);
  const MarchingSolution sol = be_march(fe_assemble(s, Vector::Constant(6, 0.4)), s, 20);
  EXPECT_EQ(sol.states.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BeMarch, InitialLevelAndStepEquations) {
  ProblemSpec s = model_problem_spec({});
  s.elements = 8;
  s.initial = [](double x) { return std::cos(0.5 * kPi * x); };
  s.east = {BoundaryKind::dirichlet, [](double t) { return 0.1 * t; }};
  const FeDiscretization fe = fe_assemble(s, Vector::LinSpaced(8, 0.1, 0.9));
  const std::size_t steps = 16;
  const MarchingSolution sol = be_march(fe, s, steps);
  for (Index i = 0; i + 1 < fe.nodes(); ++i) EXPECT_DOUBLE_EQ(sol.states(i, 0), std::cos(0.5 * kPi * fe.x(i)));
  const Matrix a = fe.M / sol.dt + fe.K;
  for (std::size_t n = 0; n < steps; ++n) {
    const Vector lhs = a * sol.level(n + 1);
    const Vector rhs = fe.M * sol.level(n) / sol.dt + fe_load(fe, s, sol.dt * static_cast<double>(n + 1));
    for (Index i : fe.free) EXPECT_NEAR(lhs(i), rhs(i), 1e-11 * rhs.cwiseAbs().maxCoeff()) << n;
    EXPECT_NEAR(sol.states(fe.nodes() - 1, static_cast<Index>(n + 1)), 0.1 * sol.dt * static_cast<double>(n + 1), 1e-15);
  }
  EXPECT_THROW(be_march(fe, s, 0), InvalidArgument);
}

TEST(BeMarch, MassNormDecaysWithoutForcing) {
  std::mt19937_64 gen(4);
  std::uniform_real_distribution<double> d(-1.0, 1.0);
  for (int trial = 0; trial < 5; ++trial) {
    ProblemSpec s = unit_spec(12);
    const double c1 = d(gen), c2 = d(gen), c3 = d(gen);
    s.initial = [=](double x) { return c1 * std::sin(kPi * x) + c2 * std::sin(5 * kPi * x) + c3 * x * (1 - x); };
    Vector rho(12);
    for (Index k = 0; k < 12; ++k) rho(k) = 0.5 + 0.5 * d(gen);
    const FeDiscretization fe = fe_assemble(s, rho);
    const MarchingSolution sol = be_march(fe, s, 40);
    for (std::size_t n = 0; n < 40; ++n) {
      const Vector a = sol.level(n), b = sol.level(n + 1);
      EXPECT_LE(b.dot(fe.M * b), a.dot(fe.M * a) * (1.0 + 1e-14)) << n;
    }
  }
}

TEST(BeAao, MatchesMarching) {
  for (BoundaryKind west : {BoundaryKind::dirichlet, BoundaryKind::neumann}) {
    ProblemSpec s = model_problem_spec({});
    s.elements = 10;
    s.west.kind = west;
    s.west.data = [](double t) { return 0.3 * t; };
    s.initial = [](double x) { return x * (1.0 - x); };
    const FeDiscretization fe = fe_assemble(s, Vector::LinSpaced(10, 0.2, 0.8));
    const MarchingSolution m = be_march(fe, s, 37);
    const MarchingSolution a = be_aao_solve(fe, s, 37);
    EXPECT_LE((m.states - a.states).cwiseAbs().maxCoeff(), 1e-12 * m.states.cwiseAbs().maxCoeff());
    const AaoSystem sys = be_aao_assemble(fe, s, 37);
    EXPECT_LE((sys.multiply(a.states) - sys.rhs).cwiseAbs().maxCoeff(), 1e-10 * sys.rhs.cwiseAbs().maxCoeff());
  }
}

TEST(BeAao, UnknownCountAtFinestLevel) {
  const ProblemSpec s = model_problem_spec({});
  const FeDiscretization fe = fe_assemble(s, Vector::Constant(50, 0.5));
  const AaoSystem sys = be_aao_assemble(fe, s, 16384);
  EXPECT_EQ(sys.nodes(), 51);
  EXPECT_EQ(sys.unknowns(), 835635);
  const MarchingSolution sol = be_aao_solve(sys);
  EXPECT_EQ(sol.unknowns, 835635);
  EXPECT_EQ(be_march(fe, s, 16384).unknowns, 50);
}

TEST(BeAao, StorageGrowsLinearlyInSteps) {
  const ProblemSpec s = model_problem_spec({});
  const FeDiscretization fe = fe_assemble(s, Vector::Constant(50, 0.5));
  const AaoSystem a = be_aao_assemble(fe, s, 100), b = be_aao_assemble(fe, s, 200), c = be_aao_assemble(fe, s, 300);
  EXPECT_EQ(b.unknowns() - a.unknowns(), c.unknowns() - b.unknowns());
  EXPECT_EQ(b.nonzeros() - a.nonzeros(), c.nonzeros() - b.nonzeros());
}

TEST(BeAdjoint, NoContrastGivesZeroGradient) {
  ProblemSpec s = model_problem_spec({});
  s.elements = 6;
  s.material = {0.4, 0.4, 3.0};
  const BackwardEulerModel model(s, 16, BeSolver::march);
  EXPECT_EQ(model.evaluate(Vector::LinSpaced(6, 0.1, 0.9)).gradient.cwiseAbs().maxCoeff(), 0.0);
}

TEST(BeAdjoint, MatchesFiniteDifferencesTenElements) {
  std::mt19937_64 gen(31);
  std::uniform_real_distribution<double> d(0.05, 0.95);
  ProblemSpec s = model_problem_spec({});
  s.elements = 10;
  Vector rho(10);
  for (Index k = 0; k < 10; ++k) rho(k) = d(gen);
  for (BeSolver solver : {BeSolver::march, BeSolver::all_at_once}) {
    const BackwardEulerModel model(s, 64, solver);
    const BeEvaluation ev = model.evaluate(rho);
    EXPECT_NEAR(ev.objective, model.value(rho), 1e-14 * ev.objective);
    EXPECT_LE(fd_discrepancy(model, rho, ev.gradient), 1e-5);
  }
}

TEST(BeAdjoint, MatchesFiniteDifferencesWithDirichletData) {
  ProblemSpec s = unit_spec(4);
  s.west = {BoundaryKind::dirichlet, [](double t) { return std::sin(t); }};
  s.source = [](double x, double, std::size_t) { return 1.0 + x; };
  const BackwardEulerModel model(s, 32, BeSolver::march);
  const Vector rho = Vector::LinSpaced(4, 0.2, 0.8);
  EXPECT_LE(fd_discrepancy(model, rho, model.evaluate(rho).gradient), 1e-5);
}

TEST(BeAdjoint, SymmetricProblemHasSymmetricGradient) {
  ProblemSpec s = unit_spec(8);
  s.source = [](double x, double t, std::size_t) { return 1.0 + (x - 0.5) * (x - 0.5) * t; };
  s.initial = [](double x) { return x * (1.0 - x); };
  const BackwardEulerModel model(s, 24, BeSolver::march);
  const Vector g = model.evaluate(Vector::Constant(8, 0.6)).gradient;
  for (Index k = 0; k < 8; ++k) EXPECT_NEAR(g(k), g(7 - k), 1e-10 * g.cwiseAbs().maxCoeff()) << k;
}

TEST(BeConvergence, FirstOrderInTime) {
  const ProblemSpec s = sine_problem(400);
  const FeDiscretization fe = fe_assemble(s, Vector::Constant(400, 0.5));
  const double j_exact = 0.25 * (1.0 - std::exp(-2.0));
  std::vector<double> n, err, jerr;
  for (std::size_t steps : {8u, 16u, 32u, 64u}) {
    const MarchingSolution sol = be_march(fe, s, steps);
    n.push_back(static_cast<double>(steps));
    err.push_back(be_l2_error(fe, sol, sine_exact));
    jerr.push_back(std::abs(be_objective(fe, sol) - j_exact));
  }
  EXPECT_NEAR(fit_slope(n, err), 1.0, 0.2);
  EXPECT_NEAR(fit_slope(n, jerr), 1.0, 0.2);
}

TEST(BeConvergence, SecondOrderInSpace) {
  std::vector<double> n, err;
  for (std::size_t k : {4u, 8u, 16u, 32u}) {
    const ProblemSpec s = sine_problem(k);
    const FeDiscretization fe = fe_assemble(s, Vector::Constant(static_cast<Index>(k), 0.5));
    n.push_back(static_cast<double>(k));
    err.push_back(be_l2_error(fe, be_march(fe, s, 20000), sine_exact));
  }
  EXPECT_NEAR(fit_slope(n, err), 2.0, 0.2);
}
