#pragma once

// Manufactured and analytic solutions, convergence studies, and the
// two-design cross-validation of the optimizer against a scalar reference.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <memory>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "stheat/adjoint.hpp"
#include "stheat/discretization.hpp"
#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"
#include "stheat/optimizer.hpp"
#include "stheat/problem.hpp"
#include "stheat/scalar_minimize.hpp"
#include "stheat/two_domain.hpp"

namespace stheat {

// Element-aware field g(x, t, element); the element index selects the side of an interface.
using Field = std::function<double(double x, double t, std::size_t element)>;

struct ManufacturedSolution {
  Field u, u_t, u_x, u_xx;
};

// f = u_t - kappa_k u_xx with the element-constant kappa_k = kappa(rho_k).
inline SourceFunction mms_source(const ManufacturedSolution& m, const Vector& rho, const ProblemSpec& spec) {
  if (!m.u || !m.u_t || !m.u_x || !m.u_xx) throw InvalidArgument("mms_source: all derivatives are required");
  if (static_cast<std::size_t>(rho.size()) != spec.elements) throw InvalidArgument("mms_source: design size mismatch");
  const Vector kap = kappa(rho, spec.material);
  const auto edges = spec.element_edges();

  // Central-difference consistency check at fixed pseudo-random interior points.
  std::mt19937_64 gen(12345);
  std::uniform_real_distribution<double> unit(0.1, 0.9);
  for (int s = 0; s < 16; ++s) {
    const std::size_t k = static_cast<std::size_t>(s) % spec.elements;
    const double x = edges[k] + unit(gen) * (edges[k + 1] - edges[k]);
    const double t = unit(gen) * spec.final_time;
    const double h = 1e-4 * std::max(1.0, edges[k + 1] - edges[k]);
    const double ht = 1e-4 * std::max(1.0, spec.final_time);
    const double fd_t = (m.u(x, t + ht, k) - m.u(x, t - ht, k)) / (2.0 * ht);
    const double fd_x = (m.u(x + h, t, k) - m.u(x - h, t, k)) / (2.0 * h);
    const double fd_xx = (m.u_x(x + h, t, k) - m.u_x(x - h, t, k)) / (2.0 * h);
    auto mismatch = [](double a, double b) { return std::abs(a - b) / std::max(1.0, std::abs(b)); };
    if (mismatch(fd_t, m.u_t(x, t, k)) > 1e-6 || mismatch(fd_x, m.u_x(x, t, k)) > 1e-6 ||
        mismatch(fd_xx, m.u_xx(x, t, k)) > 1e-6) {
      throw InvalidArgument("mms_source: derivative callables are inconsistent with u");
    }
  }
  return [m, kap](double x, double t, std::size_t k) {
    return m.u_t(x, t, k) - kap(static_cast<Index>(k)) * m.u_xx(x, t, k);
  };
}

// A verification problem with a known solution at one resolution.
struct VerificationCase {
  ProblemSpec spec;
  Vector rho;
  Field exact;
  double objective_exact = 0.0;
};

struct ConvergenceRow {
  int n = 0;
  Index dof = 0;
  double l2_error = 0.0;
  double j_error = 0.0;
};

// Discrete P-norm of the nodal error and |J_h - J| for one solve.
inline ConvergenceRow measure_error(const VerificationCase& c, const SatOptions& sat_options = {}) {
  const auto parts = make_parts(c.spec, choose_sat_coefficients(c.spec, sat_options));
  const GlobalSystem sys = assemble_global(parts, c.rho);
  const BlockVector u = solve_state(sys);
  const BlockVector ue = sample(*parts, c.exact);
  double e2 = 0.0;
  for (std::size_t k = 0; k < parts->blocks(); ++k) {
    const Vector e = u.block(k) - ue.block(k);
    e2 += e.dot(parts->elements[k].norm.cwiseProduct(e));
  }
  ConvergenceRow row;
  row.dof = sys.matrix.size();
  row.l2_error = std::sqrt(e2);
  row.j_error = std::abs(objective(u, sys) - c.objective_exact);
  return row;
}

inline std::vector<ConvergenceRow> convergence_study(const std::function<VerificationCase(int)>& family,
                                                     const std::vector<int>& resolutions) {
  if (resolutions.empty()) throw InvalidArgument("convergence_study: empty resolution list");
  std::vector<ConvergenceRow> rows;
  for (int n : resolutions) {
    ConvergenceRow r = measure_error(family(n));
    r.n = n;
    rows.push_back(r);
  }
  return rows;
}

// Monotone decrease down to a round-off plateau: each error is below its
// predecessor unless both are already under the plateau level.
inline bool decreases_to_plateau(const std::vector<double>& errors, double plateau) {
  for (std::size_t i = 1; i < errors.size(); ++i) {
    if (errors[i] > errors[i - 1] && std::max(errors[i], errors[i - 1]) > plateau) return false;
  }
  return true;
}

// Least-squares slope of log(err) against log(n).
inline double loglog_slope(const std::vector<double>& n, const std::vector<double>& err) {
  if (n.size() != err.size() || n.size() < 2) throw InvalidArgument("loglog_slope: need two or more points");
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  const double m = static_cast<double>(n.size());
  for (std::size_t i = 0; i < n.size(); ++i) {
    const double x = std::log(n[i]), y = std::log(err[i]);
    sx += x;
    sy += y;
    sxx += x * x;
    sxy += x * y;
  }
  return -(m * sxy - sx * sy) / (m * sxx - sx * sx);
}

// ---------------------------------------------------------------------------
// Heterogeneous manufactured solution u = exp(-t) psi(x) with continuous
// flux: kappa psi' = G - c0 on every element, G(x) = cos(omega (x - a)),
// and c0 chosen so that psi vanishes at both ends.

struct FluxMatchedConfig {
  double x_left = -2.0;
  double x_right = 1.0;
  double final_time = 1.0;
  std::size_t elements = 10;
  unsigned seed = 7;
  double omega = 0.0;  // 0 picks 2 pi / (b - a)
  MaterialModel material{0.1, 1.0, 3.0};
};

inline Vector seeded_design(std::size_t elements, unsigned seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> dist(0.2, 1.0);
  Vector rho(static_cast<Index>(elements));
  for (Index k = 0; k < rho.size(); ++k) rho(k) = dist(gen);
  return rho;
}

class FluxMatchedSolution {
 public:
  FluxMatchedSolution(const FluxMatchedConfig& cfg, std::vector<double> edges, Vector kappas)
      : a_(cfg.x_left), edges_(std::move(edges)), kappa_(std::move(kappas)) {
    omega_ = cfg.omega > 0.0 ? cfg.omega : 2.0 * std::numbers::pi / (cfg.x_right - cfg.x_left);
    double num = 0.0, den = 0.0;
    for (std::size_t k = 0; k + 1 < edges_.size(); ++k) {
      num += (anti(edges_[k + 1]) - anti(edges_[k])) / kappa_(static_cast<Index>(k));
      den += (edges_[k + 1] - edges_[k]) / kappa_(static_cast<Index>(k));
    }
    c0_ = num / den;
    left_.resize(edges_.size());
    left_[0] = 0.0;
    for (std::size_t k = 0; k + 1 < edges_.size(); ++k) left_[k + 1] = psi(edges_[k + 1], k);
  }

  double G(double x) const { return std::cos(omega_ * (x - a_)); }
  double dG(double x) const { return -omega_ * std::sin(omega_ * (x - a_)); }
  double anti(double x) const { return std::sin(omega_ * (x - a_)) / omega_; }

  double psi(double x, std::size_t k) const {
    const double xa = edges_[k];
    return left_[k] + (anti(x) - anti(xa) - c0_ * (x - xa)) / kappa_(static_cast<Index>(k));
  }
  double dpsi(double x, std::size_t k) const { return (G(x) - c0_) / kappa_(static_cast<Index>(k)); }
  double ddpsi(double x, std::size_t k) const { return dG(x) / kappa_(static_cast<Index>(k)); }

  ManufacturedSolution fields() const {
    auto self = std::make_shared<FluxMatchedSolution>(*this);
    ManufacturedSolution m;
    m.u = [self](double x, double t, std::size_t k) { return std::exp(-t) * self->psi(x, k); };
    m.u_t = [self](double x, double t, std::size_t k) { return -std::exp(-t) * self->psi(x, k); };
    m.u_x = [self](double x, double t, std::size_t k) { return std::exp(-t) * self->dpsi(x, k); };
    m.u_xx = [self](double x, double t, std::size_t k) { return std::exp(-t) * self->ddpsi(x, k); };
    return m;
  }

  // integral of psi^2 over the domain by Gauss quadrature per element.
  double psi_norm2() const {
    double s = 0.0;
    for (std::size_t k = 0; k + 1 < edges_.size(); ++k) {
      const auto q = detail::composite_gauss(edges_[k], edges_[k + 1], 16);
      for (std::size_t i = 0; i < q.x.size(); ++i) s += q.w[i] * std::pow(psi(q.x[i], k), 2);
    }
    return s;
  }

  double c0() const noexcept { return c0_; }

 private:
  double a_;
  std::vector<double> edges_;
  Vector kappa_;
  double omega_ = 1.0;
  double c0_ = 0.0;
  std::vector<double> left_;
};

inline VerificationCase flux_matched_case(const FluxMatchedConfig& cfg, int n) {
  VerificationCase c;
  ProblemSpec& s = c.spec;
  s.x_left = cfg.x_left;
  s.x_right = cfg.x_right;
  s.final_time = cfg.final_time;
  s.elements = cfg.elements;
  s.nx_nodes = n;
  s.nt_nodes = n;
  s.material = cfg.material;
  c.rho = seeded_design(cfg.elements, cfg.seed);
  const FluxMatchedSolution sol(cfg, s.element_edges(), kappa(c.rho, cfg.material));
  const ManufacturedSolution m = sol.fields();
  s.west = {BoundaryKind::dirichlet, [](double) { return 0.0; }};
  s.east = {BoundaryKind::dirichlet, [](double) { return 0.0; }};
  const auto edges = s.element_edges();
  s.initial = [m, edges](double x) {
    const auto it = std::upper_bound(edges.begin() + 1, edges.end() - 1, x);
    return m.u(x, 0.0, static_cast<std::size_t>(it - edges.begin() - 1));
  };
  s.source = mms_source(m, c.rho, s);
  c.exact = m.u;
  c.objective_exact = 0.5 * (-std::expm1(-2.0 * cfg.final_time)) * sol.psi_norm2();
  return c;
}

// ---------------------------------------------------------------------------
// Two-domain problem: kappa_1 on (0, xi), kappa_2 on (xi, 1).

struct TwoDomainConfig {
  double xi = 0.5;
  double f = 1.0;
  double u_right = 1.0;
  double final_time = 1.0;
  double volume_bound = 0.375;
  double nominal_kappa1 = 0.375;
  double nominal_kappa2 = 0.375;
  int branch = 0;
  MaterialModel material{0.0, 1.0, 1.0};
  double tau_rho = 1e-8;
  int max_iterations = 100;
  double reference_tol = 1e-8;
  int series_modes = 300;
};

inline ProblemSpec two_domain_spec(const TwoDomainConfig& cfg, int nx, int nt,
                                   std::function<double(double)> initial) {
  ProblemSpec s;
  s.x_left = 0.0;
  s.x_right = 1.0;
  s.final_time = cfg.final_time;
  s.elements = 2;
  s.edges = {0.0, cfg.xi, 1.0};
  s.nx_nodes = nx;
  s.nt_nodes = nt;
  s.material = cfg.material;
  const double ur = cfg.u_right;
  s.west = {BoundaryKind::dirichlet, [](double) { return 0.0; }};
  s.east = {BoundaryKind::dirichlet, [ur](double) { return ur; }};
  const double f = cfg.f;
  s.source = [f](double, double, std::size_t) { return f; };
  s.initial = std::move(initial);
  return s;
}

// Initial state shared by every design: the single-mode solution at the nominal design, at t = 0.
inline std::function<double(double)> nominal_initial(const TwoDomainConfig& cfg) {
  const TwoDomainSolution s =
      TwoDomainSolution::make(cfg.nominal_kappa1, cfg.nominal_kappa2, cfg.xi, cfg.f, cfg.u_right, cfg.branch);
  return [s](double x) { return s(x, 0.0); };
}

// Forward problem whose exact solution is the single-mode analytic solution.
inline VerificationCase two_domain_case(const TwoDomainConfig& cfg, double kappa1, double kappa2, int n) {
  const TwoDomainSolution sol = TwoDomainSolution::make(kappa1, kappa2, cfg.xi, cfg.f, cfg.u_right, cfg.branch);
  VerificationCase c;
  c.spec = two_domain_spec(cfg, n, n, [sol](double x) { return sol(x, 0.0); });
  // Design variables reproducing (kappa1, kappa2) under the configured material law.
  const MaterialModel& m = cfg.material;
  auto rho_of = [&m](double k) { return std::pow((k - m.kappa_min) / (m.kappa_max - m.kappa_min), 1.0 / m.p); };
  c.rho = Vector(2);
  c.rho << rho_of(kappa1), rho_of(kappa2);
  c.exact = [sol](double x, double t, std::size_t k) {
    // Evaluate each element's own branch so the interface node is exact on both sides.
    if (k == 0) return -sol.f * x * x / (2.0 * sol.kappa1) + sol.steady.A1 * x + std::exp(-sol.lambda * t) * std::sin(sol.alpha1 * x);
    return -sol.f * x * x / (2.0 * sol.kappa2) + sol.steady.A2 * x + sol.steady.B2 +
           std::exp(-sol.lambda * t) * sol.r * std::sin(sol.alpha2 * (1.0 - x));
  };
  c.objective_exact = 0.0;
  return c;
}

struct DesignPoint {
  double kappa1 = 0.0;
  double kappa2 = 0.0;
  double objective = 0.0;
  int iterations = 0;
  std::string stop;
};

// kappa_2 as a function of kappa_1 on the active volume constraint.
inline double constrained_kappa2(const TwoDomainConfig& cfg, double kappa1) {
  const MaterialModel& m = cfg.material;
  const double span = m.kappa_max - m.kappa_min;
  const double rho1 = std::pow((kappa1 - m.kappa_min) / span, 1.0 / m.p);
  const double rho2 = (cfg.volume_bound - cfg.xi * rho1) / (1.0 - cfg.xi);
  return m.kappa_min + span * std::pow(rho2, m.p);
}

// Largest kappa_1 leaving kappa_2 inside the admissible range.
inline std::pair<double, double> reference_bracket(const TwoDomainConfig& cfg) {
  const MaterialModel& m = cfg.material;
  const double span = m.kappa_max - m.kappa_min;
  const double rho1_max = std::min(1.0, cfg.volume_bound / cfg.xi);
  const double rho1_min = std::max(0.0, (cfg.volume_bound - (1.0 - cfg.xi)) / cfg.xi);
  return {m.kappa_min + span * std::pow(rho1_min, m.p), m.kappa_min + span * std::pow(rho1_max, m.p)};
}

// Exact continuous objective at (kappa1, kappa2) with the shared initial state.
inline double reference_objective(const TwoDomainConfig& cfg, double kappa1, double kappa2) {
  SeriesOptions so;
  so.modes = cfg.series_modes;
  return two_domain_objective(kappa1, kappa2, cfg.xi, cfg.f, cfg.u_right, cfg.final_time, nominal_initial(cfg), so);
}

// Bounded scalar search along the active volume constraint.
inline DesignPoint reference_optimum(const TwoDomainConfig& cfg) {
  const auto [lo, hi] = reference_bracket(cfg);
  const auto r = scalar_minimize(
      [&cfg](double k1) { return reference_objective(cfg, k1, constrained_kappa2(cfg, k1)); }, lo, hi,
      cfg.reference_tol);
  return {r.x, constrained_kappa2(cfg, r.x), r.value, r.evaluations, "bracket_tolerance"};
}

inline DesignPoint mma_optimum(const TwoDomainConfig& cfg, int nx, int nt) {
  const ProblemSpec spec = two_domain_spec(cfg, nx, nt, nominal_initial(cfg));
  const SpaceTimeModel model(spec);
  const Vector volumes = spec.element_lengths();
  const DesignField start = DesignField::uniform(volumes, cfg.volume_bound);
  OptimizationOptions opt;
  opt.tau_rho = cfg.tau_rho;
  opt.max_iterations = cfg.max_iterations;
  const OptimizationTrace trace = run_topology_optimization(model, start.rho, volumes, cfg.volume_bound, opt);
  const Vector k = kappa(trace.rho, spec.material);
  return {k(0), k(1), trace.objective, trace.iterations(), to_string(trace.stop)};
}

struct CrossValidationRow {
  int nx = 0;
  int nt = 0;
  DesignPoint mma;
  double design_error = 0.0;     // max_i |kappa_i - kappa_i^ref| / max_i |kappa_i^ref|
  double objective_error = 0.0;  // |J - J_ref| / |J_ref|
};

inline CrossValidationRow compare_to_reference(const DesignPoint& ref, const DesignPoint& got, int nx, int nt) {
  CrossValidationRow row;
  row.nx = nx;
  row.nt = nt;
  row.mma = got;
  row.design_error = std::max(std::abs(got.kappa1 - ref.kappa1), std::abs(got.kappa2 - ref.kappa2)) /
                     std::max(std::abs(ref.kappa1), std::abs(ref.kappa2));
  row.objective_error = std::abs(got.objective - ref.objective) / std::abs(ref.objective);
  return row;
}

inline std::vector<CrossValidationRow> crossvalidate_optimum(const TwoDomainConfig& cfg,
                                                             const std::vector<std::pair<int, int>>& resolutions,
                                                             const DesignPoint& reference) {
  std::vector<CrossValidationRow> rows;
  for (const auto& [nx, nt] : resolutions) rows.push_back(compare_to_reference(reference, mma_optimum(cfg, nx, nt), nx, nt));
  return rows;
}

// ---------------------------------------------------------------------------
// Model problem: [0,1] x [0,1], insulated left end, cold right end.

struct ModelProblemConfig {
  std::size_t elements = 50;
  int nx_nodes = 5;
  int nt_nodes = 15;
  double final_time = 1.0;
  double source_constant = 10.0;
  double volume_bound = 0.5;
  MaterialModel material{1e-3, 1.0, 3.0};
};

inline ProblemSpec model_problem_spec(const ModelProblemConfig& cfg) {
  ProblemSpec s;
  s.x_left = 0.0;
  s.x_right = 1.0;
  s.final_time = cfg.final_time;
  s.elements = cfg.elements;
  s.nx_nodes = cfg.nx_nodes;
  s.nt_nodes = cfg.nt_nodes;
  s.material = cfg.material;
  s.west = {BoundaryKind::neumann, [](double) { return 0.0; }};
  s.east = {BoundaryKind::dirichlet, [](double) { return 0.0; }};
  const double c = cfg.source_constant;
  s.source = [c](double x, double t, std::size_t) { return c + std::sin(10.0 * (x + t)) + std::sin(10.0 * t); };
  s.initial = [](double) { return 0.0; };
  return s;
}

}  // namespace stheat
