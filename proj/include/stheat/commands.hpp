#pragma once

// Experiment drivers behind the stheat command line: property checks
// (verify), spectral convergence (converge), design optimization
// (optimize) and the solver comparison table (compare). Each driver
// returns its rows so tests can inspect them; the cmd_* wrappers write
// CSV tables and summary.json into an output directory.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <limits>
#include <mutex>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include <nlohmann/json.hpp>

#include "stheat/adjoint.hpp"
#include "stheat/baselines.hpp"
#include "stheat/config.hpp"
#include "stheat/optimizer.hpp"
#include "stheat/sbp.hpp"
#include "stheat/two_domain.hpp"
#include "stheat/verification.hpp"

namespace stheat {

using Json = nlohmann::ordered_json;

// ---------------------------------------------------------------------------
// Small utilities

// Runs fn(0..n-1) on up to `jobs` threads; results keep index order.
template <class Fn>
auto parallel_map(int jobs, std::size_t n, Fn&& fn) -> std::vector<decltype(fn(std::size_t{}))> {
  using R = decltype(fn(std::size_t{}));
  std::vector<std::optional<R>> slots(n);
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&]() {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const std::size_t threads = std::min<std::size_t>(static_cast<std::size_t>(std::max(jobs, 1)), n);
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    for (std::size_t t = 0; t < threads; ++t) pool.emplace_back(worker);
    for (auto& th : pool) th.join();
  }
  for (const auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
  std::vector<R> out;
  out.reserve(n);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

inline std::string fmt(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

class CsvWriter {
 public:
  CsvWriter(const std::filesystem::path& path, const std::vector<std::string>& header) : out_(path) {
    if (!out_) throw std::runtime_error("cannot write " + path.string());
    row(header);
  }
  void row(const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) out_ << (i ? "," : "") << cells[i];
    out_ << '\n';
  }

 private:
  std::ofstream out_;
};

inline void write_json(const std::filesystem::path& path, const Json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

inline Json environment_json(int jobs) {
  Json env;
#ifdef __VERSION__
  env["compiler"] = __VERSION__;
#endif
  env["hardware_threads"] = std::thread::hardware_concurrency();
  env["jobs"] = jobs;
  return env;
}

inline Json vector_json(const Vector& v) { return Json(std::vector<double>(v.data(), v.data() + v.size())); }

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t m = v.size() / 2;
  return v.size() % 2 ? v[m] : 0.5 * (v[m - 1] + v[m]);
}

// Least-squares log-log slope over the points whose error lies above `floor`.
inline double slope_above(const std::vector<double>& n, const std::vector<double>& err, double floor) {
  std::vector<double> a, b;
  for (std::size_t i = 0; i < n.size(); ++i) {
    if (err[i] > floor) {
      a.push_back(n[i]);
      b.push_back(err[i]);
    }
  }
  if (a.size() < 2) return std::numeric_limits<double>::quiet_NaN();
  return loglog_slope(a, b);
}

// Smallest relative central-difference discrepancy per entry, maximized over
// entries. The sweep covers the two-point stencil at small steps and the
// fourth-order five-point stencil at larger ones; the latter keeps round-off
// in J from swamping entries far below the largest.
template <class ValueFn>
double fd_relative_error(ValueFn&& value, const Vector& rho, const Vector& gradient) {
  double worst = 0.0;
  for (Index k = 0; k < rho.size(); ++k) {
    auto at = [&](double h) {
      Vector r = rho;
      r(k) += h;
      return value(r);
    };
    std::vector<double> estimates;
    for (double h : {1e-4, 1e-5, 1e-6}) estimates.push_back((at(h) - at(-h)) / (2.0 * h));
    for (double h : {1e-2, 3e-3, 1e-3}) {
      if (rho(k) - 2.0 * h < 0.0 || rho(k) + 2.0 * h > 1.0) continue;
      estimates.push_back((8.0 * (at(h) - at(-h)) - (at(2.0 * h) - at(-2.0 * h))) / (12.0 * h));
    }
    double best = std::numeric_limits<double>::infinity();
    for (double fd : estimates) best = std::min(best, std::abs(gradient(k) - fd) / std::max(std::abs(fd), 1e-12));
    worst = std::max(worst, best);
  }
  return worst;
}

// J at near-extended precision for finite-difference oracles: the state is
// polished against a long double residual of the dense matrix and the
// objective is summed in long double. Only for small systems.
inline double extended_value(const SpaceTimeModel& model, const Vector& rho) {
  using LMatrix = Eigen::Matrix<long double, Eigen::Dynamic, Eigen::Dynamic>;
  using LVector = Eigen::Matrix<long double, Eigen::Dynamic, 1>;
  const GlobalSystem sys = model.assemble(rho);
  const BlockTriFactorization f(sys.matrix, false);
  const LMatrix a = sys.matrix.to_dense().cast<long double>();
  const LVector b = sys.rhs.data().cast<long double>();
  Vector u = f.solve(sys.rhs.data());
  for (int it = 0; it < 3; ++it) {
    const LVector r = b - a * u.cast<long double>();
    u += f.solve(Vector(r.cast<double>()));
  }
  long double j = 0.0L;
  for (std::size_t k = 0; k < sys.parts->blocks(); ++k) {
    const Vector& w = sys.parts->elements[k].norm;
    const Index off = static_cast<Index>(k) * w.size();
    for (Index i = 0; i < w.size(); ++i) j += static_cast<long double>(w(i)) * u(off + i) * u(off + i);
  }
  return static_cast<double>(j);
}

inline Vector random_interior_design(std::size_t elements, std::uint64_t seed) {
  std::mt19937_64 gen(seed);
  std::uniform_real_distribution<double> d(0.05, 0.95);
  Vector rho(static_cast<Index>(elements));
  for (Index k = 0; k < rho.size(); ++k) rho(k) = d(gen);
  return rho;
}

// ---------------------------------------------------------------------------
// verify

struct CheckRecord {
  std::string group;
  std::string name;
  double value = 0.0;
  double tolerance = 0.0;
  bool pass = false;
};

inline CheckRecord check_le(std::string group, std::string name, double value, double tolerance) {
  return {std::move(group), std::move(name), value, tolerance, value <= tolerance};
}

// SBP identity, monomial exactness and discrete integration by parts.
inline std::vector<CheckRecord> sbp_checks(int max_nodes, int pairs, std::uint64_t seed) {
  std::vector<CheckRecord> out;
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> nd;
  for (int n = 2; n <= max_nodes; ++n) {
    const SbpOperator1D op = build_sbp_1d(n, -0.5, 1.0);
    const SbpReport r = verify_sbp(op);
    const std::string tag = "n=" + std::to_string(n);
    out.push_back(check_le("sbp", tag + " identity", r.sbp_identity, 1e-13));
    out.push_back(check_le("sbp", tag + " exactness", r.accuracy, 1e-11));
    double ibp = 0.0;
    for (int p = 0; p < pairs; ++p) {
      Vector u(n), v(n);
      for (Index i = 0; i < n; ++i) {
        u(i) = nd(gen);
        v(i) = nd(gen);
      }
      const double lhs = u.dot(op.p.cwiseProduct(op.D * v)) + (op.D * u).dot(op.p.cwiseProduct(v));
      const double rhs = u(n - 1) * v(n - 1) - u(0) * v(0);
      const double scale = std::max({std::abs(rhs), u.norm() * v.norm(), 1e-300});
      ibp = std::max(ibp, std::abs(lhs - rhs) / scale);
    }
    out.push_back(check_le("sbp", tag + " integration by parts", ibp, 1e-12));
  }
  return out;
}

// Largest violation of the energy estimate over random initial states,
// relative to the initial energy: (terminal - bound) / initial. The estimate
// holds when this is <= 0 up to round-off.
inline double energy_excess(std::size_t elements, const SatOptions& sat_options, int trials, std::uint64_t seed) {
  std::mt19937_64 gen(seed + elements);
  std::normal_distribution<double> nd;
  double worst = -std::numeric_limits<double>::infinity();
  for (int trial = 0; trial < trials; ++trial) {
    ProblemSpec spec;
    spec.elements = elements;
    spec.nx_nodes = 5;
    spec.nt_nodes = 5;
    const double c1 = nd(gen), c2 = nd(gen), c3 = nd(gen), c4 = nd(gen);
    spec.initial = [=](double x) { return c1 + c2 * x + c3 * std::sin(7.0 * x) + c4 * std::cos(13.0 * x); };
    const Vector rho = random_interior_design(elements, seed + 1000 + static_cast<std::uint64_t>(trial));
    const SatCoefficients sat = choose_sat_coefficients(spec, sat_options);
    const auto parts = make_parts(spec, sat);
    const BlockVector u = solve_state(assemble_global(parts, rho));
    double north = 0.0, south = 0.0;
    for (std::size_t k = 0; k < elements; ++k) {
      const auto& ops = parts->elements[k].ops;
      const Vector un = restrict(Face::north, ops, Vector(u.block(k)));
      Vector q(ops.layout.nx);
      for (Index i = 0; i < q.size(); ++i) q(i) = spec.initial(ops.op_x.nodes(i));
      north += un.dot(ops.op_x.p.cwiseProduct(un));
      south += q.dot(ops.op_x.p.cwiseProduct(q));
    }
    worst = std::max(worst, (north - south / (2.0 * sat.sigma0 - 1.0)) / south);
  }
  return worst;
}

inline std::vector<CheckRecord> energy_checks(const VerifySettings& v, std::uint64_t seed) {
  std::vector<CheckRecord> out;
  for (int k : v.energy_elements) {
    for (double s : {0.5, 1.0, 2.0}) {
      for (double safety : {1.0, 4.0}) {
        SatOptions o;
        o.s = s;
        o.safety = safety;
        out.push_back(check_le("energy", "K=" + std::to_string(k) + " s=" + fmt(s) + " safety=" + fmt(safety),
                               energy_excess(static_cast<std::size_t>(k), o, v.energy_trials, seed), 1e-12));
      }
    }
  }
  // Sensitivity: an inadmissible initial penalty must show up as a violation.
  SatOptions bad;
  bad.sigma0 = 0.4;
  const double e = energy_excess(2, bad, v.energy_trials, seed);
  out.push_back({"energy", "sigma0=0.4 violation detected", e, 0.0, e > 0.0});
  return out;
}

inline std::vector<CheckRecord> analytic_checks() {
  std::vector<CheckRecord> out;
  const double pi2 = std::numbers::pi * std::numbers::pi;
  for (double k : {0.5, 1.0, 3.0}) {
    const double lam = transient_eigenvalue(k, k, 0.5);
    out.push_back(check_le("analytic", "homogeneous eigenvalue kappa=" + fmt(k), std::abs(lam - pi2 * k) / (pi2 * k), 1e-10));
  }
  const TwoDomainSolution s = TwoDomainSolution::make(4.0, 1.0, 0.5, 1.0, 1.0);
  out.push_back(check_le("analytic", "eigencondition residual (4,1,0.5)",
                         std::abs(detail::eigen_condition(s.lambda, 4.0, 1.0, 0.5)), 1e-12));
  double flux = 0.0;
  for (double t : {0.0, 0.5, 1.0}) flux = std::max(flux, std::abs(s.flux_left(t) - s.flux_right(t)));
  out.push_back(check_le("analytic", "interface flux continuity", flux, 1e-10));
  std::vector<double> err;
  const TwoDomainConfig cfg;
  for (int n = 8; n <= 16; n += 4) err.push_back(measure_error(two_domain_case(cfg, 4.0 / 8.0, 1.0 / 8.0, n)).l2_error);
  out.push_back(check_le("analytic", "two-domain forward error at N=16", err.back(), 1e-8));
  out.push_back({"analytic", "two-domain error decreasing", err.back(), err.front(), decreases_to_plateau(err, 1e-12)});
  return out;
}

inline ProblemSpec gradient_check_spec(std::size_t elements, int nx, int nt) {
  ModelProblemConfig c;
  c.elements = elements;
  c.nx_nodes = nx;
  c.nt_nodes = nt;
  return model_problem_spec(c);
}

inline std::vector<CheckRecord> gradient_checks(const VerifySettings& v, std::uint64_t seed) {
  std::vector<CheckRecord> out;
  for (int k : v.gradient_elements) {
    const auto kk = static_cast<std::size_t>(k);
    const Vector rho = random_interior_design(kk, seed + static_cast<std::uint64_t>(k));
    const SpaceTimeModel st(gradient_check_spec(kk, 5, 6));
    const Evaluation e = st.evaluate(rho);
    out.push_back(check_le("gradient", "st-se K=" + std::to_string(k),
                           fd_relative_error([&st](const Vector& r) { return extended_value(st, r); }, rho, e.gradient), 1e-5));
    for (BeSolver solver : {BeSolver::march, BeSolver::all_at_once}) {
      const BackwardEulerModel be(gradient_check_spec(kk, 5, 6), static_cast<std::size_t>(v.gradient_steps), solver);
      const BeEvaluation b = be.evaluate(rho);
      out.push_back(check_le("gradient", std::string(solver == BeSolver::march ? "be-fe" : "be-fe-aao") + " K=" + std::to_string(k),
                             fd_relative_error([&be](const Vector& r) { return be.value(r); }, rho, b.gradient), 1e-5));
    }
  }
  return out;
}

inline std::vector<CheckRecord> baseline_checks(const ModelProblemConfig& model) {
  std::vector<CheckRecord> out;
  const ProblemSpec spec = model_problem_spec(model);
  const FeDiscretization fe = fe_assemble(spec, DesignField::uniform(spec.element_lengths(), model.volume_bound).rho);
  const MarchingSolution m = be_march(fe, spec, 256);
  const MarchingSolution a = be_aao_solve(fe, spec, 256);
  out.push_back(check_le("baseline", "aao equals marching", (m.states - a.states).cwiseAbs().maxCoeff(),
                         1e-12 * m.states.cwiseAbs().maxCoeff()));
  const AaoSystem sys = be_aao_assemble(fe, spec, 16384);
  out.push_back({"baseline", "aao unknowns at 16384 steps", static_cast<double>(sys.unknowns()),
                 static_cast<double>((fe.nodes()) * 16385), sys.unknowns() == fe.nodes() * 16385});
  return out;
}

inline std::vector<CheckRecord> run_verify(const RunConfig& c) {
  std::vector<std::vector<CheckRecord>> groups = parallel_map(c.jobs, 5, [&c](std::size_t i) {
    switch (i) {
      case 0: return sbp_checks(c.verify.max_nodes, c.verify.random_pairs, c.seed);
      case 1: return energy_checks(c.verify, c.seed);
      case 2: return analytic_checks();
      case 3: return gradient_checks(c.verify, c.seed);
      default: return baseline_checks(c.model);
    }
  });
  std::vector<CheckRecord> out;
  for (auto& g : groups) out.insert(out.end(), g.begin(), g.end());
  return out;
}

inline int cmd_verify(const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const std::vector<CheckRecord> checks = run_verify(c);
  CsvWriter csv(dir / "verify.csv", {"group", "check", "value", "tolerance", "pass"});
  std::size_t failed = 0;
  for (const auto& r : checks) {
    csv.row({r.group, r.name, fmt(r.value), fmt(r.tolerance), r.pass ? "1" : "0"});
    failed += r.pass ? 0 : 1;
  }
  Json j;
  j["command"] = "verify";
  j["seed"] = c.seed;
  j["checks"] = checks.size();
  j["failed"] = failed;
  Json failures = Json::array();
  for (const auto& r : checks) {
    if (!r.pass) failures.push_back(r.group + ": " + r.name);
  }
  j["failures"] = failures;
  j["wall_s"] = seconds_since(t0);
  j["environment"] = environment_json(c.jobs);
  write_json(dir / "summary.json", j);
  return failed == 0 ? 0 : 1;
}

// ---------------------------------------------------------------------------
// converge

inline std::vector<ConvergenceRow> run_convergence(const ConvergeSettings& s, std::uint64_t seed, int jobs) {
  FluxMatchedConfig cfg = s.problem;
  cfg.seed = static_cast<unsigned>(seed);
  std::vector<ConvergenceRow> rows = parallel_map(jobs, s.nodes.size(), [&](std::size_t i) {
    ConvergenceRow r = measure_error(flux_matched_case(cfg, s.nodes[i]));
    r.n = s.nodes[i];
    return r;
  });
  return rows;
}

inline std::vector<ConvergenceRow> run_two_domain_convergence(const ConvergeSettings& s, int jobs) {
  const TwoDomainConfig cfg;
  // Single-mode solution; exact J by tensor Gauss quadrature of u^2.
  const double k1 = 0.5, k2 = 0.25;
  const TwoDomainSolution sol = TwoDomainSolution::make(k1, k2, cfg.xi, cfg.f, cfg.u_right, cfg.branch);
  const double j_exact = two_domain_objective(k1, k2, cfg.xi, cfg.f, cfg.u_right, cfg.final_time,
                                              [sol](double x) { return sol(x, 0.0); });
  return parallel_map(jobs, s.two_domain_nodes.size(), [&](std::size_t i) {
    VerificationCase c = two_domain_case(cfg, k1, k2, s.two_domain_nodes[i]);
    c.objective_exact = j_exact;
    ConvergenceRow r = measure_error(c);
    r.n = s.two_domain_nodes[i];
    return r;
  });
}

inline int cmd_converge(const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const auto rows = run_convergence(c.converge, c.seed, c.jobs);
  const auto two = run_two_domain_convergence(c.converge, c.jobs);
  auto emit = [](const std::filesystem::path& p, const std::vector<ConvergenceRow>& rs) {
    CsvWriter csv(p, {"n", "dof", "l2_error", "j_error"});
    for (const auto& r : rs) csv.row({std::to_string(r.n), std::to_string(r.dof), fmt(r.l2_error), fmt(r.j_error)});
  };
  emit(dir / "converge.csv", rows);
  emit(dir / "converge_two_domain.csv", two);

  std::vector<double> err, n2, e2, j2;
  for (const auto& r : rows) err.push_back(r.l2_error);
  for (const auto& r : two) {
    n2.push_back(r.n);
    e2.push_back(r.l2_error);
    j2.push_back(r.j_error);
  }
  Json j;
  j["command"] = "converge";
  j["seed"] = c.seed;
  j["min_l2_error"] = *std::min_element(err.begin(), err.end());
  j["monotone_to_plateau"] = decreases_to_plateau(err, 1e-12);
  j["two_domain_state_slope"] = slope_above(n2, e2, 1e-12);
  j["two_domain_functional_slope"] = slope_above(n2, j2, 1e-12);
  j["wall_s"] = seconds_since(t0);
  j["environment"] = environment_json(c.jobs);
  write_json(dir / "summary.json", j);
  return 0;
}

// ---------------------------------------------------------------------------
// optimize / compare on the model problem

struct SolveResult {
  SolverKind solver = SolverKind::st_se;
  int nt = 0;  // temporal nodes (st-se) or steps (be)
  long long dof = 0;
  double wall_s = 0.0;
  OptimizationTrace trace;
  std::string error;  // nonempty when the run failed
};

inline ProblemSpec model_spec(const RunConfig& c, int nt_nodes) {
  ModelProblemConfig m = c.model;
  m.nt_nodes = nt_nodes;
  return model_problem_spec(m);
}

// One optimization from the uniform design; wall time is the median over `repetitions`.
inline SolveResult optimize_model(const RunConfig& c, SolverKind solver, int nt, int repetitions) {
  SolveResult r;
  r.solver = solver;
  r.nt = nt;
  const ProblemSpec spec = model_spec(c, solver == SolverKind::st_se ? nt : c.model.nt_nodes);
  const Vector volumes = spec.element_lengths();
  const Vector start = DesignField::uniform(volumes, c.model.volume_bound).rho;
  std::vector<double> times;
  try {
    for (int rep = 0; rep < repetitions; ++rep) {
      const auto t0 = std::chrono::steady_clock::now();
      if (solver == SolverKind::st_se) {
        const SpaceTimeModel model(spec, choose_sat_coefficients(spec, c.sat));
        r.trace = run_topology_optimization(model, start, volumes, c.model.volume_bound, c.optimizer);
      } else {
        const BackwardEulerModel model(spec, static_cast<std::size_t>(nt),
                                       solver == SolverKind::be_fe ? BeSolver::march : BeSolver::all_at_once);
        r.trace = run_topology_optimization(model, start, volumes, c.model.volume_bound, c.optimizer);
      }
      times.push_back(seconds_since(t0));
    }
    r.dof = r.trace.dof;
  } catch (const std::exception& e) {
    r.error = e.what();
  }
  r.wall_s = times.empty() ? 0.0 : median(times);
  return r;
}

inline void write_design(const std::filesystem::path& path, const std::vector<double>& edges, const Vector& rho) {
  CsvWriter csv(path, {"element", "x_left", "x_right", "rho"});
  for (Index k = 0; k < rho.size(); ++k) {
    csv.row({std::to_string(k), fmt(edges[static_cast<std::size_t>(k)]), fmt(edges[static_cast<std::size_t>(k) + 1]), fmt(rho(k))});
  }
}

inline void write_trace(const std::filesystem::path& path, const OptimizationTrace& t) {
  CsvWriter csv(path, {"iter", "J", "delta_rho_inf", "j_rel"});
  for (const auto& row : t.rows) csv.row({std::to_string(row.iter), fmt(row.objective), fmt(row.delta_rho_inf), fmt(row.j_rel)});
}

inline Json trace_summary(const SolveResult& r) {
  Json j;
  j["solver"] = to_string(r.solver);
  j["Nt"] = r.nt;
  j["dof"] = r.dof;
  j["wall_s"] = r.wall_s;
  if (!r.error.empty()) {
    j["error"] = r.error;
    return j;
  }
  j["iterations"] = r.trace.iterations();
  j["stop"] = to_string(r.trace.stop);
  j["J"] = r.trace.objective;
  j["rho"] = vector_json(r.trace.rho);
  std::vector<double> hist;
  for (const auto& row : r.trace.rows) hist.push_back(row.delta_rho_inf);
  j["delta_rho_history"] = hist;
  return j;
}

// Optimum cross-validation for the two-design problem.
struct CrossValidation {
  DesignPoint reference;
  std::vector<CrossValidationRow> nx_sweep;  // N_t fixed
  std::vector<CrossValidationRow> nt_sweep;  // N_x fixed
};

inline CrossValidation run_crossvalidation(const TwoDomainSettings& s, int jobs) {
  CrossValidation cv;
  cv.reference = reference_optimum(s.problem);
  std::vector<std::pair<int, int>> points;
  for (int nx : s.nx_sweep) points.emplace_back(nx, s.nt_fixed);
  for (int nt : s.nt_sweep) points.emplace_back(s.nx_fixed, nt);
  const auto rows = parallel_map(jobs, points.size(), [&](std::size_t i) {
    return compare_to_reference(cv.reference, mma_optimum(s.problem, points[i].first, points[i].second), points[i].first,
                                points[i].second);
  });
  cv.nx_sweep.assign(rows.begin(), rows.begin() + static_cast<std::ptrdiff_t>(s.nx_sweep.size()));
  cv.nt_sweep.assign(rows.begin() + static_cast<std::ptrdiff_t>(s.nx_sweep.size()), rows.end());
  return cv;
}

inline int cmd_optimize(const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  Json j;
  j["command"] = "optimize";
  j["problem"] = c.optimize.problem;
  int status = 0;
  if (c.optimize.problem == "two_domain") {
    const CrossValidation cv = run_crossvalidation(c.two_domain, c.jobs);
    CsvWriter csv(dir / "crossval.csv",
                  {"sweep", "nx", "nt", "kappa1", "kappa2", "J", "design_error", "objective_error", "iterations", "stop"});
    auto emit = [&csv](const char* sweep, const std::vector<CrossValidationRow>& rows) {
      for (const auto& r : rows) {
        csv.row({sweep, std::to_string(r.nx), std::to_string(r.nt), fmt(r.mma.kappa1), fmt(r.mma.kappa2), fmt(r.mma.objective),
                 fmt(r.design_error), fmt(r.objective_error), std::to_string(r.mma.iterations), r.mma.stop});
      }
    };
    emit("nx", cv.nx_sweep);
    emit("nt", cv.nt_sweep);
    j["reference"] = {{"kappa1", cv.reference.kappa1}, {"kappa2", cv.reference.kappa2}, {"J", cv.reference.objective}};
    // Design at the fixed resolution, as densities under the two-domain material law.
    const auto& fin = cv.nx_sweep.back();
    const MaterialModel& m = c.two_domain.problem.material;
    Vector rho(2);
    rho << std::pow((fin.mma.kappa1 - m.kappa_min) / (m.kappa_max - m.kappa_min), 1.0 / m.p),
        std::pow((fin.mma.kappa2 - m.kappa_min) / (m.kappa_max - m.kappa_min), 1.0 / m.p);
    write_design(dir / "design.csv", {0.0, c.two_domain.problem.xi, 1.0}, rho);
    std::vector<double> n, de, je;
    for (const auto& r : cv.nx_sweep) {
      n.push_back(r.nx);
      de.push_back(r.design_error);
      je.push_back(r.objective_error);
    }
    j["nx_sweep_design_slope"] = slope_above(n, de, 1e-7);
    j["nx_sweep_objective_slope"] = slope_above(n, je, 1e-9);
  } else {
    const SolveResult r = optimize_model(c, c.optimize.solver,
                                         c.optimize.solver == SolverKind::st_se ? c.model.nt_nodes : c.optimize.steps, 1);
    j["result"] = trace_summary(r);
    if (r.error.empty()) {
      write_trace(dir / "trace.csv", r.trace);
      write_design(dir / "design.csv", model_spec(c, c.model.nt_nodes).element_edges(), r.trace.rho);
    } else {
      status = 1;
    }
  }
  j["seed"] = c.seed;
  j["wall_s"] = seconds_since(t0);
  j["environment"] = environment_json(c.jobs);
  write_json(dir / "summary.json", j);
  return status;
}

struct CompareRow {
  SolveResult result;
  double delta_rho_inf = std::numeric_limits<double>::quiet_NaN();  // change from the previous level
  double j_rel = std::numeric_limits<double>::quiet_NaN();
};

struct CompareTable {
  std::vector<CompareRow> rows;  // listed levels only, grouped by solver
  std::vector<SolveResult> lead_in;  // one level below each solver's first listed level
};

// Levels for one solver with the lead-in level that defines the first row's design change.
inline std::vector<int> compare_levels(const CompareSettings& s, SolverKind solver) {
  std::vector<int> levels = solver == SolverKind::st_se ? s.st_nodes : s.be_steps;
  const int lead = solver == SolverKind::st_se ? levels.front() - 2 : levels.front() / 2;
  if (lead >= (solver == SolverKind::st_se ? 2 : 1)) levels.insert(levels.begin(), lead);
  return levels;
}

inline CompareTable run_compare(const RunConfig& c) {
  struct Job {
    SolverKind solver;
    int nt;
  };
  std::vector<Job> jobs;
  for (SolverKind s : c.compare.solvers) {
    for (int nt : compare_levels(c.compare, s)) jobs.push_back({s, nt});
  }
  const auto results = parallel_map(c.jobs, jobs.size(), [&](std::size_t i) {
    return optimize_model(c, jobs[i].solver, jobs[i].nt, c.compare.repetitions);
  });
  CompareTable table;
  std::size_t i = 0;
  for (SolverKind s : c.compare.solvers) {
    const auto levels = compare_levels(c.compare, s);
    const bool has_lead = levels.size() > (s == SolverKind::st_se ? c.compare.st_nodes.size() : c.compare.be_steps.size());
    const SolveResult* prev = nullptr;
    for (std::size_t l = 0; l < levels.size(); ++l, ++i) {
      const SolveResult& r = results[i];
      if (has_lead && l == 0) {
        table.lead_in.push_back(r);
      } else {
        CompareRow row{r};
        if (prev && prev->error.empty() && r.error.empty()) {
          row.delta_rho_inf = (r.trace.rho - prev->trace.rho).cwiseAbs().maxCoeff();
          row.j_rel = relative_change(r.trace.objective, prev->trace.objective);
        }
        table.rows.push_back(row);
      }
      prev = &results[i];
    }
  }
  return table;
}

// First level at which the design change has been below tau for two consecutive levels.
inline std::optional<int> converged_level(const std::vector<CompareRow>& rows, SolverKind solver, double tau) {
  int streak = 0;
  for (const auto& r : rows) {
    if (r.result.solver != solver) continue;
    streak = (r.delta_rho_inf < tau) ? streak + 1 : 0;
    if (streak == 2) return r.result.nt;
  }
  return std::nullopt;
}

inline int cmd_compare(const RunConfig& c, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  const auto t0 = std::chrono::steady_clock::now();
  const CompareTable table = run_compare(c);
  CsvWriter csv(dir / "compare.csv", {"solver", "Nt", "dof", "wall_s", "delta_rho_inf", "J"});
  int status = 0;
  for (const auto& row : table.rows) {
    const SolveResult& r = row.result;
    csv.row({to_string(r.solver), std::to_string(r.nt), std::to_string(r.dof), fmt(r.wall_s), fmt(row.delta_rho_inf),
             r.error.empty() ? fmt(r.trace.objective) : "nan"});
    if (!r.error.empty()) status = 1;
  }
  Json j;
  j["command"] = "compare";
  j["tau_rho"] = c.optimizer.tau_rho;
  Json solvers = Json::array();
  for (SolverKind s : c.compare.solvers) {
    Json sj;
    sj["solver"] = to_string(s);
    const auto level = converged_level(table.rows, s, c.optimizer.tau_rho);
    sj["converged_Nt"] = level ? Json(*level) : Json(nullptr);
    double cumulative = 0.0, to_tol = -1.0;
    Json runs = Json::array();
    for (const auto& row : table.rows) {
      if (row.result.solver != s) continue;
      cumulative += row.result.wall_s;
      if (level && row.result.nt == *level && to_tol < 0) to_tol = cumulative;
      Json rj = trace_summary(row.result);
      rj["delta_rho_inf"] = row.delta_rho_inf;
      rj["j_rel"] = row.j_rel;
      runs.push_back(rj);
    }
    sj["time_to_tolerance_s"] = to_tol >= 0 ? Json(to_tol) : Json(nullptr);
    sj["runs"] = runs;
    solvers.push_back(sj);
    // Finest design of each solver.
    for (auto it = table.rows.rbegin(); it != table.rows.rend(); ++it) {
      if (it->result.solver == s && it->result.error.empty()) {
        write_design(dir / ("design_" + std::string(to_string(s)) + ".csv"), model_spec(c, c.model.nt_nodes).element_edges(),
                     it->result.trace.rho);
        break;
      }
    }
  }
  j["solvers"] = solvers;
  j["seed"] = c.seed;
  j["wall_s"] = seconds_since(t0);
  j["environment"] = environment_json(c.jobs);
  write_json(dir / "summary.json", j);
  return status;
}

}  // namespace stheat
