// Acceptance run: one PASS/FAIL line per criterion, followed by the measured
// numbers behind it. Exit status is nonzero when any criterion fails.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "stheat/commands.hpp"

using namespace stheat;

namespace {

using Clock = std::chrono::steady_clock;

int failures = 0;

void report(int id, bool pass, const std::string& title, const std::vector<std::string>& details) {
  std::printf("criterion %d: %s  %s\n", id, pass ? "PASS" : "FAIL", title.c_str());
  for (const auto& d : details) std::printf("    %s\n", d.c_str());
  std::fflush(stdout);
  failures += pass ? 0 : 1;
}

std::string num(double v) {
  char buf[48];
  std::snprintf(buf, sizeof buf, "%.3g", v);
  return buf;
}

// Worst record of a group plus overall pass flag.
struct GroupResult {
  bool pass = true;
  double worst = 0.0;
  std::string worst_name;
};

GroupResult summarize(const std::vector<CheckRecord>& records, const std::string& contains = "") {
  GroupResult g;
  double worst_ratio = -1.0;
  for (const auto& r : records) {
    if (!contains.empty() && r.name.find(contains) == std::string::npos) continue;
    g.pass = g.pass && r.pass;
    const double ratio = r.tolerance > 0.0 ? r.value / r.tolerance : r.value;
    if (ratio > worst_ratio) {
      worst_ratio = ratio;
      g.worst = r.value;
      g.worst_name = r.name;
    }
  }
  return g;
}

void criterion_operators() {
  const auto t0 = Clock::now();
  const auto records = sbp_checks(16, 100, 7);
  const double secs = seconds_since(t0);
  const GroupResult id = summarize(records, "identity"), ex = summarize(records, "exactness"),
                    ibp = summarize(records, "integration by parts");
  const bool pass = id.pass && ex.pass && ibp.pass && secs < 5.0;
  report(1, pass, "SBP operator suite, n = 2..16",
         {"max identity residual " + num(id.worst) + " (" + id.worst_name + "), tol 1e-13",
          "max monomial exactness error " + num(ex.worst) + " (" + ex.worst_name + "), tol 1e-11",
          "max integration-by-parts residual " + num(ibp.worst) + " over 100 random pairs, tol 1e-12",
          "runtime " + num(secs) + " s, limit 5 s"});
}

void criterion_convergence() {
  const auto t0 = Clock::now();
  const ConvergeSettings s;
  const auto rows = run_convergence(s, 7, 1);
  const double secs = seconds_since(t0);
  std::vector<double> err;
  std::string line = "L2 error by N:";
  for (const auto& r : rows) {
    err.push_back(r.l2_error);
    line += " " + std::to_string(r.n) + ":" + num(r.l2_error);
  }
  const double best = *std::min_element(err.begin(), err.end());
  // Plateau: the tail after the error first reaches 1e-10 stays within round-off of 1e-13.
  double plateau = 0.0;
  bool reached = false;
  for (double e : err) {
    if (reached) plateau = std::max(plateau, e);
    reached = reached || e <= 1e-10;
  }
  const bool monotone = decreases_to_plateau(err, 1e-12);
  const bool pass = monotone && best <= 1e-10 && reached && plateau <= 1e-12 && secs < 60.0;
  report(2, pass, "forward spectral convergence, 10 elements on [-2,1]x[0,1], N = 4..20",
         {line, "monotone down to the round-off plateau: " + std::string(monotone ? "yes" : "no"),
          "smallest error " + num(best) + " (need <= 1e-10), largest error on the plateau " + num(plateau) +
              " (need <= 1e-12)",
          "runtime " + num(secs) + " s, limit 60 s"});
}

void criterion_analytic() {
  const auto records = analytic_checks();
  std::vector<std::string> details;
  for (const auto& r : records) details.push_back(r.name + ": " + num(r.value) + " (tol " + num(r.tolerance) + ")");
  report(3, summarize(records).pass, "two-domain analytic solution and spectral forward solve", details);
}

void criterion_energy() {
  const VerifySettings v;
  const auto records = energy_checks(v, 7);
  bool admissible = true;
  double worst = -std::numeric_limits<double>::infinity(), sensitivity = 0.0;
  bool detected = false;
  for (const auto& r : records) {
    if (r.name.find("sigma0=0.4") != std::string::npos) {
      sensitivity = r.value;
      detected = r.pass;
    } else {
      admissible = admissible && r.pass;
      worst = std::max(worst, r.value);
    }
  }
  report(4, admissible && detected, "energy estimate with zero data",
         {std::to_string(records.size() - 1) + " SAT settings x 20 random initial states at K = 1, 2, 5",
          "largest relative excess of terminal energy over the bound " + num(worst) + " (need <= 1e-12)",
          "sigma0 = 0.4 excess " + num(sensitivity) + ", violation detected: " + (detected ? "yes" : "no")});
}

void criterion_gradients() {
  const auto t0 = Clock::now();
  const VerifySettings v;
  const auto records = gradient_checks(v, 7);
  const double secs = seconds_since(t0);
  std::vector<std::string> details;
  for (const auto& r : records) details.push_back(r.name + ": max relative FD discrepancy " + num(r.value) + " (tol 1e-5)");
  details.push_back("runtime " + num(secs) + " s, limit 120 s");
  report(5, summarize(records).pass && secs < 120.0, "adjoint gradients against central differences", details);
}

void criterion_crossvalidation() {
  const TwoDomainSettings s;
  const CrossValidation cv = run_crossvalidation(s, 1);
  auto slopes = [](const std::vector<CrossValidationRow>& rows, bool by_nx) {
    std::vector<double> n, de, je;
    for (const auto& r : rows) {
      n.push_back(by_nx ? r.nx : r.nt);
      de.push_back(r.design_error);
      je.push_back(r.objective_error);
    }
    return std::pair{slope_above(n, de, 1e-7), slope_above(n, je, 1e-9)};
  };
  const auto [dx, jx] = slopes(cv.nx_sweep, true);
  const auto [dt, jt] = slopes(cv.nt_sweep, false);
  const double fine = cv.nx_sweep.back().design_error;
  const bool agree = fine <= 1e-3;
  const bool design_linear = std::abs(dx - 1.0) <= 0.5 && std::abs(dt - 1.0) <= 0.5;
  const bool objective_third = jx >= 2.5 && jt >= 2.5;
  std::string nx_line = "N_x sweep (N_t = 30) design error:", nt_line = "N_t sweep (N_x = 40) design error:";
  for (const auto& r : cv.nx_sweep) nx_line += " " + std::to_string(r.nx) + ":" + num(r.design_error);
  for (const auto& r : cv.nt_sweep) nt_line += " " + std::to_string(r.nt) + ":" + num(r.design_error);
  report(6, agree && design_linear && objective_third, "optimum cross-validation against the series reference",
         {"reference kappa = (" + num(cv.reference.kappa1) + ", " + num(cv.reference.kappa2) + "), J = " +
              num(cv.reference.objective),
          "relative design error at N_x = 40, N_t = 30: " + num(fine) + " (need <= 1e-3): " + (agree ? "ok" : "no"),
          nx_line, nt_line,
          "design-error slope N_x " + num(dx) + ", N_t " + num(dt) + " (need ~1, accepted 0.5..1.5): " +
              (design_linear ? "ok" : "no"),
          "objective-error slope N_x " + num(jx) + ", N_t " + num(jt) + " (need >= 2.5): " + (objective_third ? "ok" : "no")});
}

const CompareRow* find_row(const CompareTable& t, SolverKind s, int nt) {
  for (const auto& r : t.rows) {
    if (r.result.solver == s && r.result.nt == nt) return &r;
  }
  return nullptr;
}

// First listed level whose design change is at or below tol.
std::optional<int> first_below(const CompareTable& t, SolverKind s, double tol) {
  for (const auto& r : t.rows) {
    if (r.result.solver == s && r.delta_rho_inf <= tol) return r.result.nt;
  }
  return std::nullopt;
}

std::string level(std::optional<int> l) { return l ? std::to_string(*l) : std::string("not reached"); }

void criterion_comparison(const RunConfig& c, const CompareTable& t) {
  const auto st_tol = first_below(t, SolverKind::st_se, 1e-5);
  const bool st_ok = st_tol && *st_tol <= 15;

  const auto be_61 = first_below(t, SolverKind::be_fe, 6.1e-5);
  const auto be_tol = first_below(t, SolverKind::be_fe, 1e-5);
  const auto st_conv = converged_level(t.rows, SolverKind::st_se, c.optimizer.tau_rho);
  const auto be_conv = converged_level(t.rows, SolverKind::be_fe, c.optimizer.tau_rho);
  // Temporal DoF at tolerance: ST-SE nodes against BE steps, unreached counts as unbounded.
  const auto dof = [](std::optional<int> l) { return l ? static_cast<double>(*l) : std::numeric_limits<double>::infinity(); };
  const bool ordering = dof(st_tol) < dof(be_tol) && dof(st_conv) < dof(be_conv) && dof(st_tol) < dof(be_61);

  const auto base = baseline_checks(c.model);
  const bool aao_states = base[0].pass, unknowns = base[1].pass;
  bool aao_designs = true;
  for (int n : c.compare.be_steps) {
    const CompareRow* m = find_row(t, SolverKind::be_fe, n);
    const CompareRow* a = find_row(t, SolverKind::be_fe_aao, n);
    if (!m || !a) continue;
    aao_designs = aao_designs && (m->result.trace.rho - a->result.trace.rho).cwiseAbs().maxCoeff() <= 1e-10;
  }
  const CompareRow* finest = find_row(t, SolverKind::be_fe, c.compare.be_steps.back());
  const double finest_s = finest ? finest->result.wall_s : std::numeric_limits<double>::infinity();
  const bool pass = st_ok && ordering && aao_states && aao_designs && unknowns && finest_s < 900.0;

  std::string st_line = "ST-SE design change by N_t^c:", be_line = "BE-FE design change by steps:";
  for (const auto& r : t.rows) {
    if (r.result.solver == SolverKind::st_se) st_line += " " + std::to_string(r.result.nt) + ":" + num(r.delta_rho_inf);
    if (r.result.solver == SolverKind::be_fe) be_line += " " + std::to_string(r.result.nt) + ":" + num(r.delta_rho_inf);
  }
  report(7, pass, "ST-SE against backward Euler over temporal resolution",
         {st_line, be_line,
          "ST-SE first below 1e-5 at N_t^c = " + level(st_tol) + " (need <= 15): " + (st_ok ? "ok" : "no"),
          "BE-FE steps to fall below 1e-5: " + level(be_tol) + "; below 6.1e-5: " + level(be_61),
          "two-sweep convergence at tau_rho = " + num(c.optimizer.tau_rho) + ": ST-SE N_t^c = " + level(st_conv) +
              ", BE-FE steps = " + level(be_conv),
          "temporal DoF at tolerance ordered ST-SE < BE: " + std::string(ordering ? "ok" : "no"),
          "AAO vs marching states at 256 steps " + num(base[0].value) + " (tol " + num(base[0].tolerance) +
              "), identical designs across the sweep: " + (aao_designs ? "yes" : "no"),
          "AAO unknowns at 16384 steps: " + std::to_string(static_cast<long long>(base[1].value)) + " (need 835635): " + (unknowns ? "ok" : "no"),
          "wall time at 16384 steps: " + num(finest_s) + " s, limit 900 s"});
}

void criterion_design(const RunConfig& c, const CompareTable& t) {
  const CompareRow* st = find_row(t, SolverKind::st_se, c.compare.st_nodes.back());
  const CompareRow* be = find_row(t, SolverKind::be_fe, c.compare.be_steps.back());
  if (!st || !be || !st->result.error.empty() || !be->result.error.empty()) {
    report(8, false, "optimized design of the model problem", {"missing or failed solver run"});
    return;
  }
  const Vector& rho = st->result.trace.rho;
  const Index k = rho.size();
  const double peak = rho.maxCoeff();
  // Moving away from the Dirichlet end, density never increases.
  double worst_rise = 0.0;
  for (Index i = k - 1; i > 0; --i) worst_rise = std::max(worst_rise, rho(i - 1) - rho(i));
  Index high = 0;
  for (Index i = 0; i < k; ++i) high += rho(i) > 0.5 ? 1 : 0;
  Index block = 0;  // run of elements at the peak ending at the Dirichlet end
  while (block < k && rho(k - 1 - block) >= peak - 1e-12) ++block;
  const bool adjacent = rho(k - 1) >= peak - 1e-12 && peak > 0.5;
  const bool taper = worst_rise <= 1e-6;
  const double j_st = st->result.trace.objective, j_be = be->result.trace.objective;
  const double rel = std::abs(j_st - j_be) / std::abs(j_be);
  std::string profile = "ST-SE rho (right end first):";
  for (Index i = k - 1; i >= std::max<Index>(0, k - 12); --i) profile += " " + num(rho(i));
  report(8, adjacent && taper && rel <= 0.02, "optimized design of the model problem",
         {profile,
          "peak density " + num(peak) + " attained by the last " + std::to_string(block) + " of " + std::to_string(k) +
              " elements, ending at the Dirichlet end: " + (adjacent ? "yes" : "no") + "; " + std::to_string(high) +
              " elements above 0.5",
          "largest increase moving away from the Dirichlet end " + num(worst_rise) + " (need <= 1e-6)",
          "J ST-SE (N_t^c = " + std::to_string(st->result.nt) + ") " + num(j_st) + ", BE-FE (" +
              std::to_string(be->result.nt) + " steps) " + num(j_be) + ", relative gap " + num(rel) + " (need <= 0.02)"});
}

}  // namespace

int main() {
  const auto t0 = Clock::now();
  criterion_operators();
  criterion_convergence();
  criterion_analytic();
  criterion_energy();
  criterion_gradients();
  criterion_crossvalidation();
  RunConfig c;
  c.compare.repetitions = 1;
  const CompareTable table = run_compare(c);
  criterion_comparison(c, table);
  criterion_design(c, table);
  std::printf("%d of 8 criteria failed, total %.1f s\n", failures, seconds_since(t0));
  return failures == 0 ? 0 : 1;
}
