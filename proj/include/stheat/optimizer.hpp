#pragma once

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>
#include <vector>

#include "stheat/errors.hpp"
#include "stheat/linalg.hpp"
#include "stheat/mma.hpp"

namespace stheat {

struct OptimizationOptions {
  double tau_rho = 1e-4;
  double tau_j = 0.0;  // 0 disables the objective-change test
  int max_iterations = 100;
  MmaConfig mma;
};

struct TraceRow {
  int iter = 0;
  Vector rho;
  double objective = 0.0;
  double delta_rho_inf = 0.0;
  double j_rel = 0.0;
  double wall_s = 0.0;
};

enum class StopReason { design_change, objective_change, max_iterations };

inline const char* to_string(StopReason r) {
  switch (r) {
    case StopReason::design_change: return "design_change";
    case StopReason::objective_change: return "objective_change";
    case StopReason::max_iterations: return "max_iterations";
  }
  return "unknown";
}

struct OptimizationTrace {
  std::vector<TraceRow> rows;
  StopReason stop = StopReason::max_iterations;
  Vector rho;          // final design
  double objective = 0.0;  // objective at the final design
  double wall_s = 0.0;
  long long dof = 0;

  int iterations() const noexcept { return static_cast<int>(rows.size()); }
};

constexpr double kRelativeChangeFloor = 1e-12;

inline double relative_change(double current, double previous) {
  return std::abs(current - previous) / std::max(std::abs(previous), kRelativeChangeFloor);
}

// Model needs evaluate(rho) returning {objective, gradient, dof} and value(rho).
template <class Model>
OptimizationTrace run_topology_optimization(const Model& model, const Vector& rho0, const Vector& volumes,
                                            double volume_bound, const OptimizationOptions& options) {
  if (rho0.size() != volumes.size()) throw InvalidArgument("run_topology_optimization: size mismatch");
  if (options.max_iterations < 1) throw InvalidArgument("run_topology_optimization: max_iterations < 1");
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();

  OptimizationTrace trace;
  MmaState state;
  state.config = options.mma;
  Vector rho = rho0;
  double previous_j = 0.0;
  for (int it = 1; it <= options.max_iterations; ++it) {
    decltype(model.evaluate(rho)) ev;
    try {
      ev = model.evaluate(rho);
    } catch (const std::exception& e) {
      throw NumericalFailure("optimization iteration " + std::to_string(it) + ": " + e.what());
    }
    trace.dof = ev.dof;
    const Vector next = mma_update(rho, ev.gradient, volumes, volume_bound, state);

    TraceRow row;
    row.iter = it;
    row.rho = next;
    row.objective = ev.objective;
    row.delta_rho_inf = (next - rho).cwiseAbs().maxCoeff();
    row.j_rel = it == 1 ? 0.0 : relative_change(ev.objective, previous_j);
    row.wall_s = std::chrono::duration<double>(clock::now() - start).count();
    trace.rows.push_back(row);
    previous_j = ev.objective;
    rho = next;

    if (row.delta_rho_inf < options.tau_rho) {
      trace.stop = StopReason::design_change;
      break;
    }
    if (options.tau_j > 0.0 && it > 1 && row.j_rel < options.tau_j) {
      trace.stop = StopReason::objective_change;
      break;
    }
  }
  trace.rho = rho;
  trace.objective = model.value(rho);
  trace.wall_s = std::chrono::duration<double>(clock::now() - start).count();
  return trace;
}

}  // namespace stheat
