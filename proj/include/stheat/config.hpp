#pragma once

// Run configuration: plain key = value lines grouped under [section]
// headers. '#' and ';' start comments. Every key must be known; anything
// else is a ConfigError naming the section.key path.

#include <cmath>
#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "stheat/discretization.hpp"
#include "stheat/errors.hpp"
#include "stheat/optimizer.hpp"
#include "stheat/verification.hpp"

namespace stheat {

enum class SolverKind { st_se, be_fe, be_fe_aao };

inline const char* to_string(SolverKind s) {
  switch (s) {
    case SolverKind::st_se: return "st-se";
    case SolverKind::be_fe: return "be-fe";
    case SolverKind::be_fe_aao: return "be-fe-aao";
  }
  return "?";
}

struct VerifySettings {
  int max_nodes = 16;
  int random_pairs = 100;
  int energy_trials = 20;
  std::vector<int> energy_elements{1, 2, 5};
  std::vector<int> gradient_elements{2, 10};
  int gradient_steps = 64;  // backward Euler steps in the gradient check
};

struct ConvergeSettings {
  FluxMatchedConfig problem;
  std::vector<int> nodes{4, 6, 8, 10, 12, 14, 16, 18, 20};
  std::vector<int> two_domain_nodes{4, 5, 6, 7, 8, 9};
};

struct OptimizeSettings {
  std::string problem = "model";  // model | two_domain
  SolverKind solver = SolverKind::st_se;
  int steps = 16384;  // backward Euler steps when a BE solver is selected
};

struct TwoDomainSettings {
  TwoDomainConfig problem;
  std::vector<int> nx_sweep{4, 6, 8, 10, 14, 20, 30, 40};
  std::vector<int> nt_sweep{4, 6, 8, 10, 14, 20, 30};
  int nx_fixed = 40;
  int nt_fixed = 30;
};

struct CompareSettings {
  std::vector<SolverKind> solvers{SolverKind::be_fe, SolverKind::be_fe_aao, SolverKind::st_se};
  std::vector<int> be_steps{8, 16, 32, 64, 128, 256, 512, 1024, 2048, 4096, 8192, 16384};
  std::vector<int> st_nodes{11, 13, 15};
  int repetitions = 3;
};

struct RunConfig {
  ModelProblemConfig model;
  SatOptions sat;
  OptimizationOptions optimizer{1e-4, 1e-8, 100, {}};
  VerifySettings verify;
  ConvergeSettings converge;
  OptimizeSettings optimize;
  TwoDomainSettings two_domain;
  CompareSettings compare;
  std::uint64_t seed = 7;
  int jobs = 1;
};

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  double out = 0.0;
  try {
    out = std::stod(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected a number, got '" + v + "'");
  }
  if (used != v.size() || !std::isfinite(out)) throw ConfigError(key, "expected a number, got '" + v + "'");
  return out;
}

inline long long to_integer(const std::string& key, const std::string& v) {
  std::size_t used = 0;
  long long out = 0;
  try {
    out = std::stoll(v, &used);
  } catch (const std::exception&) {
    throw ConfigError(key, "expected an integer, got '" + v + "'");
  }
  if (used != v.size()) throw ConfigError(key, "expected an integer, got '" + v + "'");
  return out;
}

inline std::vector<std::string> split_list(const std::string& v) {
  std::vector<std::string> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

inline SolverKind to_solver(const std::string& key, const std::string& v) {
  if (v == "st-se") return SolverKind::st_se;
  if (v == "be-fe") return SolverKind::be_fe;
  if (v == "be-fe-aao") return SolverKind::be_fe_aao;
  throw ConfigError(key, "unknown solver '" + v + "' (st-se, be-fe, be-fe-aao)");
}

// Setter table: one entry per accepted section.key.
class KeyTable {
 public:
  using Setter = std::function<void(const std::string& key, const std::string& value)>;

  void add(const std::string& key, Setter s) { setters_[key] = std::move(s); }
  void real(const std::string& key, double& target) {
    add(key, [&target](const std::string& k, const std::string& v) { target = to_double(k, v); });
  }
  template <class Int>
  void integer(const std::string& key, Int& target) {
    add(key, [&target](const std::string& k, const std::string& v) { target = static_cast<Int>(to_integer(k, v)); });
  }
  void int_list(const std::string& key, std::vector<int>& target) {
    add(key, [&target](const std::string& k, const std::string& v) {
      target.clear();
      for (const auto& item : split_list(v)) target.push_back(static_cast<int>(to_integer(k, item)));
    });
  }
  void apply(const std::string& key, const std::string& value) const {
    const auto it = setters_.find(key);
    if (it == setters_.end()) throw ConfigError(key, "unknown key");
    it->second(key, value);
  }

 private:
  std::map<std::string, Setter> setters_;
};

inline KeyTable key_table(RunConfig& c) {
  KeyTable t;
  t.integer("run.seed", c.seed);
  t.integer("run.jobs", c.jobs);

  auto& m = c.model;
  t.integer("problem.elements", m.elements);
  t.integer("problem.nx_nodes", m.nx_nodes);
  t.integer("problem.nt_nodes", m.nt_nodes);
  t.real("problem.final_time", m.final_time);
  t.real("problem.source_constant", m.source_constant);
  t.real("problem.volume_bound", m.volume_bound);
  t.real("problem.kappa_min", m.material.kappa_min);
  t.real("problem.kappa_max", m.material.kappa_max);
  t.real("problem.penalty", m.material.p);

  t.real("sat.sigma0", c.sat.sigma0);
  t.real("sat.s", c.sat.s);
  t.real("sat.safety", c.sat.safety);
  t.add("sat.sigma_interface", [&c](const std::string& k, const std::string& v) { c.sat.sigma_interface = to_double(k, v); });

  auto& o = c.optimizer;
  t.real("optimizer.tau_rho", o.tau_rho);
  t.real("optimizer.tau_j", o.tau_j);
  t.integer("optimizer.max_iterations", o.max_iterations);
  t.real("optimizer.move_limit", o.mma.move_limit);
  t.real("optimizer.asy_init", o.mma.asy_init);
  t.real("optimizer.asy_incr", o.mma.asy_incr);
  t.real("optimizer.asy_decr", o.mma.asy_decr);

  auto& v = c.verify;
  t.integer("verify.max_nodes", v.max_nodes);
  t.integer("verify.random_pairs", v.random_pairs);
  t.integer("verify.energy_trials", v.energy_trials);
  t.int_list("verify.energy_elements", v.energy_elements);
  t.int_list("verify.gradient_elements", v.gradient_elements);
  t.integer("verify.gradient_steps", v.gradient_steps);

  auto& cv = c.converge;
  t.real("converge.x_left", cv.problem.x_left);
  t.real("converge.x_right", cv.problem.x_right);
  t.real("converge.final_time", cv.problem.final_time);
  t.integer("converge.elements", cv.problem.elements);
  t.real("converge.omega", cv.problem.omega);
  t.real("converge.kappa_min", cv.problem.material.kappa_min);
  t.real("converge.kappa_max", cv.problem.material.kappa_max);
  t.real("converge.penalty", cv.problem.material.p);
  t.int_list("converge.nodes", cv.nodes);
  t.int_list("converge.two_domain_nodes", cv.two_domain_nodes);

  t.add("optimize.problem", [&c](const std::string& k, const std::string& val) {
    if (val != "model" && val != "two_domain") throw ConfigError(k, "expected 'model' or 'two_domain', got '" + val + "'");
    c.optimize.problem = val;
  });
  t.add("optimize.solver", [&c](const std::string& k, const std::string& val) { c.optimize.solver = to_solver(k, val); });
  t.integer("optimize.steps", c.optimize.steps);

  auto& td = c.two_domain;
  t.real("two_domain.xi", td.problem.xi);
  t.real("two_domain.f", td.problem.f);
  t.real("two_domain.u_right", td.problem.u_right);
  t.real("two_domain.final_time", td.problem.final_time);
  t.real("two_domain.volume_bound", td.problem.volume_bound);
  t.real("two_domain.nominal_kappa1", td.problem.nominal_kappa1);
  t.real("two_domain.nominal_kappa2", td.problem.nominal_kappa2);
  t.integer("two_domain.branch", td.problem.branch);
  t.real("two_domain.tau_rho", td.problem.tau_rho);
  t.integer("two_domain.max_iterations", td.problem.max_iterations);
  t.real("two_domain.reference_tol", td.problem.reference_tol);
  t.integer("two_domain.series_modes", td.problem.series_modes);
  t.int_list("two_domain.nx_sweep", td.nx_sweep);
  t.int_list("two_domain.nt_sweep", td.nt_sweep);
  t.integer("two_domain.nx_fixed", td.nx_fixed);
  t.integer("two_domain.nt_fixed", td.nt_fixed);

  t.add("compare.solvers", [&c](const std::string& k, const std::string& val) {
    c.compare.solvers.clear();
    for (const auto& item : split_list(val)) c.compare.solvers.push_back(to_solver(k, item));
  });
  t.int_list("compare.be_steps", c.compare.be_steps);
  t.int_list("compare.st_nodes", c.compare.st_nodes);
  t.integer("compare.repetitions", c.compare.repetitions);
  return t;
}

}  // namespace detail

// Constraint checks shared by file and flag input.
inline void validate_config(const RunConfig& c) {
  auto need = [](bool ok, const std::string& key, const std::string& what) {
    if (!ok) throw ConfigError(key, what);
  };
  auto nonempty_positive = [&need](const std::vector<int>& v, const std::string& key, int min) {
    need(!v.empty(), key, "list must not be empty");
    for (int x : v) need(x >= min, key, "entries must be >= " + std::to_string(min));
  };
  need(c.jobs >= 1, "run.jobs", "must be >= 1");
  need(c.model.elements >= 1, "problem.elements", "must be >= 1");
  need(c.model.nx_nodes >= 2, "problem.nx_nodes", "must be >= 2");
  need(c.model.nt_nodes >= 2, "problem.nt_nodes", "must be >= 2");
  need(c.model.final_time > 0.0, "problem.final_time", "must be positive");
  need(c.model.volume_bound > 0.0 && c.model.volume_bound <= 1.0, "problem.volume_bound", "must lie in (0, 1]");
  need(c.model.material.kappa_min >= 0.0, "problem.kappa_min", "must be >= 0");
  need(c.model.material.kappa_max > c.model.material.kappa_min, "problem.kappa_max", "must exceed kappa_min");
  need(c.model.material.p >= 1.0, "problem.penalty", "must be >= 1");
  need(c.sat.sigma0 > 0.0, "sat.sigma0", "must be positive");
  need(c.sat.s > 0.0, "sat.s", "must be positive");
  need(c.sat.safety >= 1.0, "sat.safety", "must be >= 1");
  need(!c.sat.sigma_interface || *c.sat.sigma_interface > 0.0, "sat.sigma_interface", "must be positive");
  need(c.optimizer.tau_rho >= 0.0, "optimizer.tau_rho", "must be >= 0");
  need(c.optimizer.tau_j >= 0.0, "optimizer.tau_j", "must be >= 0");
  need(c.optimizer.max_iterations >= 1, "optimizer.max_iterations", "must be >= 1");
  need(c.optimizer.mma.move_limit > 0.0 && c.optimizer.mma.move_limit <= 1.0, "optimizer.move_limit", "must lie in (0, 1]");
  need(c.optimizer.mma.asy_init > 0.0 && c.optimizer.mma.asy_init <= 1.0, "optimizer.asy_init", "must lie in (0, 1]");
  need(c.optimizer.mma.asy_incr >= 1.0, "optimizer.asy_incr", "must be >= 1");
  need(c.optimizer.mma.asy_decr > 0.0 && c.optimizer.mma.asy_decr <= 1.0, "optimizer.asy_decr", "must lie in (0, 1]");
  need(c.verify.max_nodes >= 2, "verify.max_nodes", "must be >= 2");
  need(c.verify.random_pairs >= 1, "verify.random_pairs", "must be >= 1");
  need(c.verify.energy_trials >= 1, "verify.energy_trials", "must be >= 1");
  nonempty_positive(c.verify.energy_elements, "verify.energy_elements", 1);
  nonempty_positive(c.verify.gradient_elements, "verify.gradient_elements", 1);
  need(c.verify.gradient_steps >= 1, "verify.gradient_steps", "must be >= 1");
  need(c.converge.problem.x_left < c.converge.problem.x_right, "converge.x_right", "must exceed x_left");
  need(c.converge.problem.final_time > 0.0, "converge.final_time", "must be positive");
  need(c.converge.problem.elements >= 1, "converge.elements", "must be >= 1");
  nonempty_positive(c.converge.nodes, "converge.nodes", 2);
  nonempty_positive(c.converge.two_domain_nodes, "converge.two_domain_nodes", 2);
  need(c.optimize.steps >= 1, "optimize.steps", "must be >= 1");
  const auto& td = c.two_domain.problem;
  need(td.xi > 0.0 && td.xi < 1.0, "two_domain.xi", "must lie in (0, 1)");
  need(td.final_time > 0.0, "two_domain.final_time", "must be positive");
  need(td.volume_bound > 0.0 && td.volume_bound < 1.0, "two_domain.volume_bound", "must lie in (0, 1)");
  need(td.nominal_kappa1 > 0.0 && td.nominal_kappa2 > 0.0, "two_domain.nominal_kappa1", "nominal diffusivities must be positive");
  need(td.branch >= 0, "two_domain.branch", "must be >= 0");
  need(td.max_iterations >= 1, "two_domain.max_iterations", "must be >= 1");
  need(td.reference_tol > 0.0, "two_domain.reference_tol", "must be positive");
  need(td.series_modes >= 1, "two_domain.series_modes", "must be >= 1");
  nonempty_positive(c.two_domain.nx_sweep, "two_domain.nx_sweep", 2);
  nonempty_positive(c.two_domain.nt_sweep, "two_domain.nt_sweep", 2);
  need(c.two_domain.nx_fixed >= 2, "two_domain.nx_fixed", "must be >= 2");
  need(c.two_domain.nt_fixed >= 2, "two_domain.nt_fixed", "must be >= 2");
  need(!c.compare.solvers.empty(), "compare.solvers", "list must not be empty");
  nonempty_positive(c.compare.be_steps, "compare.be_steps", 1);
  nonempty_positive(c.compare.st_nodes, "compare.st_nodes", 3);
  need(c.compare.repetitions >= 1, "compare.repetitions", "must be >= 1");
}

inline RunConfig parse_config_text(const std::string& text) {
  RunConfig c;
  detail::KeyTable table = detail::key_table(c);
  std::istringstream in(text);
  std::string line, section;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find_first_of("#;");
    if (hash != std::string::npos) line.erase(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("", "line " + std::to_string(line_no) + ": malformed section header");
      section = detail::trim(line.substr(1, line.size() - 2));
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("", "line " + std::to_string(line_no) + ": expected key = value");
    }
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string value = detail::trim(line.substr(eq + 1));
    const std::string path = section.empty() ? key : section + "." + key;
    if (value.empty()) throw ConfigError(path, "missing value");
    table.apply(path, value);
  }
  validate_config(c);
  return c;
}

inline RunConfig parse_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("", "cannot open config file '" + path + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parse_config_text(ss.str());
}

}  // namespace stheat
