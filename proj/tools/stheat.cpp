#include <cstdio>
#include <exception>
#include <filesystem>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "stheat/commands.hpp"
#include "stheat/config.hpp"

namespace {

struct Options {
  std::string config;
  std::optional<int> jobs;
  std::optional<std::uint64_t> seed;
  std::string out = ".";
};

void add_common(CLI::App* cmd, Options& o) {
  cmd->add_option("--config", o.config, "key=value configuration file")->required()->check(CLI::ExistingFile);
  cmd->add_option("--jobs", o.jobs, "worker threads for independent sweep points")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", o.seed, "random seed for designs and sampled data");
  cmd->add_option("--out", o.out, "output directory");
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Space-time SBP-SAT topology optimization for transient heat conduction"};
  app.require_subcommand(1);
  Options o;
  struct Entry {
    const char* name;
    const char* help;
    int (*run)(const stheat::RunConfig&, const std::filesystem::path&);
  };
  const Entry entries[] = {
      {"verify", "operator, stability, analytic-solution and gradient checks", stheat::cmd_verify},
      {"converge", "spectral convergence on manufactured and analytic solutions", stheat::cmd_converge},
      {"optimize", "design optimization (model problem or two-design cross-validation)", stheat::cmd_optimize},
      {"compare", "ST-SE versus backward Euler solver comparison over time resolutions", stheat::cmd_compare},
  };
  for (const auto& e : entries) add_common(app.add_subcommand(e.name, e.help), o);
  CLI11_PARSE(app, argc, argv);

  try {
    stheat::RunConfig cfg = stheat::parse_config(o.config);
    if (o.jobs) cfg.jobs = *o.jobs;
    if (o.seed) cfg.seed = *o.seed;
    stheat::validate_config(cfg);
    for (const auto& e : entries) {
      if (app.got_subcommand(e.name)) return e.run(cfg, o.out);
    }
  } catch (const stheat::ConfigError& e) {
    std::fprintf(stderr, "configuration error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 1;
}
