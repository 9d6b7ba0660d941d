#include "errt/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

namespace {

struct CommonFlags {
  std::string config_path;
  std::vector<std::string> overrides;
  std::optional<std::uint64_t> seed;
  std::string out;
  bool print_config = false;
};

void add_common(CLI::App* cmd, CommonFlags& f) {
  cmd->add_option("--config", f.config_path, "key = value configuration file");
  cmd->add_option("--set", f.overrides, "override a key, e.g. --set K_i=0.8 (repeatable)")->take_all();
  cmd->add_option("--seed", f.seed, "random seed (overrides the config)");
  cmd->add_option("--out", f.out, "output directory or file");
  cmd->add_flag("--print-config", f.print_config, "print the effective configuration and exit");
}

// Precedence: command-line flags, then the config file, then defaults.
errt::AppConfig build_config(const CommonFlags& f) {
  errt::AppConfig cfg = f.config_path.empty() ? errt::AppConfig{} : errt::load_config_file(f.config_path);
  for (const auto& kv : f.overrides) errt::apply_override(cfg, kv);
  if (f.seed) cfg.seed = *f.seed;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Exploration planner and closed-loop simulator"};
  app.require_subcommand(1);

  CommonFlags run_f, plan_f, gen_f, sweep_f;
  auto* run = app.add_subcommand("run", "run an exploration mission");
  add_common(run, run_f);

  auto* plan = app.add_subcommand("plan", "single planning call on a map snapshot");
  add_common(plan, plan_f);
  std::string map_path;
  std::vector<double> pose;
  plan->add_option("--map", map_path, "ERRTM1 map snapshot")->required();
  plan->add_option("--pose", pose, "robot position x y z")->expected(3)->required();

  auto* gen = app.add_subcommand("gen-world", "generate a procedural world (ERRTW1)");
  add_common(gen, gen_f);

  auto* sweep = app.add_subcommand("sweep", "parameter sweep over values and seeds");
  add_common(sweep, sweep_f);
  std::string sweep_key;
  std::vector<std::string> sweep_values;
  int sweep_seeds = 1;
  unsigned jobs = 1;
  sweep->add_option("--key", sweep_key, "configuration key to vary")->required();
  sweep->add_option("--values", sweep_values, "values to try")->required()->delimiter(',');
  sweep->add_option("--seeds", sweep_seeds, "number of consecutive seeds per value")->check(CLI::PositiveNumber);
  sweep->add_option("--jobs", jobs, "cells run concurrently")->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  const CommonFlags& flags = run->parsed() ? run_f : plan->parsed() ? plan_f : gen->parsed() ? gen_f : sweep_f;
  errt::AppConfig cfg;
  try {
    cfg = build_config(flags);
    if (flags.print_config) {
      errt::print_config(cfg, std::cout);
      return 0;
    }
  } catch (const errt::Error& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return errt::cli::kConfig;
  }

  if (run->parsed()) return errt::cli::cmd_run(cfg, flags.out, std::cout, std::cerr);
  if (plan->parsed())
    return errt::cli::cmd_plan(cfg, map_path, errt::Vec3(pose[0], pose[1], pose[2]), flags.out, std::cout, std::cerr);
  if (gen->parsed()) return errt::cli::cmd_gen_world(cfg, flags.out, std::cout, std::cerr);
  return errt::cli::cmd_sweep(cfg, sweep_key, sweep_values, sweep_seeds, flags.out, jobs, std::cout, std::cerr);
}
