#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "ctmdp/scenario.hpp"

namespace {

struct RawOptions {
  std::uint64_t seed = 0;
  std::size_t npaths = 0;
  double dt = 0.0;
  double dx = 0.0;
  double tol = 0.0;
};

void add_common(CLI::App* cmd, ctmdp::scenario::CommandOptions& opt,
                RawOptions& raw) {
  cmd->add_option("--scenario", opt.scenario_path, "scenario JSON file")
      ->required();
  cmd->add_option("--out", opt.out_dir, "output directory for CSV/JSON results");
  cmd->add_option("--seed", raw.seed, "master seed (default: scenario value)");
  cmd->add_option("--npaths", raw.npaths, "Monte-Carlo paths");
  cmd->add_option("--dt", raw.dt, "time step");
  cmd->add_option("--dx", raw.dx, "x-grid step (dp_env)");
  cmd->add_option("--tol", raw.tol, "integrator tolerance");
}

// Only overrides the user actually typed reach the command.
void collect(const CLI::App* cmd, ctmdp::scenario::CommandOptions& opt,
             const RawOptions& raw) {
  if (cmd->count("--seed")) opt.seed = raw.seed;
  if (cmd->count("--npaths")) opt.npaths = raw.npaths;
  if (cmd->count("--dt")) opt.dt = raw.dt;
  if (cmd->count("--dx")) opt.dx = raw.dx;
  if (cmd->count("--tol")) opt.tol = raw.tol;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"finite-horizon optimal control for CTMDPs in a diffusion environment"};
  app.require_subcommand(1);

  ctmdp::scenario::CommandOptions opt;
  RawOptions raw;

  CLI::App* validate = app.add_subcommand("validate", "check hypotheses H1-H6");
  add_common(validate, opt, raw);

  CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate a policy's cost");
  add_common(evaluate, opt, raw);
  evaluate->add_option("--policy", opt.policy_path, "policy JSON file")->required();
  evaluate->add_option("--mode", opt.mode, "mc | exact")
      ->check(CLI::IsMember({"mc", "exact"}));
  evaluate->add_flag("--env", opt.use_env, "evaluate along the diffusion environment");

  CLI::App* solve = app.add_subcommand("solve", "backward dynamic programming");
  add_common(solve, opt, raw);
  solve->add_flag("--env", opt.use_env, "solve the environment-coupled problem");

  CLI::App* simulate =
      app.add_subcommand("simulate", "sample paths and run moment checks");
  add_common(simulate, opt, raw);
  simulate->add_option("--policy", opt.policy_path, "policy JSON file")->required();
  simulate->add_flag("--env", opt.use_env, "simulate the coupled diffusion");

  CLI11_PARSE(app, argc, argv);

  try {
    if (validate->parsed()) {
      collect(validate, opt, raw);
      return ctmdp::scenario::cmd_validate(opt, std::cout);
    }
    if (evaluate->parsed()) {
      collect(evaluate, opt, raw);
      return ctmdp::scenario::cmd_evaluate(opt, std::cout);
    }
    if (solve->parsed()) {
      collect(solve, opt, raw);
      return ctmdp::scenario::cmd_solve(opt, std::cout);
    }
    if (simulate->parsed()) {
      collect(simulate, opt, raw);
      return ctmdp::scenario::cmd_simulate(opt, std::cout);
    }
  } catch (const std::exception& e) {
    std::cout << "error: " << e.what() << "\n";
    return 2;
  }
  return 2;
}
