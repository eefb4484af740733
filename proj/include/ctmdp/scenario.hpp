#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "ctmdp/model.hpp"

// Scenario-driven front end: JSON scenario and policy files, CSV emission
// with full round-trip precision, and the validate / simulate / evaluate /
// solve commands the CLI dispatches to. Every command is a pure function of
// (scenario bytes, flags, seed): identical inputs give byte-identical
// outputs.

namespace ctmdp::scenario {

struct Numerics {
  double dt = 1.0 / 256.0;
  double dx = 0.05;
  double tol = 1e-8;
  std::size_t npaths = 1000;
  std::uint64_t seed = 0;
  std::size_t modulus_points = 129;
};

struct Scenario {
  int version = 1;
  double horizon = 1.0;
  std::vector<std::string> state_labels;
  std::unique_ptr<QPairModel> model;
  std::unique_ptr<LyapunovSpec> lyapunov;
  PsiModulus psi = PsiModulus::linear(0.0);
  AdmissibilityGate gate = AdmissibilityGate::W;
  std::unique_ptr<DiffusionEnv> env;  // optional
  std::optional<double> x_domain_lo, x_domain_hi;
  CostSpec cost;
  double s0 = 0.0;
  std::size_t theta0 = 0;
  std::vector<double> x0;
  Numerics numerics;

  // Default x-domain: x0 +/- 6 sqrt(C2 (1 + x0^2)) T, per the H6 growth
  // constant, unless the scenario pins one.
  std::pair<double, double> x_domain() const;
};

// Thrown on malformed scenario / policy files (unknown fields included).
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

Scenario load_scenario(const std::filesystem::path& file);
Scenario parse_scenario(const std::string& json_text);

RelaxedMarkovPolicy load_policy(const std::filesystem::path& file,
                                const Scenario& scn);
RelaxedMarkovPolicy parse_policy(const std::string& json_text, const Scenario& scn);
std::string policy_to_json(const RelaxedMarkovPolicy& policy);
void save_policy(const std::filesystem::path& file,
                 const RelaxedMarkovPolicy& policy);

// Full round-trip decimal formatting (17 significant digits).
std::string format_double(double v);

struct CommandOptions {
  std::string scenario_path;
  std::string policy_path;
  std::string out_dir = ".";
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> npaths;
  std::optional<double> dt;
  std::optional<double> dx;
  std::optional<double> tol;
  bool use_env = false;
  std::string mode = "exact";  // evaluate: mc | exact
};

// Exit codes: 0 success, 1 semantic failure (failed hypothesis, failed
// bound, disagreement), 2 parse/configuration failure.
int cmd_validate(const CommandOptions& options, std::ostream& out);
int cmd_evaluate(const CommandOptions& options, std::ostream& out);
int cmd_solve(const CommandOptions& options, std::ostream& out);
int cmd_simulate(const CommandOptions& options, std::ostream& out);

}  // namespace ctmdp::scenario
