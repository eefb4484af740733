#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>

#include "ctmdp/rng.hpp"
#include "ctmdp/scenario.hpp"
#include "ctmdp/semigroup.hpp"
#include "ctmdp/simulate.hpp"
#include "ctmdp/solve.hpp"

namespace ctmdp::scenario {

namespace {

namespace fs = std::filesystem;

// CSV files are written to a temp path and renamed into place.
class CsvFile {
 public:
  CsvFile(const std::string& dir, const std::string& name) {
    fs::create_directories(dir);
    final_ = fs::path(dir) / name;
    tmp_ = fs::path(dir) / (name + ".tmp");
    out_.open(tmp_, std::ios::binary | std::ios::trunc);
    if (!out_) throw std::runtime_error("cannot write " + tmp_.string());
  }
  std::ofstream& stream() { return out_; }
  void commit() {
    out_.close();
    fs::rename(tmp_, final_);
  }

 private:
  fs::path final_, tmp_;
  std::ofstream out_;
};

Numerics effective_numerics(const Scenario& scn, const CommandOptions& options) {
  Numerics num = scn.numerics;
  if (options.seed) num.seed = *options.seed;
  if (options.npaths) num.npaths = *options.npaths;
  if (options.dt) num.dt = *options.dt;
  if (options.dx) num.dx = *options.dx;
  if (options.tol) num.tol = *options.tol;
  return num;
}

struct Loaded {
  Scenario scn;
  Numerics num;
};

// Exits with code 2 on any parse problem; the caller returns early.
std::optional<Loaded> load(const CommandOptions& options, std::ostream& out) {
  try {
    Scenario scn = load_scenario(options.scenario_path);
    Numerics num = effective_numerics(scn, options);
    return Loaded{std::move(scn), num};
  } catch (const ParseError& e) {
    out << "error: " << e.what() << "\n";
    return std::nullopt;
  } catch (const std::exception& e) {
    out << "error: " << e.what() << "\n";
    return std::nullopt;
  }
}

double sampled_cost_floor(const Scenario& scn) {
  const QPairModel& model = *scn.model;
  double low = std::numeric_limits<double>::infinity();
  std::vector<double> xs;
  if (scn.env) {
    const auto [lo, hi] = scn.x_domain();
    for (int i = 0; i < 33; ++i)
      xs.push_back(lo + (hi - lo) * static_cast<double>(i) / 32.0);
  }
  for (std::size_t th = 0; th < model.num_states(); ++th) {
    for (std::size_t u = 0; u < model.actions().size(); ++u) {
      if (xs.empty()) {
        low = std::min(low, scn.cost.f(0.0, {}, th, model.actions().point(u)));
      } else {
        for (double x : xs)
          low = std::min(low, scn.cost.f(0.0, {&x, 1}, th, model.actions().point(u)));
      }
    }
    if (xs.empty()) {
      low = std::min(low, scn.cost.g({}, th));
    } else {
      for (double x : xs) low = std::min(low, scn.cost.g({&x, 1}, th));
    }
  }
  return low;
}

RelaxedMarkovPolicy env_slice_policy(const ValueGridEnv& vg, std::size_t i0,
                                     const PsiModulus& psi) {
  std::vector<std::vector<MeasureOnU>> curves(vg.num_states);
  for (std::size_t th = 0; th < vg.num_states; ++th) {
    for (std::size_t k = 0; k + 1 < vg.knots.size(); ++k) {
      const int a = vg.action_at(k, th, i0);
      curves[th].push_back(MeasureOnU::dirac(static_cast<std::size_t>(a)));
    }
    curves[th].push_back(curves[th].back());
  }
  return RelaxedMarkovPolicy(vg.knots, std::move(curves),
                             PolicyInterp::PiecewiseConstant, psi);
}

}  // namespace

int cmd_validate(const CommandOptions& options, std::ostream& out) {
  const auto loaded = load(options, out);
  if (!loaded) return 2;
  const Scenario& scn = loaded->scn;
  const HypothesisReport rep =
      validate_hypotheses(*scn.model, scn.env.get(), *scn.lyapunov);
  out << rep.to_table();
  const double floor = sampled_cost_floor(scn);
  out << "cost bound  " << (floor >= scn.cost.lower_bound - 1e-9 ? "pass" : "FAIL")
      << "  sampled min = " << format_double(floor)
      << ", declared lower bound = " << format_double(scn.cost.lower_bound) << "\n";
  return rep.h2 ? 0 : 1;
}

int cmd_evaluate(const CommandOptions& options, std::ostream& out) {
  const auto loaded = load(options, out);
  if (!loaded) return 2;
  const Scenario& scn = loaded->scn;
  const Numerics& num = loaded->num;
  if (options.policy_path.empty()) {
    out << "error: evaluate needs --policy\n";
    return 2;
  }
  std::optional<RelaxedMarkovPolicy> policy;
  try {
    policy = load_policy(options.policy_path, scn);
  } catch (const ParseError& e) {
    out << "error: " << e.what() << "\n";
    return 2;
  }

  {
    const auto grid = modulus_eval_grid(*policy, num.modulus_points);
    const ModulusReport rep = modulus_report(*policy, scn.model->actions(), grid);
    if (!rep.pass(scn.gate)) {
      const auto& worst =
          scn.gate == AdmissibilityGate::W ? rep.worst_w : rep.worst_w2;
      out << "inadmissible policy";
      if (worst)
        out << ": state " << worst->state << ", interval ["
            << format_double(worst->t1) << ", " << format_double(worst->t2)
            << "), modulus " << format_double(worst->value) << " > psi "
            << format_double(worst->bound);
      out << "\n";
      return 1;
    }
  }

  const bool with_env = options.use_env && scn.env != nullptr;
  if (options.mode == "exact" && with_env) {
    out << "error: the exact evaluator is chain-only; drop --env or use --mode mc\n";
    return 2;
  }

  double exact = 0.0;
  bool have_exact = false;
  if (!with_env) {
    exact = cost_exact_chain(*scn.model, scn.cost, *policy, scn.s0, scn.theta0,
                             num.tol);
    have_exact = true;
  }

  CostEstimate est{};
  if (options.mode == "mc") {
    McOptions mc;
    mc.npaths = num.npaths;
    mc.seed = num.seed;
    mc.mesh_dt = num.dt;
    mc.modulus_points = num.modulus_points;
    mc.gate = scn.gate;
    mc.check_admissibility = false;  // already checked above
    est = cost_mc(*scn.model, with_env ? scn.env.get() : nullptr, scn.cost, *policy,
                  scn.s0, scn.theta0, scn.x0, mc);
    out << "mc: J = " << format_double(est.mean) << " +- " << format_double(est.se)
        << " (" << est.npaths << " paths, seed " << est.seed << ")\n";
  }
  if (have_exact)
    out << "exact: J = " << format_double(exact) << "\n";

  CsvFile csv(options.out_dir, "evaluate.csv");
  csv.stream() << "mode,mean,se,npaths,seed,exact\n";
  if (options.mode == "mc") {
    csv.stream() << "mc," << format_double(est.mean) << ',' << format_double(est.se)
                 << ',' << est.npaths << ',' << est.seed << ','
                 << (have_exact ? format_double(exact) : "") << "\n";
  } else {
    csv.stream() << "exact," << format_double(exact) << ",0,0," << num.seed << ','
                 << format_double(exact) << "\n";
  }
  csv.commit();

  if (options.mode == "mc" && have_exact) {
    const double gap = std::abs(est.mean - exact);
    const double budget = 4.0 * est.se + 1e-9;
    if (gap > budget) {
      out << "mc-vs-exact discrepancy: |" << format_double(est.mean) << " - "
          << format_double(exact) << "| = " << format_double(gap) << " > 4 SE = "
          << format_double(budget) << "\n";
      return 1;
    }
  }
  return 0;
}

int cmd_solve(const CommandOptions& options, std::ostream& out) {
  const auto loaded = load(options, out);
  if (!loaded) return 2;
  const Scenario& scn = loaded->scn;
  const Numerics& num = loaded->num;
  const QPairModel& model = *scn.model;
  const double horizon = scn.horizon;
  const auto n_steps = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::ceil(horizon / num.dt)));

  if (!h2_holds(model)) {
    out << "error: scenario fails H2; solvers refuse the model\n";
    return 1;
  }

  if (!options.use_env) {
    ValueGridChain vg;
    try {
      vg = dp_chain(model, scn.cost, horizon, n_steps);
    } catch (const StabilityError& e) {
      out << "error: " << e.what() << "\n";
      return 1;
    }
    const double dt = vg.dt();
    const std::size_t k0 =
        std::min(vg.knots.size() - 1,
                 static_cast<std::size_t>(std::llround(scn.s0 / dt)));
    out << "V(" << format_double(vg.knots[k0]) << ", "
        << scn.state_labels[scn.theta0]
        << ") = " << format_double(vg.at(k0, scn.theta0)) << "\n";

    const RelaxedMarkovPolicy step_policy =
        policy_from_chain_grid(vg, model.actions(), scn.psi);
    std::optional<SmoothedPolicyResult> smooth;
    try {
      smooth = psi_feasible_interpolation(model, scn.cost, step_policy, scn.psi,
                                          num.tol, num.modulus_points);
    } catch (const FeasibilityError& e) {
      out << "error: " << e.what() << "\n";
      return 1;
    }
    out << "smoothing: delta = " << format_double(smooth->cost_delta_max)
        << ", ramp slope L = " << format_double(smooth->effective_linear_slope)
        << ", modulus " << (smooth->modulus.pass_w ? "pass" : "FAIL") << "\n";

    double max_f = 0.0, max_v = 0.0;
    for (std::size_t k = 0; k + 1 < vg.knots.size(); ++k)
      for (std::size_t th = 0; th < model.num_states(); ++th)
        for (std::size_t u = 0; u < model.actions().size(); ++u)
          max_f = std::max(max_f, std::abs(scn.cost.f(vg.knots[k], {}, th,
                                                      model.actions().point(u))));
    for (double v : vg.v) max_v = std::max(max_v, std::abs(v));
    const double tolerance =
        10.0 * dt * (max_f + 2.0 * model.measured_m() * max_v);
    const VerifyReport rep = verify_lower_bound(vg, model, scn.cost, tolerance);
    out << "verification: min residual = " << format_double(rep.min_residual)
        << " (tolerance " << format_double(tolerance) << "), "
        << (rep.pass ? "pass" : "FAIL") << "\n";

    CsvFile csv(options.out_dir, "value.csv");
    csv.stream() << "t,theta,v,astar\n";
    for (std::size_t k = 0; k < vg.knots.size(); ++k)
      for (std::size_t th = 0; th < model.num_states(); ++th)
        csv.stream() << format_double(vg.knots[k]) << ',' << scn.state_labels[th]
                     << ',' << format_double(vg.at(k, th)) << ','
                     << vg.action_at(k, th) << "\n";
    csv.commit();
    save_policy(fs::path(options.out_dir) / "policy.json", smooth->policy);
    return rep.pass ? 0 : 1;
  }

  // --env: finite-difference solve over (t, x, theta).
  if (!scn.env) {
    out << "error: --env requires an environment block in the scenario\n";
    return 2;
  }
  const auto [x_lo, x_hi] = scn.x_domain();
  const auto nx = std::max<std::size_t>(
      3, static_cast<std::size_t>(std::llround((x_hi - x_lo) / num.dx)) + 1);
  ValueGridEnv vg;
  try {
    vg = dp_env(model, *scn.env, scn.cost, horizon, n_steps, x_lo, x_hi, nx);
  } catch (const StabilityError& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
  const double x0 = scn.x0.empty() ? 0.0 : scn.x0[0];
  const std::size_t i0 = std::min(
      nx - 1, static_cast<std::size_t>(std::llround((x0 - x_lo) / vg.dx)));
  out << "V(" << format_double(scn.s0) << ", " << format_double(vg.x_at(i0)) << ", "
      << scn.state_labels[scn.theta0]
      << ") = " << format_double(vg.at(0, scn.theta0, i0)) << "\n";

  const RelaxedMarkovPolicy step_policy = env_slice_policy(vg, i0, scn.psi);
  std::optional<SmoothedPolicyResult> smooth;
  try {
    smooth = psi_feasible_interpolation(model, scn.cost, step_policy, scn.psi,
                                        num.tol, num.modulus_points);
  } catch (const FeasibilityError& e) {
    out << "error: " << e.what() << "\n";
    return 1;
  }
  // cost_delta from psi_feasible_interpolation ignores x terms (chain-only
  // evaluator); report the Monte-Carlo delta along the environment instead.
  McOptions mc;
  mc.npaths = num.npaths;
  mc.seed = num.seed;
  mc.mesh_dt = num.dt;
  mc.check_admissibility = false;
  const CostEstimate step_cost = cost_mc(model, scn.env.get(), scn.cost, step_policy,
                                         scn.s0, scn.theta0, scn.x0, mc);
  const CostEstimate smooth_cost = cost_mc(model, scn.env.get(), scn.cost,
                                           smooth->policy, scn.s0, scn.theta0,
                                           scn.x0, mc);
  out << "smoothing: mc delta = "
      << format_double(smooth_cost.mean - step_cost.mean) << " +- "
      << format_double(std::hypot(step_cost.se, smooth_cost.se)) << ", ramp slope L = "
      << format_double(smooth->effective_linear_slope) << ", modulus "
      << (smooth->modulus.pass_w ? "pass" : "FAIL") << "\n";
  out << "verification: the lower-bound certificate is chain-only; skipped for --env\n";

  CsvFile csv(options.out_dir, "value.csv");
  csv.stream() << "t,theta,x,v,astar\n";
  for (std::size_t k = 0; k < vg.knots.size(); ++k)
    for (std::size_t th = 0; th < model.num_states(); ++th)
      for (std::size_t i = 0; i < nx; ++i)
        csv.stream() << format_double(vg.knots[k]) << ',' << scn.state_labels[th]
                     << ',' << format_double(vg.x_at(i)) << ','
                     << format_double(vg.at(k, th, i)) << ','
                     << vg.action_at(k, th, i) << "\n";
  csv.commit();
  save_policy(fs::path(options.out_dir) / "policy.json", smooth->policy);
  return 0;
}

int cmd_simulate(const CommandOptions& options, std::ostream& out) {
  const auto loaded = load(options, out);
  if (!loaded) return 2;
  const Scenario& scn = loaded->scn;
  const Numerics& num = loaded->num;
  const QPairModel& model = *scn.model;
  if (options.policy_path.empty()) {
    out << "error: simulate needs --policy\n";
    return 2;
  }
  std::optional<RelaxedMarkovPolicy> policy;
  try {
    policy = load_policy(options.policy_path, scn);
  } catch (const ParseError& e) {
    out << "error: " << e.what() << "\n";
    return 2;
  }
  if (!h2_holds(model)) {
    out << "error: scenario fails H2; the sampler refuses the model\n";
    return 1;
  }

  const double horizon = scn.horizon;
  const double s0 = scn.s0;
  const bool with_env = options.use_env && scn.env != nullptr;
  bool all_pass = true;

  std::vector<ChainPath> chains(num.npaths);
  std::vector<CoupledPath> coupled;
  if (with_env) coupled.resize(num.npaths);
  parallel_for(num.npaths, [&](std::size_t p) {
    if (with_env) {
      coupled[p] = sample_coupled_seeds(model, *scn.env, *policy, s0, scn.x0,
                                        scn.theta0, horizon, num.dt,
                                        rng::derive_seed(num.seed, 2 * p),
                                        rng::derive_seed(num.seed, 2 * p + 1));
      chains[p] = coupled[p].chain;
    } else {
      chains[p] =
          sample_chain(model, *policy, s0, scn.theta0, horizon,
                       rng::derive_seed(num.seed, 2 * p));
    }
  });

  {
    CsvFile csv(options.out_dir, "paths.csv");
    if (with_env) {
      csv.stream() << "path,t,state,x\n";
      for (std::size_t p = 0; p < coupled.size(); ++p) {
        const CoupledPath& cp = coupled[p];
        for (std::size_t i = 0; i < cp.times.size(); ++i)
          csv.stream() << p << ',' << format_double(cp.times[i]) << ','
                       << scn.state_labels[cp.chain.state_at(cp.times[i])] << ','
                       << format_double(cp.x[i * cp.dim]) << "\n";
      }
    } else {
      csv.stream() << "path,t,state\n";
      for (std::size_t p = 0; p < chains.size(); ++p) {
        const ChainPath& path = chains[p];
        csv.stream() << p << ',' << format_double(s0) << ','
                     << scn.state_labels[path.initial_state] << "\n";
        for (std::size_t j = 0; j < path.jump_times.size(); ++j)
          csv.stream() << p << ',' << format_double(path.jump_times[j]) << ','
                       << scn.state_labels[path.visited[j + 1]] << "\n";
      }
    }
    csv.commit();
  }

  CsvFile moments(options.out_dir, "moments.csv");
  moments.stream() << "check,t,param,mean,se,bound,pass\n";

  {
    std::vector<double> grid;
    for (int i = 1; i <= 8; ++i)
      grid.push_back(s0 + (horizon - s0) * static_cast<double>(i) / 8.0);
    const PhiMomentReport rep =
        phi_moment_check(chains, *scn.lyapunov, scn.theta0, horizon, grid);
    for (const MomentCheckRow& row : rep.rows)
      moments.stream() << "phi_moment," << format_double(row.t) << ",,"
                       << format_double(row.mean) << ',' << format_double(row.se)
                       << ',' << format_double(row.bound) << ','
                       << (row.pass ? 1 : 0) << "\n";
    all_pass = all_pass && rep.pass;
    out << "phi moment bound: " << (rep.pass ? "pass" : "FAIL") << "\n";
  }
  {
    const double t = s0 + (horizon - s0) * 0.25;
    const double u = (horizon - s0) / 8.0;
    const HoldingBoundReport rep =
        holding_probability_check(chains, t, u, model.declared_m());
    moments.stream() << "holding," << format_double(rep.t) << ','
                     << format_double(rep.u) << ',' << format_double(rep.empirical)
                     << ',' << format_double(rep.se) << ','
                     << format_double(rep.bound) << ',' << (rep.pass ? 1 : 0)
                     << "\n";
    all_pass = all_pass && rep.pass;
    out << "holding probability bound: " << (rep.pass ? "pass" : "FAIL") << "\n";
  }
  if (with_env) {
    // t1, t2 must be mesh times of every path: take them from the shared
    // uniform grid (jump times differ per path).
    const double span = horizon - s0;
    const auto steps = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil(span / num.dt)));
    auto uniform_time = [&](std::size_t k) {
      return s0 + span * static_cast<double>(k) / static_cast<double>(steps);
    };
    const double t1 = uniform_time(steps / 4);
    const double t2 = uniform_time(steps / 2);
    const IncrementMomentReport rep = increment_moment_check(
        coupled, t1, t2, scn.env->growth_c2, horizon);
    moments.stream() << "increment_moment," << format_double(rep.t1) << ','
                     << format_double(rep.t2) << ',' << format_double(rep.lhs) << ','
                     << format_double(rep.lhs_se) << ',' << format_double(rep.rhs)
                     << ',' << (rep.pass ? 1 : 0) << "\n";
    all_pass = all_pass && rep.pass;
    out << "increment moment bound: " << (rep.pass ? "pass" : "FAIL")
        << " (ratio " << format_double(rep.ratio) << ")\n";
  }
  moments.commit();
  return all_pass ? 0 : 1;
}

}  // namespace ctmdp::scenario
