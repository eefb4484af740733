#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <span>
#include <vector>

#include "ctmdp/model.hpp"
#include "ctmdp/semigroup.hpp"

// Policy evaluation (Monte-Carlo and exact backward integration), backward
// dynamic programming for the chain-only and environment-coupled value
// functions, the verification lower bound, and psi-feasible smoothing of
// step policies.

namespace ctmdp {

struct ValueGridChain {
  std::vector<double> knots;  // uniform, knots.front() = 0, back() = T
  std::size_t num_states = 0;
  std::vector<double> v;      // [knot][state]
  std::vector<int> astar;     // [knot][state]; -1 on the terminal row

  double at(std::size_t k, std::size_t theta) const {
    return v[k * num_states + theta];
  }
  int action_at(std::size_t k, std::size_t theta) const {
    return astar[k * num_states + theta];
  }
  double dt() const { return knots[1] - knots[0]; }
};

struct ValueGridEnv {
  std::vector<double> knots;
  std::size_t num_states = 0;
  double x_lo = 0.0;
  double dx = 0.0;
  std::size_t nx = 0;
  std::vector<double> v;   // [knot][state][x]
  std::vector<int> astar;  // same shape

  double x_at(std::size_t i) const { return x_lo + dx * static_cast<double>(i); }
  double at(std::size_t k, std::size_t theta, std::size_t i) const {
    return v[(k * num_states + theta) * nx + i];
  }
  int action_at(std::size_t k, std::size_t theta, std::size_t i) const {
    return astar[(k * num_states + theta) * nx + i];
  }
};

struct CostEstimate {
  double mean = 0.0;
  double se = 0.0;
  std::size_t npaths = 0;
  std::uint64_t seed = 0;
};

struct McOptions {
  std::size_t npaths = 1000;
  std::uint64_t seed = 0;
  double mesh_dt = 0.0;  // 0 -> (T - s) / 512
  std::size_t modulus_points = 129;
  AdmissibilityGate gate = AdmissibilityGate::W;
  bool check_admissibility = true;
};

// Thrown when a policy fails its modulus gate; carries the failing interval.
struct AdmissibilityError : std::runtime_error {
  explicit AdmissibilityError(const std::string& msg, ModulusViolation where_)
      : std::runtime_error(msg), where(where_) {}
  ModulusViolation where;
};

// Monte-Carlo cost: per path, trapezoid of the measure-extended running
// cost on the path mesh plus the terminal cost. env == nullptr runs the
// chain-only problem (x0 ignored).
CostEstimate cost_mc(const QPairModel& model, const DiffusionEnv* env,
                     const CostSpec& cost, const RelaxedMarkovPolicy& policy,
                     double s, std::size_t theta, std::span<const double> x0,
                     const McOptions& options);

// Exact chain-only evaluation: backward RK4 for
// dv/dr = -Q(r) v - f_bar(r, .), v(T) = g. Returns v(s) for every state.
std::vector<double> cost_exact_chain_all(const QPairModel& model,
                                         const CostSpec& cost,
                                         const RelaxedMarkovPolicy& policy,
                                         double s, double tol);
double cost_exact_chain(const QPairModel& model, const CostSpec& cost,
                        const RelaxedMarkovPolicy& policy, double s,
                        std::size_t theta, double tol);

// Thrown when an explicit scheme's stability condition fails; carries the
// step count that would satisfy it.
struct StabilityError : std::runtime_error {
  StabilityError(const std::string& msg, std::size_t required_steps_)
      : std::runtime_error(msg), required_steps(required_steps_) {}
  std::size_t required_steps;
};

// Backward explicit scheme over (time x state), minimizing over grid
// actions; ties break to the lowest action index. Requires dt * 2M < 1.
ValueGridChain dp_chain(const QPairModel& model, const CostSpec& cost,
                        double horizon, std::size_t n_steps);

// Backward explicit scheme over (time x state x 1-D x-grid): upwind first
// derivative, central second derivative, second-derivative-zero boundary
// closure. Requires dt (sig2_max/dx^2 + |b|_max/dx + 2M) <= 1.
ValueGridEnv dp_env(const QPairModel& model, const DiffusionEnv& env,
                    const CostSpec& cost, double horizon, std::size_t n_steps,
                    double x_lo, double x_hi, std::size_t nx);

struct VerifyReport {
  bool pass = false;
  bool terminal_ok = false;
  double min_residual = 0.0;
  std::size_t arg_knot = 0;
  std::size_t arg_state = 0;
  std::size_t arg_action = 0;
  double max_phi_minus_vdp = 0.0;
  double tolerance = 0.0;
};

// Checks the verification display residual
//   (phi(t+dt) - phi(t))/dt + f(t,theta,u) + sum_l q(theta,l;u) phi(t,l)
//     - q(theta;u) phi(t,theta) >= -tolerance
// at every grid triple and phi(T, .) = g; also reports the maximum of
// phi - v_dp over the grid (v_dp recomputed on the same grid).
VerifyReport verify_lower_bound(const ValueGridChain& phi, const QPairModel& model,
                                const CostSpec& cost, double tolerance);

// a* indices of a chain value grid as Dirac measures (piecewise constant).
RelaxedMarkovPolicy policy_from_chain_grid(const ValueGridChain& grid,
                                           const ActionGrid& actions,
                                           const PsiModulus& psi);

struct SmoothedPolicyResult {
  RelaxedMarkovPolicy policy;
  ModulusReport modulus;
  std::vector<double> cost_delta;  // per state, exact eval at s = 0
  double cost_delta_max = 0.0;
  double effective_linear_slope = 0.0;  // reported L: max ramp slope D/w
};

// Replaces each discontinuity of a piecewise-constant policy by a
// mixture-linear ramp wide enough that the per-state modulus satisfies psi;
// refuses (with the minimal feasible linear slope in the message) when no
// ramp width up to the knot spacing works.
struct FeasibilityError : std::runtime_error {
  FeasibilityError(const std::string& msg, double minimal_linear_slope_)
      : std::runtime_error(msg), minimal_linear_slope(minimal_linear_slope_) {}
  double minimal_linear_slope;
};

SmoothedPolicyResult psi_feasible_interpolation(const QPairModel& model,
                                                const CostSpec& cost,
                                                const RelaxedMarkovPolicy& step_policy,
                                                const PsiModulus& psi, double tol,
                                                std::size_t modulus_points = 257);

struct DiracReductionReport {
  double min_dirac = 0.0;
  double min_sampled = 0.0;
  std::size_t trials = 0;
  bool pass = false;
};

// The one-step objective is affine in the measure, so its minimum over
// sampled measures can never undercut the minimum over Diracs.
DiracReductionReport dirac_reduction_check(const QPairModel& model,
                                           const CostSpec& cost, double t,
                                           std::size_t theta,
                                           std::span<const double> v,
                                           std::size_t trials, std::uint64_t seed);

}  // namespace ctmdp
