#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

// Domain types for controlled jump chains: discretized compact action sets,
// finitely supported measures on them, action-parameterized conservative
// rate pairs, relaxed (measure-valued) Markov policies, the coupled
// diffusion environment, and the hypothesis validators that gate the
// solvers and samplers.

namespace ctmdp {

// Finite discretization of a compact action set U in R^k.
class ActionGrid {
 public:
  ActionGrid(std::vector<std::vector<double>> points, std::vector<double> box_lo,
             std::vector<double> box_hi);

  std::size_t size() const { return count_; }
  std::size_t dim() const { return dim_; }
  std::span<const double> point(std::size_t i) const {
    return {flat_.data() + i * dim_, dim_};
  }
  const std::vector<double>& box_lo() const { return box_lo_; }
  const std::vector<double>& box_hi() const { return box_hi_; }
  // Euclidean ground distance between grid points.
  double distance(std::size_t i, std::size_t j) const;

 private:
  std::size_t count_ = 0;
  std::size_t dim_ = 0;
  std::vector<double> flat_;  // count x dim, row-major
  std::vector<double> box_lo_, box_hi_;
};

// Finitely supported probability measure over an ActionGrid. Support
// indices are kept sorted and distinct; weights are nonnegative and sum to
// one within 1e-12. Exact zero weights are dropped.
class MeasureOnU {
 public:
  MeasureOnU(std::vector<std::size_t> support, std::vector<double> weights);
  static MeasureOnU dirac(std::size_t index);
  // wa * a + wb * b, supports merged.
  static MeasureOnU mix(const MeasureOnU& a, double wa, const MeasureOnU& b,
                        double wb);

  std::size_t size() const { return support_.size(); }
  std::size_t index(std::size_t i) const { return support_[i]; }
  double weight(std::size_t i) const { return weights_[i]; }
  std::size_t max_index() const { return support_.empty() ? 0 : support_.back(); }
  bool same_as(const MeasureOnU& other) const;

 private:
  std::vector<std::size_t> support_;
  std::vector<double> weights_;
};

// L1-Wasserstein distance between two measures over the same grid.
// k = 1 uses the exact CDF sweep; k > 1 solves the discrete transport
// problem exactly (successive shortest paths). Support indices outside the
// grid are a configuration error.
double w1_distance(const MeasureOnU& mu, const MeasureOnU& nu,
                   const ActionGrid& grid);

// Conservative action-parameterized rate pair on a finite (truncated)
// state set. Off-diagonal rates are tabulated on states x states x actions;
// the total rate is constructed as the in-order sum of the off-diagonal
// row, never stored independently, so conservativeness holds exactly.
class QPairModel {
 public:
  using RateFn = std::function<double(std::size_t from, std::size_t to,
                                      std::span<const double> action)>;

  QPairModel(std::vector<std::string> states, ActionGrid grid,
             const RateFn& offdiag_rate, double declared_m);
  // Dense [from][to][action] table constructor (scenario loading).
  QPairModel(std::vector<std::string> states, ActionGrid grid,
             const std::vector<double>& table, double declared_m);

  std::size_t num_states() const { return states_.size(); }
  const std::vector<std::string>& states() const { return states_; }
  const ActionGrid& actions() const { return grid_; }
  double rate(std::size_t from, std::size_t to, std::size_t action) const {
    return rows_[(from * grid_.size() + action) * states_.size() + to];
  }
  // Off-diagonal row over destination states (diagonal slot holds 0).
  std::span<const double> rate_row(std::size_t from, std::size_t action) const {
    return {rows_.data() + (from * grid_.size() + action) * states_.size(),
            states_.size()};
  }
  double total_rate(std::size_t from, std::size_t action) const {
    return totals_[from * grid_.size() + action];
  }
  double declared_m() const { return declared_m_; }
  // Exact sup of the total rate over the grid.
  double measured_m() const { return measured_m_; }
  std::size_t state_index(const std::string& label) const;

 private:
  void build_totals();

  std::vector<std::string> states_;
  ActionGrid grid_;
  std::vector<double> rows_;    // [from][action][to], diagonal zero
  std::vector<double> totals_;  // [from][action]
  double declared_m_ = 0.0;
  double measured_m_ = 0.0;
};

// Mixed rates under a measure on actions: component gamma is
// sum_i w_i * rate(theta, gamma, u_i); total is the in-order sum of the
// mixed components (exact conservativeness).
struct RateRow {
  std::vector<double> to;
  double total = 0.0;
};
RateRow mixed_rate(const QPairModel& model, std::size_t theta,
                   const MeasureOnU& mu);

// Drift condition data: Q_u Phi <= lambda Phi + kappa0 1_B0.
class LyapunovSpec {
 public:
  LyapunovSpec(std::vector<double> phi, double lambda, double kappa0,
               std::vector<std::size_t> b0,
               std::vector<std::size_t> core = {});

  const std::vector<double>& phi() const { return phi_; }
  double lambda() const { return lambda_; }
  double kappa0() const { return kappa0_; }
  bool in_b0(std::size_t state) const;
  const std::vector<std::size_t>& b0() const { return b0_; }
  // Core set for the truncation-quality diagnostic; empty means all states.
  const std::vector<std::size_t>& core() const { return core_; }

 private:
  std::vector<double> phi_;
  double lambda_;
  double kappa0_;
  std::vector<std::size_t> b0_;
  std::vector<std::size_t> core_;
};

// Regularity modulus psi: nondecreasing with psi(0+) = 0.
class PsiModulus {
 public:
  enum class Form { Linear, Power, Table };

  static PsiModulus linear(double slope);
  static PsiModulus power(double coeff, double exponent);
  static PsiModulus tabulated(std::vector<double> r, std::vector<double> v);

  Form form() const { return form_; }
  double linear_slope() const { return a_; }
  double power_coeff() const { return a_; }
  double power_exponent() const { return b_; }
  const std::vector<double>& table_r() const { return table_r_; }
  const std::vector<double>& table_v() const { return table_v_; }
  double operator()(double r) const;

 private:
  PsiModulus() = default;
  Form form_ = Form::Linear;
  double a_ = 0.0;
  double b_ = 1.0;
  std::vector<double> table_r_, table_v_;
};

// Stationary randomized policy: one measure per state.
struct RandomizedStationaryPolicy {
  std::vector<MeasureOnU> per_state;
};

enum class PolicyInterp { PiecewiseConstant, MixtureLinear };

// Measure-valued curve per state on shared time knots. Piecewise-constant
// curves are right-continuous; mixture-linear curves blend the bracketing
// knot measures by weight.
class RelaxedMarkovPolicy {
 public:
  RelaxedMarkovPolicy(std::vector<double> knots,
                      std::vector<std::vector<MeasureOnU>> curves,
                      PolicyInterp interp, PsiModulus psi);

  const std::vector<double>& knots() const { return knots_; }
  double horizon() const { return knots_.back(); }
  std::size_t num_states() const { return curves_.size(); }
  PolicyInterp interp() const { return interp_; }
  const PsiModulus& psi() const { return psi_; }
  const MeasureOnU& knot_measure(std::size_t state, std::size_t k) const {
    return curves_[state][k];
  }
  // Right-continuous (cadlag) evaluation.
  MeasureOnU measure_at(std::size_t state, double t) const;
  // Left limit at t > 0; integrators use it at segment tops so quadrature
  // never straddles a piecewise-constant jump.
  MeasureOnU measure_at_left(std::size_t state, double t) const;
  bool is_time_constant() const;

 private:
  std::vector<double> knots_;
  std::vector<std::vector<MeasureOnU>> curves_;  // [state][knot]
  PolicyInterp interp_;
  PsiModulus psi_;
};

// Constant-in-time lift of a stationary policy; its per-state moduli are
// identically zero, so it is admissible for every psi.
RelaxedMarkovPolicy lift_stationary(const RandomizedStationaryPolicy& pi,
                                    double horizon);

// Environment SDE coefficients b(x, theta), sigma(x, theta) with declared
// Lipschitz (H5) and growth (H6) constants.
struct DiffusionEnv {
  using Field = std::function<void(std::span<const double> x, std::size_t theta,
                                   std::span<double> out)>;
  std::size_t dim = 1;
  Field drift;       // out: dim
  Field sigma;       // out: dim x dim, row-major
  double lip_c1 = 0.0;
  double growth_c2 = 0.0;
};

// Running and terminal costs. x is empty for the chain-only problem.
struct CostSpec {
  using RunningFn = std::function<double(double t, std::span<const double> x,
                                         std::size_t theta,
                                         std::span<const double> action)>;
  using TerminalFn =
      std::function<double(std::span<const double> x, std::size_t theta)>;
  RunningFn f;
  TerminalFn g;
  double lower_bound = 0.0;
  // Hints used to cache mixed running costs along piecewise-constant
  // policy segments; keep true when unsure.
  bool f_time_dependent = true;
  bool f_x_dependent = true;
};

// f extended to measures: sum_i w_i f(t, x, theta, u_i).
double mixed_running_cost(const CostSpec& cost, const ActionGrid& grid,
                          double t, std::span<const double> x,
                          std::size_t theta, const MeasureOnU& mu);

struct GridViolation {
  std::size_t state = 0;
  std::size_t action = 0;
  double value = 0.0;
  double bound = 0.0;
};

// Per-hypothesis validation results. Pure data, deterministic given the
// model and the sampling parameters. H3 (and lower semi-continuity of the
// costs) is vacuous on a finite discretization and recorded as such.
struct HypothesisReport {
  bool h1 = false;
  bool h2 = false;
  bool h3_vacuous = true;
  bool h4 = false;
  bool h5 = true;
  bool h6 = true;
  bool has_env = false;
  double measured_m = 0.0;
  double declared_m = 0.0;
  std::optional<GridViolation> h2_worst;
  double h4_max_slack = 0.0;   // max of Q_u Phi - lambda Phi - kappa0 1_B0
  double h4_min_lambda = 0.0;  // brute-force minimal feasible lambda
  std::optional<GridViolation> h4_worst;
  double phi_mass_outside_core = 0.0;
  double h5_max_ratio = 0.0;  // sampled sup of lhs / (C1 |x-y|^2)
  double h6_max_ratio = 0.0;  // sampled sup of lhs / (C2 (1+|x|^2))
  bool overall_pass() const { return h1 && h2 && h4 && h5 && h6; }
  std::string to_table() const;
};

struct HypothesisSampling {
  std::size_t env_points = 33;  // 1-D sample count per axis for H5/H6
  double env_radius = 10.0;
};

HypothesisReport validate_hypotheses(const QPairModel& model,
                                     const DiffusionEnv* env,
                                     const LyapunovSpec& lyap,
                                     const HypothesisSampling& sampling = {});

// Cheap H2-only gate used by samplers and solvers before running.
bool h2_holds(const QPairModel& model);

enum class AdmissibilityGate { W, W2 };

struct ModulusViolation {
  std::size_t state = 0;
  double t1 = 0.0;
  double t2 = 0.0;
  double value = 0.0;
  double bound = 0.0;
};

// Grid evaluation of the per-state moduli w and w''. The grid check is a
// sound necessary condition, not a proof: w over [t_i, t_j) is the max
// pairwise W1 among grid points inside, compared against psi(t_j - t_i);
// w''(delta) takes grid triples t1 <= t <= t2 with t2 - t1 <= delta.
struct ModulusReport {
  std::vector<double> grid;
  std::vector<double> deltas;                // k * h for uniform part
  std::vector<std::vector<double>> w_table;  // [state][delta]
  std::vector<std::vector<double>> w2_table;
  bool pass_w = true;
  bool pass_w2 = true;
  std::optional<ModulusViolation> worst_w;
  std::optional<ModulusViolation> worst_w2;
  bool pass(AdmissibilityGate gate) const {
    return gate == AdmissibilityGate::W ? pass_w : pass_w2;
  }
};

ModulusReport modulus_report(const RelaxedMarkovPolicy& policy,
                             const ActionGrid& grid,
                             const std::vector<double>& eval_grid);
// Uniform evaluation grid of `points` samples over [0, T] merged with the
// policy knots.
std::vector<double> modulus_eval_grid(const RelaxedMarkovPolicy& policy,
                                      std::size_t points);

}  // namespace ctmdp
