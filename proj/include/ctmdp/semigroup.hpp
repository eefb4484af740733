#pragma once

#include <functional>
#include <span>
#include <vector>

#include "ctmdp/model.hpp"

// Time-inhomogeneous transition semigroup of the controlled chain:
// generator assembly from the mixed rates, Dyson-series evaluation with a
// rigorous truncation bound, and fixed-step Kolmogorov ODE integration.

namespace ctmdp {

// Generator matrix at a fixed time. Off-diagonal entries are the mixed
// rates; the diagonal is the negated in-order off-diagonal row sum, so
// row_sum() is exactly zero by construction.
class GeneratorAt {
 public:
  GeneratorAt(double t, std::size_t n) : t_(t), n_(n), q_(n * n, 0.0), totals_(n, 0.0) {}

  double t() const { return t_; }
  std::size_t size() const { return n_; }
  std::span<const double> row(std::size_t i) const { return {q_.data() + i * n_, n_}; }
  double entry(std::size_t i, std::size_t j) const { return q_[i * n_ + j]; }
  double total(std::size_t i) const { return totals_[i]; }
  // Off-diagonals summed in index order plus the diagonal; zero exactly.
  double row_sum(std::size_t i) const;
  // out = Q h
  void apply(std::span<const double> h, std::span<double> out) const;
  // max_i sum_j |q_ij| = 2 max_i total_i
  double inf_norm() const;

  void set_row(std::size_t i, const RateRow& mixed);

 private:
  double t_;
  std::size_t n_;
  std::vector<double> q_;  // row-major, diagonal = -total
  std::vector<double> totals_;
};

GeneratorAt generator_at(const QPairModel& model, const RelaxedMarkovPolicy& policy,
                         double t);

struct TransitionResult {
  std::vector<double> values;
  int order = 0;      // series truncation order / ODE step count
  double tail = 0.0;  // reported tail bound / local error estimate
};

// Stable remainder of the exponential series: sum_{m>=n} (2M(t-s))^m / m!.
double tail_bound(double m_const, double s, double t, int n);

// Iterated-integral (Dyson) series for P_{s,t} h, truncated at the smallest
// order whose tail bound times ||h||_inf falls below tol. Each iterated
// integral is evaluated by 4th-order cumulative quadrature on a sub-grid
// refined below the policy knot spacing (knots are always nodes).
TransitionResult dyson_transition(const QPairModel& model,
                                  const RelaxedMarkovPolicy& policy, double s,
                                  double t, std::span<const double> h, double tol);
// Forced truncation order (tail-bound honesty tests).
TransitionResult dyson_transition(const QPairModel& model,
                                  const RelaxedMarkovPolicy& policy, double s,
                                  double t, std::span<const double> h, double tol,
                                  int forced_order);

// Fixed-step 4th-order (classic Runge-Kutta) integration of the Kolmogorov
// ODE for P_{s,t} h; the step is chosen so the accumulated truncation
// estimate stays below tol, and steps never straddle policy knots.
TransitionResult ode_transition(const QPairModel& model,
                                const RelaxedMarkovPolicy& policy, double s,
                                double t, std::span<const double> h, double tol);

enum class TransitionMethod { Dyson, Ode };

// P_{s,t} as a row-major matrix: entry (theta, gamma) = (P 1_gamma)(theta).
std::vector<double> transition_matrix(TransitionMethod method,
                                      const QPairModel& model,
                                      const RelaxedMarkovPolicy& policy, double s,
                                      double t, double tol);

// Shared fixed-step backward integrator: evolves values from t_hi down to
// t_lo under d z / dr = -(Q(r) z + source(r)). The source callback receives
// a left-limit flag raised at segment tops so piecewise-constant policy
// jumps are evaluated on the correct side. Returns the step count.
int backward_evolve(
    const QPairModel& model, const RelaxedMarkovPolicy& policy, double t_hi,
    double t_lo, std::span<double> values, double tol,
    const std::function<void(double, bool, std::span<double>)>* source,
    int min_steps_per_unit = 1);

}  // namespace ctmdp
