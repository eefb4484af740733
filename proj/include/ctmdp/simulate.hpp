#pragma once

#include <cstdint>
#include <span>
#include <thread>
#include <vector>

#include "ctmdp/model.hpp"

// Exact-in-law sampling of the controlled chain by uniformization (thinning
// a Poisson stream of the dominating rate M), Euler-Maruyama integration of
// the environment diffusion along the sampled chain, and the empirical
// moment checks used by cmd_simulate.

namespace ctmdp {

// Right-continuous step path of the chain on [s, T].
struct ChainPath {
  double s = 0.0;
  double horizon = 0.0;
  std::size_t initial_state = 0;
  std::vector<double> jump_times;     // strictly increasing, in (s, T]
  std::vector<std::size_t> visited;   // initial state + post-jump states
  std::uint64_t seed = 0;

  std::size_t jump_count() const { return jump_times.size(); }
  std::size_t state_at(double t) const;
  bool has_jump_in(double t1, double t2) const;  // closed window
};

// Environment path on a mesh containing every chain jump time.
struct CoupledPath {
  ChainPath chain;
  std::size_t dim = 1;
  std::vector<double> times;  // s = times[0] < ... = T
  std::vector<double> x;      // times.size() * dim, row-major
  std::uint64_t seed = 0;

  std::span<const double> x_at_index(std::size_t i) const {
    return {x.data() + i * dim, dim};
  }
  // Exact mesh-time lookup (binary search, 1e-12 tolerance).
  std::span<const double> x_at_time(double t) const;
};

// Uniformization sampler. Candidate event times arrive at rate declared_m;
// at a candidate in state theta', the chain jumps to gamma with probability
// mixed_rate(theta', gamma, nu_tau) / M and stays put otherwise. Refuses
// models whose measured total rate exceeds the declared dominating M.
ChainPath sample_chain(const QPairModel& model, const RelaxedMarkovPolicy& policy,
                       double s, std::size_t theta, double horizon,
                       std::uint64_t seed);

// Chain first (rates do not depend on X), then Euler-Maruyama on the union
// of the uniform dt-grid, the jump times, and extra_mesh, holding the
// regime constant on each sub-interval.
CoupledPath sample_coupled(const QPairModel& model, const DiffusionEnv& env,
                           const RelaxedMarkovPolicy& policy, double s,
                           std::span<const double> x0, std::size_t theta,
                           double horizon, double dt, std::uint64_t seed,
                           std::span<const double> extra_mesh = {});
// Separate chain / diffusion streams (one-way coupling tests).
CoupledPath sample_coupled_seeds(const QPairModel& model, const DiffusionEnv& env,
                                 const RelaxedMarkovPolicy& policy, double s,
                                 std::span<const double> x0, std::size_t theta,
                                 double horizon, double dt, std::uint64_t chain_seed,
                                 std::uint64_t diffusion_seed,
                                 std::span<const double> extra_mesh = {});

struct MomentCheckRow {
  double t = 0.0;
  double mean = 0.0;
  double se = 0.0;
  double bound = 0.0;
  bool pass = true;
};

struct PhiMomentReport {
  std::vector<MomentCheckRow> rows;
  bool pass = true;
};

// Empirical E Phi(Lambda_t) against (Phi(theta) + kappa0 T) e^{lambda t},
// at four standard errors.
PhiMomentReport phi_moment_check(const std::vector<ChainPath>& paths,
                                 const LyapunovSpec& lyap, std::size_t theta,
                                 double horizon, const std::vector<double>& t_grid);

struct IncrementMomentReport {
  double t1 = 0.0;
  double t2 = 0.0;
  double lhs = 0.0;     // empirical E |X_{t2} - X_{t1}|^4
  double lhs_se = 0.0;
  double rhs = 0.0;     // C (t2-t1) * integral of (1 + E|X_r|^4)
  double ratio = 0.0;
  bool pass = true;
};

// Fourth-moment increment bound with C = 8 (T^3 + 36 T) max(C2^2, 1).
IncrementMomentReport increment_moment_check(const std::vector<CoupledPath>& paths,
                                             double t1, double t2, double growth_c2,
                                             double horizon);

struct HoldingBoundReport {
  double t = 0.0;
  double u = 0.0;
  double empirical = 0.0;
  double se = 0.0;
  double bound = 0.0;  // exp(-M u)
  bool pass = true;
};

HoldingBoundReport holding_probability_check(const std::vector<ChainPath>& paths,
                                             double t, double u, double m_const);

// Worker count for path-parallel loops, capped by CTMDP_THREADS.
std::size_t worker_count(std::size_t jobs);

// Deterministic parallel loop: fn(i) must write only to slot i of its
// output; chunks are assigned statically so results never depend on the
// schedule.
template <typename Fn>
void parallel_for(std::size_t n, Fn&& fn) {
  const std::size_t workers = worker_count(n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    pool.emplace_back([&fn, w, workers, n] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& th : pool) th.join();
}

}  // namespace ctmdp
