#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctmdp/model.hpp"
#include "ctmdp/rng.hpp"
#include "ctmdp/semigroup.hpp"
#include "ctmdp/simulate.hpp"
#include "test_support.hpp"

using namespace ctmdp;
using testsupport::unit_grid_1d;

namespace {

// Single-action constant-rate 2-state model: q(0->1) = a, q(1->0) = b.
QPairModel two_state(double a, double b) {
  const ActionGrid grid({{0.0}}, {0.0}, {0.0});
  auto rate = [a, b](std::size_t from, std::size_t to, std::span<const double>) {
    if (from == 0 && to == 1) return a;
    if (from == 1 && to == 0) return b;
    return 0.0;
  };
  return QPairModel({"0", "1"}, grid, rate, std::max(a, b));
}

RelaxedMarkovPolicy single_action_policy(std::size_t ns, double horizon) {
  RandomizedStationaryPolicy pi;
  for (std::size_t i = 0; i < ns; ++i)
    pi.per_state.push_back(MeasureOnU::dirac(0));
  return lift_stationary(pi, horizon);
}

DiffusionEnv make_env(std::function<double(double, std::size_t)> b,
                      std::function<double(double, std::size_t)> s, double c1,
                      double c2) {
  DiffusionEnv env;
  env.dim = 1;
  env.drift = [b](std::span<const double> x, std::size_t th, std::span<double> out) {
    out[0] = b(x[0], th);
  };
  env.sigma = [s](std::span<const double> x, std::size_t th, std::span<double> out) {
    out[0] = s(x[0], th);
  };
  env.lip_c1 = c1;
  env.growth_c2 = c2;
  return env;
}

}  // namespace

TEST_CASE("zero rates give constant paths") {
  const QPairModel model = two_state(0.0, 0.0);
  const RelaxedMarkovPolicy policy = single_action_policy(2, 1.0);
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const ChainPath path = sample_chain(model, policy, 0.0, 1, 1.0, seed);
    CHECK(path.jump_count() == 0);
    CHECK(path.state_at(0.5) == 1);
  }
}

TEST_CASE("identical seeds reproduce identical paths bit for bit") {
  const QPairModel model = two_state(1.3, 0.7);
  const RelaxedMarkovPolicy policy = single_action_policy(2, 2.0);
  const ChainPath a = sample_chain(model, policy, 0.0, 0, 2.0, 42);
  const ChainPath b = sample_chain(model, policy, 0.0, 0, 2.0, 42);
  CHECK(a.jump_times == b.jump_times);
  CHECK(a.visited == b.visited);
  const ChainPath c = sample_chain(model, policy, 0.0, 0, 2.0, 43);
  CHECK(a.jump_times != c.jump_times);

  const DiffusionEnv env =
      make_env([](double, std::size_t th) { return th == 0 ? 0.2 : -0.1; },
               [](double, std::size_t) { return 0.3; }, 1.0, 1.0);
  const CoupledPath p1 =
      sample_coupled(model, env, policy, 0.0, std::vector<double>{0.5}, 0, 2.0,
                     1.0 / 128.0, 7);
  const CoupledPath p2 =
      sample_coupled(model, env, policy, 0.0, std::vector<double>{0.5}, 0, 2.0,
                     1.0 / 128.0, 7);
  CHECK(p1.times == p2.times);
  CHECK(p1.x == p2.x);
}

TEST_CASE("sampler refuses models that fail H2") {
  const ActionGrid grid({{0.0}}, {0.0}, {0.0});
  const QPairModel bad({"a", "b"}, grid,
                       [](std::size_t, std::size_t, std::span<const double>) {
                         return 2.0;
                       },
                       1.0);  // measured 2 > declared 1
  const RelaxedMarkovPolicy policy = single_action_policy(2, 1.0);
  CHECK_THROWS_AS(sample_chain(bad, policy, 0.0, 0, 1.0, 0), std::runtime_error);
}

TEST_CASE("holding times in a constant-rate state are exponential (KS)") {
  const double q01 = 1.2;
  const QPairModel model = two_state(q01, 0.8);
  const double horizon = 8.0;
  const RelaxedMarkovPolicy policy = single_action_policy(2, horizon);
  const std::size_t n = 20000;
  std::vector<double> first_jump;
  first_jump.reserve(n);
  for (std::size_t p = 0; p < n; ++p) {
    const ChainPath path =
        sample_chain(model, policy, 0.0, 0, horizon, rng::derive_seed(911, p));
    if (!path.jump_times.empty()) first_jump.push_back(path.jump_times.front());
  }
  std::sort(first_jump.begin(), first_jump.end());
  // KS against the exponential truncated to [0, horizon].
  const double denom = 1.0 - std::exp(-q01 * horizon);
  double dstat = 0.0;
  const double m = static_cast<double>(first_jump.size());
  for (std::size_t i = 0; i < first_jump.size(); ++i) {
    const double cdf = (1.0 - std::exp(-q01 * first_jump[i])) / denom;
    const double hi = static_cast<double>(i + 1) / m;
    const double lo = static_cast<double>(i) / m;
    dstat = std::max({dstat, std::abs(cdf - hi), std::abs(cdf - lo)});
  }
  // level 1e-3 critical value
  CHECK(dstat * std::sqrt(m) < 1.9495);
}

TEST_CASE("empirical marginals match the semigroup oracle within 4 SE") {
  rng::Stream stream(3);
  const QPairModel model = testsupport::random_model(stream, 3, 2, 2.5);
  const RelaxedMarkovPolicy policy = testsupport::random_policy(
      stream, 3, 2, 1.0, testsupport::PolicyShape::PiecewiseConstant);
  const double t = 0.7;
  const std::size_t n = 20000;
  std::vector<std::size_t> counts(3, 0);
  for (std::size_t p = 0; p < n; ++p) {
    const ChainPath path =
        sample_chain(model, policy, 0.0, 0, 1.0, rng::derive_seed(5, p));
    counts[path.state_at(t)]++;
  }
  const std::vector<double> pmat =
      transition_matrix(TransitionMethod::Ode, model, policy, 0.0, t, 1e-10);
  for (std::size_t g = 0; g < 3; ++g) {
    const double want = pmat[0 * 3 + g];
    const double got = static_cast<double>(counts[g]) / static_cast<double>(n);
    const double se = std::sqrt(std::max(want * (1.0 - want), 1e-12) /
                                static_cast<double>(n));
    CHECK(std::abs(got - want) <= 4.0 * se);
  }
}

TEST_CASE("jump counts are dominated by the Poisson envelope") {
  const QPairModel model = two_state(1.5, 1.5);
  const double horizon = 2.0;
  const RelaxedMarkovPolicy policy = single_action_policy(2, horizon);
  const std::size_t n = 20000;
  double total = 0.0, totalsq = 0.0;
  for (std::size_t p = 0; p < n; ++p) {
    const auto jumps = static_cast<double>(
        sample_chain(model, policy, 0.0, 0, horizon, rng::derive_seed(17, p))
            .jump_count());
    total += jumps;
    totalsq += jumps * jumps;
  }
  const double mean = total / static_cast<double>(n);
  const double var = (totalsq - n * mean * mean) / static_cast<double>(n - 1);
  const double se = std::sqrt(var / static_cast<double>(n));
  CHECK(mean <= model.declared_m() * horizon + 4.0 * se);
}

TEST_CASE("holding probability bound exp(-Mu) holds empirically") {
  const QPairModel model = two_state(1.0, 0.5);
  const double horizon = 2.0;
  const RelaxedMarkovPolicy policy = single_action_policy(2, horizon);
  std::vector<ChainPath> paths;
  for (std::size_t p = 0; p < 20000; ++p)
    paths.push_back(sample_chain(model, policy, 0.0, 0, horizon,
                                 rng::derive_seed(23, p)));
  const HoldingBoundReport rep =
      holding_probability_check(paths, 0.5, 0.25, model.declared_m());
  CHECK(rep.pass);
  CHECK(rep.bound == doctest::Approx(std::exp(-1.0 * 0.25)));
}

TEST_CASE("one-way coupling: the chain ignores the diffusion seed") {
  const QPairModel model = two_state(1.0, 0.8);
  const RelaxedMarkovPolicy policy = single_action_policy(2, 1.0);
  const DiffusionEnv env =
      make_env([](double x, std::size_t) { return -0.5 * x; },
               [](double, std::size_t) { return 0.4; }, 0.25, 1.0);
  const std::vector<double> x0{1.0};
  const CoupledPath a = sample_coupled_seeds(model, env, policy, 0.0, x0, 0, 1.0,
                                             1.0 / 64.0, 5, 100);
  const CoupledPath b = sample_coupled_seeds(model, env, policy, 0.0, x0, 0, 1.0,
                                             1.0 / 64.0, 5, 200);
  CHECK(a.chain.jump_times == b.chain.jump_times);
  CHECK(a.chain.visited == b.chain.visited);
  CHECK(a.x != b.x);
}

TEST_CASE("zero coefficients freeze the diffusion") {
  const QPairModel model = two_state(1.0, 1.0);
  const RelaxedMarkovPolicy policy = single_action_policy(2, 1.0);
  const DiffusionEnv env = make_env([](double, std::size_t) { return 0.0; },
                                    [](double, std::size_t) { return 0.0; }, 1.0, 1.0);
  const CoupledPath path = sample_coupled(model, env, policy, 0.0,
                                          std::vector<double>{0.7}, 0, 1.0,
                                          1.0 / 32.0, 9);
  for (std::size_t i = 0; i < path.times.size(); ++i)
    CHECK(path.x[i] == 0.7);
}

TEST_CASE("per-regime constant drift integrates occupation times exactly") {
  const QPairModel model = two_state(1.4, 0.9);
  const double horizon = 1.5;
  const RelaxedMarkovPolicy policy = single_action_policy(2, horizon);
  const DiffusionEnv env =
      make_env([](double, std::size_t th) { return th == 0 ? 0.3 : -0.8; },
               [](double, std::size_t) { return 0.0; }, 1.0, 1.0);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const CoupledPath path = sample_coupled(model, env, policy, 0.0,
                                            std::vector<double>{0.2}, 0, horizon,
                                            1.0 / 64.0, seed);
    // Occupation times from the chain alone.
    double occ0 = 0.0, occ1 = 0.0;
    double prev = 0.0;
    std::size_t state = 0;
    for (std::size_t j = 0; j < path.chain.jump_times.size(); ++j) {
      (state == 0 ? occ0 : occ1) += path.chain.jump_times[j] - prev;
      prev = path.chain.jump_times[j];
      state = path.chain.visited[j + 1];
    }
    (state == 0 ? occ0 : occ1) += horizon - prev;
    const double want = 0.2 + 0.3 * occ0 - 0.8 * occ1;
    CHECK(path.x.back() == doctest::Approx(want).epsilon(1e-10));
  }
}

TEST_CASE("driftless constant-sigma diffusion has the Gaussian law") {
  const QPairModel model = two_state(0.0, 0.0);  // M = 0
  const double horizon = 1.0;
  const double sigma0 = 0.6;
  const RelaxedMarkovPolicy policy = single_action_policy(2, horizon);
  const DiffusionEnv env = make_env([](double, std::size_t) { return 0.0; },
                                    [sigma0](double, std::size_t) { return sigma0; },
                                    1.0, sigma0 * sigma0);
  const std::size_t n = 20000;
  std::vector<double> xt(n);
  for (std::size_t p = 0; p < n; ++p) {
    const CoupledPath path = sample_coupled(model, env, policy, 0.0,
                                            std::vector<double>{0.1}, 0, horizon,
                                            1.0 / 128.0, rng::derive_seed(31, p));
    xt[p] = path.x.back();
  }
  double mean = 0.0;
  for (double v : xt) mean += v;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double v : xt) var += (v - mean) * (v - mean);
  var /= static_cast<double>(n - 1);
  const double want_var = sigma0 * sigma0 * horizon;
  const double se_mean = sigma0 / std::sqrt(static_cast<double>(n));
  const double se_var = want_var * std::sqrt(2.0 / static_cast<double>(n - 1));
  CHECK(std::abs(mean - 0.1) <= 4.0 * se_mean);
  CHECK(std::abs(var - want_var) <= 4.0 * se_var);
}

TEST_CASE("phi_moment_check trivial regimes always pass") {
  const QPairModel moving = two_state(1.0, 0.5);
  const QPairModel frozen = two_state(0.0, 0.0);
  const double horizon = 1.0;
  const RelaxedMarkovPolicy policy = single_action_policy(2, horizon);
  const std::vector<double> grid{0.25, 0.5, 0.75, 1.0};

  std::vector<ChainPath> paths;
  for (std::size_t p = 0; p < 2000; ++p)
    paths.push_back(sample_chain(moving, policy, 0.0, 0, horizon,
                                 rng::derive_seed(37, p)));
  const LyapunovSpec const_phi({1.0, 1.0}, 0.5, 0.2, {0});
  CHECK(phi_moment_check(paths, const_phi, 0, horizon, grid).pass);

  paths.clear();
  for (std::size_t p = 0; p < 2000; ++p)
    paths.push_back(sample_chain(frozen, policy, 0.0, 1, horizon,
                                 rng::derive_seed(41, p)));
  const LyapunovSpec big_phi({2.0, 5.0}, 0.3, 0.0, {});
  CHECK(phi_moment_check(paths, big_phi, 1, horizon, grid).pass);
}

TEST_CASE("phi_moment_check on the birth-death chain with the H4 lambda") {
  const std::size_t ns = 11;
  const ActionGrid grid = unit_grid_1d({0.0, 0.5, 1.0});
  auto rate = [ns](std::size_t from, std::size_t to, std::span<const double> u) {
    const double nn = static_cast<double>(from);
    if (to == from + 1 && from + 1 < ns) return u[0] * (1.0 + 0.3 * nn);
    if (from > 0 && to == from - 1) return 0.8 * nn;
    return 0.0;
  };
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < ns; ++i) labels.push_back(std::to_string(i));
  const QPairModel model(labels, grid, rate, 11.0);
  std::vector<double> phi(ns);
  for (std::size_t i = 0; i < ns; ++i) phi[i] = static_cast<double>(i) + 1.0;
  const LyapunovSpec lyap(phi, 1.0, 0.0, {});
  CHECK(validate_hypotheses(model, nullptr, lyap).h4);

  RandomizedStationaryPolicy pi;
  for (std::size_t i = 0; i < ns; ++i)
    pi.per_state.push_back(MeasureOnU::dirac(2));  // full birth pressure
  const double horizon = 1.0;
  const RelaxedMarkovPolicy policy = lift_stationary(pi, horizon);
  std::vector<ChainPath> paths;
  for (std::size_t p = 0; p < 3000; ++p)
    paths.push_back(sample_chain(model, policy, 0.0, 2, horizon,
                                 rng::derive_seed(43, p)));
  const PhiMomentReport rep =
      phi_moment_check(paths, lyap, 2, horizon, {0.25, 0.5, 0.75, 1.0});
  CHECK(rep.pass);
}

TEST_CASE("increment_moment_check: zero coefficients give zero lhs") {
  const QPairModel model = two_state(1.0, 1.0);
  const RelaxedMarkovPolicy policy = single_action_policy(2, 1.0);
  const DiffusionEnv env = make_env([](double, std::size_t) { return 0.0; },
                                    [](double, std::size_t) { return 0.0; }, 1.0, 1.0);
  std::vector<CoupledPath> paths;
  for (std::size_t p = 0; p < 50; ++p)
    paths.push_back(sample_coupled(model, env, policy, 0.0,
                                   std::vector<double>{0.4}, 0, 1.0, 0.125,
                                   rng::derive_seed(47, p)));
  const IncrementMomentReport rep =
      increment_moment_check(paths, 0.25, 0.75, 1.0, 1.0);
  CHECK(rep.lhs == 0.0);
  CHECK(rep.pass);
}

TEST_CASE("increment_moment_check sees the Gaussian fourth moment") {
  const QPairModel model = two_state(0.0, 0.0);
  const double sigma0 = 0.5;
  const RelaxedMarkovPolicy policy = single_action_policy(2, 1.0);
  const DiffusionEnv env = make_env([](double, std::size_t) { return 0.0; },
                                    [sigma0](double, std::size_t) { return sigma0; },
                                    1.0, sigma0 * sigma0);
  std::vector<CoupledPath> paths;
  const std::size_t n = 20000;
  for (std::size_t p = 0; p < n; ++p)
    paths.push_back(sample_coupled(model, env, policy, 0.0,
                                   std::vector<double>{0.0}, 0, 1.0, 1.0 / 16.0,
                                   rng::derive_seed(53, p)));
  const double t1 = 0.25, t2 = 0.75;
  const IncrementMomentReport rep =
      increment_moment_check(paths, t1, t2, sigma0 * sigma0, 1.0);
  // E|X_{t2}-X_{t1}|^4 = 3 sigma^4 (t2-t1)^2 for the Brownian increment.
  const double want = 3.0 * std::pow(sigma0, 4.0) * (t2 - t1) * (t2 - t1);
  CHECK(std::abs(rep.lhs - want) <= 4.0 * rep.lhs_se + 1e-12);
  CHECK(rep.pass);
}

TEST_CASE("increment bound holds on a random Lipschitz environment") {
  const QPairModel model = two_state(0.8, 1.1);
  const RelaxedMarkovPolicy policy = single_action_policy(2, 1.0);
  const DiffusionEnv env = make_env(
      [](double x, std::size_t th) { return th == 0 ? -0.4 * x + 0.2 : 0.3 * x; },
      [](double x, std::size_t th) { return th == 0 ? 0.3 : 0.2 + 0.1 * x; }, 0.4,
      1.0);
  std::vector<CoupledPath> paths;
  for (std::size_t p = 0; p < 10000; ++p)
    paths.push_back(sample_coupled(model, env, policy, 0.0,
                                   std::vector<double>{0.5}, 0, 1.0, 1.0 / 32.0,
                                   rng::derive_seed(59, p)));
  const IncrementMomentReport rep =
      increment_moment_check(paths, 0.25, 0.5, env.growth_c2, 1.0);
  CHECK(rep.pass);
  CHECK(rep.ratio < 1.0);
}
