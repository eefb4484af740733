#include <doctest.h>

#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctmdp/model.hpp"
#include "ctmdp/rng.hpp"
#include "ctmdp/semigroup.hpp"
#include "test_support.hpp"

using namespace ctmdp;
using testsupport::PolicyShape;
using testsupport::unit_grid_1d;

namespace {

std::vector<double> random_h(rng::Stream& stream, std::size_t n) {
  std::vector<double> h(n);
  for (double& v : h) v = stream.uniform(-1.0, 1.0);
  return h;
}

// Dense generator matrix of a constant policy, for the matexp oracle.
std::vector<double> constant_q_matrix(const QPairModel& model,
                                      const RelaxedMarkovPolicy& policy) {
  const std::size_t n = model.num_states();
  std::vector<double> q(n * n, 0.0);
  for (std::size_t th = 0; th < n; ++th) {
    const RateRow row = mixed_rate(model, th, policy.measure_at(th, 0.0));
    for (std::size_t g = 0; g < n; ++g) q[th * n + g] = row.to[g];
    q[th * n + th] = -row.total;
  }
  return q;
}

}  // namespace

TEST_CASE("tail_bound special values") {
  CHECK(tail_bound(2.0, 0.0, 1.0, 0) == doctest::Approx(std::exp(4.0)).epsilon(1e-12));
  CHECK(tail_bound(0.0, 0.0, 1.0, 1) == 0.0);
  CHECK(tail_bound(0.0, 0.0, 1.0, 5) == 0.0);
  CHECK(tail_bound(0.0, 0.0, 1.0, 0) == 1.0);
}

TEST_CASE("tail_bound matches two independent summation routes") {
  // M = 1, t - s = 1: remainder of e^2 after the first ten terms.
  const double got = tail_bound(1.0, 0.0, 1.0, 10);
  double partial = 0.0, term = 1.0;
  for (int m = 0; m < 10; ++m) {
    partial += term;
    term *= 2.0 / static_cast<double>(m + 1);
  }
  const double via_exp = std::exp(2.0) - partial;
  double forward = 0.0;
  double t10 = 1.0;
  for (int i = 1; i <= 10; ++i) t10 *= 2.0 / static_cast<double>(i);
  for (int m = 10; m < 200; ++m) {
    forward += t10;
    t10 *= 2.0 / static_cast<double>(m + 1);
  }
  CHECK(got == doctest::Approx(via_exp).epsilon(1e-10));
  CHECK(got == doctest::Approx(forward).epsilon(1e-14));
  CHECK(got == doctest::Approx(3.435768847948e-4).epsilon(1e-9));
}

TEST_CASE("tail_bound decreases strictly beyond 2M(t-s)") {
  double prev = tail_bound(2.5, 0.0, 1.0, 6);  // 2M(t-s) = 5
  for (int n = 7; n < 30; ++n) {
    const double cur = tail_bound(2.5, 0.0, 1.0, n);
    CHECK(cur < prev);
    prev = cur;
  }
}

TEST_CASE("generator_at reproduces the plain rate matrix under Dirac policies") {
  rng::Stream stream(5);
  const QPairModel model = testsupport::random_model(stream, 4, 3, 2.0);
  RandomizedStationaryPolicy pi;
  for (std::size_t th = 0; th < 4; ++th)
    pi.per_state.push_back(MeasureOnU::dirac(1));
  const RelaxedMarkovPolicy policy = lift_stationary(pi, 1.0);
  const GeneratorAt gen = generator_at(model, policy, 0.37);
  for (std::size_t th = 0; th < 4; ++th) {
    for (std::size_t g = 0; g < 4; ++g) {
      if (g == th) continue;
      CHECK(gen.entry(th, g) == model.rate(th, g, 1));
    }
    CHECK(gen.entry(th, th) == -model.total_rate(th, 1));
  }
}

TEST_CASE("generator_at mixes rates by hand on the 2-state example") {
  // q(1,2;u) = u, q(2,1;u) = 1, uniform on {0, 1}.
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  auto rate = [](std::size_t from, std::size_t to, std::span<const double> u) {
    if (from == 0 && to == 1) return u[0];
    if (from == 1 && to == 0) return 1.0;
    return 0.0;
  };
  const QPairModel model({"1", "2"}, grid, rate, 1.0);
  const MeasureOnU uniform({0, 1}, {0.5, 0.5});
  std::vector<std::vector<MeasureOnU>> curves{{uniform, uniform},
                                              {uniform, uniform}};
  const RelaxedMarkovPolicy policy({0.0, 1.0}, curves,
                                   PolicyInterp::PiecewiseConstant,
                                   PsiModulus::linear(0.0));
  const GeneratorAt gen = generator_at(model, policy, 0.5);
  CHECK(gen.entry(0, 1) == doctest::Approx(0.5));
  CHECK(gen.entry(1, 0) == doctest::Approx(1.0));
}

TEST_CASE("generator rows sum to zero exactly on random instances") {
  rng::Stream stream(77);
  for (int round = 0; round < 100; ++round) {
    const std::size_t ns = 2 + stream.index(6);
    const std::size_t nu = 1 + stream.index(4);
    const QPairModel model = testsupport::random_model(stream, ns, nu, 4.0);
    const RelaxedMarkovPolicy policy = testsupport::random_policy(
        stream, ns, nu, 1.0,
        round % 2 == 0 ? PolicyShape::PiecewiseConstant : PolicyShape::MixtureLinear);
    const GeneratorAt gen = generator_at(model, policy, stream.uniform01());
    for (std::size_t th = 0; th < ns; ++th) CHECK(gen.row_sum(th) == 0.0);
    CHECK(gen.inf_norm() <= 2.0 * model.declared_m() + 1e-12);
  }
}

TEST_CASE("dyson_transition: identity at t = s and conservativeness") {
  rng::Stream stream(8);
  const QPairModel model = testsupport::random_model(stream, 5, 3, 3.0);
  const RelaxedMarkovPolicy policy =
      testsupport::random_policy(stream, 5, 3, 1.0, PolicyShape::MixtureLinear);
  const std::vector<double> h = random_h(stream, 5);
  const TransitionResult same = dyson_transition(model, policy, 0.4, 0.4, h, 1e-8);
  for (std::size_t i = 0; i < 5; ++i) CHECK(same.values[i] == h[i]);

  const std::vector<double> ones(5, 1.0);
  const TransitionResult cons = dyson_transition(model, policy, 0.1, 0.9, ones, 1e-10);
  for (double v : cons.values) CHECK(v == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("dyson and ode match the matrix exponential for constant policies") {
  rng::Stream stream(13);
  for (int round = 0; round < 10; ++round) {
    const std::size_t ns = 3;
    const std::size_t nu = 2;
    const QPairModel model = testsupport::random_model(stream, ns, nu, 4.0);
    const RelaxedMarkovPolicy policy =
        testsupport::random_policy(stream, ns, nu, 1.0, PolicyShape::Stationary);
    const double s = 0.2, t = 0.9;
    const std::vector<double> q = constant_q_matrix(model, policy);
    std::vector<double> scaled(q.size());
    for (std::size_t i = 0; i < q.size(); ++i) scaled[i] = q[i] * (t - s);
    const std::vector<double> p = testsupport::matrix_exponential(scaled, ns);
    const std::vector<double> h = random_h(stream, ns);
    const std::vector<double> want = testsupport::matvec(p, h, ns);

    const double tol = 1e-10;
    const TransitionResult dy = dyson_transition(model, policy, s, t, h, tol);
    const TransitionResult od = ode_transition(model, policy, s, t, h, tol);
    for (std::size_t i = 0; i < ns; ++i) {
      CHECK(std::abs(dy.values[i] - want[i]) <= tol + 1e-9);
      CHECK(std::abs(od.values[i] - want[i]) <= tol + 1e-9);
    }
  }
}

TEST_CASE("dyson truncation honesty: one more order moves less than the tail") {
  rng::Stream stream(29);
  for (int round = 0; round < 20; ++round) {
    const std::size_t ns = 2 + stream.index(4);
    const QPairModel model = testsupport::random_model(stream, ns, 2, 4.0);
    const RelaxedMarkovPolicy policy = testsupport::random_policy(
        stream, ns, 2, 1.0, PolicyShape::PiecewiseConstant);
    const std::vector<double> h = random_h(stream, ns);
    double hnorm = 0.0;
    for (double v : h) hnorm = std::max(hnorm, std::abs(v));
    const double s = 0.1, t = 0.8;
    const TransitionResult base = dyson_transition(model, policy, s, t, h, 1e-6);
    const int n = base.order;
    const TransitionResult more =
        dyson_transition(model, policy, s, t, h, 1e-6, n + 1);
    double diff = 0.0;
    for (std::size_t i = 0; i < ns; ++i)
      diff = std::max(diff, std::abs(more.values[i] - base.values[i]));
    CHECK(diff <= tail_bound(model.measured_m(), s, t, n) * hnorm + 1e-15);
  }
}

TEST_CASE("ode and dyson agree as mutual oracles on time-varying policies") {
  rng::Stream stream(41);
  const double tol = 1e-8;
  for (int round = 0; round < 25; ++round) {
    const std::size_t ns = 2 + stream.index(4);
    const std::size_t nu = 2 + stream.index(2);
    const QPairModel model = testsupport::random_model(stream, ns, nu, 3.0);
    const RelaxedMarkovPolicy policy = testsupport::random_policy(
        stream, ns, nu, 1.0,
        round % 2 == 0 ? PolicyShape::PiecewiseConstant : PolicyShape::MixtureLinear);
    const std::vector<double> h = random_h(stream, ns);
    const double s = 0.1 * stream.uniform01();
    const double t = 0.6 + 0.4 * stream.uniform01();
    const TransitionResult dy = dyson_transition(model, policy, s, t, h, tol);
    const TransitionResult od = ode_transition(model, policy, s, t, h, tol);
    for (std::size_t i = 0; i < ns; ++i)
      CHECK(std::abs(dy.values[i] - od.values[i]) <= 2.0 * tol);
  }
}

TEST_CASE("Chapman-Kolmogorov composition within 3 tol") {
  rng::Stream stream(53);
  const double tol = 1e-8;
  for (int round = 0; round < 25; ++round) {
    const std::size_t ns = 2 + stream.index(4);
    const QPairModel model = testsupport::random_model(stream, ns, 3, 3.0);
    const RelaxedMarkovPolicy policy = testsupport::random_policy(
        stream, ns, 3, 1.0, PolicyShape::MixtureLinear);
    const std::vector<double> h = random_h(stream, ns);
    double s = stream.uniform01() * 0.3;
    double u = 0.3 + stream.uniform01() * 0.3;
    double t = 0.7 + stream.uniform01() * 0.3;
    const TransitionResult ut = ode_transition(model, policy, u, t, h, tol);
    const TransitionResult su = ode_transition(model, policy, s, u, ut.values, tol);
    const TransitionResult st = ode_transition(model, policy, s, t, h, tol);
    for (std::size_t i = 0; i < ns; ++i)
      CHECK(std::abs(su.values[i] - st.values[i]) <= 3.0 * tol);
  }
}

TEST_CASE("stochasticity and positivity of the transition matrix") {
  rng::Stream stream(67);
  for (int round = 0; round < 20; ++round) {
    const std::size_t ns = 2 + stream.index(5);
    const QPairModel model = testsupport::random_model(stream, ns, 2, 4.0);
    const RelaxedMarkovPolicy policy = testsupport::random_policy(
        stream, ns, 2, 1.0, PolicyShape::PiecewiseConstant);
    const double s = 0.2, t = 0.9;
    const auto method = round % 2 == 0 ? TransitionMethod::Dyson : TransitionMethod::Ode;
    const std::vector<double> p = transition_matrix(method, model, policy, s, t, 1e-9);
    for (std::size_t row = 0; row < ns; ++row) {
      double sum = 0.0;
      for (std::size_t col = 0; col < ns; ++col) {
        sum += p[row * ns + col];
        CHECK(p[row * ns + col] >= -1e-9);
      }
      CHECK(sum == doctest::Approx(1.0).epsilon(1e-9));
    }
  }
}

TEST_CASE("transition ops reject bad arguments") {
  rng::Stream stream(71);
  const QPairModel model = testsupport::random_model(stream, 3, 2, 2.0);
  const RelaxedMarkovPolicy policy =
      testsupport::random_policy(stream, 3, 2, 1.0, PolicyShape::Stationary);
  const std::vector<double> h(3, 1.0);
  CHECK_THROWS_AS(dyson_transition(model, policy, 0.0, 0.5, h, 0.0),
                  std::domain_error);
  CHECK_THROWS_AS(ode_transition(model, policy, 0.0, 0.5, h, -1.0),
                  std::domain_error);
  CHECK_THROWS_AS(dyson_transition(model, policy, 0.6, 0.5, h, 1e-8),
                  std::domain_error);
  CHECK_THROWS_AS(generator_at(model, policy, 1.5), std::domain_error);
}
