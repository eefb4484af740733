#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <vector>

#include "ctmdp/model.hpp"
#include "ctmdp/rng.hpp"
#include "test_support.hpp"

using namespace ctmdp;
using testsupport::random_measure;
using testsupport::unit_grid_1d;

namespace {

// Independent 1-D oracle: integral of |F_mu - F_nu| over the merged support.
double w1_oracle_1d(const MeasureOnU& mu, const MeasureOnU& nu,
                    const ActionGrid& grid) {
  std::vector<std::pair<double, double>> events;
  for (std::size_t i = 0; i < mu.size(); ++i)
    events.emplace_back(grid.point(mu.index(i))[0], mu.weight(i));
  for (std::size_t i = 0; i < nu.size(); ++i)
    events.emplace_back(grid.point(nu.index(i))[0], -nu.weight(i));
  std::sort(events.begin(), events.end());
  double cum = 0.0, acc = 0.0;
  for (std::size_t i = 0; i + 1 < events.size(); ++i) {
    cum += events[i].second;
    acc += std::abs(cum) * (events[i + 1].first - events[i].first);
  }
  return acc;
}

}  // namespace

TEST_CASE("w1_distance on point masses") {
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  CHECK(w1_distance(MeasureOnU::dirac(0), MeasureOnU::dirac(0), grid) == 0.0);
  CHECK(w1_distance(MeasureOnU::dirac(0), MeasureOnU::dirac(1), grid) ==
        doctest::Approx(1.0));
  const MeasureOnU half({0, 1}, {0.5, 0.5});
  CHECK(w1_distance(half, MeasureOnU::dirac(0), grid) == doctest::Approx(0.5));
}

TEST_CASE("w1_distance is a metric on random 1-D measures") {
  rng::Stream stream(11);
  const ActionGrid grid = unit_grid_1d({0.0, 0.2, 0.45, 0.7, 1.0});
  for (int round = 0; round < 200; ++round) {
    const MeasureOnU a = random_measure(stream, grid.size());
    const MeasureOnU b = random_measure(stream, grid.size());
    const MeasureOnU c = random_measure(stream, grid.size());
    const double dab = w1_distance(a, b, grid);
    const double dba = w1_distance(b, a, grid);
    const double dac = w1_distance(a, c, grid);
    const double dcb = w1_distance(c, b, grid);
    CHECK(dab >= 0.0);
    CHECK(dab == doctest::Approx(dba).epsilon(1e-12));
    CHECK(dab <= dac + dcb + 1e-9);
    CHECK(dab == doctest::Approx(w1_oracle_1d(a, b, grid)).epsilon(1e-12));
    if (a.same_as(b)) CHECK(dab == 0.0);
  }
}

TEST_CASE("the transport solve agrees with the CDF route on embedded lines") {
  // 1-D points embedded in R^2 force the k > 1 flow solver; the CDF oracle
  // still applies because the geometry is a line.
  const std::vector<double> coords{0.0, 0.15, 0.4, 0.75, 1.0};
  std::vector<std::vector<double>> pts2;
  for (double c : coords) pts2.push_back({c, 0.0});
  const ActionGrid grid2(pts2, {0.0, 0.0}, {1.0, 0.0});
  const ActionGrid grid1 = unit_grid_1d(coords);
  rng::Stream stream(17);
  for (int round = 0; round < 200; ++round) {
    const MeasureOnU a = random_measure(stream, coords.size());
    const MeasureOnU b = random_measure(stream, coords.size());
    CHECK(w1_distance(a, b, grid2) ==
          doctest::Approx(w1_oracle_1d(a, b, grid1)).epsilon(1e-9));
  }
}

TEST_CASE("the transport solve handles genuinely 2-D geometry") {
  // Unit square corners: moving half the mass across one edge costs 0.5.
  const ActionGrid grid({{0.0, 0.0}, {1.0, 0.0}, {0.0, 1.0}, {1.0, 1.0}},
                        {0.0, 0.0}, {1.0, 1.0});
  const MeasureOnU split({0, 1}, {0.5, 0.5});
  CHECK(w1_distance(split, MeasureOnU::dirac(0), grid) == doctest::Approx(0.5));
  CHECK(w1_distance(MeasureOnU::dirac(0), MeasureOnU::dirac(3), grid) ==
        doctest::Approx(std::sqrt(2.0)));
  // Half the mass to each adjacent corner costs two half-edges.
  const MeasureOnU corners({1, 2}, {0.5, 0.5});
  CHECK(w1_distance(MeasureOnU::dirac(0), corners, grid) == doctest::Approx(1.0));
  rng::Stream stream(31);
  for (int round = 0; round < 120; ++round) {
    const MeasureOnU a = random_measure(stream, grid.size());
    const MeasureOnU b = random_measure(stream, grid.size());
    const MeasureOnU c = random_measure(stream, grid.size());
    const double dab = w1_distance(a, b, grid);
    CHECK(dab == doctest::Approx(w1_distance(b, a, grid)).epsilon(1e-9));
    CHECK(dab <= w1_distance(a, c, grid) + w1_distance(c, b, grid) + 1e-9);
  }
}

TEST_CASE("mixed_rate reduces, averages, and stays conservative") {
  const ActionGrid grid = unit_grid_1d({0.2, 0.8});
  // q(1,2;u) = u on U = {0.2, 0.8}; state order (1, 2) = (0, 1).
  auto rate = [](std::size_t from, std::size_t to, std::span<const double> u) {
    if (from == 0 && to == 1) return u[0];
    if (from == 1 && to == 0) return 1.0;
    return 0.0;
  };
  const QPairModel model({"1", "2"}, grid, rate, 1.0);

  const RateRow dirac = mixed_rate(model, 0, MeasureOnU::dirac(1));
  CHECK(dirac.to[1] == doctest::Approx(0.8));

  const MeasureOnU uniform({0, 1}, {0.5, 0.5});
  const RateRow mixed = mixed_rate(model, 0, uniform);
  CHECK(mixed.to[1] == doctest::Approx(0.5));  // 0.5*0.2 + 0.5*0.8

  // Conservativeness is constructed: the in-order component sum IS the total.
  double resum = 0.0;
  for (double v : mixed.to) resum += v;
  CHECK(resum == mixed.total);
}

TEST_CASE("mixed_rate is affine in the measure") {
  rng::Stream stream(23);
  const QPairModel model = testsupport::random_model(stream, 5, 4, 3.0);
  for (int round = 0; round < 50; ++round) {
    const MeasureOnU a = random_measure(stream, 4);
    const MeasureOnU b = random_measure(stream, 4);
    const double lam = stream.uniform01();
    const MeasureOnU mix = MeasureOnU::mix(a, lam, b, 1.0 - lam);
    const std::size_t theta = stream.index(5);
    const RateRow ra = mixed_rate(model, theta, a);
    const RateRow rb = mixed_rate(model, theta, b);
    const RateRow rm = mixed_rate(model, theta, mix);
    for (std::size_t g = 0; g < 5; ++g) {
      const double want = lam * ra.to[g] + (1.0 - lam) * rb.to[g];
      CHECK(std::abs(rm.to[g] - want) <= 1e-12);
    }
    CHECK(std::abs(rm.total - (lam * ra.total + (1.0 - lam) * rb.total)) <= 1e-12);
    double resum = 0.0;
    for (double v : rm.to) resum += v;
    CHECK(resum == rm.total);
  }
}

TEST_CASE("lift_stationary yields zero moduli for every psi") {
  const ActionGrid grid = unit_grid_1d({0.0, 0.5, 1.0});
  RandomizedStationaryPolicy pi;
  pi.per_state.push_back(MeasureOnU({0, 2}, {0.3, 0.7}));
  pi.per_state.push_back(MeasureOnU::dirac(1));
  const RelaxedMarkovPolicy policy = lift_stationary(pi, 2.0);
  CHECK(policy.horizon() == 2.0);
  CHECK(policy.is_time_constant());

  const auto eval_grid = modulus_eval_grid(policy, 33);
  const ModulusReport rep = modulus_report(policy, grid, eval_grid);
  CHECK(rep.pass_w);
  CHECK(rep.pass_w2);
  for (const auto& table : rep.w_table)
    for (double v : table) CHECK(v == 0.0);
}

TEST_CASE("deterministic stationary policies lift to Dirac curves") {
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  RandomizedStationaryPolicy xi;
  xi.per_state.push_back(MeasureOnU::dirac(1));
  const RelaxedMarkovPolicy policy = lift_stationary(xi, 1.0);
  (void)grid;
  for (double t : {0.0, 0.3, 1.0}) {
    const MeasureOnU m = policy.measure_at(0, t);
    CHECK(m.size() == 1);
    CHECK(m.index(0) == 1);
    CHECK(m.weight(0) == 1.0);
  }
}

TEST_CASE("mixture-linear ramps have modulus slope D per unit width") {
  // One state ramping from delta_0 to delta_1 over [0.25, 0.75]: D = 1 and
  // width 0.5 give slope 2, so psi = 2r passes and psi = r fails.
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  std::vector<std::vector<MeasureOnU>> curves{{MeasureOnU::dirac(0),
                                               MeasureOnU::dirac(0),
                                               MeasureOnU::dirac(1),
                                               MeasureOnU::dirac(1)}};
  const RelaxedMarkovPolicy policy({0.0, 0.25, 0.75, 1.0}, curves,
                                   PolicyInterp::MixtureLinear,
                                   PsiModulus::linear(2.0));
  std::vector<double> eval_grid;
  for (int i = 0; i <= 128; ++i) eval_grid.push_back(i / 128.0);
  const ModulusReport rep = modulus_report(policy, grid, eval_grid);
  CHECK(rep.pass_w);
  const double w1_mid = w1_distance(policy.measure_at(0, 0.375),
                                    policy.measure_at(0, 0.625), grid);
  CHECK(w1_mid == doctest::Approx(0.5).epsilon(1e-12));

  const RelaxedMarkovPolicy tight({0.0, 0.25, 0.75, 1.0}, curves,
                                  PolicyInterp::MixtureLinear,
                                  PsiModulus::linear(1.0));
  CHECK_FALSE(modulus_report(tight, grid, eval_grid).pass_w);
}

TEST_CASE("a genuine jump fails w but passes w'' below the spacing") {
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  std::vector<std::vector<MeasureOnU>> curves{{MeasureOnU::dirac(0),
                                               MeasureOnU::dirac(1),
                                               MeasureOnU::dirac(1)}};
  const RelaxedMarkovPolicy policy({0.0, 0.5, 1.0}, curves,
                                   PolicyInterp::PiecewiseConstant,
                                   PsiModulus::linear(1.0));
  std::vector<double> eval_grid;
  for (int i = 0; i <= 64; ++i) eval_grid.push_back(i / 64.0);
  const ModulusReport rep = modulus_report(policy, grid, eval_grid);
  CHECK_FALSE(rep.pass_w);
  REQUIRE(rep.worst_w.has_value());
  CHECK(rep.worst_w->value == doctest::Approx(1.0));  // the jump's W1 size
  CHECK(rep.pass_w2);  // around a single jump the one-sided minimum vanishes
}

TEST_CASE("validate_hypotheses: constant phi always satisfies H4") {
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  auto rate = [](std::size_t from, std::size_t to, std::span<const double> u) {
    if (from != to) return 0.5 + 0.5 * u[0];
    return 0.0;
  };
  const QPairModel model({"a", "b"}, grid, rate, 1.0);
  const LyapunovSpec lyap({1.0, 1.0}, 1.0, 0.0, {});
  const HypothesisReport rep = validate_hypotheses(model, nullptr, lyap);
  CHECK(rep.h1);
  CHECK(rep.h2);
  CHECK(rep.h4);
  CHECK(rep.h4_max_slack == doctest::Approx(-1.0));  // Q phi = 0 <= phi
  CHECK(rep.overall_pass());
}

TEST_CASE("validate_hypotheses flags a declared-M violation with its location") {
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  auto rate = [](std::size_t from, std::size_t to, std::span<const double> u) {
    if (from == 1 && to == 0) return 2.0 + u[0];  // exceeds declared M below
    if (from == 0 && to == 1) return 0.5;
    return 0.0;
  };
  const QPairModel model({"a", "b"}, grid, rate, 2.5);
  const LyapunovSpec lyap({1.0, 1.0}, 1.0, 0.0, {});
  const HypothesisReport rep = validate_hypotheses(model, nullptr, lyap);
  CHECK_FALSE(rep.h2);
  REQUIRE(rep.h2_worst.has_value());
  CHECK(rep.h2_worst->state == 1);
  CHECK(rep.h2_worst->action == 1);
  CHECK(rep.h2_worst->value == doctest::Approx(3.0));
  CHECK_FALSE(h2_holds(model));
}

TEST_CASE("birth-death minimal lambda matches a brute-force oracle") {
  // Birth u (1 + 0.3 n), death 0.8 n, Phi(n) = n + 1 on {0..10}.
  const std::size_t ns = 11;
  const ActionGrid grid = unit_grid_1d({0.0, 0.5, 1.0});
  auto rate = [ns](std::size_t from, std::size_t to, std::span<const double> u) {
    const double n = static_cast<double>(from);
    if (to == from + 1 && from + 1 < ns) return u[0] * (1.0 + 0.3 * n);
    if (from > 0 && to == from - 1) return 0.8 * n;
    return 0.0;
  };
  std::vector<std::string> labels;
  for (std::size_t i = 0; i < ns; ++i) labels.push_back(std::to_string(i));
  const QPairModel model(labels, grid, rate, 11.0);
  std::vector<double> phi(ns);
  for (std::size_t i = 0; i < ns; ++i) phi[i] = static_cast<double>(i) + 1.0;
  const LyapunovSpec lyap(phi, 1.0, 0.0, {});
  const HypothesisReport rep = validate_hypotheses(model, nullptr, lyap);

  // Oracle: brute-force max over the grid of Q_u Phi / Phi.
  double oracle = -1e300;
  for (std::size_t th = 0; th < ns; ++th)
    for (std::size_t u = 0; u < grid.size(); ++u) {
      double qphi = 0.0, total = 0.0;
      for (std::size_t g = 0; g < ns; ++g) {
        if (g == th) continue;
        const double r = rate(th, g, grid.point(u));
        qphi += r * phi[g];
        total += r;
      }
      oracle = std::max(oracle, (qphi - total * phi[th]) / phi[th]);
    }
  CHECK(rep.h4_min_lambda == doctest::Approx(oracle).epsilon(1e-12));
  CHECK(oracle == doctest::Approx(1.0));  // attained at n = 0, u = 1
  CHECK(rep.h4);
}

TEST_CASE("validate_hypotheses is deterministic and idempotent") {
  rng::Stream stream(3);
  const QPairModel model = testsupport::random_model(stream, 6, 3, 4.0);
  std::vector<double> phi(6, 1.0);
  const LyapunovSpec lyap(phi, 0.5, 0.1, {0});
  const HypothesisReport a = validate_hypotheses(model, nullptr, lyap);
  const HypothesisReport b = validate_hypotheses(model, nullptr, lyap);
  CHECK(a.h2 == b.h2);
  CHECK(a.measured_m == b.measured_m);
  CHECK(a.h4_max_slack == b.h4_max_slack);
  CHECK(a.h4_min_lambda == b.h4_min_lambda);
}

TEST_CASE("H5/H6 sampling accepts declared constants and rejects tight ones") {
  DiffusionEnv env;
  env.dim = 1;
  env.drift = [](std::span<const double> x, std::size_t theta, std::span<double> out) {
    out[0] = theta == 0 ? 0.5 * x[0] : -0.25 * x[0];
  };
  env.sigma = [](std::span<const double> x, std::size_t, std::span<double> out) {
    out[0] = 0.4 + 0.1 * x[0];
  };
  env.lip_c1 = 0.26;  // 0.5^2 + 0.1^2
  env.growth_c2 = 2.0;
  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  const QPairModel model(
      {"a", "b"}, grid,
      [](std::size_t, std::size_t, std::span<const double>) { return 0.1; }, 0.2);
  const LyapunovSpec lyap({1.0, 1.0}, 1.0, 0.0, {});
  HypothesisReport rep = validate_hypotheses(model, &env, lyap);
  CHECK(rep.has_env);
  CHECK(rep.h5);
  CHECK(rep.h6);

  DiffusionEnv tight = env;
  tight.lip_c1 = 0.01;
  rep = validate_hypotheses(model, &tight, lyap);
  CHECK_FALSE(rep.h5);
}

TEST_CASE("type invariants reject malformed inputs") {
  CHECK_THROWS_AS(ActionGrid({}, {0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ActionGrid({{0.5}, {0.5}}, {0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(ActionGrid({{2.0}}, {0.0}, {1.0}), std::invalid_argument);
  CHECK_THROWS_AS(MeasureOnU({0, 0}, {0.5, 0.5}), std::invalid_argument);
  CHECK_THROWS_AS(MeasureOnU({0, 1}, {0.6, 0.6}), std::invalid_argument);
  CHECK_THROWS_AS(MeasureOnU({0}, {-1.0}), std::invalid_argument);
  CHECK_THROWS_AS(LyapunovSpec({0.5}, 1.0, 0.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(LyapunovSpec({1.0}, -1.0, 0.0, {}), std::invalid_argument);
  CHECK_THROWS_AS(PsiModulus::power(1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(PsiModulus::tabulated({0.2, 0.1}, {0.1, 0.2}),
                  std::invalid_argument);

  const ActionGrid grid = unit_grid_1d({0.0, 1.0});
  CHECK_THROWS_AS(w1_distance(MeasureOnU::dirac(5), MeasureOnU::dirac(0), grid),
                  std::invalid_argument);

  std::vector<std::vector<MeasureOnU>> curves{{MeasureOnU::dirac(0)}};
  CHECK_THROWS_AS(RelaxedMarkovPolicy({0.5, 1.0}, curves,
                                      PolicyInterp::PiecewiseConstant,
                                      PsiModulus::linear(1.0)),
                  std::invalid_argument);
}

TEST_CASE("psi forms evaluate and stay nondecreasing") {
  const PsiModulus lin = PsiModulus::linear(2.0);
  CHECK(lin(0.0) == 0.0);
  CHECK(lin(0.5) == doctest::Approx(1.0));
  const PsiModulus pw = PsiModulus::power(1.0, 0.5);
  CHECK(pw(0.25) == doctest::Approx(0.5));
  const PsiModulus tab = PsiModulus::tabulated({0.1, 0.5, 1.0}, {0.2, 0.6, 0.6});
  CHECK(tab(0.05) == doctest::Approx(0.1));
  CHECK(tab(0.3) == doctest::Approx(0.4));
  CHECK(tab(2.0) == doctest::Approx(0.6));
  double prev = 0.0;
  for (int i = 0; i <= 100; ++i) {
    const double v = tab(i / 50.0);
    CHECK(v >= prev - 1e-15);
    prev = v;
  }
}
