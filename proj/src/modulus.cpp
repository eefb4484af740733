#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

#include "ctmdp/model.hpp"

namespace ctmdp {

std::vector<double> modulus_eval_grid(const RelaxedMarkovPolicy& policy,
                                      std::size_t points) {
  const double horizon = policy.horizon();
  points = std::max<std::size_t>(points, 2);
  std::vector<double> grid;
  grid.reserve(points + policy.knots().size());
  for (std::size_t i = 0; i < points; ++i)
    grid.push_back(horizon * static_cast<double>(i) /
                   static_cast<double>(points - 1));
  grid.insert(grid.end(), policy.knots().begin(), policy.knots().end());
  std::sort(grid.begin(), grid.end());
  grid.erase(std::unique(grid.begin(), grid.end(),
                         [](double a, double b) { return std::abs(a - b) < 1e-15; }),
             grid.end());
  return grid;
}

ModulusReport modulus_report(const RelaxedMarkovPolicy& policy,
                             const ActionGrid& grid,
                             const std::vector<double>& eval_grid) {
  if (eval_grid.size() < 2)
    throw std::invalid_argument("modulus_report: need at least two grid points");
  const double horizon = policy.horizon();
  for (std::size_t i = 0; i < eval_grid.size(); ++i) {
    if (eval_grid[i] < 0.0 || eval_grid[i] > horizon + 1e-12)
      throw std::invalid_argument("modulus_report: eval grid outside [0, T]");
    if (i > 0 && !(eval_grid[i] > eval_grid[i - 1]))
      throw std::invalid_argument("modulus_report: eval grid not increasing");
  }

  const PsiModulus& psi = policy.psi();
  const std::size_t g = eval_grid.size();
  const std::size_t ns = policy.num_states();
  constexpr double kTol = 1e-10;

  ModulusReport rep;
  rep.grid = eval_grid;
  const std::size_t ndelta = std::min<std::size_t>(g - 1, 32);
  rep.deltas.resize(ndelta);
  for (std::size_t k = 0; k < ndelta; ++k)
    rep.deltas[k] = horizon * static_cast<double>(k + 1) / static_cast<double>(ndelta);
  rep.w_table.assign(ns, std::vector<double>(ndelta, 0.0));
  rep.w2_table.assign(ns, std::vector<double>(ndelta, 0.0));

  std::vector<double> pair_w1(g * g, 0.0);
  std::vector<double> maxin(g * g, 0.0);  // max pairwise W1 among points a..b
  double worst_w_gap = -std::numeric_limits<double>::infinity();
  double worst_w2_gap = -std::numeric_limits<double>::infinity();

  for (std::size_t st = 0; st < ns; ++st) {
    std::vector<MeasureOnU> at;
    at.reserve(g);
    for (double t : eval_grid) at.push_back(policy.measure_at(st, t));

    for (std::size_t i = 0; i < g; ++i) {
      pair_w1[i * g + i] = 0.0;
      for (std::size_t j = i + 1; j < g; ++j) {
        const double d = w1_distance(at[i], at[j], grid);
        pair_w1[i * g + j] = d;
        pair_w1[j * g + i] = d;
      }
    }

    // maxin[a][b] = max pairwise W1 among grid points a..b (inclusive).
    for (std::size_t b = 0; b < g; ++b) {
      double run = 0.0;
      for (std::size_t a = b; a-- > 0;) {
        run = std::max(run, pair_w1[a * g + b]);
        maxin[a * g + b] = std::max(run, b > a + 1 ? maxin[a * g + (b - 1)] : 0.0);
      }
      maxin[b * g + b] = 0.0;
    }

    // w over half-open grid intervals [t_i, t_j): points i..j-1 inside.
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = i + 1; j < g; ++j) {
        const double width = eval_grid[j] - eval_grid[i];
        const double value = (j - 1 > i) ? maxin[i * g + (j - 1)] : 0.0;
        const double bound = psi(width);
        const double gap = value - bound;
        if (gap > kTol && gap > worst_w_gap) {
          worst_w_gap = gap;
          rep.pass_w = false;
          rep.worst_w = ModulusViolation{st, eval_grid[i], eval_grid[j], value, bound};
        }
        for (std::size_t k = 0; k < ndelta; ++k)
          if (width <= rep.deltas[k] + 1e-15)
            rep.w_table[st][k] = std::max(rep.w_table[st][k], value);
      }
    }

    // w'' over closed triples t_i <= t_k <= t_j.
    for (std::size_t i = 0; i < g; ++i) {
      for (std::size_t j = i; j < g; ++j) {
        double m = 0.0;
        for (std::size_t k = i; k <= j; ++k)
          m = std::max(m, std::min(pair_w1[k * g + i], pair_w1[k * g + j]));
        const double width = eval_grid[j] - eval_grid[i];
        const double bound = psi(width);
        const double gap = m - bound;
        if (gap > kTol && gap > worst_w2_gap) {
          worst_w2_gap = gap;
          rep.pass_w2 = false;
          rep.worst_w2 = ModulusViolation{st, eval_grid[i], eval_grid[j], m, bound};
        }
        for (std::size_t k = 0; k < ndelta; ++k)
          if (width <= rep.deltas[k] + 1e-15)
            rep.w2_table[st][k] = std::max(rep.w2_table[st][k], m);
      }
    }
  }
  return rep;
}

}  // namespace ctmdp
