#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "ctmdp/model.hpp"

// Exact discrete W1. The 1-D case integrates |F_mu - F_nu| over the merged
// support; the general case solves the uncapacitated transportation problem
// with successive shortest paths on the dense bipartite graph (Dijkstra
// with node potentials).

namespace ctmdp {

namespace {

double w1_cdf_1d(const MeasureOnU& mu, const MeasureOnU& nu,
                 const ActionGrid& grid) {
  struct Event {
    double x;
    double w;  // +mu weight, -nu weight
  };
  std::vector<Event> events;
  events.reserve(mu.size() + nu.size());
  for (std::size_t i = 0; i < mu.size(); ++i)
    events.push_back({grid.point(mu.index(i))[0], mu.weight(i)});
  for (std::size_t i = 0; i < nu.size(); ++i)
    events.push_back({grid.point(nu.index(i))[0], -nu.weight(i)});
  std::sort(events.begin(), events.end(),
            [](const Event& a, const Event& b) { return a.x < b.x; });
  double total = 0.0;
  double cum = 0.0;
  for (std::size_t i = 0; i + 1 < events.size(); ++i) {
    cum += events[i].w;
    total += std::abs(cum) * (events[i + 1].x - events[i].x);
  }
  return total;
}

double w1_flow(const MeasureOnU& mu, const MeasureOnU& nu,
               const ActionGrid& grid) {
  const std::size_t n = mu.size();
  const std::size_t m = nu.size();
  std::vector<double> supply(n), demand(m);
  for (std::size_t i = 0; i < n; ++i) supply[i] = mu.weight(i);
  for (std::size_t j = 0; j < m; ++j) demand[j] = nu.weight(j);

  std::vector<double> cost(n * m);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j)
      cost[i * m + j] = grid.distance(mu.index(i), nu.index(j));

  std::vector<double> flow(n * m, 0.0);
  // Node potentials: sources 0..n-1, sinks n..n+m-1.
  const std::size_t nodes = n + m;
  std::vector<double> pot(nodes, 0.0);
  std::vector<double> dist(nodes);
  std::vector<int> prev(nodes);
  std::vector<char> done(nodes);
  const double inf = std::numeric_limits<double>::infinity();

  const double weight_floor = 1e-15;
  auto has_supply = [&] {
    for (std::size_t i = 0; i < n; ++i)
      if (supply[i] > weight_floor) return true;
    return false;
  };

  std::size_t guard = 4 * nodes * nodes + 64;
  while (has_supply() && guard-- > 0) {
    std::fill(dist.begin(), dist.end(), inf);
    std::fill(prev.begin(), prev.end(), -1);
    std::fill(done.begin(), done.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      if (supply[i] > weight_floor) dist[i] = 0.0;

    for (std::size_t iter = 0; iter < nodes; ++iter) {
      std::size_t u = nodes;
      double best = inf;
      for (std::size_t v = 0; v < nodes; ++v)
        if (!done[v] && dist[v] < best) {
          best = dist[v];
          u = v;
        }
      if (u == nodes) break;
      done[u] = 1;
      if (u < n) {
        for (std::size_t j = 0; j < m; ++j) {
          const double rc =
              std::max(0.0, cost[u * m + j] + pot[u] - pot[n + j]);
          if (dist[u] + rc < dist[n + j]) {
            dist[n + j] = dist[u] + rc;
            prev[n + j] = static_cast<int>(u);
          }
        }
      } else {
        const std::size_t j = u - n;
        for (std::size_t i = 0; i < n; ++i) {
          if (flow[i * m + j] <= 0.0) continue;
          const double rc =
              std::max(0.0, -cost[i * m + j] + pot[u] - pot[i]);
          if (dist[u] + rc < dist[i]) {
            dist[i] = dist[u] + rc;
            prev[i] = static_cast<int>(u);
          }
        }
      }
    }

    // Cheapest reachable sink with unmet demand.
    std::size_t sink = nodes;
    double best = inf;
    for (std::size_t j = 0; j < m; ++j)
      if (demand[j] > weight_floor && dist[n + j] < best) {
        best = dist[n + j];
        sink = n + j;
      }
    if (sink == nodes) break;  // numerically exhausted

    // Bottleneck along the path.
    double delta = demand[sink - n];
    for (std::size_t v = sink; prev[v] >= 0;) {
      const std::size_t u = static_cast<std::size_t>(prev[v]);
      if (u < n && v >= n) {
        // forward arc, uncapacitated
      } else {
        delta = std::min(delta, flow[v * m + (u - n)]);
      }
      v = u;
      if (prev[v] < 0) delta = std::min(delta, supply[v]);
    }

    for (std::size_t v = sink; prev[v] >= 0;) {
      const std::size_t u = static_cast<std::size_t>(prev[v]);
      if (u < n && v >= n) {
        flow[u * m + (v - n)] += delta;
      } else {
        double& fback = flow[v * m + (u - n)];
        fback = (fback - delta <= weight_floor) ? 0.0 : fback - delta;
      }
      v = u;
      if (prev[v] < 0) {
        supply[v] = (supply[v] - delta <= weight_floor) ? 0.0 : supply[v] - delta;
      }
    }
    const std::size_t j = sink - n;
    demand[j] = (demand[j] - delta <= weight_floor) ? 0.0 : demand[j] - delta;

    for (std::size_t v = 0; v < nodes; ++v)
      if (dist[v] < inf) pot[v] += dist[v];
  }

  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < m; ++j) total += flow[i * m + j] * cost[i * m + j];
  return total;
}

}  // namespace

double w1_distance(const MeasureOnU& mu, const MeasureOnU& nu,
                   const ActionGrid& grid) {
  if (mu.max_index() >= grid.size() || nu.max_index() >= grid.size())
    throw std::invalid_argument(
        "w1_distance: measure support does not fit the action grid");
  if (mu.same_as(nu)) return 0.0;
  if (grid.dim() == 1) return w1_cdf_1d(mu, nu, grid);
  return w1_flow(mu, nu, grid);
}

}  // namespace ctmdp
