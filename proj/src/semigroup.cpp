#include "ctmdp/semigroup.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "ctmdp/kernels.hpp"

namespace ctmdp {

void GeneratorAt::set_row(std::size_t i, const RateRow& mixed) {
  std::copy(mixed.to.begin(), mixed.to.end(), q_.begin() + i * n_);
  q_[i * n_ + i] = -mixed.total;
  totals_[i] = mixed.total;
}

double GeneratorAt::row_sum(std::size_t i) const {
  double acc = 0.0;
  for (std::size_t j = 0; j < n_; ++j)
    if (j != i) acc += q_[i * n_ + j];
  return acc + q_[i * n_ + i];
}

void GeneratorAt::apply(std::span<const double> h, std::span<double> out) const {
  for (std::size_t i = 0; i < n_; ++i)
    out[i] = kernels::dot(q_.data() + i * n_, h.data(), n_);
}

double GeneratorAt::inf_norm() const {
  double worst = 0.0;
  for (std::size_t i = 0; i < n_; ++i) worst = std::max(worst, 2.0 * totals_[i]);
  return worst;
}

namespace {

GeneratorAt build_generator(const QPairModel& model,
                            const RelaxedMarkovPolicy& policy, double t,
                            bool left_limit) {
  GeneratorAt gen(t, model.num_states());
  for (std::size_t th = 0; th < model.num_states(); ++th) {
    const MeasureOnU mu = left_limit ? policy.measure_at_left(th, t)
                                     : policy.measure_at(th, t);
    gen.set_row(th, mixed_rate(model, th, mu));
  }
  return gen;
}

}  // namespace

GeneratorAt generator_at(const QPairModel& model, const RelaxedMarkovPolicy& policy,
                         double t) {
  if (t < 0.0 || t > policy.horizon() + 1e-12)
    throw std::domain_error("generator_at: time outside [0, T]");
  if (policy.num_states() != model.num_states())
    throw std::invalid_argument("generator_at: policy/model state mismatch");
  return build_generator(model, policy, t, false);
}

double tail_bound(double m_const, double s, double t, int n) {
  if (n < 0 || t < s || m_const < 0.0)
    throw std::invalid_argument("tail_bound: bad arguments");
  const double x = 2.0 * m_const * (t - s);
  if (x == 0.0) return n == 0 ? 1.0 : 0.0;
  // Leading term x^n / n! built incrementally, then forward summation of
  // the positive remainder terms; no cancellation.
  double term = 1.0;
  for (int i = 1; i <= n; ++i) term *= x / static_cast<double>(i);
  double acc = 0.0;
  int m = n;
  while (term > 0.0 && (acc == 0.0 || term > acc * 1e-18)) {
    acc += term;
    ++m;
    term *= x / static_cast<double>(m);
    if (m > n + 10000) break;
  }
  return acc;
}

namespace {

// Quadrature grid over [s, t]. Policy knots never sit inside a segment;
// boundary nodes are duplicated so each segment owns both of its endpoints
// and piecewise-constant jumps are never straddled: the node ending a
// segment is evaluated with the left-limit measures.
struct QuadGrid {
  std::vector<double> times;
  std::vector<char> is_segment_end;
  struct Segment {
    std::size_t first;  // index of the segment's start node
    std::size_t count;  // interval count (>= 4)
  };
  std::vector<Segment> segments;
};

QuadGrid build_quad_grid(const RelaxedMarkovPolicy& policy, double s, double t,
                         double target_h) {
  std::vector<double> bounds{s};
  for (double k : policy.knots())
    if (k > s + 1e-15 && k < t - 1e-15) bounds.push_back(k);
  bounds.push_back(t);
  QuadGrid grid;
  for (std::size_t b = 0; b + 1 < bounds.size(); ++b) {
    const double len = bounds[b + 1] - bounds[b];
    if (len <= 0.0) continue;
    std::size_t k = static_cast<std::size_t>(std::ceil(len / target_h));
    k = std::clamp<std::size_t>(k, 4, 4000000);
    grid.segments.push_back({grid.times.size(), k});
    for (std::size_t i = 0; i <= k; ++i) {
      grid.times.push_back(bounds[b] + len * static_cast<double>(i) /
                                           static_cast<double>(k));
      grid.is_segment_end.push_back(i == k ? 1 : 0);
    }
    grid.times[grid.times.size() - 1] = bounds[b + 1];
  }
  return grid;
}

// Reverse cumulative integral J(r) = int_r^t F on the grid with 4th-order
// Newton-Cotes rules (Adams-Moulton coefficients at segment edges). F and J
// hold `width` contiguous values per node; the running value carries across
// segments from the top end downward. Integrating from the top makes the
// iterated series come out in chronological operator order, the unique
// solution of the Kolmogorov equation.
void cumulative_from_top(const QuadGrid& grid, const std::vector<double>& f,
                         std::size_t width, std::vector<double>& j_out) {
  std::vector<double> carry(width, 0.0);
  for (std::size_t si = grid.segments.size(); si-- > 0;) {
    const QuadGrid::Segment& seg = grid.segments[si];
    const std::size_t a = seg.first;
    const std::size_t k = seg.count;
    const double h =
        (grid.times[a + k] - grid.times[a]) / static_cast<double>(k);
    const double c = h / 24.0;
    auto node = [&](std::size_t idx) { return f.data() + idx * width; };
    std::copy(carry.begin(), carry.end(), j_out.begin() + (a + k) * width);
    for (std::size_t step = k; step-- > 0;) {
      // Quadrature of F over [x_step, x_step+1], added to the running tail.
      const double *w0, *w1, *w2, *w3;
      double c0, c1, c2, c3;
      if (step == 0) {
        w0 = node(a), w1 = node(a + 1), w2 = node(a + 2), w3 = node(a + 3);
        c0 = 9.0, c1 = 19.0, c2 = -5.0, c3 = 1.0;
      } else if (step + 1 == k) {
        w0 = node(a + k - 3), w1 = node(a + k - 2), w2 = node(a + k - 1), w3 = node(a + k);
        c0 = 1.0, c1 = -5.0, c2 = 19.0, c3 = 9.0;
      } else {
        w0 = node(a + step - 1), w1 = node(a + step), w2 = node(a + step + 1), w3 = node(a + step + 2);
        c0 = -1.0, c1 = 13.0, c2 = 13.0, c3 = -1.0;
      }
      const double* above = j_out.data() + (a + step + 1) * width;
      double* here = j_out.data() + (a + step) * width;
      for (std::size_t i = 0; i < width; ++i)
        here[i] = above[i] + c * (c0 * w0[i] + c1 * w1[i] + c2 * w2[i] + c3 * w3[i]);
    }
    std::copy(j_out.begin() + a * width, j_out.begin() + (a + 1) * width,
              carry.begin());
  }
}

double max_abs(std::span<const double> v) {
  double m = 0.0;
  for (double x : v) m = std::max(m, std::abs(x));
  return m;
}

// Supremum of ||dQ/dt||_inf over [s, t]: zero for piecewise-constant
// policies (knot-aligned steps never straddle a jump); for mixture-linear
// interpolation the generator is linear on each segment, so the derivative
// is the endpoint difference over the segment length.
double generator_stiffness(const QPairModel& model,
                           const RelaxedMarkovPolicy& policy, double s, double t) {
  if (policy.interp() == PolicyInterp::PiecewiseConstant ||
      policy.is_time_constant())
    return 0.0;
  const std::size_t n = model.num_states();
  const auto& knots = policy.knots();
  double stiffness = 0.0;
  for (std::size_t k = 0; k + 1 < knots.size(); ++k) {
    if (knots[k + 1] <= s || knots[k] >= t) continue;
    const double len = knots[k + 1] - knots[k];
    if (len <= 0.0) continue;
    double dq = 0.0;
    for (std::size_t th = 0; th < n; ++th) {
      const RateRow lo = mixed_rate(model, th, policy.knot_measure(th, k));
      const RateRow hi = mixed_rate(model, th, policy.knot_measure(th, k + 1));
      double row = std::abs(hi.total - lo.total);
      for (std::size_t g = 0; g < n; ++g) row += std::abs(hi.to[g] - lo.to[g]);
      dq = std::max(dq, row);
    }
    stiffness = std::max(stiffness, dq / len);
  }
  return stiffness;
}

// Bound on the fifth time-derivative of solutions of z' = -Q(r) z with
// ||Q|| <= q and ||Q'|| <= p (Q'' = 0 piecewise): repeated differentiation
// gives q^5 + 10 p q^3 + 15 p^2 q.
double fifth_derivative_bound(double q, double p) {
  return q * q * q * q * q + 10.0 * p * q * q * q + 15.0 * p * p * q;
}

// Same recursion one order lower, for the quadrature integrand F = Q J.
double fourth_derivative_bound(double q, double p) {
  return q * q * q * q + 6.0 * p * q * q + 3.0 * p * p;
}

TransitionResult dyson_engine(const QPairModel& model,
                              const RelaxedMarkovPolicy& policy, double s, double t,
                              std::span<const double> h, double tol,
                              int forced_order) {
  const std::size_t n = model.num_states();
  if (h.size() != n) throw std::invalid_argument("dyson_transition: bad h size");
  if (!(tol > 0.0)) throw std::domain_error("dyson_transition: tol must be > 0");
  if (s < 0.0 || t < s || t > policy.horizon() + 1e-12)
    throw std::domain_error("dyson_transition: need 0 <= s <= t <= T");

  TransitionResult res;
  res.values.assign(h.begin(), h.end());
  const double hnorm = max_abs(h);
  const double m_const = model.measured_m();
  if (t == s || hnorm == 0.0) return res;

  int order = forced_order;
  if (order < 0) {
    order = 1;
    while (order < 4000 && tail_bound(m_const, s, t, order) * hnorm > 0.5 * tol)
      ++order;
  }
  res.order = order;
  res.tail = tail_bound(m_const, s, t, order) * hnorm;
  if (order == 0) return res;

  // Quadrature step targeting half the tolerance budget. The iterated
  // integrands sum to at most e^{2M(t-s)} ||h|| with fourth derivatives
  // controlled by ||Q|| and ||Q'||.
  const double span = t - s;
  const double x = 2.0 * m_const * span;
  const double stiffness = generator_stiffness(model, policy, s, t);
  const double deriv =
      fourth_derivative_bound(std::max(2.0 * m_const, 1e-9), stiffness) *
      std::exp(std::min(x, 40.0)) * hnorm;
  double target_h =
      std::pow(720.0 * 0.5 * tol / (11.0 * span * std::max(deriv, 1e-12)), 0.25);
  target_h = std::clamp(target_h, span / 4.0e6, span / 4.0);

  const QuadGrid grid = build_quad_grid(policy, s, t, target_h);
  const std::size_t nn = grid.times.size();

  const bool constant_policy = policy.is_time_constant();
  std::vector<GeneratorAt> gens;
  if (constant_policy) {
    gens.push_back(build_generator(model, policy, s, false));
  } else {
    gens.reserve(nn);
    for (std::size_t i = 0; i < nn; ++i)
      gens.push_back(build_generator(model, policy, grid.times[i],
                                     grid.is_segment_end[i] != 0));
  }
  auto gen_at = [&](std::size_t node) -> const GeneratorAt& {
    return constant_policy ? gens[0] : gens[node];
  };

  std::vector<double> j_prev(nn * n);
  std::vector<double> f_vals(nn * n);
  std::vector<double> j_next(nn * n);
  for (std::size_t node = 0; node < nn; ++node)
    std::copy(h.begin(), h.end(), j_prev.begin() + node * n);

  // G_m(r) = int_r^t Q(tau) G_{m-1}(tau) dtau, G_0 = h; the m-th series
  // term is G_m(s), its value at the first node.
  for (int m = 1; m <= order; ++m) {
    for (std::size_t node = 0; node < nn; ++node)
      gen_at(node).apply({j_prev.data() + node * n, n},
                         {f_vals.data() + node * n, n});
    cumulative_from_top(grid, f_vals, n, j_next);
    for (std::size_t i = 0; i < n; ++i) res.values[i] += j_next[i];
    j_prev.swap(j_next);
  }
  return res;
}

}  // namespace

TransitionResult dyson_transition(const QPairModel& model,
                                  const RelaxedMarkovPolicy& policy, double s,
                                  double t, std::span<const double> h, double tol) {
  return dyson_engine(model, policy, s, t, h, tol, -1);
}

TransitionResult dyson_transition(const QPairModel& model,
                                  const RelaxedMarkovPolicy& policy, double s,
                                  double t, std::span<const double> h, double tol,
                                  int forced_order) {
  if (forced_order < 0)
    throw std::invalid_argument("dyson_transition: forced order must be >= 0");
  return dyson_engine(model, policy, s, t, h, tol, forced_order);
}

int backward_evolve(
    const QPairModel& model, const RelaxedMarkovPolicy& policy, double t_hi,
    double t_lo, std::span<double> values, double tol,
    const std::function<void(double, bool, std::span<double>)>* source,
    int min_steps_per_unit) {
  const std::size_t n = model.num_states();
  if (values.size() != n) throw std::invalid_argument("backward_evolve: bad size");
  if (!(tol > 0.0)) throw std::domain_error("backward_evolve: tol must be > 0");
  if (t_lo > t_hi) throw std::domain_error("backward_evolve: t_lo > t_hi");
  const double span = t_hi - t_lo;
  if (span == 0.0) return 0;

  const double m_const = model.measured_m();
  // Accumulated RK4 truncation ~ span h^4 |z^(5)| / 120 <= tol, with the
  // fifth derivative controlled by ||Q|| and ||Q'||.
  const double d5 = fifth_derivative_bound(
      2.0 * m_const, generator_stiffness(model, policy, t_lo, t_hi));
  double target_h = span;
  if (d5 > 0.0) target_h = std::pow(120.0 * tol / (span * d5), 0.25);
  if (min_steps_per_unit > 1)
    target_h = std::min(target_h, span / static_cast<double>(min_steps_per_unit));
  target_h = std::clamp(target_h, span / 4.0e6, span);

  std::vector<double> bounds{t_lo};
  for (double k : policy.knots())
    if (k > t_lo + 1e-15 && k < t_hi - 1e-15) bounds.push_back(k);
  bounds.push_back(t_hi);

  const bool constant_policy = policy.is_time_constant();
  GeneratorAt cached = constant_policy ? build_generator(model, policy, t_lo, false)
                                       : GeneratorAt(0.0, n);
  double seg_hi = t_hi;  // left-limit evaluation at the segment top
  std::vector<double> src(n);
  auto deriv = [&](double r, std::span<const double> z, std::vector<double>& out) {
    const bool left_limit = r >= seg_hi - 1e-15;
    if (constant_policy) {
      cached.apply(z, out);
    } else {
      build_generator(model, policy, r, left_limit).apply(z, out);
    }
    for (double& v : out) v = -v;
    if (source != nullptr) {
      (*source)(r, left_limit, src);
      for (std::size_t i = 0; i < n; ++i) out[i] -= src[i];
    }
  };

  int total_steps = 0;
  std::vector<double> k1(n), k2(n), k3(n), k4(n), ztmp(n);
  for (std::size_t b = bounds.size() - 1; b-- > 0;) {
    const double lo = bounds[b];
    const double hi = bounds[b + 1];
    seg_hi = hi;
    const auto steps = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil((hi - lo) / target_h)));
    const double dt = -(hi - lo) / static_cast<double>(steps);
    double r = hi;
    for (std::size_t stp = 0; stp < steps; ++stp) {
      // Stage times clamped to the segment: rounding must never let an
      // evaluation slip past a policy knot into the neighboring segment.
      const double r_mid = std::max(lo, r + 0.5 * dt);
      const double r_end =
          (stp + 1 == steps) ? lo : std::max(lo, r + dt);
      deriv(r, values, k1);
      for (std::size_t i = 0; i < n; ++i) ztmp[i] = values[i] + 0.5 * dt * k1[i];
      deriv(r_mid, ztmp, k2);
      for (std::size_t i = 0; i < n; ++i) ztmp[i] = values[i] + 0.5 * dt * k2[i];
      deriv(r_mid, ztmp, k3);
      for (std::size_t i = 0; i < n; ++i) ztmp[i] = values[i] + dt * k3[i];
      deriv(r_end, ztmp, k4);
      for (std::size_t i = 0; i < n; ++i)
        values[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
      r = r_end;
      ++total_steps;
    }
  }
  return total_steps;
}

TransitionResult ode_transition(const QPairModel& model,
                                const RelaxedMarkovPolicy& policy, double s,
                                double t, std::span<const double> h, double tol) {
  const std::size_t n = model.num_states();
  if (h.size() != n) throw std::invalid_argument("ode_transition: bad h size");
  if (!(tol > 0.0)) throw std::domain_error("ode_transition: tol must be > 0");
  if (s < 0.0 || t < s || t > policy.horizon() + 1e-12)
    throw std::domain_error("ode_transition: need 0 <= s <= t <= T");
  TransitionResult res;
  res.values.assign(h.begin(), h.end());
  // z(r) = P_{r,t} h solves dz/dr = -Q(r) z backward from r = t; z(s) is
  // the requested vector for every starting state at once.
  res.order = backward_evolve(model, policy, t, s, res.values, tol, nullptr);
  const double m_const = model.measured_m();
  if (res.order > 0) {
    const double h_step = (t - s) / static_cast<double>(res.order);
    res.tail = (t - s) * std::pow(2.0 * m_const * h_step, 4.0) * 2.0 * m_const / 120.0;
  }
  return res;
}

std::vector<double> transition_matrix(TransitionMethod method,
                                      const QPairModel& model,
                                      const RelaxedMarkovPolicy& policy, double s,
                                      double t, double tol) {
  const std::size_t n = model.num_states();
  std::vector<double> p(n * n, 0.0);
  std::vector<double> indicator(n, 0.0);
  for (std::size_t col = 0; col < n; ++col) {
    indicator.assign(n, 0.0);
    indicator[col] = 1.0;
    const TransitionResult r =
        method == TransitionMethod::Dyson
            ? dyson_transition(model, policy, s, t, indicator, tol)
            : ode_transition(model, policy, s, t, indicator, tol);
    for (std::size_t row = 0; row < n; ++row) p[row * n + col] = r.values[row];
  }
  return p;
}

}  // namespace ctmdp
