#include "ctmdp/solve.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

#include "ctmdp/kernels.hpp"
#include "ctmdp/rng.hpp"
#include "ctmdp/simulate.hpp"

namespace ctmdp {

namespace {

std::vector<double> merge_sorted(std::vector<double> base,
                                 std::span<const double> extra) {
  base.insert(base.end(), extra.begin(), extra.end());
  std::sort(base.begin(), base.end());
  base.erase(std::unique(base.begin(), base.end(),
                         [](double a, double b) { return b - a < 1e-15; }),
             base.end());
  return base;
}

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> values) {
  MeanSe out;
  const std::size_t n = values.size();
  out.mean = kernels::sum(values.data(), n) / static_cast<double>(n);
  if (n > 1) {
    const double ss = kernels::sumsq(values.data(), n);
    double var = (ss - static_cast<double>(n) * out.mean * out.mean) /
                 static_cast<double>(n - 1);
    out.se = std::sqrt(std::max(var, 0.0) / static_cast<double>(n));
  }
  return out;
}

void enforce_admissibility(const QPairModel& model,
                           const RelaxedMarkovPolicy& policy,
                           const McOptions& options) {
  if (!options.check_admissibility) return;
  const auto grid = modulus_eval_grid(policy, options.modulus_points);
  const ModulusReport rep = modulus_report(policy, model.actions(), grid);
  if (!rep.pass(options.gate)) {
    const auto& worst =
        options.gate == AdmissibilityGate::W ? rep.worst_w : rep.worst_w2;
    ModulusViolation v = worst.value_or(ModulusViolation{});
    std::ostringstream msg;
    msg << "policy fails the modulus gate: state " << v.state << ", interval ["
        << v.t1 << ", " << v.t2 << "), w = " << v.value << " > psi = " << v.bound;
    throw AdmissibilityError(msg.str(), v);
  }
}

}  // namespace

CostEstimate cost_mc(const QPairModel& model, const DiffusionEnv* env,
                     const CostSpec& cost, const RelaxedMarkovPolicy& policy,
                     double s, std::size_t theta, std::span<const double> x0,
                     const McOptions& options) {
  if (options.npaths < 2)
    throw std::invalid_argument("cost_mc: need at least two paths");
  if (theta >= model.num_states())
    throw std::invalid_argument("cost_mc: bad initial state");
  enforce_admissibility(model, policy, options);

  const double horizon = policy.horizon();
  const double mesh_dt =
      options.mesh_dt > 0.0 ? options.mesh_dt : (horizon - s) / 512.0;
  const ActionGrid& grid = model.actions();

  // Base mesh: uniform dt grid merged with the policy knots.
  std::vector<double> base;
  {
    const auto steps = std::max<std::size_t>(
        1, static_cast<std::size_t>(std::ceil((horizon - s) / mesh_dt)));
    base.reserve(steps + 1);
    for (std::size_t i = 0; i <= steps; ++i)
      base.push_back(s + (horizon - s) * static_cast<double>(i) /
                             static_cast<double>(steps));
    std::vector<double> knots;
    for (double k : policy.knots())
      if (k > s && k < horizon) knots.push_back(k);
    base = merge_sorted(std::move(base), knots);
  }

  // Piecewise-constant policies with time- and x-independent running cost:
  // the mixed cost is constant per (state, policy segment).
  const bool cached = !cost.f_time_dependent && !cost.f_x_dependent &&
                      policy.interp() == PolicyInterp::PiecewiseConstant &&
                      env == nullptr;
  std::vector<double> fbar_cache;
  const std::size_t nseg = policy.knots().size();
  if (cached) {
    fbar_cache.assign(model.num_states() * nseg, 0.0);
    for (std::size_t th = 0; th < model.num_states(); ++th)
      for (std::size_t seg = 0; seg < nseg; ++seg)
        fbar_cache[th * nseg + seg] = mixed_running_cost(
            cost, grid, policy.knots()[seg], {}, th, policy.knot_measure(th, seg));
  }
  auto segment_of = [&](double t) {
    const auto& knots = policy.knots();
    const auto it = std::upper_bound(knots.begin(), knots.end(), t);
    const std::size_t idx = static_cast<std::size_t>(it - knots.begin());
    return idx == 0 ? 0 : std::min(idx - 1, knots.size() - 1);
  };

  std::vector<double> costs(options.npaths, 0.0);
  parallel_for(options.npaths, [&](std::size_t p) {
    if (env == nullptr) {
      const std::uint64_t seed = rng::derive_seed(options.seed, 2 * p);
      const ChainPath path = sample_chain(model, policy, s, theta, horizon, seed);
      const std::vector<double> mesh = merge_sorted(base, path.jump_times);
      double integral = 0.0;
      for (std::size_t i = 0; i + 1 < mesh.size(); ++i) {
        const double a = mesh[i];
        const double b = mesh[i + 1];
        const std::size_t st = path.state_at(a);
        double fa, fb;
        if (cached) {
          fa = fb = fbar_cache[st * nseg + segment_of(a)];
        } else {
          fa = mixed_running_cost(cost, grid, a, {}, st, policy.measure_at(st, a));
          fb = mixed_running_cost(cost, grid, b, {}, st,
                                  policy.measure_at_left(st, b));
        }
        integral += 0.5 * (fa + fb) * (b - a);
      }
      costs[p] = integral + cost.g({}, path.state_at(horizon));
    } else {
      const std::uint64_t chain_seed = rng::derive_seed(options.seed, 2 * p);
      const std::uint64_t diff_seed = rng::derive_seed(options.seed, 2 * p + 1);
      const CoupledPath path =
          sample_coupled_seeds(model, *env, policy, s, x0, theta, horizon, mesh_dt,
                               chain_seed, diff_seed, policy.knots());
      double integral = 0.0;
      for (std::size_t i = 0; i + 1 < path.times.size(); ++i) {
        const double a = path.times[i];
        const double b = path.times[i + 1];
        const std::size_t st = path.chain.state_at(a);
        const double fa = mixed_running_cost(cost, grid, a, path.x_at_index(i), st,
                                             policy.measure_at(st, a));
        const double fb = mixed_running_cost(cost, grid, b, path.x_at_index(i + 1),
                                             st, policy.measure_at_left(st, b));
        integral += 0.5 * (fa + fb) * (b - a);
      }
      costs[p] = integral + cost.g(path.x_at_index(path.times.size() - 1),
                                   path.chain.state_at(horizon));
    }
  });

  const MeanSe ms = mean_se(costs);
  return CostEstimate{ms.mean, ms.se, options.npaths, options.seed};
}

std::vector<double> cost_exact_chain_all(const QPairModel& model,
                                         const CostSpec& cost,
                                         const RelaxedMarkovPolicy& policy,
                                         double s, double tol) {
  if (!(tol > 0.0)) throw std::domain_error("cost_exact_chain: tol must be > 0");
  const std::size_t ns = model.num_states();
  const double horizon = policy.horizon();
  std::vector<double> values(ns);
  for (std::size_t th = 0; th < ns; ++th) values[th] = cost.g({}, th);
  const ActionGrid& grid = model.actions();
  const std::function<void(double, bool, std::span<double>)> source =
      [&](double r, bool left_limit, std::span<double> out) {
        for (std::size_t th = 0; th < ns; ++th) {
          const MeasureOnU mu = left_limit ? policy.measure_at_left(th, r)
                                           : policy.measure_at(th, r);
          out[th] = mixed_running_cost(cost, grid, r, {}, th, mu);
        }
      };
  backward_evolve(model, policy, horizon, s, values, tol, &source, 64);
  return values;
}

double cost_exact_chain(const QPairModel& model, const CostSpec& cost,
                        const RelaxedMarkovPolicy& policy, double s,
                        std::size_t theta, double tol) {
  if (theta >= model.num_states())
    throw std::invalid_argument("cost_exact_chain: bad state");
  return cost_exact_chain_all(model, cost, policy, s, tol)[theta];
}

ValueGridChain dp_chain(const QPairModel& model, const CostSpec& cost,
                        double horizon, std::size_t n_steps) {
  if (!(horizon > 0.0) || n_steps == 0)
    throw std::invalid_argument("dp_chain: bad grid");
  const double dt = horizon / static_cast<double>(n_steps);
  const double m_const = model.measured_m();
  if (dt * 2.0 * m_const >= 1.0) {
    const auto required =
        static_cast<std::size_t>(std::floor(2.0 * m_const * horizon)) + 1;
    std::ostringstream msg;
    msg << "dp_chain: explicit scheme unstable, dt * 2M = " << dt * 2.0 * m_const
        << " >= 1; need at least " << required << " steps";
    throw StabilityError(msg.str(), required);
  }

  const std::size_t ns = model.num_states();
  const std::size_t nu = model.actions().size();
  ValueGridChain vg;
  vg.num_states = ns;
  vg.knots.resize(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k)
    vg.knots[k] = horizon * static_cast<double>(k) / static_cast<double>(n_steps);
  vg.v.assign((n_steps + 1) * ns, 0.0);
  vg.astar.assign((n_steps + 1) * ns, -1);
  for (std::size_t th = 0; th < ns; ++th)
    vg.v[n_steps * ns + th] = cost.g({}, th);

  std::vector<double> ftab;
  if (!cost.f_time_dependent) {
    ftab.assign(ns * nu, 0.0);
    for (std::size_t th = 0; th < ns; ++th)
      for (std::size_t u = 0; u < nu; ++u)
        ftab[th * nu + u] = cost.f(0.0, {}, th, model.actions().point(u));
  }

  for (std::size_t k = n_steps; k-- > 0;) {
    const double t = vg.knots[k];
    const double* vnext = vg.v.data() + (k + 1) * ns;
    for (std::size_t th = 0; th < ns; ++th) {
      double best = std::numeric_limits<double>::infinity();
      int best_u = -1;
      for (std::size_t u = 0; u < nu; ++u) {
        const double fval = ftab.empty()
                                ? cost.f(t, {}, th, model.actions().point(u))
                                : ftab[th * nu + u];
        const auto row = model.rate_row(th, u);
        const double coupling = kernels::dot(row.data(), vnext, ns) -
                                model.total_rate(th, u) * vnext[th];
        const double val = fval * dt + vnext[th] + dt * coupling;
        if (val < best) {
          best = val;
          best_u = static_cast<int>(u);
        }
      }
      vg.v[k * ns + th] = best;
      vg.astar[k * ns + th] = best_u;
    }
  }
  return vg;
}

ValueGridEnv dp_env(const QPairModel& model, const DiffusionEnv& env,
                    const CostSpec& cost, double horizon, std::size_t n_steps,
                    double x_lo, double x_hi, std::size_t nx) {
  if (env.dim != 1)
    throw std::invalid_argument("dp_env: only d = 1 environments are supported");
  if (!(horizon > 0.0) || n_steps == 0 || nx < 3 || !(x_hi > x_lo))
    throw std::invalid_argument("dp_env: bad grid");

  const std::size_t ns = model.num_states();
  const std::size_t nu = model.actions().size();
  const double dt = horizon / static_cast<double>(n_steps);
  const double dx = (x_hi - x_lo) / static_cast<double>(nx - 1);

  ValueGridEnv vg;
  vg.num_states = ns;
  vg.x_lo = x_lo;
  vg.dx = dx;
  vg.nx = nx;
  vg.knots.resize(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k)
    vg.knots[k] = horizon * static_cast<double>(k) / static_cast<double>(n_steps);

  // Per-regime coefficient tables on the x-grid.
  std::vector<double> drift(ns * nx), half_sig2(ns * nx);
  double max_abs_b = 0.0, max_sig2 = 0.0;
  {
    std::vector<double> bv(1), sv(1);
    for (std::size_t th = 0; th < ns; ++th)
      for (std::size_t i = 0; i < nx; ++i) {
        const double xval = vg.x_at(i);
        const std::span<const double> xs{&xval, 1};
        env.drift(xs, th, bv);
        env.sigma(xs, th, sv);
        drift[th * nx + i] = bv[0];
        half_sig2[th * nx + i] = 0.5 * sv[0] * sv[0];
        max_abs_b = std::max(max_abs_b, std::abs(bv[0]));
        max_sig2 = std::max(max_sig2, sv[0] * sv[0]);
      }
  }

  const double m_const = model.measured_m();
  const double cfl =
      max_sig2 / (dx * dx) + max_abs_b / dx + 2.0 * m_const;
  if (dt * cfl > 1.0) {
    const auto required = static_cast<std::size_t>(std::ceil(horizon * cfl));
    std::ostringstream msg;
    msg << "dp_env: explicit scheme unstable, dt * (sig2/dx^2 + |b|/dx + 2M) = "
        << dt * cfl << " > 1; need at least " << required << " steps";
    throw StabilityError(msg.str(), required);
  }

  vg.v.assign((n_steps + 1) * ns * nx, 0.0);
  vg.astar.assign((n_steps + 1) * ns * nx, -1);
  for (std::size_t th = 0; th < ns; ++th)
    for (std::size_t i = 0; i < nx; ++i) {
      const double xval = vg.x_at(i);
      vg.v[(n_steps * ns + th) * nx + i] = cost.g({&xval, 1}, th);
    }

  std::vector<double> ftab;  // [state][action][x] when time-independent
  if (!cost.f_time_dependent) {
    ftab.assign(ns * nu * nx, 0.0);
    for (std::size_t th = 0; th < ns; ++th)
      for (std::size_t u = 0; u < nu; ++u)
        for (std::size_t i = 0; i < nx; ++i) {
          const double xval = vg.x_at(i);
          ftab[(th * nu + u) * nx + i] =
              cost.f(0.0, {&xval, 1}, th, model.actions().point(u));
        }
  }

  const double inv_dx = 1.0 / dx;
  const double inv_dx2 = 1.0 / (dx * dx);
  std::vector<double> frow(nx), rhs(nx), cand(nx), best(nx);
  std::vector<int> arg(nx);
  for (std::size_t k = n_steps; k-- > 0;) {
    const double t = vg.knots[k];
    const double* vnext = vg.v.data() + (k + 1) * ns * nx;
    for (std::size_t th = 0; th < ns; ++th) {
      const double* vth = vnext + th * nx;
      std::fill(best.begin(), best.end(),
                std::numeric_limits<double>::infinity());
      std::fill(arg.begin(), arg.end(), -1);
      for (std::size_t u = 0; u < nu; ++u) {
        if (ftab.empty()) {
          for (std::size_t i = 0; i < nx; ++i) {
            const double xval = vg.x_at(i);
            frow[i] = cost.f(t, {&xval, 1}, th, model.actions().point(u));
          }
        } else {
          std::copy_n(ftab.data() + (th * nu + u) * nx, nx, frow.data());
        }
        const double qtot = model.total_rate(th, u);
        // rhs = f - qtot v_theta + sum_l q(theta,l;u) v_l
        kernels::scale_add(-qtot, vth, frow.data(), rhs.data(), nx);
        const auto row = model.rate_row(th, u);
        for (std::size_t l = 0; l < ns; ++l) {
          if (l == th || row[l] == 0.0) continue;
          kernels::axpy(row[l], vnext + l * nx, rhs.data(), nx);
        }
        kernels::hjb_interior(vth, drift.data() + th * nx,
                              half_sig2.data() + th * nx, rhs.data(), dt, inv_dx,
                              inv_dx2, cand.data(), nx);
        // Second-derivative-zero closure: the ghost value 2v[0] - v[1]
        // cancels the diffusion term and turns the drift difference
        // one-sided regardless of sign.
        cand[0] = vth[0] + dt * (rhs[0] + drift[th * nx] * (vth[1] - vth[0]) * inv_dx);
        cand[nx - 1] =
            vth[nx - 1] + dt * (rhs[nx - 1] + drift[th * nx + nx - 1] *
                                                  (vth[nx - 1] - vth[nx - 2]) * inv_dx);
        kernels::min_update(best.data(), arg.data(), cand.data(),
                            static_cast<int>(u), nx);
      }
      std::copy(best.begin(), best.end(), vg.v.begin() + (k * ns + th) * nx);
      std::copy(arg.begin(), arg.end(), vg.astar.begin() + (k * ns + th) * nx);
    }
  }
  return vg;
}

VerifyReport verify_lower_bound(const ValueGridChain& phi, const QPairModel& model,
                                const CostSpec& cost, double tolerance) {
  const std::size_t ns = phi.num_states;
  const std::size_t nu = model.actions().size();
  const std::size_t nt = phi.knots.size() - 1;
  if (ns != model.num_states())
    throw std::invalid_argument("verify_lower_bound: state count mismatch");
  const double dt = phi.dt();

  VerifyReport rep;
  rep.tolerance = tolerance;
  rep.terminal_ok = true;
  for (std::size_t th = 0; th < ns; ++th) {
    if (std::abs(phi.at(nt, th) - cost.g({}, th)) > 1e-12) {
      rep.terminal_ok = false;
      rep.arg_knot = nt;
      rep.arg_state = th;
      break;
    }
  }

  rep.min_residual = std::numeric_limits<double>::infinity();
  for (std::size_t k = 0; k < nt; ++k) {
    const double t = phi.knots[k];
    const double* row_now = phi.v.data() + k * ns;
    const double* row_next = phi.v.data() + (k + 1) * ns;
    for (std::size_t th = 0; th < ns; ++th) {
      const double dphi = (row_next[th] - row_now[th]) / dt;
      for (std::size_t u = 0; u < nu; ++u) {
        const auto row = model.rate_row(th, u);
        const double jump = kernels::dot(row.data(), row_now, ns) -
                            model.total_rate(th, u) * row_now[th];
        const double resid =
            dphi + cost.f(t, {}, th, model.actions().point(u)) + jump;
        if (resid < rep.min_residual) {
          rep.min_residual = resid;
          rep.arg_knot = k;
          rep.arg_state = th;
          rep.arg_action = u;
        }
      }
    }
  }

  const ValueGridChain vdp = dp_chain(model, cost, phi.knots.back(), nt);
  rep.max_phi_minus_vdp = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < vdp.v.size(); ++i)
    rep.max_phi_minus_vdp = std::max(rep.max_phi_minus_vdp, phi.v[i] - vdp.v[i]);

  rep.pass = rep.terminal_ok && rep.min_residual >= -tolerance;
  return rep;
}

RelaxedMarkovPolicy policy_from_chain_grid(const ValueGridChain& grid,
                                           const ActionGrid& actions,
                                           const PsiModulus& psi) {
  (void)actions;
  const std::size_t ns = grid.num_states;
  const std::size_t nk = grid.knots.size();
  std::vector<std::vector<MeasureOnU>> curves(ns);
  for (std::size_t th = 0; th < ns; ++th) {
    curves[th].reserve(nk);
    for (std::size_t k = 0; k + 1 < nk; ++k) {
      const int a = grid.action_at(k, th);
      if (a < 0) throw std::invalid_argument("policy_from_chain_grid: missing a*");
      curves[th].push_back(MeasureOnU::dirac(static_cast<std::size_t>(a)));
    }
    curves[th].push_back(curves[th].back());  // value at T repeats the last segment
  }
  return RelaxedMarkovPolicy(grid.knots, std::move(curves),
                             PolicyInterp::PiecewiseConstant, psi);
}

namespace {

// Minimal ramp width so that D r / w <= psi(r) for all r in (0, w].
double ramp_width(double jump, const PsiModulus& psi, double max_width) {
  if (jump <= 0.0) return 0.0;
  switch (psi.form()) {
    case PsiModulus::Form::Linear: {
      if (psi.linear_slope() <= 0.0) return std::numeric_limits<double>::infinity();
      return jump / psi.linear_slope();
    }
    case PsiModulus::Form::Power: {
      const double beta = psi.power_exponent();
      const double c = psi.power_coeff();
      if (beta > 1.0 || c <= 0.0) return std::numeric_limits<double>::infinity();
      if (beta == 1.0) return jump / c;
      return std::pow(jump / c, 1.0 / beta);
    }
    case PsiModulus::Form::Table: {
      // psi is piecewise linear through (0,0); iterate the fixed point
      // w = max over breakpoints r <= w of D r / psi(r).
      const auto& rs = psi.table_r();
      if (psi(rs.front()) <= 0.0) return std::numeric_limits<double>::infinity();
      double w = jump * rs.front() / psi(rs.front());
      for (int sweep = 0; sweep < 64; ++sweep) {
        double next = w;
        for (double r : rs) {
          if (r > std::min(w, max_width)) break;
          const double p = psi(r);
          if (p <= 0.0) return std::numeric_limits<double>::infinity();
          next = std::max(next, jump * r / p);
        }
        if (next <= w) break;
        w = next;
      }
      return w;
    }
  }
  return std::numeric_limits<double>::infinity();
}

}  // namespace

SmoothedPolicyResult psi_feasible_interpolation(const QPairModel& model,
                                                const CostSpec& cost,
                                                const RelaxedMarkovPolicy& step_policy,
                                                const PsiModulus& psi, double tol,
                                                std::size_t modulus_points) {
  if (step_policy.interp() != PolicyInterp::PiecewiseConstant)
    throw std::invalid_argument(
        "psi_feasible_interpolation: step policy must be piecewise constant");
  const std::size_t ns = step_policy.num_states();
  const auto& knots = step_policy.knots();
  const ActionGrid& actions = model.actions();

  // Jump sizes and ramp widths per switching knot.
  std::vector<double> jumps(knots.size(), 0.0);
  std::vector<double> widths(knots.size(), 0.0);
  double min_feasible_slope = 0.0;
  double effective_slope = 0.0;
  bool feasible = true;
  for (std::size_t k = 1; k + 1 < knots.size(); ++k) {
    double jump = 0.0;
    for (std::size_t th = 0; th < ns; ++th)
      if (!step_policy.knot_measure(th, k).same_as(step_policy.knot_measure(th, k - 1)))
        jump = std::max(jump, w1_distance(step_policy.knot_measure(th, k - 1),
                                          step_policy.knot_measure(th, k), actions));
    jumps[k] = jump;
    if (jump == 0.0) continue;
    const double spacing = knots[k] - knots[k - 1];
    min_feasible_slope = std::max(min_feasible_slope, jump / spacing);
    const double w = ramp_width(jump, psi, spacing);
    if (!(w <= spacing)) {
      feasible = false;
      continue;
    }
    widths[k] = w;
    effective_slope = std::max(effective_slope, jump / w);
  }
  if (!feasible) {
    std::ostringstream msg;
    msg << "psi_feasible_interpolation: psi too strict for the knot spacing; "
        << "the smallest feasible linear modulus is psi(r) = " << min_feasible_slope
        << " * r";
    throw FeasibilityError(msg.str(), min_feasible_slope);
  }

  std::vector<double> new_knots;
  std::vector<std::vector<MeasureOnU>> curves(ns);
  auto push_knot = [&](double t, std::size_t source_knot) {
    if (!new_knots.empty() && t - new_knots.back() < 1e-15) return;
    new_knots.push_back(t);
    for (std::size_t th = 0; th < ns; ++th)
      curves[th].push_back(step_policy.knot_measure(th, source_knot));
  };
  push_knot(knots[0], 0);
  for (std::size_t k = 1; k < knots.size(); ++k) {
    if (widths[k] > 0.0) push_knot(knots[k] - widths[k], k - 1);  // ramp start
    push_knot(knots[k], k);
  }

  SmoothedPolicyResult result{
      RelaxedMarkovPolicy(std::move(new_knots), std::move(curves),
                          PolicyInterp::MixtureLinear, psi),
      {}, {}, 0.0, effective_slope};

  const auto eval_grid = modulus_eval_grid(result.policy, modulus_points);
  result.modulus = modulus_report(result.policy, actions, eval_grid);
  if (!result.modulus.pass_w) {
    double required = min_feasible_slope;
    if (result.modulus.worst_w) {
      const auto& v = *result.modulus.worst_w;
      if (v.t2 > v.t1) required = std::max(required, v.value / (v.t2 - v.t1));
    }
    std::ostringstream msg;
    msg << "psi_feasible_interpolation: smoothed policy still fails psi; "
        << "a linear modulus needs slope >= " << required;
    throw FeasibilityError(msg.str(), required);
  }

  const std::vector<double> v_step =
      cost_exact_chain_all(model, cost, step_policy, 0.0, tol);
  const std::vector<double> v_smooth =
      cost_exact_chain_all(model, cost, result.policy, 0.0, tol);
  result.cost_delta.resize(ns);
  for (std::size_t th = 0; th < ns; ++th) {
    result.cost_delta[th] = v_smooth[th] - v_step[th];
    result.cost_delta_max =
        std::max(result.cost_delta_max, std::abs(result.cost_delta[th]));
  }
  return result;
}

DiracReductionReport dirac_reduction_check(const QPairModel& model,
                                           const CostSpec& cost, double t,
                                           std::size_t theta,
                                           std::span<const double> v,
                                           std::size_t trials, std::uint64_t seed) {
  const std::size_t ns = model.num_states();
  const std::size_t nu = model.actions().size();
  if (v.size() != ns) throw std::invalid_argument("dirac_reduction_check: bad v");

  auto objective = [&](const MeasureOnU& mu) {
    const RateRow row = mixed_rate(model, theta, mu);
    double acc = mixed_running_cost(cost, model.actions(), t, {}, theta, mu);
    for (std::size_t l = 0; l < ns; ++l) acc += row.to[l] * v[l];
    acc -= row.total * v[theta];
    return acc;
  };

  DiracReductionReport rep;
  rep.trials = trials;
  rep.min_dirac = std::numeric_limits<double>::infinity();
  for (std::size_t u = 0; u < nu; ++u)
    rep.min_dirac = std::min(rep.min_dirac, objective(MeasureOnU::dirac(u)));

  rng::Stream stream(seed);
  rep.min_sampled = std::numeric_limits<double>::infinity();
  std::vector<std::size_t> pool(nu);
  for (std::size_t trial = 0; trial < trials; ++trial) {
    for (std::size_t i = 0; i < nu; ++i) pool[i] = i;
    const std::size_t m = 1 + stream.index(nu);
    for (std::size_t i = 0; i < m; ++i)
      std::swap(pool[i], pool[i + stream.index(nu - i)]);
    std::vector<std::size_t> support(pool.begin(), pool.begin() + m);
    std::vector<double> weights(m);
    double total = 0.0;
    for (double& w : weights) {
      w = stream.uniform01();
      total += w;
    }
    for (double& w : weights) w /= total;
    rep.min_sampled =
        std::min(rep.min_sampled, objective(MeasureOnU(support, weights)));
  }
  rep.pass = rep.min_sampled >= rep.min_dirac - 1e-12;
  return rep;
}

}  // namespace ctmdp
