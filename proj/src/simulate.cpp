#include "ctmdp/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "ctmdp/kernels.hpp"
#include "ctmdp/rng.hpp"

namespace ctmdp {

std::size_t ChainPath::state_at(double t) const {
  const auto it = std::upper_bound(jump_times.begin(), jump_times.end(), t);
  return visited[static_cast<std::size_t>(it - jump_times.begin())];
}

bool ChainPath::has_jump_in(double t1, double t2) const {
  const auto it = std::lower_bound(jump_times.begin(), jump_times.end(), t1);
  return it != jump_times.end() && *it <= t2;
}

std::span<const double> CoupledPath::x_at_time(double t) const {
  const auto it = std::lower_bound(times.begin(), times.end(), t - 1e-12);
  const std::size_t i = static_cast<std::size_t>(it - times.begin());
  if (i >= times.size() || std::abs(times[i] - t) > 1e-12)
    throw std::invalid_argument("CoupledPath: t is not a mesh time");
  return x_at_index(i);
}

ChainPath sample_chain(const QPairModel& model, const RelaxedMarkovPolicy& policy,
                       double s, std::size_t theta, double horizon,
                       std::uint64_t seed) {
  if (!h2_holds(model))
    throw std::runtime_error(
        "sample_chain: H2 fails (measured total rate exceeds declared M); "
        "dominating rate undefined");
  if (theta >= model.num_states())
    throw std::invalid_argument("sample_chain: bad initial state");
  if (s < 0.0 || horizon > policy.horizon() + 1e-12 || s > horizon)
    throw std::domain_error("sample_chain: bad time window");

  ChainPath path;
  path.s = s;
  path.horizon = horizon;
  path.initial_state = theta;
  path.visited.push_back(theta);
  path.seed = seed;

  const double m_const = model.declared_m();
  rng::Stream stream(seed);
  double tau = s;
  std::size_t current = theta;
  while (true) {
    tau += stream.exponential(m_const);
    if (!(tau <= horizon)) break;
    const RateRow row = mixed_rate(model, current, policy.measure_at(current, tau));
    const double draw = stream.uniform01() * m_const;
    double cum = 0.0;
    for (std::size_t gamma = 0; gamma < row.to.size(); ++gamma) {
      if (gamma == current) continue;
      cum += row.to[gamma];
      if (draw <= cum) {
        path.jump_times.push_back(tau);
        path.visited.push_back(gamma);
        current = gamma;
        break;
      }
    }
  }
  return path;
}

namespace {

std::vector<double> coupled_mesh(double s, double horizon, double dt,
                                 const std::vector<double>& jumps,
                                 std::span<const double> extra) {
  if (!(dt > 0.0)) throw std::domain_error("sample_coupled: dt must be > 0");
  const double span = horizon - s;
  const auto steps =
      std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(span / dt)));
  std::vector<double> mesh;
  mesh.reserve(steps + 1 + jumps.size() + extra.size());
  for (std::size_t i = 0; i <= steps; ++i)
    mesh.push_back(s + span * static_cast<double>(i) / static_cast<double>(steps));
  mesh.insert(mesh.end(), jumps.begin(), jumps.end());
  for (double t : extra)
    if (t > s && t < horizon) mesh.push_back(t);
  std::sort(mesh.begin(), mesh.end());
  mesh.erase(std::unique(mesh.begin(), mesh.end(),
                         [](double a, double b) { return b - a < 1e-15; }),
             mesh.end());
  mesh.front() = s;
  mesh.back() = horizon;
  return mesh;
}

}  // namespace

CoupledPath sample_coupled_seeds(const QPairModel& model, const DiffusionEnv& env,
                                 const RelaxedMarkovPolicy& policy, double s,
                                 std::span<const double> x0, std::size_t theta,
                                 double horizon, double dt, std::uint64_t chain_seed,
                                 std::uint64_t diffusion_seed,
                                 std::span<const double> extra_mesh) {
  if (x0.size() != env.dim)
    throw std::invalid_argument("sample_coupled: x0 dimension mismatch");
  CoupledPath path;
  path.chain = sample_chain(model, policy, s, theta, horizon, chain_seed);
  path.dim = env.dim;
  path.seed = diffusion_seed;
  path.times = coupled_mesh(s, horizon, dt, path.chain.jump_times, extra_mesh);

  const std::size_t d = env.dim;
  const std::size_t nt = path.times.size();
  path.x.assign(nt * d, 0.0);
  std::copy(x0.begin(), x0.end(), path.x.begin());

  rng::Stream stream(diffusion_seed);
  std::vector<double> bvec(d), sig(d * d), z(d);
  for (std::size_t i = 0; i + 1 < nt; ++i) {
    const double delta = path.times[i + 1] - path.times[i];
    const double sqdelta = std::sqrt(delta);
    const std::size_t regime = path.chain.state_at(path.times[i]);
    const std::span<const double> xi{path.x.data() + i * d, d};
    env.drift(xi, regime, bvec);
    env.sigma(xi, regime, sig);
    for (std::size_t c = 0; c < d; ++c) z[c] = stream.normal();
    double* xn = path.x.data() + (i + 1) * d;
    for (std::size_t r = 0; r < d; ++r) {
      double diff = 0.0;
      for (std::size_t c = 0; c < d; ++c) diff += sig[r * d + c] * z[c];
      xn[r] = xi[r] + bvec[r] * delta + diff * sqdelta;
    }
  }
  return path;
}

CoupledPath sample_coupled(const QPairModel& model, const DiffusionEnv& env,
                           const RelaxedMarkovPolicy& policy, double s,
                           std::span<const double> x0, std::size_t theta,
                           double horizon, double dt, std::uint64_t seed,
                           std::span<const double> extra_mesh) {
  std::uint64_t sm = seed;
  const std::uint64_t chain_seed = rng::splitmix64_next(sm);
  const std::uint64_t diffusion_seed = rng::splitmix64_next(sm);
  return sample_coupled_seeds(model, env, policy, s, x0, theta, horizon, dt,
                              chain_seed, diffusion_seed, extra_mesh);
}

namespace {

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;
};

MeanSe mean_se(std::span<const double> values) {
  const std::size_t n = values.size();
  MeanSe out;
  if (n == 0) return out;
  out.mean = kernels::sum(values.data(), n) / static_cast<double>(n);
  if (n > 1) {
    const double ss = kernels::sumsq(values.data(), n);
    double var = (ss - static_cast<double>(n) * out.mean * out.mean) /
                 static_cast<double>(n - 1);
    var = std::max(var, 0.0);
    out.se = std::sqrt(var / static_cast<double>(n));
  }
  return out;
}

}  // namespace

PhiMomentReport phi_moment_check(const std::vector<ChainPath>& paths,
                                 const LyapunovSpec& lyap, std::size_t theta,
                                 double horizon, const std::vector<double>& t_grid) {
  if (paths.empty()) throw std::invalid_argument("phi_moment_check: no paths");
  for (const ChainPath& p : paths)
    if (p.initial_state != theta)
      throw std::invalid_argument("phi_moment_check: paths must share the initial state");
  PhiMomentReport rep;
  const double factor = lyap.phi()[theta] + lyap.kappa0() * horizon;
  std::vector<double> values(paths.size());
  for (double t : t_grid) {
    for (std::size_t p = 0; p < paths.size(); ++p)
      values[p] = lyap.phi()[paths[p].state_at(t)];
    const MeanSe ms = mean_se(values);
    MomentCheckRow row;
    row.t = t;
    row.mean = ms.mean;
    row.se = ms.se;
    row.bound = factor * std::exp(lyap.lambda() * t);
    row.pass = ms.mean - 4.0 * ms.se <= row.bound;
    rep.pass = rep.pass && row.pass;
    rep.rows.push_back(row);
  }
  return rep;
}

IncrementMomentReport increment_moment_check(const std::vector<CoupledPath>& paths,
                                             double t1, double t2, double growth_c2,
                                             double horizon) {
  if (paths.empty()) throw std::invalid_argument("increment_moment_check: no paths");
  if (!(t1 < t2)) throw std::invalid_argument("increment_moment_check: need t1 < t2");
  const std::size_t d = paths[0].dim;

  std::vector<double> quarts(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto a = paths[p].x_at_time(t1);
    const auto b = paths[p].x_at_time(t2);
    double n2 = 0.0;
    for (std::size_t c = 0; c < d; ++c) {
      const double diff = b[c] - a[c];
      n2 += diff * diff;
    }
    quarts[p] = n2 * n2;
  }
  const MeanSe lhs = mean_se(quarts);

  // Integral of (1 + E|X_r|^4) over [t1, t2] on mesh times shared by every
  // path (per-path jump times are not shared and are skipped).
  auto shared_time = [&](double t) {
    for (const CoupledPath& p : paths) {
      const auto it = std::lower_bound(p.times.begin(), p.times.end(), t - 1e-12);
      if (it == p.times.end() || std::abs(*it - t) > 1e-12) return false;
    }
    return true;
  };
  std::vector<double> rs;
  for (double t : paths[0].times)
    if (t >= t1 - 1e-12 && t <= t2 + 1e-12 && shared_time(t)) rs.push_back(t);
  std::vector<double> m4(rs.size(), 0.0);
  for (std::size_t k = 0; k < rs.size(); ++k) {
    double acc = 0.0;
    for (const CoupledPath& p : paths) {
      const auto xv = p.x_at_time(rs[k]);
      double n2 = 0.0;
      for (std::size_t c = 0; c < d; ++c) n2 += xv[c] * xv[c];
      acc += n2 * n2;
    }
    m4[k] = acc / static_cast<double>(paths.size());
  }
  double integral = 0.0;
  for (std::size_t k = 0; k + 1 < rs.size(); ++k)
    integral += 0.5 * (2.0 + m4[k] + m4[k + 1]) * (rs[k + 1] - rs[k]);

  IncrementMomentReport rep;
  rep.t1 = t1;
  rep.t2 = t2;
  rep.lhs = lhs.mean;
  rep.lhs_se = lhs.se;
  const double c_const = 8.0 * (horizon * horizon * horizon + 36.0 * horizon) *
                         std::max(growth_c2 * growth_c2, 1.0);
  rep.rhs = c_const * (t2 - t1) * integral;
  rep.ratio = rep.rhs > 0.0 ? rep.lhs / rep.rhs : (rep.lhs > 0.0 ? 1e300 : 0.0);
  rep.pass = rep.lhs - 4.0 * rep.lhs_se <= rep.rhs;
  return rep;
}

HoldingBoundReport holding_probability_check(const std::vector<ChainPath>& paths,
                                             double t, double u, double m_const) {
  if (paths.empty())
    throw std::invalid_argument("holding_probability_check: no paths");
  std::size_t held = 0;
  for (const ChainPath& p : paths)
    if (!p.has_jump_in(t, t + u)) ++held;
  const double n = static_cast<double>(paths.size());
  HoldingBoundReport rep;
  rep.t = t;
  rep.u = u;
  rep.empirical = static_cast<double>(held) / n;
  rep.se = std::sqrt(std::max(rep.empirical * (1.0 - rep.empirical), 0.0) / n);
  rep.bound = std::exp(-m_const * u);
  rep.pass = rep.empirical >= rep.bound - 4.0 * rep.se;
  return rep;
}

std::size_t worker_count(std::size_t jobs) {
  std::size_t hw = std::thread::hardware_concurrency();
  if (hw == 0) hw = 1;
  if (const char* env = std::getenv("CTMDP_THREADS")) {
    const long cap = std::strtol(env, nullptr, 10);
    if (cap >= 1) hw = std::min<std::size_t>(hw, static_cast<std::size_t>(cap));
  }
  return std::min(hw, std::max<std::size_t>(jobs / 64, 1));
}

}  // namespace ctmdp
