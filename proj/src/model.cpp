#include "ctmdp/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "ctmdp/kernels.hpp"
#include "ctmdp/rng.hpp"

namespace ctmdp {

// ---------------------------------------------------------------- ActionGrid

ActionGrid::ActionGrid(std::vector<std::vector<double>> points,
                       std::vector<double> box_lo, std::vector<double> box_hi)
    : box_lo_(std::move(box_lo)), box_hi_(std::move(box_hi)) {
  if (points.empty()) throw std::invalid_argument("ActionGrid: empty grid");
  dim_ = box_lo_.size();
  if (dim_ == 0 || box_hi_.size() != dim_)
    throw std::invalid_argument("ActionGrid: bad bounding box");
  for (std::size_t d = 0; d < dim_; ++d)
    if (!(box_lo_[d] <= box_hi_[d]))
      throw std::invalid_argument("ActionGrid: box_lo exceeds box_hi");
  count_ = points.size();
  flat_.reserve(count_ * dim_);
  for (const auto& p : points) {
    if (p.size() != dim_)
      throw std::invalid_argument("ActionGrid: point dimension mismatch");
    for (std::size_t d = 0; d < dim_; ++d) {
      if (p[d] < box_lo_[d] || p[d] > box_hi_[d])
        throw std::invalid_argument("ActionGrid: point outside bounding box");
      flat_.push_back(p[d]);
    }
  }
  for (std::size_t i = 0; i < count_; ++i)
    for (std::size_t j = i + 1; j < count_; ++j)
      if (std::equal(flat_.begin() + i * dim_, flat_.begin() + (i + 1) * dim_,
                     flat_.begin() + j * dim_))
        throw std::invalid_argument("ActionGrid: duplicate point");
}

double ActionGrid::distance(std::size_t i, std::size_t j) const {
  double acc = 0.0;
  for (std::size_t d = 0; d < dim_; ++d) {
    const double diff = flat_[i * dim_ + d] - flat_[j * dim_ + d];
    acc += diff * diff;
  }
  return std::sqrt(acc);
}

// ---------------------------------------------------------------- MeasureOnU

MeasureOnU::MeasureOnU(std::vector<std::size_t> support,
                       std::vector<double> weights) {
  if (support.size() != weights.size() || support.empty())
    throw std::invalid_argument("MeasureOnU: support/weight size mismatch");
  std::vector<std::size_t> order(support.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return support[a] < support[b]; });
  double total = 0.0;
  for (std::size_t k : order) {
    const double w = weights[k];
    if (w < 0.0 || !std::isfinite(w))
      throw std::invalid_argument("MeasureOnU: negative weight");
    if (!support_.empty() && support_.back() == support[k])
      throw std::invalid_argument("MeasureOnU: duplicate support index");
    total += w;
    if (w == 0.0) continue;
    support_.push_back(support[k]);
    weights_.push_back(w);
  }
  if (support_.empty() || std::abs(total - 1.0) > 1e-12)
    throw std::invalid_argument("MeasureOnU: weights do not sum to 1");
}

MeasureOnU MeasureOnU::dirac(std::size_t index) { return MeasureOnU({index}, {1.0}); }

MeasureOnU MeasureOnU::mix(const MeasureOnU& a, double wa, const MeasureOnU& b,
                           double wb) {
  std::vector<std::size_t> support;
  std::vector<double> weights;
  std::size_t i = 0, j = 0;
  while (i < a.size() || j < b.size()) {
    if (j >= b.size() || (i < a.size() && a.index(i) < b.index(j))) {
      support.push_back(a.index(i));
      weights.push_back(wa * a.weight(i));
      ++i;
    } else if (i >= a.size() || b.index(j) < a.index(i)) {
      support.push_back(b.index(j));
      weights.push_back(wb * b.weight(j));
      ++j;
    } else {
      support.push_back(a.index(i));
      weights.push_back(wa * a.weight(i) + wb * b.weight(j));
      ++i;
      ++j;
    }
  }
  return MeasureOnU(std::move(support), std::move(weights));
}

bool MeasureOnU::same_as(const MeasureOnU& other) const {
  return support_ == other.support_ && weights_ == other.weights_;
}

// ---------------------------------------------------------------- QPairModel

QPairModel::QPairModel(std::vector<std::string> states, ActionGrid grid,
                       const RateFn& offdiag_rate, double declared_m)
    : states_(std::move(states)), grid_(std::move(grid)), declared_m_(declared_m) {
  if (states_.empty()) throw std::invalid_argument("QPairModel: no states");
  const std::size_t ns = states_.size();
  const std::size_t nu = grid_.size();
  rows_.assign(ns * nu * ns, 0.0);
  for (std::size_t th = 0; th < ns; ++th)
    for (std::size_t u = 0; u < nu; ++u)
      for (std::size_t ga = 0; ga < ns; ++ga) {
        if (ga == th) continue;
        const double r = offdiag_rate(th, ga, grid_.point(u));
        if (r < 0.0 || !std::isfinite(r))
          throw std::invalid_argument("QPairModel: invalid rate");
        rows_[(th * nu + u) * ns + ga] = r;
      }
  build_totals();
}

QPairModel::QPairModel(std::vector<std::string> states, ActionGrid grid,
                       const std::vector<double>& table, double declared_m)
    : states_(std::move(states)), grid_(std::move(grid)), declared_m_(declared_m) {
  if (states_.empty()) throw std::invalid_argument("QPairModel: no states");
  const std::size_t ns = states_.size();
  const std::size_t nu = grid_.size();
  if (table.size() != ns * ns * nu)
    throw std::invalid_argument("QPairModel: rate table size mismatch");
  rows_.assign(ns * nu * ns, 0.0);
  for (std::size_t th = 0; th < ns; ++th)
    for (std::size_t ga = 0; ga < ns; ++ga)
      for (std::size_t u = 0; u < nu; ++u) {
        if (ga == th) continue;  // diagonal forced to zero
        const double r = table[(th * ns + ga) * nu + u];
        if (r < 0.0 || !std::isfinite(r))
          throw std::invalid_argument("QPairModel: invalid rate in table");
        rows_[(th * nu + u) * ns + ga] = r;
      }
  build_totals();
}

void QPairModel::build_totals() {
  const std::size_t ns = states_.size();
  const std::size_t nu = grid_.size();
  totals_.assign(ns * nu, 0.0);
  measured_m_ = 0.0;
  for (std::size_t th = 0; th < ns; ++th)
    for (std::size_t u = 0; u < nu; ++u) {
      double total = 0.0;  // in-order sum defines the total rate
      const double* row = rows_.data() + (th * nu + u) * ns;
      for (std::size_t ga = 0; ga < ns; ++ga) total += row[ga];
      totals_[th * nu + u] = total;
      measured_m_ = std::max(measured_m_, total);
    }
}

std::size_t QPairModel::state_index(const std::string& label) const {
  const auto it = std::find(states_.begin(), states_.end(), label);
  if (it == states_.end())
    throw std::invalid_argument("QPairModel: unknown state label '" + label + "'");
  return static_cast<std::size_t>(it - states_.begin());
}

RateRow mixed_rate(const QPairModel& model, std::size_t theta,
                   const MeasureOnU& mu) {
  const std::size_t ns = model.num_states();
  if (theta >= ns) throw std::invalid_argument("mixed_rate: bad state");
  if (mu.max_index() >= model.actions().size())
    throw std::invalid_argument("mixed_rate: measure does not fit action grid");
  RateRow out;
  out.to.assign(ns, 0.0);
  for (std::size_t i = 0; i < mu.size(); ++i) {
    const auto row = model.rate_row(theta, mu.index(i));
    kernels::axpy(mu.weight(i), row.data(), out.to.data(), ns);
  }
  out.to[theta] = 0.0;
  double total = 0.0;  // in-order sum of the mixed components
  for (double v : out.to) total += v;
  out.total = total;
  return out;
}

// -------------------------------------------------------------- LyapunovSpec

LyapunovSpec::LyapunovSpec(std::vector<double> phi, double lambda, double kappa0,
                           std::vector<std::size_t> b0,
                           std::vector<std::size_t> core)
    : phi_(std::move(phi)), lambda_(lambda), kappa0_(kappa0), b0_(std::move(b0)),
      core_(std::move(core)) {
  if (phi_.empty()) throw std::invalid_argument("LyapunovSpec: empty phi");
  for (double v : phi_)
    if (!(v >= 1.0)) throw std::invalid_argument("LyapunovSpec: phi < 1");
  if (!(lambda_ > 0.0)) throw std::invalid_argument("LyapunovSpec: lambda <= 0");
  if (kappa0_ < 0.0) throw std::invalid_argument("LyapunovSpec: kappa0 < 0");
  for (std::size_t s : b0_)
    if (s >= phi_.size()) throw std::invalid_argument("LyapunovSpec: B0 not in states");
  for (std::size_t s : core_)
    if (s >= phi_.size()) throw std::invalid_argument("LyapunovSpec: core not in states");
}

bool LyapunovSpec::in_b0(std::size_t state) const {
  return std::find(b0_.begin(), b0_.end(), state) != b0_.end();
}

// ---------------------------------------------------------------- PsiModulus

PsiModulus PsiModulus::linear(double slope) {
  if (slope < 0.0) throw std::invalid_argument("PsiModulus: negative slope");
  PsiModulus p;
  p.form_ = Form::Linear;
  p.a_ = slope;
  return p;
}

PsiModulus PsiModulus::power(double coeff, double exponent) {
  if (coeff < 0.0 || exponent <= 0.0)
    throw std::invalid_argument("PsiModulus: bad power parameters");
  PsiModulus p;
  p.form_ = Form::Power;
  p.a_ = coeff;
  p.b_ = exponent;
  return p;
}

PsiModulus PsiModulus::tabulated(std::vector<double> r, std::vector<double> v) {
  if (r.size() != v.size() || r.empty())
    throw std::invalid_argument("PsiModulus: table size mismatch");
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (r[i] <= 0.0 || v[i] < 0.0)
      throw std::invalid_argument("PsiModulus: table values out of range");
    if (i > 0 && (r[i] <= r[i - 1] || v[i] < v[i - 1]))
      throw std::invalid_argument("PsiModulus: table not nondecreasing");
  }
  PsiModulus p;
  p.form_ = Form::Table;
  p.table_r_ = std::move(r);
  p.table_v_ = std::move(v);
  return p;
}

double PsiModulus::operator()(double r) const {
  if (r <= 0.0) return 0.0;
  switch (form_) {
    case Form::Linear:
      return a_ * r;
    case Form::Power:
      return a_ * std::pow(r, b_);
    case Form::Table: {
      // Piecewise linear through (0,0) and the table points; flat after.
      if (r >= table_r_.back()) return table_v_.back();
      double r0 = 0.0, v0 = 0.0;
      for (std::size_t i = 0; i < table_r_.size(); ++i) {
        if (r <= table_r_[i]) {
          const double span = table_r_[i] - r0;
          return span > 0.0 ? v0 + (table_v_[i] - v0) * (r - r0) / span
                            : table_v_[i];
        }
        r0 = table_r_[i];
        v0 = table_v_[i];
      }
      return table_v_.back();
    }
  }
  return 0.0;
}

// ------------------------------------------------------- RelaxedMarkovPolicy

RelaxedMarkovPolicy::RelaxedMarkovPolicy(std::vector<double> knots,
                                         std::vector<std::vector<MeasureOnU>> curves,
                                         PolicyInterp interp, PsiModulus psi)
    : knots_(std::move(knots)), curves_(std::move(curves)), interp_(interp),
      psi_(std::move(psi)) {
  if (knots_.size() < 2 || knots_.front() != 0.0)
    throw std::invalid_argument("RelaxedMarkovPolicy: knots must start at 0");
  for (std::size_t k = 1; k < knots_.size(); ++k)
    if (!(knots_[k] > knots_[k - 1]))
      throw std::invalid_argument("RelaxedMarkovPolicy: knots not increasing");
  if (curves_.empty())
    throw std::invalid_argument("RelaxedMarkovPolicy: no per-state curves");
  for (const auto& curve : curves_)
    if (curve.size() != knots_.size())
      throw std::invalid_argument("RelaxedMarkovPolicy: curve length != knots");
}

MeasureOnU RelaxedMarkovPolicy::measure_at(std::size_t state, double t) const {
  if (state >= curves_.size())
    throw std::invalid_argument("RelaxedMarkovPolicy: bad state");
  if (t < 0.0 || t > knots_.back() + 1e-12)
    throw std::domain_error("RelaxedMarkovPolicy: time outside [0, T]");
  t = std::min(t, knots_.back());
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), t);
  std::size_t seg = static_cast<std::size_t>(it - knots_.begin());
  seg = (seg == 0) ? 0 : seg - 1;
  if (seg + 1 >= knots_.size()) return curves_[state].back();
  if (interp_ == PolicyInterp::PiecewiseConstant) return curves_[state][seg];
  const double span = knots_[seg + 1] - knots_[seg];
  const double lam = (t - knots_[seg]) / span;
  if (lam <= 0.0) return curves_[state][seg];
  if (lam >= 1.0) return curves_[state][seg + 1];
  return MeasureOnU::mix(curves_[state][seg], 1.0 - lam, curves_[state][seg + 1], lam);
}

MeasureOnU RelaxedMarkovPolicy::measure_at_left(std::size_t state, double t) const {
  if (state >= curves_.size())
    throw std::invalid_argument("RelaxedMarkovPolicy: bad state");
  if (t <= 0.0) return measure_at(state, 0.0);
  if (t > knots_.back() + 1e-12)
    throw std::domain_error("RelaxedMarkovPolicy: time outside (0, T]");
  t = std::min(t, knots_.back());
  // Segment with knots[seg] < t <= knots[seg+1].
  const auto it = std::lower_bound(knots_.begin(), knots_.end(), t);
  std::size_t hi = static_cast<std::size_t>(it - knots_.begin());
  if (hi == 0) hi = 1;
  const std::size_t seg = hi - 1;
  if (interp_ == PolicyInterp::PiecewiseConstant) return curves_[state][seg];
  const double span = knots_[seg + 1] - knots_[seg];
  const double lam = (t - knots_[seg]) / span;
  if (lam >= 1.0) return curves_[state][seg + 1];
  if (lam <= 0.0) return curves_[state][seg];
  return MeasureOnU::mix(curves_[state][seg], 1.0 - lam, curves_[state][seg + 1], lam);
}

bool RelaxedMarkovPolicy::is_time_constant() const {
  for (const auto& curve : curves_)
    for (std::size_t k = 1; k < curve.size(); ++k)
      if (!curve[k].same_as(curve[0])) return false;
  return true;
}

RelaxedMarkovPolicy lift_stationary(const RandomizedStationaryPolicy& pi,
                                    double horizon) {
  if (!(horizon > 0.0)) throw std::invalid_argument("lift_stationary: bad horizon");
  if (pi.per_state.empty())
    throw std::invalid_argument("lift_stationary: policy defined on no states");
  std::vector<std::vector<MeasureOnU>> curves;
  curves.reserve(pi.per_state.size());
  for (const auto& m : pi.per_state) curves.push_back({m, m});
  return RelaxedMarkovPolicy({0.0, horizon}, std::move(curves),
                             PolicyInterp::PiecewiseConstant, PsiModulus::linear(0.0));
}

double mixed_running_cost(const CostSpec& cost, const ActionGrid& grid, double t,
                          std::span<const double> x, std::size_t theta,
                          const MeasureOnU& mu) {
  double acc = 0.0;
  for (std::size_t i = 0; i < mu.size(); ++i)
    acc += mu.weight(i) * cost.f(t, x, theta, grid.point(mu.index(i)));
  return acc;
}

// --------------------------------------------------------------- hypotheses

bool h2_holds(const QPairModel& model) {
  return model.measured_m() <= model.declared_m();
}

HypothesisReport validate_hypotheses(const QPairModel& model,
                                     const DiffusionEnv* env,
                                     const LyapunovSpec& lyap,
                                     const HypothesisSampling& sampling) {
  const std::size_t ns = model.num_states();
  const std::size_t nu = model.actions().size();
  if (lyap.phi().size() != ns)
    throw std::invalid_argument("validate_hypotheses: phi size mismatch");

  HypothesisReport rep;
  rep.h1 = model.actions().size() > 0;  // grid construction enforces the box
  rep.declared_m = model.declared_m();
  rep.measured_m = model.measured_m();
  rep.h2 = rep.measured_m <= rep.declared_m;
  if (!rep.h2) {
    GridViolation v;
    double worst = -1.0;
    for (std::size_t th = 0; th < ns; ++th)
      for (std::size_t u = 0; u < nu; ++u) {
        const double tot = model.total_rate(th, u);
        if (tot > rep.declared_m && tot > worst) {
          worst = tot;
          v = {th, u, tot, rep.declared_m};
        }
      }
    rep.h2_worst = v;
  }

  const auto& phi = lyap.phi();
  rep.h4_max_slack = -std::numeric_limits<double>::infinity();
  rep.h4_min_lambda = -std::numeric_limits<double>::infinity();
  for (std::size_t th = 0; th < ns; ++th) {
    const double indicator = lyap.in_b0(th) ? lyap.kappa0() : 0.0;
    for (std::size_t u = 0; u < nu; ++u) {
      const auto row = model.rate_row(th, u);
      const double qphi = kernels::dot(row.data(), phi.data(), ns) -
                          model.total_rate(th, u) * phi[th];
      const double slack = qphi - lyap.lambda() * phi[th] - indicator;
      if (slack > rep.h4_max_slack) {
        rep.h4_max_slack = slack;
        rep.h4_worst = GridViolation{th, u, qphi, lyap.lambda() * phi[th] + indicator};
      }
      rep.h4_min_lambda =
          std::max(rep.h4_min_lambda, (qphi - indicator) / phi[th]);
    }
  }
  rep.h4 = rep.h4_max_slack <= 1e-9;

  if (!lyap.core().empty()) {
    for (std::size_t th : lyap.core()) {
      for (std::size_t u = 0; u < nu; ++u) {
        double mass = 0.0;
        const auto row = model.rate_row(th, u);
        for (std::size_t ga = 0; ga < ns; ++ga) {
          if (std::find(lyap.core().begin(), lyap.core().end(), ga) !=
              lyap.core().end())
            continue;
          mass += row[ga] * phi[ga];
        }
        rep.phi_mass_outside_core = std::max(rep.phi_mass_outside_core, mass);
      }
    }
  }

  if (env != nullptr) {
    rep.has_env = true;
    const std::size_t d = env->dim;
    const std::size_t npts = std::max<std::size_t>(2, sampling.env_points);
    std::vector<std::vector<double>> pts(npts, std::vector<double>(d, 0.0));
    if (d == 1) {
      for (std::size_t i = 0; i < npts; ++i)
        pts[i][0] = -sampling.env_radius +
                    2.0 * sampling.env_radius * static_cast<double>(i) /
                        static_cast<double>(npts - 1);
    } else {
      rng::Stream stream(0x5EEDu);  // fixed: the report must be deterministic
      for (auto& p : pts)
        for (auto& c : p) c = stream.uniform(-sampling.env_radius, sampling.env_radius);
    }
    std::vector<double> bx(d), by(d), sx(d * d), sy(d * d);
    auto norm2 = [](std::span<const double> v) {
      double acc = 0.0;
      for (double c : v) acc += c * c;
      return acc;
    };
    for (std::size_t th = 0; th < ns; ++th) {
      for (std::size_t i = 0; i < npts; ++i) {
        env->drift(pts[i], th, bx);
        env->sigma(pts[i], th, sx);
        const double growth = norm2(bx) + norm2(sx);
        const double gbound = env->growth_c2 * (1.0 + norm2(pts[i]));
        rep.h6_max_ratio = std::max(rep.h6_max_ratio, growth / gbound);
        for (std::size_t j = i + 1; j < npts; ++j) {
          env->drift(pts[j], th, by);
          env->sigma(pts[j], th, sy);
          double num = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double diff = bx[c] - by[c];
            num += diff * diff;
          }
          for (std::size_t c = 0; c < d * d; ++c) {
            const double diff = sx[c] - sy[c];
            num += diff * diff;
          }
          double den = 0.0;
          for (std::size_t c = 0; c < d; ++c) {
            const double diff = pts[i][c] - pts[j][c];
            den += diff * diff;
          }
          if (den > 0.0)
            rep.h5_max_ratio = std::max(rep.h5_max_ratio, num / (env->lip_c1 * den));
        }
      }
    }
    rep.h5 = rep.h5_max_ratio <= 1.0 + 1e-9;
    rep.h6 = rep.h6_max_ratio <= 1.0 + 1e-9;
  }
  return rep;
}

std::string HypothesisReport::to_table() const {
  std::ostringstream os;
  auto line = [&](const char* name, bool pass, const std::string& detail) {
    os << name << "  " << (pass ? "pass" : "FAIL") << "  " << detail << "\n";
  };
  line("H1", h1, "compact action set (grid within declared box)");
  {
    std::ostringstream d;
    d << "measured M = " << measured_m << ", declared M = " << declared_m;
    if (h2_worst)
      d << "; worst at state " << h2_worst->state << ", action " << h2_worst->action
        << " (total " << h2_worst->value << ")";
    line("H2", h2, d.str());
  }
  line("H3", true, "vacuous on finite discretization");
  {
    std::ostringstream d;
    d << "max slack = " << h4_max_slack << ", minimal lambda = " << h4_min_lambda;
    if (phi_mass_outside_core > 0.0)
      d << ", phi mass outside core = " << phi_mass_outside_core;
    line("H4", h4, d.str());
  }
  if (has_env) {
    std::ostringstream d5, d6;
    d5 << "sampled ratio = " << h5_max_ratio;
    d6 << "sampled ratio = " << h6_max_ratio;
    line("H5", h5, d5.str());
    line("H6", h6, d6.str());
  } else {
    line("H5", true, "no environment declared");
    line("H6", true, "no environment declared");
  }
  return os.str();
}

}  // namespace ctmdp
