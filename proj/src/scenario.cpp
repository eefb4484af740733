#include "ctmdp/scenario.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include <json.hpp>

namespace ctmdp::scenario {

using nlohmann::json;

namespace {

[[noreturn]] void fail(const std::string& where, const std::string& what) {
  throw ParseError("scenario: " + where + ": " + what);
}

// Unknown fields are rejected so typos never silently change a run.
void check_keys(const json& obj, std::initializer_list<const char*> keys,
                const std::string& where) {
  if (!obj.is_object()) fail(where, "expected an object");
  for (const auto& item : obj.items()) {
    bool known = false;
    for (const char* k : keys)
      if (item.key() == k) {
        known = true;
        break;
      }
    if (!known) fail(where, "unknown field '" + item.key() + "'");
  }
}

const json& need(const json& obj, const char* key, const std::string& where) {
  const auto it = obj.find(key);
  if (it == obj.end()) fail(where, std::string("missing field '") + key + "'");
  return *it;
}

double need_number(const json& obj, const char* key, const std::string& where) {
  const json& v = need(obj, key, where);
  if (!v.is_number()) fail(where, std::string("field '") + key + "' must be a number");
  return v.get<double>();
}

std::vector<double> need_number_array(const json& v, const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of numbers");
  std::vector<double> out;
  out.reserve(v.size());
  for (const auto& e : v) {
    if (!e.is_number()) fail(where, "expected an array of numbers");
    out.push_back(e.get<double>());
  }
  return out;
}

std::vector<std::size_t> index_array(const json& v, std::size_t limit,
                                     const std::string& where) {
  if (!v.is_array()) fail(where, "expected an array of state indices");
  std::vector<std::size_t> out;
  for (const auto& e : v) {
    if (!e.is_number_unsigned()) fail(where, "state indices must be nonnegative");
    const auto idx = e.get<std::size_t>();
    if (idx >= limit) fail(where, "state index out of range");
    out.push_back(idx);
  }
  return out;
}

ActionGrid parse_action_grid(const json& spec) {
  const std::string where = "action_grid";
  check_keys(spec, {"points", "box_lo", "box_hi"}, where);
  const json& pts = need(spec, "points", where);
  if (!pts.is_array() || pts.empty()) fail(where, "'points' must be a non-empty array");
  std::vector<std::vector<double>> points;
  for (const auto& p : pts) points.push_back(need_number_array(p, where + ".points"));
  return ActionGrid(std::move(points),
                    need_number_array(need(spec, "box_lo", where), where),
                    need_number_array(need(spec, "box_hi", where), where));
}

std::unique_ptr<QPairModel> parse_rates(const json& spec,
                                        std::vector<std::string> states,
                                        ActionGrid grid) {
  const std::string where = "rates";
  const std::string kind = need(spec, "kind", where).get<std::string>();
  const std::size_t ns = states.size();
  const std::size_t nu = grid.size();
  const double declared_m = need_number(spec, "declared_m", where);

  if (kind == "table") {
    check_keys(spec, {"kind", "declared_m", "table"}, where);
    const json& table = need(spec, "table", where);
    if (!table.is_array() || table.size() != ns)
      fail(where, "'table' must have one row per state");
    std::vector<double> flat(ns * ns * nu, 0.0);
    for (std::size_t th = 0; th < ns; ++th) {
      if (!table[th].is_array() || table[th].size() != ns)
        fail(where, "'table' rows must list every destination state");
      for (std::size_t ga = 0; ga < ns; ++ga) {
        const auto rates = need_number_array(table[th][ga], where + ".table");
        if (rates.size() != nu) fail(where, "rate entries must cover every action");
        for (std::size_t u = 0; u < nu; ++u) {
          if (th == ga && rates[u] != 0.0)
            fail(where, "diagonal rate entries must be zero");
          flat[(th * ns + ga) * nu + u] = rates[u];
        }
      }
    }
    return std::make_unique<QPairModel>(std::move(states), std::move(grid), flat,
                                        declared_m);
  }

  if (kind == "birth_death") {
    check_keys(spec,
               {"kind", "declared_m", "birth_base", "birth_slope", "death_base",
                "death_slope"},
               where);
    const double birth_base = need_number(spec, "birth_base", where);
    const double birth_slope = need_number(spec, "birth_slope", where);
    const double death_base = need_number(spec, "death_base", where);
    const double death_slope = need_number(spec, "death_slope", where);
    auto rate = [=](std::size_t from, std::size_t to, std::span<const double> u) {
      const double n = static_cast<double>(from);
      if (to == from + 1) return u[0] * (birth_base + birth_slope * n);
      if (from > 0 && to == from - 1) return death_base + death_slope * n;
      return 0.0;
    };
    return std::make_unique<QPairModel>(std::move(states), std::move(grid), rate,
                                        declared_m);
  }

  if (kind == "admission_queue") {
    check_keys(spec, {"kind", "declared_m", "arrival", "service"}, where);
    const double arrival = need_number(spec, "arrival", where);
    const double service = need_number(spec, "service", where);
    auto rate = [=](std::size_t from, std::size_t to, std::span<const double> u) {
      if (to == from + 1) return arrival * u[0];
      if (from > 0 && to == from - 1) return service;
      return 0.0;
    };
    return std::make_unique<QPairModel>(std::move(states), std::move(grid), rate,
                                        declared_m);
  }

  fail(where, "unknown rate family '" + kind + "'");
}

std::unique_ptr<LyapunovSpec> parse_lyapunov(const json& spec, std::size_t ns) {
  const std::string where = "lyapunov";
  check_keys(spec, {"phi", "lambda", "kappa0", "b0", "core"}, where);
  const json& phi_spec = need(spec, "phi", where);
  const std::string kind = need(phi_spec, "kind", where + ".phi").get<std::string>();
  std::vector<double> phi;
  if (kind == "table") {
    check_keys(phi_spec, {"kind", "values"}, where + ".phi");
    phi = need_number_array(need(phi_spec, "values", where + ".phi"), where + ".phi");
    if (phi.size() != ns) fail(where, "phi table must cover every state");
  } else if (kind == "linear") {
    check_keys(phi_spec, {"kind", "offset", "slope"}, where + ".phi");
    const double offset = need_number(phi_spec, "offset", where + ".phi");
    const double slope = need_number(phi_spec, "slope", where + ".phi");
    for (std::size_t i = 0; i < ns; ++i)
      phi.push_back(offset + slope * static_cast<double>(i));
  } else {
    fail(where, "unknown phi kind '" + kind + "'");
  }
  std::vector<std::size_t> b0, core;
  if (spec.contains("b0")) b0 = index_array(spec["b0"], ns, where + ".b0");
  if (spec.contains("core")) core = index_array(spec["core"], ns, where + ".core");
  return std::make_unique<LyapunovSpec>(std::move(phi),
                                        need_number(spec, "lambda", where),
                                        need_number(spec, "kappa0", where),
                                        std::move(b0), std::move(core));
}

PsiModulus parse_psi(const json& spec) {
  const std::string where = "psi";
  const std::string form = need(spec, "form", where).get<std::string>();
  if (form == "linear") {
    check_keys(spec, {"form", "slope"}, where);
    return PsiModulus::linear(need_number(spec, "slope", where));
  }
  if (form == "power") {
    check_keys(spec, {"form", "coeff", "beta"}, where);
    return PsiModulus::power(need_number(spec, "coeff", where),
                             need_number(spec, "beta", where));
  }
  if (form == "table") {
    check_keys(spec, {"form", "r", "v"}, where);
    return PsiModulus::tabulated(need_number_array(need(spec, "r", where), where),
                                 need_number_array(need(spec, "v", where), where));
  }
  fail(where, "unknown psi form '" + form + "'");
}

DiffusionEnv::Field parse_field(const json& spec, std::size_t ns,
                                const std::string& where) {
  const std::string kind = need(spec, "kind", where).get<std::string>();
  if (kind == "zero") {
    check_keys(spec, {"kind"}, where);
    return [](std::span<const double>, std::size_t, std::span<double> out) {
      out[0] = 0.0;
    };
  }
  if (kind == "per_regime") {
    check_keys(spec, {"kind", "values"}, where);
    auto values = need_number_array(need(spec, "values", where), where);
    if (values.size() != ns) fail(where, "'values' must cover every state");
    return [values = std::move(values)](std::span<const double>, std::size_t theta,
                                        std::span<double> out) {
      out[0] = values[theta];
    };
  }
  if (kind == "affine") {
    check_keys(spec, {"kind", "slope", "offset"}, where);
    auto slope = need_number_array(need(spec, "slope", where), where);
    auto offset = need_number_array(need(spec, "offset", where), where);
    if (slope.size() != ns || offset.size() != ns)
      fail(where, "'slope' and 'offset' must cover every state");
    return [slope = std::move(slope), offset = std::move(offset)](
               std::span<const double> x, std::size_t theta, std::span<double> out) {
      out[0] = slope[theta] * x[0] + offset[theta];
    };
  }
  fail(where, "unknown field kind '" + kind + "'");
}

std::unique_ptr<DiffusionEnv> parse_env(const json& spec, std::size_t ns,
                                        std::optional<double>& lo,
                                        std::optional<double>& hi) {
  const std::string where = "environment";
  check_keys(spec, {"drift", "sigma", "c1", "c2", "x_domain"}, where);
  auto env = std::make_unique<DiffusionEnv>();
  env->dim = 1;
  env->drift = parse_field(need(spec, "drift", where), ns, where + ".drift");
  env->sigma = parse_field(need(spec, "sigma", where), ns, where + ".sigma");
  env->lip_c1 = need_number(spec, "c1", where);
  env->growth_c2 = need_number(spec, "c2", where);
  if (spec.contains("x_domain")) {
    const json& dom = spec["x_domain"];
    check_keys(dom, {"lo", "hi"}, where + ".x_domain");
    lo = need_number(dom, "lo", where + ".x_domain");
    hi = need_number(dom, "hi", where + ".x_domain");
    if (!(*lo < *hi)) fail(where, "x_domain must have lo < hi");
  }
  return env;
}

struct CostTerm {
  enum class Kind { Constant, StateTable, StateActionTable, XQuadratic, XAbs, ActionNorm };
  Kind kind;
  double coeff = 0.0;
  std::vector<double> table;  // states or states*actions
  std::size_t nu = 0;
};

std::vector<CostTerm> parse_terms(const json& arr, std::size_t ns, std::size_t nu,
                                  bool terminal, const std::string& where) {
  if (!arr.is_array()) fail(where, "expected an array of cost terms");
  std::vector<CostTerm> terms;
  for (const auto& spec : arr) {
    const std::string kind = need(spec, "kind", where).get<std::string>();
    CostTerm term;
    term.nu = nu;
    if (kind == "constant") {
      check_keys(spec, {"kind", "value"}, where);
      term.kind = CostTerm::Kind::Constant;
      term.coeff = need_number(spec, "value", where);
    } else if (kind == "state_table") {
      check_keys(spec, {"kind", "values"}, where);
      term.kind = CostTerm::Kind::StateTable;
      term.table = need_number_array(need(spec, "values", where), where);
      if (term.table.size() != ns) fail(where, "state_table must cover every state");
    } else if (kind == "state_action_table" && !terminal) {
      check_keys(spec, {"kind", "values"}, where);
      term.kind = CostTerm::Kind::StateActionTable;
      const json& rows = need(spec, "values", where);
      if (!rows.is_array() || rows.size() != ns)
        fail(where, "state_action_table must have one row per state");
      for (const auto& row : rows) {
        const auto vals = need_number_array(row, where);
        if (vals.size() != nu) fail(where, "state_action_table rows must cover actions");
        term.table.insert(term.table.end(), vals.begin(), vals.end());
      }
    } else if (kind == "x_quadratic") {
      check_keys(spec, {"kind", "coeff"}, where);
      term.kind = CostTerm::Kind::XQuadratic;
      term.coeff = need_number(spec, "coeff", where);
    } else if (kind == "x_abs") {
      check_keys(spec, {"kind", "coeff"}, where);
      term.kind = CostTerm::Kind::XAbs;
      term.coeff = need_number(spec, "coeff", where);
    } else if (kind == "action_norm" && !terminal) {
      check_keys(spec, {"kind", "coeff"}, where);
      term.kind = CostTerm::Kind::ActionNorm;
      term.coeff = need_number(spec, "coeff", where);
    } else {
      fail(where, "unknown cost term '" + kind + "'");
    }
    terms.push_back(std::move(term));
  }
  return terms;
}

bool terms_depend_on_x(const std::vector<CostTerm>& terms) {
  for (const auto& t : terms)
    if (t.kind == CostTerm::Kind::XQuadratic || t.kind == CostTerm::Kind::XAbs)
      return true;
  return false;
}

// action_index < 0 means "no action available" (terminal costs).
double eval_terms(const std::vector<CostTerm>& terms, std::span<const double> x,
                  std::size_t theta, std::span<const double> action,
                  long action_index) {
  double acc = 0.0;
  for (const auto& t : terms) {
    switch (t.kind) {
      case CostTerm::Kind::Constant:
        acc += t.coeff;
        break;
      case CostTerm::Kind::StateTable:
        acc += t.table[theta];
        break;
      case CostTerm::Kind::StateActionTable:
        if (action_index >= 0)
          acc += t.table[theta * t.nu + static_cast<std::size_t>(action_index)];
        break;
      case CostTerm::Kind::XQuadratic:
        if (!x.empty()) acc += t.coeff * x[0] * x[0];
        break;
      case CostTerm::Kind::XAbs:
        if (!x.empty()) acc += t.coeff * std::abs(x[0]);
        break;
      case CostTerm::Kind::ActionNorm: {
        double n2 = 0.0;
        for (double c : action) n2 += c * c;
        acc += t.coeff * std::sqrt(n2);
        break;
      }
    }
  }
  return acc;
}

CostSpec build_cost(const json& spec, const ActionGrid& grid, std::size_t ns) {
  const std::string where = "cost";
  check_keys(spec, {"f", "g", "lower_bound"}, where);
  auto f_terms = parse_terms(need(spec, "f", where), ns, grid.size(), false, where + ".f");
  auto g_terms = parse_terms(need(spec, "g", where), ns, grid.size(), true, where + ".g");

  // state_action_table terms need the action index; actions always arrive
  // as grid points, so match them by coordinates (distinct by construction).
  std::vector<std::vector<double>> grid_points;
  for (std::size_t u = 0; u < grid.size(); ++u) {
    const auto p = grid.point(u);
    grid_points.emplace_back(p.begin(), p.end());
  }
  auto action_index = [grid_points](std::span<const double> action) -> long {
    for (std::size_t u = 0; u < grid_points.size(); ++u) {
      if (grid_points[u].size() != action.size()) continue;
      bool same = true;
      for (std::size_t d = 0; d < action.size(); ++d)
        if (grid_points[u][d] != action[d]) {
          same = false;
          break;
        }
      if (same) return static_cast<long>(u);
    }
    throw std::invalid_argument("cost: action is not a grid point");
  };

  bool f_needs_index = false;
  for (const auto& t : f_terms)
    if (t.kind == CostTerm::Kind::StateActionTable) f_needs_index = true;

  CostSpec cost;
  cost.lower_bound = need_number(spec, "lower_bound", where);
  cost.f_time_dependent = false;
  cost.f_x_dependent = terms_depend_on_x(f_terms);
  cost.f = [f_terms, action_index, f_needs_index](
               double, std::span<const double> x, std::size_t theta,
               std::span<const double> u) {
    return eval_terms(f_terms, x, theta, u, f_needs_index ? action_index(u) : -1);
  };
  cost.g = [g_terms](std::span<const double> x, std::size_t theta) {
    return eval_terms(g_terms, x, theta, {}, -1);
  };
  return cost;
}

}  // namespace

std::pair<double, double> Scenario::x_domain() const {
  if (x_domain_lo && x_domain_hi) return {*x_domain_lo, *x_domain_hi};
  const double x = x0.empty() ? 0.0 : x0[0];
  const double c2 = env ? env->growth_c2 : 1.0;
  const double span = 6.0 * std::sqrt(c2 * (1.0 + x * x)) * horizon;
  return {x - span, x + span};
}

Scenario parse_scenario(const std::string& json_text) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("scenario: invalid JSON: ") + e.what());
  }
  const std::string where = "scenario";
  check_keys(doc,
             {"version", "horizon", "states", "action_grid", "rates", "lyapunov",
              "psi", "admissibility", "environment", "cost", "initial", "numerics"},
             where);

  Scenario scn;
  scn.version = static_cast<int>(need_number(doc, "version", where));
  if (scn.version != 1) fail(where, "unsupported version");
  scn.horizon = need_number(doc, "horizon", where);
  if (!(scn.horizon > 0.0)) fail(where, "horizon must be positive");

  const json& states = need(doc, "states", where);
  if (!states.is_array() || states.empty()) fail(where, "'states' must be non-empty");
  for (const auto& s : states) {
    if (!s.is_string()) fail(where, "state labels must be strings");
    scn.state_labels.push_back(s.get<std::string>());
  }

  ActionGrid grid = parse_action_grid(need(doc, "action_grid", where));
  try {
    scn.model = parse_rates(need(doc, "rates", where), scn.state_labels, grid);
    scn.lyapunov = parse_lyapunov(need(doc, "lyapunov", where), scn.state_labels.size());
    scn.psi = parse_psi(need(doc, "psi", where));
  } catch (const std::invalid_argument& e) {
    throw ParseError(std::string("scenario: ") + e.what());
  }

  if (doc.contains("admissibility")) {
    const std::string gate = doc["admissibility"].get<std::string>();
    if (gate == "w")
      scn.gate = AdmissibilityGate::W;
    else if (gate == "w2")
      scn.gate = AdmissibilityGate::W2;
    else
      fail(where, "admissibility must be 'w' or 'w2'");
  }

  if (doc.contains("environment"))
    scn.env = parse_env(doc["environment"], scn.state_labels.size(), scn.x_domain_lo,
                        scn.x_domain_hi);

  scn.cost = build_cost(need(doc, "cost", where), scn.model->actions(),
                        scn.state_labels.size());

  const json& initial = need(doc, "initial", where);
  check_keys(initial, {"s", "theta", "x"}, "initial");
  scn.s0 = need_number(initial, "s", "initial");
  if (scn.s0 < 0.0 || scn.s0 >= scn.horizon) fail(where, "initial s outside [0, T)");
  const json& theta = need(initial, "theta", "initial");
  if (!theta.is_string()) fail(where, "initial theta must be a state label");
  scn.theta0 = scn.model->state_index(theta.get<std::string>());
  if (initial.contains("x")) scn.x0 = need_number_array(initial["x"], "initial.x");
  if (scn.env && scn.x0.size() != scn.env->dim)
    fail(where, "initial x must match the environment dimension");

  if (doc.contains("numerics")) {
    const json& num = doc["numerics"];
    check_keys(num, {"dt", "dx", "tol", "npaths", "seed", "modulus_points"},
               "numerics");
    if (num.contains("dt")) scn.numerics.dt = num["dt"].get<double>();
    if (num.contains("dx")) scn.numerics.dx = num["dx"].get<double>();
    if (num.contains("tol")) scn.numerics.tol = num["tol"].get<double>();
    if (num.contains("npaths")) scn.numerics.npaths = num["npaths"].get<std::size_t>();
    if (num.contains("seed")) scn.numerics.seed = num["seed"].get<std::uint64_t>();
    if (num.contains("modulus_points"))
      scn.numerics.modulus_points = num["modulus_points"].get<std::size_t>();
    if (!(scn.numerics.dt > 0.0) || !(scn.numerics.dx > 0.0) ||
        !(scn.numerics.tol > 0.0) || scn.numerics.npaths < 2)
      fail(where, "bad numerics");
  }
  return scn;
}

Scenario load_scenario(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ParseError("scenario: cannot open " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_scenario(buf.str());
}

namespace {

MeasureOnU parse_measure(const json& spec, std::size_t nu, const std::string& where) {
  check_keys(spec, {"support", "weights"}, where);
  const json& sup = need(spec, "support", where);
  std::vector<std::size_t> support;
  for (const auto& e : sup) {
    if (!e.is_number_unsigned()) fail(where, "support indices must be nonnegative");
    support.push_back(e.get<std::size_t>());
    if (support.back() >= nu) fail(where, "support index outside the action grid");
  }
  auto weights = need_number_array(need(spec, "weights", where), where);
  try {
    return MeasureOnU(std::move(support), std::move(weights));
  } catch (const std::invalid_argument& e) {
    throw ParseError("policy: " + where + ": " + e.what());
  }
}

json measure_to_json(const MeasureOnU& m) {
  json out;
  out["support"] = json::array();
  out["weights"] = json::array();
  for (std::size_t i = 0; i < m.size(); ++i) {
    out["support"].push_back(m.index(i));
    out["weights"].push_back(m.weight(i));
  }
  return out;
}

}  // namespace

RelaxedMarkovPolicy parse_policy(const std::string& json_text, const Scenario& scn) {
  json doc;
  try {
    doc = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ParseError(std::string("policy: invalid JSON: ") + e.what());
  }
  const std::string where = "policy";
  check_keys(doc, {"version", "type", "interpolation", "knots", "per_state", "psi"},
             where);
  if (static_cast<int>(need_number(doc, "version", where)) != 1)
    fail(where, "unsupported version");
  const std::string type = need(doc, "type", where).get<std::string>();
  const std::size_t ns = scn.state_labels.size();
  const std::size_t nu = scn.model->actions().size();
  const PsiModulus psi = doc.contains("psi") ? parse_psi(doc["psi"]) : scn.psi;

  const json& per_state = need(doc, "per_state", where);
  if (!per_state.is_array() || per_state.size() != ns)
    fail(where, "'per_state' must have one entry per scenario state");

  if (type == "stationary") {
    std::vector<std::vector<MeasureOnU>> curves;
    for (std::size_t th = 0; th < ns; ++th) {
      MeasureOnU m = parse_measure(per_state[th], nu, where + ".per_state");
      curves.push_back({m, m});
    }
    return RelaxedMarkovPolicy({0.0, scn.horizon}, std::move(curves),
                               PolicyInterp::PiecewiseConstant, psi);
  }
  if (type == "relaxed") {
    const auto knots = need_number_array(need(doc, "knots", where), where + ".knots");
    if (knots.empty() || std::abs(knots.back() - scn.horizon) > 1e-12)
      fail(where, "knots must end at the scenario horizon");
    const std::string interp =
        need(doc, "interpolation", where).get<std::string>();
    PolicyInterp pi;
    if (interp == "piecewise-constant")
      pi = PolicyInterp::PiecewiseConstant;
    else if (interp == "mixture-linear")
      pi = PolicyInterp::MixtureLinear;
    else
      fail(where, "interpolation must be piecewise-constant or mixture-linear");
    std::vector<std::vector<MeasureOnU>> curves;
    for (std::size_t th = 0; th < ns; ++th) {
      const json& curve = per_state[th];
      if (!curve.is_array() || curve.size() != knots.size())
        fail(where, "per-state curves must have one measure per knot");
      std::vector<MeasureOnU> ms;
      for (const auto& m : curve) ms.push_back(parse_measure(m, nu, where));
      curves.push_back(std::move(ms));
    }
    try {
      return RelaxedMarkovPolicy(knots, std::move(curves), pi, psi);
    } catch (const std::invalid_argument& e) {
      throw ParseError(std::string("policy: ") + e.what());
    }
  }
  fail(where, "unknown policy type '" + type + "'");
}

RelaxedMarkovPolicy load_policy(const std::filesystem::path& file,
                                const Scenario& scn) {
  std::ifstream in(file);
  if (!in) throw ParseError("policy: cannot open " + file.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_policy(buf.str(), scn);
}

std::string policy_to_json(const RelaxedMarkovPolicy& policy) {
  json doc;
  doc["version"] = 1;
  doc["type"] = "relaxed";
  doc["interpolation"] = policy.interp() == PolicyInterp::PiecewiseConstant
                             ? "piecewise-constant"
                             : "mixture-linear";
  doc["knots"] = policy.knots();
  doc["per_state"] = json::array();
  for (std::size_t th = 0; th < policy.num_states(); ++th) {
    json curve = json::array();
    for (std::size_t k = 0; k < policy.knots().size(); ++k)
      curve.push_back(measure_to_json(policy.knot_measure(th, k)));
    doc["per_state"].push_back(std::move(curve));
  }
  const PsiModulus& psi = policy.psi();
  json psj;
  switch (psi.form()) {
    case PsiModulus::Form::Linear:
      psj["form"] = "linear";
      psj["slope"] = psi.linear_slope();
      break;
    case PsiModulus::Form::Power:
      psj["form"] = "power";
      psj["coeff"] = psi.power_coeff();
      psj["beta"] = psi.power_exponent();
      break;
    case PsiModulus::Form::Table:
      psj["form"] = "table";
      psj["r"] = psi.table_r();
      psj["v"] = psi.table_v();
      break;
  }
  doc["psi"] = std::move(psj);
  return doc.dump(2);
}

void save_policy(const std::filesystem::path& file,
                 const RelaxedMarkovPolicy& policy) {
  const std::filesystem::path tmp = file.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("save_policy: cannot write " + tmp.string());
    out << policy_to_json(policy) << "\n";
  }
  std::filesystem::rename(tmp, file);
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace ctmdp::scenario
