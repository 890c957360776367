#include "sweepmp/io.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "sweepmp/errors.hpp"

namespace sweepmp {

namespace fs = std::filesystem;

// Schema reading helpers -----------------------------------------------------

namespace {

template <class E>
[[noreturn]] void raise_at(const std::string& ptr, E error) {
  error.set_pointer(ptr);
  throw error;
}

std::string child(const std::string& ptr, const std::string& key) { return ptr + "/" + key; }
std::string child(const std::string& ptr, std::size_t i) { return ptr + "/" + std::to_string(i); }

void only_keys(const json& j, const std::string& ptr, std::initializer_list<const char*> keys) {
  if (!j.is_object()) throw SchemaError(ptr, "expected an object");
  const std::set<std::string> allowed(keys.begin(), keys.end());
  for (const auto& [k, v] : j.items())
    if (!allowed.count(k)) throw SchemaError(child(ptr, k), "unknown field");
}

const json& need(const json& j, const std::string& ptr, const char* key) {
  if (!j.contains(key)) throw SchemaError(child(ptr, key), "required field is missing");
  return j.at(key);
}

double number(const json& j, const std::string& ptr) {
  if (!j.is_number()) throw SchemaError(ptr, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw SchemaError(ptr, "expected a finite number");
  return v;
}

int integer(const json& j, const std::string& ptr, int lo) {
  if (!j.is_number_integer()) throw SchemaError(ptr, "expected an integer");
  const auto v = j.get<long long>();
  if (v < lo || v > 8) throw SchemaError(ptr, "expected an integer in [" + std::to_string(lo) + ", 8]");
  return static_cast<int>(v);
}

Vec vector(const json& j, const std::string& ptr, std::optional<int> size = {}) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of numbers");
  if (size && static_cast<int>(j.size()) != *size)
    raise_at(ptr, DimensionMismatch(ptr + ": expected " + std::to_string(*size) + " entries, got " +
                                    std::to_string(j.size())));
  Vec v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) v[static_cast<Eigen::Index>(i)] = number(j[i], child(ptr, i));
  return v;
}

std::vector<Expr> expressions(const json& j, const std::string& ptr, const std::vector<std::string>& vars) {
  if (!j.is_array()) throw SchemaError(ptr, "expected an array of expression strings");
  std::vector<Expr> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const std::string p = child(ptr, i);
    if (!j[i].is_string()) throw SchemaError(p, "expected an expression string");
    try {
      out.push_back(parse(j[i].get<std::string>(), vars));
    } catch (Error& e) {
      e.set_pointer(p);
      throw;
    }
  }
  return out;
}

Expr expression(const json& j, const std::string& ptr, const std::vector<std::string>& vars) {
  if (!j.is_string()) throw SchemaError(ptr, "expected an expression string");
  return expressions(json::array({j}), ptr, vars).front();
}

// Re-tags errors thrown by a constructor with the pointer of its input.
template <class F>
auto at_pointer(const std::string& ptr, F&& f) {
  try {
    return f();
  } catch (Error& e) {
    if (e.pointer().empty()) e.set_pointer(ptr);
    throw;
  }
}

ControlSet read_control_set(const json& j, int m) {
  const std::string ptr = "/control_set";
  if (j.contains("box")) {
    only_keys(j, ptr, {"box"});
    const json& b = j.at("box");
    only_keys(b, ptr + "/box", {"lo", "hi"});
    Vec lo = vector(need(b, ptr + "/box", "lo"), ptr + "/box/lo", m);
    Vec hi = vector(need(b, ptr + "/box", "hi"), ptr + "/box/hi", m);
    return at_pointer(ptr, [&] { return ControlSet::box(lo, hi); });
  }
  if (j.contains("finite")) {
    only_keys(j, ptr, {"finite"});
    const json& f = j.at("finite");
    if (!f.is_array() || f.empty()) throw SchemaError(ptr + "/finite", "expected a non-empty array of control vectors");
    std::vector<Vec> pts;
    for (std::size_t i = 0; i < f.size(); ++i) pts.push_back(vector(f[i], child(ptr + "/finite", i), m));
    return at_pointer(ptr, [&] { return ControlSet::finite(pts); });
  }
  throw SchemaError(ptr, "expected {\"box\": ...} or {\"finite\": ...}");
}

InitialSet read_initial_set(const json& j, int n) {
  const std::string ptr = "/initial_set";
  InitialSet s;
  if (j.contains("point")) {
    only_keys(j, ptr, {"point"});
    s.kind = InitialSet::Kind::Point;
    s.points = {vector(j.at("point"), ptr + "/point", n)};
  } else if (j.contains("points")) {
    only_keys(j, ptr, {"points"});
    const json& a = j.at("points");
    if (!a.is_array() || a.empty()) throw SchemaError(ptr + "/points", "expected a non-empty array of points");
    s.kind = InitialSet::Kind::Points;
    for (std::size_t i = 0; i < a.size(); ++i) s.points.push_back(vector(a[i], child(ptr + "/points", i), n));
  } else if (j.contains("ball")) {
    only_keys(j, ptr, {"ball"});
    const json& b = j.at("ball");
    only_keys(b, ptr + "/ball", {"center", "radius"});
    s.kind = InitialSet::Kind::Ball;
    s.center = vector(need(b, ptr + "/ball", "center"), ptr + "/ball/center", n);
    s.radius = number(need(b, ptr + "/ball", "radius"), ptr + "/ball/radius");
    if (!(s.radius >= 0.0)) throw SchemaError(ptr + "/ball/radius", "radius must be non-negative");
  } else {
    throw SchemaError(ptr, "expected {\"point\"}, {\"points\"} or {\"ball\"}");
  }
  return s;
}

TwoSphereParams read_two_sphere(const json& j) {
  const std::string ptr = "/two_sphere";
  only_keys(j, ptr, {"h", "sigma_drift", "delta", "x0", "z0", "T", "beta", "rho"});
  TwoSphereParams p;
  const auto get = [&](const char* key, double& out) {
    if (j.contains(key)) out = number(j.at(key), child(ptr, key));
  };
  get("h", p.h);
  get("sigma_drift", p.sigma_drift);
  get("delta", p.delta);
  get("x0", p.x0);
  get("z0", p.z0);
  get("T", p.T);
  get("beta", p.beta);
  get("rho", p.rho);
  at_pointer(ptr, [&] {
    p.check();
    return 0;
  });
  return p;
}

}  // namespace

ProblemFile parse_problem(const json& doc, std::uint64_t seed) {
  only_keys(doc, "", {"name", "n", "m", "horizon", "dynamics", "control_set", "constraints", "a1", "cap",
                      "initial_set", "terminal_set", "cost", "bounding_radius", "control", "mu", "schedule",
                      "two_sphere"});
  std::string name = "problem";
  if (doc.contains("name")) {
    if (!doc.at("name").is_string()) throw SchemaError("/name", "expected a string");
    name = doc.at("name").get<std::string>();
  }
  const int n = integer(need(doc, "", "n"), "/n", 1);
  const int m = integer(need(doc, "", "m"), "/m", 0);
  const double T = number(need(doc, "", "horizon"), "/horizon");
  if (!(T > 0.0)) throw SchemaError("/horizon", "horizon must be positive");

  const auto dyn_vars = variable_names(n, m);
  const auto set_vars = variable_names(n);
  auto x_vars = set_vars;
  x_vars.erase(x_vars.begin());

  const json& dyn = need(doc, "", "dynamics");
  auto f = expressions(dyn, "/dynamics", dyn_vars);
  if (static_cast<int>(f.size()) != n)
    raise_at("/dynamics", DimensionMismatch("dynamics has " + std::to_string(f.size()) + " components but n = " +
                                            std::to_string(n)));

  const json& cons = need(doc, "", "constraints");
  auto psi = expressions(cons, "/constraints", set_vars);
  if (psi.empty()) throw SchemaError("/constraints", "at least one constraint is required");

  const json& a1j = need(doc, "", "a1");
  only_keys(a1j, "/a1", {"beta", "eta", "rho"});
  A1Constants a1;
  a1.beta = number(need(a1j, "/a1", "beta"), "/a1/beta");
  a1.rho = number(need(a1j, "/a1", "rho"), "/a1/rho");
  bool eta_auto = true;
  if (a1j.contains("eta") && !(a1j.at("eta").is_string() && a1j.at("eta") == "auto")) {
    a1.eta = number(a1j.at("eta"), "/a1/eta");
    eta_auto = false;
  }
  at_pointer("/a1", [&] {
    a1.check();
    return 0;
  });
  if (doc.contains("cap") && doc.at("cap") != "auto") throw SchemaError("/cap", "only \"auto\" is supported");

  const double radius = number(need(doc, "", "bounding_radius"), "/bounding_radius");
  if (!(radius > 0.0)) throw SchemaError("/bounding_radius", "must be positive");

  if (eta_auto) {
    // The A1 sampler only needs the constraints; eta is filled in afterwards.
    const MovingSet probe(psi, n, A1Constants{a1.beta, 1.0, a1.rho}, radius);
    SamplingPlan plan;
    plan.count = 20000;
    plan.seed = seed;
    plan.horizon = T;
    const A1Report r = validate_a1(probe, plan);
    if (!(r.suggested_eta > 0.0 && std::isfinite(r.suggested_eta)))
      raise_at("/a1/eta", InvalidParameters("cannot infer eta: no sampled point falls in the constraint band"));
    a1.eta = r.suggested_eta;
  }

  ControlSet controls = read_control_set(need(doc, "", "control_set"), m);
  InitialSet initial = read_initial_set(need(doc, "", "initial_set"), n);

  std::optional<TerminalSet> terminal;
  if (doc.contains("terminal_set") && !doc.at("terminal_set").is_null()) {
    const json& tj = doc.at("terminal_set");
    only_keys(tj, "/terminal_set", {"inequalities", "within_moving_set"});
    auto g = expressions(need(tj, "/terminal_set", "inequalities"), "/terminal_set/inequalities", x_vars);
    bool within = false;
    if (tj.contains("within_moving_set")) {
      if (!tj.at("within_moving_set").is_boolean())
        throw SchemaError("/terminal_set/within_moving_set", "expected a boolean");
      within = tj.at("within_moving_set").get<bool>();
    }
    terminal.emplace(std::move(g), within, n);
  }

  Expr cost = expression(need(doc, "", "cost"), "/cost", x_vars);

  ProblemFile out{Problem{name, n, m, T, at_pointer("/dynamics", [&] { return Dynamics(f, n, m); }),
                          at_pointer("/constraints", [&] { return MovingSet(psi, n, a1, radius); }),
                          std::move(controls), std::move(initial), std::move(terminal), Cost(cost, n)},
                  std::nullopt, std::nullopt, std::nullopt, eta_auto, {}};

  if (doc.contains("mu")) {
    out.mu = number(doc.at("mu"), "/mu");
    if (!(*out.mu > 0.0)) throw SchemaError("/mu", "mu must be positive");
  }
  if (doc.contains("control")) {
    const json& cj = doc.at("control");
    only_keys(cj, "/control", {"breaks", "values"});
    const Vec br = vector(need(cj, "/control", "breaks"), "/control/breaks");
    const json& vals = need(cj, "/control", "values");
    if (!vals.is_array()) throw SchemaError("/control/values", "expected an array of control vectors");
    std::vector<Vec> v;
    for (std::size_t i = 0; i < vals.size(); ++i) {
      v.push_back(vector(vals[i], child("/control/values", i), m));
      if (!out.problem.controls.contains(v.back(), 1e-12))
        throw SchemaError(child("/control/values", i), "control value lies outside the control set");
    }
    std::vector<double> b(br.data(), br.data() + br.size());
    out.control = at_pointer("/control", [&] { return ControlSignal(b, v); });
  }
  if (doc.contains("schedule")) {
    const json& sj = doc.at("schedule");
    only_keys(sj, "/schedule", {"gammas", "c_margin", "oracle_dt", "tolerance"});
    if (sj.contains("gammas")) {
      const Vec g = vector(sj.at("gammas"), "/schedule/gammas");
      out.gammas.assign(g.data(), g.data() + g.size());
      for (std::size_t i = 0; i < out.gammas.size(); ++i)
        if (!(out.gammas[i] > 0.0)) throw SchemaError(child("/schedule/gammas", i), "gamma must be positive");
    }
    if (sj.contains("c_margin")) out.c_margin = number(sj.at("c_margin"), "/schedule/c_margin");
    if (sj.contains("oracle_dt")) out.oracle_dt = number(sj.at("oracle_dt"), "/schedule/oracle_dt");
    if (sj.contains("tolerance")) out.tolerance = number(sj.at("tolerance"), "/schedule/tolerance");
  }
  if (out.gammas.empty()) out.gammas = {25, 50, 100, 200, 400};
  if (doc.contains("two_sphere")) {
    out.two_sphere = read_two_sphere(doc.at("two_sphere"));
    if (n != 3 || m != 1 || psi.size() != 2)
      throw SchemaError("/two_sphere", "two-sphere data needs n = 3, m = 1 and two constraints");
    if (std::abs(out.two_sphere->T - T) > 1e-12) throw SchemaError("/two_sphere/T", "differs from /horizon");
  }
  return out;
}

ProblemFile load_problem(const fs::path& file, std::uint64_t seed) {
  std::ifstream in(file);
  if (!in) throw Error("io_error", "cannot open problem file '" + file.string() + "'");
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw SchemaError("", std::string("invalid JSON: ") + e.what());
  }
  ProblemFile pf = parse_problem(doc, seed);
  if (!doc.contains("name")) pf.problem.name = file.stem().string();
  return pf;
}

ControlSignal default_control(const ProblemFile& f) {
  if (f.control) return *f.control;
  const ControlSet& U = f.problem.controls;
  if (U.kind == ControlSet::Kind::Finite) return ControlSignal::constant(U.points.front());
  return ControlSignal::constant(0.5 * (U.lo + U.hi));
}

// Output ---------------------------------------------------------------

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string trajectory_csv(const Trajectory& tr) {
  std::ostringstream s;
  const std::size_t n = tr.size() ? static_cast<std::size_t>(tr.x.front().size()) : 0;
  const std::size_t m = tr.size() ? static_cast<std::size_t>(tr.u.front().size()) : 0;
  const std::size_t I = tr.size() ? tr.xi.front().size() : 0;
  s << "t";
  for (std::size_t a = 1; a <= n; ++a) s << ",x" << a;
  for (std::size_t a = 1; a <= m; ++a) s << ",u" << a;
  for (std::size_t a = 1; a <= I; ++a) s << ",xi" << a;
  s << "\n";
  for (std::size_t j = 0; j < tr.size(); ++j) {
    s << format_double(tr.t[j]);
    for (std::size_t a = 0; a < n; ++a) s << "," << format_double(tr.x[j][static_cast<Eigen::Index>(a)]);
    for (std::size_t a = 0; a < m; ++a) s << "," << format_double(tr.u[j][static_cast<Eigen::Index>(a)]);
    for (std::size_t a = 0; a < I; ++a) s << "," << format_double(tr.xi[j][a]);
    s << "\n";
  }
  return s.str();
}

std::string adjoint_csv(const AdjointArc& arc) {
  std::ostringstream s;
  const std::size_t n = arc.size() ? static_cast<std::size_t>(arc.p.front().size()) : 0;
  const std::size_t I = arc.size() ? arc.density.front().size() : 0;
  s << "t";
  for (std::size_t a = 1; a <= n; ++a) s << ",p" << a;
  for (std::size_t a = 1; a <= I; ++a) s << ",d" << a;
  s << "\n";
  for (std::size_t j = 0; j < arc.size(); ++j) {
    s << format_double(arc.t[j]);
    for (std::size_t a = 0; a < n; ++a) s << "," << format_double(arc.p[j][static_cast<Eigen::Index>(a)]);
    for (std::size_t a = 0; a < I; ++a) s << "," << format_double(arc.density[j][a]);
    s << "\n";
  }
  return s.str();
}

void write_atomic(const fs::path& file, const std::string& contents) {
  if (file.has_parent_path()) fs::create_directories(file.parent_path());
  fs::path tmp = file;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("io_error", "cannot write '" + tmp.string() + "'");
    out << contents;
    out.flush();
    if (!out) throw Error("io_error", "write failed for '" + tmp.string() + "'");
  }
  fs::rename(tmp, file);
}

std::string dump(const json& doc) { return doc.dump(2) + "\n"; }

namespace {

json vec_json(const Vec& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

json sample_json(const std::optional<A1Sample>& s) {
  if (!s) return nullptr;
  json idx = json::array();
  for (int i : s->indices) idx.push_back(i + 1);
  return {{"t", s->t}, {"x", vec_json(s->x)}, {"constraints", idx}, {"value", s->value}};
}

template <class T>
json opt_json(const std::optional<T>& v) {
  return v ? json(*v) : json(nullptr);
}

}  // namespace

json to_json(const A1Report& r) {
  return {{"samples", r.samples},
          {"band_samples", r.band_samples},
          {"pair_samples", r.pair_samples},
          {"seed", r.seed},
          {"min_band_gradient", r.min_band_gradient},
          {"min_pair_inner", r.min_pair_inner},
          {"max_dominance", r.max_dominance},
          {"max_flat_gradient", r.max_flat_gradient},
          {"gradient_ok", r.gradient_ok},
          {"inner_ok", r.inner_ok},
          {"dominance_ok", r.dominance_ok},
          {"flat_ok", r.flat_ok},
          {"pass", r.pass},
          {"gradient_violation", sample_json(r.gradient_violation)},
          {"inner_violation", sample_json(r.inner_violation)},
          {"dominance_violation", sample_json(r.dominance_violation)},
          {"flat_violation", sample_json(r.flat_violation)},
          {"suggested_eta", r.suggested_eta}};
}

json to_json(const ProblemCheck& r) {
  return {{"initial_inside", r.initial_inside},
          {"terminal_inside", r.terminal_inside},
          {"max_speed", r.max_speed},
          {"samples", r.samples}};
}

json to_json(const MuEstimate& r) {
  return {{"mu", r.mu},
          {"samples", r.samples},
          {"t", r.t},
          {"x", vec_json(r.x)},
          {"u", vec_json(r.u)},
          {"constraint", r.constraint >= 0 ? json(r.constraint + 1) : json(nullptr)}};
}

json to_json(const ConvergenceReport& r) {
  return {{"gammas", r.gammas},
          {"sigmas", r.sigmas},
          {"sup_errors", r.sup_errors},
          {"max_xi", r.max_xi},
          {"max_invariance_excess", r.max_invariance_excess},
          {"cross_terms", r.cross_terms},
          {"dt_oracle", r.dt_oracle},
          {"tolerance", r.tolerance},
          {"slack", r.slack},
          {"non_increasing", r.non_increasing},
          {"final_within_tolerance", r.final_within_tolerance},
          {"inclusion_holds", r.inclusion_holds},
          {"warnings", r.warnings},
          {"verdict", r.verdict}};
}

json to_json(const DiagnosticsReport& r) {
  return {{"gamma", r.gamma},
          {"lambda", r.lambda},
          {"normalization", r.normalization},
          {"p_sup", r.p_sup},
          {"xi_grad_p_L1", r.xi_grad_p_L1},
          {"weighted_L1", r.weighted_L1},
          {"adjoint_var_L1", r.adjoint_var_L1},
          {"density_L1", r.density_L1},
          {"jump_count", r.jump_count}};
}

json to_json(const MPReport& r) {
  json conds = json::array();
  for (const ConditionResult& c : r.conditions)
    conds.push_back({{"name", c.name}, {"residual", c.residual}, {"tolerance", c.tolerance}, {"pass", c.pass}});
  return {{"corollary", r.corollary},
          {"lambda", r.lambda},
          {"pT", vec_json(r.pT)},
          {"nu", r.nu},
          {"normalization", r.normalization},
          {"gamma", r.gamma},
          {"complementarity", r.complementarity},
          {"conditions", conds},
          {"verdict", r.verdict}};
}

json to_json(const ContactTimes& r) {
  return {{"threshold", r.threshold}, {"t1", opt_json(r.t1)}, {"t2", opt_json(r.t2)}, {"t3", opt_json(r.t3)}};
}

json to_json(const SwitchOptimum& r) {
  return {{"t_star", r.t_star},
          {"objective", r.objective},
          {"grid_t_star", r.grid_t_star},
          {"grid_objective", r.grid_objective},
          {"agreement", r.agreement},
          {"agree", r.agree},
          {"evaluations", r.trace.size()}};
}

json to_json(const BangBangReport& r) {
  const auto finite = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
  return {{"best_single", finite(r.best_single)},
          {"best_single_t", r.best_single_t},
          {"best_double", finite(r.best_double)},
          {"best_double_t", {r.best_double_t.first, r.best_double_t.second}},
          {"best_double_first", r.best_double_first},
          {"feasible_single", r.feasible_single},
          {"feasible_double", r.feasible_double},
          {"slack", r.slack},
          {"pass", r.pass}};
}

json to_json(const ArcCheck& r) {
  return {{"trim", r.trim},
          {"intersection_nodes", r.intersection_nodes},
          {"intersection_formula", r.intersection_formula},
          {"intersection_gap", r.intersection_gap},
          {"single_nodes", r.single_nodes},
          {"single_formula", r.single_formula},
          {"single_xi2", r.single_xi2}};
}

json to_json(const SignPattern& r) {
  return {{"sign_changes", r.sign_changes},
          {"change_time", opt_json(r.change_time)},
          {"q_T", r.q_T},
          {"p_T", r.p_T},
          {"pass", r.pass}};
}

json trajectory_summary(const Problem& p, const Trajectory& tr) {
  const Vec& xT = tr.x.back();
  return {{"nodes", tr.size()},
          {"gamma", tr.gamma},
          {"sigma", tr.sigma},
          {"mu_k", tr.mu_k},
          {"xi_cap", tr.xi_cap},
          {"max_invariance_excess", tr.max_invariance_excess},
          {"max_xi", tr.max_xi},
          {"cross_term", tr.cross_term},
          {"x_T", vec_json(xT)},
          {"cost", p.cost.value(xT)},
          {"terminal_violation", p.terminal_violation(xT)},
          {"steps", tr.stats.steps},
          {"rejected", tr.stats.rejected},
          {"implicit_used", tr.stats.implicit_used}};
}

}  // namespace sweepmp
