#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <map>
#include <optional>
#include <string>
#include <vector>

#include "sweepmp/cli.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/expr.hpp"
#include "sweepmp/io.hpp"
#include "sweepmp/mp.hpp"
#include "sweepmp/sweep.hpp"

namespace py = pybind11;
using namespace sweepmp;

namespace {

// Reports cross the boundary as JSON text; the Python side decodes them.
py::dict trajectory_dict(const Trajectory& tr) {
  std::vector<std::vector<double>> x, u;
  for (const Vec& v : tr.x) x.emplace_back(v.data(), v.data() + v.size());
  for (const Vec& v : tr.u) u.emplace_back(v.data(), v.data() + v.size());
  py::dict d;
  d["t"] = tr.t;
  d["x"] = x;
  d["u"] = u;
  d["xi"] = tr.xi;
  d["gamma"] = tr.gamma;
  d["max_invariance_excess"] = tr.max_invariance_excess;
  d["max_xi"] = tr.max_xi;
  d["xi_cap"] = tr.xi_cap;
  return d;
}

double mu_of(const ProblemFile& f) { return f.mu ? *f.mu : estimate_mu(f.problem, 20000, 1).mu; }

PenaltyLevel level_of(const ProblemFile& f, double gamma, std::optional<double> sigma) {
  return {gamma, sigma.value_or(f.c_margin / gamma), mu_of(f), f.problem.set.a1().eta};
}

}  // namespace

PYBIND11_MODULE(_sweepmp, m) {
  m.doc() = "Penalty approximation of sweeping processes";
  PYBIND11_CONSTINIT static py::gil_safe_call_once_and_store<py::object> error;
  error.call_once_and_store_result([&]() { return py::exception<Error>(m, "SweepmpError"); });
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      py::set_error(error.get_stored(), (e.kind() + ": " + e.what()).c_str());
    }
  });

  py::class_<ProblemFile>(m, "Problem")
      .def_property_readonly("name", [](const ProblemFile& f) { return f.problem.name; })
      .def_property_readonly("n", [](const ProblemFile& f) { return f.problem.n; })
      .def_property_readonly("m", [](const ProblemFile& f) { return f.problem.m; })
      .def_property_readonly("horizon", [](const ProblemFile& f) { return f.problem.horizon; })
      .def_property_readonly("constraint_count", [](const ProblemFile& f) { return f.problem.set.count(); })
      .def_property_readonly("gammas", [](const ProblemFile& f) { return f.gammas; });

  m.def("load_problem", [](const std::string& path, std::uint64_t seed) { return load_problem(path, seed); },
        py::arg("path"), py::arg("seed") = 1);

  m.def(
      "validate_a1",
      [](const ProblemFile& f, std::size_t samples, std::uint64_t seed) {
        SamplingPlan plan;
        plan.count = samples;
        plan.seed = seed;
        plan.horizon = f.problem.horizon;
        return dump(to_json(validate_a1(f.problem.set, plan)));
      },
      py::arg("problem"), py::arg("samples") = 20000, py::arg("seed") = 1);

  m.def(
      "simulate",
      [](const ProblemFile& f, double gamma, std::optional<double> sigma, double report_dt) {
        IntegratorOptions o;
        o.report_dt = report_dt;
        return trajectory_dict(integrate_penalized(f.problem, default_control(f), level_of(f, gamma, sigma), o));
      },
      py::arg("problem"), py::arg("gamma"), py::arg("sigma") = py::none(), py::arg("report_dt") = 0.0);

  m.def(
      "catching_up",
      [](const ProblemFile& f, double dt) { return trajectory_dict(catching_up(f.problem, default_control(f), dt)); },
      py::arg("problem"), py::arg("dt") = 1e-3);

  m.def(
      "certify",
      [](const ProblemFile& f, double gamma) {
        const Trajectory tr = integrate_penalized(f.problem, default_control(f), level_of(f, gamma, {}));
        const TerminalFit fit = fit_terminal_multipliers(f.problem, tr);
        MPReport r = certify(f.problem, tr, certificate_adjoint(f.problem, tr, fit));
        r.nu = fit.nu;
        return dump(to_json(r));
      },
      py::arg("problem"), py::arg("gamma") = 400.0);

  m.def(
      "derivative",
      [](const std::string& source, const std::string& var, const std::vector<std::string>& variables) {
        return parse(source, variables).diff(var).str();
      },
      py::arg("source"), py::arg("var"), py::arg("variables"));

  m.def(
      "evaluate",
      [](const std::string& source, const std::map<std::string, double>& env) {
        std::vector<std::string> vars;
        Env e;
        for (const auto& [k, v] : env) {
          vars.push_back(k);
          e[k] = v;
        }
        return parse(source, vars).eval(e);
      },
      py::arg("source"), py::arg("env"));

  m.def(
      "run_cli",
      [](std::vector<std::string> args) {
        args.insert(args.begin(), "sweepctl");
        std::vector<char*> argv;
        for (auto& a : args) argv.push_back(a.data());
        py::gil_scoped_release release;
        return run_main(static_cast<int>(argv.size()), argv.data());
      },
      py::arg("args"));
}
