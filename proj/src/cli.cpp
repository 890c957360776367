#include "sweepmp/cli.hpp"

#include <CLI11.hpp>
#include <iostream>
#include <sstream>

#include "sweepmp/control.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/io.hpp"
#include "sweepmp/mp.hpp"
#include "sweepmp/sweep.hpp"

namespace sweepmp {

namespace fs = std::filesystem;

namespace {

const char* command_name(Command c) {
  switch (c) {
    case Command::Validate: return "validate";
    case Command::Simulate: return "simulate";
    case Command::Converge: return "converge";
    case Command::Adjoint: return "adjoint";
    case Command::Certify: return "certify";
    case Command::Example: return "example";
  }
  return "?";
}

class Session {
 public:
  Session(const RunConfig& cfg) : cfg_(cfg), file_(load_problem(cfg.problem_file, cfg.seed)) {}

  int dispatch() {
    switch (cfg_.command) {
      case Command::Validate: return validate();
      case Command::Simulate: return simulate();
      case Command::Converge: return converge();
      case Command::Adjoint: return adjoint();
      case Command::Certify: return certify_cmd();
      case Command::Example: return example();
    }
    return 2;
  }

 private:
  const Problem& problem() const { return file_.problem; }

  json metadata() const {
    return {{"tool", "sweepctl"},
            {"version", "0.1.0"},
            {"command", command_name(cfg_.command)},
            {"problem", problem().name},
            {"seed", cfg_.seed}};
  }

  void write(const std::string& name, const std::string& contents) const { write_atomic(cfg_.out_dir / name, contents); }
  void write_json(const std::string& name, json doc) const {
    doc["metadata"] = metadata();
    write(name, dump(doc));
  }

  MuEstimate mu_estimate() {
    if (!mu_) {
      if (file_.mu) {
        mu_ = MuEstimate{};
        mu_->mu = *file_.mu;
      } else {
        mu_ = estimate_mu(problem(), cfg_.mu_samples, cfg_.seed);
      }
    }
    return *mu_;
  }

  SamplingPlan plan(std::size_t count) const {
    SamplingPlan p;
    p.count = count;
    p.seed = cfg_.seed;
    p.horizon = problem().horizon;
    return p;
  }

  PenaltySchedule schedule() {
    std::vector<double> g = cfg_.gammas.empty() ? file_.gammas : cfg_.gammas;
    std::vector<double> s = cfg_.sigmas;
    if (s.empty())
      for (double v : g) s.push_back(file_.c_margin / v);
    if (s.size() != g.size()) throw DimensionMismatch("--sigma needs one value per gamma");
    return PenaltySchedule::from_lists(problem().set, mu_estimate().mu, problem().set.a1().eta, g, s, plan(20000));
  }

  // Levels are numbered from 1 in file names, like xi1 and psi1.
  static std::string level_name(const std::string& stem, std::size_t k) {
    return stem + "_k" + std::to_string(k + 1) + ".csv";
  }

  json schedule_json(const PenaltySchedule& s) {
    return {{"mu", s.mu},
            {"eta", s.eta},
            {"gammas", s.gammas},
            {"sigmas", s.sigmas},
            {"mu_k", s.mus},
            {"inclusion_holds", s.inclusion.holds},
            {"inclusion_margin", s.inclusion.worst_margin},
            {"mu_estimate", to_json(mu_estimate())}};
  }

  int validate() {
    const A1Report a1 = validate_a1(problem().set, plan(cfg_.a1_samples));
    const ProblemCheck pc = check_problem(problem(), 20000, cfg_.seed);
    const bool verdict = a1.pass && pc.initial_inside && pc.terminal_inside;
    write_json("a1_report.json", {{"a1", to_json(a1)},
                                  {"beta", problem().set.a1().beta},
                                  {"eta", problem().set.a1().eta},
                                  {"rho", problem().set.a1().rho},
                                  {"eta_sampled", file_.eta_sampled},
                                  {"problem_check", to_json(pc)},
                                  {"mu", to_json(mu_estimate())},
                                  {"verdict", verdict}});
    return verdict ? 0 : 1;
  }

  int simulate() {
    const PenaltySchedule s = schedule();
    const ControlSignal u = default_control(file_);
    json levels = json::array();
    for (std::size_t k = 0; k < s.size(); ++k) {
      const Trajectory tr = integrate_penalized(problem(), u, s.level(k));
      write(level_name("trajectory", k), trajectory_csv(tr));
      levels.push_back(trajectory_summary(problem(), tr));
    }
    json doc{{"schedule", schedule_json(s)}, {"levels", levels}, {"verdict", true}};
    if (cfg_.dt) {
      const Trajectory cu = catching_up(problem(), u, *cfg_.dt);
      write("catching_up.csv", trajectory_csv(cu));
      doc["catching_up"] = trajectory_summary(problem(), cu);
    }
    write_json("simulate.json", doc);
    return 0;
  }

  int converge() {
    const PenaltySchedule s = schedule();
    const ControlSignal u = default_control(file_);
    const double dt = cfg_.dt.value_or(file_.oracle_dt);
    const ConvergenceReport rep = convergence_sweep(problem(), u, s, dt, cfg_.tol.value_or(file_.tolerance));
    write("oracle.csv", trajectory_csv(catching_up(problem(), u, dt)));
    json doc = to_json(rep);
    doc["schedule"] = schedule_json(s);
    write_json("convergence_report.json", doc);
    return rep.verdict ? 0 : 1;
  }

  int adjoint() {
    const PenaltySchedule s = schedule();
    const ControlSignal u = default_control(file_);
    json levels = json::array();
    for (std::size_t k = 0; k < s.size(); ++k) {
      const Trajectory tr = integrate_penalized(problem(), u, s.level(k));
      const TerminalFit fit = fit_terminal_multipliers(problem(), tr);
      const AdjointArc arc = certificate_adjoint(problem(), tr, fit);
      write(level_name("adjoint", k), adjoint_csv(arc));
      json d = to_json(diagnostics(tr, arc));
      d["measure_min"] = extract_multipliers(tr, arc).measure_min;
      levels.push_back(d);
    }
    write_json("diagnostics.json", {{"schedule", schedule_json(s)}, {"levels", levels}, {"verdict", true}});
    return 0;
  }

  int certify_cmd() {
    const PenaltySchedule s = schedule();
    const PenaltyLevel level = s.level(s.size() - 1);
    const Trajectory tr = integrate_penalized(problem(), default_control(file_), level);
    const TerminalFit fit = fit_terminal_multipliers(problem(), tr);
    const AdjointArc arc = certificate_adjoint(problem(), tr, fit);
    MPReport rep = certify(problem(), tr, arc);
    rep.nu = fit.nu;
    write("trajectory.csv", trajectory_csv(tr));
    write("adjoint.csv", adjoint_csv(arc));
    json doc = to_json(rep);
    doc["schedule"] = schedule_json(s);
    write_json("mp_report.json", doc);
    return rep.verdict ? 0 : 1;
  }

  int example() {
    if (!file_.two_sphere) throw PreconditionError("the example command needs a problem file with two_sphere data");
    const TwoSphereParams& prm = *file_.two_sphere;
    const PenaltySchedule s = schedule();
    const PenaltyLevel level = s.level(s.size() - 1);

    const ExampleReport ex = run_example(problem(), prm, level);
    const SwitchOptimum& opt = ex.optimum;
    const SwitchRun& run = ex.run;
    const AdjointArc& arc = ex.arc;
    const double cap = level.xi_cap();
    json checks = json::object();
    for (const auto& [name, ok] : ex.checks) checks[name] = ok;
    const bool verdict = ex.verdict;

    std::ostringstream trace;
    trace << "t_switch,objective,feasible\n";
    for (const auto& [t, obj, feas] : opt.trace)
      trace << format_double(t) << "," << format_double(obj) << "," << (feas ? 1 : 0) << "\n";
    write("optimizer_trace.csv", trace.str());
    write("trajectory.csv", trajectory_csv(run.traj));
    write("adjoint.csv", adjoint_csv(arc));
    json contact = to_json(run.contact);
    contact["fraction"] = 0.05;
    write_json("contact.json", contact);
    write_json("example.json", {{"params",
                                 {{"h", prm.h},
                                  {"sigma_drift", prm.sigma_drift},
                                  {"delta", prm.delta},
                                  {"x0", prm.x0},
                                  {"z0", prm.z0},
                                  {"T", prm.T},
                                  {"y1", prm.y1()},
                                  {"y2", prm.y2()}}},
                                {"level", {{"gamma", level.gamma}, {"sigma", level.sigma}, {"xi_cap", cap}}},
                                {"schedule", schedule_json(s)},
                                {"optimum", to_json(opt)},
                                {"contact", contact},
                                {"arcs", to_json(ex.arcs)},
                                {"bang_bang", to_json(ex.bang_bang)},
                                {"q_sign", to_json(ex.sign)},
                                {"mp_report", to_json(ex.mp)},
                                {"trajectory", trajectory_summary(problem(), run.traj)},
                                {"checks", checks},
                                {"verdict", verdict}});
    return verdict ? 0 : 1;
  }

  RunConfig cfg_;
  ProblemFile file_;
  std::optional<MuEstimate> mu_;
};

void write_error(const RunConfig& cfg, const std::string& kind, const std::string& message,
                 const std::string& pointer, std::optional<std::size_t> offset = {}) {
  json err{{"kind", kind}, {"message", message}};
  if (!pointer.empty()) err["pointer"] = pointer;
  if (offset) err["offset"] = *offset;
  const json doc{{"error", err},
                 {"metadata",
                  {{"tool", "sweepctl"},
                   {"version", "0.1.0"},
                   {"command", command_name(cfg.command)},
                   {"problem", cfg.problem_file.string()},
                   {"seed", cfg.seed}}}};
  std::cerr << "sweepctl: " << kind << ": " << message << "\n";
  try {
    write_atomic(cfg.out_dir / "error.json", dump(doc));
  } catch (const std::exception& e) {
    std::cerr << "sweepctl: could not write error.json: " << e.what() << "\n";
  }
}

}  // namespace

int run(const RunConfig& cfg) {
  try {
    Session session(cfg);
    return session.dispatch();
  } catch (const Error& e) {
    write_error(cfg, e.kind(), e.what(), e.pointer(), e.source_offset());
  } catch (const std::exception& e) {
    write_error(cfg, "internal", e.what(), "");
  }
  return 2;
}

int run_main(int argc, char** argv) {
  CLI::App app{"Penalty approximation of sweeping processes and Maximum Principle checks", "sweepctl"};
  RunConfig cfg;
  std::string command;
  const std::map<std::string, Command> commands{{"validate", Command::Validate}, {"simulate", Command::Simulate},
                                                {"converge", Command::Converge}, {"adjoint", Command::Adjoint},
                                                {"certify", Command::Certify},   {"example", Command::Example}};
  app.add_option("command", command, "validate | simulate | converge | adjoint | certify | example")
      ->required()
      ->check(CLI::IsMember({"validate", "simulate", "converge", "adjoint", "certify", "example"}));
  app.add_option("--problem", cfg.problem_file, "problem JSON file")->required();
  app.add_option("--gamma", cfg.gammas, "penalty parameters")->delimiter(',');
  app.add_option("--sigma", cfg.sigmas, "penalty shifts (default c_margin / gamma)")->delimiter(',');
  app.add_option("--dt", cfg.dt, "catching-up step");
  app.add_option("--tol", cfg.tol, "convergence tolerance");
  app.add_option("--out", cfg.out_dir, "output directory");
  app.add_option("--seed", cfg.seed, "sampler seed");
  app.add_option("--a1-samples", cfg.a1_samples, "A1 validation samples");
  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }
  cfg.command = commands.at(command);
  return run(cfg);
}

}  // namespace sweepmp
