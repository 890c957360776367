#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sweepmp/adjoint.hpp"
#include "sweepmp/control.hpp"
#include "sweepmp/moving_set.hpp"
#include "sweepmp/mp.hpp"
#include "sweepmp/problem.hpp"
#include "sweepmp/sweep.hpp"

namespace sweepmp {

using json = nlohmann::json;

/// A problem file: the problem plus the optional run data it carries.
struct ProblemFile {
  Problem problem;
  std::optional<double> mu;  // fixed constant mu; estimated when absent
  std::optional<ControlSignal> control;
  std::optional<TwoSphereParams> two_sphere;
  bool eta_sampled = false;  // a1.eta was "auto" or absent
  std::vector<double> gammas;  // default schedule
  double c_margin = 1.0;       // sigma_k = c_margin / gamma_k
  double oracle_dt = 1e-3;
  double tolerance = 2e-2;
};

/// Validates the document against the problem schema and builds the problem.
/// Errors carry the JSON pointer of the offending field. The seed drives the
/// sampler used when a1.eta is "auto".
ProblemFile parse_problem(const json& doc, std::uint64_t seed = 1);
ProblemFile load_problem(const std::filesystem::path& file, std::uint64_t seed = 1);

/// The control to simulate: the file's control, else the box midpoint or the
/// first finite control.
ControlSignal default_control(const ProblemFile& file);

/// 17 significant digits, "nan"/"inf" spelled out.
std::string format_double(double v);

std::string trajectory_csv(const Trajectory& traj);
std::string adjoint_csv(const AdjointArc& arc);

/// Writes through a temporary file in the same directory and renames it.
void write_atomic(const std::filesystem::path& file, const std::string& contents);
/// Pretty-printed JSON with a trailing newline.
std::string dump(const json& doc);

json to_json(const A1Report& r);
json to_json(const ProblemCheck& r);
json to_json(const MuEstimate& r);
json to_json(const ConvergenceReport& r);
json to_json(const DiagnosticsReport& r);
json to_json(const MPReport& r);
json to_json(const ContactTimes& r);
json to_json(const SwitchOptimum& r);
json to_json(const BangBangReport& r);
json to_json(const ArcCheck& r);
json to_json(const SignPattern& r);
json trajectory_summary(const Problem& problem, const Trajectory& traj);

}  // namespace sweepmp
