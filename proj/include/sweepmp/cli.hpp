#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace sweepmp {

enum class Command { Validate, Simulate, Converge, Adjoint, Certify, Example };

struct RunConfig {
  Command command = Command::Validate;
  std::filesystem::path problem_file;
  std::vector<double> gammas;  // empty: the problem file's schedule
  std::vector<double> sigmas;  // empty: c_margin / gamma
  std::optional<double> dt;    // catching-up step
  std::optional<double> tol;   // convergence tolerance
  std::filesystem::path out_dir = ".";
  std::uint64_t seed = 1;
  std::size_t a1_samples = 100000;
  std::size_t mu_samples = 20000;
};

/// Exit status: 0 when every verdict passes, 1 when a verdict fails, 2 on
/// error (an error.json is written to the output directory).
int run(const RunConfig& config);

/// Parses the command line and calls run(). Usage errors return 2.
int run_main(int argc, char** argv);

}  // namespace sweepmp
