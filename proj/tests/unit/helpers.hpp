#pragma once

#include <filesystem>
#include <fstream>
#include <string>

#include "sweepmp/io.hpp"

namespace testing {

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(SWEEPMP_SOURCE_DIR) / "fixtures" / (name + ".json");
}

inline nlohmann::json load_problem_doc(const std::string& name) {
  std::ifstream in(fixture(name));
  return nlohmann::json::parse(in);
}

inline sweepmp::ProblemFile load(const std::string& name) { return sweepmp::load_problem(fixture(name)); }

inline sweepmp::Vec vec(std::initializer_list<double> v) {
  sweepmp::Vec out(static_cast<Eigen::Index>(v.size()));
  Eigen::Index i = 0;
  for (double x : v) out[i++] = x;
  return out;
}

}  // namespace testing
