#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include "helpers.hpp"
#include "sweepmp/errors.hpp"
#include "sweepmp/io.hpp"

using namespace sweepmp;
using testing::vec;

namespace {

json wall_doc() {
  std::ifstream in(testing::fixture("wall_1d"));
  return json::parse(in);
}

std::string pointer_of(const json& doc) {
  try {
    parse_problem(doc);
  } catch (const Error& e) {
    return e.pointer();
  }
  return "<no error>";
}

}  // namespace

TEST_CASE("every fixture parses") {
  for (const char* name : {"wall_1d", "moving_wall", "obtuse_corner", "interior", "two_sphere"}) {
    CAPTURE(name);
    CHECK_NOTHROW(testing::load(name));
  }
  const ProblemFile w = testing::load("wall_1d");
  CHECK(w.gammas == std::vector<double>{25, 50, 100, 200, 400});
  CHECK(w.tolerance == 0.02);
  CHECK_FALSE(w.eta_sampled);
  CHECK(testing::load("interior").eta_sampled);
  CHECK(testing::load("two_sphere").two_sphere.has_value());
}

TEST_CASE("schema errors carry the JSON pointer") {
  json d = wall_doc();
  d["extra"] = 1;
  CHECK(pointer_of(d) == "/extra");
  d = wall_doc();
  d.erase("horizon");
  CHECK(pointer_of(d) == "/horizon");
  d = wall_doc();
  d["constraints"][0] = "x1 - y";
  CHECK(pointer_of(d) == "/constraints/0");
  d = wall_doc();
  d["a1"]["beta"] = "big";
  CHECK(pointer_of(d) == "/a1/beta");
  d = wall_doc();
  d["n"] = 9;
  CHECK(pointer_of(d) == "/n");
  d = wall_doc();
  d["initial_set"] = {{"cube", 1}};
  CHECK(pointer_of(d) == "/initial_set");
  d = wall_doc();
  d["dynamics"] = json::array({"1", "2"});
  CHECK(pointer_of(d) == "/dynamics");
}

TEST_CASE("unreadable files") {
  const auto dir = std::filesystem::temp_directory_path() / "sweepmp_io_test";
  std::filesystem::create_directories(dir);
  const auto bad = dir / "bad.json";
  std::ofstream(bad) << "{ not json";
  CHECK_THROWS_AS(load_problem(bad), SchemaError);
  CHECK_THROWS(load_problem(dir / "missing.json"));
  std::filesystem::remove_all(dir);
}

TEST_CASE("formatting and CSV layout") {
  CHECK(format_double(0.1) == "0.10000000000000001");
  CHECK(format_double(std::numeric_limits<double>::quiet_NaN()) == "nan");
  CHECK(format_double(-std::numeric_limits<double>::infinity()) == "-inf");
  CHECK(std::stod(format_double(M_PI)) == M_PI);

  Trajectory tr;
  tr.t = {0.0, 1.0};
  tr.x = {vec({0.0, 1.0}), vec({2.0, 3.0})};
  tr.u = {vec({1.0}), vec({1.0})};
  tr.xi = {{0.0}, {0.5}};
  const std::string csv = trajectory_csv(tr);
  std::istringstream lines(csv);
  std::string header;
  std::getline(lines, header);
  CHECK(header == "t,x1,x2,u1,xi1");
  std::string row;
  std::getline(lines, row);
  std::getline(lines, row);
  CHECK(row == "1,2,3,1,0.5");
}

TEST_CASE("atomic writes and JSON dumps") {
  const auto dir = std::filesystem::temp_directory_path() / "sweepmp_io_atomic" / "nested";
  std::filesystem::remove_all(dir.parent_path());
  write_atomic(dir / "a.json", dump(json{{"k", 1}}));
  std::ifstream in(dir / "a.json");
  std::stringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str() == "{\n  \"k\": 1\n}\n");
  std::size_t files = 0;
  for (const auto& e : std::filesystem::directory_iterator(dir)) (void)e, ++files;
  CHECK(files == 1);
  std::filesystem::remove_all(dir.parent_path());
}

TEST_CASE("report serialization") {
  MPReport r;
  r.pT = vec({1.0});
  r.conditions.push_back({"dynamics", 1e-9, 1e-6, true});
  r.verdict = true;
  const json j = to_json(r);
  CHECK(j.at("verdict") == true);
  CHECK(j.at("conditions").size() == 1);
  ContactTimes c;
  c.t1 = 0.5;
  const json cj = to_json(c);
  CHECK(cj.at("t1") == 0.5);
  CHECK(cj.at("t2").is_null());
}

TEST_CASE("dimension and variable errors from the problem file") {
  json d = testing::load_problem_doc("two_sphere");
  d["dynamics"] = json::array({"0.05*x2", "u1"});
  CHECK_THROWS_AS(parse_problem(d), DimensionMismatch);
  d = testing::load_problem_doc("two_sphere");
  d["constraints"][1] = "x1^2 + x4 - 1";
  CHECK_THROWS_AS(parse_problem(d), UnknownVariable);
  CHECK(pointer_of(d) == "/constraints/1");
}
