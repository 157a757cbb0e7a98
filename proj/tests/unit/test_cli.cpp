#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "doctest.h"
#include "sipred/cli.hpp"
#include "sipred/solution_io.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result cli(std::vector<std::string> args) {
  args.insert(args.begin(), "sipred");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  const int code = sipred::cli::main(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream is(p, std::ios::binary);
  std::stringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

fs::path scratch(const char* name) {
  const fs::path d = fs::temp_directory_path() / "sipred_cli_test" / name;
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

}  // namespace

TEST_CASE("missing problem file") {
  const Result r = cli({"solve", "missing.json"});
  CHECK(r.code == 1);
  CHECK(r.err.find("MISSING_FILE") != std::string::npos);
}

TEST_CASE("bad flags") {
  CHECK(cli({"solve"}).code == 1);
  CHECK(cli({"solve", "x.json", "--no-such-flag"}).code == 1);
  CHECK(cli({"frobnicate"}).code == 1);
  const fs::path d = scratch("badflag");
  REQUIRE(cli({"example", "saturation", (d / "p.json").string()}).code == 0);
  const Result r = cli({"validate", (d / "p.json").string(), (d / "s.json").string(), "--samples", "0"});
  CHECK(r.code == 1);
  CHECK(r.err.find("BAD_FLAG") != std::string::npos);
}

TEST_CASE("unknown example") {
  const fs::path d = scratch("unknown");
  CHECK(cli({"example", "unknown", (d / "x.json").string()}).code == 1);
  CHECK(cli({"oracle", "unknown"}).code == 1);
}

TEST_CASE("example then solve round trip, deterministic outputs") {
  const fs::path d = scratch("roundtrip");
  const std::string prob = (d / "estimation.json").string();
  REQUIRE(cli({"example", "estimation", prob}).code == 0);
  const Result a = cli({"solve", prob, "--seed", "3", "--out-dir", (d / "a").string()});
  const Result b = cli({"solve", prob, "--seed", "3", "--out-dir", (d / "b").string()});
  CHECK(a.code == 0);
  CHECK(b.code == 0);
  CHECK(a.out.find("status=Optimal") != std::string::npos);
  CHECK(slurp(d / "a" / "solution.json") == slurp(d / "b" / "solution.json"));
  CHECK(slurp(d / "a" / "scenarios.json") == slurp(d / "b" / "scenarios.json"));
  const auto sol = sipred::load_solution(d / "a" / "solution.json");
  CHECK(sol.status == "Optimal");
  CHECK(sol.scenarios.size() == 3);
  std::ifstream log(d / "a" / "iterations.jsonl");
  std::string line;
  int lines = 0;
  while (std::getline(log, line)) {
    ++lines;
    CHECK(line.find("\"wall_ms\"") != std::string::npos);
  }
  CHECK(lines == sol.iterations);
}

TEST_CASE("hand-edited open-loop saturation solution fails validation") {
  const fs::path d = scratch("openloop");
  const std::string prob = (d / "saturation.json").string();
  REQUIRE(cli({"example", "saturation", prob}).code == 0);
  sipred::SolutionFile s;
  s.theta = {0.0};
  s.gamma = 1.1e-7;
  s.status = "Optimal";
  std::ofstream(d / "solution.json") << sipred::solution_to_json(s);
  const Result r = cli({"validate", prob, (d / "solution.json").string(), "--samples", "1000", "--out-dir",
                        (d / "audit").string()});
  CHECK(r.code == 5);
  CHECK(fs::exists(d / "audit" / "audit.json"));
  const Result again = cli({"validate", prob, (d / "solution.json").string(), "--samples", "1000", "--out-dir",
                            (d / "audit2").string()});
  CHECK(slurp(d / "audit" / "audit.json") == slurp(d / "audit2" / "audit.json"));
}

TEST_CASE("scenario budget exit code") {
  const char* ex = std::getenv("SIPRED_PROBLEMS");
  const fs::path d = scratch("budget");
  const std::string prob = ex ? (fs::path(ex) / "obstacle.json").string() : (d / "obstacle.json").string();
  if (!ex) REQUIRE(cli({"example", "obstacle", prob}).code == 0);
  const Result r = cli({"solve", prob, "--max-scenarios", "5", "--out-dir", d.string()});
  CHECK(r.code == 2);
  const auto sol = sipred::load_solution(d / "solution.json");
  CHECK(sol.status == "ScenarioBudgetExceeded");
  CHECK(sol.scenarios.size() <= 5);
}

TEST_CASE("oracle output") {
  const Result r = cli({"oracle", "saturation", "--grid-b", "200", "--grid-w", "200"});
  CHECK(r.code == 0);
  CHECK(r.out.find("b*=") != std::string::npos);
  CHECK(r.out.find("value*=") != std::string::npos);
  CHECK(cli({"oracle", "saturation", "--grid-b", "10"}).code == 1);
  const Result e = cli({"oracle", "estimation", "--grid-w", "3"});
  CHECK(e.code == 0);
}
