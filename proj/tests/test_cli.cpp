#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <sstream>

#include "ccity/cli.hpp"
#include "ccity/datagen.hpp"
#include "doctest.h"
#include "json.hpp"
#include "support.hpp"

using namespace ccity;
namespace fs = std::filesystem;

namespace {

int sh(const std::string& args, const fs::path& out = "/dev/null") {
  const std::string cmd = std::string(CCITY_BIN) + " " + args + " >" + out.string() + " 2>/dev/null";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

std::string q(const fs::path& p) { return "'" + p.string() + "'"; }

std::string gen_args(const fs::path& out, int workers) {
  return "gen --mode toy --cars 6 --causal-frac 1 --counts 6,2,2 --seed 9 --workers " +
         std::to_string(workers) + " --out " + q(out);
}

}  // namespace

TEST_CASE("exit codes") {
  ccity::testing::TempDir dir;
  CHECK(sh("--help") == cli::kExitOk);
  CHECK(sh("gen --bogus") == cli::kExitUsage);
  CHECK(sh("") == cli::kExitUsage);
  CHECK(sh("discover --threshold 1 --calibrate --dataset " + q(dir.path())) == cli::kExitUsage);
  CHECK(sh("sim " + q(dir.path() / "missing.json")) == cli::kExitIo);
  CHECK(sh("discover --dataset " + q(dir.path() / "nope")) == cli::kExitIo);

  write_text_file(dir.path() / "bad.json", R"({"schema_version":1,"scenario_id":"x","mode":"toy",
    "vehicles":[{"id":"a","spawn_spline":"nowhere"}]})");
  CHECK(sh("sim " + q(dir.path() / "bad.json")) == cli::kExitValidation);
  write_text_file(dir.path() / "broken.json", "{");
  CHECK(sh("sim " + q(dir.path() / "broken.json")) == cli::kExitValidation);
  CHECK(sh("gen --cars 0 --out " + q(dir.path() / "g")) == cli::kExitValidation);

  const char* argv[] = {"ccity", "gen", "--bogus"};
  CHECK(cli::run(3, argv) == cli::kExitUsage);
}

TEST_CASE("sim is reproducible and matches the library") {
  ccity::testing::TempDir dir;
  const auto scen = dir.path() / "s.scenario.json";
  write_text_file(scen, R"({"schema_version":1,"scenario_id":"x","mode":"agency","seed":3,
    "vehicles":[{"id":"a","spawn_spline":"h1_1_E0","actions":["left"]},
                {"id":"b","spawn_spline":"h1_1_E0","spawn_offset":30,"actions":["left"]}],
    "causal_edges":[["b","a"]]})");
  REQUIRE(sh("sim " + q(scen), dir.path() / "one.jsonl") == 0);
  REQUIRE(sh("sim " + q(scen) + " --out " + q(dir.path() / "two.jsonl")) == 0);
  const auto one = read_text_file(dir.path() / "one.jsonl");
  CHECK(one == read_text_file(dir.path() / "two.jsonl"));
  const auto cfg = parse_scenario(read_text_file(scen));
  CHECK(one == serialize_log(run(cfg, build_grid(cfg.network))));
}

TEST_CASE("gen, discover, predict and eval end to end") {
  ccity::testing::TempDir dir;
  const auto a = dir.path() / "a";
  const auto b = dir.path() / "b";
  REQUIRE(sh(gen_args(a, 1)) == 0);
  REQUIRE(sh(gen_args(b, 3)) == 0);
  for (const auto& e : fs::recursive_directory_iterator(a)) {
    if (!e.is_regular_file()) continue;
    CHECK(read_text_file(e.path()) == read_text_file(b / fs::relative(e.path(), a)));
  }
  const auto m = read_manifest(a);
  CHECK(m.entries(Split::kTrain).size() == 6);

  REQUIRE(sh("discover --calibrate --dataset " + q(a)) == 0);
  const auto disc = nlohmann::json::parse(read_text_file(a / "discover-test.json"));
  CHECK(disc["summary"]["mean_f1"] == 1.0);
  CHECK(disc["scenarios"].size() == 2);

  REQUIRE(sh("discover --threshold 0 --split val --out " + q(dir.path() / "d0.json") + " --dataset " + q(a)) == 0);
  CHECK(nlohmann::json::parse(read_text_file(dir.path() / "d0.json"))["summary"]["mean_f1"] == 0.0);

  for (const char* method : {"cv", "graph"}) {
    const auto pred = dir.path() / (std::string(method) + ".json");
    REQUIRE(sh(std::string("predict --method ") + method + " --dataset " + q(a) + " --out " + q(pred)) == 0);
    const auto doc = nlohmann::json::parse(read_text_file(pred));
    CHECK(doc["method"] == method);
    CHECK(doc["horizon"] == 20);
    const auto csv = dir.path() / (std::string(method) + ".csv");
    REQUIRE(sh("eval --pred " + q(pred) + " --truth " + q(a) + " --out " + q(csv)) == 0);
    std::istringstream lines(read_text_file(csv));
    std::string line;
    std::getline(lines, line);
    CHECK(line == "metric,horizon,value,stderr");
    int mse_rows = 0;
    while (std::getline(lines, line)) mse_rows += line.rfind("mse,", 0) == 0 ? 1 : 0;
    CHECK(mse_rows == 20);
  }
  REQUIRE(sh("eval --pred " + q(dir.path() / "graph.json") + " --truth " + q(a) + " --out " +
             q(dir.path() / "r.json")) == 0);
  const auto report = nlohmann::json::parse(read_text_file(dir.path() / "r.json"));
  CHECK(report["mse_per_horizon"].size() == 20);

  CHECK(sh("predict --method bogus --dataset " + q(a)) != 0);
}

TEST_CASE("network-dump") {
  ccity::testing::TempDir dir;
  REQUIRE(sh("network-dump --rows 2 --cols 3", dir.path() / "net.json") == 0);
  CHECK(read_text_file(dir.path() / "net.json") ==
        network_to_json(build_grid(2, 3, 100, 3)) + "\n");
  CHECK(sh("network-dump --rows 1") == cli::kExitValidation);
}
