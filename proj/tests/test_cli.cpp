#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "copos/cli.hpp"
#include "copos/io.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Run {
  int code;
  std::string out, err;
};

Run run(std::vector<std::string> args) {
  args.insert(args.begin(), "copos");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = copos::cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("copos_cli_" + std::to_string(::getpid())) / name;
  fs::remove_all(p);
  return p;
}

fs::path write_config(const std::string& name, const std::string& text) {
  const fs::path p = scratch(name + ".json");
  fs::create_directories(p.parent_path());
  std::ofstream(p) << text;
  return p;
}

json read_json(const fs::path& p) {
  std::ifstream in(p);
  return json::parse(in);
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("equilibria subcommand prints and writes the three points") {
  const fs::path out = scratch("eq");
  const Run r = run({"equilibria", "--out", out.string()});
  REQUIRE(r.code == 0);
  CHECK(r.out.find("saddle") != std::string::npos);
  const json j = read_json(out / "equilibria.json");
  CHECK(j["equilibria"].size() == 3);
  CHECK(j.contains("generated_at"));
}

TEST_CASE("configuration errors exit with 2 and write nothing") {
  const fs::path out = scratch("bad");
  const fs::path cfg = write_config("bad", R"({"fuzzy": {"mode": "endpoint", "bogus": 1}})");
  const Run r = run({"synthesize", "--config", cfg.string(), "--out", out.string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("/fuzzy/bogus") != std::string::npos);
  CHECK_FALSE(fs::exists(out));

  CHECK(run({"equilibria", "--config", "/nonexistent/copos.json", "--out", out.string()}).code == 2);
  const fs::path typed = write_config("typed", R"({"params": {"delta": "high"}})");
  CHECK(run({"equilibria", "--config", typed.string(), "--out", out.string()}).code == 2);
  CHECK(run({"equilibria", "--preset", "nope", "--out", out.string()}).code == 2);
  CHECK(run({"frobnicate"}).code == 2);
  CHECK(run({"synthesize", "--mode", "sideways", "--out", out.string()}).code == 2);
  CHECK_FALSE(fs::exists(out));
}

TEST_CASE("a different death rate is analysis, not failure") {
  const fs::path cfg = write_config("delta", R"({"params": {"delta": 2.0}})");
  const Run r = run({"equilibria", "--config", cfg.string(), "--out", scratch("delta").string()});
  CHECK(r.code == 0);
}

TEST_CASE("degenerate sectors exit with 3") {
  const fs::path cfg = write_config("degenerate", R"({"domain": {"x1_min": 5, "x1_max": 5}})");
  CHECK(run({"fuzzify", "--config", cfg.string(), "--out", scratch("deg").string()}).code == 3);
}

TEST_CASE("fuzzify exports vertex systems") {
  const fs::path out = scratch("fz");
  REQUIRE(run({"fuzzify", "--out", out.string(), "--no-timestamp"}).code == 0);
  const json j = read_json(out / "vertices.json");
  CHECK_FALSE(j.contains("generated_at"));
  CHECK(j["continuous"]["A"].size() == 8);
  CHECK(j["augmented_discrete"]["A"][0].size() == 4);
  CHECK(j["augmented_discrete"]["T"].get<double>() == copos::io::kDefaultSamplingPeriod);
  CHECK(j["continuous"]["bounds"]["mode"] == "endpoint");
  CHECK(run({"fuzzify", "--mode", "global", "--out", out.string()}).code == 0);
  CHECK(read_json(out / "vertices.json")["continuous"]["bounds"]["mode"] == "global");
}

TEST_CASE("synthesize: defaults verify, strict mode and coarse T are infeasible") {
  const fs::path out = scratch("syn");
  const Run ok = run({"synthesize", "--out", out.string(), "--dump-lp"});
  REQUIRE(ok.code == 0);
  CHECK(ok.out.find("FAIL") == std::string::npos);
  const json j = read_json(out / "synthesis.json");
  CHECK(j["report"]["passed"] == true);
  CHECK(j["K"].size() == 8);
  CHECK(j["report"]["pairs"].size() == 64);
  CHECK(fs::file_size(out / "synthesis_lp.txt") > 0);

  CHECK(run({"synthesize", "--strict-paper", "--out", scratch("strict").string()}).code == 4);
  CHECK(run({"synthesize", "--T", "1.0", "--out", scratch("coarse").string()}).code == 4);
}

TEST_CASE("simulate writes one CSV and one metrics file per scenario") {
  const fs::path out = scratch("sim");
  const fs::path cfg = write_config("short", R"({
    "simulation": {
      "record_interval": 0.01,
      "scenarios": [
        {"name": "a", "therapy": "combined", "duration": 0.5},
        {"name": "b", "therapy": "none", "duration": 0.5, "plant": "discrete-euler"}
      ]
    }
  })");
  const Run r = run({"simulate", "--config", cfg.string(), "--out", out.string(), "--no-timestamp"});
  REQUIRE(r.code == 0);
  for (const char* name : {"a", "b"}) {
    const std::string csv = slurp(out / (std::string(name) + ".csv"));
    CHECK(csv.rfind("t,x1,x2,eI1,eI2,u1_raw,u2star_raw,u1,u2,h1,h2,h3,h4,h5,h6,h7,h8\n", 0) == 0);
    CHECK(std::count(csv.begin(), csv.end(), '\n') == 52);
    const json m = read_json(out / (std::string(name) + "_metrics.json"));
    CHECK(m.contains("max_tumor"));
    CHECK_FALSE(m.contains("generated_at"));
  }
  const json all = read_json(out / "metrics.json");
  CHECK(all["scenarios"]["b"]["total_chemo_dose"] == 0.0);
  CHECK(all["config"]["simulation"]["scenarios"].size() == 2);
}

TEST_CASE("duplicate scenario names are rejected") {
  const fs::path cfg = write_config("dup", R"({"simulation": {"scenarios": [{"name": "x"}, {"name": "x"}]}})");
  const Run r = run({"simulate", "--config", cfg.string(), "--out", scratch("dup").string()});
  CHECK(r.code == 2);
  CHECK(r.err.find("/simulation/scenarios/1/name") != std::string::npos);
}

TEST_CASE("presets resolve and round-trip through the config parser") {
  const auto cfg = copos::io::preset("reproduce-paper");
  REQUIRE(cfg.scenarios.size() == 4);
  CHECK(cfg.scenarios[0].name == "fig1_none");
  CHECK(cfg.scenarios[3].name == "fig5_combined");
  const auto back = copos::io::parse_config(copos::io::to_json(cfg));
  CHECK(copos::io::to_json(back) == copos::io::to_json(cfg));
}
