#include <filesystem>
#include <fstream>
#include <sstream>

#include <unistd.h>

#include "codriver/cli.hpp"
#include "codriver/mock_server.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace codriver;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "codriver");
  std::ostringstream out;
  std::ostringstream err;
  const int code = cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

fs::path scratch() {
  static const fs::path dir = [] {
    auto d = fs::temp_directory_path() / ("codriver_cli_" + std::to_string(::getpid()));
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string scenario(const std::string& name) {
  return testing::source_dir() + "/scenarios/" + name;
}

// Bundled scenario shortened to `seconds`, written next to the shipped policy file.
std::string short_scenario(const std::string& name, double seconds) {
  std::ifstream in(scenario(name));
  auto j = nlohmann::json::parse(in);
  j["sim"]["duration"] = seconds;
  j["policy"] = scenario("policy_default.json");
  auto path = scratch() / ("short_" + name);
  std::ofstream(path) << j.dump();
  return path.string();
}

std::size_t line_count(const fs::path& p) {
  std::ifstream in(p);
  std::size_t n = 0;
  for (std::string l; std::getline(in, l);) ++n;
  return n;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

}  // namespace

TEST_CASE("run writes the csv and sidecar") {
  auto out = scratch() / "run";
  auto r = invoke({"run", "--scenario", scenario("town_clear_bright.json"), "--agent", "default",
                "--seed", "4", "--out", out.string()});
  REQUIRE(r.code == cli::kOk);
  auto csv = out / "town_clear_bright_default_s4.csv";
  CHECK(line_count(csv) == 1 + 2401);
  auto side = nlohmann::json::parse(slurp(out / "town_clear_bright_default_s4.json"));
  CHECK(side["manifest"]["seed"] == 4);
  CHECK(side["manifest"]["agent"] == "default");
}

TEST_CASE("adaptive run writes label predictions usable by eval accuracy") {
  auto out = scratch() / "adaptive";
  auto path = short_scenario("town_rainy_gloomy.json", 20.0);
  REQUIRE(invoke({"run", "--scenario", path, "--out", out.string()}).code == cli::kOk);
  auto labels = out / "short_town_rainy_gloomy_adaptive_s1_labels.jsonl";
  REQUIRE(fs::exists(labels));
  auto r = invoke({"eval", "accuracy", labels.string()});
  REQUIRE(r.code == cli::kOk);
  auto j = nlohmann::json::parse(r.out);
  CHECK(j["macro_average"].get<double>() > 0.85);
}

TEST_CASE("unknown agent is a config error naming the flag") {
  auto r = invoke({"run", "--scenario", scenario("town_clear_bright.json"), "--agent", "racer"});
  CHECK(r.code == cli::kConfigError);
  CHECK(r.err.find("--agent") != std::string::npos);
}

TEST_CASE("missing scenario and bad flags are config errors") {
  CHECK(invoke({"run", "--scenario", "/nonexistent.json"}).code == cli::kConfigError);
  CHECK(invoke({"run"}).code == cli::kConfigError);
  CHECK(invoke({"frobnicate"}).code == cli::kConfigError);
  CHECK(invoke({"run", "--scenario", scenario("town_clear_bright.json"), "--analyzer", "psychic"})
            .code == cli::kConfigError);
  CHECK(invoke({"run", "--scenario", scenario("town_clear_bright.json"), "--analyzer", "remote"})
            .code == cli::kConfigError);
}

TEST_CASE("remote run against a dead endpoint falls back and succeeds") {
  int port = 0;
  {
    analyzer::MockAnalyzerServer server(analyzer::ServerScript{},
                                        policy::PolicyTable::shipped_default());
    port = server.start();
  }
  const auto url = "http://127.0.0.1:" + std::to_string(port);
  auto path = short_scenario("town_clear_bright.json", 5.0);
  auto out = scratch() / "dead";
  auto r = invoke({"run", "--scenario", path, "--analyzer", "remote", "--endpoint", url,
                "--deadline-ms", "200", "--out", out.string()});
  CHECK(r.code == cli::kOk);
  CHECK(r.err.find("[warning]") != std::string::npos);
  auto side = nlohmann::json::parse(slurp(out / "short_town_clear_bright_adaptive_s1.json"));
  CHECK(side["metadata"]["first_directive_t"].is_null());
  CHECK(side["metadata"]["analyzer_failures"].get<int>() > 40);

  auto budget = invoke({"run", "--scenario", path, "--analyzer", "remote", "--endpoint", url,
                     "--deadline-ms", "200", "--out", out.string(),
                     "--max-analyzer-failures", "3"});
  CHECK(budget.code == cli::kAnalyzerFailure);
}

TEST_CASE("remote run against the oracle server matches the mock run at zero error") {
  analyzer::MockAnalyzerServer server(
      analyzer::ServerScript::load(scenario("mock_oracle.json")),
      policy::PolicyTable::shipped_default());
  server.start();
  auto src = nlohmann::json::parse(slurp(short_scenario("mixed_demo.json", 20.0)));
  src["analyzer"]["error_rate"] = 0.0;
  auto path = scratch() / "mixed_exact.json";
  std::ofstream(path) << src.dump();
  auto remote_dir = scratch() / "oracle_remote";
  auto mock_dir = scratch() / "oracle_mock";
  REQUIRE(invoke({"run", "--scenario", path.string(), "--analyzer", "remote", "--endpoint",
               server.url(), "--out", remote_dir.string()})
              .code == cli::kOk);
  REQUIRE(invoke({"run", "--scenario", path.string(), "--out", mock_dir.string()}).code ==
          cli::kOk);
  CHECK(slurp(remote_dir / "mixed_exact_adaptive_s7.csv") ==
        slurp(mock_dir / "mixed_exact_adaptive_s7.csv"));
}

TEST_CASE("eval smoothness on the fixture matches the golden file") {
  auto csv_out = scratch() / "extrema.csv";
  auto r = invoke({"eval", "smoothness",
                testing::source_dir() + "/tests/fixtures/drive_log_rainy_default.csv", "--csv",
                csv_out.string()});
  REQUIRE(r.code == cli::kOk);
  auto got = nlohmann::json::parse(r.out);
  auto golden = nlohmann::json::parse(
      slurp(testing::source_dir() + "/tests/fixtures/drive_log_rainy_default.golden.json"));
  CHECK(got["extrema_count"] == golden["extrema_count"]);
  CHECK(got["f_dot_t"].get<double>() == doctest::Approx(golden["f_dot_t"].get<double>()));
  CHECK(line_count(csv_out) == 1 + golden["samples"].get<std::size_t>());
}

TEST_CASE("gen-dataset and validate-dataset") {
  auto file = scratch() / "ds.jsonl";
  REQUIRE(invoke({"gen-dataset", "--per-combo", "1", "--seed", "2", "--out", file.string()}).code ==
          cli::kOk);
  CHECK(line_count(file) == 54);
  auto r = invoke({"validate-dataset", file.string()});
  CHECK(r.code == cli::kOk);
  CHECK(nlohmann::json::parse(r.out)["ok"] == true);
  std::ofstream(file, std::ios::app) << "{\"id\": \"broken\"\n";
  CHECK(invoke({"validate-dataset", file.string()}).code == cli::kViolations);
  CHECK(invoke({"gen-dataset", "--per-combo", "0"}).code == cli::kConfigError);
}

TEST_CASE("compare with one seed gives one row per agent") {
  auto csv = scratch() / "compare.csv";
  auto r = invoke({"compare", "--scenario", short_scenario("town_foggy_gloomy.json", 30.0),
                "--seeds", "3", "--out", csv.string()});
  REQUIRE(r.code == cli::kOk);
  CHECK(line_count(csv) == 3);
  CHECK(r.out.find("verdict") != std::string::npos);
}

TEST_CASE("seed ranges") {
  CHECK(cli::parse_seed_range("3") == std::vector<std::uint64_t>{3});
  CHECK(cli::parse_seed_range("1..4") == std::vector<std::uint64_t>{1, 2, 3, 4});
  CHECK_THROWS(cli::parse_seed_range("4..1"));
  CHECK_THROWS(cli::parse_seed_range("a..b"));
  CHECK(invoke({"compare", "--scenario", scenario("town_clear_bright.json"), "--seeds", "x"}).code ==
        cli::kConfigError);
}
