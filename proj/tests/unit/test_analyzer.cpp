#include <cmath>

#include "codriver/analyzer.hpp"
#include "codriver/behavior_tree.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace codriver;
using namespace codriver::analyzer;

namespace {

SceneFrame frame(std::uint64_t id, SceneLabels truth = {Weather::clear, Light::bright,
                                                       Locality::highway, Surface::dry,
                                                       Distance::safe}) {
  return SceneFrame{id, 0.1 * static_cast<double>(id), truth, std::nullopt};
}

const policy::PolicyTable& table() {
  static const auto t = policy::PolicyTable::shipped_default();
  return t;
}

}  // namespace

TEST_CASE("zero error rate reproduces the truth") {
  AnalyzerConfig cfg;
  std::mt19937_64 g(1);
  for (std::uint64_t id = 0; id < 500; ++id) {
    auto f = frame(id, testing::random_labels(g));
    CHECK(mock_estimate(f, cfg).labels == f.truth);
    auto ins = bt::directive_from_tree(bt::parse(mock_analyze(f, cfg, table())));
    CHECK(ins.labels == f.truth);
    CHECK(ins.directive == policy::lookup(f.truth, table()));
  }
}

TEST_CASE("forced weather error never emits the true label") {
  AnalyzerConfig cfg;
  cfg.error_rate[static_cast<int>(Category::weather)] = 1.0;
  int rainy = 0;
  for (std::uint64_t id = 0; id < 2000; ++id) {
    auto e = mock_estimate(frame(id), cfg);
    CHECK(e.labels.weather != Weather::clear);
    rainy += e.labels.weather == Weather::rainy;
    CHECK(e.labels.light == Light::bright);
  }
  // Wrong labels are spread over both alternatives.
  CHECK(rainy > 850);
  CHECK(rainy < 1150);
}

TEST_CASE("per-category accuracy at 5% error, seed 42") {
  AnalyzerConfig cfg;
  cfg.set_all_error_rates(0.05);
  cfg.rng_seed = 42;
  std::array<int, 5> correct{};
  std::mt19937_64 g(42);
  const int n = 10000;
  for (int id = 0; id < n; ++id) {
    auto f = frame(static_cast<std::uint64_t>(id), testing::random_labels(g));
    auto e = mock_estimate(f, cfg);
    for (Category c : kCategories) {
      correct[static_cast<int>(c)] += label_index(e.labels, c) == label_index(f.truth, c);
    }
  }
  for (int c = 0; c < 5; ++c) {
    const double acc = correct[c] / static_cast<double>(n);
    CHECK(acc >= 0.935);
    CHECK(acc <= 0.965);
  }
}

TEST_CASE("mock output is deterministic and order independent") {
  AnalyzerConfig cfg;
  cfg.set_all_error_rates(0.3);
  cfg.rng_seed = 77;
  std::vector<std::string> forward;
  for (std::uint64_t id = 0; id < 100; ++id) forward.push_back(mock_analyze(frame(id), cfg, table()));
  for (std::uint64_t id = 100; id-- > 0;) CHECK(mock_analyze(frame(id), cfg, table()) == forward[id]);
}

TEST_CASE("categories are corrupted independently") {
  AnalyzerConfig a;
  a.set_all_error_rates(0.2);
  a.rng_seed = 5;
  AnalyzerConfig b = a;
  b.error_rate[static_cast<int>(Category::weather)] = 0.9;
  for (std::uint64_t id = 0; id < 1000; ++id) {
    auto ea = mock_estimate(frame(id), a).labels;
    auto eb = mock_estimate(frame(id), b).labels;
    CHECK(ea.light == eb.light);
    CHECK(ea.locality == eb.locality);
    CHECK(ea.surface == eb.surface);
    CHECK(ea.distance == eb.distance);
  }
}

TEST_CASE("config validation") {
  AnalyzerConfig cfg;
  cfg.error_rate[0] = 1.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.error_rate[0] = 0.1;
  cfg.response_latency = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.response_latency = INFINITY;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
}

TEST_CASE("config json") {
  auto c = AnalyzerConfig::from_json({{"error_rate", {{"weather", 0.1}, {"light", 0.2}}},
                                      {"seed", 3},
                                      {"response_latency", 0.25}});
  CHECK(c.error_rate_for(Category::weather) == 0.1);
  CHECK(c.error_rate_for(Category::light) == 0.2);
  CHECK(c.error_rate_for(Category::distance) == 0.0);
  CHECK(c.rng_seed == 3);
  CHECK(AnalyzerConfig::from_json(c.to_json()).to_json() == c.to_json());
  CHECK(AnalyzerConfig::from_json({{"error_rate", 0.05}}).error_rate_for(Category::surface) == 0.05);
  CHECK_THROWS_AS(AnalyzerConfig::from_json({{"error_rate", {{"colour", 0.1}}}}), ConfigError);
}

TEST_CASE("system prompt") {
  const auto p = build_system_prompt("deliver cargo", "Town04 gate");
  CHECK(p.find("deliver cargo") != std::string::npos);
  CHECK(p.find("Town04 gate") != std::string::npos);
  CHECK(p.find("root {") != std::string::npos);
  CHECK(p == build_system_prompt("deliver cargo", "Town04 gate"));
  const auto empty = build_system_prompt("", "");
  CHECK(empty.find("root {") != std::string::npos);
  for (Category c : kCategories) {
    for (int i = 0; i < label_count(c); ++i) {
      CHECK(empty.find(std::string(label_name(c, i))) != std::string::npos);
    }
  }
}

TEST_CASE("mock frame analyzer delivers after the response latency") {
  AnalyzerConfig cfg;
  cfg.response_latency = 0.2;
  MockFrameAnalyzer a(cfg, table());
  a.submit(frame(0));  // t = 0
  a.submit(frame(1));  // t = 0.1
  CHECK(a.collect(0.19).empty());
  auto first = a.collect(0.2);
  REQUIRE(first.size() == 1);
  CHECK(first[0].frame_id == 0);
  CHECK(first[0].text.has_value());
  CHECK(a.collect(0.3).size() == 1);
  CHECK_THROWS_AS(a.submit(frame(1)), Error);
}
