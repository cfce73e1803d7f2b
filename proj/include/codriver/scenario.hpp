#pragma once

#include <filesystem>
#include <string>

#include "codriver/analyzer.hpp"
#include "codriver/policy.hpp"
#include "codriver/pubsub.hpp"
#include "codriver/sim.hpp"
#include "json.hpp"

namespace codriver::sim {

/// Everything needed to reproduce a run.
///
/// File layout:
///   {"route": {...}, "sim": {...}, "analyzer": {...}, "agent": "adaptive",
///    "label": "rainy+gloomy", "policy": "table.json" | {...},
///    "analysis_latency": {"fixed": s, "jitter_std": s, "seed": n}}
/// A relative policy path resolves against the scenario file's directory.
struct Scenario {
  Route route;
  SimConfig sim;
  analyzer::AnalyzerConfig analyzer;
  AgentKind agent = AgentKind::adaptive;
  policy::PolicyTable policy = policy::PolicyTable::shipped_default();
  std::string label;
  pubsub::LatencyModel analysis_latency;

  nlohmann::json to_json() const;
};

Scenario scenario_from_json(const nlohmann::json& j, const std::filesystem::path& base_dir = {});
Scenario load_scenario(const std::filesystem::path& path);

/// Copy with every condition segment replaced by `conditions`.
Route with_uniform_conditions(const Route& route, const ScenarioConditions& conditions);

}  // namespace codriver::sim
