#include "codriver/scenario.hpp"

#include <fstream>

namespace codriver::sim {

using nlohmann::json;

Scenario scenario_from_json(const json& j, const std::filesystem::path& base_dir) {
  if (!j.is_object()) throw ConfigError("scenario must be a JSON object");
  if (!j.contains("route")) throw ConfigError("scenario needs a 'route'");
  Scenario s;
  try {
    s.route = Route::from_json(j.at("route"));
    if (j.contains("sim")) s.sim = SimConfig::from_json(j.at("sim"));
    if (j.contains("analyzer")) s.analyzer = analyzer::AnalyzerConfig::from_json(j.at("analyzer"));
    if (j.contains("agent")) {
      auto agent = parse_agent(j.at("agent").get<std::string>());
      if (!agent) throw ConfigError("unknown agent '" + j.at("agent").get<std::string>() + "'");
      s.agent = *agent;
    }
    s.label = j.value("label", condition_label(s.route.segments.front().conditions));
    if (j.contains("policy")) {
      const json& p = j.at("policy");
      s.policy = p.is_string() ? policy::PolicyTable::load(base_dir / p.get<std::string>())
                               : policy::PolicyTable::from_json(p);
    }
    if (j.contains("analysis_latency")) {
      const json& l = j.at("analysis_latency");
      s.analysis_latency = {l.value("fixed", 0.0), l.value("jitter_std", 0.0),
                            l.value("seed", std::uint64_t{0})};
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("scenario: ") + e.what());
  } catch (const policy::PolicyError& e) {
    throw ConfigError(std::string("scenario policy: ") + e.what());
  }
  return s;
}

Scenario load_scenario(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open scenario " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("scenario " + path.string() + " is not valid JSON");
  return scenario_from_json(j, path.parent_path());
}

json Scenario::to_json() const {
  return {{"route", route.to_json()},
          {"sim", sim.to_json()},
          {"analyzer", analyzer.to_json()},
          {"agent", std::string(to_string(agent))},
          {"label", label},
          {"policy", policy.to_json()},
          {"analysis_latency",
           {{"fixed", analysis_latency.fixed},
            {"jitter_std", analysis_latency.jitter_std},
            {"seed", analysis_latency.seed}}}};
}

Route with_uniform_conditions(const Route& route, const ScenarioConditions& conditions) {
  Route out = route;
  for (Segment& s : out.segments) s.conditions = conditions;
  return out;
}

}  // namespace codriver::sim
