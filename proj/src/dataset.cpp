#include "codriver/dataset.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>
#include <set>

#include "codriver/analyzer.hpp"
#include "codriver/behavior_tree.hpp"
#include "codriver/rng.hpp"

namespace codriver::dataset {

using nlohmann::json;

std::vector<ScenarioConditions> enumerate_grid() {
  std::vector<ScenarioConditions> out;
  out.reserve(kGridSize);
  for (int w = 0; w < 3; ++w) {
    for (int l = 0; l < 3; ++l) {
      for (int loc = 0; loc < 3; ++loc) {
        for (int d = 0; d < 2; ++d) {
          ScenarioConditions c;
          c.weather = static_cast<Weather>(w);
          c.light = static_cast<Light>(l);
          c.locality = static_cast<Locality>(loc);
          c.distance = static_cast<Distance>(d);
          c.surface = c.weather == Weather::rainy ? Surface::wet : Surface::dry;
          out.push_back(c);
        }
      }
    }
  }
  return out;
}

std::optional<std::size_t> grid_index(const ScenarioConditions& c) {
  const Surface expected = c.weather == Weather::rainy ? Surface::wet : Surface::dry;
  if (c.surface != expected) return std::nullopt;
  return ((static_cast<std::size_t>(c.weather) * 3 + static_cast<std::size_t>(c.light)) * 3 +
          static_cast<std::size_t>(c.locality)) *
             2 +
         static_cast<std::size_t>(c.distance);
}

namespace {

constexpr std::array<std::string_view, 4> kMissions = {
    "reach the destination safely", "deliver cargo", "follow the planned route",
    "pick up a passenger"};
constexpr std::array<std::string_view, 4> kDestinations = {
    "Town04 gate", "Town02 station", "the highway exit", "the city center"};

std::string describe(const ScenarioConditions& c, std::size_t variant) {
  const std::string w(to_string(c.weather));
  const std::string l(to_string(c.light));
  const std::string loc(to_string(c.locality));
  const std::string s(to_string(c.surface));
  const std::string d(to_string(c.distance));
  switch (variant % 4) {
    case 0:
      return "Front camera report: " + render_scene_text(c) + ". What should the ego vehicle do?";
    case 1:
      return "Weather is " + w + ", light is " + l + ", we are driving in a " + loc +
             " area on a " + s + " road, and the distance to the obstacle ahead is " + d +
             ". Provide the analysis and the driving suggestion.";
    case 2:
      return "Scene descriptor: " + render_scene_text(c) +
             ". Analyze the environment and suggest control levels.";
    default:
      return "Current view from the ego vehicle: " + w + " weather under " + l + " light on a " +
             s + " " + loc + " road; the gap to the vehicle in front is " + d +
             ". Respond in behavior tree format.";
  }
}

json scene_json(const ScenarioConditions& c) {
  json out = json::object();
  for (Category cat : kCategories) {
    out[std::string(category_name(cat))] = std::string(label_name(cat, label_index(c, cat)));
  }
  return out;
}

std::optional<ScenarioConditions> scene_from_json(const json& j) {
  if (!j.is_object()) return std::nullopt;
  ScenarioConditions c;
  for (Category cat : kCategories) {
    const std::string key(category_name(cat));
    if (!j.contains(key) || !j.at(key).is_string()) return std::nullopt;
    auto idx = parse_label(cat, j.at(key).get<std::string>());
    if (!idx) return std::nullopt;
    set_label_index(c, cat, *idx);
  }
  return c;
}

}  // namespace

json DatasetSample::to_json() const {
  return {{"id", id},
          {"image", image_ref ? json(*image_ref) : json(nullptr)},
          {"scene", scene_json(scene)},
          {"conversations",
           json::array({{{"from", "user"}, {"value", question}},
                        {{"from", "assistant"}, {"value", answer}}})}};
}

void generate(int per_combo, const policy::PolicyTable& table, std::uint64_t seed,
              const std::function<void(const DatasetSample&)>& sink) {
  if (per_combo < 1) throw DatasetError(Errc::invalid_argument, "per_combo must be >= 1");
  const auto grid = enumerate_grid();
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    const ScenarioConditions& scene = grid[cell];
    const bt::Tree tree = bt::make_instruction_tree(scene, policy::lookup(scene, table));
    const std::string answer = bt::serialize(tree);
    try {
      (void)bt::directive_from_tree(tree);
    } catch (const bt::TreeError& e) {
      throw DatasetError(Errc::invalid_policy, std::string("policy answer rejected: ") + e.what());
    }
    for (int k = 0; k < per_combo; ++k) {
      auto g = rng::stream(seed, rng::Domain::dataset, {cell, static_cast<std::uint64_t>(k)});
      const auto pick = [&g](std::size_t n) {
        return std::uniform_int_distribution<std::size_t>(0, n - 1)(g);
      };
      const auto mission = kMissions[pick(kMissions.size())];
      const auto destination = kDestinations[pick(kDestinations.size())];
      const std::size_t variant = pick(4);

      char id[32];
      std::snprintf(id, sizeof id, "c%02zu-%06d", cell, k);
      DatasetSample s;
      s.id = id;
      s.scene = scene;
      s.question = analyzer::build_system_prompt(mission, destination) + "\n" +
                   describe(scene, variant);
      s.answer = answer;
      sink(s);
    }
  }
}

std::vector<DatasetSample> generate(int per_combo, const policy::PolicyTable& table,
                                    std::uint64_t seed) {
  std::vector<DatasetSample> out;
  generate(per_combo, table, seed, [&](const DatasetSample& s) { out.push_back(s); });
  return out;
}

std::size_t write_jsonl(int per_combo, const policy::PolicyTable& table, std::uint64_t seed,
                        std::ostream& out) {
  std::size_t n = 0;
  generate(per_combo, table, seed, [&](const DatasetSample& s) {
    out << s.to_json().dump() << '\n';
    ++n;
  });
  return n;
}

bool ValidationReport::coverage_exact(std::size_t per_combo) const {
  for (std::size_t c : coverage) {
    if (c != per_combo) return false;
  }
  return true;
}

json ValidationReport::to_json() const {
  json v = json::array();
  for (const auto& x : violations) {
    v.push_back({{"line", x.line}, {"kind", x.kind}, {"message", x.message}});
  }
  return {{"records", records}, {"violations", v}, {"coverage", coverage}, {"ok", ok()}};
}

ValidationReport validate(std::istream& in, const policy::PolicyTable& table) {
  ValidationReport report;
  std::set<std::string> ids;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    ++report.records;
    auto flag = [&](std::string kind, std::string msg) {
      report.violations.push_back({lineno, std::move(kind), std::move(msg)});
    };

    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) {
      flag("MalformedRecord", "not a JSON object");
      continue;
    }
    if (!j.contains("id") || !j.at("id").is_string() || !j.contains("conversations") ||
        !j.at("conversations").is_array()) {
      flag("MalformedRecord", "missing id or conversations");
      continue;
    }
    const std::string id = j.at("id").get<std::string>();
    if (!ids.insert(id).second) flag("DuplicateId", "id " + id + " repeats");

    auto scene = j.contains("scene") ? scene_from_json(j.at("scene")) : std::nullopt;
    if (!scene) {
      flag("MalformedRecord", "missing or invalid scene");
      continue;
    }
    auto cell = grid_index(*scene);
    if (!cell) {
      flag("InconsistentScene", "surface disagrees with weather");
      continue;
    }
    const json* answer = nullptr;
    for (const json& turn : j.at("conversations")) {
      if (turn.is_object() && turn.value("from", "") == "assistant" && turn.contains("value") &&
          turn.at("value").is_string()) {
        answer = &turn.at("value");
      }
    }
    if (!answer) {
      flag("MalformedRecord", "no assistant turn");
      continue;
    }
    try {
      const bt::Instruction ins = bt::directive_from_tree(bt::parse(answer->get<std::string>()));
      if (!(ins.labels == *scene)) {
        flag("LabelMismatch", "answer labels differ from the scene");
      } else if (!(ins.directive == policy::lookup(*scene, table))) {
        flag("PolicyMismatch", "answer directive differs from the policy lookup");
      } else {
        ++report.coverage[*cell];
      }
    } catch (const bt::TreeError& e) {
      flag(std::string(bt::to_string(e.code())), e.what());
    }
  }
  return report;
}

ValidationReport validate_file(const std::filesystem::path& path,
                               const policy::PolicyTable& table) {
  std::ifstream in(path);
  if (!in) throw DatasetError(Errc::io_error, "cannot read " + path.string());
  return validate(in, table);
}

}  // namespace codriver::dataset
