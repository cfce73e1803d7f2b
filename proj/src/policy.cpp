#include "codriver/policy.hpp"

#include <algorithm>
#include <fstream>

namespace codriver::policy {

using nlohmann::json;

bool Clause::matches(const SceneLabels& labels) const {
  for (Category c : kCategories) {
    const auto& accepted = allowed[static_cast<int>(c)];
    if (accepted.empty()) continue;
    if (std::find(accepted.begin(), accepted.end(), label_index(labels, c)) == accepted.end()) {
      return false;
    }
  }
  return true;
}

bool Trigger::fires(const SceneLabels& labels) const {
  return std::any_of(clauses.begin(), clauses.end(),
                     [&](const Clause& c) { return c.matches(labels); });
}

PolicyTable::PolicyTable(std::vector<Row> rows) {
  std::array<bool, 4> seen{};
  for (Row& r : rows) {
    const int tier = static_cast<int>(r.directive.control_type);
    if (seen[tier]) {
      throw PolicyError("duplicate tier '" + std::string(to_string(r.directive.control_type)) +
                        "'");
    }
    if (auto bad = directive_violation(r.directive)) {
      throw PolicyError("tier '" + std::string(to_string(r.directive.control_type)) +
                        "': " + *bad + " out of range");
    }
    seen[tier] = true;
    rows_[tier] = std::move(r);
  }
  for (ControlType t : kControlTypes) {
    if (!seen[static_cast<int>(t)]) {
      throw PolicyError("missing tier '" + std::string(to_string(t)) + "'");
    }
  }
  for (std::size_t i = 1; i < rows_.size(); ++i) {
    const auto& milder = rows_[i - 1].directive;
    const auto& harsher = rows_[i].directive;
    if (!(harsher.max_speed < milder.max_speed)) {
      throw PolicyError("max_speed must strictly decrease with severity at tier '" +
                        std::string(to_string(harsher.control_type)) + "'");
    }
    if (harsher.max_acceleration > milder.max_acceleration) {
      throw PolicyError("max_acceleration must not increase with severity at tier '" +
                        std::string(to_string(harsher.control_type)) + "'");
    }
  }
}

namespace {

Clause clause(std::initializer_list<std::pair<Category, std::vector<int>>> parts) {
  Clause c;
  for (const auto& [cat, labels] : parts) c.allowed[static_cast<int>(cat)] = labels;
  return c;
}

constexpr int idx(auto e) { return static_cast<int>(e); }

Clause clause_from_json(const json& j) {
  if (!j.is_object()) throw PolicyError("trigger clause must be an object");
  Clause c;
  for (const auto& [field, value] : j.items()) {
    auto cat = parse_category(field);
    if (!cat) throw PolicyError("unknown trigger field '" + field + "'");
    auto& accepted = c.allowed[static_cast<int>(*cat)];
    const json values = value.is_array() ? value : json::array({value});
    if (values.empty()) throw PolicyError("empty label list for '" + field + "'");
    for (const auto& v : values) {
      if (!v.is_string()) throw PolicyError("trigger labels must be strings");
      auto label = parse_label(*cat, v.get<std::string>());
      if (!label) {
        throw PolicyError("unknown label '" + v.get<std::string>() + "' for '" + field + "'");
      }
      accepted.push_back(*label);
    }
  }
  return c;
}

json clause_to_json(const Clause& c) {
  json out = json::object();
  for (Category cat : kCategories) {
    const auto& accepted = c.allowed[static_cast<int>(cat)];
    if (accepted.empty()) continue;
    json labels = json::array();
    for (int l : accepted) labels.push_back(std::string(label_name(cat, l)));
    out[std::string(category_name(cat))] = labels.size() == 1 ? labels[0] : labels;
  }
  return out;
}

double number_at(const json& row, const char* key) {
  if (!row.contains(key) || !row.at(key).is_number()) {
    throw PolicyError(std::string("tier row needs numeric '") + key + "'");
  }
  return row.at(key).get<double>();
}

}  // namespace

PolicyTable PolicyTable::shipped_default() {
  using C = Category;
  std::vector<Row> rows;
  rows.push_back({Trigger{{clause({{C::weather, {idx(Weather::clear)}},
                                   {C::light, {idx(Light::bright)}},
                                   {C::distance, {idx(Distance::safe)}},
                                   {C::locality, {idx(Locality::highway)}}})}},
                  {ControlType::sport, 90.0, 1.0, 0.85, 3.0, 0.9}});
  rows.push_back({Trigger{{clause({{C::weather, {idx(Weather::clear)}},
                                   {C::light, {idx(Light::bright)}},
                                   {C::distance, {idx(Distance::safe)}},
                                   {C::locality, {idx(Locality::city), idx(Locality::town)}}})}},
                  {ControlType::normal, 70.0, 0.9, 0.75, 2.5, 0.8}});
  rows.push_back({Trigger{{clause({{C::weather, {idx(Weather::rainy)}}}),
                           clause({{C::light, {idx(Light::gloomy)}}}),
                           clause({{C::surface, {idx(Surface::wet)}}})}},
                  {ControlType::cautious, 60.0, 0.7, 0.6, 2.0, 0.6}});
  rows.push_back({Trigger{{clause({{C::weather, {idx(Weather::foggy)}}}),
                           clause({{C::light, {idx(Light::dark)}}}),
                           clause({{C::distance, {idx(Distance::unsafe)}}})}},
                  {ControlType::defensive, 40.0, 0.6, 0.5, 1.5, 0.5}});
  return PolicyTable(std::move(rows));
}

PolicyTable PolicyTable::from_json(const json& j) {
  if (!j.is_object() || !j.contains("tiers") || !j.at("tiers").is_array()) {
    throw PolicyError("policy table needs a 'tiers' array");
  }
  std::vector<Row> rows;
  for (const json& r : j.at("tiers")) {
    if (!r.is_object() || !r.contains("tier") || !r.at("tier").is_string()) {
      throw PolicyError("tier row needs a 'tier' name");
    }
    auto tier = parse_control_type(r.at("tier").get<std::string>());
    if (!tier) throw PolicyError("unknown tier '" + r.at("tier").get<std::string>() + "'");
    Row row;
    if (r.contains("trigger")) {
      const json& t = r.at("trigger");
      if (t.is_array()) {
        for (const json& c : t) row.trigger.clauses.push_back(clause_from_json(c));
      } else {
        row.trigger.clauses.push_back(clause_from_json(t));
      }
    }
    row.directive = {*tier,
                     number_at(r, "max_speed"),
                     number_at(r, "max_brake"),
                     number_at(r, "max_throttle"),
                     number_at(r, "max_acceleration"),
                     number_at(r, "max_steering_speed")};
    rows.push_back(std::move(row));
  }
  return PolicyTable(std::move(rows));
}

PolicyTable PolicyTable::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw PolicyError("cannot open policy table " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw PolicyError("policy table " + path.string() + ": " + e.what());
  }
  return from_json(j);
}

json PolicyTable::to_json() const {
  json tiers = json::array();
  for (const Row& r : rows_) {
    json trigger = json::array();
    for (const Clause& c : r.trigger.clauses) trigger.push_back(clause_to_json(c));
    const auto& d = r.directive;
    tiers.push_back({{"tier", std::string(to_string(d.control_type))},
                     {"trigger", trigger},
                     {"max_speed", d.max_speed},
                     {"max_brake", d.max_brake},
                     {"max_throttle", d.max_throttle},
                     {"max_acceleration", d.max_acceleration},
                     {"max_steering_speed", d.max_steering_speed}});
  }
  return {{"tiers", tiers}};
}

BehaviorDirective lookup(const SceneLabels& labels, const PolicyTable& table) {
  for (auto it = kControlTypes.rbegin(); it != kControlTypes.rend(); ++it) {
    const Row& r = table.row(*it);
    if (r.trigger.fires(labels)) return r.directive;
  }
  return table.defensive();
}

FallbackOutput fallback_step(const FallbackState& state, double dt,
                             const std::optional<BehaviorDirective>& fresh,
                             const BehaviorDirective& defensive) {
  FallbackOutput out{state, defensive, false};
  if (fresh) {
    out.state.current = fresh;
    out.state.since_fresh = 0.0;
    out.directive = *fresh;
    return out;
  }
  out.state.since_fresh += dt;
  // Tolerance absorbs the rounding of summed steps, so G/dt steps are held exactly.
  if (out.state.current && out.state.since_fresh <= out.state.grace_window + 1e-9) {
    out.directive = *out.state.current;
  } else {
    out.fallback_active = true;
  }
  return out;
}

LabelVoteFilter::LabelVoteFilter(std::size_t window) : window_(window) {
  if (window_ == 0) throw PolicyError("vote window must be at least 1");
}

SceneLabels LabelVoteFilter::push(const SceneLabels& labels) {
  history_.push_back(labels);
  if (history_.size() > window_) history_.pop_front();

  SceneLabels voted;
  for (Category c : kCategories) {
    std::array<int, 3> count{};
    std::array<std::size_t, 3> last_seen{};
    for (std::size_t i = 0; i < history_.size(); ++i) {
      const int l = label_index(history_[i], c);
      ++count[l];
      last_seen[l] = i;
    }
    int best = label_index(labels, c);
    for (int l = 0; l < label_count(c); ++l) {
      if (count[l] > count[best] || (count[l] == count[best] && last_seen[l] > last_seen[best])) {
        best = l;
      }
    }
    set_label_index(voted, c, best);
  }
  return voted;
}

}  // namespace codriver::policy
