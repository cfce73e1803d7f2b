#include "codriver/sim.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <map>
#include <ostream>
#include <sstream>

#include "codriver/behavior_tree.hpp"
#include "codriver/rng.hpp"

namespace codriver::sim {

using nlohmann::json;

namespace {

json directive_json(const BehaviorDirective& d) {
  return {{"control_type", std::string(to_string(d.control_type))},
          {"max_speed", d.max_speed},
          {"max_brake", d.max_brake},
          {"max_throttle", d.max_throttle},
          {"max_acceleration", d.max_acceleration},
          {"max_steering_speed", d.max_steering_speed}};
}

json labels_json(const SceneLabels& l) {
  json out = json::object();
  for (Category c : kCategories) {
    out[std::string(category_name(c))] = std::string(label_name(c, label_index(l, c)));
  }
  return out;
}

// Missing surface follows the weather, missing distance is safe.
ScenarioConditions conditions_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("segment conditions must be an object");
  ScenarioConditions out;
  bool has_surface = false;
  for (const auto& [key, value] : j.items()) {
    auto cat = parse_category(key);
    if (!cat) throw ConfigError("unknown condition field '" + key + "'");
    if (!value.is_string()) throw ConfigError("condition '" + key + "' must be a string");
    auto idx = parse_label(*cat, value.get<std::string>());
    if (!idx) throw ConfigError("unknown " + key + " label '" + value.get<std::string>() + "'");
    set_label_index(out, *cat, *idx);
    has_surface = has_surface || *cat == Category::surface;
  }
  for (const char* required : {"weather", "light", "locality"}) {
    if (!j.contains(required)) throw ConfigError(std::string("segment needs '") + required + "'");
  }
  if (!has_surface) out.surface = out.weather == Weather::rainy ? Surface::wet : Surface::dry;
  return out;
}

double number(const json& j, const char* key) {
  if (!j.contains(key) || !j.at(key).is_number()) {
    throw ConfigError(std::string("expected numeric '") + key + "'");
  }
  return j.at(key).get<double>();
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

void Route::validate() const {
  if (!std::isfinite(length) || length <= 0.0) throw ConfigError("route length must be > 0");
  double prev = 0.0;
  for (const SpeedSign& s : signs) {
    if (!(s.position >= prev && s.position <= length)) {
      throw ConfigError("speed signs must be sorted and within the route");
    }
    if (!std::isfinite(s.limit) || s.limit <= 0.0) throw ConfigError("speed limit must be > 0");
    prev = s.position;
  }
  prev = 0.0;
  for (const ObstacleZone& z : obstacle_zones) {
    if (!(z.start >= prev && z.start < z.end && z.end <= length)) {
      throw ConfigError("obstacle zones must be sorted, non-empty and within the route");
    }
    prev = z.end;
  }
  if (segments.empty()) throw ConfigError("route needs at least one segment");
  double cursor = 0.0;
  for (const Segment& s : segments) {
    if (s.start != cursor || !(s.end > s.start)) {
      throw ConfigError("segments must partition the route without gaps or overlaps");
    }
    if (!is_consistent(s.conditions)) throw ConfigError("rainy segments must have a wet surface");
    cursor = s.end;
  }
  if (cursor != length) throw ConfigError("segments must end at the route length");
}

ScenarioConditions Route::conditions_at(double position) const {
  auto it = std::upper_bound(segments.begin(), segments.end(), position,
                             [](double p, const Segment& s) { return p < s.end; });
  ScenarioConditions c = it == segments.end() ? segments.back().conditions : it->conditions;
  for (const ObstacleZone& z : obstacle_zones) {
    if (position >= z.start && position < z.end) c.distance = Distance::unsafe;
  }
  return c;
}

double Route::limit_at(double position, double initial) const {
  double limit = initial;
  for (const SpeedSign& s : signs) {
    if (s.position > position) break;
    limit = s.limit;
  }
  return limit;
}

Route Route::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("route must be an object");
  Route r;
  r.id = j.value("id", std::string("route"));
  r.length = number(j, "length");
  for (const json& s : j.value("signs", json::array())) {
    r.signs.push_back({number(s, "position"), number(s, "limit")});
  }
  for (const json& z : j.value("obstacle_zones", json::array())) {
    r.obstacle_zones.push_back({number(z, "start"), number(z, "end")});
  }
  if (!j.contains("segments")) throw ConfigError("route needs 'segments'");
  for (const json& s : j.at("segments")) {
    if (!s.contains("conditions")) throw ConfigError("segment needs 'conditions'");
    r.segments.push_back({number(s, "start"), number(s, "end"),
                          conditions_from_json(s.at("conditions"))});
  }
  r.validate();
  return r;
}

json Route::to_json() const {
  json j = {{"id", id}, {"length", length}, {"signs", json::array()},
            {"obstacle_zones", json::array()}, {"segments", json::array()}};
  for (const auto& s : signs) j["signs"].push_back({{"position", s.position}, {"limit", s.limit}});
  for (const auto& z : obstacle_zones) {
    j["obstacle_zones"].push_back({{"start", z.start}, {"end", z.end}});
  }
  for (const auto& s : segments) {
    j["segments"].push_back(
        {{"start", s.start}, {"end", s.end}, {"conditions", labels_json(s.conditions)}});
  }
  return j;
}

DisturbanceTable DisturbanceTable::defaults() {
  constexpr std::array<double, 3> kWeatherTerm = {0.0, 0.007, 0.010};
  constexpr std::array<double, 3> kLightTerm = {0.0, 0.007, 0.010};
  DisturbanceTable t;
  for (int w = 0; w < 3; ++w) {
    for (int l = 0; l < 3; ++l) t.coeff[w][l] = std::max(kWeatherTerm[w], kLightTerm[l]);
  }
  return t;
}

void SimConfig::validate() const {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  if (!positive(dt)) throw ConfigError("dt must be > 0");
  if (!positive(kp)) throw ConfigError("kp must be > 0");
  if (!positive(duration)) throw ConfigError("duration must be > 0");
  if (!positive(initial_limit)) throw ConfigError("initial_limit must be > 0");
  if (!positive(frame_rate)) throw ConfigError("frame_rate must be > 0");
  if (!positive(disturbance_length)) throw ConfigError("disturbance_length must be > 0");
  if (!std::isfinite(grace_window) || grace_window < 0.0) {
    throw ConfigError("grace_window must be >= 0");
  }
  if (vote_window == 0) throw ConfigError("vote_window must be >= 1");
  for (const auto& row : disturbance.coeff) {
    for (double c : row) {
      if (!std::isfinite(c) || c < 0.0) throw ConfigError("disturbance coefficients must be >= 0");
    }
  }
  if (disturbance.at(Weather::clear, Light::bright) != 0.0) {
    throw ConfigError("clear/bright disturbance coefficient must be 0");
  }
  if (auto bad = directive_violation(default_caps)) {
    throw ConfigError("default_caps: " + *bad + " out of range");
  }
}

std::size_t SimConfig::step_count() const {
  return static_cast<std::size_t>(std::llround(duration / dt));
}

SimConfig SimConfig::from_json(const json& j) {
  SimConfig c;
  if (!j.is_object()) throw ConfigError("sim config must be an object");
  for (const auto& [key, value] : j.items()) {
    if (key == "dt") c.dt = value.get<double>();
    else if (key == "kp") c.kp = value.get<double>();
    else if (key == "duration") c.duration = value.get<double>();
    else if (key == "seed") c.seed = value.get<std::uint64_t>();
    else if (key == "initial_limit") c.initial_limit = value.get<double>();
    else if (key == "frame_rate") c.frame_rate = value.get<double>();
    else if (key == "grace_window") c.grace_window = value.get<double>();
    else if (key == "vote_window") c.vote_window = value.get<std::size_t>();
    else if (key == "disturbance_length") c.disturbance_length = value.get<double>();
    else if (key == "disturbance") {
      // {"rainy/gloomy": 0.02, ...}
      for (const auto& [pair, coeff] : value.items()) {
        const auto slash = pair.find('/');
        auto w = slash == std::string::npos ? std::nullopt
                                            : parse_label(Category::weather, pair.substr(0, slash));
        auto l = slash == std::string::npos ? std::nullopt
                                            : parse_label(Category::light, pair.substr(slash + 1));
        if (!w || !l) throw ConfigError("disturbance keys look like 'rainy/gloomy', got '" + pair + "'");
        c.disturbance.coeff[*w][*l] = coeff.get<double>();
      }
    } else if (key == "default_caps") {
      c.default_caps.max_brake = value.value("max_brake", c.default_caps.max_brake);
      c.default_caps.max_throttle = value.value("max_throttle", c.default_caps.max_throttle);
      c.default_caps.max_acceleration =
          value.value("max_acceleration", c.default_caps.max_acceleration);
    } else {
      throw ConfigError("unknown sim field '" + key + "'");
    }
  }
  c.validate();
  return c;
}

json SimConfig::to_json() const {
  json dist = json::object();
  for (int w = 0; w < 3; ++w) {
    for (int l = 0; l < 3; ++l) {
      dist[std::string(label_name(Category::weather, w)) + "/" +
           std::string(label_name(Category::light, l))] = disturbance.coeff[w][l];
    }
  }
  return {{"dt", dt},
          {"kp", kp},
          {"duration", duration},
          {"seed", seed},
          {"initial_limit", initial_limit},
          {"frame_rate", frame_rate},
          {"grace_window", grace_window},
          {"vote_window", vote_window},
          {"disturbance_length", disturbance_length},
          {"disturbance", dist},
          {"default_caps", directive_json(default_caps)}};
}

VehicleState step(const VehicleState& s, double target_speed, const BehaviorDirective& caps,
                  double disturbance, const SimConfig& cfg) {
  const double lower = -caps.max_brake * kBrakeAuthority;
  const double upper = std::min(caps.max_throttle * kThrottleAuthority, caps.max_acceleration);
  const double a_cmd = std::clamp(cfg.kp * (target_speed - s.speed), lower, upper);
  const double applied = a_cmd + disturbance;
  const double raw = s.speed + applied * cfg.dt;

  VehicleState next;
  next.speed = std::max(0.0, raw);
  // Same as (v' - v) / dt, without the cancellation noise of the subtraction.
  next.acceleration = raw > 0.0 ? applied : (next.speed - s.speed) / cfg.dt;
  next.position = s.position + next.speed * cfg.dt;
  next.t = s.t + cfg.dt;
  return next;
}

double road_field(std::uint64_t seed, double position, double knot_spacing) {
  const double u = std::max(0.0, position) / knot_spacing;
  const double cell = std::floor(u);
  const double frac = u - cell;
  const auto k = static_cast<std::uint64_t>(cell);
  auto knot = [&](std::uint64_t i) {
    auto g = rng::stream(seed, rng::Domain::road, {i});
    return rng::standard_normal(g);
  };
  return (1.0 - frac) * knot(k) + frac * knot(k + 1);
}

std::string_view to_string(AgentKind a) {
  return a == AgentKind::adaptive ? "adaptive" : "default";
}

std::optional<AgentKind> parse_agent(std::string_view s) {
  if (s == "default") return AgentKind::default_agent;
  if (s == "adaptive") return AgentKind::adaptive;
  return std::nullopt;
}

namespace {

// Turns analyzer output into a directive. Labels pass through the vote filter;
// the tree's own actions are used only when its labels agree with the vote.
class InstructionInterpreter {
 public:
  InstructionInterpreter(const policy::PolicyTable& table, std::size_t vote_window)
      : table_(table), filter_(vote_window) {}

  struct Result {
    std::optional<SceneLabels> labels;  // as stated by the tree
    std::optional<BehaviorDirective> directive;
  };

  Result interpret(const std::string& text) {
    Result r;
    bt::Tree tree;
    try {
      tree = bt::parse(text);
      r.labels = bt::labels_from_tree(tree);
    } catch (const bt::TreeError&) {
      return r;
    }
    std::optional<BehaviorDirective> suggested;
    try {
      suggested = bt::directive_from_tree(tree).directive;
    } catch (const bt::TreeError& e) {
      // Label-only answers are looked up; bad actions invalidate the answer.
      if (e.code() != bt::Errc::missing_field) return r;
    }
    const SceneLabels voted = filter_.push(*r.labels);
    r.directive = suggested && voted == *r.labels ? *suggested : policy::lookup(voted, table_);
    return r;
  }

 private:
  const policy::PolicyTable& table_;
  policy::LabelVoteFilter filter_;
};

std::string first_label(const Route& route) { return condition_label(route.segments.front().conditions); }

}  // namespace

DriveLog run_scenario(const Route& route, AgentKind agent, analyzer::FrameAnalyzer* analyzer,
                      const policy::PolicyTable& table, const SimConfig& cfg,
                      const RunOptions& options) {
  route.validate();
  cfg.validate();
  if (agent == AgentKind::adaptive && analyzer == nullptr) {
    throw ConfigError("the adaptive agent needs an analyzer");
  }

  DriveLog log;
  log.meta.agent = agent;
  log.meta.route_id = route.id;
  log.meta.seed = cfg.seed;
  log.meta.conditions_label =
      options.conditions_label.empty() ? first_label(route) : options.conditions_label;

  pubsub::Bus bus;
  bus.set_trace(options.bus_trace);
  bus.advertise<VehicleState>(std::string(kStatusTopic));
  bus.advertise<analyzer::SceneFrame>(std::string(kCameraTopic));
  bus.advertise<AnalysisText>(std::string(kAnalysisTopic), options.analysis_latency);
  bus.advertise<DirectiveEvent>(std::string(kDirectiveTopic));
  const auto camera_sub = bus.subscribe(kCameraTopic);
  const auto analysis_sub = bus.subscribe(kAnalysisTopic);

  const bool adaptive = agent == AgentKind::adaptive;
  if (adaptive) log.meta.analyzer_mode = analyzer->source() == EstimateSource::remote ? "remote" : "mock";

  InstructionInterpreter interpreter(table, cfg.vote_window);
  policy::FallbackState fallback;
  fallback.grace_window = cfg.grace_window;
  std::optional<BehaviorDirective> in_force;

  const std::size_t n = cfg.step_count();
  const double frame_period = 1.0 / cfg.frame_rate;
  std::uint64_t next_frame = 0;
  std::map<std::uint64_t, ScenarioConditions> truth_by_frame;

  VehicleState state;
  log.samples.reserve(n + 1);
  auto record = [&](const VehicleState& s) {
    LogSample sample{s, {}};
    if (in_force) sample.tier = in_force->control_type;
    log.samples.push_back(sample);
  };

  BehaviorDirective caps = cfg.default_caps;
  if (adaptive) {
    caps = table.defensive();
    in_force = caps;
  }
  record(state);

  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * cfg.dt;
    state.t = t;
    bus.publish(kStatusTopic, state, t);

    if (adaptive) {
      while (static_cast<double>(next_frame) * frame_period <= t + 1e-9) {
        analyzer::SceneFrame frame{next_frame, t, route.conditions_at(state.position), {}};
        truth_by_frame.emplace(frame.frame_id, frame.truth);
        bus.publish(kCameraTopic, frame, t);
        ++next_frame;
      }
      for (auto& f : bus.poll<analyzer::SceneFrame>(camera_sub, t)) {
        analyzer->submit(f.message);
        ++log.meta.frames_sent;
      }
      for (auto& r : analyzer->collect(t)) {
        bus.publish(kAnalysisTopic, AnalysisText{r.frame_id, r.frame_time, r.text, r.message}, t);
      }

      std::optional<BehaviorDirective> fresh;
      for (auto& a : bus.poll<AnalysisText>(analysis_sub, t)) {
        InstructionInterpreter::Result r;
        if (a.message.text) r = interpreter.interpret(*a.message.text);
        auto truth = truth_by_frame.find(a.message.frame_id);
        if (r.labels && truth != truth_by_frame.end()) {
          auto recs = metrics::label_records(a.message.frame_id, *r.labels, truth->second);
          log.predictions.insert(log.predictions.end(), recs.begin(), recs.end());
        }
        if (truth != truth_by_frame.end()) truth_by_frame.erase(truth);
        if (r.directive) {
          fresh = r.directive;
        } else {
          ++log.meta.analyzer_failures;
        }
      }
      if (fresh && !log.meta.first_directive_t) log.meta.first_directive_t = t;

      auto out = policy::fallback_step(fallback, cfg.dt, fresh, table.defensive());
      fallback = out.state;
      if (out.fallback_active) ++log.meta.fallback_steps;
      if (!in_force || !(*in_force == out.directive) || log.events.empty()) {
        DirectiveEvent ev{t, out.directive, out.fallback_active};
        log.events.push_back(ev);
        bus.publish(kDirectiveTopic, ev, t);
      }
      in_force = out.directive;
      caps = out.directive;
    }

    const double limit = route.limit_at(state.position, cfg.initial_limit);
    const double target =
        kmh_to_mps(adaptive ? std::min(limit, caps.max_speed) : limit);
    const ScenarioConditions here = route.conditions_at(state.position);
    const double disturbance = cfg.disturbance.at(here.weather, here.light) * state.speed *
                               road_field(cfg.seed, state.position, cfg.disturbance_length);

    state = step(state, target, caps, disturbance, cfg);
    state.t = static_cast<double>(k + 1) * cfg.dt;
    record(state);
  }
  return log;
}

void write_csv(const DriveLog& log, std::ostream& out) {
  out << "t,position,speed_mps,accel_mps2,directive_tier\n";
  for (const LogSample& s : log.samples) {
    out << shortest(s.state.t) << ',' << shortest(s.state.position) << ','
        << shortest(s.state.speed) << ',' << shortest(s.state.acceleration) << ','
        << (s.tier ? to_string(*s.tier) : std::string_view("none")) << '\n';
  }
}

std::string to_csv(const DriveLog& log) {
  std::ostringstream out;
  write_csv(log, out);
  return out.str();
}

json sidecar_json(const DriveLog& log) {
  json events = json::array();
  for (const auto& e : log.events) {
    events.push_back({{"t", e.t}, {"fallback", e.fallback}, {"directive", directive_json(e.directive)}});
  }
  json meta = {{"agent", std::string(to_string(log.meta.agent))},
               {"route_id", log.meta.route_id},
               {"seed", log.meta.seed},
               {"conditions_label", log.meta.conditions_label},
               {"analyzer_mode", log.meta.analyzer_mode},
               {"frames_sent", log.meta.frames_sent},
               {"analyzer_failures", log.meta.analyzer_failures},
               {"fallback_steps", log.meta.fallback_steps},
               {"samples", log.samples.size()}};
  meta["first_directive_t"] =
      log.meta.first_directive_t ? json(*log.meta.first_directive_t) : json(nullptr);
  return {{"metadata", meta}, {"directive_events", events}};
}

}  // namespace codriver::sim

namespace codriver::pubsub {

using nlohmann::json;

json MessageTraits<analyzer::SceneFrame>::to_json(const analyzer::SceneFrame& f) {
  return {{"frame_id", f.frame_id}, {"timestamp", f.timestamp},
          {"scene_text", render_scene_text(f.truth)}};
}

json MessageTraits<sim::VehicleState>::to_json(const sim::VehicleState& s) {
  return {{"t", s.t}, {"position", s.position}, {"speed", s.speed},
          {"acceleration", s.acceleration}};
}

json MessageTraits<sim::AnalysisText>::to_json(const sim::AnalysisText& a) {
  json j = {{"frame_id", a.frame_id}, {"frame_time", a.frame_time}};
  j["text"] = a.text ? json(*a.text) : json(nullptr);
  if (!a.error.empty()) j["error"] = a.error;
  return j;
}

json MessageTraits<sim::DirectiveEvent>::to_json(const sim::DirectiveEvent& d) {
  return {{"t", d.t}, {"fallback", d.fallback},
          {"control_type", std::string(codriver::to_string(d.directive.control_type))},
          {"max_speed", d.directive.max_speed}};
}

}  // namespace codriver::pubsub
