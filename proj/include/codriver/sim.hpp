#pragma once

// Deterministic longitudinal driving simulator with a rule-following default
// agent and a directive-capped adaptive agent.

#include <array>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "codriver/analyzer.hpp"
#include "codriver/error.hpp"
#include "codriver/labels.hpp"
#include "codriver/metrics.hpp"
#include "codriver/policy.hpp"
#include "codriver/pubsub.hpp"
#include "json.hpp"

namespace codriver::sim {

struct SpeedSign {
  double position = 0.0;  // m
  double limit = 0.0;     // km/h
};

struct ObstacleZone {
  double start = 0.0;
  double end = 0.0;
};

struct Segment {
  double start = 0.0;
  double end = 0.0;
  ScenarioConditions conditions;
};

struct Route {
  std::string id = "route";
  double length = 0.0;
  std::vector<SpeedSign> signs;
  std::vector<ObstacleZone> obstacle_zones;
  std::vector<Segment> segments;

  /// Throws ConfigError on unsorted or out-of-range features, a segment list
  /// that does not partition [0, length], or inconsistent conditions.
  void validate() const;

  /// Ground truth at a position; distance is unsafe inside obstacle zones.
  /// Positions past the end use the last segment.
  ScenarioConditions conditions_at(double position) const;
  /// Most recent posted limit at a position (km/h), or `initial` before the first sign.
  double limit_at(double position, double initial) const;

  static Route from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

struct VehicleState {
  double position = 0.0;      // m
  double speed = 0.0;         // m/s, never negative
  double acceleration = 0.0;  // m/s^2, as realized over the last step
  double t = 0.0;             // s

  friend bool operator==(const VehicleState&, const VehicleState&) = default;
};

/// Disturbance coefficient per (weather, light) pair.
struct DisturbanceTable {
  std::array<std::array<double, 3>, 3> coeff{};  // [weather][light]

  double at(Weather w, Light l) const {
    return coeff[static_cast<int>(w)][static_cast<int>(l)];
  }
  /// 0 for clear+bright; otherwise the worse of the weather and light terms,
  /// with rainy/gloomy = 0.007 and foggy/dark = 0.010.
  static DisturbanceTable defaults();
};

inline constexpr double kBrakeAuthority = 8.0;     // m/s^2 at max_brake = 1
inline constexpr double kThrottleAuthority = 4.0;  // m/s^2 at max_throttle = 1

struct SimConfig {
  double dt = 0.05;
  double kp = 0.5;  // 1/s
  DisturbanceTable disturbance = DisturbanceTable::defaults();
  // Spacing of the road disturbance field knots.
  double disturbance_length = 10.0;  // m
  std::uint64_t seed = 0;
  double duration = 120.0;
  double initial_limit = 50.0;  // km/h, applies before the first sign
  double frame_rate = 10.0;     // Hz, camera frames sent to the analyzer
  double grace_window = policy::kDefaultGraceWindow;
  std::size_t vote_window = 15;
  // Actuation limits of the default agent; its max_speed is not used.
  BehaviorDirective default_caps{ControlType::sport, 90.0, 1.0, 0.85, 3.0, 0.9};

  void validate() const;
  std::size_t step_count() const;

  static SimConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// One controller/plant update; see the README for the control law.
VehicleState step(const VehicleState& state, double target_speed, const BehaviorDirective& caps,
                  double disturbance, const SimConfig& cfg);

/// Unit-variance road disturbance field: iid normal knots every `knot_spacing`
/// meters, linearly interpolated, keyed by (seed, knot index).
double road_field(std::uint64_t seed, double position, double knot_spacing);

enum class AgentKind : std::uint8_t { default_agent, adaptive };
std::string_view to_string(AgentKind a);
std::optional<AgentKind> parse_agent(std::string_view s);

struct DirectiveEvent {
  double t = 0.0;
  BehaviorDirective directive;
  bool fallback = false;
};

struct LogSample {
  VehicleState state;
  std::optional<ControlType> tier;  // directive in force; empty for the default agent
};

struct RunMetadata {
  AgentKind agent = AgentKind::default_agent;
  std::string route_id;
  std::uint64_t seed = 0;
  std::string conditions_label;
  std::string analyzer_mode = "none";
  std::size_t frames_sent = 0;
  std::size_t analyzer_failures = 0;
  std::size_t fallback_steps = 0;
  std::optional<double> first_directive_t;
};

struct DriveLog {
  std::vector<LogSample> samples;
  std::vector<DirectiveEvent> events;
  // Analyzer labels against ground truth, one record per category and frame.
  std::vector<metrics::LabelRecord> predictions;
  RunMetadata meta;
};

/// Topic names of the pipeline.
inline constexpr std::string_view kCameraTopic = "/ego/front_camera";
inline constexpr std::string_view kStatusTopic = "/ego/status";
inline constexpr std::string_view kAnalysisTopic = "/codriver/analysis";
inline constexpr std::string_view kDirectiveTopic = "/codriver/directive";

struct AnalysisText {
  std::uint64_t frame_id = 0;
  double frame_time = 0.0;
  std::optional<std::string> text;
  std::string error;
};

struct RunOptions {
  std::string conditions_label;  // defaults to the first segment's weather+light
  pubsub::LatencyModel analysis_latency;  // bus latency on the analysis topic
  std::ostream* bus_trace = nullptr;
};

/// Runs one scenario. `analyzer` is required for the adaptive agent and
/// ignored by the default agent.
DriveLog run_scenario(const Route& route, AgentKind agent, analyzer::FrameAnalyzer* analyzer,
                      const policy::PolicyTable& table, const SimConfig& cfg,
                      const RunOptions& options = {});

/// CSV: t,position,speed_mps,accel_mps2,directive_tier
void write_csv(const DriveLog& log, std::ostream& out);
std::string to_csv(const DriveLog& log);
nlohmann::json sidecar_json(const DriveLog& log);

}  // namespace codriver::sim

namespace codriver::pubsub {

template <>
struct MessageTraits<analyzer::SceneFrame> {
  static constexpr std::string_view tag = "codriver/SceneFrame";
  static nlohmann::json to_json(const analyzer::SceneFrame& f);
};
template <>
struct MessageTraits<sim::VehicleState> {
  static constexpr std::string_view tag = "codriver/VehicleState";
  static nlohmann::json to_json(const sim::VehicleState& s);
};
template <>
struct MessageTraits<sim::AnalysisText> {
  static constexpr std::string_view tag = "codriver/AnalysisText";
  static nlohmann::json to_json(const sim::AnalysisText& a);
};
template <>
struct MessageTraits<sim::DirectiveEvent> {
  static constexpr std::string_view tag = "codriver/BehaviorDirective";
  static nlohmann::json to_json(const sim::DirectiveEvent& d);
};

}  // namespace codriver::pubsub
