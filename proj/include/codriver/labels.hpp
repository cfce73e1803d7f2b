#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

namespace codriver {

enum class Weather : std::uint8_t { clear, rainy, foggy };
enum class Light : std::uint8_t { bright, gloomy, dark };
enum class Locality : std::uint8_t { city, town, highway };
enum class Surface : std::uint8_t { dry, wet };
enum class Distance : std::uint8_t { safe, unsafe };

/// The five label categories, in report order.
enum class Category : std::uint8_t { distance, weather, light, surface, locality };

inline constexpr std::array<Category, 5> kCategories = {
    Category::distance, Category::weather, Category::light, Category::surface,
    Category::locality};

/// One label per category. Used both for ground truth and for estimates.
struct SceneLabels {
  Weather weather = Weather::clear;
  Light light = Light::bright;
  Locality locality = Locality::city;
  Surface surface = Surface::dry;
  Distance distance = Distance::safe;

  friend bool operator==(const SceneLabels&, const SceneLabels&) = default;
};

/// Ground-truth world state. Same shape as an estimate, but the world
/// consistency rule (rainy implies wet) must hold; see `is_consistent`.
using ScenarioConditions = SceneLabels;

enum class EstimateSource : std::uint8_t { mock, remote };

struct EnvironmentEstimate {
  SceneLabels labels;
  std::uint64_t frame_id = 0;
  EstimateSource source = EstimateSource::mock;

  friend bool operator==(const EnvironmentEstimate&, const EnvironmentEstimate&) = default;
};

/// Severity tiers, least severe first.
enum class ControlType : std::uint8_t { sport, normal, cautious, defensive };

inline constexpr std::array<ControlType, 4> kControlTypes = {
    ControlType::sport, ControlType::normal, ControlType::cautious, ControlType::defensive};

/// Control and behavior parameter levels applied to the ego agent.
/// max_speed is in km/h, max_acceleration in m/s^2, max_steering_speed in rad/s.
struct BehaviorDirective {
  ControlType control_type = ControlType::defensive;
  double max_speed = 0.0;
  double max_brake = 0.0;
  double max_throttle = 0.0;
  double max_acceleration = 0.0;
  double max_steering_speed = 0.0;

  friend bool operator==(const BehaviorDirective&, const BehaviorDirective&) = default;
};

/// Names the first field of `d` that violates its range, or nullopt.
std::optional<std::string> directive_violation(const BehaviorDirective& d);
inline bool is_valid(const BehaviorDirective& d) { return !directive_violation(d); }

/// World-consistency rule for ground truth: rainy weather implies a wet surface.
inline bool is_consistent(const ScenarioConditions& c) {
  return c.weather != Weather::rainy || c.surface == Surface::wet;
}

// Generic per-category access. Label indices follow the enum order above.
std::string_view category_name(Category c);
std::optional<Category> parse_category(std::string_view s);
int label_count(Category c);
int label_index(const SceneLabels& labels, Category c);
void set_label_index(SceneLabels& labels, Category c, int index);
std::string_view label_name(Category c, int index);
/// Case-insensitive lookup of a label within a category's taxonomy.
std::optional<int> parse_label(Category c, std::string_view s);

std::string_view to_string(Weather v);
std::string_view to_string(Light v);
std::string_view to_string(Locality v);
std::string_view to_string(Surface v);
std::string_view to_string(Distance v);
std::string_view to_string(ControlType v);
std::optional<ControlType> parse_control_type(std::string_view s);

/// Compact label such as "rainy+gloomy".
std::string condition_label(const SceneLabels& labels);

/// Canonical textual scene descriptor that stands in for a camera frame, e.g.
/// "weather=rainy light=gloomy locality=town surface=wet distance=safe".
std::string render_scene_text(const SceneLabels& labels);
/// Inverse of render_scene_text; tolerant of surrounding text.
std::optional<SceneLabels> parse_scene_text(std::string_view text);

inline constexpr double kKmhPerMps = 3.6;
constexpr double kmh_to_mps(double kmh) { return kmh / kKmhPerMps; }
constexpr double mps_to_kmh(double mps) { return mps * kKmhPerMps; }

}  // namespace codriver
