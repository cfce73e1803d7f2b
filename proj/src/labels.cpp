#include "codriver/labels.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <regex>

namespace codriver {
namespace {

constexpr std::array<std::string_view, 3> kWeather = {"clear", "rainy", "foggy"};
constexpr std::array<std::string_view, 3> kLight = {"bright", "gloomy", "dark"};
constexpr std::array<std::string_view, 3> kLocality = {"city", "town", "highway"};
constexpr std::array<std::string_view, 2> kSurface = {"dry", "wet"};
constexpr std::array<std::string_view, 2> kDistance = {"safe", "unsafe"};
constexpr std::array<std::string_view, 4> kControl = {"sport", "normal", "cautious",
                                                      "defensive"};
constexpr std::array<std::string_view, 5> kCategoryNames = {"distance", "weather", "light",
                                                            "surface", "locality"};

bool iequals(std::string_view a, std::string_view b) {
  return a.size() == b.size() &&
         std::equal(a.begin(), a.end(), b.begin(), [](char x, char y) {
           return std::tolower(static_cast<unsigned char>(x)) ==
                  std::tolower(static_cast<unsigned char>(y));
         });
}

template <std::size_t N>
std::optional<int> find_name(const std::array<std::string_view, N>& names, std::string_view s) {
  for (std::size_t i = 0; i < N; ++i) {
    if (iequals(names[i], s)) return static_cast<int>(i);
  }
  return std::nullopt;
}

}  // namespace

std::optional<std::string> directive_violation(const BehaviorDirective& d) {
  auto positive = [](double v) { return std::isfinite(v) && v > 0.0; };
  auto fraction = [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; };
  if (!positive(d.max_speed)) return "max_speed";
  if (!fraction(d.max_brake)) return "max_brake";
  if (!fraction(d.max_throttle)) return "max_throttle";
  if (!positive(d.max_acceleration)) return "max_acceleration";
  if (!positive(d.max_steering_speed)) return "max_steering_speed";
  return std::nullopt;
}

std::string_view category_name(Category c) { return kCategoryNames[static_cast<int>(c)]; }

std::optional<Category> parse_category(std::string_view s) {
  if (auto i = find_name(kCategoryNames, s)) return static_cast<Category>(*i);
  return std::nullopt;
}

int label_count(Category c) {
  switch (c) {
    case Category::distance:
    case Category::surface:
      return 2;
    default:
      return 3;
  }
}

int label_index(const SceneLabels& l, Category c) {
  switch (c) {
    case Category::distance: return static_cast<int>(l.distance);
    case Category::weather: return static_cast<int>(l.weather);
    case Category::light: return static_cast<int>(l.light);
    case Category::surface: return static_cast<int>(l.surface);
    case Category::locality: return static_cast<int>(l.locality);
  }
  return 0;
}

void set_label_index(SceneLabels& l, Category c, int i) {
  switch (c) {
    case Category::distance: l.distance = static_cast<Distance>(i); break;
    case Category::weather: l.weather = static_cast<Weather>(i); break;
    case Category::light: l.light = static_cast<Light>(i); break;
    case Category::surface: l.surface = static_cast<Surface>(i); break;
    case Category::locality: l.locality = static_cast<Locality>(i); break;
  }
}

std::string_view label_name(Category c, int i) {
  switch (c) {
    case Category::distance: return kDistance.at(i);
    case Category::weather: return kWeather.at(i);
    case Category::light: return kLight.at(i);
    case Category::surface: return kSurface.at(i);
    case Category::locality: return kLocality.at(i);
  }
  return {};
}

std::optional<int> parse_label(Category c, std::string_view s) {
  switch (c) {
    case Category::distance: return find_name(kDistance, s);
    case Category::weather: return find_name(kWeather, s);
    case Category::light: return find_name(kLight, s);
    case Category::surface: return find_name(kSurface, s);
    case Category::locality: return find_name(kLocality, s);
  }
  return std::nullopt;
}

std::string_view to_string(Weather v) { return kWeather[static_cast<int>(v)]; }
std::string_view to_string(Light v) { return kLight[static_cast<int>(v)]; }
std::string_view to_string(Locality v) { return kLocality[static_cast<int>(v)]; }
std::string_view to_string(Surface v) { return kSurface[static_cast<int>(v)]; }
std::string_view to_string(Distance v) { return kDistance[static_cast<int>(v)]; }
std::string_view to_string(ControlType v) { return kControl[static_cast<int>(v)]; }

std::optional<ControlType> parse_control_type(std::string_view s) {
  if (auto i = find_name(kControl, s)) return static_cast<ControlType>(*i);
  return std::nullopt;
}

std::string condition_label(const SceneLabels& l) {
  return std::string(to_string(l.weather)) + "+" + std::string(to_string(l.light));
}

std::string render_scene_text(const SceneLabels& l) {
  std::string out;
  for (Category c : {Category::weather, Category::light, Category::locality, Category::surface,
                     Category::distance}) {
    if (!out.empty()) out += ' ';
    out += category_name(c);
    out += '=';
    out += label_name(c, label_index(l, c));
  }
  return out;
}

std::optional<SceneLabels> parse_scene_text(std::string_view text) {
  SceneLabels labels;
  std::array<bool, 5> seen{};
  static const std::regex kPair(R"(([A-Za-z]+)=([A-Za-z]+))");
  const std::string s(text);
  for (auto it = std::sregex_iterator(s.begin(), s.end(), kPair); it != std::sregex_iterator();
       ++it) {
    auto cat = parse_category((*it)[1].str());
    if (!cat) continue;
    auto idx = parse_label(*cat, (*it)[2].str());
    if (!idx) return std::nullopt;
    set_label_index(labels, *cat, *idx);
    seen[static_cast<int>(*cat)] = true;
  }
  if (std::find(seen.begin(), seen.end(), false) != seen.end()) return std::nullopt;
  return labels;
}

}  // namespace codriver
