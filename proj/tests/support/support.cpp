#include "support.hpp"

#include <algorithm>
#include <climits>
#include <cmath>
#include <numbers>

namespace codriver::testing {

std::size_t brute_force_extrema(const std::vector<double>& x) {
  std::size_t count = 0;
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double a = x[i - 1];
    const double b = x[i];
    const double c = x[i + 1];
    if ((b > a && b > c) || (b < a && b < c)) ++count;
  }
  return count;
}

namespace {

std::string random_ident(std::mt19937_64& g, char prefix) {
  static constexpr std::string_view kChars = "abcdefghijklmnopqrstuvwxyz_0123456789";
  std::uniform_int_distribution<int> len(0, 8);
  std::uniform_int_distribution<std::size_t> pick(0, kChars.size() - 1);
  std::string s(1, prefix);
  for (int i = len(g); i > 0; --i) s += kChars[pick(g)];
  return s;
}

std::string random_string(std::mt19937_64& g) {
  static constexpr std::string_view kChars = "abcXYZ 019{}#=:\"\\\n\t\r-.,";
  std::uniform_int_distribution<int> len(0, 12);
  std::uniform_int_distribution<std::size_t> pick(0, kChars.size() - 1);
  std::string s;
  for (int i = len(g); i > 0; --i) s += kChars[pick(g)];
  return s;
}

bt::Value random_value(std::mt19937_64& g) {
  switch (std::uniform_int_distribution<int>(0, 4)(g)) {
    case 0:
      return random_string(g);
    case 1:
      return std::uniform_int_distribution<std::int64_t>(-1'000'000, 1'000'000)(g);
    case 2:
      return std::uniform_int_distribution<std::int64_t>(INT64_MIN, INT64_MAX)(g);
    case 3:
      return std::uniform_real_distribution<double>(-100.0, 100.0)(g);
    default: {
      // Wide exponent range, including values whose shortest form uses 'e'.
      const double mant = std::uniform_real_distribution<double>(-1.0, 1.0)(g);
      const int exp = std::uniform_int_distribution<int>(-300, 300)(g);
      return std::ldexp(mant, exp);
    }
  }
}

bt::Node random_node(std::mt19937_64& g, bt::NodeKind kind, int depth) {
  bt::Node n;
  n.kind = kind;
  if (kind == bt::NodeKind::sequence || std::bernoulli_distribution(0.3)(g)) {
    n.name = random_ident(g, 'n');
  }
  const int entries = std::uniform_int_distribution<int>(0, depth > 2 ? 3 : 6)(g);
  std::vector<std::pair<int, std::string>> used;
  for (int i = 0; i < entries; ++i) {
    if (depth < 4 && std::bernoulli_distribution(0.25)(g)) {
      n.entries.emplace_back(random_node(g, bt::NodeKind::sequence, depth + 1));
      continue;
    }
    bt::Leaf leaf;
    leaf.kind = static_cast<bt::Leaf::Kind>(std::uniform_int_distribution<int>(0, 2)(g));
    leaf.key = random_ident(g, 'k');
    const std::pair<int, std::string> id{static_cast<int>(leaf.kind), leaf.key};
    if (std::find(used.begin(), used.end(), id) != used.end()) continue;
    used.push_back(id);
    leaf.value = random_value(g);
    n.entries.emplace_back(std::move(leaf));
  }
  return n;
}

}  // namespace

bt::Tree random_tree(std::mt19937_64& g) {
  return bt::Tree{random_node(g, bt::NodeKind::root, 0)};
}

SceneLabels random_labels(std::mt19937_64& g) {
  SceneLabels l;
  for (Category c : kCategories) {
    set_label_index(l, c, std::uniform_int_distribution<int>(0, label_count(c) - 1)(g));
  }
  return l;
}

BehaviorDirective random_directive(std::mt19937_64& g) {
  std::uniform_real_distribution<double> frac(0.0, 1.0);
  BehaviorDirective d;
  d.control_type = kControlTypes[std::uniform_int_distribution<int>(0, 3)(g)];
  d.max_speed = static_cast<double>(std::uniform_int_distribution<int>(10, 130)(g));
  d.max_brake = frac(g);
  d.max_throttle = frac(g);
  d.max_acceleration = 0.5 + 4.0 * frac(g);
  d.max_steering_speed = 0.1 + frac(g);
  return d;
}

std::string corrupt(const std::string& text, int variant, std::mt19937_64& g) {
  std::vector<std::size_t> lines;  // start offsets of entry lines inside sequences
  for (std::size_t p = text.find("\n    "); p != std::string::npos; p = text.find("\n    ", p + 1)) {
    lines.push_back(p + 1);
  }
  const auto pick_line = [&] {
    return lines[std::uniform_int_distribution<std::size_t>(0, lines.size() - 1)(g)];
  };
  const auto line_end = [&](std::size_t start) { return text.find('\n', start); };
  std::string out = text;
  switch (variant % kCorruptionKinds) {
    case 0: {  // drop the final closing brace
      out.erase(out.rfind('}'), 1);
      return out;
    }
    case 1: {  // truncate inside the root block
      const auto cut = std::uniform_int_distribution<std::size_t>(0, out.rfind('}') - 1)(g);
      return out.substr(0, cut);
    }
    case 2: {  // remove '=' from an entry
      const std::size_t s = pick_line();
      out.erase(out.find('=', s), 1);
      return out;
    }
    case 3: {  // duplicate an entry
      const std::size_t s = pick_line();
      const std::string line = out.substr(s, line_end(s) - s + 1);
      out.insert(s, line);
      return out;
    }
    case 4: {  // replace a value with a stray token
      const std::size_t s = pick_line();
      const std::size_t eq = out.find('=', s);
      out.replace(eq + 2, line_end(s) - (eq + 2), "@@");
      return out;
    }
    case 5: {  // delete an entry line
      const std::size_t s = pick_line();
      out.erase(s, line_end(s) - s + 1);
      return out;
    }
    case 6: {  // numeric action out of range
      const std::size_t s = out.find("max_brake = ");
      const std::size_t v = s + 12;
      out.replace(v, line_end(v) - v, "1.5");
      return out;
    }
    case 7: {  // condition label outside the taxonomy
      const std::size_t s = out.find("condition:weather = \"");
      const std::size_t v = s + 21;
      out.replace(v, out.find('"', v) - v, "snowy");
      return out;
    }
    case 8: {  // misspell the root keyword
      out.replace(out.find("root"), 4, "rot");
      return out;
    }
    default: {  // unterminated string
      std::size_t s = pick_line();
      while (out.substr(s, line_end(s) - s).find('"') == std::string::npos) s = pick_line();
      const std::size_t q = out.find('"', s);
      const std::size_t close = out.find('"', q + 1);
      out.erase(close, 1);
      return out;
    }
  }
}

metrics::TimeSeries sine(double f, double rate, double seconds, double phase) {
  metrics::TimeSeries s;
  s.dt = 1.0 / rate;
  const auto n = static_cast<std::size_t>(std::llround(seconds * rate)) + 1;
  s.values.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    s.values[i] = std::sin(2.0 * std::numbers::pi * f * static_cast<double>(i) * s.dt + phase);
  }
  return s;
}

std::string source_dir() { return CODRIVER_SOURCE_DIR; }

}  // namespace codriver::testing
