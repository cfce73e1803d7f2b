#include <set>
#include <sstream>

#include "codriver/behavior_tree.hpp"
#include "codriver/dataset.hpp"
#include "doctest.h"

using namespace codriver;
using namespace codriver::dataset;

namespace {

const policy::PolicyTable& table() {
  static const auto t = policy::PolicyTable::shipped_default();
  return t;
}

std::string file_of(int per_combo, std::uint64_t seed) {
  std::ostringstream out;
  write_jsonl(per_combo, table(), seed, out);
  return out.str();
}

ValidationReport check(const std::string& text) {
  std::istringstream in(text);
  return validate(in, table());
}

}  // namespace

TEST_CASE("grid") {
  auto grid = enumerate_grid();
  REQUIRE(grid.size() == 54);
  CHECK(grid.front() ==
        ScenarioConditions{Weather::clear, Light::bright, Locality::city, Surface::dry,
                           Distance::safe});
  std::set<std::string> seen;
  for (std::size_t i = 0; i < grid.size(); ++i) {
    const auto& c = grid[i];
    CHECK(is_consistent(c));
    CHECK((c.weather == Weather::rainy) == (c.surface == Surface::wet));
    CHECK(grid_index(c) == i);
    seen.insert(render_scene_text(c));
  }
  CHECK(seen.size() == 54);
}

TEST_CASE("one sample per cell") {
  auto samples = generate(1, table(), 0);
  REQUIRE(samples.size() == 54);
  for (const auto& s : samples) {
    auto ins = bt::directive_from_tree(bt::parse(s.answer));
    CHECK(ins.labels == s.scene);
    CHECK(ins.directive == policy::lookup(s.scene, table()));
    CHECK(s.question.find("root {") != std::string::npos);
  }
}

TEST_CASE("generation is deterministic and seeded") {
  CHECK(file_of(100, 5) == file_of(100, 5));
  CHECK(file_of(3, 5) != file_of(3, 6));
}

TEST_CASE("record shape") {
  auto j = generate(1, table(), 0).front().to_json();
  CHECK(j.at("id").is_string());
  CHECK(j.at("image").is_null());
  REQUIRE(j.at("conversations").size() == 2);
  CHECK(j["conversations"][0]["from"] == "user");
  CHECK(j["conversations"][1]["from"] == "assistant");
  CHECK(j["scene"]["weather"] == "clear");
}

TEST_CASE("large dataset count") {
  std::size_t n = 0;
  generate(4097, table(), 1, [&](const DatasetSample&) { ++n; });
  CHECK(n == 221238);
}

TEST_CASE("closure and coverage") {
  for (int k : {1, 10}) {
    auto r = check(file_of(k, 9));
    CHECK(r.ok());
    CHECK(r.records == 54u * k);
    CHECK(r.coverage_exact(k));
  }
}

TEST_CASE("invalid per_combo") {
  CHECK_THROWS_AS(generate(0, table(), 0), DatasetError);
}

TEST_CASE("violations are reported by line") {
  const std::string good = file_of(1, 0);
  std::vector<std::string> lines;
  std::istringstream in(good);
  for (std::string l; std::getline(in, l);) lines.push_back(l);
  auto join = [](const std::vector<std::string>& v) {
    std::string out;
    for (const auto& l : v) out += l + "\n";
    return out;
  };

  SUBCASE("out of range brake") {
    auto v = lines;
    auto j = nlohmann::json::parse(v[4]);
    std::string ans = j["conversations"][1]["value"];
    ans.replace(ans.find("max_brake = ") + 12, 3, "1.5");
    j["conversations"][1]["value"] = ans;
    v[4] = j.dump();
    auto r = check(join(v));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].line == 5);
    CHECK(r.violations[0].kind == "OutOfRange");
    CHECK_FALSE(r.coverage_exact(1));
  }
  SUBCASE("truncated last line") {
    std::string text = join(lines);
    text.resize(text.size() - 20);
    auto r = check(text);
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].line == 54);
    CHECK(r.violations[0].kind == "MalformedRecord");
  }
  SUBCASE("answer disagrees with the policy") {
    auto v = lines;
    auto j = nlohmann::json::parse(v[0]);
    std::string ans = j["conversations"][1]["value"];
    ans.replace(ans.find("max_speed = ") + 12, 2, "55");
    j["conversations"][1]["value"] = ans;
    v[0] = j.dump();
    auto r = check(join(v));
    REQUIRE(r.violations.size() == 1);
    CHECK(r.violations[0].kind == "PolicyMismatch");
  }
  SUBCASE("duplicate id") {
    auto v = lines;
    v.push_back(v[3]);
    auto r = check(join(v));
    REQUIRE_FALSE(r.ok());
    CHECK(r.violations.back().kind == "DuplicateId");
    CHECK(r.violations.back().line == 55);
  }
}

TEST_CASE("missing file") {
  CHECK_THROWS_AS(validate_file("/nonexistent/dataset.jsonl", table()), DatasetError);
}
