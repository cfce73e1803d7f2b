#include <random>

#include "codriver/policy.hpp"
#include "doctest.h"
#include "support.hpp"

using namespace codriver;
using namespace codriver::policy;

namespace {

SceneLabels scene(Weather w, Light l, Locality loc, Distance d = Distance::safe) {
  return {w, l, loc, w == Weather::rainy ? Surface::wet : Surface::dry, d};
}

const PolicyTable& table() {
  static const PolicyTable t = PolicyTable::shipped_default();
  return t;
}

}  // namespace

TEST_CASE("default table lookups") {
  auto sport = lookup(scene(Weather::clear, Light::bright, Locality::highway), table());
  CHECK(sport.control_type == ControlType::sport);
  CHECK(sport.max_speed == 90);

  auto cautious = lookup(scene(Weather::rainy, Light::gloomy, Locality::town), table());
  CHECK(cautious.control_type == ControlType::cautious);
  CHECK(cautious.max_speed == 60);
  CHECK(cautious.max_throttle == 0.6);

  auto defensive = lookup(scene(Weather::foggy, Light::gloomy, Locality::highway), table());
  CHECK(defensive.control_type == ControlType::defensive);
  CHECK(defensive.max_speed == 40);

  auto normal = lookup(scene(Weather::clear, Light::bright, Locality::city), table());
  CHECK(normal.control_type == ControlType::normal);
  CHECK(normal.max_speed == 70);

  auto unsafe =
      lookup(scene(Weather::clear, Light::bright, Locality::highway, Distance::unsafe), table());
  CHECK(unsafe.control_type == ControlType::defensive);
}

TEST_CASE("adverse estimates are always slower than clear and bright") {
  for (int loc = 0; loc < 3; ++loc) {
    const auto locality = static_cast<Locality>(loc);
    const double clear = lookup(scene(Weather::clear, Light::bright, locality), table()).max_speed;
    for (int w = 0; w < 3; ++w) {
      for (int l = 0; l < 3; ++l) {
        if (w == 0 && l == 0) continue;
        auto s = scene(static_cast<Weather>(w), static_cast<Light>(l), locality);
        CHECK(lookup(s, table()).max_speed < clear);
      }
    }
  }
}

TEST_CASE("worsening one category never raises speed or acceleration") {
  std::mt19937_64 g(5);
  for (int i = 0; i < 2000; ++i) {
    SceneLabels s = testing::random_labels(g);
    const auto base = lookup(s, table());
    for (Category c : {Category::weather, Category::light, Category::distance,
                       Category::surface}) {
      const int idx = label_index(s, c);
      if (idx + 1 >= label_count(c)) continue;
      SceneLabels worse = s;
      set_label_index(worse, c, idx + 1);
      const auto d = lookup(worse, table());
      CHECK(d.max_speed <= base.max_speed);
      CHECK(d.max_acceleration <= base.max_acceleration);
    }
  }
}

TEST_CASE("lookup is deterministic") {
  auto s = scene(Weather::rainy, Light::dark, Locality::city);
  CHECK(lookup(s, table()) == lookup(s, table()));
}

TEST_CASE("table json round trip") {
  auto j = table().to_json();
  auto back = PolicyTable::from_json(j);
  CHECK(back.to_json() == j);
  std::mt19937_64 g(9);
  for (int i = 0; i < 200; ++i) {
    auto s = testing::random_labels(g);
    CHECK(lookup(s, back) == lookup(s, table()));
  }
}

TEST_CASE("shipped policy file equals the built-in table") {
  auto file = PolicyTable::load(testing::source_dir() + "/scenarios/policy_default.json");
  CHECK(file.to_json() == table().to_json());
}

TEST_CASE("table validation rejects bad orderings") {
  auto j = table().to_json();
  SUBCASE("speed not strictly decreasing") {
    j["tiers"][2]["max_speed"] = 70;
    CHECK_THROWS_AS(PolicyTable::from_json(j), PolicyError);
  }
  SUBCASE("acceleration increasing") {
    j["tiers"][3]["max_acceleration"] = 2.5;
    CHECK_THROWS_AS(PolicyTable::from_json(j), PolicyError);
  }
  SUBCASE("missing tier") {
    j["tiers"].erase(1);
    CHECK_THROWS_AS(PolicyTable::from_json(j), PolicyError);
  }
  SUBCASE("duplicate tier") {
    j["tiers"][1]["tier"] = "sport";
    CHECK_THROWS_AS(PolicyTable::from_json(j), PolicyError);
  }
  SUBCASE("value out of range") {
    j["tiers"][0]["max_brake"] = 1.2;
    CHECK_THROWS_AS(PolicyTable::from_json(j), PolicyError);
  }
  SUBCASE("unknown trigger label") {
    j["tiers"][0]["trigger"] = {{"weather", "snowy"}};
    CHECK_THROWS_AS(PolicyTable::from_json(j), PolicyError);
  }
}

TEST_CASE("conjunctive triggers with list values") {
  auto j = table().to_json();
  j["tiers"][2]["trigger"] = {{"weather", {"rainy", "foggy"}}, {"locality", "city"}};
  auto t = PolicyTable::from_json(j);
  CHECK(lookup(scene(Weather::rainy, Light::bright, Locality::city), t).control_type ==
        ControlType::cautious);
  // Foggy still fires the more severe row.
  CHECK(lookup(scene(Weather::foggy, Light::bright, Locality::city), t).control_type ==
        ControlType::defensive);
  // Rain outside the city fires nothing and falls through to the catch-all.
  CHECK(lookup(scene(Weather::rainy, Light::bright, Locality::town), t).control_type ==
        ControlType::defensive);
}

TEST_CASE("fallback: fresh directive becomes current") {
  const auto cautious = table().row(ControlType::cautious).directive;
  FallbackState st;
  auto out = fallback_step(st, 0.05, cautious, table().defensive());
  CHECK(out.directive == cautious);
  CHECK(out.state.since_fresh == 0.0);
  CHECK_FALSE(out.fallback_active);
}

TEST_CASE("fallback: defensive after the grace window") {
  const auto sport = table().row(ControlType::sport).directive;
  const double dt = 0.05;
  FallbackState st;
  st = fallback_step(st, dt, sport, table().defensive()).state;
  const int hold_steps = static_cast<int>(std::llround(st.grace_window / dt));
  for (int i = 0; i < hold_steps; ++i) {
    auto out = fallback_step(st, dt, std::nullopt, table().defensive());
    CHECK(out.directive == sport);
    st = out.state;
  }
  auto out = fallback_step(st, dt, std::nullopt, table().defensive());
  CHECK(out.directive == table().defensive());
  CHECK(out.fallback_active);
}

TEST_CASE("fallback: alternating fresh and absent never decays") {
  const auto normal = table().row(ControlType::normal).directive;
  FallbackState st;
  for (int i = 0; i < 1000; ++i) {
    const bool fresh = i % 2 == 0;
    auto out = fallback_step(st, 0.05, fresh ? std::optional(normal) : std::nullopt,
                             table().defensive());
    CHECK(out.directive == normal);
    st = out.state;
  }
}

TEST_CASE("fallback: defensive before any directive") {
  auto out = fallback_step({}, 0.05, std::nullopt, table().defensive());
  CHECK(out.directive == table().defensive());
  CHECK(out.fallback_active);
}

TEST_CASE("vote filter") {
  LabelVoteFilter f(3);
  auto a = scene(Weather::clear, Light::bright, Locality::highway);
  auto b = scene(Weather::foggy, Light::bright, Locality::highway);
  CHECK(f.push(a) == a);
  CHECK(f.push(a) == a);
  CHECK(f.push(b) == a);  // one outlier in three
  CHECK(f.push(b) == b);  // two of three
  LabelVoteFilter pair(2);
  pair.push(a);
  CHECK(pair.push(b) == b);  // ties go to the latest
  LabelVoteFilter pass(1);
  CHECK(pass.push(b) == b);
  CHECK(pass.push(a) == a);
}
