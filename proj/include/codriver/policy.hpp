#pragma once

// Maps an environment estimate to behavior parameters with a severity-tiered
// table, and holds the analyzer-failure fallback logic.

#include <array>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "codriver/error.hpp"
#include "codriver/labels.hpp"
#include "json.hpp"

namespace codriver::policy {

class PolicyError : public Error {
 public:
  using Error::Error;
};

/// Conjunction of per-category constraints. A category maps to the set of
/// accepted label indices; categories absent from the clause are unconstrained.
struct Clause {
  std::array<std::vector<int>, 5> allowed;  // indexed by Category
  bool matches(const SceneLabels& labels) const;
};

/// Disjunction of clauses. An empty trigger never fires.
struct Trigger {
  std::vector<Clause> clauses;
  bool fires(const SceneLabels& labels) const;
};

struct Row {
  Trigger trigger;
  BehaviorDirective directive;  // directive.control_type is the row's tier
};

/// Exactly one row per tier, stored least severe first. The defensive row is
/// also the catch-all: it applies whenever no other trigger fires.
class PolicyTable {
 public:
  /// Validates tier coverage, directive ranges and severity ordering.
  explicit PolicyTable(std::vector<Row> rows);

  static PolicyTable shipped_default();
  static PolicyTable from_json(const nlohmann::json& j);
  static PolicyTable load(const std::filesystem::path& path);
  nlohmann::json to_json() const;

  const Row& row(ControlType tier) const { return rows_[static_cast<int>(tier)]; }
  const BehaviorDirective& defensive() const { return row(ControlType::defensive).directive; }

 private:
  std::array<Row, 4> rows_;
};

/// Most severe row whose trigger fires; defensive if none does.
BehaviorDirective lookup(const SceneLabels& labels, const PolicyTable& table);
inline BehaviorDirective lookup(const EnvironmentEstimate& e, const PolicyTable& table) {
  return lookup(e.labels, table);
}

inline constexpr double kDefaultGraceWindow = 2.0;

struct FallbackState {
  std::optional<BehaviorDirective> current;
  double since_fresh = 0.0;  // simulated seconds since the last fresh directive
  double grace_window = kDefaultGraceWindow;
};

struct FallbackOutput {
  FallbackState state;
  BehaviorDirective directive;
  bool fallback_active = false;  // true when the defensive row was substituted
};

/// Holds the last fresh directive for the grace window, then decays to the
/// defensive row. Before any fresh directive the defensive row applies.
FallbackOutput fallback_step(const FallbackState& state, double dt,
                             const std::optional<BehaviorDirective>& fresh,
                             const BehaviorDirective& defensive);

/// Per-category plurality vote over the most recent `window` estimates.
/// Ties go to the label seen most recently. A window of 1 passes labels through.
class LabelVoteFilter {
 public:
  explicit LabelVoteFilter(std::size_t window);
  SceneLabels push(const SceneLabels& labels);
  std::size_t window() const { return window_; }

 private:
  std::size_t window_;
  std::deque<SceneLabels> history_;
};

}  // namespace codriver::policy
