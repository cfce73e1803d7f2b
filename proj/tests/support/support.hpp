#pragma once

#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "codriver/behavior_tree.hpp"
#include "codriver/labels.hpp"
#include "codriver/metrics.hpp"

namespace codriver::testing {

/// Reference extrema count: checks every interior triple directly.
std::size_t brute_force_extrema(const std::vector<double>& x);

/// Random structurally valid tree (unique keys per node, arbitrary nesting).
bt::Tree random_tree(std::mt19937_64& g);

SceneLabels random_labels(std::mt19937_64& g);
BehaviorDirective random_directive(std::mt19937_64& g);

/// Corrupts canonical instruction-tree text so that parsing or extraction
/// must fail. `variant` selects the kind of corruption.
std::string corrupt(const std::string& canonical, int variant, std::mt19937_64& g);
inline constexpr int kCorruptionKinds = 10;

/// Sine samples: amplitude 1, frequency f, sampled at rate for `seconds`.
metrics::TimeSeries sine(double f, double rate, double seconds, double phase = 0.3);

std::string source_dir();

}  // namespace codriver::testing
