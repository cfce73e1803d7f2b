#pragma once

// Prompt dataset: scene descriptors paired with behavior-tree answers, in the
// conversation JSON-lines shape used by VLM fine-tuning toolchains.

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "codriver/error.hpp"
#include "codriver/labels.hpp"
#include "codriver/policy.hpp"
#include "json.hpp"

namespace codriver::dataset {

enum class Errc : std::uint8_t { invalid_policy, invalid_argument, io_error };

class DatasetError : public Error {
 public:
  DatasetError(Errc code, const std::string& what) : Error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

inline constexpr std::size_t kGridSize = 54;

/// weather x light x locality x distance, surface derived from weather.
/// Order: weather outermost, distance innermost.
std::vector<ScenarioConditions> enumerate_grid();
/// Position of `c` in enumerate_grid(), or nullopt if surface disagrees with weather.
std::optional<std::size_t> grid_index(const ScenarioConditions& c);

struct DatasetSample {
  std::string id;
  ScenarioConditions scene;
  std::optional<std::string> image_ref;
  std::string question;
  std::string answer;

  /// {id, image, scene, conversations: [{from: "user", value}, {from: "assistant", value}]}
  nlohmann::json to_json() const;
};

/// Calls `sink` for per_combo samples of every grid cell, in grid order.
void generate(int per_combo, const policy::PolicyTable& table, std::uint64_t seed,
              const std::function<void(const DatasetSample&)>& sink);
std::vector<DatasetSample> generate(int per_combo, const policy::PolicyTable& table,
                                    std::uint64_t seed);
/// Returns the number of records written.
std::size_t write_jsonl(int per_combo, const policy::PolicyTable& table, std::uint64_t seed,
                        std::ostream& out);

struct Violation {
  std::size_t line = 0;
  std::string kind;  // MalformedRecord, OutOfRange, PolicyMismatch, ...
  std::string message;
};

struct ValidationReport {
  std::size_t records = 0;
  std::vector<Violation> violations;
  std::array<std::size_t, kGridSize> coverage{};

  bool ok() const { return violations.empty(); }
  /// Every grid cell appears exactly `per_combo` times.
  bool coverage_exact(std::size_t per_combo) const;
  nlohmann::json to_json() const;
};

ValidationReport validate(std::istream& in, const policy::PolicyTable& table);
/// Throws DatasetError(io_error) if the file cannot be read.
ValidationReport validate_file(const std::filesystem::path& path,
                               const policy::PolicyTable& table);

}  // namespace codriver::dataset
