#pragma once

// Driving smoothness (half the number of relative extrema of the acceleration
// series per second of running time) and per-category label accuracy.

#include <array>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "codriver/error.hpp"
#include "codriver/labels.hpp"
#include "json.hpp"

namespace codriver::metrics {

enum class Errc : std::uint8_t { degenerate_series, missing_category, malformed_record };

class MetricsError : public Error {
 public:
  MetricsError(Errc code, const std::string& what) : Error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct TimeSeries {
  std::vector<double> values;
  double dt = 0.0;
  double running_time() const {
    return values.size() < 2 ? 0.0 : static_cast<double>(values.size() - 1) * dt;
  }
};

struct Extrema {
  std::vector<std::size_t> minima;
  std::vector<std::size_t> maxima;
};

/// Interior points strictly below (minima) or strictly above (maxima) both
/// neighbours. Plateaus and endpoints are never extrema.
Extrema relative_extrema(std::span<const double> values);

struct SmoothnessScore {
  double f_dot_t = 0.0;  // 1/s
  std::size_t extrema_count = 0;
  double running_time = 0.0;
};

/// Throws MetricsError(degenerate_series) when the running time is zero, and
/// (malformed_record) for non-finite values or a non-positive dt.
SmoothnessScore smoothness(const TimeSeries& series);

struct LabelRecord {
  std::uint64_t frame_id = 0;
  Category category = Category::distance;
  std::string predicted;
  std::string truth;
};

struct CategoryAccuracy {
  std::size_t correct = 0;
  std::size_t total = 0;
  double accuracy = 0.0;
};

struct AccuracyReport {
  std::array<CategoryAccuracy, 5> per_category{};  // indexed by Category
  double macro_average = 0.0;

  const CategoryAccuracy& operator[](Category c) const {
    return per_category[static_cast<int>(c)];
  }
  nlohmann::json to_json() const;
};

/// Labels compare case-insensitively. Throws MetricsError(missing_category)
/// if any of the five categories has no records.
AccuracyReport accuracy_report(std::span<const LabelRecord> records);

/// Percentage with two decimals, rounded half-up: 0.96972 -> "96.97".
std::string format_percent(double fraction);

/// One record per category for a frame.
std::vector<LabelRecord> label_records(std::uint64_t frame_id, const SceneLabels& predicted,
                                       const SceneLabels& truth);

/// JSON-lines {frame_id, category, predicted, truth}. Throws
/// MetricsError(malformed_record) naming the offending line.
std::vector<LabelRecord> read_label_jsonl(std::istream& in);
void write_label_jsonl(std::span<const LabelRecord> records, std::ostream& out);

/// Acceleration series of a drive-log CSV. dt is derived from the t column
/// so that the running time equals the logged duration.
struct DriveLogSeries {
  std::vector<double> t;
  TimeSeries accel;
};
DriveLogSeries read_drive_log_csv(std::istream& in);

nlohmann::json smoothness_json(const SmoothnessScore& s);
/// index,t,accel_mps2,extremum
void write_smoothness_csv(const DriveLogSeries& log, const Extrema& extrema, std::ostream& out);
/// category,correct,total,accuracy
void write_accuracy_csv(const AccuracyReport& report, std::ostream& out);

}  // namespace codriver::metrics
