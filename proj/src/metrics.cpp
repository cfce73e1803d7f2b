#include "codriver/metrics.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>

namespace codriver::metrics {

using nlohmann::json;

Extrema relative_extrema(std::span<const double> x) {
  Extrema out;
  if (x.size() < 3) return out;
  // Sign changes between consecutive first differences; a zero difference
  // (plateau edge) never pairs into an extremum.
  double prev = x[1] - x[0];
  for (std::size_t i = 1; i + 1 < x.size(); ++i) {
    const double next = x[i + 1] - x[i];
    if (prev > 0.0 && next < 0.0) out.maxima.push_back(i);
    if (prev < 0.0 && next > 0.0) out.minima.push_back(i);
    prev = next;
  }
  return out;
}

SmoothnessScore smoothness(const TimeSeries& series) {
  if (!(series.dt > 0.0) || !std::isfinite(series.dt)) {
    throw MetricsError(Errc::malformed_record, "series dt must be > 0");
  }
  if (!std::all_of(series.values.begin(), series.values.end(),
                   [](double v) { return std::isfinite(v); })) {
    throw MetricsError(Errc::malformed_record, "series contains non-finite values");
  }
  const double T = series.running_time();
  if (!(T > 0.0)) throw MetricsError(Errc::degenerate_series, "running time is zero");
  const Extrema e = relative_extrema(series.values);
  SmoothnessScore s;
  s.extrema_count = e.minima.size() + e.maxima.size();
  s.running_time = T;
  s.f_dot_t = (static_cast<double>(s.extrema_count) * 0.5) / T;
  return s;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string shortest(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, end);
}

}  // namespace

AccuracyReport accuracy_report(std::span<const LabelRecord> records) {
  AccuracyReport r;
  for (const LabelRecord& rec : records) {
    auto& cat = r.per_category[static_cast<int>(rec.category)];
    ++cat.total;
    if (lower(rec.predicted) == lower(rec.truth)) ++cat.correct;
  }
  double sum = 0.0;
  for (Category c : kCategories) {
    auto& cat = r.per_category[static_cast<int>(c)];
    if (cat.total == 0) {
      throw MetricsError(Errc::missing_category,
                         "no records for category " + std::string(category_name(c)));
    }
    cat.accuracy = static_cast<double>(cat.correct) / static_cast<double>(cat.total);
    sum += cat.accuracy;
  }
  r.macro_average = sum / static_cast<double>(kCategories.size());
  return r;
}

std::string format_percent(double fraction) {
  // Nudge absorbs binary representation error, e.g. 0.96972 * 1e4.
  const double hundredths = std::floor(fraction * 10000.0 + 0.5 + 1e-7);
  const auto v = static_cast<long long>(hundredths);
  std::string frac = std::to_string(std::llabs(v) % 100);
  if (frac.size() < 2) frac.insert(0, "0");
  return std::string(v < 0 ? "-" : "") + std::to_string(std::llabs(v) / 100) + "." + frac;
}

json AccuracyReport::to_json() const {
  json cats = json::object();
  for (Category c : kCategories) {
    const auto& a = (*this)[c];
    cats[std::string(category_name(c))] = {{"correct", a.correct},
                                           {"total", a.total},
                                           {"accuracy", a.accuracy},
                                           {"display", format_percent(a.accuracy) + "%"}};
  }
  return {{"categories", cats},
          {"macro_average", macro_average},
          {"macro_average_display", format_percent(macro_average) + "%"}};
}

std::vector<LabelRecord> label_records(std::uint64_t frame_id, const SceneLabels& predicted,
                                       const SceneLabels& truth) {
  std::vector<LabelRecord> out;
  for (Category c : kCategories) {
    out.push_back({frame_id, c, std::string(label_name(c, label_index(predicted, c))),
                   std::string(label_name(c, label_index(truth, c)))});
  }
  return out;
}

std::vector<LabelRecord> read_label_jsonl(std::istream& in) {
  std::vector<LabelRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto bad = [&](const std::string& why) -> MetricsError {
      return MetricsError(Errc::malformed_record, "line " + std::to_string(lineno) + ": " + why);
    };
    json j = json::parse(line, nullptr, false);
    if (j.is_discarded() || !j.is_object()) throw bad("not a JSON object");
    for (const char* key : {"category", "predicted", "truth"}) {
      if (!j.contains(key) || !j.at(key).is_string()) throw bad(std::string("missing ") + key);
    }
    auto cat = parse_category(j.at("category").get<std::string>());
    if (!cat) throw bad("unknown category '" + j.at("category").get<std::string>() + "'");
    LabelRecord r;
    r.frame_id = j.contains("frame_id") && j.at("frame_id").is_number_unsigned()
                     ? j.at("frame_id").get<std::uint64_t>()
                     : 0;
    r.category = *cat;
    r.predicted = j.at("predicted").get<std::string>();
    r.truth = j.at("truth").get<std::string>();
    out.push_back(std::move(r));
  }
  return out;
}

void write_label_jsonl(std::span<const LabelRecord> records, std::ostream& out) {
  for (const LabelRecord& r : records) {
    out << json{{"frame_id", r.frame_id},
                {"category", std::string(category_name(r.category))},
                {"predicted", r.predicted},
                {"truth", r.truth}}
               .dump()
        << '\n';
  }
}

DriveLogSeries read_drive_log_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw MetricsError(Errc::malformed_record, "empty drive log");
  std::vector<std::string> header;
  {
    std::stringstream ss(line);
    for (std::string col; std::getline(ss, col, ',');) {
      if (!col.empty() && col.back() == '\r') col.pop_back();
      header.push_back(col);
    }
  }
  auto column = [&](std::string_view name) -> std::size_t {
    auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) {
      throw MetricsError(Errc::malformed_record, "drive log lacks column " + std::string(name));
    }
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t t_col = column("t");
  const std::size_t a_col = column("accel_mps2");

  DriveLogSeries out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    std::vector<std::string_view> cells;
    std::string_view rest(line);
    while (true) {
      const auto comma = rest.find(',');
      cells.push_back(rest.substr(0, comma));
      if (comma == std::string_view::npos) break;
      rest.remove_prefix(comma + 1);
    }
    auto num = [&](std::size_t col) {
      if (col >= cells.size()) {
        throw MetricsError(Errc::malformed_record, "short row at line " + std::to_string(lineno));
      }
      double v = 0.0;
      auto cell = cells[col];
      auto [p, ec] = std::from_chars(cell.data(), cell.data() + cell.size(), v);
      if (ec != std::errc{}) {
        throw MetricsError(Errc::malformed_record, "bad number at line " + std::to_string(lineno));
      }
      return v;
    };
    out.t.push_back(num(t_col));
    out.accel.values.push_back(num(a_col));
  }
  if (out.t.size() >= 2) {
    out.accel.dt = (out.t.back() - out.t.front()) / static_cast<double>(out.t.size() - 1);
  }
  return out;
}

json smoothness_json(const SmoothnessScore& s) {
  return {{"f_dot_t", s.f_dot_t},
          {"extrema_count", s.extrema_count},
          {"running_time", s.running_time}};
}

void write_smoothness_csv(const DriveLogSeries& log, const Extrema& e, std::ostream& out) {
  std::vector<char> kind(log.accel.values.size(), 0);
  for (auto i : e.minima) kind[i] = 'n';
  for (auto i : e.maxima) kind[i] = 'x';
  out << "index,t,accel_mps2,extremum\n";
  for (std::size_t i = 0; i < log.accel.values.size(); ++i) {
    out << i << ',' << shortest(i < log.t.size() ? log.t[i] : 0.0) << ','
        << shortest(log.accel.values[i]) << ','
        << (kind[i] == 'n' ? "min" : kind[i] == 'x' ? "max" : "") << '\n';
  }
}

void write_accuracy_csv(const AccuracyReport& report, std::ostream& out) {
  out << "category,correct,total,accuracy\n";
  for (Category c : kCategories) {
    const auto& a = report[c];
    out << category_name(c) << ',' << a.correct << ',' << a.total << ',' << shortest(a.accuracy)
        << '\n';
  }
  out << "macro_average,,," << shortest(report.macro_average) << '\n';
}

}  // namespace codriver::metrics
