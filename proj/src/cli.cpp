#include "codriver/cli.hpp"

#include <spdlog/sinks/ostream_sink.h>
#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <sstream>
#include <thread>

#include "codriver/analyzer.hpp"
#include "codriver/dataset.hpp"
#include "codriver/metrics.hpp"
#include "codriver/mock_server.hpp"
#include "codriver/policy.hpp"
#include "codriver/scenario.hpp"
#include "codriver/sim.hpp"

namespace codriver::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

std::shared_ptr<spdlog::logger> make_logger(std::ostream& err) {
  auto sink = std::make_shared<spdlog::sinks::ostream_sink_mt>(err);
  auto log = std::make_shared<spdlog::logger>("codriver", sink);
  log->set_pattern("[%l] %v");
  log->set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CODRIVER_LOG_LEVEL")) {
    auto level = spdlog::level::from_str(env);
    // from_str maps unknown names to off; only accept it when asked for.
    if (level != spdlog::level::off || std::string_view(env) == "off") log->set_level(level);
  }
  return log;
}

struct RunFlags {
  std::string scenario;
  std::string agent;
  std::optional<std::uint64_t> seed;
  std::string analyzer = "mock";
  std::string endpoint;
  int deadline_ms = 1000;
  std::string out = "out";
  std::string dump_bus;
  std::optional<std::size_t> max_failures;
  std::string mission = "follow the planned route";
  std::string destination = "the route end";
};

struct CompareFlags {
  std::vector<std::string> scenarios;
  std::string seeds = "1..20";
  std::string out;
  unsigned jobs = 0;
};

// Error raised while turning flags into a runnable manifest.
struct FlagError : Error {
  using Error::Error;
};

sim::Scenario prepare(const std::string& path, const std::string& agent_flag,
                      std::optional<std::uint64_t> seed) {
  sim::Scenario sc = sim::load_scenario(path);
  if (!agent_flag.empty()) {
    auto agent = sim::parse_agent(agent_flag);
    if (!agent) {
      throw FlagError("--agent: unknown agent '" + agent_flag + "' (expected default|adaptive)");
    }
    sc.agent = *agent;
  }
  if (seed) {
    sc.sim.seed = *seed;
    sc.analyzer.rng_seed = *seed;
    sc.analysis_latency.seed = *seed;
  }
  return sc;
}

std::string condition_label(const sim::Scenario& sc) {
  if (!sc.label.empty()) return sc.label;
  return condition_label(sc.route.segments.front().conditions);
}

sim::DriveLog run_mock(const sim::Scenario& sc, sim::AgentKind agent, std::ostream* trace) {
  analyzer::MockFrameAnalyzer mock(sc.analyzer, sc.policy);
  sim::RunOptions opts{condition_label(sc), sc.analysis_latency, trace};
  return sim::run_scenario(sc.route, agent, &mock, sc.policy, sc.sim, opts);
}

void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream f(path, std::ios::binary);
  if (!f) throw ConfigError("cannot write " + path.string());
  f << content;
}

int cmd_run(const RunFlags& flags, std::ostream& out, spdlog::logger& log) {
  sim::Scenario sc = prepare(flags.scenario, flags.agent, flags.seed);
  if (flags.analyzer != "mock" && flags.analyzer != "remote") {
    throw FlagError("--analyzer: expected mock|remote, got '" + flags.analyzer + "'");
  }
  const bool remote = flags.analyzer == "remote";
  if (remote && flags.endpoint.empty()) throw FlagError("--endpoint is required with --analyzer remote");
  if (flags.deadline_ms <= 0) throw FlagError("--deadline-ms must be > 0");

  std::ofstream trace_file;
  std::ostream* trace = nullptr;
  if (!flags.dump_bus.empty()) {
    const fs::path bus_path(flags.dump_bus);
    if (bus_path.has_parent_path()) fs::create_directories(bus_path.parent_path());
    trace_file.open(flags.dump_bus, std::ios::binary);
    if (!trace_file) throw ConfigError("cannot write " + flags.dump_bus);
    trace = &trace_file;
  }

  sim::DriveLog drive;
  sim::RunOptions opts{condition_label(sc), sc.analysis_latency, trace};
  if (remote) {
    analyzer::RemoteFrameAnalyzer client(
        analyzer::Endpoint{flags.endpoint, std::chrono::milliseconds(flags.deadline_ms)},
        analyzer::build_system_prompt(flags.mission, flags.destination),
        sc.analyzer.response_latency);
    drive = sim::run_scenario(sc.route, sc.agent, &client, sc.policy, sc.sim, opts);
  } else {
    analyzer::MockFrameAnalyzer mock(sc.analyzer, sc.policy);
    drive = sim::run_scenario(sc.route, sc.agent, &mock, sc.policy, sc.sim, opts);
  }

  const std::string stem = fs::path(flags.scenario).stem().string() + "_" +
                           std::string(sim::to_string(sc.agent)) + "_s" +
                           std::to_string(sc.sim.seed);
  const fs::path dir(flags.out);
  write_file(dir / (stem + ".csv"), sim::to_csv(drive));

  json side = sim::sidecar_json(drive);
  side["manifest"] = {{"scenario", flags.scenario},
                      {"agent", sim::to_string(sc.agent)},
                      {"seed", sc.sim.seed},
                      {"analyzer", flags.analyzer},
                      {"endpoint", remote ? json(flags.endpoint) : json(nullptr)},
                      {"resolved", sc.to_json()}};
  write_file(dir / (stem + ".json"), side.dump(2) + "\n");
  if (!drive.predictions.empty()) {
    std::ostringstream labels;
    metrics::write_label_jsonl(drive.predictions, labels);
    write_file(dir / (stem + "_labels.jsonl"), labels.str());
  }

  const auto& meta = drive.meta;
  out << (dir / (stem + ".csv")).string() << "\n";
  log.info("{} samples, {} frames, {} analyzer failures, {} fallback steps", drive.samples.size(),
           meta.frames_sent, meta.analyzer_failures, meta.fallback_steps);
  if (meta.analyzer_failures > 0) {
    log.warn("{} of {} analyzer requests failed; fallback directive applied for {} steps",
             meta.analyzer_failures, meta.frames_sent, meta.fallback_steps);
  }
  if (flags.max_failures && meta.analyzer_failures > *flags.max_failures) {
    log.error("analyzer failures {} exceed --max-analyzer-failures {}", meta.analyzer_failures,
              *flags.max_failures);
    return kAnalyzerFailure;
  }
  return kOk;
}

struct CompareCell {
  std::string condition;
  std::vector<double> f_default;
  std::vector<double> f_adaptive;
};

double mean(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return v.empty() ? 0.0 : s / static_cast<double>(v.size());
}

double log_smoothness(const sim::DriveLog& drive, double dt) {
  metrics::TimeSeries series;
  series.dt = dt;
  series.values.reserve(drive.samples.size());
  for (const auto& s : drive.samples) series.values.push_back(s.state.acceleration);
  return metrics::smoothness(series).f_dot_t;
}

int cmd_compare(const CompareFlags& flags, std::ostream& out, spdlog::logger& log) {
  const auto seeds = parse_seed_range(flags.seeds);
  std::vector<CompareCell> cells;
  std::vector<sim::Scenario> scenarios;
  for (const auto& path : flags.scenarios) {
    scenarios.push_back(prepare(path, "", std::nullopt));
    cells.push_back({condition_label(scenarios.back()), std::vector<double>(seeds.size()),
                     std::vector<double>(seeds.size())});
  }

  struct Job {
    std::size_t scenario, seed_index;
  };
  std::vector<Job> jobs;
  for (std::size_t s = 0; s < scenarios.size(); ++s) {
    for (std::size_t k = 0; k < seeds.size(); ++k) jobs.push_back({s, k});
  }
  std::atomic<std::size_t> next{0};
  std::mutex err_mutex;
  std::exception_ptr failure;
  auto worker = [&] {
    for (std::size_t i = next++; i < jobs.size(); i = next++) {
      try {
        const Job& job = jobs[i];
        sim::Scenario sc = scenarios[job.scenario];
        const std::uint64_t seed = seeds[job.seed_index];
        sc.sim.seed = seed;
        sc.analyzer.rng_seed = seed;
        sc.analysis_latency.seed = seed;
        auto d = run_mock(sc, sim::AgentKind::default_agent, nullptr);
        auto a = run_mock(sc, sim::AgentKind::adaptive, nullptr);
        cells[job.scenario].f_default[job.seed_index] = log_smoothness(d, sc.sim.dt);
        cells[job.scenario].f_adaptive[job.seed_index] = log_smoothness(a, sc.sim.dt);
      } catch (...) {
        std::lock_guard lock(err_mutex);
        if (!failure) failure = std::current_exception();
      }
    }
  };
  unsigned n_threads = flags.jobs ? flags.jobs : std::max(1u, std::thread::hardware_concurrency());
  n_threads = std::min<unsigned>(n_threads, static_cast<unsigned>(jobs.size()));
  {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < n_threads; ++t) pool.emplace_back(worker);
  }
  if (failure) std::rethrow_exception(failure);

  std::ostringstream csv;
  csv << "condition,agent,seeds,mean_f,min_f,max_f,per_seed_wins\n";
  out << std::left << std::setw(16) << "condition" << std::setw(10) << "agent" << std::right
      << std::setw(8) << "seeds" << std::setw(12) << "mean F" << std::setw(12) << "min F"
      << std::setw(12) << "max F" << "\n";
  for (const auto& c : cells) {
    std::size_t wins = 0;
    for (std::size_t k = 0; k < seeds.size(); ++k) wins += c.f_adaptive[k] <= c.f_default[k];
    for (const auto& [agent, values] :
         {std::pair{"default", &c.f_default}, std::pair{"adaptive", &c.f_adaptive}}) {
      const auto [lo, hi] = std::minmax_element(values->begin(), values->end());
      out << std::left << std::setw(16) << c.condition << std::setw(10) << agent << std::right
          << std::setw(8) << seeds.size() << std::fixed << std::setprecision(5) << std::setw(12)
          << mean(*values) << std::setw(12) << *lo << std::setw(12) << *hi << "\n";
      csv << c.condition << "," << agent << "," << seeds.size() << "," << mean(*values) << ","
          << *lo << "," << *hi << "," << (std::string_view(agent) == "adaptive" ? wins : 0)
          << "\n";
    }
    const bool ok = mean(c.f_adaptive) <= mean(c.f_default);
    out << "  verdict: " << (ok ? "adaptive <= default" : "adaptive > default") << " (adaptive "
        << "smoother or equal in " << wins << "/" << seeds.size() << " seeds)\n";
    out.unsetf(std::ios::floatfield);
  }
  if (!flags.out.empty()) {
    write_file(flags.out, csv.str());
    log.info("wrote {}", flags.out);
  }
  return kOk;
}

int cmd_eval_smoothness(const std::string& path, const std::string& csv_out, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  const auto series = metrics::read_drive_log_csv(in);
  const auto score = metrics::smoothness(series.accel);
  json j = metrics::smoothness_json(score);
  j["log"] = path;
  out << j.dump(2) << "\n";
  if (!csv_out.empty()) {
    std::ostringstream csv;
    metrics::write_smoothness_csv(series, metrics::relative_extrema(series.accel.values), csv);
    write_file(csv_out, csv.str());
  }
  return kOk;
}

int cmd_eval_accuracy(const std::string& path, const std::string& csv_out, std::ostream& out) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read " + path);
  const auto records = metrics::read_label_jsonl(in);
  const auto report = metrics::accuracy_report(records);
  json j = report.to_json();
  j["predictions"] = path;
  out << j.dump(2) << "\n";
  if (!csv_out.empty()) {
    std::ostringstream csv;
    metrics::write_accuracy_csv(report, csv);
    write_file(csv_out, csv.str());
  }
  return kOk;
}

policy::PolicyTable table_from(const std::string& path) {
  return path.empty() ? policy::PolicyTable::shipped_default() : policy::PolicyTable::load(path);
}

int cmd_gen_dataset(int per_combo, std::uint64_t seed, const std::string& path,
                    const std::string& policy_path, std::ostream& out, spdlog::logger& log) {
  const auto table = table_from(policy_path);
  std::size_t n = 0;
  if (path.empty() || path == "-") {
    n = dataset::write_jsonl(per_combo, table, seed, out);
  } else {
    fs::path p(path);
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream f(p, std::ios::binary);
    if (!f) throw ConfigError("cannot write " + path);
    n = dataset::write_jsonl(per_combo, table, seed, f);
    out << path << "\n";
  }
  log.info("{} samples", n);
  return kOk;
}

int cmd_validate(const std::string& path, const std::string& policy_path, std::ostream& out) {
  const auto report = dataset::validate_file(path, table_from(policy_path));
  out << report.to_json().dump(2) << "\n";
  return report.ok() ? kOk : kViolations;
}

int cmd_serve(const std::string& host, int port, const std::string& script,
              const std::string& policy_path, std::ostream& out) {
  auto s = script.empty() ? analyzer::ServerScript{} : analyzer::ServerScript::load(script);
  analyzer::MockAnalyzerServer server(std::move(s), table_from(policy_path));
  out << "mock analyzer listening on http://" << host << ":" << port << std::endl;
  server.listen_blocking(host, port);
  return kOk;
}

}  // namespace

std::vector<std::uint64_t> parse_seed_range(const std::string& text) {
  auto num = [&](const std::string& s) -> std::uint64_t {
    if (s.empty() || s.find_first_not_of("0123456789") != std::string::npos) {
      throw FlagError("--seeds: expected N or N..M, got '" + text + "'");
    }
    return std::stoull(s);
  };
  const auto dots = text.find("..");
  std::uint64_t lo = 0;
  std::uint64_t hi = 0;
  if (dots == std::string::npos) {
    lo = hi = num(text);
  } else {
    lo = num(text.substr(0, dots));
    hi = num(text.substr(dots + 2));
  }
  if (hi < lo) throw FlagError("--seeds: empty range '" + text + "'");
  if (hi - lo >= 100000) throw FlagError("--seeds: range too large");
  std::vector<std::uint64_t> out;
  for (std::uint64_t s = lo; s <= hi; ++s) out.push_back(s);
  return out;
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  auto log = make_logger(err);
  CLI::App app{"Scene-analysis co-driver: simulation, evaluation and dataset tools", "codriver"};
  app.require_subcommand(1);

  RunFlags rf;
  auto* run_cmd = app.add_subcommand("run", "Run one scenario and write its drive log");
  run_cmd->add_option("--scenario", rf.scenario, "Scenario JSON")->required();
  run_cmd->add_option("--agent", rf.agent, "default|adaptive (overrides the scenario)");
  run_cmd->add_option("--seed", rf.seed, "Seed for the road, analyzer and bus streams");
  run_cmd->add_option("--analyzer", rf.analyzer, "mock|remote");
  run_cmd->add_option("--endpoint", rf.endpoint, "Analyzer server URL for remote mode");
  run_cmd->add_option("--deadline-ms", rf.deadline_ms, "Remote request deadline");
  run_cmd->add_option("--out", rf.out, "Output directory");
  run_cmd->add_option("--dump-bus", rf.dump_bus, "Write all bus traffic as JSON lines");
  run_cmd->add_option("--max-analyzer-failures", rf.max_failures,
                      "Exit 3 when more analyzer requests fail");
  run_cmd->add_option("--mission", rf.mission, "Mission for the remote system prompt");
  run_cmd->add_option("--destination", rf.destination, "Destination for the remote system prompt");

  CompareFlags cf;
  auto* cmp = app.add_subcommand("compare", "Compare default and adaptive smoothness over seeds");
  cmp->add_option("--scenario", cf.scenarios, "Scenario JSON (repeatable)")->required();
  cmp->add_option("--seeds", cf.seeds, "N..M inclusive");
  cmp->add_option("--out", cf.out, "CSV output path");
  cmp->add_option("--jobs", cf.jobs, "Worker threads (0 = hardware)");

  auto* eval = app.add_subcommand("eval", "Evaluate logs");
  eval->require_subcommand(1);
  std::string eval_path;
  std::string eval_csv;
  auto* ev_s = eval->add_subcommand("smoothness", "Smoothness of a drive-log CSV");
  ev_s->add_option("log", eval_path, "Drive log CSV")->required();
  ev_s->add_option("--csv", eval_csv, "Per-sample extrema CSV output");
  auto* ev_a = eval->add_subcommand("accuracy", "Label accuracy of a prediction JSONL");
  ev_a->add_option("predictions", eval_path, "Prediction JSONL")->required();
  ev_a->add_option("--csv", eval_csv, "Per-category CSV output");

  int per_combo = 1;
  std::uint64_t ds_seed = 0;
  std::string ds_out;
  std::string policy_path;
  auto* gen = app.add_subcommand("gen-dataset", "Generate the prompt dataset as JSON lines");
  gen->add_option("--per-combo", per_combo, "Samples per grid cell")->check(CLI::PositiveNumber);
  gen->add_option("--seed", ds_seed, "Phrasing seed");
  gen->add_option("--out", ds_out, "Output file (stdout if omitted)");
  gen->add_option("--policy", policy_path, "Policy table JSON");

  std::string vd_path;
  auto* vd = app.add_subcommand("validate-dataset", "Check a dataset file against the policy");
  vd->add_option("file", vd_path, "Dataset JSONL")->required();
  vd->add_option("--policy", policy_path, "Policy table JSON");

  std::string host = "127.0.0.1";
  int port = 8080;
  std::string script;
  auto* serve = app.add_subcommand("serve-mock", "Serve the scripted mock analyzer");
  serve->add_option("--host", host, "Bind address");
  serve->add_option("--port", port, "Port");
  serve->add_option("--script", script, "Response script JSON");
  serve->add_option("--policy", policy_path, "Policy table JSON");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  if (!rev.empty()) rev.pop_back();
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    err << e.what() << "\n";
    return kConfigError;
  }

  try {
    if (*run_cmd) return cmd_run(rf, out, *log);
    if (*cmp) return cmd_compare(cf, out, *log);
    if (*ev_s) return cmd_eval_smoothness(eval_path, eval_csv, out);
    if (*ev_a) return cmd_eval_accuracy(eval_path, eval_csv, out);
    if (*gen) return cmd_gen_dataset(per_combo, ds_seed, ds_out, policy_path, out, *log);
    if (*vd) return cmd_validate(vd_path, policy_path, out);
    if (*serve) return cmd_serve(host, port, script, policy_path, out);
  } catch (const analyzer::AnalyzerError& e) {
    log->error("{}", e.what());
    return kAnalyzerFailure;
  } catch (const Error& e) {
    log->error("{}", e.what());
    return kConfigError;
  } catch (const json::exception& e) {
    log->error("malformed JSON: {}", e.what());
    return kConfigError;
  }
  return kConfigError;
}

}  // namespace codriver::cli
