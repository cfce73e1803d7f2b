#include "codriver/analyzer.hpp"

#include <cmath>
#include <thread>

#include "codriver/behavior_tree.hpp"
#include "codriver/rng.hpp"
#include "httplib.h"

namespace codriver::analyzer {

using nlohmann::json;

namespace {
// Tolerance when comparing simulated due times against the stepper clock.
constexpr double kTimeEps = 1e-9;
}  // namespace

void AnalyzerConfig::validate() const {
  for (Category c : kCategories) {
    const double p = error_rate_for(c);
    if (!(p >= 0.0 && p <= 1.0)) {
      throw ConfigError("error rate for " + std::string(category_name(c)) + " must be in [0,1]");
    }
  }
  if (!std::isfinite(response_latency) || response_latency < 0.0) {
    throw ConfigError("response_latency must be finite and >= 0");
  }
}

AnalyzerConfig AnalyzerConfig::from_json(const json& j) {
  AnalyzerConfig cfg;
  if (!j.is_object()) throw ConfigError("analyzer config must be an object");
  if (j.contains("error_rate")) {
    const json& e = j.at("error_rate");
    if (e.is_number()) {
      cfg.set_all_error_rates(e.get<double>());
    } else if (e.is_object()) {
      for (const auto& [key, value] : e.items()) {
        auto cat = parse_category(key);
        if (!cat) throw ConfigError("unknown analyzer category '" + key + "'");
        if (!value.is_number()) throw ConfigError("error rate must be a number");
        cfg.error_rate[static_cast<int>(*cat)] = value.get<double>();
      }
    } else {
      throw ConfigError("error_rate must be a number or an object");
    }
  }
  if (j.contains("seed")) cfg.rng_seed = j.at("seed").get<std::uint64_t>();
  if (j.contains("response_latency")) cfg.response_latency = j.at("response_latency").get<double>();
  cfg.validate();
  return cfg;
}

json AnalyzerConfig::to_json() const {
  json rates = json::object();
  for (Category c : kCategories) rates[std::string(category_name(c))] = error_rate_for(c);
  return {{"error_rate", rates}, {"seed", rng_seed}, {"response_latency", response_latency}};
}

EnvironmentEstimate mock_estimate(const SceneFrame& frame, const AnalyzerConfig& cfg) {
  EnvironmentEstimate est{frame.truth, frame.frame_id, EstimateSource::mock};
  for (Category c : kCategories) {
    auto g = rng::stream(cfg.rng_seed, rng::Domain::analyzer,
                         {frame.frame_id, static_cast<std::uint64_t>(c)});
    if (rng::uniform01(g) >= cfg.error_rate_for(c)) continue;
    const int truth = label_index(frame.truth, c);
    int wrong = std::uniform_int_distribution<int>(0, label_count(c) - 2)(g);
    if (wrong >= truth) ++wrong;
    set_label_index(est.labels, c, wrong);
  }
  return est;
}

std::string mock_analyze(const SceneFrame& frame, const AnalyzerConfig& cfg,
                         const policy::PolicyTable& table) {
  const EnvironmentEstimate est = mock_estimate(frame, cfg);
  return bt::serialize(bt::make_instruction_tree(est.labels, policy::lookup(est, table)));
}

std::string build_system_prompt(std::string_view mission, std::string_view destination) {
  std::string p;
  p += "You are the driving assistant of an autonomous ego vehicle.\n";
  p += "Mission: ";
  p += mission;
  p += "\nDestination: ";
  p += destination;
  p += "\n\nStep 1. From the front camera view, classify the environment:\n";
  for (Category c : kCategories) {
    p += "  ";
    p += category_name(c);
    p += ":";
    for (int i = 0; i < label_count(c); ++i) {
      p += i == 0 ? " " : " | ";
      p += label_name(c, i);
    }
    p += '\n';
  }
  p += "Step 2. From that analysis, suggest control and behavior levels:\n";
  p += "  control_type: sport | normal | cautious | defensive\n";
  p += "  max_speed (km/h), max_brake (0..1), max_throttle (0..1),\n";
  p += "  max_acceleration (m/s^2), max_steering_speed (rad/s)\n\n";
  p += "Answer with exactly one behavior tree in this format:\n";
  p += "root {\n";
  p += "  sequence:environment_analysis {\n";
  for (Category c : kCategories) {
    p += "    condition:";
    p += category_name(c);
    p += " = \"<label>\"\n";
  }
  p += "  }\n";
  p += "  sequence:driving_suggestion {\n";
  p += "    action:control_type = \"<tier>\"\n";
  for (const char* key :
       {"max_speed", "max_brake", "max_throttle", "max_acceleration", "max_steering_speed"}) {
    p += "    action:";
    p += key;
    p += " = <number>\n";
  }
  p += "  }\n";
  p += "}\n";
  return p;
}

std::string_view to_string(Errc e) {
  switch (e) {
    case Errc::timeout: return "Timeout";
    case Errc::protocol_error: return "ProtocolError";
    case Errc::transport_error: return "TransportError";
  }
  return "Unknown";
}

json make_request(const SceneFrame& frame, std::string_view system_prompt) {
  json body = {{"system_prompt", system_prompt},
               {"image_b64", nullptr},
               {"scene_text", render_scene_text(frame.truth)},
               {"frame_id", frame.frame_id}};
  if (frame.image_ref) body["image_b64"] = *frame.image_ref;
  return body;
}

std::string PendingRequest::wait() {
  const auto until = started_ + deadline_;
  if (result_.wait_until(until) != std::future_status::ready) {
    throw AnalyzerError(Errc::timeout,
                        "no response within " + std::to_string(deadline_.count()) + " ms");
  }
  return result_.get();
}

struct RemoteClient::Worker {
  std::jthread thread;
  std::shared_ptr<std::atomic<bool>> done = std::make_shared<std::atomic<bool>>(false);
};

RemoteClient::RemoteClient(Endpoint endpoint) : endpoint_(std::move(endpoint)) {}

RemoteClient::~RemoteClient() {
  std::lock_guard lock(mutex_);
  workers_.clear();  // jthread joins
}

void RemoteClient::reap() {
  std::erase_if(workers_, [](const std::unique_ptr<Worker>& w) { return w->done->load(); });
}

namespace {

std::string perform_request(const Endpoint& ep, const std::string& body) {
  const auto started = std::chrono::steady_clock::now();
  httplib::Client client(ep.url);
  if (!client.is_valid()) throw AnalyzerError(Errc::transport_error, "bad endpoint " + ep.url);
  client.set_connection_timeout(ep.deadline);
  client.set_read_timeout(ep.deadline);
  client.set_write_timeout(ep.deadline);
  auto res = client.Post("/v1/analyze", body, "application/json");
  if (!res) {
    const auto err = res.error();
    const auto elapsed = std::chrono::steady_clock::now() - started;
    if (err == httplib::Error::ConnectionTimeout ||
        (err == httplib::Error::Read && elapsed >= ep.deadline * 8 / 10)) {
      throw AnalyzerError(Errc::timeout, "request timed out: " + httplib::to_string(err));
    }
    throw AnalyzerError(Errc::transport_error, "transport failure: " + httplib::to_string(err));
  }
  if (res->status != 200) {
    throw AnalyzerError(Errc::transport_error, "HTTP status " + std::to_string(res->status));
  }
  json reply = json::parse(res->body, nullptr, false);
  if (reply.is_discarded() || !reply.is_object() || !reply.contains("text") ||
      !reply.at("text").is_string()) {
    throw AnalyzerError(Errc::protocol_error, "response is not {\"text\": string}");
  }
  return reply.at("text").get<std::string>();
}

}  // namespace

PendingRequest RemoteClient::submit(const SceneFrame& frame, const std::string& system_prompt) {
  const auto started = std::chrono::steady_clock::now();
  std::promise<std::string> promise;
  auto future = promise.get_future();
  auto worker = std::make_unique<Worker>();
  auto done = worker->done;
  worker->thread = std::jthread([ep = endpoint_, body = make_request(frame, system_prompt).dump(),
                                 promise = std::move(promise), done]() mutable {
    try {
      promise.set_value(perform_request(ep, body));
    } catch (...) {
      promise.set_exception(std::current_exception());
    }
    done->store(true);
  });
  {
    std::lock_guard lock(mutex_);
    reap();
    workers_.push_back(std::move(worker));
  }
  return PendingRequest(std::move(future), started, endpoint_.deadline);
}

std::string remote_analyze(const SceneFrame& frame, const Endpoint& endpoint,
                           const std::string& system_prompt) {
  RemoteClient client(endpoint);
  return client.analyze(frame, system_prompt);
}

MockFrameAnalyzer::MockFrameAnalyzer(AnalyzerConfig cfg, policy::PolicyTable table)
    : cfg_(std::move(cfg)), table_(std::move(table)) {
  cfg_.validate();
}

void MockFrameAnalyzer::submit(const SceneFrame& frame) {
  if (last_id_ && frame.frame_id <= *last_id_) throw Error("frame ids must strictly increase");
  last_id_ = frame.frame_id;
  AnalysisResult r{frame.frame_id, frame.timestamp, mock_analyze(frame, cfg_, table_), {}, {}};
  pending_.emplace_back(frame.timestamp + cfg_.response_latency, std::move(r));
}

std::vector<AnalysisResult> MockFrameAnalyzer::collect(double t_now) {
  std::vector<AnalysisResult> out;
  while (!pending_.empty() && pending_.front().first <= t_now + kTimeEps) {
    out.push_back(std::move(pending_.front().second));
    pending_.pop_front();
  }
  return out;
}

RemoteFrameAnalyzer::RemoteFrameAnalyzer(Endpoint endpoint, std::string system_prompt,
                                         double response_latency)
    : client_(std::move(endpoint)),
      system_prompt_(std::move(system_prompt)),
      latency_(response_latency) {
  if (!std::isfinite(latency_) || latency_ < 0.0) {
    throw ConfigError("response_latency must be finite and >= 0");
  }
}

void RemoteFrameAnalyzer::submit(const SceneFrame& frame) {
  if (last_id_ && frame.frame_id <= *last_id_) throw Error("frame ids must strictly increase");
  last_id_ = frame.frame_id;
  pending_.push_back(
      {frame.timestamp + latency_, frame.frame_id, frame.timestamp,
       client_.submit(frame, system_prompt_)});
}

std::vector<AnalysisResult> RemoteFrameAnalyzer::collect(double t_now) {
  std::vector<AnalysisResult> out;
  while (!pending_.empty() && pending_.front().due <= t_now + kTimeEps) {
    Pending p = std::move(pending_.front());
    pending_.pop_front();
    AnalysisResult r{p.frame_id, p.frame_time, {}, {}, {}};
    try {
      r.text = p.request.wait();
    } catch (const AnalyzerError& e) {
      r.error = e.code();
      r.message = e.what();
    } catch (const std::exception& e) {
      r.error = Errc::transport_error;
      r.message = e.what();
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace codriver::analyzer
