#include "codriver/mock_server.hpp"

#include <fstream>

#include "codriver/behavior_tree.hpp"
#include "codriver/labels.hpp"
#include "httplib.h"

namespace codriver::analyzer {

using nlohmann::json;

namespace {

ScriptStep step_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("script step must be an object");
  ScriptStep s;
  const std::string mode = j.value("mode", j.contains("text") ? "fixed" : "oracle");
  if (mode == "oracle") {
    s.mode = ScriptStep::Mode::oracle;
  } else if (mode == "fixed") {
    s.mode = ScriptStep::Mode::fixed;
  } else if (mode == "malformed") {
    s.mode = ScriptStep::Mode::malformed;
  } else {
    throw ConfigError("unknown script mode '" + mode + "'");
  }
  s.status = j.value("status", 200);
  s.text = j.value("text", std::string{});
  const double delay_ms = j.value("delay_ms", 0.0);
  if (!(delay_ms >= 0.0)) throw ConfigError("delay_ms must be >= 0");
  s.delay = std::chrono::milliseconds(static_cast<std::int64_t>(delay_ms));
  return s;
}

}  // namespace

ServerScript ServerScript::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("server script must be an object");
  ServerScript script;
  if (j.contains("steps")) {
    for (const json& s : j.at("steps")) script.steps.push_back(step_from_json(s));
  }
  script.repeat = j.value("repeat", false);
  if (j.contains("default")) script.fallback = step_from_json(j.at("default"));
  return script;
}

ServerScript ServerScript::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open server script " + path.string());
  json j = json::parse(in, nullptr, false);
  if (j.is_discarded()) throw ConfigError("server script " + path.string() + " is not JSON");
  return from_json(j);
}

const ScriptStep& ServerScript::step_for(std::size_t i) const {
  if (i < steps.size()) return steps[i];
  if (repeat && !steps.empty()) return steps[i % steps.size()];
  return fallback;
}

MockAnalyzerServer::MockAnalyzerServer(ServerScript script, policy::PolicyTable table)
    : script_(std::move(script)), table_(std::move(table)),
      server_(std::make_unique<httplib::Server>()) {
  install_routes();
}

MockAnalyzerServer::~MockAnalyzerServer() { stop(); }

void MockAnalyzerServer::install_routes() {
  server_->Post("/v1/analyze", [this](const httplib::Request& req, httplib::Response& res) {
    const std::size_t arrival = requests_.fetch_add(1);
    json body = json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.is_object()) {
      res.status = 400;
      res.set_content(R"({"error":"request is not JSON"})", "application/json");
      return;
    }
    // Keyed by frame id so concurrent requests see the same schedule every run.
    std::size_t index = arrival;
    if (body.contains("frame_id") && body.at("frame_id").is_number_unsigned()) {
      index = body.at("frame_id").get<std::size_t>();
    }
    const ScriptStep& step = script_.step_for(index);
    if (step.delay.count() > 0) std::this_thread::sleep_for(step.delay);
    res.status = step.status;
    if (step.status != 200) {
      res.set_content(R"({"error":"scripted failure"})", "application/json");
      return;
    }
    switch (step.mode) {
      case ScriptStep::Mode::malformed:
        res.set_content(R"({"answer": 42})", "application/json");
        return;
      case ScriptStep::Mode::fixed:
        res.set_content(json{{"text", step.text}}.dump(), "application/json");
        return;
      case ScriptStep::Mode::oracle: break;
    }
    std::optional<SceneLabels> labels;
    if (body.contains("scene_text") && body.at("scene_text").is_string()) {
      labels = parse_scene_text(body.at("scene_text").get<std::string>());
    }
    if (!labels) {
      res.status = 422;
      res.set_content(R"({"error":"scene_text missing or unreadable"})", "application/json");
      return;
    }
    const std::string tree =
        bt::serialize(bt::make_instruction_tree(*labels, policy::lookup(*labels, table_)));
    res.set_content(json{{"text", "Scene analysis follows.\n" + tree + "Drive safely."}}.dump(),
                    "application/json");
  });
}

int MockAnalyzerServer::start(const std::string& host, int port) {
  host_ = host;
  port_ = port == 0 ? server_->bind_to_any_port(host) : (server_->bind_to_port(host, port) ? port : -1);
  if (port_ <= 0) throw Error("mock server cannot bind " + host + ":" + std::to_string(port));
  thread_ = std::thread([this] { server_->listen_after_bind(); });
  server_->wait_until_ready();
  return port_;
}

void MockAnalyzerServer::listen_blocking(const std::string& host, int port) {
  host_ = host;
  port_ = port;
  if (!server_->listen(host, port)) {
    throw Error("mock server cannot listen on " + host + ":" + std::to_string(port));
  }
}

void MockAnalyzerServer::stop() {
  if (server_) server_->stop();
  if (thread_.joinable()) thread_.join();
}

std::string MockAnalyzerServer::url() const {
  return "http://" + host_ + ":" + std::to_string(port_);
}

}  // namespace codriver::analyzer
