#pragma once

// Scriptable stand-in for an inference server speaking the analysis protocol.
// Used by integration tests and by `codriver serve-mock`.

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "codriver/policy.hpp"
#include "json.hpp"

namespace httplib {
class Server;
}

namespace codriver::analyzer {

/// How the server answers one request.
struct ScriptStep {
  enum class Mode : std::uint8_t {
    oracle,     // read scene_text, answer with the policy's instruction tree
    fixed,      // answer with `text`
    malformed,  // 200 with a body that is not {"text": string}
  };
  Mode mode = Mode::oracle;
  int status = 200;
  std::string text;
  std::chrono::milliseconds delay{0};
};

/// Request i is answered by steps[i]; past the end, steps repeat when `repeat`
/// is set, otherwise `fallback` answers.
struct ServerScript {
  std::vector<ScriptStep> steps;
  bool repeat = false;
  ScriptStep fallback;

  /// {"steps": [{"mode", "status", "text", "delay_ms"}...], "repeat": bool, "default": {...}}
  static ServerScript from_json(const nlohmann::json& j);
  static ServerScript load(const std::filesystem::path& path);
  /// Step for a request; requests carrying a frame_id use it as the index,
  /// others use their arrival order.
  const ScriptStep& step_for(std::size_t request_index) const;
};

class MockAnalyzerServer {
 public:
  MockAnalyzerServer(ServerScript script, policy::PolicyTable table);
  ~MockAnalyzerServer();
  MockAnalyzerServer(const MockAnalyzerServer&) = delete;
  MockAnalyzerServer& operator=(const MockAnalyzerServer&) = delete;

  /// Binds and starts serving on a background thread. Port 0 picks a free port.
  /// Returns the bound port.
  int start(const std::string& host = "127.0.0.1", int port = 0);
  /// Serves on the calling thread until stop() is called from elsewhere.
  void listen_blocking(const std::string& host, int port);
  void stop();

  std::string url() const;
  std::size_t request_count() const { return requests_.load(); }

 private:
  void install_routes();

  ServerScript script_;
  policy::PolicyTable table_;
  std::unique_ptr<httplib::Server> server_;
  std::thread thread_;
  std::atomic<std::size_t> requests_{0};
  std::string host_;
  int port_ = 0;
};

}  // namespace codriver::analyzer
