#pragma once

// Scene analysis: turns a scene frame into behavior-tree instruction text.
// Two backends: a seeded mock that corrupts ground truth at configurable
// per-category rates, and an HTTP client for an external inference server.

#include <array>
#include <chrono>
#include <cstdint>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "codriver/error.hpp"
#include "codriver/labels.hpp"
#include "codriver/policy.hpp"
#include "json.hpp"

namespace codriver::analyzer {

struct SceneFrame {
  std::uint64_t frame_id = 0;
  double timestamp = 0.0;
  ScenarioConditions truth;
  std::optional<std::string> image_ref;
};

struct AnalyzerConfig {
  std::array<double, 5> error_rate{};  // indexed by Category
  std::uint64_t rng_seed = 0;
  double response_latency = 0.0;  // simulated seconds from frame to usable result

  void set_all_error_rates(double eps) { error_rate.fill(eps); }
  double error_rate_for(Category c) const { return error_rate[static_cast<int>(c)]; }
  /// Throws ConfigError unless every rate is in [0,1] and the latency is finite and >= 0.
  void validate() const;

  /// Accepts {"error_rate": p | {category: p, ...}, "seed": n, "response_latency": s}.
  static AnalyzerConfig from_json(const nlohmann::json& j);
  nlohmann::json to_json() const;
};

/// Step 1 only: the mock's (possibly corrupted) label estimate for a frame.
EnvironmentEstimate mock_estimate(const SceneFrame& frame, const AnalyzerConfig& cfg);

/// Estimate, then policy lookup on the estimate, serialized as an instruction tree.
std::string mock_analyze(const SceneFrame& frame, const AnalyzerConfig& cfg,
                         const policy::PolicyTable& table);

std::string build_system_prompt(std::string_view mission, std::string_view destination);

enum class Errc : std::uint8_t { timeout, protocol_error, transport_error };
std::string_view to_string(Errc e);

class AnalyzerError : public Error {
 public:
  AnalyzerError(Errc code, const std::string& what) : Error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

struct Endpoint {
  std::string url;  // scheme://host:port, e.g. http://127.0.0.1:8080
  std::chrono::milliseconds deadline{1000};
};

/// Request body for POST /v1/analyze.
nlohmann::json make_request(const SceneFrame& frame, std::string_view system_prompt);

/// Handle to an in-flight request.
class PendingRequest {
 public:
  PendingRequest(std::future<std::string> result, std::chrono::steady_clock::time_point started,
                 std::chrono::milliseconds deadline)
      : result_(std::move(result)), started_(started), deadline_(deadline) {}

  /// Blocks until the response or the deadline (measured from submission).
  /// Returns the response text or throws AnalyzerError.
  std::string wait();

 private:
  std::future<std::string> result_;
  std::chrono::steady_clock::time_point started_;
  std::chrono::milliseconds deadline_;
};

/// HTTP client for the analysis protocol. Requests run on worker threads owned
/// by the client; the destructor joins them.
class RemoteClient {
 public:
  explicit RemoteClient(Endpoint endpoint);
  ~RemoteClient();
  RemoteClient(const RemoteClient&) = delete;
  RemoteClient& operator=(const RemoteClient&) = delete;

  PendingRequest submit(const SceneFrame& frame, const std::string& system_prompt);
  std::string analyze(const SceneFrame& frame, const std::string& system_prompt) {
    return submit(frame, system_prompt).wait();
  }
  const Endpoint& endpoint() const { return endpoint_; }

 private:
  struct Worker;
  void reap();

  Endpoint endpoint_;
  std::mutex mutex_;
  std::vector<std::unique_ptr<Worker>> workers_;
};

/// One-shot request; returns the raw response text.
std::string remote_analyze(const SceneFrame& frame, const Endpoint& endpoint,
                           const std::string& system_prompt);

/// Outcome of one frame's analysis, delivered at its simulated due time.
struct AnalysisResult {
  std::uint64_t frame_id = 0;
  double frame_time = 0.0;
  std::optional<std::string> text;  // empty on failure
  std::optional<Errc> error;
  std::string message;
};

/// Pipeline stage. Results for a frame become due at
/// frame.timestamp + response_latency in simulated time.
class FrameAnalyzer {
 public:
  virtual ~FrameAnalyzer() = default;
  /// Frame ids must strictly increase.
  virtual void submit(const SceneFrame& frame) = 0;
  /// Results due at or before t_now, in submission order.
  virtual std::vector<AnalysisResult> collect(double t_now) = 0;
  virtual EstimateSource source() const = 0;
};

class MockFrameAnalyzer final : public FrameAnalyzer {
 public:
  MockFrameAnalyzer(AnalyzerConfig cfg, policy::PolicyTable table);
  void submit(const SceneFrame& frame) override;
  std::vector<AnalysisResult> collect(double t_now) override;
  EstimateSource source() const override { return EstimateSource::mock; }

 private:
  AnalyzerConfig cfg_;
  policy::PolicyTable table_;
  std::optional<std::uint64_t> last_id_;
  std::deque<std::pair<double, AnalysisResult>> pending_;
};

/// Waits for each response when it falls due, never past the endpoint deadline.
/// Because due times are simulated, a run is reproducible as long as the server
/// answers the same way within the deadline.
class RemoteFrameAnalyzer final : public FrameAnalyzer {
 public:
  RemoteFrameAnalyzer(Endpoint endpoint, std::string system_prompt, double response_latency);
  void submit(const SceneFrame& frame) override;
  std::vector<AnalysisResult> collect(double t_now) override;
  EstimateSource source() const override { return EstimateSource::remote; }

 private:
  struct Pending {
    double due;
    std::uint64_t frame_id;
    double frame_time;
    PendingRequest request;
  };
  RemoteClient client_;
  std::string system_prompt_;
  double latency_;
  std::optional<std::uint64_t> last_id_;
  std::deque<Pending> pending_;
};

}  // namespace codriver::analyzer
