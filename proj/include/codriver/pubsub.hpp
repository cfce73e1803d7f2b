#pragma once

// In-process typed topic bus driven by simulated time. Messages carry a
// delivery time (publish time plus a latency sample) and are handed out by
// poll() once the caller's clock reaches it.

#include <any>
#include <atomic>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <ostream>
#include <queue>
#include <string>
#include <string_view>
#include <vector>

#include "codriver/error.hpp"
#include "json.hpp"

namespace codriver::pubsub {

enum class Errc : std::uint8_t { unknown_topic, type_mismatch };

class BusError : public Error {
 public:
  BusError(Errc code, const std::string& what) : Error(what), code_(code) {}
  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

/// Latency = fixed + |N(0, jitter_std)| (normal truncated at zero), seeded.
struct LatencyModel {
  double fixed = 0.0;
  double jitter_std = 0.0;
  std::uint64_t seed = 0;
};

/// Specialize for every message type: `static constexpr std::string_view tag`
/// and `static nlohmann::json to_json(const T&)`.
template <class T>
struct MessageTraits;

template <class T>
struct Delivery {
  T message;
  double published_at = 0.0;
  double deliver_at = 0.0;
  std::uint64_t seq = 0;
};

struct Ack {
  std::uint64_t seq = 0;
  double deliver_at = 0.0;
};

using SubscriptionId = std::uint64_t;

class Bus {
 public:
  Bus() = default;

  template <class T>
  void advertise(const std::string& topic, LatencyModel latency = {}) {
    register_topic(topic, std::string(MessageTraits<T>::tag), latency);
  }
  void register_topic(const std::string& topic, const std::string& type_tag, LatencyModel latency);

  template <class T>
  Ack publish(std::string_view topic, T message, double t_now) {
    nlohmann::json payload;
    if (trace_.load()) payload = MessageTraits<T>::to_json(message);
    return publish_erased(topic, MessageTraits<T>::tag,
                          std::make_shared<const std::any>(std::move(message)), t_now, payload);
  }

  SubscriptionId subscribe(std::string_view topic);

  /// All messages with deliver_at <= t_now, ordered by (deliver_at, seq).
  template <class T>
  std::vector<Delivery<T>> poll(SubscriptionId sub, double t_now) {
    std::vector<Delivery<T>> out;
    for (auto& m : poll_erased(sub, MessageTraits<T>::tag, t_now)) {
      out.push_back({std::any_cast<const T&>(*m.payload), m.published_at, m.deliver_at, m.seq});
    }
    return out;
  }

  /// Writes one JSON object per publish and per delivery. Pass nullptr to stop.
  void set_trace(std::ostream* out);

 private:
  struct Envelope {
    std::shared_ptr<const std::any> payload;
    double published_at;
    double deliver_at;
    std::uint64_t seq;
    bool operator>(const Envelope& o) const {
      return deliver_at != o.deliver_at ? deliver_at > o.deliver_at : seq > o.seq;
    }
  };
  using Queue = std::priority_queue<Envelope, std::vector<Envelope>, std::greater<>>;

  struct Topic {
    std::string type_tag;
    LatencyModel latency;
    std::uint64_t next_seq = 0;
    std::vector<SubscriptionId> subscribers;
  };
  struct Subscription {
    std::string topic;
    Queue queue;
  };

  Ack publish_erased(std::string_view topic, std::string_view tag,
                     std::shared_ptr<const std::any> payload, double t_now,
                     const nlohmann::json& trace_payload);
  std::vector<Envelope> poll_erased(SubscriptionId sub, std::string_view tag, double t_now);
  Topic& topic_or_throw(std::string_view name);

  std::mutex mutex_;
  std::map<std::string, Topic, std::less<>> topics_;
  std::map<SubscriptionId, Subscription> subs_;
  SubscriptionId next_sub_ = 1;
  std::atomic<std::ostream*> trace_{nullptr};
};

}  // namespace codriver::pubsub
