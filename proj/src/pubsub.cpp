#include "codriver/pubsub.hpp"

#include <cmath>

#include "codriver/rng.hpp"

namespace codriver::pubsub {

using nlohmann::json;

void Bus::register_topic(const std::string& topic, const std::string& type_tag,
                         LatencyModel latency) {
  if (!(latency.fixed >= 0.0) || !(latency.jitter_std >= 0.0) || !std::isfinite(latency.fixed) ||
      !std::isfinite(latency.jitter_std)) {
    throw ConfigError("latency of topic " + topic + " must be finite and >= 0");
  }
  std::lock_guard lock(mutex_);
  auto [it, inserted] = topics_.try_emplace(topic, Topic{type_tag, latency, 0, {}});
  if (!inserted && it->second.type_tag != type_tag) {
    throw BusError(Errc::type_mismatch, "topic " + topic + " already carries " +
                                            it->second.type_tag);
  }
  it->second.latency = latency;
}

Bus::Topic& Bus::topic_or_throw(std::string_view name) {
  auto it = topics_.find(name);
  if (it == topics_.end()) {
    throw BusError(Errc::unknown_topic, "unknown topic " + std::string(name));
  }
  return it->second;
}

SubscriptionId Bus::subscribe(std::string_view topic) {
  std::lock_guard lock(mutex_);
  Topic& t = topic_or_throw(topic);
  const SubscriptionId id = next_sub_++;
  subs_.emplace(id, Subscription{std::string(topic), {}});
  t.subscribers.push_back(id);
  return id;
}

void Bus::set_trace(std::ostream* out) {
  std::lock_guard lock(mutex_);
  trace_.store(out);
}

Ack Bus::publish_erased(std::string_view topic, std::string_view tag,
                        std::shared_ptr<const std::any> payload, double t_now,
                        const json& trace_payload) {
  std::lock_guard lock(mutex_);
  Topic& t = topic_or_throw(topic);
  if (t.type_tag != tag) {
    throw BusError(Errc::type_mismatch, "topic " + std::string(topic) + " carries " + t.type_tag +
                                            ", not " + std::string(tag));
  }
  const std::uint64_t seq = t.next_seq++;
  double latency = t.latency.fixed;
  if (t.latency.jitter_std > 0.0) {
    auto g = rng::stream(t.latency.seed, rng::Domain::bus,
                         {std::hash<std::string_view>{}(topic), seq});
    latency += std::abs(rng::standard_normal(g)) * t.latency.jitter_std;
  }
  const Envelope env{std::move(payload), t_now, t_now + latency, seq};
  for (SubscriptionId id : t.subscribers) subs_.at(id).queue.push(env);
  if (auto* trace = trace_.load()) {
    *trace << json{{"event", "publish"}, {"topic", topic}, {"type", tag}, {"seq", seq},
                    {"t", t_now}, {"deliver_at", env.deliver_at}, {"payload", trace_payload}}
                   .dump()
            << '\n';
  }
  return {seq, env.deliver_at};
}

std::vector<Bus::Envelope> Bus::poll_erased(SubscriptionId sub, std::string_view tag,
                                            double t_now) {
  std::lock_guard lock(mutex_);
  auto it = subs_.find(sub);
  if (it == subs_.end()) throw BusError(Errc::unknown_topic, "unknown subscription");
  Topic& t = topic_or_throw(it->second.topic);
  if (t.type_tag != tag) {
    throw BusError(Errc::type_mismatch,
                   "subscription to " + it->second.topic + " polled as " + std::string(tag));
  }
  std::vector<Envelope> out;
  Queue& q = it->second.queue;
  while (!q.empty() && q.top().deliver_at <= t_now) {
    out.push_back(q.top());
    q.pop();
    if (auto* trace = trace_.load()) {
      *trace << json{{"event", "deliver"}, {"topic", it->second.topic}, {"subscription", sub},
                      {"seq", out.back().seq}, {"t", t_now}}
                     .dump()
              << '\n';
    }
  }
  return out;
}

}  // namespace codriver::pubsub
