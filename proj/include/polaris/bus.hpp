#pragma once

#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "polaris/codec.hpp"

// In-process pub-sub bus with per-topic FIFO delivery. Stands in for the
// networked broker: same topic semantics, no wire.

namespace polaris {

class BusClosedError : public std::runtime_error {
public:
    BusClosedError() : std::runtime_error("message bus is closed") {}
};

struct BusMessage {
    std::string topic;
    Json payload;
    double published_at = 0.0;  // simulated seconds
};

namespace topics {
inline constexpr const char* telemetry = "telemetry.samples";
inline constexpr const char* directives = "control.directives";
inline constexpr const char* acks = "control.acks";
inline constexpr const char* wildcard = "*";  // receives every topic
}  // namespace topics

// Handle yielding every message published to the subscribed topic after the
// subscription was made, in publication order.
class Subscription {
public:
    std::optional<BusMessage> poll() {
        std::lock_guard lock(q_->mutex);
        if (q_->messages.empty()) return std::nullopt;
        BusMessage m = std::move(q_->messages.front());
        q_->messages.pop_front();
        return m;
    }

    std::vector<BusMessage> drain() {
        std::lock_guard lock(q_->mutex);
        std::vector<BusMessage> out(q_->messages.begin(), q_->messages.end());
        q_->messages.clear();
        return out;
    }

    std::size_t pending() const {
        std::lock_guard lock(q_->mutex);
        return q_->messages.size();
    }

private:
    friend class MessageBus;
    struct Queue {
        mutable std::mutex mutex;
        std::deque<BusMessage> messages;
    };
    explicit Subscription(std::shared_ptr<Queue> q) : q_(std::move(q)) {}
    std::shared_ptr<Queue> q_;
};

class MessageBus {
public:
    // Fan-out to all current subscribers of the topic (plus wildcard
    // subscribers). The bus lock serializes publications, so every
    // subscriber observes the same global per-topic order.
    void publish(const BusMessage& message) {
        if (message.topic.empty()) throw std::invalid_argument("publish: topic must be non-empty");
        std::lock_guard lock(mutex_);
        if (closed_) throw BusClosedError();
        deliver(message.topic, message);
        if (message.topic != topics::wildcard) deliver(topics::wildcard, message);
    }

    void publish(std::string topic, Json payload, double published_at) {
        publish(BusMessage{std::move(topic), std::move(payload), published_at});
    }

    Subscription subscribe(const std::string& topic) {
        if (topic.empty()) throw std::invalid_argument("subscribe: topic must be non-empty");
        std::lock_guard lock(mutex_);
        if (closed_) throw BusClosedError();
        auto q = std::make_shared<Subscription::Queue>();
        subscribers_[topic].push_back(q);
        return Subscription(q);
    }

    void close() {
        std::lock_guard lock(mutex_);
        closed_ = true;
        subscribers_.clear();
    }

    bool is_open() const {
        std::lock_guard lock(mutex_);
        return !closed_;
    }

private:
    void deliver(const std::string& topic, const BusMessage& message) {
        auto it = subscribers_.find(topic);
        if (it == subscribers_.end()) return;
        auto& queues = it->second;
        for (auto qit = queues.begin(); qit != queues.end();) {
            if (auto q = qit->lock()) {
                std::lock_guard qlock(q->mutex);
                q->messages.push_back(message);
                ++qit;
            } else {
                qit = queues.erase(qit);  // subscriber dropped its handle
            }
        }
    }

    mutable std::mutex mutex_;
    bool closed_ = false;
    std::unordered_map<std::string, std::vector<std::weak_ptr<Subscription::Queue>>> subscribers_;
};

}  // namespace polaris
