#pragma once

#include <deque>
#include <functional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polaris/bus.hpp"
#include "polaris/domain.hpp"
#include "polaris/knowledge_base.hpp"
#include "polaris/verifier.hpp"

// Operational components around the bus: the telemetry pump, the Metric
// Collector that turns raw samples into snapshots, and the Execution Adapter
// that turns verified directives into simulator commands.

namespace polaris {

// Publishes raw samples from the managed system onto the telemetry topic.
class TelemetryPump {
public:
    explicit TelemetryPump(MessageBus& bus) : bus_(bus) {}

    void publish(std::span<const MetricSample> samples) {
        for (const auto& s : samples) bus_.publish(topics::telemetry, Json(s), s.timestamp);
    }

private:
    MessageBus& bus_;
};

// Drains the telemetry topic into fixed windows and aggregates. Windows
// partition the timeline: a sample is counted in exactly one window
// (straddling samples wait in the pending buffer for their window to close).
class MetricCollector {
public:
    using ActuatorFn = std::function<ActuatorView()>;
    using BusyFn = std::function<double(double, double)>;

    MetricCollector(MessageBus& bus, ActuatorFn actuators, BusyFn busy_seconds,
                    double window_start = 0.0)
        : sub_(bus.subscribe(topics::telemetry)),
          actuators_(std::move(actuators)),
          busy_seconds_(std::move(busy_seconds)),
          cursor_(window_start) {}

    // Closes the window [cursor, cursor + window_length) and advances.
    MetricSnapshot collect(double window_length) {
        const double window_end = cursor_ + window_length;
        for (auto& m : sub_.drain()) pending_.push_back(m.payload.get<MetricSample>());

        std::vector<MetricSample> in_window;
        std::deque<MetricSample> rest;
        for (auto& s : pending_) {
            if (s.timestamp < window_end)
                in_window.push_back(s);
            else
                rest.push_back(s);
        }
        pending_ = std::move(rest);

        const auto act = actuators_();
        const SystemStateView state{act.dimmer, act.active_servers, act.booting_servers,
                                    busy_seconds_(cursor_, window_end)};
        auto snap = aggregate(in_window, cursor_, window_end, state);
        cursor_ = window_end;
        return snap;
    }

    double cursor() const { return cursor_; }
    std::size_t pending_samples() const { return pending_.size(); }

private:
    Subscription sub_;
    ActuatorFn actuators_;
    BusyFn busy_seconds_;
    double cursor_;
    std::deque<MetricSample> pending_;
};

// Result of carrying a directive out against the managed system.
struct Ack {
    bool ok = true;
    std::string error;
    AdaptationAction action;
    ActuatorView after;
    double at = 0.0;
};

inline void to_json(Json& j, const Ack& a) {
    j = Json{{"ok", a.ok},
             {"error", a.error},
             {"action", a.action},
             {"dimmer", a.after.dimmer},
             {"active_servers", a.after.active_servers},
             {"booting_servers", a.after.booting_servers},
             {"at", a.at}};
}

// Translates verified directives into managed-system commands, publishes the
// directive and its ack, and records the outcome as a KB episode. Failures
// reported by the simulator (capacity races) are acked as failed and still
// recorded.
class ExecutionAdapter {
public:
    using ApplyFn = std::function<ApplyResult(const AdaptationAction&)>;
    using ActuatorFn = std::function<ActuatorView()>;

    ExecutionAdapter(MessageBus& bus, ApplyFn apply, ActuatorFn actuators, KnowledgeBase& kb)
        : bus_(bus), apply_(std::move(apply)), actuators_(std::move(actuators)), kb_(kb) {}

    Ack execute(const AdaptationAction& directive, double now) {
        bus_.publish(topics::directives, Json(directive), now);
        const ApplyResult result = apply_(directive);

        Ack ack;
        ack.ok = result.ok;
        ack.error = result.error;
        ack.action = directive;
        ack.after = actuators_();
        ack.at = now;
        bus_.publish(topics::acks, Json(ack), now);

        Episode e;
        e.timestamp = now;
        e.kind = result.ok ? EpisodeKind::ActionExecuted : EpisodeKind::ActionRejected;
        e.tags = {result.ok ? "executed" : "failed",
                  to_string(directive.kind),
                  to_string(directive.origin)};
        if (!result.ok) e.tags.insert("simulator");
        e.payload = Json{{"action", directive}, {"ok", result.ok}, {"error", result.error},
                         {"after", Json{{"dimmer", ack.after.dimmer},
                                        {"active_servers", ack.after.active_servers},
                                        {"booting_servers", ack.after.booting_servers}}}};
        kb_.record(std::move(e));
        return ack;
    }

private:
    MessageBus& bus_;
    ApplyFn apply_;
    ActuatorFn actuators_;
    KnowledgeBase& kb_;
};

}  // namespace polaris
