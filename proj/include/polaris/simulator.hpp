#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <limits>
#include <queue>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "polaris/domain.hpp"
#include "polaris/rng.hpp"
#include "polaris/trace.hpp"

// SWIM-like simulated managed system: trace-driven arrivals into a
// multi-server queue with dimmer-dependent service demand and delayed server
// provisioning.

namespace polaris {

struct SimConfig {
    double mandatory_service_time = 0.04;  // seconds/request
    double optional_service_time = 0.02;   // extra seconds when optional content is served
    double boot_delay = 60.0;              // provisioning delay for AddServer
    int initial_servers = 2;
    int max_servers = 3;
    int min_servers = 1;
    std::uint64_t rng_seed = 1;
    bool exponential_service = false;  // exponential service times (M/M/c calibration mode)
    double sla_bound = 0.75;           // stamps MetricSample.is_late, strictly greater-than

    void validate() const {
        if (!(mandatory_service_time > 0.0 && optional_service_time > 0.0))
            throw ConfigError("sim: service times must be > 0");
        if (boot_delay < 0.0) throw ConfigError("sim: boot_delay >= 0");
        if (!(initial_servers >= 1 && initial_servers <= max_servers))
            throw ConfigError("sim: require 1 <= initial_servers <= max_servers");
        if (min_servers < 1) throw ConfigError("sim: min_servers >= 1");
        if (!(sla_bound > 0.0)) throw ConfigError("sim: sla_bound > 0");
    }
};

// Dispatch is least-workload with FIFO per server and no preemption, which
// matches a central FCFS queue for response-time purposes. Requests are
// emitted as MetricSamples at completion time, so emission order is globally
// monotone; work still in flight at the step boundary is held back.
class ManagedSystem {
public:
    ManagedSystem(SimConfig cfg, ArrivalTrace trace)
        : cfg_(cfg), trace_(std::move(trace)), rng_(cfg.rng_seed) {
        cfg_.validate();
        busy_until_.assign(static_cast<std::size_t>(cfg_.initial_servers), 0.0);
        server_steps_.push_back({0.0, cfg_.initial_servers});
    }

    // Applies a verified directive. Capacity and floor violations are
    // reported, not thrown: after verification they indicate a defect or a
    // race and the caller records them.
    ApplyResult apply(const AdaptationAction& action) {
        switch (action.kind) {
            case ActionKind::AddServer: {
                const int total = active_servers() + booting_servers();
                if (total >= cfg_.max_servers)
                    return {false, "capacity: already at max_servers"};
                pending_boots_.push_back(clock_ + cfg_.boot_delay);
                return {};
            }
            case ActionKind::RemoveServer: {
                if (active_servers() - 1 < cfg_.min_servers)
                    return {false, "floor: at min_servers"};
                // Retire the least-loaded server; its committed work finishes.
                const auto it = std::min_element(busy_until_.begin(), busy_until_.end());
                busy_until_.erase(it);
                server_steps_.push_back({clock_, active_servers()});
                return {};
            }
            case ActionKind::SetDimmer: {
                if (!action.dimmer_target || *action.dimmer_target < 0.0 ||
                    *action.dimmer_target > 1.0)
                    return {false, "dimmer target outside [0,1]"};
                dimmer_ = *action.dimmer_target;
                return {};
            }
            case ActionKind::NoOp:
                return {};
        }
        return {false, "unknown action"};
    }

    // Advances the simulation: consumes arrivals with timestamp <= until,
    // activating due boots before dispatching later arrivals, and returns
    // the requests that completed by `until` in completion order.
    std::vector<MetricSample> step(double until) {
        if (!(until > clock_)) throw std::invalid_argument("step: until must be beyond the clock");
        constexpr double inf = std::numeric_limits<double>::infinity();
        while (true) {
            const double next_boot = pending_boots_.empty() ? inf : pending_boots_.front();
            const double next_arrival =
                next_arrival_ < trace_.timestamps.size() ? trace_.timestamps[next_arrival_] : inf;
            const double next_event = std::min(next_boot, next_arrival);
            if (next_event > until) break;
            if (next_boot <= next_arrival) {
                busy_until_.push_back(next_boot);  // free from activation onward
                pending_boots_.pop_front();
                server_steps_.push_back({next_boot, active_servers()});
            } else {
                dispatch(next_arrival);
                ++next_arrival_;
            }
        }
        clock_ = until;

        std::vector<MetricSample> out;
        while (!completions_.empty() && completions_.top().at <= until) {
            const auto& c = completions_.top();
            out.push_back({c.at, c.response_time, c.optional_served,
                           c.response_time > cfg_.sla_bound});
            completions_.pop();
        }
        return out;
    }

    double clock() const { return clock_; }
    double dimmer() const { return dimmer_; }
    int active_servers() const { return static_cast<int>(busy_until_.size()); }
    int booting_servers() const { return static_cast<int>(pending_boots_.size()); }
    std::size_t in_flight() const { return completions_.size(); }
    std::size_t arrivals_consumed() const { return next_arrival_; }

    bool has_pending() const {
        return next_arrival_ < trace_.timestamps.size() || !completions_.empty();
    }

    SystemStateView state_view(double window_start, double window_end) {
        return {dimmer_, active_servers(), booting_servers(),
                busy_seconds(window_start, window_end)};
    }

    // Total busy server-seconds within [from, to). Windows must advance
    // monotonically: spans that can no longer overlap are pruned.
    double busy_seconds(double from, double to) {
        double total = 0.0;
        auto it = busy_spans_.begin();
        while (it != busy_spans_.end()) {
            if (it->second <= from) {
                it = busy_spans_.erase(it);
                continue;
            }
            total += std::max(0.0, std::min(it->second, to) - std::max(it->first, from));
            ++it;
        }
        return total;
    }

    // Exact integral of the active-server count over [from, to).
    double server_seconds(double from, double to) const {
        double total = 0.0;
        for (std::size_t i = 0; i < server_steps_.size(); ++i) {
            const double seg_start = server_steps_[i].first;
            const double seg_end =
                i + 1 < server_steps_.size() ? server_steps_[i + 1].first : to;
            const double overlap = std::min(seg_end, to) - std::max(seg_start, from);
            if (overlap > 0.0) total += overlap * server_steps_[i].second;
        }
        return total;
    }

private:
    struct Completion {
        double at = 0.0;
        double response_time = 0.0;
        bool optional_served = false;
    };
    struct CompletionLater {
        bool operator()(const Completion& a, const Completion& b) const { return a.at > b.at; }
    };

    void dispatch(double arrival) {
        const auto it = std::min_element(busy_until_.begin(), busy_until_.end());
        const double start = std::max(arrival, *it);
        const bool optional_served = rng_.bernoulli(dimmer_);
        const double mean = cfg_.mandatory_service_time +
                            (optional_served ? cfg_.optional_service_time : 0.0);
        const double service = cfg_.exponential_service ? rng_.exponential(mean) : mean;
        const double completion = start + service;
        *it = completion;
        busy_spans_.push_back({start, completion});
        completions_.push({completion, completion - arrival, optional_served});
    }

    SimConfig cfg_;
    ArrivalTrace trace_;
    std::size_t next_arrival_ = 0;
    double clock_ = 0.0;
    double dimmer_ = 1.0;
    std::vector<double> busy_until_;    // per active server
    std::deque<double> pending_boots_;  // completion times, ascending
    Rng rng_;
    std::priority_queue<Completion, std::vector<Completion>, CompletionLater> completions_;
    std::deque<std::pair<double, double>> busy_spans_;
    std::vector<std::pair<double, int>> server_steps_;  // (time, active count from then on)
};

}  // namespace polaris
