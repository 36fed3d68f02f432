#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

// Shared domain vocabulary: telemetry, actions, goals, invariants, and the
// utility function used by the harness and tests.

namespace polaris {

class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// One completed request as reported by the managed system.
struct MetricSample {
    double timestamp = 0.0;      // simulated seconds (completion time)
    double response_time = 0.0;  // seconds
    bool is_optional_served = false;
    bool is_late = false;        // response_time > sla_bound, strictly
};

// Aggregated telemetry for one monitoring window [window_start, window_end).
struct MetricSnapshot {
    double window_start = 0.0;
    double window_end = 0.0;
    double avg_response_time = 0.0;
    double p95_response_time = 0.0;
    double server_utilization = 0.0;  // in [0,1]
    double arrival_rate = 0.0;        // requests/second
    double dimmer = 1.0;              // in [0,1]
    int active_servers = 1;
    int booting_servers = 0;
    std::uint64_t request_count = 0;
    std::uint64_t late_count = 0;
    std::uint64_t optional_count = 0;

    double window_length() const { return window_end - window_start; }
};

enum class ActionKind { AddServer, RemoveServer, SetDimmer, NoOp };
enum class ActionOrigin { FastController, Reasoner };

inline const char* to_string(ActionKind k) {
    switch (k) {
        case ActionKind::AddServer: return "add_server";
        case ActionKind::RemoveServer: return "remove_server";
        case ActionKind::SetDimmer: return "set_dimmer";
        case ActionKind::NoOp: return "no_op";
    }
    return "no_op";
}

inline const char* to_string(ActionOrigin o) {
    return o == ActionOrigin::FastController ? "fast_controller" : "reasoner";
}

inline std::optional<ActionKind> action_kind_from_string(const std::string& s) {
    if (s == "add_server") return ActionKind::AddServer;
    if (s == "remove_server") return ActionKind::RemoveServer;
    if (s == "set_dimmer") return ActionKind::SetDimmer;
    if (s == "no_op") return ActionKind::NoOp;
    return std::nullopt;
}

// The closed vocabulary of directives flowing from agents through the
// Verifier to the Execution Adapter. dimmer_target is present iff
// kind == SetDimmer.
struct AdaptationAction {
    ActionKind kind = ActionKind::NoOp;
    std::optional<double> dimmer_target;
    ActionOrigin origin = ActionOrigin::Reasoner;
    double issued_at = 0.0;
    std::string rationale;

    static AdaptationAction add_server(ActionOrigin origin, double at, std::string why = {}) {
        return {ActionKind::AddServer, std::nullopt, origin, at, std::move(why)};
    }
    static AdaptationAction remove_server(ActionOrigin origin, double at, std::string why = {}) {
        return {ActionKind::RemoveServer, std::nullopt, origin, at, std::move(why)};
    }
    static AdaptationAction set_dimmer(double target, ActionOrigin origin, double at,
                                       std::string why = {}) {
        return {ActionKind::SetDimmer, target, origin, at, std::move(why)};
    }
    static AdaptationAction no_op(ActionOrigin origin, double at, std::string why = {}) {
        return {ActionKind::NoOp, std::nullopt, origin, at, std::move(why)};
    }

    bool well_formed() const {
        if (kind == ActionKind::SetDimmer)
            return dimmer_target.has_value() && *dimmer_target >= 0.0 && *dimmer_target <= 1.0;
        return !dimmer_target.has_value();
    }
};

// Outcome of handing a directive to the managed system.
struct ApplyResult {
    bool ok = true;
    std::string error;
};

struct GoalSpec {
    double response_time_goal = 0.5;  // seconds
    bool prefer_max_dimmer = true;
    bool minimize_servers = true;
    double sla_bound = 0.75;  // seconds; responses above this are late

    void validate() const {
        if (!(response_time_goal > 0.0 && response_time_goal <= sla_bound))
            throw ConfigError("goals: require 0 < response_time_goal <= sla_bound");
    }
};

// Hard invariants the Verifier enforces on every candidate directive.
struct InvariantSet {
    int max_servers = 3;
    int min_servers = 1;
    double dimmer_lo = 0.0;
    double dimmer_hi = 1.0;
    double action_cooldown = 60.0;  // seconds between same-kind actions
    int max_actions_per_cycle = 1;

    void validate() const {
        if (min_servers < 1) throw ConfigError("invariants: min_servers >= 1");
        if (min_servers > max_servers) throw ConfigError("invariants: min_servers <= max_servers");
        if (!(0.0 <= dimmer_lo && dimmer_lo <= dimmer_hi && dimmer_hi <= 1.0))
            throw ConfigError("invariants: require 0 <= dimmer_lo <= dimmer_hi <= 1");
        if (action_cooldown < 0.0) throw ConfigError("invariants: action_cooldown >= 0");
    }
};

// Revenue model behind the report's Total Utility column: on-time requests
// earn per-request revenue (more when optional content was served), late
// requests are penalized, and capacity is billed per server-second.
struct UtilityConfig {
    double optional_revenue = 1.5;
    double mandatory_revenue = 1.0;
    double late_penalty = 1.0;
    double server_cost = 0.01;  // utility per server-second

    void validate() const {
        if (!(optional_revenue >= mandatory_revenue && mandatory_revenue >= 0.0))
            throw ConfigError("utility: require optional_revenue >= mandatory_revenue >= 0");
        if (late_penalty < 0.0) throw ConfigError("utility: late_penalty >= 0");
        if (server_cost < 0.0) throw ConfigError("utility: server_cost >= 0");
    }
};

// Actuator-side state attached to each aggregation window.
struct SystemStateView {
    double dimmer = 1.0;
    int active_servers = 1;
    int booting_servers = 0;
    double busy_time = 0.0;  // total busy server-seconds within the window
};

// Nearest-rank p95 over the window; deterministic, no interpolation.
inline double percentile95(std::vector<double> values) {
    if (values.empty()) return 0.0;
    std::sort(values.begin(), values.end());
    const auto n = values.size();
    auto rank = static_cast<std::size_t>(std::ceil(0.95 * static_cast<double>(n)));
    if (rank == 0) rank = 1;
    return values[rank - 1];
}

// Folds raw samples plus actuator state into one MetricSnapshot.
// Utilization is busy_time / (window_length * active_servers), clamped to
// [0,1]. An empty sample list yields a zero-count snapshot (not an error);
// zero active servers is an error because it violates min_servers.
inline MetricSnapshot aggregate(std::span<const MetricSample> samples, double window_start,
                                double window_end, const SystemStateView& state) {
    if (!(window_end > window_start))
        throw std::invalid_argument("aggregate: window length must be positive");
    if (state.active_servers < 1)
        throw std::invalid_argument("aggregate: zero active servers violates min_servers");

    MetricSnapshot snap;
    snap.window_start = window_start;
    snap.window_end = window_end;
    snap.dimmer = state.dimmer;
    snap.active_servers = state.active_servers;
    snap.booting_servers = state.booting_servers;

    const double window_length = window_end - window_start;
    double rt_sum = 0.0;
    std::vector<double> rts;
    rts.reserve(samples.size());
    for (const auto& s : samples) {
        rt_sum += s.response_time;
        rts.push_back(s.response_time);
        if (s.is_late) ++snap.late_count;
        if (s.is_optional_served) ++snap.optional_count;
    }
    snap.request_count = samples.size();
    snap.avg_response_time = samples.empty() ? 0.0 : rt_sum / static_cast<double>(samples.size());
    snap.p95_response_time = percentile95(std::move(rts));
    snap.arrival_rate = static_cast<double>(snap.request_count) / window_length;
    const double util = state.busy_time / (window_length * state.active_servers);
    snap.server_utilization = std::clamp(util, 0.0, 1.0);
    return snap;
}

// Utility earned over one window. On-time requests earn revenue mixed by the
// window's optional-served fraction, each late request costs late_penalty
// instead of earning, and capacity is billed for the whole window.
// sla_bound is the bound the samples were classified against (strictly
// greater-than); it must be positive.
inline double interval_utility(const MetricSnapshot& snap, const UtilityConfig& cfg,
                               double sla_bound) {
    if (!(sla_bound > 0.0)) throw std::invalid_argument("interval_utility: sla_bound must be > 0");
    double revenue = 0.0;
    if (snap.request_count > 0) {
        const double optional_fraction =
            static_cast<double>(snap.optional_count) / static_cast<double>(snap.request_count);
        const double per_request = optional_fraction * cfg.optional_revenue +
                                   (1.0 - optional_fraction) * cfg.mandatory_revenue;
        const auto on_time = snap.request_count - snap.late_count;
        revenue = static_cast<double>(on_time) * per_request;
    }
    const double penalty = static_cast<double>(snap.late_count) * cfg.late_penalty;
    const double cost = cfg.server_cost * snap.active_servers * snap.window_length();
    return revenue - penalty - cost;
}

}  // namespace polaris
