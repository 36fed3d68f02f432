#pragma once

#include <cmath>
#include <optional>
#include <string>

#include "polaris/codec.hpp"
#include "polaris/domain.hpp"

// Pure triage: classify a snapshot against the critical thresholds and
// decide which control path owns the cycle.

namespace polaris {

struct ThresholdConfig {
    double critical_response_time = 0.75;  // seconds
    double critical_utilization = 0.95;    // fraction
    double monitor_interval = 10.0;        // simulated seconds
    double reasoner_interval = 60.0;       // simulated seconds

    void validate() const {
        if (!(critical_response_time > 0.0 && critical_utilization > 0.0 &&
              monitor_interval > 0.0 && reasoner_interval > 0.0))
            throw ConfigError("thresholds: all values must be positive");
        if (reasoner_interval < monitor_interval)
            throw ConfigError("thresholds: reasoner_interval >= monitor_interval");
    }
};

inline void to_json(Json& j, const ThresholdConfig& t) {
    j = Json{{"critical_response_time", t.critical_response_time},
             {"critical_utilization", t.critical_utilization},
             {"monitor_interval", t.monitor_interval},
             {"reasoner_interval", t.reasoner_interval}};
}

inline void from_json(const Json& j, ThresholdConfig& t) {
    t.critical_response_time = j.value("critical_response_time", t.critical_response_time);
    t.critical_utilization = j.value("critical_utilization", t.critical_utilization);
    t.monitor_interval = j.value("monitor_interval", t.monitor_interval);
    t.reasoner_interval = j.value("reasoner_interval", t.reasoner_interval);
}

enum class DispatchPath { Stabilization, Strategic, Idle };

inline const char* to_string(DispatchPath p) {
    switch (p) {
        case DispatchPath::Stabilization: return "stabilization";
        case DispatchPath::Strategic: return "strategic";
        case DispatchPath::Idle: return "idle";
    }
    return "idle";
}

struct TriggeringMetric {
    std::string name;
    double value = 0.0;
    double threshold = 0.0;
};

struct DispatchDecision {
    DispatchPath path = DispatchPath::Idle;
    std::optional<TriggeringMetric> triggering_metric;  // present iff Stabilization
};

// Stabilization iff any critical metric strictly exceeds its threshold;
// otherwise Strategic iff a reasoner cycle boundary falls inside the
// snapshot's window; otherwise Idle. Pure: everything is derived from the
// two arguments.
inline DispatchDecision triage(const MetricSnapshot& snapshot, const ThresholdConfig& thresholds) {
    if (snapshot.avg_response_time > thresholds.critical_response_time)
        return {DispatchPath::Stabilization,
                TriggeringMetric{"avg_response_time", snapshot.avg_response_time,
                                 thresholds.critical_response_time}};
    if (snapshot.server_utilization > thresholds.critical_utilization)
        return {DispatchPath::Stabilization,
                TriggeringMetric{"server_utilization", snapshot.server_utilization,
                                 thresholds.critical_utilization}};
    const double r = thresholds.reasoner_interval;
    const auto periods_before = std::floor(snapshot.window_start / r + 1e-9);
    const auto periods_after = std::floor(snapshot.window_end / r + 1e-9);
    if (periods_after > periods_before) return {DispatchPath::Strategic, std::nullopt};
    return {DispatchPath::Idle, std::nullopt};
}

}  // namespace polaris
