#pragma once

#include <algorithm>

#include "polaris/domain.hpp"

// Fast Controller: a fixed, low-latency policy mapping a critical state to a
// corrective action. Deliberately dumb; all learning happens elsewhere.

namespace polaris {

struct ReactivePolicy {
    double dimmer_step = 0.15;
    double min_dimmer = 0.1;

    void validate() const {
        if (!(dimmer_step > 0.0 && dimmer_step <= 1.0))
            throw ConfigError("policy: dimmer_step in (0,1]");
        if (!(min_dimmer >= 0.0 && min_dimmer < 1.0))
            throw ConfigError("policy: min_dimmer in [0,1)");
    }
};

// Pure and total. Scale out first (capacity is the root fix), dim only once
// the server budget is exhausted, and report NoOp once the dimmer has hit
// its floor. Never proposes anything outside the invariant bounds.
inline AdaptationAction react(const MetricSnapshot& snapshot, const InvariantSet& invariants,
                              const ReactivePolicy& policy) {
    const double now = snapshot.window_end;
    const int total = snapshot.active_servers + snapshot.booting_servers;
    if (total < invariants.max_servers)
        return AdaptationAction::add_server(ActionOrigin::FastController, now,
                                            "reactive: scale out under critical load");

    const double floor = std::max(policy.min_dimmer, invariants.dimmer_lo);
    const double target =
        std::clamp(snapshot.dimmer - policy.dimmer_step, floor, invariants.dimmer_hi);
    if (target < snapshot.dimmer)
        return AdaptationAction::set_dimmer(target, ActionOrigin::FastController, now,
                                            "reactive: shed optional load");

    return AdaptationAction::no_op(ActionOrigin::FastController, now,
                                   "reactive: actuators exhausted");
}

}  // namespace polaris
