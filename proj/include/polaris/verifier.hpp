#pragma once

#include <span>
#include <string>
#include <utility>
#include <vector>

#include "polaris/codec.hpp"
#include "polaris/domain.hpp"

// Safety backstop: validates every candidate directive against the hard
// invariants before execution. Lightweight static checker realization;
// deterministic and side-effect free.

namespace polaris {

struct Verdict {
    bool accepted = true;
    std::vector<std::pair<std::string, std::string>> violated;  // (invariant, detail)

    static Verdict accept() { return {}; }
};

inline void to_json(Json& j, const Verdict& v) {
    j = Json{{"accepted", v.accepted}, {"violated", Json::array()}};
    for (const auto& [name, detail] : v.violated)
        j["violated"].push_back(Json{{"invariant", name}, {"detail", detail}});
}

struct RecentAction {
    ActionKind kind = ActionKind::NoOp;
    double issued_at = 0.0;
};

// Actuator view handed in by the kernel, which owns it.
struct ActuatorView {
    int active_servers = 1;
    int booting_servers = 0;
    double dimmer = 1.0;
};

// Checks run in fixed order and every violation is reported (no
// short-circuit): well-formedness, server ceiling, server floor, dimmer
// range, cooldown. NoOp is always accepted. FastController-origin actions
// are exempt from the cooldown: the stabilization loop must never be stalled
// by its own recent actions.
inline Verdict verify(const AdaptationAction& action, const InvariantSet& invariants,
                      const ActuatorView& state, std::span<const RecentAction> recent,
                      double now) {
    Verdict verdict;
    if (action.kind == ActionKind::NoOp) return verdict;

    auto flag = [&](std::string name, std::string detail) {
        verdict.accepted = false;
        verdict.violated.emplace_back(std::move(name), std::move(detail));
    };

    if (!action.well_formed())
        flag("well_formed", "dimmer_target present iff kind is set_dimmer, within [0,1]");

    if (action.kind == ActionKind::AddServer) {
        const int total = state.active_servers + state.booting_servers;
        if (total + 1 > invariants.max_servers)
            flag("max_servers", "add_server would exceed " +
                                    std::to_string(invariants.max_servers) + " (at " +
                                    std::to_string(total) + ")");
    }

    if (action.kind == ActionKind::RemoveServer) {
        // Booting servers cannot serve yet, so the floor is on active only.
        if (state.active_servers - 1 < invariants.min_servers)
            flag("min_servers", "remove_server would drop below " +
                                    std::to_string(invariants.min_servers));
    }

    if (action.kind == ActionKind::SetDimmer && action.dimmer_target) {
        const double t = *action.dimmer_target;
        if (t < invariants.dimmer_lo || t > invariants.dimmer_hi)
            flag("dimmer_range", "target " + std::to_string(t) + " outside [" +
                                     std::to_string(invariants.dimmer_lo) + ", " +
                                     std::to_string(invariants.dimmer_hi) + "]");
    }

    if (action.origin != ActionOrigin::FastController && invariants.action_cooldown > 0.0) {
        for (const auto& prev : recent) {
            if (prev.kind != action.kind) continue;
            const double elapsed = now - prev.issued_at;
            if (elapsed >= 0.0 && elapsed < invariants.action_cooldown) {
                flag("cooldown", "same-kind action " + std::to_string(elapsed) +
                                     "s ago, cooldown " +
                                     std::to_string(invariants.action_cooldown) + "s");
                break;
            }
        }
    }

    return verdict;
}

}  // namespace polaris
