#pragma once

#include <algorithm>
#include <cstdint>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "polaris/fast_controller.hpp"
#include "polaris/knowledge_base.hpp"
#include "polaris/reasoner.hpp"
#include "polaris/triage.hpp"
#include "polaris/world_model.hpp"

// Meta-Learner: periodically reflects over recorded experiences to find
// recurring patterns and evolves the running strategy by writing parameter,
// workflow, and heuristic updates. Deterministic reference engine.

namespace polaris {

enum class PatternKind { ReactivePrecursor, OscillationLoop, PersistentLateness, OverProvisioning };

inline const char* to_string(PatternKind k) {
    switch (k) {
        case PatternKind::ReactivePrecursor: return "reactive_precursor";
        case PatternKind::OscillationLoop: return "oscillation_loop";
        case PatternKind::PersistentLateness: return "persistent_lateness";
        case PatternKind::OverProvisioning: return "over_provisioning";
    }
    return "unknown";
}

struct Pattern {
    PatternKind kind = PatternKind::ReactivePrecursor;
    int support = 0;
    double window = 0.0;                 // seconds of history examined
    std::vector<std::uint64_t> evidence; // episode ids
    double statistic = 0.0;              // kind-specific summary value
};

inline void to_json(Json& j, const Pattern& p) {
    j = Json{{"kind", to_string(p.kind)},
             {"support", p.support},
             {"window", p.window},
             {"evidence", p.evidence},
             {"statistic", p.statistic}};
}

enum class UpdateTarget { PromptDirectives, Thresholds, ReactivePolicy, WorldModel, Invariants };

inline const char* to_string(UpdateTarget t) {
    switch (t) {
        case UpdateTarget::PromptDirectives: return "prompt_directives";
        case UpdateTarget::Thresholds: return "thresholds";
        case UpdateTarget::ReactivePolicy: return "reactive_policy";
        case UpdateTarget::WorldModel: return "world_model";
        case UpdateTarget::Invariants: return "invariants";
    }
    return "unknown";
}

struct ParameterChange {
    UpdateTarget target = UpdateTarget::PromptDirectives;
    std::string key;
    double old_value = 0.0;
    double new_value = 0.0;
};

inline void to_json(Json& j, const ParameterChange& c) {
    j = Json{{"target", to_string(c.target)},
             {"key", c.key},
             {"old_value", c.old_value},
             {"new_value", c.new_value}};
}

struct StrategyUpdate {
    std::vector<ParameterChange> parameter_changes;
    std::vector<std::string> heuristic_additions;
    std::string justification;

    bool empty() const { return parameter_changes.empty() && heuristic_additions.empty(); }
};

inline void to_json(Json& j, const StrategyUpdate& u) {
    j = Json{{"parameter_changes", u.parameter_changes},
             {"heuristic_additions", u.heuristic_additions},
             {"justification", u.justification},
             {"empty", u.empty()}};
}

struct MetaConfig {
    std::vector<PatternKind> reflection_rules = {
        PatternKind::ReactivePrecursor, PatternKind::OscillationLoop,
        PatternKind::PersistentLateness, PatternKind::OverProvisioning};
    std::vector<PatternKind> evolution_mappings = {
        PatternKind::ReactivePrecursor, PatternKind::OscillationLoop,
        PatternKind::PersistentLateness, PatternKind::OverProvisioning};
    int min_support = 3;
    double damping = 1.0;   // 1.0 reproduces the worked numbers exactly
    int meta_period = 10;   // reasoning cycles between reflections
    double reflect_window = 1200.0;  // seconds of history examined
    double precursor_util_floor = 0.6;
    double follow_span = 30.0;       // trigger -> add_server association span
    double oscillation_span = 300.0; // max gap between alternating actions
    int lateness_k = 3;
    int overprov_k = 3;
    double overprov_util_floor = 0.3;

    void validate() const {
        if (min_support < 2) throw ConfigError("meta: min_support >= 2");
        if (!(damping > 0.0 && damping <= 1.0)) throw ConfigError("meta: damping in (0,1]");
        if (meta_period < 1) throw ConfigError("meta: meta_period >= 1");
    }
};

inline void to_json(Json& j, const MetaConfig& m) {
    j = Json{{"min_support", m.min_support},
             {"damping", m.damping},
             {"meta_period", m.meta_period},
             {"reflect_window", m.reflect_window},
             {"precursor_util_floor", m.precursor_util_floor},
             {"follow_span", m.follow_span},
             {"oscillation_span", m.oscillation_span},
             {"lateness_k", m.lateness_k},
             {"overprov_k", m.overprov_k},
             {"overprov_util_floor", m.overprov_util_floor}};
}

inline void from_json(const Json& j, MetaConfig& m) {
    m.min_support = j.value("min_support", m.min_support);
    m.damping = j.value("damping", m.damping);
    m.meta_period = j.value("meta_period", m.meta_period);
    m.reflect_window = j.value("reflect_window", m.reflect_window);
    m.precursor_util_floor = j.value("precursor_util_floor", m.precursor_util_floor);
    m.follow_span = j.value("follow_span", m.follow_span);
    m.oscillation_span = j.value("oscillation_span", m.oscillation_span);
    m.lateness_k = j.value("lateness_k", m.lateness_k);
    m.overprov_k = j.value("overprov_k", m.overprov_k);
    m.overprov_util_floor = j.value("overprov_util_floor", m.overprov_util_floor);
}

// The live, writable configuration the kernel owns and the meta-learner
// updates between reasoning cycles.
struct LiveConfigs {
    PromptConfig& prompt;
    ThresholdConfig& thresholds;
    ReactivePolicy& policy;
    InvariantSet& invariants;
    WorldModel& wm;
};

struct AppliedReport {
    bool applied = false;
    std::string reason;
    std::vector<ParameterChange> changes;
    std::vector<std::string> clamped;  // keys whose values had to be clamped
    int prompt_version_after = 0;
    std::uint64_t episode_id = 0;
};

class MetaLearner {
public:
    explicit MetaLearner(MetaConfig conf) : conf_(conf) { conf_.validate(); }

    const MetaConfig& config() const { return conf_; }

    // Routing table: which component owns each writable key.
    static const std::map<std::string, UpdateTarget>& update_routing() {
        static const std::map<std::string, UpdateTarget> routing = {
            {"server_util_danger", UpdateTarget::PromptDirectives},
            {"response_time_goal", UpdateTarget::PromptDirectives},
            {"target_util", UpdateTarget::PromptDirectives},
            {"dim_step", UpdateTarget::PromptDirectives},
            {"restore_margin", UpdateTarget::PromptDirectives},
            {"risk_cap", UpdateTarget::PromptDirectives},
            {"low_util_floor", UpdateTarget::PromptDirectives},
            {"persistence_k", UpdateTarget::PromptDirectives},
            {"wm_horizon", UpdateTarget::PromptDirectives},
            {"critical_response_time", UpdateTarget::Thresholds},
            {"critical_utilization", UpdateTarget::Thresholds},
            {"monitor_interval", UpdateTarget::Thresholds},
            {"reasoner_interval", UpdateTarget::Thresholds},
            {"dimmer_step", UpdateTarget::ReactivePolicy},
            {"min_dimmer", UpdateTarget::ReactivePolicy},
            {"action_cooldown", UpdateTarget::Invariants},
            {"ew_factor", UpdateTarget::WorldModel},
        };
        return routing;
    }

    // Physical ranges the apply step clamps to; total over all routed keys.
    static const std::map<std::string, std::pair<double, double>>& physical_ranges() {
        static const std::map<std::string, std::pair<double, double>> ranges = {
            {"server_util_danger", {0.01, 1.0}}, {"response_time_goal", {0.01, 10.0}},
            {"target_util", {0.05, 1.0}},        {"dim_step", {0.01, 1.0}},
            {"restore_margin", {0.1, 1.0}},      {"risk_cap", {0.0, 1.0}},
            {"low_util_floor", {0.0, 1.0}},      {"persistence_k", {1.0, 20.0}},
            {"wm_horizon", {1.0, 3600.0}},       {"critical_response_time", {0.01, 10.0}},
            {"critical_utilization", {0.1, 1.0}},{"monitor_interval", {1.0, 3600.0}},
            {"reasoner_interval", {1.0, 7200.0}},{"dimmer_step", {0.01, 1.0}},
            {"min_dimmer", {0.0, 0.99}},         {"action_cooldown", {0.0, 3600.0}},
            {"ew_factor", {0.01, 1.0}},
        };
        return ranges;
    }

    // f_reflect: scans the episode window for recurring structures, with
    // support counting; patterns below min_support are suppressed.
    std::vector<Pattern> reflect(const KnowledgeBase& kb, double now,
                                 const InvariantSet& invariants) const {
        KBQuery q;
        q.time_from = now - conf_.reflect_window;
        q.time_to = now;
        q.limit = static_cast<std::size_t>(-1);
        auto episodes = kb.query(q);
        std::reverse(episodes.begin(), episodes.end());  // chronological

        std::vector<Pattern> out;
        for (const auto kind : conf_.reflection_rules) {
            std::optional<Pattern> p;
            switch (kind) {
                case PatternKind::ReactivePrecursor: p = detect_precursor(episodes); break;
                case PatternKind::OscillationLoop: p = detect_oscillation(episodes); break;
                case PatternKind::PersistentLateness: p = detect_lateness(episodes); break;
                case PatternKind::OverProvisioning:
                    p = detect_overprovisioning(episodes, invariants);
                    break;
            }
            if (p && p->support >= conf_.min_support) out.push_back(std::move(*p));
        }
        return out;
    }

    // f_evolve: maps patterns onto a strategy update. No patterns, or
    // nothing left to change, yields an empty update.
    StrategyUpdate evolve(const std::vector<Pattern>& patterns, const PromptConfig& prompt,
                          const InvariantSet& invariants) const {
        StrategyUpdate update;
        std::ostringstream why;
        for (const auto& p : patterns) {
            if (std::find(conf_.evolution_mappings.begin(), conf_.evolution_mappings.end(),
                          p.kind) == conf_.evolution_mappings.end())
                continue;
            switch (p.kind) {
                case PatternKind::ReactivePrecursor: {
                    const double old_value = prompt.directive("server_util_danger");
                    const double new_value =
                        old_value - conf_.damping * (old_value - p.statistic);
                    if (new_value < old_value - 1e-12) {
                        update.parameter_changes.push_back({UpdateTarget::PromptDirectives,
                                                            "server_util_danger", old_value,
                                                            new_value});
                        why << "reactive precursor at utilization " << p.statistic
                            << " (support " << p.support << "): lower server_util_danger; ";
                    }
                    break;
                }
                case PatternKind::PersistentLateness: {
                    const double factor = 1.0 - conf_.damping / 10.0;
                    const double old_target = prompt.directive("target_util");
                    const double old_step = prompt.directive("dim_step");
                    update.parameter_changes.push_back({UpdateTarget::PromptDirectives,
                                                        "target_util", old_target,
                                                        old_target * factor});
                    update.parameter_changes.push_back({UpdateTarget::PromptDirectives, "dim_step",
                                                        old_step, old_step * factor});
                    why << "persistent lateness over " << p.support
                        << " windows: tighten target_util and dim_step; ";
                    break;
                }
                case PatternKind::OscillationLoop: {
                    if (!prompt.has_heuristic(heuristics::prefer_gradual))
                        update.heuristic_additions.push_back(heuristics::prefer_gradual);
                    const double old_cd = invariants.action_cooldown;
                    const double new_cd = old_cd * (1.0 + conf_.damping / 2.0);
                    if (new_cd > old_cd + 1e-12)
                        update.parameter_changes.push_back(
                            {UpdateTarget::Invariants, "action_cooldown", old_cd, new_cd});
                    why << "add/remove oscillation (support " << p.support
                        << "): prefer gradual changes, lengthen cooldown; ";
                    break;
                }
                case PatternKind::OverProvisioning: {
                    if (!prompt.has_heuristic(heuristics::explore_remove))
                        update.heuristic_additions.push_back(heuristics::explore_remove);
                    why << "over-provisioning at utilization " << p.statistic << " (support "
                        << p.support << "): favor scale-in exploration; ";
                    break;
                }
            }
        }
        update.justification = update.empty() ? "no recurring patterns warrant change" : why.str();
        return update;
    }

    // Atomically applies a validated update: every change routed to its
    // component, out-of-range values clamped and flagged, the prompt version
    // bumped when touched, and a MetaUpdate episode recorded. An unknown key
    // rejects the whole update.
    AppliedReport apply_update(const StrategyUpdate& update, LiveConfigs live, KnowledgeBase& kb,
                               double now) const {
        AppliedReport report;
        report.prompt_version_after = live.prompt.version;

        if (update.empty()) {
            report.applied = true;
            report.reason = "empty update";
            report.episode_id = record_episode(kb, now, update, report, "empty");
            return report;
        }

        // Validate first so rejection leaves every config bit-identical.
        for (const auto& change : update.parameter_changes) {
            const auto route = update_routing().find(change.key);
            if (route == update_routing().end() || route->second != change.target) {
                report.reason = "unknown or misrouted key: " + change.key;
                report.episode_id = record_episode(kb, now, update, report, "rejected");
                return report;
            }
            if (change.target == UpdateTarget::PromptDirectives &&
                live.prompt.directives.find(change.key) == live.prompt.directives.end()) {
                report.reason = "prompt directive does not exist: " + change.key;
                report.episode_id = record_episode(kb, now, update, report, "rejected");
                return report;
            }
        }

        bool prompt_touched = false;
        for (const auto& change : update.parameter_changes) {
            const auto& range = physical_ranges().at(change.key);
            double value = std::clamp(change.new_value, range.first, range.second);
            if (value != change.new_value) report.clamped.push_back(change.key);
            ParameterChange applied = change;
            applied.new_value = value;
            write_value(live, applied);
            if (change.target == UpdateTarget::PromptDirectives) prompt_touched = true;
            report.changes.push_back(applied);
        }
        for (const auto& h : update.heuristic_additions) {
            if (!live.prompt.has_heuristic(h)) {
                live.prompt.learned_heuristics.push_back(h);
                prompt_touched = true;
            }
        }
        if (prompt_touched) live.prompt.version += 1;

        report.applied = true;
        report.reason = "applied";
        report.prompt_version_after = live.prompt.version;
        report.episode_id = record_episode(kb, now, update, report, "applied");
        return report;
    }

private:
    static void write_value(LiveConfigs& live, const ParameterChange& c) {
        switch (c.target) {
            case UpdateTarget::PromptDirectives:
                live.prompt.directives[c.key] = c.new_value;
                return;
            case UpdateTarget::Thresholds:
                if (c.key == "critical_response_time")
                    live.thresholds.critical_response_time = c.new_value;
                else if (c.key == "critical_utilization")
                    live.thresholds.critical_utilization = c.new_value;
                else if (c.key == "monitor_interval")
                    live.thresholds.monitor_interval = c.new_value;
                else if (c.key == "reasoner_interval")
                    live.thresholds.reasoner_interval = c.new_value;
                return;
            case UpdateTarget::ReactivePolicy:
                if (c.key == "dimmer_step")
                    live.policy.dimmer_step = c.new_value;
                else if (c.key == "min_dimmer")
                    live.policy.min_dimmer = c.new_value;
                return;
            case UpdateTarget::Invariants:
                if (c.key == "action_cooldown") live.invariants.action_cooldown = c.new_value;
                return;
            case UpdateTarget::WorldModel:
                if (c.key == "ew_factor") live.wm.set_ew_factor(c.new_value);
                return;
        }
    }

    std::uint64_t record_episode(KnowledgeBase& kb, double now, const StrategyUpdate& update,
                                 const AppliedReport& report, const char* outcome) const {
        Episode e;
        e.timestamp = now;
        e.kind = EpisodeKind::MetaUpdate;
        e.tags = {"meta", outcome};
        e.payload = Json{{"update", update},
                         {"outcome", outcome},
                         {"reason", report.reason},
                         {"changes_applied", report.changes},
                         {"clamped", report.clamped},
                         {"prompt_version", report.prompt_version_after}};
        return kb.record(std::move(e));
    }

    // --- pattern detectors -------------------------------------------------

    struct SnapshotRow {
        std::uint64_t id;
        double t;
        double util;
        std::uint64_t late;
        std::uint64_t requests;
        int active;
    };

    static std::vector<SnapshotRow> snapshot_rows(const std::vector<Episode>& eps) {
        std::vector<SnapshotRow> rows;
        for (const auto& e : eps)
            if (e.kind == EpisodeKind::SnapshotRecorded)
                rows.push_back({e.id, e.timestamp, e.payload.value("server_utilization", 0.0),
                                e.payload.value("late_count", std::uint64_t{0}),
                                e.payload.value("request_count", std::uint64_t{0}),
                                e.payload.value("active_servers", 1)});
        return rows;
    }

    std::optional<Pattern> detect_precursor(const std::vector<Episode>& eps) const {
        const auto rows = snapshot_rows(eps);
        Pattern p{PatternKind::ReactivePrecursor, 0, conf_.reflect_window, {}, 0.0};
        double util_sum = 0.0;
        for (const auto& e : eps) {
            if (e.kind != EpisodeKind::ReactiveTrigger) continue;
            // Preceding window: the last snapshot strictly before the
            // trigger's own cycle.
            const SnapshotRow* preceding = nullptr;
            for (const auto& row : rows) {
                if (row.t < e.timestamp) preceding = &row;
                else break;
            }
            if (preceding == nullptr || preceding->util < conf_.precursor_util_floor) continue;
            bool followed_by_add = false;
            for (const auto& a : eps) {
                if (a.kind != EpisodeKind::ActionExecuted) continue;
                if (a.timestamp < e.timestamp || a.timestamp > e.timestamp + conf_.follow_span)
                    continue;
                if (a.payload.contains("action") &&
                    a.payload.at("action").value("kind", "") == "add_server") {
                    followed_by_add = true;
                    break;
                }
            }
            if (!followed_by_add) continue;
            ++p.support;
            util_sum += preceding->util;
            p.evidence.push_back(e.id);
        }
        if (p.support == 0) return std::nullopt;
        p.statistic = util_sum / p.support;
        return p;
    }

    std::optional<Pattern> detect_oscillation(const std::vector<Episode>& eps) const {
        std::vector<std::pair<const Episode*, bool>> scaling;  // (episode, is_add)
        for (const auto& e : eps) {
            if (e.kind != EpisodeKind::ActionExecuted || !e.payload.contains("action")) continue;
            const std::string kind = e.payload.at("action").value("kind", "");
            if (kind == "add_server") scaling.push_back({&e, true});
            else if (kind == "remove_server") scaling.push_back({&e, false});
        }
        Pattern p{PatternKind::OscillationLoop, 0, conf_.reflect_window, {}, 0.0};
        double gap_sum = 0.0;
        for (std::size_t i = 1; i < scaling.size(); ++i) {
            const double gap = scaling[i].first->timestamp - scaling[i - 1].first->timestamp;
            if (scaling[i].second != scaling[i - 1].second && gap <= conf_.oscillation_span) {
                ++p.support;
                gap_sum += gap;
                if (p.evidence.empty()) p.evidence.push_back(scaling[i - 1].first->id);
                p.evidence.push_back(scaling[i].first->id);
            }
        }
        if (p.support == 0) return std::nullopt;
        p.statistic = gap_sum / p.support;
        return p;
    }

    std::optional<Pattern> detect_lateness(const std::vector<Episode>& eps) const {
        const auto rows = snapshot_rows(eps);
        // Longest run of consecutive windows with late responses.
        std::size_t best_begin = 0, best_len = 0, run_begin = 0, run_len = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].late > 0) {
                if (run_len == 0) run_begin = i;
                ++run_len;
                if (run_len > best_len) {
                    best_len = run_len;
                    best_begin = run_begin;
                }
            } else {
                run_len = 0;
            }
        }
        if (best_len < static_cast<std::size_t>(std::max(conf_.lateness_k, conf_.min_support)))
            return std::nullopt;
        const double span_start = rows[best_begin].t;
        const double span_end = rows[best_begin + best_len - 1].t;
        bool acted = false;
        for (const auto& e : eps)
            if (e.kind == EpisodeKind::ActionExecuted && e.timestamp >= span_start &&
                e.timestamp <= span_end) {
                acted = true;
                break;
            }
        if (!acted) return std::nullopt;  // only counts when lateness persisted despite actions
        Pattern p{PatternKind::PersistentLateness, static_cast<int>(best_len),
                  conf_.reflect_window, {}, 0.0};
        double frac_sum = 0.0;
        for (std::size_t i = best_begin; i < best_begin + best_len; ++i) {
            p.evidence.push_back(rows[i].id);
            if (rows[i].requests > 0)
                frac_sum += static_cast<double>(rows[i].late) / rows[i].requests;
        }
        p.statistic = frac_sum / best_len;
        return p;
    }

    std::optional<Pattern> detect_overprovisioning(const std::vector<Episode>& eps,
                                                   const InvariantSet& invariants) const {
        const auto rows = snapshot_rows(eps);
        std::size_t best_begin = 0, best_len = 0, run_begin = 0, run_len = 0;
        for (std::size_t i = 0; i < rows.size(); ++i) {
            if (rows[i].util < conf_.overprov_util_floor &&
                rows[i].active > invariants.min_servers) {
                if (run_len == 0) run_begin = i;
                ++run_len;
                if (run_len > best_len) {
                    best_len = run_len;
                    best_begin = run_begin;
                }
            } else {
                run_len = 0;
            }
        }
        if (best_len < static_cast<std::size_t>(std::max(conf_.overprov_k, conf_.min_support)))
            return std::nullopt;
        Pattern p{PatternKind::OverProvisioning, static_cast<int>(best_len),
                  conf_.reflect_window, {}, 0.0};
        double util_sum = 0.0;
        for (std::size_t i = best_begin; i < best_begin + best_len; ++i) {
            p.evidence.push_back(rows[i].id);
            util_sum += rows[i].util;
        }
        p.statistic = util_sum / best_len;
        return p;
    }

    MetaConfig conf_;
};

}  // namespace polaris
