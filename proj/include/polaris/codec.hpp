#pragma once

#include <json.hpp>

#include "polaris/domain.hpp"

// JSON wire forms for everything that crosses the bus, lands in the
// knowledge base, or lives in the configuration file. Field names are the
// stable external schema; see docs/messages.md.

namespace polaris {

using Json = nlohmann::json;

inline void to_json(Json& j, const MetricSample& s) {
    j = Json{{"timestamp", s.timestamp},
             {"response_time", s.response_time},
             {"optional", s.is_optional_served},
             {"late", s.is_late}};
}

inline void from_json(const Json& j, MetricSample& s) {
    j.at("timestamp").get_to(s.timestamp);
    j.at("response_time").get_to(s.response_time);
    j.at("optional").get_to(s.is_optional_served);
    j.at("late").get_to(s.is_late);
}

inline void to_json(Json& j, const MetricSnapshot& s) {
    j = Json{{"window_start", s.window_start},
             {"window_end", s.window_end},
             {"avg_response_time", s.avg_response_time},
             {"p95_response_time", s.p95_response_time},
             {"server_utilization", s.server_utilization},
             {"arrival_rate", s.arrival_rate},
             {"dimmer", s.dimmer},
             {"active_servers", s.active_servers},
             {"booting_servers", s.booting_servers},
             {"request_count", s.request_count},
             {"late_count", s.late_count},
             {"optional_count", s.optional_count}};
}

inline void from_json(const Json& j, MetricSnapshot& s) {
    j.at("window_start").get_to(s.window_start);
    j.at("window_end").get_to(s.window_end);
    j.at("avg_response_time").get_to(s.avg_response_time);
    j.at("p95_response_time").get_to(s.p95_response_time);
    j.at("server_utilization").get_to(s.server_utilization);
    j.at("arrival_rate").get_to(s.arrival_rate);
    j.at("dimmer").get_to(s.dimmer);
    j.at("active_servers").get_to(s.active_servers);
    j.at("booting_servers").get_to(s.booting_servers);
    j.at("request_count").get_to(s.request_count);
    j.at("late_count").get_to(s.late_count);
    j.at("optional_count").get_to(s.optional_count);
}

inline void to_json(Json& j, const AdaptationAction& a) {
    j = Json{{"kind", to_string(a.kind)},
             {"origin", to_string(a.origin)},
             {"issued_at", a.issued_at},
             {"rationale", a.rationale}};
    if (a.dimmer_target) j["dimmer_target"] = *a.dimmer_target;
}

inline void from_json(const Json& j, AdaptationAction& a) {
    const auto kind = action_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown action kind");
    a.kind = *kind;
    a.origin = j.at("origin").get<std::string>() == "fast_controller"
                   ? ActionOrigin::FastController
                   : ActionOrigin::Reasoner;
    j.at("issued_at").get_to(a.issued_at);
    a.rationale = j.value("rationale", std::string{});
    if (j.contains("dimmer_target"))
        a.dimmer_target = j.at("dimmer_target").get<double>();
    else
        a.dimmer_target.reset();
}

inline void to_json(Json& j, const GoalSpec& g) {
    j = Json{{"response_time_goal", g.response_time_goal},
             {"prefer_max_dimmer", g.prefer_max_dimmer},
             {"minimize_servers", g.minimize_servers},
             {"sla_bound", g.sla_bound}};
}

inline void from_json(const Json& j, GoalSpec& g) {
    g.response_time_goal = j.value("response_time_goal", g.response_time_goal);
    g.prefer_max_dimmer = j.value("prefer_max_dimmer", g.prefer_max_dimmer);
    g.minimize_servers = j.value("minimize_servers", g.minimize_servers);
    g.sla_bound = j.value("sla_bound", g.sla_bound);
}

inline void to_json(Json& j, const InvariantSet& v) {
    j = Json{{"max_servers", v.max_servers},
             {"min_servers", v.min_servers},
             {"dimmer_range", Json::array({v.dimmer_lo, v.dimmer_hi})},
             {"action_cooldown", v.action_cooldown},
             {"max_actions_per_cycle", v.max_actions_per_cycle}};
}

inline void from_json(const Json& j, InvariantSet& v) {
    v.max_servers = j.value("max_servers", v.max_servers);
    v.min_servers = j.value("min_servers", v.min_servers);
    if (j.contains("dimmer_range")) {
        v.dimmer_lo = j.at("dimmer_range").at(0).get<double>();
        v.dimmer_hi = j.at("dimmer_range").at(1).get<double>();
    }
    v.action_cooldown = j.value("action_cooldown", v.action_cooldown);
    v.max_actions_per_cycle = j.value("max_actions_per_cycle", v.max_actions_per_cycle);
}

inline void to_json(Json& j, const UtilityConfig& u) {
    j = Json{{"optional_revenue", u.optional_revenue},
             {"mandatory_revenue", u.mandatory_revenue},
             {"late_penalty", u.late_penalty},
             {"server_cost", u.server_cost}};
}

inline void from_json(const Json& j, UtilityConfig& u) {
    u.optional_revenue = j.value("optional_revenue", u.optional_revenue);
    u.mandatory_revenue = j.value("mandatory_revenue", u.mandatory_revenue);
    u.late_penalty = j.value("late_penalty", u.late_penalty);
    u.server_cost = j.value("server_cost", u.server_cost);
}

}  // namespace polaris
