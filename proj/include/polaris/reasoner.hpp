#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "polaris/codec.hpp"
#include "polaris/domain.hpp"
#include "polaris/knowledge_base.hpp"
#include "polaris/world_model.hpp"

// Deliberative planner: consumes a reasoning context, uses the KB/WM tools,
// and emits one candidate directive per cycle. Two interchangeable engines:
// a deterministic rule engine (reference) and an external HTTP engine
// (external_engine.hpp).

namespace polaris {

class RenderError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class ToolError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// The Reasoner's mutable strategy object; the Meta-Learner's write target.
struct PromptConfig {
    std::string invariants_text;                 // rendered hard invariants
    std::map<std::string, double> directives;    // operational parameters
    std::vector<std::string> reasoning_workflow; // ordered step templates
    std::string output_schema;                   // structured-output contract
    std::vector<std::string> learned_heuristics; // appended by the Meta-Learner
    int version = 1;

    static std::string render_invariants(const InvariantSet& inv) {
        std::ostringstream oss;
        oss << "max_servers <= " << inv.max_servers << "; min_servers >= " << inv.min_servers
            << "; dimmer within [" << Json(inv.dimmer_lo).dump() << ", "
            << Json(inv.dimmer_hi).dump() << "]; same-kind action cooldown "
            << Json(inv.action_cooldown).dump() << "s; at most " << inv.max_actions_per_cycle
            << " action per cycle";
        return oss.str();
    }

    static PromptConfig defaults(const InvariantSet& inv) {
        PromptConfig conf;
        conf.invariants_text = render_invariants(inv);
        conf.directives = {
            {"server_util_danger", 0.90}, {"response_time_goal", 0.5},
            {"target_util", 0.70},        {"dim_step", 0.15},
            {"restore_margin", 0.8},      {"risk_cap", 0.1},
            {"low_util_floor", 0.3},      {"persistence_k", 3},
            {"wm_horizon", 90},
        };
        conf.reasoning_workflow = {
            "Analyze the latest snapshot and recent trends; query the knowledge base "
            "(kb_query) for relevant history.",
            "Simulate candidate actions with wm_simulate; utilization above "
            "{server_util_danger} is dangerous, aim for {target_util}.",
            "Act: adjust the dimmer first (step {dim_step}), scale servers only under "
            "persistent overload, and keep response time under {response_time_goal}s.",
        };
        conf.output_schema =
            R"({"action": "add_server|remove_server|set_dimmer|no_op", )"
            R"("dimmer_target": <number, set_dimmer only>, "rationale": "<string>"})";
        return conf;
    }

    double directive(const std::string& key) const {
        const auto it = directives.find(key);
        if (it == directives.end()) throw ConfigError("missing directive: " + key);
        return it->second;
    }

    bool has_heuristic(const std::string& text) const {
        for (const auto& h : learned_heuristics)
            if (h == text) return true;
        return false;
    }
};

inline void to_json(Json& j, const PromptConfig& c) {
    j = Json{{"invariants_text", c.invariants_text},
             {"directives", c.directives},
             {"reasoning_workflow", c.reasoning_workflow},
             {"output_schema", c.output_schema},
             {"learned_heuristics", c.learned_heuristics},
             {"version", c.version}};
}

inline void from_json(const Json& j, PromptConfig& c) {
    c.invariants_text = j.value("invariants_text", c.invariants_text);
    if (j.contains("directives"))
        c.directives = j.at("directives").get<std::map<std::string, double>>();
    if (j.contains("reasoning_workflow"))
        c.reasoning_workflow = j.at("reasoning_workflow").get<std::vector<std::string>>();
    c.output_schema = j.value("output_schema", c.output_schema);
    if (j.contains("learned_heuristics"))
        c.learned_heuristics = j.at("learned_heuristics").get<std::vector<std::string>>();
    c.version = j.value("version", c.version);
}

struct ToolDescriptor {
    std::string name;
    std::string description;
};

// Immutable per cycle.
struct ReasoningContext {
    GoalSpec goals;
    InvariantSet invariants;
    MetricSnapshot snapshot;  // carries dimmer and server counts
    std::vector<ToolDescriptor> tools;
};

struct ToolCall {
    std::string name;  // kb_query | wm_simulate
    Json arguments;
    Json result;
    double latency_ms = 0.0;
    bool ok = true;
    std::string error;
};

inline void to_json(Json& j, const ToolCall& t) {
    j = Json{{"name", t.name},       {"arguments", t.arguments}, {"result", t.result},
             {"latency_ms", t.latency_ms}, {"ok", t.ok},         {"error", t.error}};
}

inline void to_json(Json& j, const KBQuery& q) {
    j = Json{{"semantic_filter", q.semantic_filter}, {"limit", q.limit}};
    Json kinds = Json::array();
    for (auto k : q.kinds) kinds.push_back(to_string(k));
    j["kinds"] = kinds;
    if (q.time_from) j["time_from"] = *q.time_from;
    if (q.time_to) j["time_to"] = *q.time_to;
    Json numeric = Json::array();
    for (const auto& p : q.numeric) {
        static constexpr const char* ops[] = {"lt", "le", "gt", "ge", "eq"};
        numeric.push_back(
            Json{{"field", p.field}, {"op", ops[static_cast<int>(p.op)]}, {"value", p.value}});
    }
    j["numeric"] = numeric;
}

inline void to_json(Json& j, const WMQuery& q) {
    j = Json{{"action", q.action}, {"state", q.state}, {"horizon", q.horizon}};
}

enum class EngineKind { Rules, External };

inline const char* to_string(EngineKind e) {
    return e == EngineKind::Rules ? "rules" : "external";
}

// Exactly one action per cycle; failures degrade to a flagged NoOp.
struct Decision {
    AdaptationAction action;
    std::string rationale;
    std::vector<ToolCall> tool_trace;
    EngineKind engine = EngineKind::Rules;
    bool fail_safe = false;
    std::string failure;  // non-empty when fail_safe
};

inline void to_json(Json& j, const Decision& d) {
    j = Json{{"action", d.action},       {"rationale", d.rationale},
             {"tool_trace", d.tool_trace}, {"engine", to_string(d.engine)},
             {"fail_safe", d.fail_safe},   {"failure", d.failure}};
}

// Executes tool calls on behalf of an engine, measuring latency and logging
// every access so the decision's tool_trace is complete.
class ToolExecutor {
public:
    using KbFn = std::function<std::vector<Episode>(const KBQuery&)>;
    using WmFn = std::function<StateDistribution(const WMQuery&)>;

    ToolExecutor(KbFn kb, WmFn wm) : kb_(std::move(kb)), wm_(std::move(wm)) {}

    std::vector<Episode> kb_query(const KBQuery& q) {
        return run<std::vector<Episode>>("kb_query", Json(q), kb_, q, [](const auto& eps) {
            Json ids = Json::array();
            for (const auto& e : eps) ids.push_back(e.id);
            return Json{{"episodes", ids.size()}, {"ids", ids}};
        });
    }

    StateDistribution wm_simulate(const WMQuery& q) {
        return run<StateDistribution>("wm_simulate", Json(q), wm_, q,
                                      [](const StateDistribution& d) { return Json(d); });
    }

    const std::vector<ToolCall>& trace() const { return trace_; }
    std::vector<ToolCall> take_trace() { return std::move(trace_); }
    std::uint64_t kb_calls() const { return kb_calls_; }
    std::uint64_t wm_calls() const { return wm_calls_; }

private:
    template <typename R, typename Fn, typename Arg, typename Summarize>
    R run(const char* name, Json args, const Fn& fn, const Arg& arg, Summarize&& summarize) {
        if (!fn) throw ToolError(std::string(name) + ": tool not wired");
        (name[0] == 'k' ? kb_calls_ : wm_calls_)++;
        ToolCall call;
        call.name = name;
        call.arguments = std::move(args);
        const auto t0 = std::chrono::steady_clock::now();
        try {
            R result = fn(arg);
            call.latency_ms = elapsed_ms(t0);
            call.result = summarize(result);
            trace_.push_back(std::move(call));
            return result;
        } catch (const std::exception& e) {
            call.latency_ms = elapsed_ms(t0);
            call.ok = false;
            call.error = e.what();
            trace_.push_back(std::move(call));
            throw ToolError(std::string(name) + " failed: " + e.what());
        }
    }

    static double elapsed_ms(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }

    KbFn kb_;
    WmFn wm_;
    std::vector<ToolCall> trace_;
    std::uint64_t kb_calls_ = 0;
    std::uint64_t wm_calls_ = 0;
};

// {key} substitution against a variable map; an unresolved key is an error.
inline std::string expand_template(const std::string& tmpl,
                                   const std::map<std::string, std::string>& vars) {
    std::string out;
    out.reserve(tmpl.size());
    std::size_t i = 0;
    while (i < tmpl.size()) {
        if (tmpl[i] != '{') {
            out.push_back(tmpl[i++]);
            continue;
        }
        const auto close = tmpl.find('}', i);
        if (close == std::string::npos) throw RenderError("unterminated template variable");
        const std::string key = tmpl.substr(i + 1, close - i - 1);
        const auto it = vars.find(key);
        if (it == vars.end()) throw RenderError("unresolved template variable: {" + key + "}");
        out += it->second;
        i = close + 1;
    }
    return out;
}

// Deterministic template expansion: identical (conf, ctx) yield identical
// bytes. The text carries the invariants, every directive key and value, the
// workflow steps, tool descriptions, the latest snapshot figures, learned
// heuristics verbatim in order, and the output schema.
inline std::string render_prompt(const PromptConfig& conf, const ReasoningContext& ctx) {
    std::map<std::string, std::string> vars;
    for (const auto& [key, value] : conf.directives) vars[key] = Json(value).dump();

    std::ostringstream oss;
    oss << "System role: proactive controller maintaining the SLA (response time < "
        << Json(ctx.goals.sla_bound).dump() << "s) via adaptive dimmer and server scaling.\n";
    oss << "Goals: response_time_goal " << Json(ctx.goals.response_time_goal).dump() << "s";
    if (ctx.goals.prefer_max_dimmer) oss << "; keep dimmer near 1.0";
    if (ctx.goals.minimize_servers) oss << "; minimize servers";
    oss << ".\n";
    oss << "Hard invariants: " << conf.invariants_text << ".\n";
    oss << "Directives:\n";
    for (const auto& [key, value] : conf.directives)
        oss << "  " << key << ": " << Json(value).dump() << "\n";
    oss << "Workflow:\n";
    int step = 1;
    for (const auto& tmpl : conf.reasoning_workflow)
        oss << "  " << step++ << ". " << expand_template(tmpl, vars) << "\n";
    if (!conf.learned_heuristics.empty()) {
        oss << "Learned heuristics:\n";
        for (const auto& h : conf.learned_heuristics) oss << "  - " << h << "\n";
    }
    oss << "Tools:\n";
    for (const auto& tool : ctx.tools)
        oss << "  " << tool.name << ": " << tool.description << "\n";
    const auto& s = ctx.snapshot;
    oss << "Current state: window [" << Json(s.window_start).dump() << ", "
        << Json(s.window_end).dump() << ")s, avg_rt " << Json(s.avg_response_time).dump()
        << "s, p95_rt " << Json(s.p95_response_time).dump() << "s, utilization "
        << Json(s.server_utilization).dump() << ", arrival_rate " << Json(s.arrival_rate).dump()
        << "/s, dimmer " << Json(s.dimmer).dump() << ", servers " << s.active_servers << " active + "
        << s.booting_servers << " booting, requests " << s.request_count << " (" << s.late_count
        << " late, " << s.optional_count << " optional).\n";
    oss << "Constraints: one stable action per cycle, respect cooldowns, never violate the "
           "SLA.\n";
    oss << "Reply with valid JSON only, schema: " << conf.output_schema << "\n";
    oss << "Prompt version: " << conf.version << "\n";
    return oss.str();
}

class ReasonerEngine {
public:
    virtual ~ReasonerEngine() = default;
    virtual Decision decide(const ReasoningContext& ctx, const PromptConfig& conf,
                            ToolExecutor& tools) = 0;
    virtual EngineKind kind() const = 0;
};

// Reactive baseline: no strategic reasoning at all. Every strategic cycle
// yields NoOp, leaving the fast controller as the only decision maker.
class ReactiveBaselineEngine : public ReasonerEngine {
public:
    EngineKind kind() const override { return EngineKind::Rules; }
    Decision decide(const ReasoningContext& ctx, const PromptConfig&,
                    ToolExecutor& tools) override {
        Decision d;
        d.engine = EngineKind::Rules;
        d.action = AdaptationAction::no_op(ActionOrigin::Reasoner, ctx.snapshot.window_end,
                                           "reactive baseline: no strategic reasoning");
        d.rationale = "reactive baseline";
        d.tool_trace = tools.take_trace();
        return d;
    }
};

// Canonical heuristic strings the meta-learner can add and the rules engine
// understands (see meta_learner.hpp).
namespace heuristics {
inline constexpr const char* prefer_gradual = "Prefer gradual changes";
inline constexpr const char* explore_remove =
    "Consider removing a server when utilization stays low";
}  // namespace heuristics

// Deterministic reference engine encoding the documented workflow: ordered
// rules, first match wins, every consultation traced.
class RulesEngine : public ReasonerEngine {
public:
    EngineKind kind() const override { return EngineKind::Rules; }

    Decision decide(const ReasoningContext& ctx, const PromptConfig& conf,
                    ToolExecutor& tools) override {
        Decision decision;
        decision.engine = EngineKind::Rules;
        try {
            decision.action = evaluate(ctx, conf, tools, decision.rationale);
        } catch (const ToolError& e) {
            decision.action = AdaptationAction::no_op(ActionOrigin::Reasoner,
                                                      ctx.snapshot.window_end, e.what());
            decision.rationale = std::string("fail-safe no_op: ") + e.what();
            decision.fail_safe = true;
            decision.failure = e.what();
        }
        decision.tool_trace = tools.take_trace();
        return decision;
    }

private:
    AdaptationAction evaluate(const ReasoningContext& ctx, const PromptConfig& conf,
                              ToolExecutor& tools, std::string& rationale) const {
        const auto& snap = ctx.snapshot;
        const auto& inv = ctx.invariants;
        const double now = snap.window_end;
        const double util = snap.server_utilization;
        const double rt = snap.avg_response_time;
        const double dimmer = snap.dimmer;
        const double horizon = conf.directive("wm_horizon");
        const int total = snap.active_servers + snap.booting_servers;

        // Rule 1: dangerous utilization and the world model expects adding a
        // server to help.
        if (util > conf.directive("server_util_danger") && total < inv.max_servers) {
            const auto base = tools.wm_simulate({AdaptationAction::no_op(ActionOrigin::Reasoner, now),
                                                 snap, horizon});
            const auto with_add = tools.wm_simulate(
                {AdaptationAction::add_server(ActionOrigin::Reasoner, now), snap, horizon});
            if (with_add.mean_response_time < base.mean_response_time) {
                rationale = "utilization " + Json(util).dump() + " above danger; WM predicts rt " +
                            Json(with_add.mean_response_time).dump() + " after add_server";
                return AdaptationAction::add_server(ActionOrigin::Reasoner, now, rationale);
            }
        }

        // Rule 2: response time over the goal; shed optional load.
        const double goal = conf.directive("response_time_goal");
        const double step = conf.directive("dim_step");
        if (rt > goal && dimmer > inv.dimmer_lo) {
            const double target = std::clamp(dimmer - step, inv.dimmer_lo, inv.dimmer_hi);
            rationale = "avg_rt " + Json(rt).dump() + "s above goal; lowering dimmer to " +
                        Json(target).dump();
            return AdaptationAction::set_dimmer(target, ActionOrigin::Reasoner, now, rationale);
        }

        // Rule 3: comfortably under the goal; restore fidelity if the world
        // model calls it safe.
        if (rt < goal * conf.directive("restore_margin") && dimmer < inv.dimmer_hi) {
            const double target = std::clamp(dimmer + step, inv.dimmer_lo, inv.dimmer_hi);
            const auto pred = tools.wm_simulate(
                {AdaptationAction::set_dimmer(target, ActionOrigin::Reasoner, now), snap, horizon});
            if (pred.prob_rt_exceeds(ctx.goals.sla_bound) < conf.directive("risk_cap")) {
                rationale = "headroom under goal; restoring dimmer to " + Json(target).dump() +
                            " (P[rt>sla] " + Json(pred.prob_rt_exceeds(ctx.goals.sla_bound)).dump() +
                            ")";
                return AdaptationAction::set_dimmer(target, ActionOrigin::Reasoner, now, rationale);
            }
        }

        // Rule 4: persistently low utilization; scale in when the world
        // model keeps response time safe.
        if (snap.active_servers > inv.min_servers) {
            int persistence = static_cast<int>(conf.directive("persistence_k"));
            if (conf.has_heuristic(heuristics::prefer_gradual)) persistence *= 2;
            if (conf.has_heuristic(heuristics::explore_remove))
                persistence = std::max(1, persistence - 1);
            KBQuery history;
            history.kinds = {EpisodeKind::SnapshotRecorded};
            history.limit = static_cast<std::size_t>(persistence);
            const auto recent = tools.kb_query(history);
            const double low = conf.directive("low_util_floor");
            bool persistently_low = recent.size() >= static_cast<std::size_t>(persistence);
            for (const auto& e : recent)
                persistently_low =
                    persistently_low && e.payload.value("server_utilization", 1.0) < low;
            if (persistently_low) {
                const auto pred = tools.wm_simulate(
                    {AdaptationAction::remove_server(ActionOrigin::Reasoner, now), snap, horizon});
                if (pred.mean_response_time < goal &&
                    pred.prob_rt_exceeds(ctx.goals.sla_bound) < conf.directive("risk_cap") &&
                    pred.mean_utilization <= conf.directive("target_util")) {
                    rationale = "utilization below " + Json(low).dump() + " for " +
                                std::to_string(persistence) + " windows; WM keeps rt safe";
                    return AdaptationAction::remove_server(ActionOrigin::Reasoner, now, rationale);
                }
            }
        }

        rationale = "all nominal";
        return AdaptationAction::no_op(ActionOrigin::Reasoner, now, rationale);
    }
};

}  // namespace polaris
