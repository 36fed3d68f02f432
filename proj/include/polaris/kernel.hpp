#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polaris/adapters.hpp"
#include "polaris/bus.hpp"
#include "polaris/fast_controller.hpp"
#include "polaris/knowledge_base.hpp"
#include "polaris/meta_learner.hpp"
#include "polaris/reasoner.hpp"
#include "polaris/triage.hpp"
#include "polaris/verifier.hpp"
#include "polaris/world_model.hpp"

// Central orchestrator: runs the monitoring cadence, triages each snapshot,
// and dispatches control to the Stabilization or Strategic path. Ends every
// cycle with experience recording; invokes the meta-learner on its period.

namespace polaris {

// Tool handles the Reasoner may use. Both must be present.
struct ToolRegistry {
    KnowledgeBase* kb = nullptr;
    WorldModel* wm = nullptr;

    std::vector<ToolDescriptor> descriptors() const {
        return {{"kb_query",
                 "query the knowledge base for historical episodes (semantic keywords plus "
                 "structured constraints)"},
                {"wm_simulate",
                 "simulate a candidate action against the current state; returns a distribution "
                 "over the predicted next state"}};
    }
};

// Bundles goals, invariants, the latest snapshot, and tool descriptors;
// immutable for the cycle. A missing tool is a configuration error.
inline ReasoningContext build_context(const GoalSpec& goals, const InvariantSet& invariants,
                                      const MetricSnapshot& latest, const ToolRegistry& registry) {
    if (registry.kb == nullptr) throw ConfigError("tool registry: knowledge base not wired");
    if (registry.wm == nullptr) throw ConfigError("tool registry: world model not wired");
    return ReasoningContext{goals, invariants, latest, registry.descriptors()};
}

struct CycleRecord {
    int cycle = 0;
    MetricSnapshot snapshot;
    DispatchDecision dispatch;
    std::optional<AdaptationAction> action;
    std::optional<Verdict> verdict;
    std::optional<Ack> ack;
    std::vector<ToolCall> tool_trace;
    std::string engine;  // "fast_controller", "rules", "external", ""
    double utility = 0.0;
    double decide_wall_ms = 0.0;
    std::string note;
};

struct RunLog {
    std::vector<CycleRecord> cycles;
    std::vector<std::string> errors;
    int reactive_dispatches = 0;
    int strategic_dispatches = 0;
    int discarded_inflight = 0;
    int meta_invocations = 0;
};

// Wall-clock latency samples per pipeline stage (overheads report schema).
class OverheadRegistry {
public:
    void add(const std::string& stage, double ms) { samples_[stage].push_back(ms); }
    const std::map<std::string, std::vector<double>>& samples() const { return samples_; }

private:
    std::map<std::string, std::vector<double>> samples_;
};

namespace stages {
inline constexpr const char* end_to_end = "end_to_end_reasoning";
inline constexpr const char* engine_call = "engine_call";
inline constexpr const char* tool_call = "tool_call";
inline constexpr const char* kb_query = "kb_query";
inline constexpr const char* wm_operation = "wm_operation";
}  // namespace stages

struct KernelOptions {
    bool enable_fast = true;
    bool enable_meta = true;
    bool freeze_meta = false;        // reflect, but never evolve or apply
    bool deterministic_tools = false;  // --no-tools: canned tool results from the latest snapshot
    bool async_strategic = false;    // real-time mode: engine decisions on a worker thread
    bool wm_online_update = true;
};

struct Wiring {
    std::function<std::vector<MetricSample>(double)> advance;  // step the managed system
    std::function<ActuatorView()> actuators;
    std::function<bool()> has_pending;
    MessageBus* bus = nullptr;
    TelemetryPump* pump = nullptr;
    MetricCollector* collector = nullptr;
    ExecutionAdapter* executor = nullptr;
    KnowledgeBase* kb = nullptr;
    WorldModel* wm = nullptr;
    ReasonerEngine* engine = nullptr;
    MetaLearner* meta = nullptr;  // may be null only when meta is disabled
    PromptConfig* prompt = nullptr;
    ThresholdConfig* thresholds = nullptr;
    GoalSpec* goals = nullptr;
    InvariantSet* invariants = nullptr;
    ReactivePolicy* policy = nullptr;
    UtilityConfig* utility = nullptr;
};

class Kernel {
public:
    Kernel(Wiring wiring, KernelOptions options)
        : w_(std::move(wiring)), opt_(options) {
        require(w_.advance != nullptr, "advance");
        require(w_.actuators != nullptr, "actuators");
        require(w_.bus, "bus");
        require(w_.pump, "pump");
        require(w_.collector, "collector");
        require(w_.executor, "executor");
        require(w_.kb, "knowledge base");
        require(w_.wm, "world model");
        require(w_.engine, "reasoner engine");
        require(w_.prompt, "prompt config");
        require(w_.thresholds, "thresholds");
        require(w_.goals, "goals");
        require(w_.invariants, "invariants");
        require(w_.policy, "reactive policy");
        require(w_.utility, "utility config");
        if (opt_.enable_meta) require(w_.meta, "meta learner");
        // Fail fast if the tool registry is incomplete.
        build_context(*w_.goals, *w_.invariants, MetricSnapshot{}, registry());
    }

    // Advances the managed system one monitoring window at a time until
    // `duration`, then (optionally) keeps cycling until in-flight work
    // drains. Fail-operational: a failing cycle is logged and skipped.
    RunLog run(double duration, bool drain = true) {
        RunLog log;
        int cycle = 0;
        while (true) {
            const double cursor = w_.collector->cursor();
            if (cursor >= duration - 1e-9 && !(drain && w_.has_pending && w_.has_pending()))
                break;
            try {
                run_cycle(cycle, log);
            } catch (const std::exception& e) {
                log.errors.push_back("cycle " + std::to_string(cycle) + ": " + e.what());
            }
            ++cycle;
            if (cycle > 1000000) {  // defensive bound for runaway drains
                log.errors.push_back("cycle limit reached");
                break;
            }
        }
        finish_inflight(log);
        return log;
    }

    OverheadRegistry& overheads() { return overheads_; }
    const OverheadRegistry& overheads() const { return overheads_; }

    ToolRegistry registry() const { return {w_.kb, w_.wm}; }

private:
    static void require(bool ok, const char* what) {
        if (!ok) throw ConfigError(std::string("kernel wiring: missing ") + what);
    }
    static void require(const void* p, const char* what) { require(p != nullptr, what); }

    struct PendingExperience {
        MetricSnapshot context;
        AdaptationAction decision;
        bool accepted = true;
        std::vector<std::string> violated;
    };

    void run_cycle(int cycle, RunLog& log) {
        const double interval = w_.thresholds->monitor_interval;
        const double window_end = w_.collector->cursor() + interval;

        auto samples = w_.advance(window_end);
        w_.pump->publish(samples);
        auto snapshot = w_.collector->collect(interval);

        CycleRecord rec;
        rec.cycle = cycle;
        rec.snapshot = snapshot;
        rec.utility = interval_utility(snapshot, *w_.utility, w_.goals->sla_bound);

        record_snapshot_episode(snapshot);
        complete_pending_experience(snapshot, rec.utility);
        feed_world_model(snapshot);

        rec.dispatch = triage(snapshot, *w_.thresholds);

        // An in-flight strategic decision is allowed to land now, unless a
        // preemption happened while it was out.
        if (opt_.async_strategic) poll_inflight(snapshot, log, rec);

        switch (rec.dispatch.path) {
            case DispatchPath::Stabilization:
                ++log.reactive_dispatches;
                handle_stabilization(snapshot, rec, log);
                break;
            case DispatchPath::Strategic:
                ++log.strategic_dispatches;
                handle_strategic(snapshot, rec, log);
                break;
            case DispatchPath::Idle:
                break;
        }

        prev_snapshot_ = snapshot;
        log.cycles.push_back(std::move(rec));
    }

    void record_snapshot_episode(const MetricSnapshot& snap) {
        Episode e;
        e.timestamp = snap.window_end;
        e.kind = EpisodeKind::SnapshotRecorded;
        e.tags = {"snapshot"};
        if (snap.late_count > 0) e.tags.insert("late");
        e.payload = snap;
        w_.kb->record(std::move(e));
    }

    void complete_pending_experience(const MetricSnapshot& outcome, double utility) {
        if (!pending_experience_) return;
        ExperienceTuple tuple;
        tuple.context = pending_experience_->context;
        tuple.decision = pending_experience_->decision;
        tuple.decision_accepted = pending_experience_->accepted;
        tuple.violated = pending_experience_->violated;
        tuple.outcome = outcome;
        tuple.outcome_utility = utility;
        w_.kb->record_experience(tuple);
        pending_experience_.reset();
    }

    void feed_world_model(const MetricSnapshot& snapshot) {
        if (!opt_.wm_online_update || !prev_snapshot_) return;
        Transition t;
        t.before = *prev_snapshot_;
        t.action = prev_action_.value_or(
            AdaptationAction::no_op(ActionOrigin::Reasoner, prev_snapshot_->window_end));
        t.after = snapshot;
        w_.wm->update(t);
        prev_action_.reset();
    }

    void handle_stabilization(const MetricSnapshot& snapshot, CycleRecord& rec, RunLog& log) {
        if (inflight_.valid()) preempted_ = true;  // crisis preempts in-flight reasoning

        Episode trigger;
        trigger.timestamp = snapshot.window_end;
        trigger.kind = EpisodeKind::ReactiveTrigger;
        trigger.tags = {"reactive", "crisis"};
        if (!opt_.enable_fast) trigger.tags.insert("unhandled");
        if (rec.dispatch.triggering_metric) {
            trigger.tags.insert(rec.dispatch.triggering_metric->name);
            trigger.payload = Json{{"metric", rec.dispatch.triggering_metric->name},
                                   {"value", rec.dispatch.triggering_metric->value},
                                   {"threshold", rec.dispatch.triggering_metric->threshold}};
        }
        w_.kb->record(std::move(trigger));

        if (!opt_.enable_fast) {
            rec.note = "fast controller disabled";
            return;
        }

        rec.engine = "fast_controller";
        const auto action = react(snapshot, *w_.invariants, *w_.policy);
        issue(action, snapshot, rec, log);
    }

    void handle_strategic(const MetricSnapshot& snapshot, CycleRecord& rec, RunLog& log) {
        if (opt_.async_strategic) {
            launch_async(snapshot, rec);
        } else {
            auto tools = make_tools(snapshot);
            const auto ctx = build_context(*w_.goals, *w_.invariants, snapshot, registry());
            const auto t0 = std::chrono::steady_clock::now();
            auto decision = w_.engine->decide(ctx, *w_.prompt, tools);
            const double engine_ms = elapsed_ms(t0);
            rec.engine = to_string(decision.engine);
            rec.decide_wall_ms = engine_ms;
            settle_decision(decision, snapshot, rec, log, engine_ms);
        }
        ++strategic_count_;
        maybe_run_meta(snapshot, log);
    }

    void settle_decision(Decision& decision, const MetricSnapshot& snapshot, CycleRecord& rec,
                         RunLog& log, double engine_ms) {
        record_overheads(decision, engine_ms);
        record_decision_episode(decision, snapshot);
        rec.tool_trace = decision.tool_trace;
        const auto t0 = std::chrono::steady_clock::now();
        issue(decision.action, snapshot, rec, log);
        overheads_.add(stages::end_to_end, engine_ms + elapsed_ms(t0));
    }

    void record_overheads(const Decision& decision, double engine_ms) {
        overheads_.add(stages::engine_call, engine_ms);
        for (const auto& call : decision.tool_trace) {
            overheads_.add(stages::tool_call, call.latency_ms);
            overheads_.add(call.name == "kb_query" ? stages::kb_query : stages::wm_operation,
                           call.latency_ms);
        }
    }

    void record_decision_episode(const Decision& decision, const MetricSnapshot& snapshot) {
        Episode e;
        e.timestamp = snapshot.window_end;
        e.kind = EpisodeKind::ReasonerDecision;
        e.tags = {"reasoner", to_string(decision.engine), to_string(decision.action.kind)};
        if (decision.fail_safe) {
            e.tags.insert("error");
            if (!decision.failure.empty()) e.tags.insert(decision.failure);
        }
        e.payload = Json{{"action", decision.action},
                         {"rationale", decision.rationale},
                         {"engine", to_string(decision.engine)},
                         {"fail_safe", decision.fail_safe},
                         {"failure", decision.failure},
                         {"tool_calls", decision.tool_trace.size()}};
        w_.kb->record(std::move(e));
    }

    // Verify and, on acceptance, execute. Rejections are published as
    // failed acks and recorded; the cycle's experience starts here.
    void issue(const AdaptationAction& action, const MetricSnapshot& snapshot, CycleRecord& rec,
               RunLog& log) {
        const double now = snapshot.window_end;
        const auto verdict =
            verify(action, *w_.invariants, w_.actuators(), recent_actions_, now);
        rec.action = action;
        rec.verdict = verdict;

        PendingExperience exp;
        exp.context = snapshot;
        exp.decision = action;
        exp.accepted = verdict.accepted;
        for (const auto& [name, detail] : verdict.violated) exp.violated.push_back(name);

        if (verdict.accepted) {
            auto ack = w_.executor->execute(action, now);
            rec.ack = ack;
            if (!ack.ok)
                log.errors.push_back("execution failed at " + std::to_string(now) + ": " +
                                     ack.error);
            if (ack.ok && action.kind != ActionKind::NoOp)
                recent_actions_.push_back({action.kind, now});
        } else {
            Ack nack;
            nack.ok = false;
            nack.error = "verifier rejected";
            nack.action = action;
            nack.after = w_.actuators();
            nack.at = now;
            w_.bus->publish(topics::acks, Json(nack), now);
            rec.ack = nack;

            Episode e;
            e.timestamp = now;
            e.kind = EpisodeKind::ActionRejected;
            e.tags = {"rejected", "verifier", to_string(action.kind), to_string(action.origin)};
            e.payload = Json{{"action", action}, {"verdict", verdict}};
            w_.kb->record(std::move(e));
        }
        prune_recent(now);
        pending_experience_ = std::move(exp);
        prev_action_ = verdict.accepted && rec.ack && rec.ack->ok
                           ? std::optional<AdaptationAction>(action)
                           : std::nullopt;
    }

    void prune_recent(double now) {
        const double horizon = std::max(w_.invariants->action_cooldown * 2.0, 600.0);
        while (!recent_actions_.empty() && now - recent_actions_.front().issued_at > horizon)
            recent_actions_.erase(recent_actions_.begin());
    }

    ToolExecutor make_tools(const MetricSnapshot& latest) {
        if (opt_.deterministic_tools) {
            // Tool outputs provided deterministically from the latest
            // snapshot: context retrieval without agent-initiated queries.
            auto kb_fn = [latest](const KBQuery& q) {
                std::vector<Episode> out;
                Episode e;
                e.id = 0;
                e.timestamp = latest.window_end;
                e.kind = EpisodeKind::SnapshotRecorded;
                e.tags = {"snapshot", "deterministic"};
                e.payload = latest;
                for (std::size_t i = 0; i < q.limit && i < 8; ++i) out.push_back(e);
                return out;
            };
            auto wm_fn = [latest](const WMQuery&) {
                StateDistribution d;
                d.mean_response_time = latest.avg_response_time;
                d.std_response_time = 0.01;
                d.mean_utilization = latest.server_utilization;
                d.std_utilization = 0.02;
                return d;
            };
            return ToolExecutor(kb_fn, wm_fn);
        }
        KnowledgeBase* kb = w_.kb;
        WorldModel* wm = w_.wm;
        return ToolExecutor([kb](const KBQuery& q) { return kb->query(q); },
                            [wm](const WMQuery& q) { return wm->simulate(q); });
    }

    void launch_async(const MetricSnapshot& snapshot, CycleRecord& rec) {
        if (inflight_.valid()) {
            rec.note = "strategic decision already in flight";
            return;
        }
        preempted_ = false;
        const auto ctx = build_context(*w_.goals, *w_.invariants, snapshot, registry());
        const PromptConfig conf = *w_.prompt;  // the cycle runs against one version
        ReasonerEngine* engine = w_.engine;
        auto tools = std::make_shared<ToolExecutor>(make_tools(snapshot));
        inflight_started_ = std::chrono::steady_clock::now();
        inflight_ = std::async(std::launch::async, [engine, ctx, conf, tools]() {
            return engine->decide(ctx, conf, *tools);
        });
        rec.engine = "external(async)";
    }

    void poll_inflight(const MetricSnapshot& current, RunLog& log, CycleRecord& rec) {
        if (!inflight_.valid()) return;
        if (inflight_.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return;
        auto decision = inflight_.get();
        const double engine_ms = elapsed_ms(inflight_started_);
        if (preempted_) {
            ++log.discarded_inflight;
            rec.note = "discarded in-flight strategic decision (preempted by stabilization)";
            Episode e;
            e.timestamp = current.window_end;
            e.kind = EpisodeKind::ReasonerDecision;
            e.tags = {"reasoner", "discarded", to_string(decision.action.kind)};
            e.payload = Json{{"action", decision.action}, {"discarded", true}};
            w_.kb->record(std::move(e));
            preempted_ = false;
            return;
        }
        rec.engine = to_string(decision.engine);
        rec.decide_wall_ms = engine_ms;
        settle_decision(decision, current, rec, log, engine_ms);
    }

    // Non-blocking: a decision still cooking stays in flight (a later run()
    // may consume it); one that landed after the final cycle is discarded.
    void finish_inflight(RunLog& log) {
        if (!inflight_.valid()) return;
        if (inflight_.wait_for(std::chrono::seconds(0)) != std::future_status::ready) return;
        inflight_.get();
        ++log.discarded_inflight;
        log.errors.push_back("strategic decision completed after the final cycle; discarded");
    }

    void maybe_run_meta(const MetricSnapshot& snapshot, RunLog& log) {
        if (!opt_.enable_meta || w_.meta == nullptr) return;
        if (strategic_count_ % w_.meta->config().meta_period != 0) return;
        ++log.meta_invocations;
        const double now = snapshot.window_end;
        auto patterns = w_.meta->reflect(*w_.kb, now, *w_.invariants);
        if (opt_.freeze_meta) {
            Episode e;
            e.timestamp = now;
            e.kind = EpisodeKind::MetaUpdate;
            e.tags = {"meta", "frozen"};
            e.payload = Json{{"patterns", patterns}, {"outcome", "frozen"}};
            w_.kb->record(std::move(e));
            return;
        }
        const auto update = w_.meta->evolve(patterns, *w_.prompt, *w_.invariants);
        LiveConfigs live{*w_.prompt, *w_.thresholds, *w_.policy, *w_.invariants, *w_.wm};
        w_.meta->apply_update(update, live, *w_.kb, now);
    }

    static double elapsed_ms(std::chrono::steady_clock::time_point t0) {
        return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0)
            .count();
    }

    Wiring w_;
    KernelOptions opt_;
    OverheadRegistry overheads_;
    std::vector<RecentAction> recent_actions_;
    std::optional<PendingExperience> pending_experience_;
    std::optional<MetricSnapshot> prev_snapshot_;
    std::optional<AdaptationAction> prev_action_;
    int strategic_count_ = 0;

    std::future<Decision> inflight_;
    std::chrono::steady_clock::time_point inflight_started_;
    bool preempted_ = false;
};

}  // namespace polaris
