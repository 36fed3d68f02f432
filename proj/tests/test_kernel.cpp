#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <chrono>
#include <future>
#include <memory>
#include <thread>

#include "polaris/kernel.hpp"
#include "polaris/simulator.hpp"

using namespace polaris;

namespace {

MetricSnapshot snap_at(double start, double end, double rt, double util = 0.5) {
    MetricSnapshot s;
    s.window_start = start;
    s.window_end = end;
    s.avg_response_time = rt;
    s.server_utilization = util;
    s.request_count = 100;
    return s;
}

// Full wiring around the simulator for kernel-level tests.
struct Rig {
    SimConfig sim_cfg;
    std::unique_ptr<ManagedSystem> sim;
    MessageBus bus;
    std::unique_ptr<TelemetryPump> pump;
    std::unique_ptr<MetricCollector> collector;
    KnowledgeBase kb;
    std::unique_ptr<WorldModel> wm;
    std::unique_ptr<ExecutionAdapter> executor;
    PromptConfig prompt;
    ThresholdConfig thresholds;
    GoalSpec goals;
    InvariantSet invariants;
    ReactivePolicy policy;
    UtilityConfig utility;
    RulesEngine rules;
    std::unique_ptr<MetaLearner> meta;
    std::unique_ptr<Kernel> kernel;

    explicit Rig(ArrivalTrace trace, KernelOptions options = {}, MetaConfig meta_cfg = {},
                 ReasonerEngine* engine_override = nullptr) {
        sim_cfg.initial_servers = 2;
        sim_cfg.rng_seed = 3;
        sim = std::make_unique<ManagedSystem>(sim_cfg, std::move(trace));
        pump = std::make_unique<TelemetryPump>(bus);
        collector = std::make_unique<MetricCollector>(
            bus,
            [this] {
                return ActuatorView{sim->active_servers(), sim->booting_servers(), sim->dimmer()};
            },
            [this](double a, double b) { return sim->busy_seconds(a, b); });
        WMConfig wm_cfg;
        wm_cfg.mandatory_service_time = sim_cfg.mandatory_service_time;
        wm_cfg.optional_service_time = sim_cfg.optional_service_time;
        wm_cfg.boot_delay = sim_cfg.boot_delay;
        wm = std::make_unique<WorldModel>(wm_cfg);
        executor = std::make_unique<ExecutionAdapter>(
            bus, [this](const AdaptationAction& a) { return sim->apply(a); },
            [this] {
                return ActuatorView{sim->active_servers(), sim->booting_servers(), sim->dimmer()};
            },
            kb);
        prompt = PromptConfig::defaults(invariants);
        meta = std::make_unique<MetaLearner>(meta_cfg);

        Wiring w;
        w.advance = [this](double until) { return sim->step(until); };
        w.actuators = [this] {
            return ActuatorView{sim->active_servers(), sim->booting_servers(), sim->dimmer()};
        };
        w.has_pending = [this] { return sim->has_pending(); };
        w.bus = &bus;
        w.pump = pump.get();
        w.collector = collector.get();
        w.executor = executor.get();
        w.kb = &kb;
        w.wm = wm.get();
        w.engine = engine_override ? engine_override : &rules;
        w.meta = meta.get();
        w.prompt = &prompt;
        w.thresholds = &thresholds;
        w.goals = &goals;
        w.invariants = &invariants;
        w.policy = &policy;
        w.utility = &utility;
        kernel = std::make_unique<Kernel>(w, options);
    }
};

}  // namespace

TEST_CASE("triage: 0.9s against a 0.75s critical threshold dispatches stabilization") {
    ThresholdConfig t;
    auto d = triage(snap_at(100, 110, 0.9), t);
    CHECK(d.path == DispatchPath::Stabilization);
    REQUIRE(d.triggering_metric.has_value());
    CHECK(d.triggering_metric->name == "avg_response_time");
    CHECK(d.triggering_metric->value == doctest::Approx(0.9));
    CHECK(d.triggering_metric->threshold == doctest::Approx(0.75));
}

TEST_CASE("triage: exactly at the threshold is not critical (strict >)") {
    ThresholdConfig t;
    auto d = triage(snap_at(100, 110, 0.75), t);
    CHECK(d.path != DispatchPath::Stabilization);
}

TEST_CASE("triage: nominal metrics at a reasoner boundary dispatch strategic") {
    ThresholdConfig t;  // reasoner_interval 60
    CHECK(triage(snap_at(50, 60, 0.2), t).path == DispatchPath::Strategic);
    CHECK(triage(snap_at(30, 40, 0.2), t).path == DispatchPath::Idle);
    CHECK(triage(snap_at(110, 120, 0.2), t).path == DispatchPath::Strategic);
}

TEST_CASE("triage: utilization above its critical threshold also stabilizes") {
    ThresholdConfig t;
    auto d = triage(snap_at(0, 10, 0.2, 0.97), t);
    CHECK(d.path == DispatchPath::Stabilization);
    CHECK(d.triggering_metric->name == "server_utilization");
}

TEST_CASE("triage is pure: identical inputs, identical decisions") {
    ThresholdConfig t;
    auto s = snap_at(50, 60, 0.9);
    for (int i = 0; i < 5; ++i) {
        auto d = triage(s, t);
        CHECK(d.path == DispatchPath::Stabilization);
        CHECK(d.triggering_metric->name == "avg_response_time");
    }
}

TEST_CASE("build_context bundles defaults and echoes the snapshot") {
    KnowledgeBase kb;
    WorldModel wm{WMConfig{}};
    ToolRegistry reg{&kb, &wm};
    auto snap = snap_at(10, 20, 0.3);
    auto ctx = build_context(GoalSpec{}, InvariantSet{}, snap, reg);
    CHECK(ctx.invariants.max_servers == 3);
    CHECK(ctx.snapshot.window_end == 20.0);
    CHECK(ctx.snapshot.avg_response_time == doctest::Approx(0.3));
    CHECK(ctx.tools.size() == 2);

    ToolRegistry no_wm{&kb, nullptr};
    CHECK_THROWS_AS(build_context(GoalSpec{}, InvariantSet{}, snap, no_wm), ConfigError);
}

TEST_CASE("spike injection: a FastController action executes within one monitor tick") {
    // 45/s against two servers overloads right away; the breach window is
    // [100, 110) and the reactive action must land in that same cycle.
    Rig rig(burst_trace(5.0, 45.0, 100.0, 160.0, 300.0));
    auto log = rig.kernel->run(300.0);

    const CycleRecord* first_crisis = nullptr;
    for (const auto& rec : log.cycles)
        if (rec.dispatch.path == DispatchPath::Stabilization) {
            first_crisis = &rec;
            break;
        }
    REQUIRE(first_crisis != nullptr);
    CHECK(first_crisis->snapshot.window_end == doctest::Approx(110.0));
    CHECK(first_crisis->snapshot.avg_response_time > 0.75);
    REQUIRE(first_crisis->action.has_value());
    CHECK(first_crisis->action->origin == ActionOrigin::FastController);
    CHECK(first_crisis->action->kind == ActionKind::AddServer);  // 2 of 3: capacity first
    REQUIRE(first_crisis->ack.has_value());
    CHECK(first_crisis->ack->ok);
    CHECK(log.reactive_dispatches >= 1);
}

TEST_CASE("sustained crisis at capacity dims on the following tick") {
    Rig rig(burst_trace(5.0, 45.0, 100.0, 160.0, 300.0));
    auto log = rig.kernel->run(300.0);
    bool saw_dim = false;
    for (const auto& rec : log.cycles)
        if (rec.dispatch.path == DispatchPath::Stabilization && rec.action &&
            rec.action->kind == ActionKind::SetDimmer) {
            saw_dim = true;
            CHECK(*rec.action->dimmer_target < 1.0);
        }
    CHECK(saw_dim);
}

TEST_CASE("a quiet run produces zero FastController-origin actions") {
    Rig rig(constant_rate_trace(5.0, 300.0));
    auto log = rig.kernel->run(300.0);
    CHECK(log.reactive_dispatches == 0);
    for (const auto& rec : log.cycles)
        if (rec.action) CHECK(rec.action->origin != ActionOrigin::FastController);
}

TEST_CASE("stopping after N windows leaves exactly N cycle records") {
    Rig rig(ArrivalTrace{});
    auto log = rig.kernel->run(50.0, false);
    CHECK(log.cycles.size() == 5);  // monitor_interval 10
    int dispatched = 0;
    for (const auto& rec : log.cycles) {
        // exactly one path per cycle
        const bool stab = rec.dispatch.path == DispatchPath::Stabilization;
        const bool strat = rec.dispatch.path == DispatchPath::Strategic;
        CHECK_FALSE((stab && strat));
        dispatched += (stab || strat) ? 1 : 0;
    }
    CHECK(log.reactive_dispatches + log.strategic_dispatches == dispatched);
}

TEST_CASE("every cycle ends with experience recording once a decision exists") {
    Rig rig(burst_trace(5.0, 45.0, 100.0, 160.0, 300.0));
    rig.kernel->run(300.0);
    KBQuery q;
    q.kinds = {EpisodeKind::Experience};
    q.limit = 1000;
    auto experiences = rig.kb.query(q);
    CHECK(experiences.size() >= 2);
    for (const auto& e : experiences) {
        ExperienceTuple t = e.payload.get<ExperienceTuple>();
        CHECK(t.outcome.window_start >= t.context.window_end);
    }
}

TEST_CASE("--no-fast: triggers are recorded unhandled and no reactive action is issued") {
    KernelOptions options;
    options.enable_fast = false;
    Rig rig(burst_trace(5.0, 45.0, 100.0, 160.0, 300.0), options);
    auto log = rig.kernel->run(300.0);
    CHECK(log.reactive_dispatches >= 1);
    for (const auto& rec : log.cycles)
        if (rec.dispatch.path == DispatchPath::Stabilization) CHECK_FALSE(rec.action.has_value());
    KBQuery q;
    q.semantic_filter = {"unhandled"};
    q.kinds = {EpisodeKind::ReactiveTrigger};
    CHECK_FALSE(rig.kb.query(q).empty());
}

TEST_CASE("meta runs on its period over strategic cycles") {
    MetaConfig meta_cfg;
    meta_cfg.meta_period = 2;
    ThresholdConfig thresholds;
    Rig rig(constant_rate_trace(5.0, 600.0), {}, meta_cfg);
    auto log = rig.kernel->run(600.0);
    CHECK(log.strategic_dispatches == 10);  // every 60s over 600s
    CHECK(log.meta_invocations == 5);
    KBQuery q;
    q.kinds = {EpisodeKind::MetaUpdate};
    q.limit = 100;
    CHECK(rig.kb.query(q).size() == 5);
}

TEST_CASE("--freeze-meta reflects but never writes") {
    MetaConfig meta_cfg;
    meta_cfg.meta_period = 1;
    KernelOptions options;
    options.freeze_meta = true;
    Rig rig(constant_rate_trace(5.0, 300.0), options, meta_cfg);
    const Json before = Json(rig.prompt);
    rig.kernel->run(300.0);
    CHECK(Json(rig.prompt) == before);
    KBQuery q;
    q.semantic_filter = {"frozen"};
    q.kinds = {EpisodeKind::MetaUpdate};
    CHECK_FALSE(rig.kb.query(q).empty());
}

namespace {

// Engine whose decide() blocks until the test releases it.
class GatedEngine : public ReasonerEngine {
public:
    EngineKind kind() const override { return EngineKind::External; }
    Decision decide(const ReasoningContext& ctx, const PromptConfig&, ToolExecutor&) override {
        gate_.get_future().wait();
        Decision d;
        d.engine = EngineKind::External;
        d.action = AdaptationAction::set_dimmer(0.5, ActionOrigin::Reasoner,
                                                ctx.snapshot.window_end, "late advice");
        return d;
    }
    void release() { gate_.set_value(); }

private:
    std::promise<void> gate_;
};

}  // namespace

TEST_CASE("a stabilization dispatch preempts an in-flight strategic decision") {
    GatedEngine gated;
    KernelOptions options;
    options.async_strategic = true;
    // Burst lands right after the strategic tick at t=60.
    Rig rig(burst_trace(5.0, 45.0, 60.0, 120.0, 200.0), options, MetaConfig{}, &gated);

    auto log1 = rig.kernel->run(60.0, false);  // strategic launch at the 60s boundary
    CHECK(log1.strategic_dispatches == 1);
    auto log2 = rig.kernel->run(70.0, false);  // crisis window preempts
    CHECK(log2.reactive_dispatches == 1);
    gated.release();
    std::this_thread::sleep_for(std::chrono::milliseconds(50));  // let the worker finish
    auto log3 = rig.kernel->run(90.0, false);  // the late result is discarded, with a log entry
    CHECK(log3.discarded_inflight == 1);
    bool noted = false;
    for (const auto& rec : log3.cycles) noted = noted || !rec.note.empty();
    CHECK(noted);
    KBQuery q;
    q.semantic_filter = {"discarded"};
    q.kinds = {EpisodeKind::ReasonerDecision};
    CHECK(rig.kb.query(q).size() == 1);
}

TEST_CASE("an in-flight decision lands and executes when no crisis intervened") {
    GatedEngine gated;
    KernelOptions options;
    options.async_strategic = true;
    Rig rig(constant_rate_trace(5.0, 200.0), options, MetaConfig{}, &gated);
    rig.kernel->run(60.0, false);
    gated.release();
    std::this_thread::sleep_for(std::chrono::milliseconds(50));  // let the worker finish
    auto log = rig.kernel->run(100.0, false);
    CHECK(log.discarded_inflight == 0);
    bool executed = false;
    for (const auto& rec : log.cycles)
        if (rec.action && rec.action->kind == ActionKind::SetDimmer && rec.ack && rec.ack->ok)
            executed = true;
    CHECK(executed);
}

namespace {

class BombEngine : public ReasonerEngine {
public:
    EngineKind kind() const override { return EngineKind::Rules; }
    Decision decide(const ReasoningContext&, const PromptConfig&, ToolExecutor&) override {
        throw std::runtime_error("engine exploded");
    }
};

}  // namespace

TEST_CASE("fail-operational: a crashing component is logged and the loop continues") {
    BombEngine bomb;
    Rig rig(constant_rate_trace(5.0, 300.0), {}, MetaConfig{}, &bomb);
    auto log = rig.kernel->run(300.0);
    CHECK(log.errors.size() >= 1);
    CHECK(log.cycles.size() >= 25);  // the monitoring cadence survived
    bool mentions = false;
    for (const auto& e : log.errors) mentions = mentions || e.find("engine exploded") != std::string::npos;
    CHECK(mentions);
}

TEST_CASE("reactive latency is bounded: every crisis cycle executes in-cycle (100 spikes)") {
    // One short overload burst per 30s period, 100 periods.
    Rig rig(recurring_burst_trace(4.0, 20.0, 70.0, 30.0, 10.0, 10.0, 3000.0));
    auto log = rig.kernel->run(3000.0);
    int crises = 0;
    for (const auto& rec : log.cycles) {
        if (rec.dispatch.path != DispatchPath::Stabilization) continue;
        ++crises;
        REQUIRE(rec.action.has_value());  // decided in the same cycle
        CHECK(rec.action->origin == ActionOrigin::FastController);
        CHECK(rec.action->issued_at == rec.snapshot.window_end);
        REQUIRE(rec.ack.has_value());  // executed in the same cycle
    }
    CHECK(crises >= 100);
}
