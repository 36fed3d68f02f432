#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "polaris/adapters.hpp"
#include "polaris/simulator.hpp"

using namespace polaris;

namespace {

MetricSample sample(double t, double rt, bool optional = false, double sla = 0.75) {
    return {t, rt, optional, rt > sla};
}

}  // namespace

TEST_CASE("collector: a published sample lands in the collector's window") {
    MessageBus bus;
    MetricCollector collector(bus, [] { return ActuatorView{1, 0, 1.0}; },
                              [](double, double) { return 0.0; });
    TelemetryPump pump(bus);
    std::vector<MetricSample> samples = {sample(3.0, 0.2)};
    pump.publish(samples);
    auto snap = collector.collect(10.0);
    CHECK(snap.request_count == 1);
}

TEST_CASE("collector: five samples in the window count five") {
    MessageBus bus;
    MetricCollector collector(bus, [] { return ActuatorView{2, 0, 0.8}; },
                              [](double, double) { return 4.0; });
    for (int i = 0; i < 5; ++i) bus.publish(topics::telemetry, Json(sample(i + 1.0, 0.1)), i + 1.0);
    auto snap = collector.collect(10.0);
    CHECK(snap.request_count == 5);
    CHECK(snap.dimmer == doctest::Approx(0.8));
    CHECK(snap.active_servers == 2);
    CHECK(snap.server_utilization == doctest::Approx(4.0 / 20.0));
}

TEST_CASE("collector: samples straddling the boundary wait for their window") {
    MessageBus bus;
    MetricCollector collector(bus, [] { return ActuatorView{1, 0, 1.0}; },
                              [](double, double) { return 0.0; });
    bus.publish(topics::telemetry, Json(sample(9.5, 0.1)), 9.5);
    bus.publish(topics::telemetry, Json(sample(10.0, 0.1)), 10.0);  // belongs to [10, 20)
    bus.publish(topics::telemetry, Json(sample(12.0, 0.1)), 12.0);
    auto first = collector.collect(10.0);
    CHECK(first.request_count == 1);
    CHECK(collector.pending_samples() == 2);
    auto second = collector.collect(10.0);
    CHECK(second.request_count == 2);
}

TEST_CASE("collector: windows partition the timeline (conservation, randomized)") {
    std::mt19937_64 g(5);
    MessageBus bus;
    MetricCollector collector(bus, [] { return ActuatorView{1, 0, 1.0}; },
                              [](double, double) { return 0.0; });
    std::uniform_real_distribution<double> when(0.0, 100.0);
    std::vector<double> stamps;
    for (int i = 0; i < 500; ++i) stamps.push_back(when(g));
    std::sort(stamps.begin(), stamps.end());
    for (double t : stamps) bus.publish(topics::telemetry, Json(sample(t, 0.1)), t);
    std::uint64_t total = 0;
    for (int w = 0; w < 11; ++w) total += collector.collect(10.0).request_count;
    CHECK(total == stamps.size());
    CHECK(collector.pending_samples() == 0);
}

TEST_CASE("collector: a response-time spike shows up as a late count") {
    MessageBus bus;
    MetricCollector collector(bus, [] { return ActuatorView{1, 0, 1.0}; },
                              [](double, double) { return 3.0; });
    bus.publish(topics::telemetry, Json(sample(5.0, 0.9)), 5.0);  // 0.9s > 0.75s bound
    auto snap = collector.collect(10.0);
    CHECK(snap.late_count == 1);
    CHECK(snap.avg_response_time == doctest::Approx(0.9));
}

TEST_CASE("executor: a verified set_dimmer acks ok and records an episode") {
    MessageBus bus;
    auto acks = bus.subscribe(topics::acks);
    auto directives = bus.subscribe(topics::directives);
    KnowledgeBase kb;
    SimConfig cfg;
    ManagedSystem sim(cfg, {});
    ExecutionAdapter executor(
        bus, [&sim](const AdaptationAction& a) { return sim.apply(a); },
        [&sim] { return ActuatorView{sim.active_servers(), sim.booting_servers(), sim.dimmer()}; },
        kb);
    auto ack = executor.execute(AdaptationAction::set_dimmer(0.7, ActionOrigin::FastController, 5.0),
                                5.0);
    CHECK(ack.ok);
    CHECK(ack.after.dimmer == doctest::Approx(0.7));
    CHECK(acks.pending() == 1);
    CHECK(directives.pending() == 1);
    CHECK(kb.size() == 1);
    auto episodes = kb.query(KBQuery{{}, {EpisodeKind::ActionExecuted}, {}, {}, {}, 10});
    REQUIRE(episodes.size() == 1);
    CHECK(episodes[0].payload.at("ok").get<bool>());
}

TEST_CASE("executor: add_server below the cap acks with a pending boot") {
    MessageBus bus;
    KnowledgeBase kb;
    SimConfig cfg;
    cfg.initial_servers = 2;
    ManagedSystem sim(cfg, {});
    ExecutionAdapter executor(
        bus, [&sim](const AdaptationAction& a) { return sim.apply(a); },
        [&sim] { return ActuatorView{sim.active_servers(), sim.booting_servers(), sim.dimmer()}; },
        kb);
    auto ack = executor.execute(AdaptationAction::add_server(ActionOrigin::Reasoner, 5.0), 5.0);
    CHECK(ack.ok);
    CHECK(ack.after.booting_servers == 1);
}

TEST_CASE("executor: a capacity race acks failed and the episode is still recorded") {
    MessageBus bus;
    KnowledgeBase kb;
    SimConfig cfg;
    cfg.initial_servers = 3;  // the state changed after verification
    ManagedSystem sim(cfg, {});
    ExecutionAdapter executor(
        bus, [&sim](const AdaptationAction& a) { return sim.apply(a); },
        [&sim] { return ActuatorView{sim.active_servers(), sim.booting_servers(), sim.dimmer()}; },
        kb);
    auto ack = executor.execute(AdaptationAction::add_server(ActionOrigin::Reasoner, 5.0), 5.0);
    CHECK_FALSE(ack.ok);
    CHECK(ack.error.find("capacity") != std::string::npos);
    auto episodes = kb.query(KBQuery{{}, {EpisodeKind::ActionRejected}, {}, {}, {}, 10});
    REQUIRE(episodes.size() == 1);
    CHECK(episodes[0].tags.count("simulator") == 1);
}

TEST_CASE("executor: exactly one ack and one episode per directive (randomized sequences)") {
    std::mt19937_64 g(11);
    MessageBus bus;
    auto acks = bus.subscribe(topics::acks);
    KnowledgeBase kb;
    SimConfig cfg;
    ManagedSystem sim(cfg, {});
    ExecutionAdapter executor(
        bus, [&sim](const AdaptationAction& a) { return sim.apply(a); },
        [&sim] { return ActuatorView{sim.active_servers(), sim.booting_servers(), sim.dimmer()}; },
        kb);
    std::uniform_int_distribution<int> kind(0, 3);
    std::uniform_real_distribution<double> dim(0.0, 1.0);
    const int n = 200;
    for (int i = 0; i < n; ++i) {
        AdaptationAction a;
        switch (kind(g)) {
            case 0: a = AdaptationAction::add_server(ActionOrigin::Reasoner, i); break;
            case 1: a = AdaptationAction::remove_server(ActionOrigin::Reasoner, i); break;
            case 2: a = AdaptationAction::set_dimmer(dim(g), ActionOrigin::Reasoner, i); break;
            default: a = AdaptationAction::no_op(ActionOrigin::Reasoner, i); break;
        }
        executor.execute(a, i);
    }
    CHECK(acks.pending() == n);
    CHECK(kb.size() == n);
}
