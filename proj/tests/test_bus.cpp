#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "polaris/bus.hpp"

using namespace polaris;

TEST_CASE("publish with no subscribers is delivered to none, no error") {
    MessageBus bus;
    CHECK_NOTHROW(bus.publish("telemetry.samples", Json{{"x", 1}}, 0.0));
}

TEST_CASE("per-topic FIFO: received order equals publication order") {
    MessageBus bus;
    auto sub = bus.subscribe("t");
    for (int i = 1; i <= 3; ++i) bus.publish("t", Json{{"n", i}}, i);
    auto got = sub.drain();
    REQUIRE(got.size() == 3);
    for (int i = 0; i < 3; ++i) CHECK(got[i].payload.at("n").get<int>() == i + 1);
}

TEST_CASE("no replay: messages published before subscribing are not seen") {
    MessageBus bus;
    bus.publish("t", Json{{"n", 0}}, 0.0);
    auto sub = bus.subscribe("t");
    bus.publish("t", Json{{"n", 1}}, 1.0);
    auto got = sub.drain();
    REQUIRE(got.size() == 1);
    CHECK(got[0].payload.at("n").get<int>() == 1);
}

TEST_CASE("fan-out: two subscribers both receive one publish") {
    MessageBus bus;
    auto a = bus.subscribe("t");
    auto b = bus.subscribe("t");
    bus.publish("t", Json{{"n", 7}}, 0.0);
    CHECK(a.pending() == 1);
    CHECK(b.pending() == 1);
}

TEST_CASE("wildcard subscription sees every topic") {
    MessageBus bus;
    auto all = bus.subscribe(topics::wildcard);
    bus.publish("a", Json{{"n", 1}}, 0.0);
    bus.publish("b", Json{{"n", 2}}, 0.0);
    auto got = all.drain();
    REQUIRE(got.size() == 2);
    CHECK(got[0].topic == "a");
    CHECK(got[1].topic == "b");
}

TEST_CASE("topic must be non-empty") {
    MessageBus bus;
    CHECK_THROWS_AS(bus.publish("", Json{}, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(bus.subscribe(""), std::invalid_argument);
}

TEST_CASE("closed bus raises on publish and subscribe") {
    MessageBus bus;
    auto sub = bus.subscribe("t");
    bus.close();
    CHECK_THROWS_AS(bus.publish("t", Json{}, 0.0), BusClosedError);
    CHECK_THROWS_AS(bus.subscribe("t"), BusClosedError);
    CHECK_FALSE(bus.is_open());
}

TEST_CASE("payloads round-trip losslessly") {
    MessageBus bus;
    auto sub = bus.subscribe("t");
    const Json payload{{"pi", 3.141592653589793}, {"nested", {{"k", "v"}}}, {"arr", {1, 2, 3}}};
    bus.publish("t", payload, 42.5);
    auto got = sub.poll();
    REQUIRE(got.has_value());
    CHECK(got->payload == payload);
    CHECK(Json::parse(got->payload.dump()) == payload);
    CHECK(got->published_at == 42.5);
}

TEST_CASE("concurrent publishers: subscribers agree on one global order") {
    MessageBus bus;
    auto a = bus.subscribe("t");
    auto b = bus.subscribe("t");
    constexpr int per_thread = 200;
    auto writer = [&bus](int origin) {
        for (int i = 0; i < per_thread; ++i)
            bus.publish("t", Json{{"origin", origin}, {"seq", i}}, 0.0);
    };
    std::thread t1(writer, 1), t2(writer, 2);
    t1.join();
    t2.join();

    auto ga = a.drain();
    auto gb = b.drain();
    REQUIRE(ga.size() == 2 * per_thread);
    REQUIRE(gb.size() == ga.size());
    int last1 = -1, last2 = -1;
    for (std::size_t i = 0; i < ga.size(); ++i) {
        CHECK(ga[i].payload == gb[i].payload);  // same interleaving for everyone
        const int seq = ga[i].payload.at("seq").get<int>();
        int& last = ga[i].payload.at("origin").get<int>() == 1 ? last1 : last2;
        CHECK(seq == last + 1);  // each publisher's order preserved
        last = seq;
    }
}

TEST_CASE("domain payloads round-trip through text serialization losslessly") {
    std::mt19937_64 g(17);
    std::uniform_real_distribution<double> awkward(0.0, 1.0);
    for (int i = 0; i < 300; ++i) {
        MetricSample s{awkward(g) * 1e3, awkward(g) * awkward(g), g() % 2 == 0, g() % 2 == 1};
        const Json before(s);
        CHECK(Json(Json::parse(before.dump()).get<MetricSample>()) == before);

        AdaptationAction a;
        a.kind = static_cast<ActionKind>(g() % 4);
        if (a.kind == ActionKind::SetDimmer) a.dimmer_target = awkward(g);
        a.origin = g() % 2 == 0 ? ActionOrigin::FastController : ActionOrigin::Reasoner;
        a.issued_at = awkward(g) * 1e5;
        a.rationale = "r" + std::to_string(g());
        const Json ja(a);
        CHECK(Json(Json::parse(ja.dump()).get<AdaptationAction>()) == ja);
    }
    // Values that famously do not survive naive float printing.
    MetricSnapshot snap;
    snap.window_start = 0.1 + 0.2;
    snap.window_end = 1.0 / 3.0 + 1e5;
    snap.avg_response_time = 1e-17;
    snap.server_utilization = 0.30000000000000004;
    const Json js(snap);
    CHECK(Json(Json::parse(js.dump()).get<MetricSnapshot>()) == js);
}
