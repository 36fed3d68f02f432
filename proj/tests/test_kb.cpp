#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <atomic>
#include <random>
#include <thread>

#include "kb_oracle.hpp"
#include "polaris/knowledge_base.hpp"

using namespace polaris;

namespace {

Episode make_episode(double t, EpisodeKind kind, std::set<std::string> tags, Json payload = {}) {
    Episode e;
    e.timestamp = t;
    e.kind = kind;
    e.tags = std::move(tags);
    e.payload = std::move(payload);
    return e;
}

MetricSnapshot window_snapshot(double start, double end, std::uint64_t late = 0) {
    MetricSnapshot s;
    s.window_start = start;
    s.window_end = end;
    s.request_count = 100;
    s.late_count = late;
    return s;
}

}  // namespace

TEST_CASE("record then fetch by id round-trips") {
    KnowledgeBase kb;
    auto id = kb.record(make_episode(1.0, EpisodeKind::SnapshotRecorded, {"snapshot"},
                                     Json{{"avg_response_time", 0.2}}));
    auto got = kb.fetch(id);
    REQUIRE(got.has_value());
    CHECK(got->id == id);
    CHECK(got->timestamp == 1.0);
    CHECK(got->payload.at("avg_response_time").get<double>() == 0.2);
}

TEST_CASE("record N episodes -> count N") {
    KnowledgeBase kb;
    for (int i = 0; i < 25; ++i)
        kb.record(make_episode(i, EpisodeKind::SnapshotRecorded, {"snapshot"}));
    CHECK(kb.size() == 25);
}

TEST_CASE("duplicate explicit id is rejected") {
    KnowledgeBase kb;
    Episode e = make_episode(1.0, EpisodeKind::ActionExecuted, {"executed"});
    e.id = 42;
    kb.record(e);
    CHECK_THROWS_AS(kb.record(e), std::invalid_argument);
}

TEST_CASE("episodes need at least one tag") {
    KnowledgeBase kb;
    CHECK_THROWS_AS(kb.record(make_episode(1.0, EpisodeKind::ActionExecuted, {})),
                    std::invalid_argument);
}

TEST_CASE("crisis pair: reactive then proactive cycle, retrievable in order") {
    KnowledgeBase kb;
    ExperienceTuple reactive;
    reactive.context = window_snapshot(100, 110, 12);  // the 900ms spike window
    reactive.decision = AdaptationAction::set_dimmer(0.85, ActionOrigin::FastController, 110);
    reactive.outcome = window_snapshot(110, 120, 0);
    auto id1 = kb.record_experience(reactive);

    ExperienceTuple proactive;
    proactive.context = window_snapshot(110, 120, 0);
    proactive.decision = AdaptationAction::add_server(ActionOrigin::Reasoner, 120);
    proactive.outcome = window_snapshot(120, 130, 0);
    auto id2 = kb.record_experience(proactive);

    KBQuery q;
    q.kinds = {EpisodeKind::Experience};
    auto got = kb.query(q);
    REQUIRE(got.size() == 2);
    CHECK(got[0].id == id2);  // newest first
    CHECK(got[1].id == id1);
}

TEST_CASE("query on an empty store returns nothing") {
    KnowledgeBase kb;
    CHECK(kb.query(KBQuery{}).empty());
}

TEST_CASE("kind + time-range query returns exactly the matching episodes, newest first") {
    KnowledgeBase kb;
    std::vector<std::uint64_t> trigger_ids;
    for (int i = 0; i < 10; ++i) {
        const auto kind = i % 3 == 0 ? EpisodeKind::ReactiveTrigger : EpisodeKind::SnapshotRecorded;
        auto id = kb.record(make_episode(10.0 * i, kind,
                                         {kind == EpisodeKind::ReactiveTrigger ? "reactive"
                                                                               : "snapshot"}));
        if (kind == EpisodeKind::ReactiveTrigger && 10.0 * i <= 90.0) trigger_ids.push_back(id);
    }
    KBQuery q;
    q.kinds = {EpisodeKind::ReactiveTrigger};
    q.time_from = 0.0;
    q.time_to = 90.0;
    auto got = kb.query(q);
    REQUIRE(got.size() == trigger_ids.size());
    for (std::size_t i = 0; i < got.size(); ++i)
        CHECK(got[i].id == trigger_ids[trigger_ids.size() - 1 - i]);
}

TEST_CASE("semantic filter matches tagged episodes only") {
    KnowledgeBase kb;
    kb.record(make_episode(1.0, EpisodeKind::ReactiveTrigger, {"crisis", "reactive"}));
    kb.record(make_episode(2.0, EpisodeKind::SnapshotRecorded, {"snapshot"}));
    kb.record(make_episode(3.0, EpisodeKind::ReactiveTrigger, {"crisis"}));
    KBQuery q;
    q.semantic_filter = {"crisis"};
    auto got = kb.query(q);
    REQUIRE(got.size() == 2);
    CHECK(got[0].timestamp == 3.0);
    CHECK(got[1].timestamp == 1.0);
}

TEST_CASE("newest-first ordering breaks timestamp ties by insertion order") {
    KnowledgeBase kb;
    auto a = kb.record(make_episode(5.0, EpisodeKind::SnapshotRecorded, {"snapshot"}));
    auto b = kb.record(make_episode(5.0, EpisodeKind::SnapshotRecorded, {"snapshot"}));
    auto c = kb.record(make_episode(5.0, EpisodeKind::SnapshotRecorded, {"snapshot"}));
    auto got = kb.query(KBQuery{});
    REQUIRE(got.size() == 3);
    CHECK(got[0].id == c);
    CHECK(got[1].id == b);
    CHECK(got[2].id == a);
}

TEST_CASE("query equals a naive full scan over randomized stores (oracle)") {
    std::mt19937_64 g(2024);
    for (int trial = 0; trial < 200; ++trial) {
        KnowledgeBase kb;
        auto episodes = kb_oracle::random_store(g, 60);
        for (const auto& e : episodes) kb.record(e);
        for (int qi = 0; qi < 5; ++qi) {
            const auto q = kb_oracle::random_query(g);
            const auto expected = kb_oracle::scan(kb.all(), q);
            const auto got = kb.query(q);
            REQUIRE(got.size() == expected.size());
            for (std::size_t i = 0; i < got.size(); ++i) CHECK(got[i].id == expected[i].id);
        }
    }
}

TEST_CASE("record_experience auto-tags from decision and outcome") {
    KnowledgeBase kb;
    ExperienceTuple t;
    t.context = window_snapshot(0, 10, 5);
    t.decision = AdaptationAction::set_dimmer(0.85, ActionOrigin::FastController, 10);
    t.outcome = window_snapshot(10, 20, 0);
    auto id = kb.record_experience(t);
    auto got = kb.fetch(id);
    REQUIRE(got.has_value());
    CHECK(got->kind == EpisodeKind::Experience);
    CHECK(got->tags.count("fastcontroller") == 1);
    CHECK(got->tags.count("setdimmer") == 1);
    CHECK(got->tags.count("recovered") == 1);  // late context cleared
    CHECK(got->tags.count("ontime") == 1);
}

TEST_CASE("record_experience: the add_server recovery gets addserver+recovered tags") {
    KnowledgeBase kb;
    ExperienceTuple t;
    t.context = window_snapshot(100, 110, 12);
    t.decision = AdaptationAction::add_server(ActionOrigin::Reasoner, 110);
    t.outcome = window_snapshot(110, 120, 0);
    auto got = kb.fetch(kb.record_experience(t));
    REQUIRE(got.has_value());
    CHECK(got->tags.count("addserver") == 1);
    CHECK(got->tags.count("recovered") == 1);
}

TEST_CASE("record_experience rejects an outcome window before the context window") {
    KnowledgeBase kb;
    ExperienceTuple t;
    t.context = window_snapshot(10, 20);
    t.outcome = window_snapshot(5, 15);
    CHECK_THROWS_AS(kb.record_experience(t), std::invalid_argument);
}

TEST_CASE("summarize: empty window is all zero") {
    KnowledgeBase kb;
    auto s = kb.summarize(100.0, 50.0);
    CHECK(s.snapshot_count == 0);
    CHECK(s.reactive_count == 0);
    CHECK(s.mean_response_time == 0.0);
    CHECK(s.kind_counts.empty());
}

TEST_CASE("summarize counts triggers and averages response times (brute force check)") {
    KnowledgeBase kb;
    double rt_sum = 0.0;
    for (int i = 0; i < 5; ++i) {
        const double rt = 0.1 * (i + 1);
        rt_sum += rt;
        kb.record(make_episode(10.0 * i, EpisodeKind::SnapshotRecorded, {"snapshot"},
                               Json{{"avg_response_time", rt}}));
    }
    for (int i = 0; i < 3; ++i)
        kb.record(make_episode(15.0 + 10.0 * i, EpisodeKind::ReactiveTrigger, {"reactive"}));
    auto s = kb.summarize(100.0, 50.0);
    CHECK(s.reactive_count == 3);
    CHECK(s.snapshot_count == 5);
    CHECK(s.mean_response_time == doctest::Approx(rt_sum / 5.0));
    CHECK(s.max_response_time == doctest::Approx(0.5));
}

TEST_CASE("queries never mutate the store (append-only audit)") {
    std::mt19937_64 g(7);
    KnowledgeBase kb;
    for (const auto& e : kb_oracle::random_store(g, 40)) kb.record(e);
    const auto before = kb_oracle::store_hash(kb.all());
    for (int i = 0; i < 20; ++i) kb.query(kb_oracle::random_query(g));
    kb.summarize(100.0, 50.0);
    CHECK(kb_oracle::store_hash(kb.all()) == before);
}

TEST_CASE("bounded retention: oldest episodes fall off past capacity") {
    KnowledgeBase kb(10);
    std::uint64_t first = 0;
    for (int i = 0; i < 15; ++i) {
        auto id = kb.record(make_episode(i, EpisodeKind::SnapshotRecorded, {"snapshot"}));
        if (i == 0) first = id;
    }
    CHECK(kb.size() == 10);
    CHECK_FALSE(kb.fetch(first).has_value());
}

TEST_CASE("query validates an ill-ordered time range") {
    KnowledgeBase kb;
    KBQuery q;
    q.time_from = 10.0;
    q.time_to = 5.0;
    CHECK_THROWS_AS(kb.query(q), std::invalid_argument);
    KBQuery zero;
    zero.limit = 0;
    CHECK_THROWS_AS(kb.query(zero), std::invalid_argument);
}

TEST_CASE("one writer with concurrent readers stays consistent") {
    KnowledgeBase kb;
    std::atomic<bool> done{false};
    std::atomic<int> read_errors{0};
    std::vector<std::thread> readers;
    for (int r = 0; r < 3; ++r)
        readers.emplace_back([&] {
            while (!done.load()) {
                KBQuery q;
                q.kinds = {EpisodeKind::SnapshotRecorded};
                q.limit = 50;
                auto got = kb.query(q);
                for (std::size_t i = 1; i < got.size(); ++i)
                    if (got[i - 1].timestamp < got[i].timestamp) ++read_errors;
                kb.summarize(100.0, 50.0);
            }
        });
    for (int i = 0; i < 2000; ++i) {
        Episode e;
        e.timestamp = static_cast<double>(i);
        e.kind = EpisodeKind::SnapshotRecorded;
        e.tags = {"snapshot"};
        e.payload = Json{{"avg_response_time", 0.1}};
        kb.record(std::move(e));
    }
    done = true;
    for (auto& t : readers) t.join();
    CHECK(read_errors == 0);
    CHECK(kb.size() == 2000);
}
