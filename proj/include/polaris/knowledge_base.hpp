#pragma once

#include <algorithm>
#include <cstdint>
#include <deque>
#include <map>
#include <mutex>
#include <optional>
#include <ostream>
#include <set>
#include <shared_mutex>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "polaris/codec.hpp"
#include "polaris/domain.hpp"

// Episodic memory: telemetry aggregates, actions, and experience tuples,
// answering semantic-plus-structured queries. Append-only with bounded
// retention; one writer, concurrent readers.

namespace polaris {

enum class EpisodeKind {
    SnapshotRecorded,
    ActionExecuted,
    ActionRejected,
    ReactiveTrigger,
    ReasonerDecision,
    MetaUpdate,
    Experience,
};

inline const char* to_string(EpisodeKind k) {
    switch (k) {
        case EpisodeKind::SnapshotRecorded: return "snapshot_recorded";
        case EpisodeKind::ActionExecuted: return "action_executed";
        case EpisodeKind::ActionRejected: return "action_rejected";
        case EpisodeKind::ReactiveTrigger: return "reactive_trigger";
        case EpisodeKind::ReasonerDecision: return "reasoner_decision";
        case EpisodeKind::MetaUpdate: return "meta_update";
        case EpisodeKind::Experience: return "experience";
    }
    return "unknown";
}

inline std::optional<EpisodeKind> episode_kind_from_string(const std::string& s) {
    for (auto k : {EpisodeKind::SnapshotRecorded, EpisodeKind::ActionExecuted,
                   EpisodeKind::ActionRejected, EpisodeKind::ReactiveTrigger,
                   EpisodeKind::ReasonerDecision, EpisodeKind::MetaUpdate,
                   EpisodeKind::Experience})
        if (s == to_string(k)) return k;
    return std::nullopt;
}

struct Episode {
    std::uint64_t id = 0;  // 0: unassigned, the store picks the next id
    double timestamp = 0.0;
    EpisodeKind kind = EpisodeKind::SnapshotRecorded;
    std::set<std::string> tags;  // lowercase keywords, non-empty
    Json payload;
};

inline void to_json(Json& j, const Episode& e) {
    j = Json{{"id", e.id},
             {"timestamp", e.timestamp},
             {"kind", to_string(e.kind)},
             {"tags", e.tags},
             {"payload", e.payload}};
}

inline void from_json(const Json& j, Episode& e) {
    j.at("id").get_to(e.id);
    j.at("timestamp").get_to(e.timestamp);
    const auto kind = episode_kind_from_string(j.at("kind").get<std::string>());
    if (!kind) throw std::invalid_argument("unknown episode kind");
    e.kind = *kind;
    e.tags = j.at("tags").get<std::set<std::string>>();
    e.payload = j.at("payload");
}

struct Verdict;  // verifier.hpp

// One adaptation cycle's worth of memory: the state it saw, what it decided,
// and what came of it.
struct ExperienceTuple {
    MetricSnapshot context;
    AdaptationAction decision;
    bool decision_accepted = true;
    std::vector<std::string> violated;  // verifier findings, when rejected
    MetricSnapshot outcome;
    double outcome_utility = 0.0;
};

inline void to_json(Json& j, const ExperienceTuple& e) {
    j = Json{{"context", e.context},
             {"decision", e.decision},
             {"decision_accepted", e.decision_accepted},
             {"violated", e.violated},
             {"outcome", e.outcome},
             {"outcome_utility", e.outcome_utility}};
}

inline void from_json(const Json& j, ExperienceTuple& e) {
    j.at("context").get_to(e.context);
    j.at("decision").get_to(e.decision);
    j.at("decision_accepted").get_to(e.decision_accepted);
    j.at("violated").get_to(e.violated);
    j.at("outcome").get_to(e.outcome);
    j.at("outcome_utility").get_to(e.outcome_utility);
}

// Semantic filter (keyword overlap on tags) plus structured constraints.
struct KBQuery {
    struct NumericPredicate {
        enum class Op { Lt, Le, Gt, Ge, Eq };
        std::string field;  // dotted path into the payload
        Op op = Op::Eq;
        double value = 0.0;
    };

    std::vector<std::string> semantic_filter;  // at least one must overlap tags
    std::vector<EpisodeKind> kinds;            // empty: any kind
    std::optional<double> time_from;           // inclusive
    std::optional<double> time_to;             // inclusive
    std::vector<NumericPredicate> numeric;
    std::size_t limit = 50;
};

// Per-kind counts and telemetry roll-up the meta-learner reflects over.
struct KBSummary {
    double window = 0.0;
    double now = 0.0;
    std::map<std::string, std::uint64_t> kind_counts;
    std::map<std::string, std::uint64_t> action_counts;  // executed, by action kind
    double mean_response_time = 0.0;
    double max_response_time = 0.0;
    std::uint64_t snapshot_count = 0;
    std::uint64_t reactive_count = 0;
};

namespace detail {

inline const Json* resolve_path(const Json& payload, const std::string& dotted) {
    const Json* node = &payload;
    std::size_t begin = 0;
    while (begin <= dotted.size()) {
        const auto dot = dotted.find('.', begin);
        const std::string key =
            dotted.substr(begin, dot == std::string::npos ? std::string::npos : dot - begin);
        if (!node->is_object() || !node->contains(key)) return nullptr;
        node = &node->at(key);
        if (dot == std::string::npos) break;
        begin = dot + 1;
    }
    return node;
}

inline bool numeric_match(const Json& payload, const KBQuery::NumericPredicate& pred) {
    const Json* node = resolve_path(payload, pred.field);
    if (node == nullptr || !node->is_number()) return false;
    const double v = node->get<double>();
    using Op = KBQuery::NumericPredicate::Op;
    switch (pred.op) {
        case Op::Lt: return v < pred.value;
        case Op::Le: return v <= pred.value;
        case Op::Gt: return v > pred.value;
        case Op::Ge: return v >= pred.value;
        case Op::Eq: return v == pred.value;
    }
    return false;
}

}  // namespace detail

// True iff the episode satisfies ALL structured constraints AND, when the
// semantic filter is non-empty, shares at least one keyword with its tags.
// Exposed so tests can pit the store against a naive full scan.
inline bool episode_matches(const Episode& e, const KBQuery& q) {
    if (!q.kinds.empty() &&
        std::find(q.kinds.begin(), q.kinds.end(), e.kind) == q.kinds.end())
        return false;
    if (q.time_from && e.timestamp < *q.time_from) return false;
    if (q.time_to && e.timestamp > *q.time_to) return false;
    for (const auto& pred : q.numeric)
        if (!detail::numeric_match(e.payload, pred)) return false;
    if (!q.semantic_filter.empty()) {
        bool overlap = false;
        for (const auto& kw : q.semantic_filter)
            if (e.tags.count(kw) > 0) {
                overlap = true;
                break;
            }
        if (!overlap) return false;
    }
    return true;
}

class KnowledgeBase {
public:
    explicit KnowledgeBase(std::size_t capacity = 100000) : capacity_(capacity) {}

    // Stores the episode and returns its id. An explicit id must be fresh;
    // id 0 asks the store to assign the next one. Insertion order is kept.
    std::uint64_t record(Episode episode) {
        if (episode.tags.empty())
            throw std::invalid_argument("kb: episodes must carry at least one tag");
        std::unique_lock lock(mutex_);
        if (episode.id == 0) {
            episode.id = next_id_++;
        } else {
            if (ids_.count(episode.id) > 0)
                throw std::invalid_argument("kb: duplicate episode id " +
                                            std::to_string(episode.id));
            next_id_ = std::max(next_id_, episode.id + 1);
        }
        ids_.insert(episode.id);
        store_.push_back(std::move(episode));
        if (store_.size() > capacity_) {
            ids_.erase(store_.front().id);
            store_.pop_front();
        }
        return store_.back().id;
    }

    std::optional<Episode> fetch(std::uint64_t id) const {
        std::shared_lock lock(mutex_);
        for (const auto& e : store_)
            if (e.id == id) return e;
        return std::nullopt;
    }

    // Newest-first (timestamp descending, ties broken by insertion order),
    // truncated to the query limit only after every match was considered.
    std::vector<Episode> query(const KBQuery& q) const {
        if (q.limit < 1) throw std::invalid_argument("kb: query limit must be >= 1");
        if (q.time_from && q.time_to && *q.time_from > *q.time_to)
            throw std::invalid_argument("kb: query time range is not well-ordered");
        std::shared_lock lock(mutex_);
        std::vector<Episode> matched;
        for (auto it = store_.rbegin(); it != store_.rend(); ++it)
            if (episode_matches(*it, q)) matched.push_back(*it);
        std::stable_sort(matched.begin(), matched.end(),
                         [](const Episode& a, const Episode& b) {
                             return a.timestamp > b.timestamp;
                         });
        if (matched.size() > q.limit) matched.resize(q.limit);
        return matched;
    }

    // Stores an experience tuple as a dedicated-kind episode, auto-tagged
    // from the decision and outcome (tagging rules: decision kind, origin,
    // verdict, late/ontime, and "recovered" when a late context cleared).
    std::uint64_t record_experience(const ExperienceTuple& tuple) {
        if (tuple.outcome.window_start < tuple.context.window_end)
            throw std::invalid_argument("kb: outcome window must follow the context window");
        Episode e;
        e.timestamp = tuple.outcome.window_end;
        e.kind = EpisodeKind::Experience;
        e.tags = experience_tags(tuple);
        e.payload = tuple;
        return record(std::move(e));
    }

    static std::set<std::string> experience_tags(const ExperienceTuple& tuple) {
        std::set<std::string> tags{"experience"};
        std::string kind = to_string(tuple.decision.kind);
        kind.erase(std::remove(kind.begin(), kind.end(), '_'), kind.end());
        tags.insert(kind);
        std::string origin = to_string(tuple.decision.origin);
        origin.erase(std::remove(origin.begin(), origin.end(), '_'), origin.end());
        tags.insert(origin);
        tags.insert(tuple.decision_accepted ? "accepted" : "rejected");
        tags.insert(tuple.outcome.late_count > 0 ? "late" : "ontime");
        if (tuple.context.late_count > 0 && tuple.outcome.late_count == 0)
            tags.insert("recovered");
        return tags;
    }

    KBSummary summarize(double window, double now) const {
        std::shared_lock lock(mutex_);
        KBSummary s;
        s.window = window;
        s.now = now;
        double rt_sum = 0.0;
        for (const auto& e : store_) {
            if (e.timestamp < now - window || e.timestamp > now) continue;
            ++s.kind_counts[to_string(e.kind)];
            switch (e.kind) {
                case EpisodeKind::SnapshotRecorded: {
                    ++s.snapshot_count;
                    const double rt = e.payload.value("avg_response_time", 0.0);
                    rt_sum += rt;
                    s.max_response_time = std::max(s.max_response_time, rt);
                    break;
                }
                case EpisodeKind::ActionExecuted:
                    if (e.payload.contains("action"))
                        ++s.action_counts[e.payload.at("action").value("kind", "unknown")];
                    break;
                case EpisodeKind::ReactiveTrigger:
                    ++s.reactive_count;
                    break;
                default:
                    break;
            }
        }
        if (s.snapshot_count > 0)
            s.mean_response_time = rt_sum / static_cast<double>(s.snapshot_count);
        return s;
    }

    std::size_t size() const {
        std::shared_lock lock(mutex_);
        return store_.size();
    }

    // Chronological dump, one JSON record per line.
    void dump_ndjson(std::ostream& out) const {
        std::shared_lock lock(mutex_);
        for (const auto& e : store_) out << Json(e).dump() << "\n";
    }

    std::vector<Episode> all() const {
        std::shared_lock lock(mutex_);
        return {store_.begin(), store_.end()};
    }

private:
    mutable std::shared_mutex mutex_;
    std::size_t capacity_;
    std::uint64_t next_id_ = 1;
    std::deque<Episode> store_;
    std::unordered_set<std::uint64_t> ids_;
};

}  // namespace polaris
