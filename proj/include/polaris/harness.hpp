#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "polaris/config.hpp"
#include "polaris/kernel.hpp"

// Experiment runner: wires every component around the simulator, executes a
// trace-driven run (full configuration or ablations), and reports
// Table-schema metrics plus per-stage overheads.

namespace polaris {

struct RunFlags {
    bool no_meta = false;
    bool no_tools = false;
    bool no_fast = false;
    bool freeze_meta = false;
    bool record = false;   // dump every bus message to bus.ndjson
    bool kb_dump = false;  // dump the episode store to episodes.ndjson
    std::optional<std::uint64_t> seed;  // overrides sim.rng_seed
    std::string engine;                 // overrides config engine when non-empty

    std::string tag() const {
        std::string t;
        if (no_meta) t += "-M";
        if (no_tools) t += "-T";
        if (no_fast) t += "-F";
        if (freeze_meta) t += "-frozen";
        return t.empty() ? "full" : t;
    }
};

struct OverheadStats {
    std::size_t count = 0;
    double mean_ms = 0.0;
    double p50_ms = 0.0;
    double p95_ms = 0.0;
    double max_ms = 0.0;

    static OverheadStats of(std::vector<double> samples) {
        OverheadStats s;
        s.count = samples.size();
        if (samples.empty()) return s;
        double sum = 0.0;
        for (double v : samples) sum += v;
        s.mean_ms = sum / static_cast<double>(samples.size());
        std::sort(samples.begin(), samples.end());
        const auto rank = [&](double q) {
            auto r = static_cast<std::size_t>(std::ceil(q * static_cast<double>(samples.size())));
            return samples[std::max<std::size_t>(r, 1) - 1];
        };
        s.p50_ms = rank(0.50);
        s.p95_ms = rank(0.95);
        s.max_ms = samples.back();
        return s;
    }
};

struct RunReport {
    double optional_pct = 0.0;
    double late_pct = 0.0;
    double avg_servers = 0.0;
    double total_utility = 0.0;
    std::uint64_t request_count = 0;
    std::uint64_t late_count = 0;
    std::uint64_t optional_count = 0;
    std::uint64_t arrivals_consumed = 0;
    int cycles = 0;
    int reactive_triggers = 0;
    int actions_executed = 0;
    int actions_rejected = 0;
    int fast_actions = 0;
    int reasoner_actions = 0;
    int meta_invocations = 0;
    int discarded_inflight = 0;
    std::map<std::string, OverheadStats> overheads;
    std::string engine;
    std::string config_fingerprint;
    bool empty = false;
};

namespace detail {

inline std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.10g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

}  // namespace detail

class Harness {
public:
    Harness(FrameworkConfig config, ArrivalTrace trace, RunFlags flags)
        : cfg_(std::move(config)), flags_(std::move(flags)) {
        cfg_.harmonize();
        if (flags_.seed) cfg_.sim.rng_seed = *flags_.seed;
        if (!flags_.engine.empty()) cfg_.engine = flags_.engine;
        cfg_.validate();

        trace.truncate(cfg_.run_duration);  // conservation: only in-run arrivals count
        sim_ = std::make_unique<ManagedSystem>(cfg_.sim, std::move(trace));
        kb_ = std::make_unique<KnowledgeBase>(cfg_.kb_capacity);
        wm_ = std::make_unique<WorldModel>(cfg_.wm);
        pump_ = std::make_unique<TelemetryPump>(bus_);
        if (flags_.record) recorder_ = bus_.subscribe(topics::wildcard);
        collector_ = std::make_unique<MetricCollector>(
            bus_, [this] { return actuators(); },
            [this](double a, double b) { return sim_->busy_seconds(a, b); });
        executor_ = std::make_unique<ExecutionAdapter>(
            bus_, [this](const AdaptationAction& a) { return sim_->apply(a); },
            [this] { return actuators(); }, *kb_);
        prompt_ = PromptConfig::defaults(cfg_.invariants);
        for (const auto& [key, value] : cfg_.prompt_directives) prompt_.directives[key] = value;
        rules_ = std::make_unique<RulesEngine>();
        if (cfg_.engine == "external") external_ = std::make_unique<ExternalEngine>(cfg_.endpoint);
        if (cfg_.engine == "reactive") baseline_ = std::make_unique<ReactiveBaselineEngine>();
        meta_ = std::make_unique<MetaLearner>(cfg_.meta);

        KernelOptions options;
        options.enable_fast = !flags_.no_fast;
        options.enable_meta = !flags_.no_meta;
        options.freeze_meta = flags_.freeze_meta;
        options.deterministic_tools = flags_.no_tools;

        Wiring w;
        w.advance = [this](double until) { return sim_->step(until); };
        w.actuators = [this] { return actuators(); };
        w.has_pending = [this] { return sim_->has_pending(); };
        w.bus = &bus_;
        w.pump = pump_.get();
        w.collector = collector_.get();
        w.executor = executor_.get();
        w.kb = kb_.get();
        w.wm = wm_.get();
        w.engine = static_cast<ReasonerEngine*>(rules_.get());
        if (external_) w.engine = external_.get();
        if (baseline_) w.engine = baseline_.get();
        w.meta = meta_.get();
        w.prompt = &prompt_;
        w.thresholds = &cfg_.thresholds;
        w.goals = &cfg_.goals;
        w.invariants = &cfg_.invariants;
        w.policy = &cfg_.policy;
        w.utility = &cfg_.utility;
        kernel_ = std::make_unique<Kernel>(w, options);
    }

    RunReport run() {
        log_ = kernel_->run(cfg_.run_duration);
        return report();
    }

    // Folds the run log into the report schema: Optional %, Late %, Avg
    // Servers (time-weighted), Total Utility, and per-stage overheads.
    RunReport report() const {
        RunReport r;
        r.cycles = static_cast<int>(log_.cycles.size());
        r.reactive_triggers = log_.reactive_dispatches;
        r.meta_invocations = log_.meta_invocations;
        r.discarded_inflight = log_.discarded_inflight;
        double horizon = 0.0;
        for (const auto& rec : log_.cycles) {
            r.request_count += rec.snapshot.request_count;
            r.late_count += rec.snapshot.late_count;
            r.optional_count += rec.snapshot.optional_count;
            r.total_utility += rec.utility;
            horizon = std::max(horizon, rec.snapshot.window_end);
            if (rec.action && rec.ack && rec.action->kind != ActionKind::NoOp) {
                const bool accepted = rec.verdict && rec.verdict->accepted;
                if (accepted && rec.ack->ok) {
                    ++r.actions_executed;
                    if (rec.action->origin == ActionOrigin::FastController)
                        ++r.fast_actions;
                    else
                        ++r.reasoner_actions;
                } else {
                    ++r.actions_rejected;
                }
            }
        }
        r.arrivals_consumed = sim_->arrivals_consumed();
        if (r.request_count > 0) {
            r.optional_pct = 100.0 * static_cast<double>(r.optional_count) /
                             static_cast<double>(r.request_count);
            r.late_pct = 100.0 * static_cast<double>(r.late_count) /
                         static_cast<double>(r.request_count);
        } else {
            r.empty = true;
        }
        if (horizon > 0.0) r.avg_servers = sim_->server_seconds(0.0, horizon) / horizon;
        for (const auto& [stage, samples] : kernel_->overheads().samples())
            r.overheads[stage] = OverheadStats::of(samples);
        r.engine = cfg_.engine;
        r.config_fingerprint = config_fingerprint(cfg_, cfg_.sim.rng_seed, flags_.tag());
        return r;
    }

    // summary.csv, intervals.csv, actions.csv, overheads.csv, plus
    // episodes.ndjson (--kb-dump) and bus.ndjson (--record).
    void write_outputs(const std::string& out_dir, const RunReport& r) {
        namespace fs = std::filesystem;
        fs::create_directories(out_dir);
        write_summary(out_dir + "/summary.csv", r);
        write_intervals(out_dir + "/intervals.csv");
        write_actions(out_dir + "/actions.csv");
        write_overheads(out_dir + "/overheads.csv", r);
        if (flags_.kb_dump) {
            std::ofstream out(out_dir + "/episodes.ndjson");
            kb_->dump_ndjson(out);
        }
        if (recorder_) {
            std::ofstream out(out_dir + "/bus.ndjson");
            for (const auto& m : recorder_->drain())
                out << Json{{"topic", m.topic},
                            {"published_at", m.published_at},
                            {"payload", m.payload}}
                           .dump()
                    << "\n";
        }
        if (external_ && !external_->exchange_log().empty()) {
            std::ofstream out(out_dir + "/engine_exchanges.ndjson");
            for (const auto& e : external_->exchange_log()) out << e.dump() << "\n";
        }
    }

    const RunLog& log() const { return log_; }
    const KnowledgeBase& kb() const { return *kb_; }
    const PromptConfig& prompt() const { return prompt_; }
    const FrameworkConfig& config() const { return cfg_; }
    const ManagedSystem& sim() const { return *sim_; }

private:
    ActuatorView actuators() const {
        return {sim_->active_servers(), sim_->booting_servers(), sim_->dimmer()};
    }

    void write_summary(const std::string& path, const RunReport& r) const {
        std::ofstream out(path);
        out << "optional_pct,late_pct,avg_servers,total_utility,request_count,late_count,"
               "optional_count,arrivals_consumed,cycles,reactive_triggers,actions_executed,"
               "actions_rejected,fast_actions,reasoner_actions,meta_invocations,"
               "discarded_inflight,empty,engine,config_fingerprint\n";
        using detail::fmt;
        out << fmt(r.optional_pct) << ',' << fmt(r.late_pct) << ',' << fmt(r.avg_servers) << ','
            << fmt(r.total_utility) << ',' << r.request_count << ',' << r.late_count << ','
            << r.optional_count << ',' << r.arrivals_consumed << ',' << r.cycles << ','
            << r.reactive_triggers << ',' << r.actions_executed << ',' << r.actions_rejected << ','
            << r.fast_actions << ',' << r.reasoner_actions << ',' << r.meta_invocations << ','
            << r.discarded_inflight << ',' << (r.empty ? 1 : 0) << ',' << r.engine << ','
            << r.config_fingerprint << "\n";
    }

    void write_intervals(const std::string& path) const {
        std::ofstream out(path);
        out << "window_start,window_end,avg_response_time,p95_response_time,server_utilization,"
               "arrival_rate,dimmer,active_servers,booting_servers,request_count,late_count,"
               "optional_count,path,utility\n";
        using detail::fmt;
        for (const auto& rec : log_.cycles) {
            const auto& s = rec.snapshot;
            out << fmt(s.window_start) << ',' << fmt(s.window_end) << ','
                << fmt(s.avg_response_time) << ',' << fmt(s.p95_response_time) << ','
                << fmt(s.server_utilization) << ',' << fmt(s.arrival_rate) << ',' << fmt(s.dimmer)
                << ',' << s.active_servers << ',' << s.booting_servers << ',' << s.request_count
                << ',' << s.late_count << ',' << s.optional_count << ','
                << to_string(rec.dispatch.path) << ',' << fmt(rec.utility) << "\n";
        }
    }

    void write_actions(const std::string& path) const {
        std::ofstream out(path);
        out << "issued_at,kind,origin,dimmer_target,accepted,ok,error,rationale\n";
        using detail::csv_escape;
        using detail::fmt;
        for (const auto& rec : log_.cycles) {
            if (!rec.action) continue;
            const auto& a = *rec.action;
            out << fmt(a.issued_at) << ',' << to_string(a.kind) << ',' << to_string(a.origin)
                << ',' << (a.dimmer_target ? fmt(*a.dimmer_target) : "") << ','
                << (rec.verdict && rec.verdict->accepted ? 1 : 0) << ','
                << (rec.ack && rec.ack->ok ? 1 : 0) << ','
                << csv_escape(rec.ack ? rec.ack->error : "") << ',' << csv_escape(a.rationale)
                << "\n";
        }
    }

    void write_overheads(const std::string& path, const RunReport& r) const {
        std::ofstream out(path);
        out << "stage,count,mean_ms,p50_ms,p95_ms,max_ms\n";
        using detail::fmt;
        // Fixed row order so the file diffs cleanly across runs.
        const std::vector<std::string> order = {stages::end_to_end, stages::engine_call,
                                                stages::wm_operation, stages::tool_call,
                                                stages::kb_query};
        for (const auto& stage : order) {
            const auto it = r.overheads.find(stage);
            const OverheadStats s = it == r.overheads.end() ? OverheadStats{} : it->second;
            out << stage << ',' << s.count << ',' << fmt(s.mean_ms) << ',' << fmt(s.p50_ms) << ','
                << fmt(s.p95_ms) << ',' << fmt(s.max_ms) << "\n";
        }
    }

    FrameworkConfig cfg_;
    RunFlags flags_;
    MessageBus bus_;
    std::unique_ptr<ManagedSystem> sim_;
    std::unique_ptr<KnowledgeBase> kb_;
    std::unique_ptr<WorldModel> wm_;
    std::unique_ptr<TelemetryPump> pump_;
    std::optional<Subscription> recorder_;
    std::unique_ptr<MetricCollector> collector_;
    std::unique_ptr<ExecutionAdapter> executor_;
    PromptConfig prompt_;
    std::unique_ptr<RulesEngine> rules_;
    std::unique_ptr<ExternalEngine> external_;
    std::unique_ptr<ReactiveBaselineEngine> baseline_;
    std::unique_ptr<MetaLearner> meta_;
    std::unique_ptr<Kernel> kernel_;
    RunLog log_;
};

}  // namespace polaris
