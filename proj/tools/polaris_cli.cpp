#include <CLI11.hpp>

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "polaris/harness.hpp"
#include "polaris/polaris.hpp"

// polaris: run trace-driven adaptation experiments against the built-in
// simulated managed system.
//
//   polaris init-config --out config.json
//   polaris gen-trace --kind burst --out traces/burst.trace
//   polaris run --config config.json --trace traces/burst.trace --out results/

namespace {

int cmd_run(const std::string& config_path, const std::string& trace_path,
            std::optional<std::uint64_t> seed, const polaris::RunFlags& base_flags,
            const std::string& engine, const std::string& out_dir) {
    polaris::RunFlags flags = base_flags;
    flags.seed = seed;
    flags.engine = engine;
    auto config = polaris::load_config_file(config_path);
    auto trace = polaris::load_trace_file(trace_path);
    polaris::Harness harness(std::move(config), std::move(trace), flags);
    auto report = harness.run();
    harness.write_outputs(out_dir, report);

    std::cout << "run complete (" << flags.tag() << ")\n"
              << "  requests:      " << report.request_count << " (" << report.arrivals_consumed
              << " arrivals)\n"
              << "  optional %:    " << report.optional_pct << "\n"
              << "  late %:        " << report.late_pct << "\n"
              << "  avg servers:   " << report.avg_servers << "\n"
              << "  total utility: " << report.total_utility << "\n"
              << "  reactive triggers: " << report.reactive_triggers << ", actions "
              << report.actions_executed << " executed / " << report.actions_rejected
              << " rejected, meta runs " << report.meta_invocations << "\n"
              << "  fingerprint:   " << report.config_fingerprint << "\n"
              << "  outputs:       " << out_dir << "/{summary,intervals,actions,overheads}.csv\n";
    if (!harness.log().errors.empty()) {
        std::cout << "  notes:\n";
        for (const auto& e : harness.log().errors) std::cout << "    - " << e << "\n";
    }
    return 0;
}

int cmd_gen_trace(const std::string& kind, double rate, double ramp_rate, double burst_rate,
                  double burst_start, double burst_end, double period, double ramp_len,
                  double burst_len, double duration, std::uint64_t seed,
                  const std::string& out_path) {
    polaris::ArrivalTrace trace;
    if (kind == "constant") {
        trace = polaris::constant_rate_trace(rate, duration);
    } else if (kind == "burst") {
        trace = polaris::burst_trace(rate, burst_rate, burst_start, burst_end, duration);
    } else if (kind == "recurring") {
        trace = polaris::recurring_burst_trace(rate, ramp_rate, burst_rate, period, ramp_len,
                                               burst_len, duration);
    } else if (kind == "poisson") {
        trace = polaris::poisson_trace(rate, duration, seed);
    } else {
        std::cerr << "unknown trace kind: " << kind << "\n";
        return 2;
    }
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return 2;
    }
    polaris::write_trace(out, trace);
    std::cout << "wrote " << trace.size() << " arrivals (" << kind << ") to " << out_path << "\n";
    return 0;
}

int cmd_init_config(const std::string& out_path) {
    polaris::FrameworkConfig defaults;
    std::ofstream out(out_path);
    if (!out) {
        std::cerr << "cannot write " << out_path << "\n";
        return 2;
    }
    out << polaris::Json(defaults).dump(2) << "\n";
    std::cout << "wrote default configuration to " << out_path << "\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"three-layer self-adaptive control framework over a simulated managed system"};
    app.require_subcommand(1);

    // run
    auto* run = app.add_subcommand("run", "execute a trace-driven adaptation run");
    std::string config_path, trace_path, out_dir = "results", engine;
    std::optional<std::uint64_t> seed;
    polaris::RunFlags flags;
    run->add_option("--config", config_path, "configuration file (JSON)")->required();
    run->add_option("--trace", trace_path, "arrival trace file")->required();
    run->add_option("--seed", seed, "override the simulator rng seed");
    run->add_option("--engine", engine, "reasoner engine: rules|external|reactive")
        ->check(CLI::IsMember({"rules", "external", "reactive"}));
    run->add_option("--out", out_dir, "output directory");
    run->add_flag("--no-meta", flags.no_meta, "disable the meta-learner");
    run->add_flag("--no-tools", flags.no_tools,
                  "inject deterministic tool results from the latest snapshot");
    run->add_flag("--no-fast", flags.no_fast, "disable the fast controller");
    run->add_flag("--freeze-meta", flags.freeze_meta, "reflect but never evolve");
    run->add_flag("--record", flags.record, "dump every bus message to bus.ndjson");
    run->add_flag("--kb-dump", flags.kb_dump, "dump the episode store to episodes.ndjson");

    // gen-trace
    auto* gen = app.add_subcommand("gen-trace", "generate a synthetic arrival trace");
    std::string kind = "constant", trace_out = "trace.txt";
    double rate = 20.0, ramp_rate = 30.0, burst_rate = 45.0;
    double burst_start = 100.0, burst_end = 160.0;
    double period = 150.0, ramp_len = 20.0, burst_len = 20.0, duration = 600.0;
    std::uint64_t gen_seed = 1;
    gen->add_option("--kind", kind, "constant|burst|recurring|poisson")
        ->check(CLI::IsMember({"constant", "burst", "recurring", "poisson"}));
    gen->add_option("--rate", rate, "base arrival rate (req/s)");
    gen->add_option("--ramp-rate", ramp_rate, "precursor rate (recurring)");
    gen->add_option("--burst-rate", burst_rate, "burst arrival rate");
    gen->add_option("--burst-start", burst_start, "burst start (burst kind)");
    gen->add_option("--burst-end", burst_end, "burst end (burst kind)");
    gen->add_option("--period", period, "burst period (recurring)");
    gen->add_option("--ramp-len", ramp_len, "precursor length (recurring)");
    gen->add_option("--burst-len", burst_len, "burst length (recurring)");
    gen->add_option("--duration", duration, "trace duration (s)");
    gen->add_option("--seed", gen_seed, "rng seed (poisson)");
    gen->add_option("--out", trace_out, "output file");

    // init-config
    auto* init = app.add_subcommand("init-config", "write the default configuration");
    std::string config_out = "config.json";
    init->add_option("--out", config_out, "output file");

    CLI11_PARSE(app, argc, argv);

    try {
        if (run->parsed()) return cmd_run(config_path, trace_path, seed, flags, engine, out_dir);
        if (gen->parsed())
            return cmd_gen_trace(kind, rate, ramp_rate, burst_rate, burst_start, burst_end,
                                 period, ramp_len, burst_len, duration, gen_seed, trace_out);
        if (init->parsed()) return cmd_init_config(config_out);
    } catch (const polaris::ConfigError& e) {
        std::cerr << "configuration error: " << e.what() << "\n";
        return 2;
    } catch (const polaris::ParseError& e) {
        std::cerr << "trace error: " << e.what() << "\n";
        return 2;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 0;
}
