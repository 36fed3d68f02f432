#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <map>
#include <string>

#include "polaris/codec.hpp"
#include "polaris/external_engine.hpp"
#include "polaris/fast_controller.hpp"
#include "polaris/meta_learner.hpp"
#include "polaris/simulator.hpp"
#include "polaris/triage.hpp"
#include "polaris/world_model.hpp"

// One structured document holding every tunable: thresholds, goals,
// invariants, utility model, simulator, reactive policy, meta-learner,
// world model, engine selection, and run options.

namespace polaris {

inline void to_json(Json& j, const SimConfig& s) {
    j = Json{{"mandatory_service_time", s.mandatory_service_time},
             {"optional_service_time", s.optional_service_time},
             {"boot_delay", s.boot_delay},
             {"initial_servers", s.initial_servers},
             {"max_servers", s.max_servers},
             {"min_servers", s.min_servers},
             {"rng_seed", s.rng_seed},
             {"exponential_service", s.exponential_service},
             {"sla_bound", s.sla_bound}};
}

inline void from_json(const Json& j, SimConfig& s) {
    s.mandatory_service_time = j.value("mandatory_service_time", s.mandatory_service_time);
    s.optional_service_time = j.value("optional_service_time", s.optional_service_time);
    s.boot_delay = j.value("boot_delay", s.boot_delay);
    s.initial_servers = j.value("initial_servers", s.initial_servers);
    s.max_servers = j.value("max_servers", s.max_servers);
    s.min_servers = j.value("min_servers", s.min_servers);
    s.rng_seed = j.value("rng_seed", s.rng_seed);
    s.exponential_service = j.value("exponential_service", s.exponential_service);
    s.sla_bound = j.value("sla_bound", s.sla_bound);
}

inline void to_json(Json& j, const ReactivePolicy& p) {
    j = Json{{"dimmer_step", p.dimmer_step}, {"min_dimmer", p.min_dimmer}};
}

inline void from_json(const Json& j, ReactivePolicy& p) {
    p.dimmer_step = j.value("dimmer_step", p.dimmer_step);
    p.min_dimmer = j.value("min_dimmer", p.min_dimmer);
}

inline void to_json(Json& j, const WMConfig& w) {
    j = Json{{"ew_factor", w.ew_factor},
             {"residual_floor", w.residual_floor},
             {"util_std_floor", w.util_std_floor},
             {"overload_rt_cap", w.overload_rt_cap},
             {"recalibrate_service", w.recalibrate_service},
             {"recalibration_gain", w.recalibration_gain}};
}

inline void from_json(const Json& j, WMConfig& w) {
    w.ew_factor = j.value("ew_factor", w.ew_factor);
    w.residual_floor = j.value("residual_floor", w.residual_floor);
    w.util_std_floor = j.value("util_std_floor", w.util_std_floor);
    w.overload_rt_cap = j.value("overload_rt_cap", w.overload_rt_cap);
    w.recalibrate_service = j.value("recalibrate_service", w.recalibrate_service);
    w.recalibration_gain = j.value("recalibration_gain", w.recalibration_gain);
}

struct FrameworkConfig {
    ThresholdConfig thresholds;
    GoalSpec goals;
    InvariantSet invariants;
    UtilityConfig utility;
    SimConfig sim;
    ReactivePolicy policy;
    MetaConfig meta;
    WMConfig wm;
    std::string engine = "rules";  // rules | external
    EndpointConfig endpoint;
    double run_duration = 600.0;
    std::size_t kb_capacity = 100000;
    std::map<std::string, double> prompt_directives;  // overrides over the defaults

    // The simulator and world model share the invariant envelope and the
    // SLA bound; a single source of truth keeps them honest.
    void harmonize() {
        sim.min_servers = invariants.min_servers;
        sim.max_servers = invariants.max_servers;
        sim.sla_bound = goals.sla_bound;
        wm.mandatory_service_time = sim.mandatory_service_time;
        wm.optional_service_time = sim.optional_service_time;
        wm.boot_delay = sim.boot_delay;
        wm.min_servers = invariants.min_servers;
    }

    void validate() const {
        thresholds.validate();
        goals.validate();
        invariants.validate();
        utility.validate();
        sim.validate();
        policy.validate();
        meta.validate();
        wm.validate();
        if (engine != "rules" && engine != "external" && engine != "reactive")
            throw ConfigError("config: engine must be 'rules', 'external', or 'reactive'");
        if (engine == "external") endpoint.validate();
        if (!(run_duration > 0.0)) throw ConfigError("config: run_duration > 0");
        if (kb_capacity < 1) throw ConfigError("config: kb_capacity >= 1");
    }
};

inline void to_json(Json& j, const FrameworkConfig& c) {
    j = Json{{"thresholds", c.thresholds},
             {"goals", c.goals},
             {"invariants", c.invariants},
             {"utility", c.utility},
             {"sim", c.sim},
             {"policy", c.policy},
             {"meta", c.meta},
             {"wm", c.wm},
             {"engine", c.engine},
             {"endpoint", c.endpoint},
             {"run_duration", c.run_duration},
             {"kb_capacity", c.kb_capacity},
             {"prompt_directives", c.prompt_directives}};
}

inline void from_json(const Json& j, FrameworkConfig& c) {
    if (j.contains("thresholds")) j.at("thresholds").get_to(c.thresholds);
    if (j.contains("goals")) j.at("goals").get_to(c.goals);
    if (j.contains("invariants")) j.at("invariants").get_to(c.invariants);
    if (j.contains("utility")) j.at("utility").get_to(c.utility);
    if (j.contains("sim")) j.at("sim").get_to(c.sim);
    if (j.contains("policy")) j.at("policy").get_to(c.policy);
    if (j.contains("meta")) j.at("meta").get_to(c.meta);
    if (j.contains("wm")) j.at("wm").get_to(c.wm);
    c.engine = j.value("engine", c.engine);
    if (j.contains("endpoint")) j.at("endpoint").get_to(c.endpoint);
    c.run_duration = j.value("run_duration", c.run_duration);
    c.kb_capacity = j.value("kb_capacity", c.kb_capacity);
    if (j.contains("prompt_directives"))
        c.prompt_directives = j.at("prompt_directives").get<std::map<std::string, double>>();
}

inline FrameworkConfig load_config(const Json& j) {
    FrameworkConfig cfg = j.get<FrameworkConfig>();
    cfg.harmonize();
    cfg.validate();
    return cfg;
}

// Environment overrides for the external engine endpoint, applied on top of
// the file: POLARIS_ENDPOINT_URL, POLARIS_ENDPOINT_TIMEOUT_MS,
// POLARIS_ENDPOINT_MAX_RETRIES, POLARIS_ENDPOINT_MAX_TOOL_CALLS.
inline void apply_env_overrides(FrameworkConfig& cfg) {
    if (const char* url = std::getenv("POLARIS_ENDPOINT_URL")) cfg.endpoint.url = url;
    if (const char* v = std::getenv("POLARIS_ENDPOINT_TIMEOUT_MS"))
        cfg.endpoint.timeout_ms = std::atoi(v);
    if (const char* v = std::getenv("POLARIS_ENDPOINT_MAX_RETRIES"))
        cfg.endpoint.max_retries = std::atoi(v);
    if (const char* v = std::getenv("POLARIS_ENDPOINT_MAX_TOOL_CALLS"))
        cfg.endpoint.max_tool_calls = std::atoi(v);
}

inline FrameworkConfig load_config_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    Json j;
    try {
        j = Json::parse(in);
    } catch (const std::exception& e) {
        throw ConfigError("config parse error in " + path + ": " + e.what());
    }
    FrameworkConfig cfg = j.get<FrameworkConfig>();
    apply_env_overrides(cfg);
    cfg.harmonize();
    cfg.validate();
    return cfg;
}

inline std::uint64_t fnv1a(const std::string& bytes, std::uint64_t h = 1469598103934665603ull) {
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

// Stable across identical (config, seed, flags): the reproducibility tag
// stamped into every report.
inline std::string config_fingerprint(const FrameworkConfig& cfg, std::uint64_t seed,
                                      const std::string& flags) {
    auto h = fnv1a(Json(cfg).dump());
    h = fnv1a(std::to_string(seed), h);
    h = fnv1a(flags, h);
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

}  // namespace polaris
