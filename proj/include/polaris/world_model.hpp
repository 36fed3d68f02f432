#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <mutex>
#include <shared_mutex>
#include <stdexcept>

#include "polaris/codec.hpp"
#include "polaris/domain.hpp"
#include "polaris/erlang.hpp"

// Predictive "what-if" tool: given a candidate action and the current state,
// returns a distribution over the next system state. Analytic M/M/c core
// with online residual tracking; update() is the only mutator.

namespace polaris {

struct WMConfig {
    double mandatory_service_time = 0.04;
    double optional_service_time = 0.02;
    double boot_delay = 60.0;
    int min_servers = 1;
    double ew_factor = 0.2;           // exponential weight for residual tracking
    double residual_floor = 0.01;     // seconds; lower bound on reported std
    double util_std_floor = 0.02;     // fraction
    double overload_rt_cap = 5.0;     // seconds; reported mean when rho >= 1
    bool recalibrate_service = false; // damped proportional service-time correction
    double recalibration_gain = 0.1;

    void validate() const {
        if (!(mandatory_service_time > 0.0 && optional_service_time > 0.0))
            throw ConfigError("wm: service times must be > 0");
        if (!(ew_factor > 0.0 && ew_factor <= 1.0))
            throw ConfigError("wm: ew_factor in (0,1]");
        if (residual_floor < 0.0 || overload_rt_cap <= 0.0)
            throw ConfigError("wm: residual_floor >= 0 and overload_rt_cap > 0");
    }
};

struct WMQuery {
    AdaptationAction action;  // phi: the candidate directive
    MetricSnapshot state;     // psi: snapshot carries dimmer and server counts
    double horizon = 60.0;    // seconds
};

// Gaussian summary of the predicted next state.
struct StateDistribution {
    double mean_response_time = 0.0;
    double std_response_time = 0.0;
    double mean_utilization = 0.0;
    double std_utilization = 0.0;

    double prob_rt_exceeds(double bound) const {
        if (std_response_time <= 0.0) return mean_response_time > bound ? 1.0 : 0.0;
        const double z = (bound - mean_response_time) / (std_response_time * std::sqrt(2.0));
        return 0.5 * std::erfc(z);
    }
};

inline void to_json(Json& j, const StateDistribution& d) {
    j = Json{{"mean_response_time", d.mean_response_time},
             {"std_response_time", d.std_response_time},
             {"mean_utilization", d.mean_utilization},
             {"std_utilization", d.std_utilization}};
}

inline void from_json(const Json& j, StateDistribution& d) {
    j.at("mean_response_time").get_to(d.mean_response_time);
    j.at("std_response_time").get_to(d.std_response_time);
    j.at("mean_utilization").get_to(d.mean_utilization);
    j.at("std_utilization").get_to(d.std_utilization);
}

// An observed (state, action, next state) step for calibration.
struct Transition {
    MetricSnapshot before;
    AdaptationAction action;
    MetricSnapshot after;
};

class WorldModel {
public:
    explicit WorldModel(WMConfig cfg) : cfg_(cfg) {
        cfg_.validate();
        mandatory_eff_ = cfg_.mandatory_service_time;
        optional_eff_ = cfg_.optional_service_time;
    }

    // Pure given the calibration state. Applies the action to the actuator
    // settings (AddServer only takes effect when the horizon outlasts the
    // provisioning delay), then prices the resulting M/M/c system at the
    // observed arrival rate. Overload saturates at a cap with inflated std.
    StateDistribution simulate(const WMQuery& q) const {
        std::shared_lock lock(mutex_);
        return simulate_locked(q);
    }

    // Folds the residual between observation and analytic prediction into
    // the running exponentially-weighted mean/std.
    void update(const Transition& t) {
        if (t.after.window_start < t.before.window_end)
            throw std::invalid_argument("wm: transition windows are not well-ordered");
        std::unique_lock lock(mutex_);
        WMQuery q{t.action, t.before, std::max(1e-9, t.after.window_length())};
        const auto [analytic_rt, analytic_util] = analytic_prediction(q);
        fold(rt_residual_, t.after.avg_response_time - analytic_rt);
        fold(util_residual_, t.after.server_utilization - analytic_util);
        ++observations_;
        if (cfg_.recalibrate_service && analytic_rt > 0.0 && analytic_rt < cfg_.overload_rt_cap) {
            // Damped proportional correction of the effective service times.
            const double ratio = t.after.avg_response_time / analytic_rt;
            const double scale = 1.0 + cfg_.recalibration_gain * (ratio - 1.0);
            const auto clampf = [](double v, double lo, double hi) {
                return std::clamp(v, lo, hi);
            };
            mandatory_eff_ = clampf(mandatory_eff_ * scale, 0.2 * cfg_.mandatory_service_time,
                                    5.0 * cfg_.mandatory_service_time);
            optional_eff_ = clampf(optional_eff_ * scale, 0.2 * cfg_.optional_service_time,
                                   5.0 * cfg_.optional_service_time);
        }
    }

    std::uint64_t observation_count() const {
        std::shared_lock lock(mutex_);
        return observations_;
    }

    double residual_mean() const {
        std::shared_lock lock(mutex_);
        return rt_residual_.mean;
    }

    double ew_factor() const {
        std::shared_lock lock(mutex_);
        return cfg_.ew_factor;
    }

    void set_ew_factor(double f) {
        std::unique_lock lock(mutex_);
        cfg_.ew_factor = std::clamp(f, 0.01, 1.0);
    }

    // Calibration state round-trips as a small JSON document so runs can be
    // reproduced.
    Json dump_calibration() const {
        std::shared_lock lock(mutex_);
        return Json{{"mandatory_eff", mandatory_eff_},
                    {"optional_eff", optional_eff_},
                    {"rt_residual_mean", rt_residual_.mean},
                    {"rt_residual_var", rt_residual_.var},
                    {"util_residual_mean", util_residual_.mean},
                    {"util_residual_var", util_residual_.var},
                    {"observations", observations_},
                    {"ew_factor", cfg_.ew_factor}};
    }

    void load_calibration(const Json& j) {
        std::unique_lock lock(mutex_);
        mandatory_eff_ = j.at("mandatory_eff").get<double>();
        optional_eff_ = j.at("optional_eff").get<double>();
        rt_residual_ = {j.at("rt_residual_mean").get<double>(),
                        j.at("rt_residual_var").get<double>()};
        util_residual_ = {j.at("util_residual_mean").get<double>(),
                          j.at("util_residual_var").get<double>()};
        observations_ = j.at("observations").get<std::uint64_t>();
        cfg_.ew_factor = j.value("ew_factor", cfg_.ew_factor);
    }

private:
    struct Residual {
        double mean = 0.0;
        double var = 0.0;
    };

    void fold(Residual& r, double value) {
        const double a = cfg_.ew_factor;
        const double d = value - r.mean;
        r.var = (1.0 - a) * (r.var + a * d * d);
        r.mean += a * d;
    }

    // Effective (servers, dimmer) after applying the action, honouring the
    // provisioning delay within the horizon.
    std::pair<int, double> effective_actuators(const WMQuery& q) const {
        int servers = q.state.active_servers;
        double dimmer = q.state.dimmer;
        const bool boots_land = q.horizon > cfg_.boot_delay;
        if (boots_land) servers += q.state.booting_servers;
        switch (q.action.kind) {
            case ActionKind::AddServer:
                if (boots_land) servers += 1;
                break;
            case ActionKind::RemoveServer:
                servers -= 1;
                break;
            case ActionKind::SetDimmer:
                if (q.action.dimmer_target) dimmer = *q.action.dimmer_target;
                break;
            case ActionKind::NoOp:
                break;
        }
        servers = std::max(servers, cfg_.min_servers);
        dimmer = std::clamp(dimmer, 0.0, 1.0);
        return {servers, dimmer};
    }

    std::pair<double, double> analytic_prediction(const WMQuery& q) const {
        if (q.state.arrival_rate < 0.0)
            throw std::invalid_argument("wm: arrival rate must be >= 0");
        if (!(q.horizon > 0.0)) throw std::invalid_argument("wm: horizon must be > 0");
        const auto [servers, dimmer] = effective_actuators(q);
        const double service = mandatory_eff_ + dimmer * optional_eff_;
        const double lambda = q.state.arrival_rate;
        const double rho = lambda * service / servers;
        if (rho >= 1.0) return {cfg_.overload_rt_cap, 1.0};
        return {mmc_mean_response_time(lambda, service, servers), rho};
    }

    StateDistribution simulate_locked(const WMQuery& q) const {
        const auto [analytic_rt, analytic_util] = analytic_prediction(q);
        const bool overloaded = analytic_rt >= cfg_.overload_rt_cap;
        StateDistribution out;
        const double base_std = std::max(std::sqrt(std::max(rt_residual_.var, 0.0)),
                                         cfg_.residual_floor);
        if (overloaded) {
            out.mean_response_time = cfg_.overload_rt_cap;
            out.std_response_time = 3.0 * base_std;
        } else {
            out.mean_response_time = std::max(0.0, analytic_rt + rt_residual_.mean);
            out.std_response_time = base_std;
        }
        out.mean_utilization = std::clamp(analytic_util + util_residual_.mean, 0.0, 1.0);
        out.std_utilization = std::max(std::sqrt(std::max(util_residual_.var, 0.0)),
                                       cfg_.util_std_floor);
        return out;
    }

    mutable std::shared_mutex mutex_;
    WMConfig cfg_;
    double mandatory_eff_ = 0.0;
    double optional_eff_ = 0.0;
    Residual rt_residual_;
    Residual util_residual_;
    std::uint64_t observations_ = 0;
};

}  // namespace polaris
