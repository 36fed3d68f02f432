#pragma once

#include <limits>
#include <stdexcept>

// Closed-form M/M/c results used by the world model and as the simulator's
// calibration oracle.

namespace polaris {

// Erlang-C probability that an arrival must wait, for c servers and offered
// load a = lambda/mu. Computed through the Erlang-B recurrence, which stays
// stable for large c where the factorial form overflows.
inline double erlang_c_probability(int servers, double offered_load) {
    if (servers < 1) throw std::invalid_argument("erlang_c: servers >= 1");
    if (offered_load < 0.0) throw std::invalid_argument("erlang_c: offered load >= 0");
    if (offered_load == 0.0) return 0.0;
    const double rho = offered_load / servers;
    if (rho >= 1.0) return 1.0;  // unstable: every arrival waits
    double b = 1.0;
    for (int k = 1; k <= servers; ++k) b = offered_load * b / (k + offered_load * b);
    return b / (1.0 - rho * (1.0 - b));
}

// Mean time in queue for M/M/c with per-request mean service_time.
// Infinite when the system is not stable (rho >= 1).
inline double mmc_mean_wait(double arrival_rate, double service_time, int servers) {
    if (servers < 1) throw std::invalid_argument("mmc: servers >= 1");
    if (service_time <= 0.0) throw std::invalid_argument("mmc: service_time > 0");
    if (arrival_rate < 0.0) throw std::invalid_argument("mmc: arrival_rate >= 0");
    if (arrival_rate == 0.0) return 0.0;
    const double mu = 1.0 / service_time;
    const double a = arrival_rate / mu;
    if (a / servers >= 1.0) return std::numeric_limits<double>::infinity();
    const double c_wait = erlang_c_probability(servers, a);
    return c_wait / (servers * mu - arrival_rate);
}

// Mean response time (wait + service) for M/M/c.
inline double mmc_mean_response_time(double arrival_rate, double service_time, int servers) {
    if (arrival_rate == 0.0) return service_time;
    const double wait = mmc_mean_wait(arrival_rate, service_time, servers);
    return wait + service_time;
}

}  // namespace polaris
