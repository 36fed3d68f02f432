#pragma once

#include <algorithm>
#include <cstdint>
#include <random>
#include <vector>

#include "polaris/domain.hpp"

// Shared generators for property-style tests. All draws are seeded so
// failures replay.

namespace testgen {

inline polaris::MetricSample random_sample(std::mt19937_64& g, double t_lo, double t_hi,
                                           double sla) {
    std::uniform_real_distribution<double> when(t_lo, t_hi);
    std::uniform_real_distribution<double> rt(0.0, 2.0 * sla);
    std::bernoulli_distribution opt(0.5);
    polaris::MetricSample s;
    s.timestamp = when(g);
    s.response_time = rt(g);
    s.is_optional_served = opt(g);
    s.is_late = s.response_time > sla;
    return s;
}

inline std::vector<polaris::MetricSample> random_samples(std::mt19937_64& g, std::size_t n,
                                                         double t_lo, double t_hi, double sla) {
    std::vector<polaris::MetricSample> out;
    out.reserve(n);
    for (std::size_t i = 0; i < n; ++i) out.push_back(random_sample(g, t_lo, t_hi, sla));
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.timestamp < b.timestamp; });
    return out;
}

inline polaris::MetricSnapshot random_snapshot(std::mt19937_64& g) {
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::uniform_real_distribution<double> rt(0.0, 1.5);
    std::uniform_int_distribution<int> servers(1, 3);
    std::uniform_int_distribution<int> boots(0, 2);
    std::uniform_int_distribution<std::uint64_t> req(0, 500);
    polaris::MetricSnapshot s;
    s.window_start = 0.0;
    s.window_end = 10.0;
    s.avg_response_time = rt(g);
    s.p95_response_time = s.avg_response_time * 1.5;
    s.server_utilization = unit(g);
    s.dimmer = unit(g);
    s.active_servers = servers(g);
    s.booting_servers = boots(g);
    s.request_count = req(g);
    s.late_count = s.request_count == 0 ? 0 : s.request_count / 4;
    s.optional_count = s.request_count / 2;
    s.arrival_rate = static_cast<double>(s.request_count) / 10.0;
    return s;
}

}  // namespace testgen
