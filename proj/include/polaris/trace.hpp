#pragma once

#include <cstddef>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "polaris/rng.hpp"

// Arrival traces: the file format is newline-delimited decimal inter-arrival
// gaps in seconds; lines starting with '#' (and blank lines) are ignored.

namespace polaris {

class ParseError : public std::runtime_error {
public:
    ParseError(std::size_t line, const std::string& what)
        : std::runtime_error("trace parse error at line " + std::to_string(line) + ": " + what),
          line_(line) {}

    std::size_t line() const { return line_; }

private:
    std::size_t line_;
};

struct ArrivalTrace {
    std::vector<double> timestamps;  // non-decreasing arrival times, seconds

    std::size_t size() const { return timestamps.size(); }
    bool empty() const { return timestamps.empty(); }
    double duration() const { return timestamps.empty() ? 0.0 : timestamps.back(); }

    // Drops arrivals after `cutoff` (used so report conservation holds when a
    // run is shorter than the trace).
    void truncate(double cutoff) {
        while (!timestamps.empty() && timestamps.back() > cutoff) timestamps.pop_back();
    }
};

namespace detail {
inline std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}
}  // namespace detail

// Cumulative-sums inter-arrival gaps into absolute timestamps.
inline ArrivalTrace load_trace(std::istream& in) {
    ArrivalTrace trace;
    std::string line;
    std::size_t line_no = 0;
    double clock = 0.0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string body = detail::trim(line);
        if (body.empty() || body.front() == '#') continue;
        std::size_t consumed = 0;
        double gap = 0.0;
        try {
            gap = std::stod(body, &consumed);
        } catch (const std::exception&) {
            throw ParseError(line_no, "not a number: '" + body + "'");
        }
        if (consumed != body.size()) throw ParseError(line_no, "trailing garbage: '" + body + "'");
        if (gap < 0.0) throw ParseError(line_no, "negative inter-arrival gap");
        clock += gap;
        trace.timestamps.push_back(clock);
    }
    return trace;
}

inline ArrivalTrace load_trace_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open trace file: " + path);
    return load_trace(in);
}

// Writes a trace back out as inter-arrival gaps.
inline void write_trace(std::ostream& out, const ArrivalTrace& trace) {
    double prev = 0.0;
    out << "# inter-arrival gaps in seconds\n";
    for (double t : trace.timestamps) {
        std::ostringstream oss;
        oss.precision(17);
        oss << (t - prev);
        out << oss.str() << "\n";
        prev = t;
    }
}

// A rate profile as piecewise-constant segments; the generators below are
// all expressed through it.
struct RateSegment {
    double rate = 1.0;      // requests/second, > 0
    double duration = 0.0;  // seconds
};

inline ArrivalTrace piecewise_trace(const std::vector<RateSegment>& segments) {
    ArrivalTrace trace;
    double segment_start = 0.0;
    for (const auto& seg : segments) {
        if (seg.rate <= 0.0) throw std::invalid_argument("piecewise_trace: rate must be > 0");
        const double gap = 1.0 / seg.rate;
        const double segment_end = segment_start + seg.duration;
        for (double t = segment_start + gap; t <= segment_end + 1e-12; t += gap)
            trace.timestamps.push_back(t);
        segment_start = segment_end;
    }
    return trace;
}

inline ArrivalTrace constant_rate_trace(double rate, double duration) {
    return piecewise_trace({{rate, duration}});
}

// Two-phase burst: base rate with one burst window at a higher rate.
inline ArrivalTrace burst_trace(double base_rate, double burst_rate, double burst_start,
                                double burst_end, double duration) {
    if (!(0.0 <= burst_start && burst_start <= burst_end && burst_end <= duration))
        throw std::invalid_argument("burst_trace: require 0 <= start <= end <= duration");
    return piecewise_trace({{base_rate, burst_start},
                            {burst_rate, burst_end - burst_start},
                            {base_rate, duration - burst_end}});
}

// Recurring ramp-then-burst profile: every `period` seconds a ramp segment at
// `ramp_rate` (the precursor) followed by a burst at `burst_rate`.
inline ArrivalTrace recurring_burst_trace(double base_rate, double ramp_rate, double burst_rate,
                                          double period, double ramp_len, double burst_len,
                                          double duration) {
    std::vector<RateSegment> segments;
    double t = 0.0;
    while (t + period <= duration + 1e-9) {
        const double calm = period - ramp_len - burst_len;
        if (calm < 0.0) throw std::invalid_argument("recurring_burst_trace: period too short");
        segments.push_back({base_rate, calm});
        segments.push_back({ramp_rate, ramp_len});
        segments.push_back({burst_rate, burst_len});
        t += period;
    }
    if (t < duration) segments.push_back({base_rate, duration - t});
    return piecewise_trace(segments);
}

// Poisson arrivals at a fixed rate, seeded.
inline ArrivalTrace poisson_trace(double rate, double duration, std::uint64_t seed) {
    if (rate <= 0.0) throw std::invalid_argument("poisson_trace: rate must be > 0");
    ArrivalTrace trace;
    Rng rng(seed);
    double t = 0.0;
    while (true) {
        t += rng.exponential(1.0 / rate);
        if (t > duration) break;
        trace.timestamps.push_back(t);
    }
    return trace;
}

}  // namespace polaris
