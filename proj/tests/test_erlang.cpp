#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>

#include "polaris/erlang.hpp"

using namespace polaris;

// Closed-form checks: M/M/1 collapses to W = 1/(mu - lambda); for M/M/2 the
// waiting probability has the textbook form 2*rho^2 / (1 + rho).

TEST_CASE("erlang_c matches M/M/1 closed form") {
    // lambda = 5, mu = 10 -> rho = 0.5, P(wait) = rho, W = 1/(mu - lambda).
    CHECK(erlang_c_probability(1, 0.5) == doctest::Approx(0.5));
    CHECK(mmc_mean_response_time(5.0, 0.1, 1) == doctest::Approx(0.2));
}

TEST_CASE("erlang_c matches M/M/2 closed form") {
    // lambda = 20/s, s = 0.06 -> a = 1.2, rho = 0.6.
    const double a = 1.2;
    const double rho = 0.6;
    const double p_wait = 2.0 * rho * rho / (1.0 + rho);  // 0.45
    CHECK(erlang_c_probability(2, a) == doctest::Approx(p_wait));
    // W = C/(c*mu - lambda) + s = 0.45/13.3333... + 0.06 = 0.09375 exactly.
    CHECK(mmc_mean_response_time(20.0, 0.06, 2) == doctest::Approx(0.09375));
}

TEST_CASE("degenerate inputs") {
    CHECK(erlang_c_probability(3, 0.0) == 0.0);
    CHECK(mmc_mean_response_time(0.0, 0.06, 2) == doctest::Approx(0.06));
    CHECK(std::isinf(mmc_mean_wait(40.0, 0.06, 2)));  // rho = 1.2, unstable
    CHECK_THROWS(erlang_c_probability(0, 1.0));
    CHECK_THROWS(mmc_mean_wait(-1.0, 0.06, 2));
}

TEST_CASE("mean response time is monotone over the stable grid") {
    for (double lambda = 1.0; lambda <= 30.0; lambda += 1.0) {
        for (int c = 1; c <= 5; ++c) {
            const double s = 0.02;
            if (lambda * s / c >= 0.99) continue;
            const double base = mmc_mean_response_time(lambda, s, c);
            // More servers never hurt.
            CHECK(mmc_mean_response_time(lambda, s, c + 1) <= base + 1e-12);
            // More load never helps.
            if ((lambda + 1.0) * s / c < 0.99)
                CHECK(mmc_mean_response_time(lambda + 1.0, s, c) >= base - 1e-12);
            // Longer service never helps.
            if (lambda * (s * 1.1) / c < 0.99)
                CHECK(mmc_mean_response_time(lambda, s * 1.1, c) >= base - 1e-12);
        }
    }
}

TEST_CASE("erlang_c stays finite and within [0,1] for large server counts") {
    for (int c = 1; c <= 200; ++c) {
        const double p = erlang_c_probability(c, 0.8 * c);
        CHECK(p >= 0.0);
        CHECK(p <= 1.0);
    }
}
