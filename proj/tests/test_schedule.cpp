#include <doctest.h>

#include <cmath>

#include "compdiff/schedule.hpp"

using namespace compdiff;

TEST_CASE("single-step schedule: beta_tilde_1 = 0, sigma_1 = 0") {
    auto s = build_linear_schedule(1, 0.02, 0.02);
    CHECK(s.T() == 1);
    CHECK(s.beta(1) == doctest::Approx(0.02));
    CHECK(s.alpha_bar(1) == doctest::Approx(0.98));
    CHECK(s.beta_tilde(1) == 0.0);
    CHECK(s.sigma(1) == 0.0);
}

TEST_CASE("alpha_bar matches an independent cumulative-product oracle") {
    const int T = 500;
    auto s = build_linear_schedule(T, 1e-4, 0.02);
    // oracle: recompute the product from the linear beta formula
    long double prod = 1.0L;
    for (int t = 1; t <= T; ++t) {
        const long double beta = 1e-4L + (0.02L - 1e-4L) * (t - 1) / (T - 1);
        prod *= (1.0L - beta);
    }
    CHECK(std::abs(s.alpha_bar(T) - static_cast<double>(prod)) <=
          1e-10 * static_cast<double>(prod));
}

TEST_CASE("defining recurrence alpha_bar_t = alpha_bar_{t-1} * alpha_t holds exhaustively") {
    auto s = build_linear_schedule(500, 1e-4, 0.02);
    for (int t = 1; t <= 500; ++t)
        CHECK(s.alpha_bar(t) == doctest::Approx(s.alpha_bar(t - 1) * s.alpha(t)).epsilon(1e-14));
}

TEST_CASE("schedule invariants for T in {1, 50, 500}") {
    for (int T : {1, 50, 500}) {
        auto s = build_linear_schedule(T, 1e-4, 0.02);
        for (int t = 1; t <= T; ++t) {
            CHECK(s.alpha(t) + s.beta(t) == doctest::Approx(1.0).epsilon(1e-15));
            CHECK(s.sigma(t) * s.sigma(t) <= s.beta(t) * (1.0 + 1e-12));
            if (t > 1) {
                CHECK(s.alpha_bar(t) < s.alpha_bar(t - 1));
                CHECK(s.beta(t) >= s.beta(t - 1));
            }
        }
        CHECK(s.beta_tilde(1) == 0.0);
        CHECK(s.alpha_bar(1) == doctest::Approx(s.alpha(1)));
    }
}

TEST_CASE("snr identities and monotonicity") {
    auto s = build_linear_schedule(500, 1e-4, 0.02);
    for (int t = 2; t <= 500; ++t) CHECK(snr(s, t) < snr(s, t - 1));
    // terminal snr from an independent cumulative-product evaluation
    long double prod = 1.0L;
    for (int t = 1; t <= 500; ++t)
        prod *= 1.0L - (1e-4L + (0.02L - 1e-4L) * (t - 1) / 499.0L);
    const double oracle = static_cast<double>(prod / (1.0L - prod));
    CHECK(snr(s, 500) == doctest::Approx(oracle).epsilon(1e-10));
    CHECK(snr(s, 500) < 1e-2);  // the terminal signal-to-noise ratio is low
    // abar = 0.5 -> snr = 1 on a hand-built schedule
    NoiseSchedule h({0.5}, 0.5, 0.5);
    CHECK(snr(h, 1) == doctest::Approx(1.0));
}

TEST_CASE("preconditions rejected") {
    CHECK_THROWS_AS(build_linear_schedule(0, 1e-4, 0.02), UsageError);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.0, 0.02), UsageError);
    CHECK_THROWS_AS(build_linear_schedule(10, 0.03, 0.02), UsageError);
    CHECK_THROWS_AS(build_linear_schedule(10, 1e-4, 1.0), UsageError);
    auto s = build_linear_schedule(10, 1e-4, 0.02);
    CHECK_THROWS_AS(s.beta(0), UsageError);
    CHECK_THROWS_AS(s.beta(11), UsageError);
    CHECK_THROWS_AS(snr(s, 11), UsageError);
}
