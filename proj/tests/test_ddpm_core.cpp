#include <doctest.h>

#include <cmath>

#include "compdiff/ddpm.hpp"
#include "compdiff/rng.hpp"

using namespace compdiff;
using namespace compdiff::ddpm;

namespace {

Tensor randn(std::vector<int> shape, Rng& rng) {
    Tensor t(std::move(shape));
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = rng.normal();
    return t;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
    double m = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(a[i] - b[i]));
    return m;
}

const NoiseSchedule& default_sched() {
    static NoiseSchedule s = build_linear_schedule(500, 1e-4, 0.02);
    return s;
}

}  // namespace

TEST_CASE("forward_noise trivial cases") {
    const auto& s = default_sched();
    Rng rng(1);
    Tensor z0 = randn({3, 3}, rng);
    Tensor zero({3, 3});
    Tensor out = forward_noise(z0, zero, s, 100);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(s.a_coef(100) * z0[i]));
    Tensor eps = randn({3, 3}, rng);
    out = forward_noise(zero, eps, s, 100);
    for (std::size_t i = 0; i < out.size(); ++i)
        CHECK(out[i] == doctest::Approx(s.s_coef(100) * eps[i]));
}

TEST_CASE("forward_noise matches a scalar-loop oracle at t=250") {
    const auto& s = default_sched();
    Rng rng(2);
    Tensor z0 = randn({3, 3}, rng), eps = randn({3, 3}, rng);
    Tensor out = forward_noise(z0, eps, s, 250);
    const double a = std::sqrt(s.alpha_bar(250));
    const double sg = std::sqrt(1.0 - s.alpha_bar(250));
    for (int r = 0; r < 3; ++r)
        for (int c = 0; c < 3; ++c)
            CHECK(out.at(r, c) == doctest::Approx(a * z0.at(r, c) + sg * eps.at(r, c)));
}

TEST_CASE("shape mismatch is rejected") {
    const auto& s = default_sched();
    Tensor a({2, 2}), b({3, 3});
    CHECK_THROWS_AS(forward_noise(a, b, s, 1), UsageError);
    CHECK_THROWS_AS(v_target(a, b, s, 1), UsageError);
    CHECK_THROWS_AS(eps_from_v(a, b, s, 1), UsageError);
    CHECK_THROWS_AS(z0_from_v(a, b, s, 1), UsageError);
    CHECK_THROWS_AS(z0_from_eps(a, b, s, 1), UsageError);
    CHECK_THROWS_AS(forward_noise(a, a, s, 0), UsageError);
    CHECK_THROWS_AS(forward_noise(a, a, s, 501), UsageError);
}

TEST_CASE("ancestral_step: exact inversion at t=1 and algebraic reduction") {
    const auto& s = default_sched();
    Rng rng(3);
    Tensor z0 = randn({4, 4}, rng), eps = randn({4, 4}, rng), zero({4, 4});
    Tensor z1 = forward_noise(z0, eps, s, 1);
    Tensor back = ancestral_step(z1, eps, zero, s, 1);
    CHECK(max_abs_diff(back, z0) < 1e-5);

    Tensor zt = randn({4, 4}, rng);
    Tensor red = ancestral_step(zt, zero, zero, s, 100);
    for (std::size_t i = 0; i < red.size(); ++i)
        CHECK(red[i] == doctest::Approx(zt[i] / std::sqrt(s.alpha(100))));
}

// "Ground-truth eps" at step t is the noise implied by the current state,
// (z_t - sqrt(abar_t) z0) / sqrt(1 - abar_t): what an exact denoiser would
// predict. With tau = 0 the chain contracts onto z0 and the alpha_bar_0 = 1
// convention makes the final step remove the residual noise exactly.
TEST_CASE("exact-eps chain oracle reconstructs z0 on an 8x8 tensor") {
    const auto& s = default_sched();
    Rng rng(4);
    Tensor z0 = randn({8, 8}, rng), eps = randn({8, 8}, rng), zero({8, 8});
    Tensor z = forward_noise(z0, eps, s, s.T());
    for (int t = s.T(); t >= 1; --t) {
        Tensor eps_t(z.shape());
        for (std::size_t i = 0; i < z.size(); ++i)
            eps_t[i] = (z[i] - s.a_coef(t) * z0[i]) / s.s_coef(t);
        z = ancestral_step(z, eps_t, zero, s, t);
    }
    CHECK(max_abs_diff(z, z0) < 1e-3);
}

TEST_CASE("v_target trivials and scalar-loop oracle at t=100") {
    const auto& s = default_sched();
    Rng rng(5);
    Tensor eps = randn({4, 4}, rng), zero({4, 4});
    Tensor v = v_target(zero, eps, s, 100);
    for (std::size_t i = 0; i < v.size(); ++i)
        CHECK(v[i] == doctest::Approx(s.a_coef(100) * eps[i]));

    // small-beta limit: at t=1 with beta_1 = 1e-4, v ~ eps
    Tensor z0 = randn({4, 4}, rng);
    Tensor v1 = v_target(z0, eps, s, 1);
    for (std::size_t i = 0; i < v1.size(); ++i)
        CHECK(std::abs(v1[i] - eps[i]) < 0.02 * std::abs(eps[i]) + 0.02);

    Tensor vv = v_target(z0, eps, s, 100);
    const double a = std::sqrt(s.alpha_bar(100)), sg = std::sqrt(1.0 - s.alpha_bar(100));
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c)
            CHECK(vv.at(r, c) == doctest::Approx(a * eps.at(r, c) - sg * z0.at(r, c)));
}

TEST_CASE("recovery identities: eps_from_v and z0_from_v on 100 random triples") {
    const auto& s = default_sched();
    Rng rng(6);
    for (int trial = 0; trial < 100; ++trial) {
        const int t = rng.uniform_int(1, s.T());
        Tensor z0 = randn({5, 3}, rng), eps = randn({5, 3}, rng);
        Tensor zt = forward_noise(z0, eps, s, t);
        Tensor v = v_target(z0, eps, s, t);
        CHECK(max_abs_diff(eps_from_v(zt, v, s, t), eps) < 1e-5);
        CHECK(max_abs_diff(z0_from_v(zt, v, s, t), z0) < 1e-5);
    }
}

TEST_CASE("eps_from_v / z0_from_v / z0_from_eps scalar-loop oracles") {
    const auto& s = default_sched();
    Rng rng(7);
    const int t = 321;
    const double a = std::sqrt(s.alpha_bar(t)), sg = std::sqrt(1.0 - s.alpha_bar(t));
    Tensor zt = randn({4, 4}, rng), v = randn({4, 4}, rng), eps = randn({4, 4}, rng);
    Tensor e = eps_from_v(zt, v, s, t);
    Tensor z0v = z0_from_v(zt, v, s, t);
    Tensor z0e = z0_from_eps(zt, eps, s, t);
    for (int r = 0; r < 4; ++r)
        for (int c = 0; c < 4; ++c) {
            CHECK(e.at(r, c) == doctest::Approx(sg * zt.at(r, c) + a * v.at(r, c)));
            CHECK(z0v.at(r, c) == doctest::Approx(a * zt.at(r, c) - sg * v.at(r, c)));
            CHECK(z0e.at(r, c) == doctest::Approx((zt.at(r, c) - sg * eps.at(r, c)) / a));
        }
    // zero cases
    Tensor zero({4, 4});
    CHECK(max_abs_diff(eps_from_v(zero, zero, s, t), zero) == 0.0);
    Tensor z0null = z0_from_v(zt, zero, s, t);
    for (std::size_t i = 0; i < z0null.size(); ++i)
        CHECK(z0null[i] == doctest::Approx(a * zt[i]));
    Tensor zchk = z0_from_eps(zt, zero, s, t);
    for (std::size_t i = 0; i < zchk.size(); ++i) CHECK(zchk[i] == doctest::Approx(zt[i] / a));
}

TEST_CASE("z0_from_eps recovers z0 from the true eps") {
    const auto& s = default_sched();
    Rng rng(8);
    for (int t : {1, 100, 250, 500}) {
        Tensor z0 = randn({4, 4}, rng), eps = randn({4, 4}, rng);
        Tensor zt = forward_noise(z0, eps, s, t);
        CHECK(max_abs_diff(z0_from_eps(zt, eps, s, t), z0) < 1e-5);
    }
}

TEST_CASE("z0_from_eps clamps an underflowing denominator and flags it") {
    // schedule with alpha_bar ~ 1e-40: beta = 0.999 over 25 steps
    std::vector<double> beta(25, 0.999);
    NoiseSchedule s(beta, 0.999, 0.999);
    Tensor zt = Tensor::full({2, 2}, 1.0), eps({2, 2});
    bool clamped = false;
    Tensor out = z0_from_eps(zt, eps, s, 25, &clamped);
    CHECK(clamped);
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == doctest::Approx(1e8));
}

TEST_CASE("training_target dispatches on the parameterization") {
    const auto& s = default_sched();
    Rng rng(9);
    Tensor z0 = randn({3, 3}, rng), eps = randn({3, 3}, rng);
    Tensor te = training_target(ParamKind::Epsilon, z0, eps, s, 77);
    CHECK(max_abs_diff(te, eps) == 0.0);
    Tensor tv = training_target(ParamKind::V, z0, eps, s, 77);
    CHECK(max_abs_diff(tv, v_target(z0, eps, s, 77)) == 0.0);
}

TEST_CASE("alpha^2 + sigma^2 = 1 at every step") {
    const auto& s = default_sched();
    for (int t = 1; t <= s.T(); ++t) {
        const double a = s.a_coef(t), sg = s.s_coef(t);
        CHECK(std::abs(a * a + sg * sg - 1.0) < 1e-6);
    }
}

TEST_CASE("ancestral chain with ground-truth eps, property over random tensors") {
    const auto& s = default_sched();
    Rng rng(10);
    for (int trial = 0; trial < 5; ++trial) {
        Tensor z0 = randn({6, 6}, rng), eps = randn({6, 6}, rng), zero({6, 6});
        Tensor z = forward_noise(z0, eps, s, s.T());
        for (int t = s.T(); t >= 1; --t) {
            Tensor eps_t(z.shape());
            for (std::size_t i = 0; i < z.size(); ++i)
                eps_t[i] = (z[i] - s.a_coef(t) * z0[i]) / s.s_coef(t);
            z = ancestral_step(z, eps_t, zero, s, t);
        }
        CHECK(max_abs_diff(z, z0) < 1e-3);
    }
}
