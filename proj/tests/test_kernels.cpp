#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "compdiff/kernels.hpp"
#include "compdiff/rng.hpp"

using namespace compdiff;
namespace k = compdiff::kernels;

namespace {

std::vector<double> randn(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

double rel_diff(const std::vector<double>& a, const std::vector<double>& b) {
    double num = 0.0, den = 1e-300;
    for (std::size_t i = 0; i < a.size(); ++i) {
        num = std::max(num, std::abs(a[i] - b[i]));
        den = std::max(den, std::abs(b[i]));
    }
    return num / den;
}

}  // namespace

TEST_CASE("conv2d par matches ref on stride 1 and stride 2") {
    Rng rng(21);
    for (const auto& d : {k::ConvDims{2, 3, 9, 7, 5, 3, 1, 1}, k::ConvDims{2, 4, 8, 6, 6, 3, 2, 1},
                          k::ConvDims{1, 5, 7, 11, 4, 1, 1, 0}, k::ConvDims{3, 2, 10, 10, 8, 3, 1, 1}}) {
        const auto x = randn(static_cast<std::size_t>(d.B) * d.Ci * d.H * d.W, rng);
        const auto w = randn(static_cast<std::size_t>(d.Co) * d.Ci * d.K * d.K, rng);
        const auto b = randn(d.Co, rng);
        std::vector<double> y1(static_cast<std::size_t>(d.B) * d.Co * d.Ho() * d.Wo()), y2 = y1;
        k::ref::conv2d_forward(d, x.data(), w.data(), b.data(), y1.data());
        k::par::conv2d_forward(d, x.data(), w.data(), b.data(), y2.data());
        CHECK(rel_diff(y2, y1) < 1e-13);

        const auto gy = randn(y1.size(), rng);
        std::vector<double> gx1(x.size()), gw1(w.size()), gb1(d.Co);
        std::vector<double> gx2(x.size()), gw2(w.size()), gb2(d.Co);
        k::ref::conv2d_backward(d, x.data(), w.data(), gy.data(), gx1.data(), gw1.data(),
                                gb1.data());
        k::par::conv2d_backward(d, x.data(), w.data(), gy.data(), gx2.data(), gw2.data(),
                                gb2.data());
        CHECK(rel_diff(gx2, gx1) < 1e-12);
        CHECK(rel_diff(gw2, gw1) < 1e-12);
        CHECK(rel_diff(gb2, gb1) < 1e-12);
    }
}

TEST_CASE("conv2d backward agrees with central finite differences") {
    Rng rng(22);
    const k::ConvDims d{1, 2, 6, 5, 3, 3, 1, 1};
    auto x = randn(static_cast<std::size_t>(d.B) * d.Ci * d.H * d.W, rng);
    auto w = randn(static_cast<std::size_t>(d.Co) * d.Ci * 9, rng);
    auto b = randn(d.Co, rng);
    const auto r = randn(static_cast<std::size_t>(d.B) * d.Co * d.Ho() * d.Wo(), rng);

    auto loss = [&]() {
        std::vector<double> y(r.size());
        k::ref::conv2d_forward(d, x.data(), w.data(), b.data(), y.data());
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
        return s;
    };
    std::vector<double> gx(x.size()), gw(w.size()), gb(d.Co);
    k::par::conv2d_backward(d, x.data(), w.data(), r.data(), gx.data(), gw.data(), gb.data());

    const double h = 1e-6;
    for (std::size_t i : {std::size_t(0), std::size_t(7), x.size() - 1}) {
        const double keep = x[i];
        x[i] = keep + h;
        const double lp = loss();
        x[i] = keep - h;
        const double lm = loss();
        x[i] = keep;
        CHECK(gx[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-6));
    }
    for (std::size_t i : {std::size_t(0), std::size_t(11), w.size() - 1}) {
        const double keep = w[i];
        w[i] = keep + h;
        const double lp = loss();
        w[i] = keep - h;
        const double lm = loss();
        w[i] = keep;
        CHECK(gw[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("groupnorm par matches ref and finite differences") {
    Rng rng(23);
    const int B = 3, C = 8, HW = 20, G = 4;
    auto x = randn(static_cast<std::size_t>(B) * C * HW, rng);
    auto gamma = randn(C, rng);
    auto beta = randn(C, rng);
    std::vector<double> y1(x.size()), y2(x.size()), mean(B * G), var(B * G);
    k::ref::groupnorm_forward(B, C, HW, G, 1e-5, x.data(), gamma.data(), beta.data(), y1.data(),
                              mean.data(), var.data());
    k::par::groupnorm_forward(B, C, HW, G, 1e-5, x.data(), gamma.data(), beta.data(), y2.data(),
                              mean.data(), var.data());
    CHECK(rel_diff(y2, y1) < 1e-12);

    const auto r = randn(x.size(), rng);
    std::vector<double> gx1(x.size()), gg1(C, 0.0), gb1(C, 0.0);
    std::vector<double> gx2(x.size()), gg2(C, 0.0), gb2(C, 0.0);
    k::ref::groupnorm_backward(B, C, HW, G, 1e-5, x.data(), gamma.data(), mean.data(), var.data(),
                               r.data(), gx1.data(), gg1.data(), gb1.data());
    k::par::groupnorm_backward(B, C, HW, G, 1e-5, x.data(), gamma.data(), mean.data(), var.data(),
                               r.data(), gx2.data(), gg2.data(), gb2.data());
    CHECK(rel_diff(gx2, gx1) < 1e-12);
    CHECK(rel_diff(gg2, gg1) < 1e-12);
    CHECK(rel_diff(gb2, gb1) < 1e-12);

    auto loss = [&]() {
        std::vector<double> y(x.size()), m2(B * G), v2(B * G);
        k::ref::groupnorm_forward(B, C, HW, G, 1e-5, x.data(), gamma.data(), beta.data(), y.data(),
                                  m2.data(), v2.data());
        double s = 0.0;
        for (std::size_t i = 0; i < y.size(); ++i) s += y[i] * r[i];
        return s;
    };
    const double h = 1e-6;
    for (std::size_t i : {std::size_t(1), std::size_t(35), x.size() - 2}) {
        const double keep = x[i];
        x[i] = keep + h;
        const double lp = loss();
        x[i] = keep - h;
        const double lm = loss();
        x[i] = keep;
        CHECK(gx1[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-5));
    }
    for (int c : {0, C - 1}) {
        const double keep = gamma[c];
        gamma[c] = keep + h;
        const double lp = loss();
        gamma[c] = keep - h;
        const double lm = loss();
        gamma[c] = keep;
        CHECK(gg1[c] == doctest::Approx((lp - lm) / (2 * h)).epsilon(1e-6));
    }
}

TEST_CASE("attention par matches ref and finite differences") {
    Rng rng(24);
    const int C = 6, n = 18;
    auto q = randn(static_cast<std::size_t>(C) * n, rng);
    auto kk = randn(static_cast<std::size_t>(C) * n, rng);
    auto v = randn(static_cast<std::size_t>(C) * n, rng);
    std::vector<double> p1(static_cast<std::size_t>(n) * n), p2 = p1;
    std::vector<double> o1(static_cast<std::size_t>(C) * n), o2 = o1;
    k::ref::attention_forward(C, n, q.data(), kk.data(), v.data(), p1.data(), o1.data());
    k::par::attention_forward(C, n, q.data(), kk.data(), v.data(), p2.data(), o2.data());
    CHECK(rel_diff(o2, o1) < 1e-12);
    CHECK(rel_diff(p2, p1) < 1e-12);

    const auto r = randn(o1.size(), rng);
    std::vector<double> gq1(q.size()), gk1(q.size()), gv1(q.size());
    std::vector<double> gq2(q.size()), gk2(q.size()), gv2(q.size());
    k::ref::attention_backward(C, n, q.data(), kk.data(), v.data(), p1.data(), r.data(),
                               gq1.data(), gk1.data(), gv1.data());
    k::par::attention_backward(C, n, q.data(), kk.data(), v.data(), p1.data(), r.data(),
                               gq2.data(), gk2.data(), gv2.data());
    CHECK(rel_diff(gq2, gq1) < 1e-11);
    CHECK(rel_diff(gk2, gk1) < 1e-11);
    CHECK(rel_diff(gv2, gv1) < 1e-11);

    auto loss = [&]() {
        std::vector<double> p(static_cast<std::size_t>(n) * n), o(o1.size());
        k::ref::attention_forward(C, n, q.data(), kk.data(), v.data(), p.data(), o.data());
        double s = 0.0;
        for (std::size_t i = 0; i < o.size(); ++i) s += o[i] * r[i];
        return s;
    };
    const double h = 1e-6;
    auto fd_check = [&](std::vector<double>& arr, const std::vector<double>& grad) {
        for (std::size_t i : {std::size_t(2), arr.size() / 2, arr.size() - 1}) {
            const double keep = arr[i];
            arr[i] = keep + h;
            const double lp = loss();
            arr[i] = keep - h;
            const double lm = loss();
            arr[i] = keep;
            CHECK(grad[i] == doctest::Approx((lp - lm) / (2 * h)).epsilon(2e-5));
        }
    };
    fd_check(q, gq1);
    fd_check(kk, gk1);
    fd_check(v, gv1);
}

TEST_CASE("silu, gelu, film derivatives agree with finite differences") {
    Rng rng(25);
    const std::size_t N = 64;
    auto x = randn(N, rng);
    const auto r = randn(N, rng);
    std::vector<double> y(N), gx(N);

    k::par::silu_backward(N, x.data(), r.data(), gx.data());
    const double h = 1e-6;
    for (std::size_t i : {std::size_t(0), N / 2, N - 1}) {
        auto f = [&](double xv) { return xv / (1.0 + std::exp(-xv)) * r[i]; };
        CHECK(gx[i] == doctest::Approx((f(x[i] + h) - f(x[i] - h)) / (2 * h)).epsilon(1e-6));
    }
    k::par::gelu_backward(N, x.data(), r.data(), gx.data());
    for (std::size_t i : {std::size_t(1), N / 3, N - 2}) {
        auto f = [&](double xv) {
            return 0.5 * xv * (1.0 + std::erf(xv / std::sqrt(2.0))) * r[i];
        };
        CHECK(gx[i] == doctest::Approx((f(x[i] + h) - f(x[i] - h)) / (2 * h)).epsilon(1e-6));
    }

    // film: scalar-loop oracle
    const int B = 2, C = 3, HW = 5;
    auto xf = randn(static_cast<std::size_t>(B) * C * HW, rng);
    auto gamma = randn(static_cast<std::size_t>(B) * C, rng);
    auto delta = randn(static_cast<std::size_t>(B) * C, rng);
    std::vector<double> yf(xf.size());
    k::par::film_forward(B, C, HW, xf.data(), gamma.data(), delta.data(), yf.data());
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < HW; ++i) {
                const std::size_t idx = (static_cast<std::size_t>(b) * C + c) * HW + i;
                CHECK(yf[idx] ==
                      doctest::Approx((1.0 + gamma[b * C + c]) * xf[idx] + delta[b * C + c]));
            }
}

TEST_CASE("spectral mix par matches ref, forward and backward") {
    Rng rng(26);
    const int Ci = 3, Co = 4, n0 = 12, n1 = 10, mt = 3, mx = 4;
    const std::size_t plane = static_cast<std::size_t>(n0) * n1;
    std::vector<std::complex<double>> xs(Ci * plane), w(static_cast<std::size_t>(Ci) * Co * 2 * mt * mx);
    for (auto& c : xs) c = {rng.normal(), rng.normal()};
    for (auto& c : w) c = {rng.normal(), rng.normal()};
    std::vector<std::complex<double>> y1(Co * plane), y2(Co * plane);
    k::ref::spectral_mix_forward(Ci, Co, n0, n1, mt, mx, xs.data(), w.data(), y1.data());
    k::par::spectral_mix_forward(Ci, Co, n0, n1, mt, mx, xs.data(), w.data(), y2.data());
    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(std::abs(y1[i] - y2[i]) < 1e-12);

    std::vector<std::complex<double>> gy(Co * plane);
    for (auto& c : gy) c = {rng.normal(), rng.normal()};
    std::vector<std::complex<double>> gx1(Ci * plane), gw1(w.size());
    std::vector<std::complex<double>> gx2(Ci * plane), gw2(w.size());
    k::ref::spectral_mix_backward(Ci, Co, n0, n1, mt, mx, xs.data(), w.data(), gy.data(),
                                  gx1.data(), gw1.data());
    k::par::spectral_mix_backward(Ci, Co, n0, n1, mt, mx, xs.data(), w.data(), gy.data(),
                                  gx2.data(), gw2.data());
    for (std::size_t i = 0; i < gx1.size(); ++i) CHECK(std::abs(gx1[i] - gx2[i]) < 1e-12);
    for (std::size_t i = 0; i < gw1.size(); ++i) CHECK(std::abs(gw1[i] - gw2[i]) < 1e-12);
}

TEST_CASE("parallel kernels are bitwise invariant to the thread count") {
    Rng rng(27);
    const k::ConvDims d{2, 4, 12, 10, 8, 3, 1, 1};
    const auto x = randn(static_cast<std::size_t>(d.B) * d.Ci * d.H * d.W, rng);
    const auto w = randn(static_cast<std::size_t>(d.Co) * d.Ci * 9, rng);
    const auto b = randn(d.Co, rng);
    const auto gy = randn(static_cast<std::size_t>(d.B) * d.Co * d.Ho() * d.Wo(), rng);

    std::vector<double> y1(gy.size()), y2(gy.size());
    std::vector<double> gx1(x.size()), gw1(w.size()), gb1(d.Co);
    std::vector<double> gx2(x.size()), gw2(w.size()), gb2(d.Co);

    k::set_threads(1);
    k::par::conv2d_forward(d, x.data(), w.data(), b.data(), y1.data());
    k::par::conv2d_backward(d, x.data(), w.data(), gy.data(), gx1.data(), gw1.data(), gb1.data());
    k::set_threads(2);
    k::par::conv2d_forward(d, x.data(), w.data(), b.data(), y2.data());
    k::par::conv2d_backward(d, x.data(), w.data(), gy.data(), gx2.data(), gw2.data(), gb2.data());
    k::set_threads(0);

    for (std::size_t i = 0; i < y1.size(); ++i) CHECK(y1[i] == y2[i]);
    for (std::size_t i = 0; i < gx1.size(); ++i) CHECK(gx1[i] == gx2[i]);
    for (std::size_t i = 0; i < gw1.size(); ++i) CHECK(gw1[i] == gw2[i]);
    for (std::size_t i = 0; i < gb1.size(); ++i) CHECK(gb1[i] == gb2[i]);
}
