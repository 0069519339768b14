// Benchmark of the OpenMP kernels against their serial reference
// implementations. Prints per-kernel timing, GFLOP/s, and speedup.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <vector>

#include "compdiff/grf.hpp"
#include "compdiff/kernels.hpp"
#include "compdiff/pde.hpp"
#include "compdiff/rng.hpp"

using namespace compdiff;
namespace k = compdiff::kernels;

namespace {

double time_it(const std::function<void()>& fn, int reps) {
    fn();  // warm-up
    const auto t0 = std::chrono::steady_clock::now();
    for (int i = 0; i < reps; ++i) fn();
    const auto t1 = std::chrono::steady_clock::now();
    return std::chrono::duration<double>(t1 - t0).count() / reps;
}

void report(const char* name, double flops, double t_ref, double t_par) {
    std::printf("%-28s ref %9.3f ms (%6.2f GF/s)   omp %9.3f ms (%6.2f GF/s)   speedup %.2fx\n",
                name, t_ref * 1e3, flops / t_ref * 1e-9, t_par * 1e3, flops / t_par * 1e-9,
                t_ref / t_par);
}

std::vector<double> randn(std::size_t n, Rng& rng) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.normal();
    return v;
}

}  // namespace

int main(int argc, char** argv) {
    if (argc > 1) k::set_threads(std::atoi(argv[1]));
    std::printf("threads: %d\n\n", k::threads());
    Rng rng(7);

    {  // 3x3 convolution forward/backward, UNet-like shape
        const k::ConvDims d{16, 16, 64, 20, 16, 3, 1, 1};
        const auto x = randn(static_cast<std::size_t>(d.B) * d.Ci * d.H * d.W, rng);
        const auto w = randn(static_cast<std::size_t>(d.Co) * d.Ci * 9, rng);
        const auto b = randn(d.Co, rng);
        std::vector<double> y(static_cast<std::size_t>(d.B) * d.Co * d.Ho() * d.Wo());
        const double flops = 2.0 * d.B * d.Co * d.Ho() * d.Wo() * d.Ci * 9;
        const double tr = time_it([&] { k::ref::conv2d_forward(d, x.data(), w.data(), b.data(), y.data()); }, 3);
        const double tp = time_it([&] { k::par::conv2d_forward(d, x.data(), w.data(), b.data(), y.data()); }, 10);
        report("conv2d fwd 16x16x64x20", flops, tr, tp);

        std::vector<double> gy = randn(y.size(), rng), gx(x.size()), gw(w.size()), gb(d.Co);
        const double trb = time_it([&] {
            std::fill(gw.begin(), gw.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            k::ref::conv2d_backward(d, x.data(), w.data(), gy.data(), gx.data(), gw.data(), gb.data());
        }, 2);
        const double tpb = time_it([&] {
            std::fill(gw.begin(), gw.end(), 0.0);
            std::fill(gb.begin(), gb.end(), 0.0);
            k::par::conv2d_backward(d, x.data(), w.data(), gy.data(), gx.data(), gw.data(), gb.data());
        }, 6);
        report("conv2d bwd 16x16x64x20", 3.0 * flops, trb, tpb);
    }

    {  // attention core at a mid-stage resolution
        const int C = 16, n = 320;
        const auto q = randn(static_cast<std::size_t>(C) * n, rng);
        const auto kk = randn(static_cast<std::size_t>(C) * n, rng);
        const auto v = randn(static_cast<std::size_t>(C) * n, rng);
        std::vector<double> probs(static_cast<std::size_t>(n) * n), out(static_cast<std::size_t>(C) * n);
        const double flops = 2.0 * n * n * C * 2;
        const double tr = time_it([&] { k::ref::attention_forward(C, n, q.data(), kk.data(), v.data(), probs.data(), out.data()); }, 5);
        const double tp = time_it([&] { k::par::attention_forward(C, n, q.data(), kk.data(), v.data(), probs.data(), out.data()); }, 20);
        report("attention fwd C16 n320", flops, tr, tp);
    }

    {  // group norm
        const int B = 16, C = 32, HW = 16 * 5, G = 8;
        const auto x = randn(static_cast<std::size_t>(B) * C * HW, rng);
        std::vector<double> gamma(C, 1.0), beta(C, 0.0), y(x.size()), mean(B * G), var(B * G);
        const double flops = 4.0 * x.size();
        const double tr = time_it([&] { k::ref::groupnorm_forward(B, C, HW, G, 1e-5, x.data(), gamma.data(), beta.data(), y.data(), mean.data(), var.data()); }, 20);
        const double tp = time_it([&] { k::par::groupnorm_forward(B, C, HW, G, 1e-5, x.data(), gamma.data(), beta.data(), y.data(), mean.data(), var.data()); }, 50);
        report("groupnorm fwd", flops, tr, tp);
    }

    {  // spectral mode mixing, FNO-like
        const int Ci = 32, Co = 32, n0 = 64, n1 = 20, mt = 16, mx = 10;
        std::vector<std::complex<double>> xs(static_cast<std::size_t>(Ci) * n0 * n1);
        std::vector<std::complex<double>> ys(static_cast<std::size_t>(Co) * n0 * n1);
        std::vector<std::complex<double>> w(static_cast<std::size_t>(Ci) * Co * 2 * mt * mx);
        for (auto& c : xs) c = {rng.normal(), rng.normal()};
        for (auto& c : w) c = {rng.normal(), rng.normal()};
        const double flops = 8.0 * Ci * Co * 2 * mt * mx * 2;  // main + mirror
        const double tr = time_it([&] { k::ref::spectral_mix_forward(Ci, Co, n0, n1, mt, mx, xs.data(), w.data(), ys.data()); }, 5);
        const double tp = time_it([&] { k::par::spectral_mix_forward(Ci, Co, n0, n1, mt, mx, xs.data(), w.data(), ys.data()); }, 20);
        report("spectral mix 32x32 m16x10", flops, tr, tp);
    }

    {  // coupled solves, sample-parallel vs serial
        SystemParams sys = SystemParams::defaults(SystemId::ReactionDiffusion,
                                                  SystemParams::default_grid(SystemId::ReactionDiffusion, 20, 64));
        const int n = 32;
        std::vector<std::vector<std::vector<double>>> ics(n);
        for (int i = 0; i < n; ++i) {
            GrfParams gp = GrfParams::defaults(sys.grid, 100 + i);
            ics[i] = {grf_sample_1d(sys.grid, gp), grf_sample_1d(sys.grid, gp)};
        }
        const double t_serial = time_it([&] {
            for (int i = 0; i < n; ++i) solve_coupled(sys, ics[i]);
        }, 1);
        const double t_par = time_it([&] {
#pragma omp parallel for schedule(dynamic)
            for (int i = 0; i < n; ++i) solve_coupled(sys, ics[i]);
        }, 3);
        std::printf("%-28s ref %9.3f ms               omp %9.3f ms               speedup %.2fx\n",
                    "rd solve x32 (sample-par)", t_serial * 1e3, t_par * 1e3, t_serial / t_par);
    }

    return 0;
}
