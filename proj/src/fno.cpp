#include "compdiff/fno.hpp"

#include <cmath>
#include <complex>
#include <iostream>

#include "compdiff/fft.hpp"
#include "compdiff/kernels.hpp"

namespace compdiff {

namespace {

using cplx = std::complex<double>;

// Spatial (C,H,W) real block -> (C,H,W) complex spectra, one FFT per channel.
void fft_channels(int C, int H, int W, const double* x, cplx* xs, std::vector<cplx>& scratch) {
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    scratch.resize(plane);
    for (int c = 0; c < C; ++c) {
        for (std::size_t i = 0; i < plane; ++i) scratch[i] = {x[c * plane + i], 0.0};
        fft::c2c_2d(H, W, scratch.data(), xs + c * plane, -1);
    }
}

// Inverse transform, real part, scaled by 1/(H W).
void ifft_channels_real(int C, int H, int W, const cplx* ys, double* y,
                        std::vector<cplx>& scratch) {
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    scratch.resize(plane);
    const double norm = 1.0 / static_cast<double>(plane);
    for (int c = 0; c < C; ++c) {
        fft::c2c_2d(H, W, ys + c * plane, scratch.data(), +1);
        for (std::size_t i = 0; i < plane; ++i) y[c * plane + i] = scratch[i].real() * norm;
    }
}

}  // namespace

FnoConfig FnoConfig::clamped_to(const GridSpec& g) const {
    FnoConfig c = *this;
    if (c.modes_t > g.nt / 2) {
        std::cerr << "fno: clamping modes_t " << c.modes_t << " -> " << g.nt / 2
                  << " (Nyquist limit of nt = " << g.nt << ")\n";
        c.modes_t = g.nt / 2;
    }
    if (c.modes_x > g.nx / 2) {
        std::cerr << "fno: clamping modes_x " << c.modes_x << " -> " << g.nx / 2
                  << " (Nyquist limit of nx = " << g.nx << ")\n";
        c.modes_x = g.nx / 2;
    }
    return c;
}

void FnoConfig::validate() const {
    if (modes_t < 1 || modes_x < 1) throw UsageError("FnoConfig: modes must be positive");
    if (width < 1 || n_layers < 1) throw UsageError("FnoConfig: width/layers must be positive");
}

Tensor spectral_conv2d(const Tensor& x, const Tensor& weights_ri, int modes_t, int modes_x) {
    if (x.ndim() != 4) throw UsageError("spectral_conv2d: x must be (B,C,H,W)");
    if (weights_ri.ndim() != 5 || weights_ri.dim(2) != 2 * modes_t ||
        weights_ri.dim(3) != modes_x || weights_ri.dim(4) != 2)
        throw UsageError("spectral_conv2d: weights must be (Ci,Co,2*modes_t,modes_x,2)");
    const int B = x.dim(0), Ci = x.dim(1), H = x.dim(2), W = x.dim(3);
    const int Co = weights_ri.dim(1);
    if (weights_ri.dim(0) != Ci) throw UsageError("spectral_conv2d: channel mismatch");
    if (modes_t > H / 2 || modes_x > W / 2)
        throw UsageError("spectral_conv2d: modes exceed the grid Nyquist limit");
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const cplx* w = reinterpret_cast<const cplx*>(weights_ri.data());

    Tensor y({B, Co, H, W});
    std::vector<cplx> xs(static_cast<std::size_t>(Ci) * plane);
    std::vector<cplx> ys(static_cast<std::size_t>(Co) * plane);
    std::vector<cplx> scratch;
    for (int b = 0; b < B; ++b) {
        fft_channels(Ci, H, W, x.data() + static_cast<std::size_t>(b) * Ci * plane, xs.data(),
                     scratch);
        kernels::par::spectral_mix_forward(Ci, Co, H, W, modes_t, modes_x, xs.data(), w,
                                           ys.data());
        ifft_channels_real(Co, H, W, ys.data(),
                           y.data() + static_cast<std::size_t>(b) * Co * plane, scratch);
    }
    return y;
}

namespace {

// One Fourier layer with cached spectra for the backward pass.
struct SpectralLayer {
    nn::Param* W = nullptr;  // (Ci, Co, 2mt, mx, 2)
    int ci = 0, co = 0, mt = 0, mx = 0;
    Tensor x_cache;
    std::vector<cplx> xs_cache;  // (B, Ci, H, W) spectra

    void init(nn::ParamStore& store, const std::string& name, int ci_, int co_, int mt_, int mx_,
              Rng& rng) {
        ci = ci_;
        co = co_;
        mt = mt_;
        mx = mx_;
        W = &store.add(name + ".spectral_weight", {ci, co, 2 * mt, mx, 2});
        // Scaled complex init, 1/(ci*co) as in reference Fourier-operator stacks.
        const double scale = 1.0 / (static_cast<double>(ci) * co);
        for (std::size_t i = 0; i < W->w.size(); ++i)
            W->w[i] = scale * (2.0 * rng.uniform() - 1.0);
    }

    Tensor forward(const Tensor& x) {
        x_cache = x;
        const int B = x.dim(0), H = x.dim(2), Wd = x.dim(3);
        const std::size_t plane = static_cast<std::size_t>(H) * Wd;
        xs_cache.assign(static_cast<std::size_t>(B) * ci * plane, cplx{0.0, 0.0});
        Tensor y({B, co, H, Wd});
        const cplx* w = reinterpret_cast<const cplx*>(W->w.data());
#pragma omp parallel
        {
            std::vector<cplx> ys(static_cast<std::size_t>(co) * plane);
            std::vector<cplx> scratch;
#pragma omp for schedule(static)
            for (int b = 0; b < B; ++b) {
                cplx* xs = xs_cache.data() + static_cast<std::size_t>(b) * ci * plane;
                fft_channels(ci, H, Wd, x.data() + static_cast<std::size_t>(b) * ci * plane, xs,
                             scratch);
                kernels::ref::spectral_mix_forward(ci, co, H, Wd, mt, mx, xs, w, ys.data());
                ifft_channels_real(co, H, Wd, ys.data(),
                                   y.data() + static_cast<std::size_t>(b) * co * plane, scratch);
            }
        }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = x_cache.dim(0), H = x_cache.dim(2), Wd = x_cache.dim(3);
        const std::size_t plane = static_cast<std::size_t>(H) * Wd;
        const std::size_t wsize = W->w.size() / 2;  // complex count
        const cplx* w = reinterpret_cast<const cplx*>(W->w.data());
        Tensor gx(x_cache.shape());
        // Per-sample weight-gradient partials, reduced in sample order so the
        // result is independent of the thread count.
        std::vector<std::vector<cplx>> gw_partial(B);
#pragma omp parallel
        {
            std::vector<cplx> gys(static_cast<std::size_t>(co) * plane);
            std::vector<cplx> gxs(static_cast<std::size_t>(ci) * plane);
            std::vector<cplx> scratch;
            std::vector<cplx> tmp(plane);
#pragma omp for schedule(static)
            for (int b = 0; b < B; ++b) {
                gw_partial[b].assign(wsize, cplx{0.0, 0.0});
                const double norm = 1.0 / static_cast<double>(plane);
                // dL/dY_spec = (1/n) FFT(gy)
                for (int c = 0; c < co; ++c) {
                    const double* gr = gy.data() + (static_cast<std::size_t>(b) * co + c) * plane;
                    scratch.resize(plane);
                    for (std::size_t i = 0; i < plane; ++i) scratch[i] = {gr[i] * norm, 0.0};
                    fft::c2c_2d(H, Wd, scratch.data(), gys.data() + c * plane, -1);
                }
                kernels::ref::spectral_mix_backward(
                    ci, co, H, Wd, mt, mx,
                    xs_cache.data() + static_cast<std::size_t>(b) * ci * plane, w, gys.data(),
                    gxs.data(), gw_partial[b].data());
                // dL/dx = Re(unnormalized inverse FFT of dL/dX_spec)
                for (int c = 0; c < ci; ++c) {
                    fft::c2c_2d(H, Wd, gxs.data() + c * plane, tmp.data(), +1);
                    double* gxr = gx.data() + (static_cast<std::size_t>(b) * ci + c) * plane;
                    for (std::size_t i = 0; i < plane; ++i) gxr[i] = tmp[i].real();
                }
            }
        }
        cplx* gw = reinterpret_cast<cplx*>(W->g.data());
        for (int b = 0; b < B; ++b)
            for (std::size_t i = 0; i < wsize; ++i) gw[i] += gw_partial[b][i];
        return gx;
    }
};

struct GeluAct {
    Tensor x_cache;
    Tensor forward(const Tensor& x) {
        x_cache = x;
        Tensor y(x.shape());
        kernels::par::gelu_forward(x.size(), x.data(), y.data());
        return y;
    }
    Tensor backward(const Tensor& gy) {
        Tensor gx(x_cache.shape());
        kernels::par::gelu_backward(x_cache.size(), x_cache.data(), gy.data(), gx.data());
        return gx;
    }
};

}  // namespace

struct Fno::Impl {
    FnoConfig cfg;
    nn::ParamStore store;
    std::vector<Tensor> raw_backup;

    nn::Conv lift;
    std::vector<SpectralLayer> spec;
    std::vector<nn::Conv> bypass;
    std::vector<GeluAct> act;
    nn::Conv proj1, proj2;
    GeluAct proj_act;

    explicit Impl(const FnoConfig& c, std::uint64_t seed) : cfg(c) {
        cfg.validate();
        Rng rng(derive_seed(seed, 0xf40u));
        lift.init(store, "lift", cfg.in_channels, cfg.width, 1, 1, rng);
        spec.resize(cfg.n_layers);
        bypass.resize(cfg.n_layers);
        act.resize(cfg.n_layers);
        for (int l = 0; l < cfg.n_layers; ++l) {
            spec[l].init(store, "layer" + std::to_string(l), cfg.width, cfg.width, cfg.modes_t,
                         cfg.modes_x, rng);
            bypass[l].init(store, "layer" + std::to_string(l) + ".bypass", cfg.width, cfg.width, 1,
                           1, rng);
        }
        proj1.init(store, "proj1", cfg.width, 4 * cfg.width, 1, 1, rng);
        proj2.init(store, "proj2", 4 * cfg.width, cfg.out_channels, 1, 1, rng);
        store.init_ema_from_weights();
    }

    Tensor forward(const Tensor& x) {
        if (x.ndim() != 4 || x.dim(1) != cfg.in_channels)
            throw UsageError("Fno::forward: expected (B," + std::to_string(cfg.in_channels) +
                             ",H,W), got " + shape_str(x));
        if (cfg.modes_t > x.dim(2) / 2 || cfg.modes_x > x.dim(3) / 2)
            throw UsageError("Fno::forward: modes exceed the grid Nyquist limit");
        Tensor h = lift.forward(x);
        for (int l = 0; l < cfg.n_layers; ++l) {
            Tensor s = spec[l].forward(h);
            Tensor p = bypass[l].forward(h);
            for (std::size_t i = 0; i < s.size(); ++i) s[i] += p[i];
            h = (l + 1 < cfg.n_layers) ? act[l].forward(s) : std::move(s);
        }
        h = proj2.forward(proj_act.forward(proj1.forward(h)));
        return h;
    }

    void backward(const Tensor& gy) {
        Tensor g = proj1.backward(proj_act.backward(proj2.backward(gy)));
        for (int l = cfg.n_layers - 1; l >= 0; --l) {
            if (l + 1 < cfg.n_layers) g = act[l].backward(g);
            Tensor gs = spec[l].backward(g);
            Tensor gp = bypass[l].backward(g);
            for (std::size_t i = 0; i < gs.size(); ++i) gs[i] += gp[i];
            g = std::move(gs);
        }
        lift.backward(g);
    }
};

Fno::Fno(const FnoConfig& cfg, std::uint64_t init_seed)
    : impl_(std::make_unique<Impl>(cfg, init_seed)) {}
Fno::~Fno() = default;
Fno::Fno(Fno&&) noexcept = default;

Tensor Fno::forward(const Tensor& x) { return impl_->forward(x); }
void Fno::backward(const Tensor& gy) { impl_->backward(gy); }
nn::ParamStore& Fno::params() { return impl_->store; }
const FnoConfig& Fno::config() const { return impl_->cfg; }

void Fno::use_ema_weights() {
    if (!impl_->raw_backup.empty()) return;
    for (auto& p : impl_->store.items()) {
        impl_->raw_backup.push_back(p->w);
        p->w = p->ema;
    }
}

void Fno::use_raw_weights() {
    if (impl_->raw_backup.empty()) return;
    std::size_t i = 0;
    for (auto& p : impl_->store.items()) p->w = impl_->raw_backup[i++];
    impl_->raw_backup.clear();
}

}  // namespace compdiff
