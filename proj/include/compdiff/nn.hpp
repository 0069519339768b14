#pragma once

#include <memory>
#include <string>
#include <vector>

#include "compdiff/kernels.hpp"
#include "compdiff/rng.hpp"
#include "compdiff/tensor.hpp"

namespace compdiff::nn {

// Named parameter with gradient, Adam moments, and an EMA shadow.
struct Param {
    std::string name;
    Tensor w, g, m, v, ema;

    explicit Param(std::string n, std::vector<int> shape)
        : name(std::move(n)), w(shape), g(shape), m(shape), v(shape), ema(shape) {}
    std::size_t size() const { return w.size(); }
};

class ParamStore {
public:
    Param& add(const std::string& name, std::vector<int> shape) {
        items_.push_back(std::make_unique<Param>(name, std::move(shape)));
        return *items_.back();
    }
    std::vector<std::unique_ptr<Param>>& items() { return items_; }
    const std::vector<std::unique_ptr<Param>>& items() const { return items_; }
    Param* find(const std::string& name) {
        for (auto& p : items_)
            if (p->name == name) return p.get();
        return nullptr;
    }
    std::size_t total_size() const {
        std::size_t n = 0;
        for (const auto& p : items_) n += p->size();
        return n;
    }
    void zero_grads() {
        for (auto& p : items_) p->g.fill(0.0);
    }
    void init_ema_from_weights() {
        for (auto& p : items_) p->ema = p->w;
    }

private:
    std::vector<std::unique_ptr<Param>> items_;
};

// Fan-in scaled uniform init, U[-1/sqrt(fan_in), 1/sqrt(fan_in)].
inline void init_fan_in(Tensor& w, int fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = 0; i < w.size(); ++i) w[i] = bound * (2.0 * rng.uniform() - 1.0);
}

// 2-d convolution layer; x and y are (B, C, H, W).
struct Conv {
    Param *W = nullptr, *b = nullptr;
    int ci = 0, co = 0, k = 3, stride = 1, pad = 1;
    Tensor x_cache;

    void init(ParamStore& store, const std::string& name, int ci_, int co_, int k_, int stride_,
              Rng& rng, bool zero_init = false) {
        ci = ci_;
        co = co_;
        k = k_;
        stride = stride_;
        pad = k_ / 2;
        W = &store.add(name + ".weight", {co, ci, k, k});
        b = &store.add(name + ".bias", {co});
        if (!zero_init) init_fan_in(W->w, ci * k * k, rng);
    }

    Tensor forward(const Tensor& x) {
        x_cache = x;
        kernels::ConvDims d{x.dim(0), ci, x.dim(2), x.dim(3), co, k, stride, pad};
        Tensor y({x.dim(0), co, d.Ho(), d.Wo()});
        kernels::par::conv2d_forward(d, x.data(), W->w.data(), b->w.data(), y.data());
        return y;
    }

    Tensor backward(const Tensor& gy) {
        kernels::ConvDims d{x_cache.dim(0), ci, x_cache.dim(2), x_cache.dim(3), co, k, stride, pad};
        Tensor gx(x_cache.shape());
        kernels::par::conv2d_backward(d, x_cache.data(), W->w.data(), gy.data(), gx.data(),
                                      W->g.data(), b->g.data());
        return gx;
    }
};

// Group normalization layer; group count clamps to the channel count.
struct GroupNorm {
    Param *gamma = nullptr, *beta = nullptr;
    int C = 0, groups = 1;
    double eps = 1e-5;
    Tensor x_cache, mean, var;

    void init(ParamStore& store, const std::string& name, int C_, int groups_) {
        C = C_;
        groups = std::min(groups_, C_);
        while (C % groups) --groups;  // need even channel split
        gamma = &store.add(name + ".gamma", {C});
        beta = &store.add(name + ".beta", {C});
        gamma->w.fill(1.0);
    }

    Tensor forward(const Tensor& x) {
        x_cache = x;
        const int B = x.dim(0), HW = x.dim(2) * x.dim(3);
        Tensor y(x.shape());
        mean = Tensor({B, groups});
        var = Tensor({B, groups});
        kernels::par::groupnorm_forward(B, C, HW, groups, eps, x.data(), gamma->w.data(),
                                        beta->w.data(), y.data(), mean.data(), var.data());
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = x_cache.dim(0), HW = x_cache.dim(2) * x_cache.dim(3);
        Tensor gx(x_cache.shape());
        kernels::par::groupnorm_backward(B, C, HW, groups, eps, x_cache.data(), gamma->w.data(),
                                         mean.data(), var.data(), gy.data(), gx.data(),
                                         gamma->g.data(), beta->g.data());
        return gx;
    }
};

// Dense layer on (B, in) tensors.
struct Linear {
    Param *W = nullptr, *b = nullptr;
    int in = 0, out = 0;
    Tensor x_cache;

    void init(ParamStore& store, const std::string& name, int in_, int out_, Rng& rng,
              bool zero_init = false) {
        in = in_;
        out = out_;
        W = &store.add(name + ".weight", {out, in});
        b = &store.add(name + ".bias", {out});
        if (!zero_init) init_fan_in(W->w, in, rng);
    }

    Tensor forward(const Tensor& x) {
        x_cache = x;
        const int B = x.dim(0);
        Tensor y({B, out});
        for (int bi = 0; bi < B; ++bi)
            for (int o = 0; o < out; ++o) {
                double acc = b->w[o];
                const double* xr = x.data() + static_cast<std::size_t>(bi) * in;
                const double* wr = W->w.data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) acc += wr[i] * xr[i];
                y[static_cast<std::size_t>(bi) * out + o] = acc;
            }
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = x_cache.dim(0);
        Tensor gx({B, in});
        for (int bi = 0; bi < B; ++bi) {
            const double* gr = gy.data() + static_cast<std::size_t>(bi) * out;
            const double* xr = x_cache.data() + static_cast<std::size_t>(bi) * in;
            double* gxr = gx.data() + static_cast<std::size_t>(bi) * in;
            for (int o = 0; o < out; ++o) {
                const double g = gr[o];
                b->g[o] += g;
                double* wgr = W->g.data() + static_cast<std::size_t>(o) * in;
                const double* wr = W->w.data() + static_cast<std::size_t>(o) * in;
                for (int i = 0; i < in; ++i) {
                    wgr[i] += g * xr[i];
                    gxr[i] += g * wr[i];
                }
            }
        }
        return gx;
    }
};

struct SiLU {
    Tensor x_cache;
    Tensor forward(const Tensor& x) {
        x_cache = x;
        Tensor y(x.shape());
        kernels::par::silu_forward(x.size(), x.data(), y.data());
        return y;
    }
    Tensor backward(const Tensor& gy) {
        Tensor gx(x_cache.shape());
        kernels::par::silu_backward(x_cache.size(), x_cache.data(), gy.data(), gx.data());
        return gx;
    }
};

}  // namespace compdiff::nn
