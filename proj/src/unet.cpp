#include "compdiff/unet.hpp"

#include <cmath>

namespace compdiff {

void UNetConfig::validate() const {
    if (base_channels < 4) throw UsageError("UNetConfig: base_channels must be >= 4");
    if (out_channels != 1) throw UsageError("UNetConfig: out_channels must be 1");
    if (in_channels < 1) throw UsageError("UNetConfig: in_channels must be >= 1");
    if (embed() % 2) throw UsageError("UNetConfig: embedding dim must be even");
    for (int s : attention_stages)
        if (s < 0 || s > 2) throw UsageError("UNetConfig: attention stages must be in {0,1,2}");
}

std::vector<double> sinusoidal_embed(int t, int dim) {
    if (dim % 2) throw UsageError("sinusoidal_embed: dim must be even");
    std::vector<double> e(dim);
    for (int j = 0; j < dim / 2; ++j) {
        const double w = std::pow(10000.0, -2.0 * j / static_cast<double>(dim));
        e[2 * j] = std::sin(t * w);
        e[2 * j + 1] = std::cos(t * w);
    }
    return e;
}

Tensor film_modulate(const Tensor& features, const Tensor& gamma, const Tensor& delta) {
    if (features.ndim() != 4) throw UsageError("film_modulate: features must be (B,C,H,W)");
    const int B = features.dim(0), C = features.dim(1);
    if (gamma.ndim() != 2 || gamma.dim(0) != B || gamma.dim(1) != C || !gamma.same_shape(delta))
        throw UsageError("film_modulate: gamma/delta must be (B,C)");
    Tensor y(features.shape());
    kernels::par::film_forward(B, C, features.dim(2) * features.dim(3), features.data(),
                               gamma.data(), delta.data(), y.data());
    return y;
}

namespace {

using nn::Conv;
using nn::GroupNorm;
using nn::Linear;
using nn::ParamStore;
using nn::SiLU;

// FiLM conditioning: a zero-initialized linear maps the time embedding to
// per-channel (gamma, delta).
struct Film {
    Linear lin;
    int C = 0;
    Tensor x_cache, gamma, delta;

    void init(ParamStore& store, const std::string& name, int temb_dim, int C_, Rng& rng) {
        C = C_;
        lin.init(store, name + ".affine", temb_dim, 2 * C_, rng, /*zero_init=*/true);
    }

    Tensor forward(const Tensor& x, const Tensor& temb) {
        x_cache = x;
        const int B = x.dim(0);
        Tensor gd = lin.forward(temb);  // (B, 2C)
        gamma = Tensor({B, C});
        delta = Tensor({B, C});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                gamma[static_cast<std::size_t>(b) * C + c] = gd[static_cast<std::size_t>(b) * 2 * C + c];
                delta[static_cast<std::size_t>(b) * C + c] =
                    gd[static_cast<std::size_t>(b) * 2 * C + C + c];
            }
        Tensor y(x.shape());
        kernels::par::film_forward(B, C, x.dim(2) * x.dim(3), x.data(), gamma.data(), delta.data(),
                                   y.data());
        return y;
    }

    // Returns gx; accumulates the time-embedding gradient into gtemb.
    Tensor backward(const Tensor& gy, Tensor& gtemb) {
        const int B = x_cache.dim(0);
        Tensor gx(x_cache.shape());
        Tensor ggamma({B, C}), gdelta({B, C});
        kernels::par::film_backward(B, C, x_cache.dim(2) * x_cache.dim(3), x_cache.data(),
                                    gamma.data(), gy.data(), gx.data(), ggamma.data(),
                                    gdelta.data());
        Tensor ggd({B, 2 * C});
        for (int b = 0; b < B; ++b)
            for (int c = 0; c < C; ++c) {
                ggd[static_cast<std::size_t>(b) * 2 * C + c] = ggamma[static_cast<std::size_t>(b) * C + c];
                ggd[static_cast<std::size_t>(b) * 2 * C + C + c] =
                    gdelta[static_cast<std::size_t>(b) * C + c];
            }
        Tensor gt = lin.backward(ggd);
        for (std::size_t i = 0; i < gtemb.size(); ++i) gtemb[i] += gt[i];
        return gx;
    }
};

struct ResBlock {
    GroupNorm gn1, gn2;
    SiLU act1, act2;
    Conv c1, c2, skip;
    Film film;
    bool has_skip = false;
    Tensor x_cache;

    void init(ParamStore& store, const std::string& name, int ci, int co, int temb_dim, int groups,
              Rng& rng) {
        gn1.init(store, name + ".norm1", ci, groups);
        c1.init(store, name + ".conv1", ci, co, 3, 1, rng);
        film.init(store, name + ".film", temb_dim, co, rng);
        gn2.init(store, name + ".norm2", co, groups);
        c2.init(store, name + ".conv2", co, co, 3, 1, rng);
        has_skip = ci != co;
        if (has_skip) skip.init(store, name + ".skip", ci, co, 1, 1, rng);
    }

    Tensor forward(const Tensor& x, const Tensor& temb) {
        x_cache = x;
        Tensor h = c1.forward(act1.forward(gn1.forward(x)));
        h = film.forward(h, temb);
        h = c2.forward(act2.forward(gn2.forward(h)));
        Tensor s = has_skip ? skip.forward(x) : x;
        for (std::size_t i = 0; i < h.size(); ++i) h[i] += s[i];
        return h;
    }

    Tensor backward(const Tensor& gy, Tensor& gtemb) {
        Tensor g = gn2.backward(act2.backward(c2.backward(gy)));
        g = film.backward(g, gtemb);
        g = gn1.backward(act1.backward(c1.backward(g)));
        Tensor gs = has_skip ? skip.backward(gy) : gy;
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gs[i];
        return g;
    }
};

// Pre-norm residual single-head self-attention over flattened positions.
struct AttnBlock {
    GroupNorm gn;
    Conv pq, pk, pv, po;
    int C = 0;
    Tensor q, k, v, probs;

    void init(ParamStore& store, const std::string& name, int C_, int groups, Rng& rng) {
        C = C_;
        gn.init(store, name + ".norm", C_, groups);
        pq.init(store, name + ".q", C_, C_, 1, 1, rng);
        pk.init(store, name + ".k", C_, C_, 1, 1, rng);
        pv.init(store, name + ".v", C_, C_, 1, 1, rng);
        po.init(store, name + ".proj", C_, C_, 1, 1, rng);
    }

    Tensor forward(const Tensor& x) {
        const int B = x.dim(0), n = x.dim(2) * x.dim(3);
        Tensor xn = gn.forward(x);
        q = pq.forward(xn);
        k = pk.forward(xn);
        v = pv.forward(xn);
        probs = Tensor({B, n, n});
        Tensor att(x.shape());
        const std::size_t plane = static_cast<std::size_t>(C) * n;
        for (int b = 0; b < B; ++b)
            kernels::par::attention_forward(C, n, q.data() + b * plane, k.data() + b * plane,
                                            v.data() + b * plane,
                                            probs.data() + static_cast<std::size_t>(b) * n * n,
                                            att.data() + b * plane);
        Tensor y = po.forward(att);
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += x[i];
        return y;
    }

    Tensor backward(const Tensor& gy) {
        const int B = q.dim(0), n = q.dim(2) * q.dim(3);
        Tensor gatt = po.backward(gy);
        Tensor gq(q.shape()), gk(k.shape()), gv(v.shape());
        const std::size_t plane = static_cast<std::size_t>(C) * n;
        for (int b = 0; b < B; ++b)
            kernels::par::attention_backward(C, n, q.data() + b * plane, k.data() + b * plane,
                                             v.data() + b * plane,
                                             probs.data() + static_cast<std::size_t>(b) * n * n,
                                             gatt.data() + b * plane, gq.data() + b * plane,
                                             gk.data() + b * plane, gv.data() + b * plane);
        Tensor gxn = pq.backward(gq);
        Tensor g2 = pk.backward(gk);
        Tensor g3 = pv.backward(gv);
        for (std::size_t i = 0; i < gxn.size(); ++i) gxn[i] += g2[i] + g3[i];
        Tensor gx = gn.backward(gxn);
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += gy[i];
        return gx;
    }
};

// Nearest-neighbor 2x upsample followed by a 3x3 conv.
struct Upsample {
    Conv c;
    std::vector<int> in_shape;

    void init(ParamStore& store, const std::string& name, int ci, int co, Rng& rng) {
        c.init(store, name + ".conv", ci, co, 3, 1, rng);
    }

    static Tensor nearest2x(const Tensor& x) {
        const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
        Tensor y({B, C, 2 * H, 2 * W});
        for (int b = 0; b < B; ++b)
            for (int ch = 0; ch < C; ++ch)
                for (int i = 0; i < H; ++i) {
                    const double* xr =
                        x.data() + ((static_cast<std::size_t>(b) * C + ch) * H + i) * W;
                    for (int di = 0; di < 2; ++di) {
                        double* yr = y.data() +
                                     ((static_cast<std::size_t>(b) * C + ch) * 2 * H + 2 * i + di) *
                                         2 * W;
                        for (int j = 0; j < W; ++j) {
                            yr[2 * j] = xr[j];
                            yr[2 * j + 1] = xr[j];
                        }
                    }
                }
        return y;
    }

    Tensor forward(const Tensor& x) {
        in_shape = x.shape();
        return c.forward(nearest2x(x));
    }

    Tensor backward(const Tensor& gy) {
        Tensor gup = c.backward(gy);
        Tensor gx(in_shape);
        const int B = in_shape[0], C = in_shape[1], H = in_shape[2], W = in_shape[3];
        for (int b = 0; b < B; ++b)
            for (int ch = 0; ch < C; ++ch)
                for (int i = 0; i < H; ++i)
                    for (int j = 0; j < W; ++j) {
                        double s = 0.0;
                        for (int di = 0; di < 2; ++di)
                            for (int dj = 0; dj < 2; ++dj)
                                s += gup[((static_cast<std::size_t>(b) * C + ch) * 2 * H + 2 * i +
                                          di) *
                                             2 * W +
                                         2 * j + dj];
                        gx[((static_cast<std::size_t>(b) * C + ch) * H + i) * W + j] = s;
                    }
        return gx;
    }
};

Tensor concat_channels(const Tensor& a, const Tensor& b) {
    const int B = a.dim(0), Ca = a.dim(1), Cb = b.dim(1), H = a.dim(2), W = a.dim(3);
    Tensor y({B, Ca + Cb, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int bi = 0; bi < B; ++bi) {
        std::copy_n(a.data() + bi * Ca * plane, Ca * plane,
                    y.data() + static_cast<std::size_t>(bi) * (Ca + Cb) * plane);
        std::copy_n(b.data() + bi * Cb * plane, Cb * plane,
                    y.data() + static_cast<std::size_t>(bi) * (Ca + Cb) * plane + Ca * plane);
    }
    return y;
}

void split_channels(const Tensor& g, int Ca, Tensor& ga, Tensor& gb) {
    const int B = g.dim(0), C = g.dim(1), H = g.dim(2), W = g.dim(3);
    const int Cb = C - Ca;
    ga = Tensor({B, Ca, H, W});
    gb = Tensor({B, Cb, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    for (int bi = 0; bi < B; ++bi) {
        std::copy_n(g.data() + static_cast<std::size_t>(bi) * C * plane, Ca * plane,
                    ga.data() + bi * Ca * plane);
        std::copy_n(g.data() + static_cast<std::size_t>(bi) * C * plane + Ca * plane, Cb * plane,
                    gb.data() + bi * Cb * plane);
    }
}

// Reflect-pad H and W up to multiples of 4 (grids here are small and the pad
// is at most 3 cells, so reflection indices stay in range).
Tensor reflect_pad(const Tensor& x, int ph, int pw) {
    if (ph == 0 && pw == 0) return x;
    const int B = x.dim(0), C = x.dim(1), H = x.dim(2), W = x.dim(3);
    Tensor y({B, C, H + ph, W + pw});
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c)
            for (int i = 0; i < H + ph; ++i) {
                const int si = i < H ? i : 2 * H - 2 - i;
                for (int j = 0; j < W + pw; ++j) {
                    const int sj = j < W ? j : 2 * W - 2 - j;
                    y[((static_cast<std::size_t>(b) * C + c) * (H + ph) + i) * (W + pw) + j] =
                        x[((static_cast<std::size_t>(b) * C + c) * H + si) * W + sj];
                }
            }
    return y;
}


}  // namespace

struct UNet::Impl {
    UNetConfig cfg;
    ParamStore store;
    std::vector<Tensor> raw_backup;  // filled while EMA weights are active

    Linear temb1, temb2;
    SiLU temb_act;
    Conv conv_in;
    ResBlock enc0, enc1, enc2, mid, dec2, dec1, dec0;
    Conv down0, down1;
    Upsample up1, up0;
    AttnBlock aenc0, aenc1, aenc2, adec0, adec1, adec2;
    GroupNorm out_gn;
    SiLU out_act;
    Conv out_conv;

    bool attn0 = false, attn1 = false, attn2 = false;

    // forward caches
    Tensor temb;
    Tensor skip0, skip1, skip2;
    int in_H = 0, in_W = 0;

    explicit Impl(const UNetConfig& c, std::uint64_t seed) : cfg(c) {
        cfg.validate();
        Rng rng(derive_seed(seed, 0x0e7u));
        const int C = cfg.base_channels;
        const int E = cfg.embed();
        const int TD = 4 * C;
        const int G = cfg.norm_groups;
        attn0 = cfg.attention_stages.count(0) > 0;
        attn1 = cfg.attention_stages.count(1) > 0;
        attn2 = cfg.attention_stages.count(2) > 0;

        temb1.init(store, "temb.fc1", E, TD, rng);
        temb2.init(store, "temb.fc2", TD, TD, rng);
        conv_in.init(store, "conv_in", cfg.in_channels, C, 3, 1, rng);

        enc0.init(store, "enc0", C, C, TD, G, rng);
        if (attn0) aenc0.init(store, "enc0.attn", C, G, rng);
        down0.init(store, "down0", C, 2 * C, 3, 2, rng);
        enc1.init(store, "enc1", 2 * C, 2 * C, TD, G, rng);
        if (attn1) aenc1.init(store, "enc1.attn", 2 * C, G, rng);
        down1.init(store, "down1", 2 * C, 4 * C, 3, 2, rng);
        enc2.init(store, "enc2", 4 * C, 4 * C, TD, G, rng);
        if (attn2) aenc2.init(store, "enc2.attn", 4 * C, G, rng);

        mid.init(store, "mid", 4 * C, 4 * C, TD, G, rng);

        dec2.init(store, "dec2", 8 * C, 4 * C, TD, G, rng);
        if (attn2) adec2.init(store, "dec2.attn", 4 * C, G, rng);
        up1.init(store, "up1", 4 * C, 2 * C, rng);
        dec1.init(store, "dec1", 4 * C, 2 * C, TD, G, rng);
        if (attn1) adec1.init(store, "dec1.attn", 2 * C, G, rng);
        up0.init(store, "up0", 2 * C, C, rng);
        dec0.init(store, "dec0", 2 * C, C, TD, G, rng);
        if (attn0) adec0.init(store, "dec0.attn", C, G, rng);

        out_gn.init(store, "out.norm", C, G);
        out_conv.init(store, "out.conv", C, cfg.out_channels, 3, 1, rng, /*zero_init=*/true);
        store.init_ema_from_weights();
    }

    Tensor forward(const Tensor& x, const std::vector<int>& tsteps) {
        if (x.ndim() != 4 || x.dim(1) != cfg.in_channels)
            throw UsageError("UNet::forward: expected (B," + std::to_string(cfg.in_channels) +
                             ",H,W), got " + shape_str(x));
        const int B = x.dim(0);
        if (static_cast<int>(tsteps.size()) != B)
            throw UsageError("UNet::forward: need one diffusion step per sample");
        in_H = x.dim(2);
        in_W = x.dim(3);
        const int ph = (4 - in_H % 4) % 4, pw = (4 - in_W % 4) % 4;
        Tensor xp = reflect_pad(x, ph, pw);

        const int E = cfg.embed();
        Tensor e({B, E});
        for (int b = 0; b < B; ++b) {
            const auto v = sinusoidal_embed(tsteps[b], E);
            std::copy(v.begin(), v.end(), e.data() + static_cast<std::size_t>(b) * E);
        }
        temb = temb2.forward(temb_act.forward(temb1.forward(e)));

        Tensor h = conv_in.forward(xp);
        h = enc0.forward(h, temb);
        if (attn0) h = aenc0.forward(h);
        skip0 = h;
        h = down0.forward(h);
        h = enc1.forward(h, temb);
        if (attn1) h = aenc1.forward(h);
        skip1 = h;
        h = down1.forward(h);
        h = enc2.forward(h, temb);
        if (attn2) h = aenc2.forward(h);
        skip2 = h;

        h = mid.forward(h, temb);

        h = dec2.forward(concat_channels(h, skip2), temb);
        if (attn2) h = adec2.forward(h);
        h = up1.forward(h);
        h = dec1.forward(concat_channels(h, skip1), temb);
        if (attn1) h = adec1.forward(h);
        h = up0.forward(h);
        h = dec0.forward(concat_channels(h, skip0), temb);
        if (attn0) h = adec0.forward(h);

        h = out_conv.forward(out_act.forward(out_gn.forward(h)));

        if (ph || pw) {
            Tensor out({B, cfg.out_channels, in_H, in_W});
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < cfg.out_channels; ++c)
                    for (int i = 0; i < in_H; ++i)
                        std::copy_n(h.data() + ((static_cast<std::size_t>(b) * cfg.out_channels +
                                                 c) *
                                                    (in_H + ph) +
                                                i) *
                                                   (in_W + pw),
                                    in_W,
                                    out.data() + ((static_cast<std::size_t>(b) * cfg.out_channels +
                                                   c) *
                                                      in_H +
                                                  i) *
                                                     in_W);
            return out;
        }
        return h;
    }

    void backward(const Tensor& gy) {
        const int B = gy.dim(0);
        const int ph = (4 - in_H % 4) % 4, pw = (4 - in_W % 4) % 4;
        Tensor g = gy;
        if (ph || pw) {
            Tensor gp({B, cfg.out_channels, in_H + ph, in_W + pw});
            for (int b = 0; b < B; ++b)
                for (int c = 0; c < cfg.out_channels; ++c)
                    for (int i = 0; i < in_H; ++i)
                        std::copy_n(
                            gy.data() +
                                ((static_cast<std::size_t>(b) * cfg.out_channels + c) * in_H + i) *
                                    in_W,
                            in_W,
                            gp.data() + ((static_cast<std::size_t>(b) * cfg.out_channels + c) *
                                             (in_H + ph) +
                                         i) *
                                            (in_W + pw));
            g = std::move(gp);
        }

        Tensor gtemb(temb.shape());
        g = out_gn.backward(out_act.backward(out_conv.backward(g)));

        if (attn0) g = adec0.backward(g);
        g = dec0.backward(g, gtemb);
        Tensor ga, gskip0;
        split_channels(g, up0.c.co, ga, gskip0);
        g = up0.backward(ga);
        if (attn1) g = adec1.backward(g);
        g = dec1.backward(g, gtemb);
        Tensor gskip1;
        split_channels(g, up1.c.co, ga, gskip1);
        g = up1.backward(ga);
        if (attn2) g = adec2.backward(g);
        g = dec2.backward(g, gtemb);
        Tensor gskip2;
        split_channels(g, mid.c2.co, ga, gskip2);

        g = mid.backward(ga, gtemb);

        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gskip2[i];
        if (attn2) g = aenc2.backward(g);
        g = enc2.backward(g, gtemb);
        g = down1.backward(g);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gskip1[i];
        if (attn1) g = aenc1.backward(g);
        g = enc1.backward(g, gtemb);
        g = down0.backward(g);
        for (std::size_t i = 0; i < g.size(); ++i) g[i] += gskip0[i];
        if (attn0) g = aenc0.backward(g);
        g = enc0.backward(g, gtemb);
        conv_in.backward(g);

        Tensor ge = temb1.backward(temb_act.backward(temb2.backward(gtemb)));
        (void)ge;  // the sinusoidal embedding has no parameters
    }
};

UNet::UNet(const UNetConfig& cfg, std::uint64_t init_seed)
    : impl_(std::make_unique<Impl>(cfg, init_seed)) {}
UNet::~UNet() = default;
UNet::UNet(UNet&&) noexcept = default;

Tensor UNet::forward(const Tensor& x, const std::vector<int>& t) { return impl_->forward(x, t); }
void UNet::backward(const Tensor& gy) { impl_->backward(gy); }
nn::ParamStore& UNet::params() { return impl_->store; }
const UNetConfig& UNet::config() const { return impl_->cfg; }

void UNet::use_ema_weights() {
    if (!impl_->raw_backup.empty()) return;
    for (auto& p : impl_->store.items()) {
        impl_->raw_backup.push_back(p->w);
        p->w = p->ema;
    }
}

void UNet::use_raw_weights() {
    if (impl_->raw_backup.empty()) return;
    std::size_t i = 0;
    for (auto& p : impl_->store.items()) p->w = impl_->raw_backup[i++];
    impl_->raw_backup.clear();
}

}  // namespace compdiff
