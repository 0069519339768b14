#include "compdiff/composer.hpp"

#include <algorithm>
#include <cmath>

#include "compdiff/pde.hpp"
#include "compdiff/rng.hpp"

namespace compdiff {

NetExpert::NetExpert(const std::string& checkpoint_path) {
    meta_ = load_checkpoint_meta(checkpoint_path);
    if (meta_.model != "ddpm-unet")
        throw IncompatibilityError("NetExpert: checkpoint is not a ddpm-unet: " + checkpoint_path);
    if (meta_.channels.size() != 3)
        throw IncompatibilityError("NetExpert: expected [out, cond, ic] channels");
    net_ = std::make_unique<UNet>(meta_.unet, 0);
    load_checkpoint_weights(checkpoint_path, net_->params());
    net_->use_ema_weights();
}

Tensor NetExpert::predict(const Tensor& z_t, const std::vector<Tensor>& cond, int t) {
    const int H = z_t.dim(0), W = z_t.dim(1);
    const int Cin = meta_.unet.in_channels;
    if (static_cast<int>(cond.size()) + 1 + (meta_.unet.time_coord_channel ? 1 : 0) != Cin)
        throw IncompatibilityError("NetExpert: conditioning channel count mismatch");
    Tensor x({1, Cin, H, W});
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    std::copy_n(z_t.data(), plane, x.data());
    for (std::size_t c = 0; c < cond.size(); ++c)
        std::copy_n(cond[c].data(), plane, x.data() + (c + 1) * plane);
    if (meta_.unet.time_coord_channel)
        for (int ti = 0; ti < H; ++ti)
            for (int xi = 0; xi < W; ++xi)
                x[(1 + cond.size()) * plane + static_cast<std::size_t>(ti) * W + xi] =
                    static_cast<double>(ti) / (H - 1);
    Tensor out = net_->forward(x, {t});
    Tensor r({H, W});
    std::copy_n(out.data(), plane, r.data());
    return r;
}

void ComposeConfig::validate() const {
    if (K < 1) throw UsageError("ComposeConfig: K must be >= 1");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw UsageError("ComposeConfig: need 0 < lambda <= 1");
}

Tensor picard_update(const Tensor& z_tk, const Tensor& z0_hat, double lambda) {
    require_same_shape(z_tk, z0_hat, "picard_update");
    if (!(lambda > 0.0 && lambda <= 1.0)) throw UsageError("picard_update: need 0 < lambda <= 1");
    Tensor out(z_tk.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = z_tk[i] + lambda * (z0_hat[i] - z_tk[i]);
    return out;
}

namespace {

Tensor draw_normal(int H, int W, std::uint64_t seed) {
    Tensor z({H, W});
    Rng rng(seed);
    for (std::size_t i = 0; i < z.size(); ++i) z[i] = rng.normal();
    return z;
}

}  // namespace

FieldSet compose(const std::vector<Expert*>& experts_in, const NoiseSchedule& sched,
                 const GridSpec& grid, const std::vector<std::vector<double>>& ics,
                 SystemId system, const ComposeConfig& cfg) {
    cfg.validate();
    const int N = static_cast<int>(experts_in.size());
    if (N < 1) throw UsageError("compose: need at least one expert");
    if (static_cast<int>(ics.size()) != N) throw UsageError("compose: need one ic per expert");

    // Order experts by the field they model; the noise streams are keyed by
    // field index, so the composition is invariant to the argument order.
    std::vector<Expert*> experts = experts_in;
    std::sort(experts.begin(), experts.end(),
              [](const Expert* a, const Expert* b) { return a->field_index() < b->field_index(); });
    for (int i = 0; i < N; ++i)
        if (experts[i]->field_index() != i)
            throw IncompatibilityError("compose: experts must cover field indices 0..N-1");

    const int H = grid.nt, W = grid.nx;
    const int T = sched.T();
    const std::size_t plane = static_cast<std::size_t>(H) * W;

    // Per-expert normalized IC channels (constant across the chain).
    std::vector<Tensor> ic_chan(N, Tensor({H, W}));
    for (int i = 0; i < N; ++i) {
        if (static_cast<int>(ics[i].size()) != W) throw UsageError("compose: ic length != nx");
        const double mu = experts[i]->ic_mean(), inv = 1.0 / experts[i]->ic_std();
        for (int ti = 0; ti < H; ++ti)
            for (int xi = 0; xi < W; ++xi)
                ic_chan[i][static_cast<std::size_t>(ti) * W + xi] = (ics[i][xi] - mu) * inv;
    }

    // Optional teacher forcing: fixed physical conditioning per field.
    const bool teacher = !cfg.frozen_cond.empty();
    if (teacher && static_cast<int>(cfg.frozen_cond.size()) != N)
        throw UsageError("compose: frozen_cond must hold one field per expert");

    // Normalized chain states and running denoised estimates.
    std::vector<Tensor> z(N), zhat0(N), y(N), zhat_new(N);
    for (int i = 0; i < N; ++i)
        z[i] = draw_normal(H, W, derive_seed(cfg.seed, i, T + 1, 0xA11CE));

    // Conditioning for expert i from the current estimate of its partner
    // field j (experts were trained with a single cross-field channel).
    auto build_cond = [&](int i) {
        std::vector<Tensor> cond;
        const int j = N - 1 - i;  // the other field (N == 2), or itself when N == 1
        Tensor c({H, W});
        if (N == 1) {
            c.fill(0.0);
        } else {
            const double mu_j = experts[j]->out_mean(), sd_j = experts[j]->out_std();
            const double mu_i = experts[i]->cond_mean(), inv_i = 1.0 / experts[i]->cond_std();
            if (teacher) {
                for (std::size_t p = 0; p < plane; ++p)
                    c[p] = (cfg.frozen_cond[j][p] - mu_i) * inv_i;
            } else {
                for (std::size_t p = 0; p < plane; ++p)
                    c[p] = ((zhat0[j][p] * sd_j + mu_j) - mu_i) * inv_i;
            }
        }
        cond.push_back(std::move(c));
        cond.push_back(ic_chan[i]);
        return cond;
    };

    // Bootstrap the cross-field estimates with one pass conditioned on a
    // zeroed cross-field channel (the known ICs stay in).
    for (int i = 0; i < N; ++i) {
        std::vector<Tensor> cond;
        Tensor zeros({H, W});
        cond.push_back(std::move(zeros));
        cond.push_back(ic_chan[i]);
        Tensor pred = experts[i]->predict(z[i], cond, T);
        zhat0[i] = ddpm::z0_from_prediction(experts[i]->param_kind(), z[i], pred, sched, T);
    }

    for (int t = T; t >= 1; --t) {
        for (int i = 0; i < N; ++i) y[i] = z[i];
        for (int k = 1; k <= cfg.K; ++k) {
            // Jacobi: all experts see the same snapshot of estimates.
            for (int i = 0; i < N; ++i) {
                Tensor pred = experts[i]->predict(y[i], build_cond(i), t);
                zhat_new[i] =
                    ddpm::z0_from_prediction(experts[i]->param_kind(), y[i], pred, sched, t);
            }
            for (int i = 0; i < N; ++i) {
                if (cfg.renoise_picard && k < cfg.K) {
                    // Ablation: refresh the iterate at noise level t around the
                    // new estimate instead of the plain Euler move.
                    Tensor eta = draw_normal(H, W, derive_seed(cfg.seed, i, t, 0xE000 + k));
                    y[i] = ddpm::forward_noise(zhat_new[i], eta, sched, t);
                } else {
                    y[i] = picard_update(y[i], zhat_new[i], cfg.lambda);
                }
                zhat0[i] = zhat_new[i];
            }
        }
        // Transition t -> t-1 from the chain state, with the noise implied by
        // the final denoised estimate of the Picard loop.
        const double a = sched.a_coef(t), sg = sched.s_coef(t);
        for (int i = 0; i < N; ++i) {
            Tensor eps_hat({H, W});
            for (std::size_t p = 0; p < plane; ++p) eps_hat[p] = (z[i][p] - a * zhat0[i][p]) / sg;
            Tensor tau({H, W});
            if (t > 1) tau = draw_normal(H, W, derive_seed(cfg.seed, i, t, 0x7A0));
            z[i] = ddpm::ancestral_step(z[i], eps_hat, tau, sched, t);
            if (!z[i].all_finite())
                throw NumericalError("compose: non-finite state at diffusion step " +
                                     std::to_string(t) + ", field " + std::to_string(i));
        }
    }

    // Denormalize, overwrite row 0 with the stored ICs.
    SystemParams sys = SystemParams::defaults(system, grid);
    const auto names = sys.field_names();
    std::vector<Field> fields;
    for (int i = 0; i < N; ++i) {
        const double mu = experts[i]->out_mean(), sd = experts[i]->out_std();
        Tensor f({H, W});
        for (std::size_t p = 0; p < plane; ++p) f[p] = z[i][p] * sd + mu;
        for (int xi = 0; xi < W; ++xi) f.at(0, xi) = ics[i][xi];
        fields.emplace_back(grid, std::move(f), i < static_cast<int>(names.size()) ? names[i] : "");
    }
    return FieldSet(std::move(fields), ics, system);
}

}  // namespace compdiff
