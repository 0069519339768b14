#include "compdiff/trainer.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "compdiff/rng.hpp"

namespace compdiff {

namespace {

class LossLog {
public:
    LossLog(const std::string& path, int every) : every_(every) {
        if (!path.empty()) {
            f_.open(path);
            if (!f_) throw IoError("cannot open loss log: " + path);
            f_ << "step,loss,ema_loss,wall_ms\n";
        }
        start_ = std::chrono::steady_clock::now();
    }
    void record(int step, double loss) {
        ema_ = step == 1 ? loss : 0.98 * ema_ + 0.02 * loss;
        if (f_ && (step % every_ == 0 || step == 1)) {
            const double ms = std::chrono::duration<double, std::milli>(
                                  std::chrono::steady_clock::now() - start_)
                                  .count();
            f_ << step << "," << loss << "," << ema_ << "," << ms << "\n";
        }
    }
    double ema() const { return ema_; }

private:
    std::ofstream f_;
    int every_;
    double ema_ = 0.0;
    std::chrono::steady_clock::time_point start_;
};

void adam_update(nn::ParamStore& store, const TrainConfig& tc, int step) {
    for (auto& p : store.items())
        kernels::par::adam_step(p->size(), p->w.data(), p->g.data(), p->m.data(), p->v.data(),
                                tc.lr, tc.adam_beta1, tc.adam_beta2, tc.adam_eps, step);
}

void ema_update(nn::ParamStore& store, double decay) {
    for (auto& p : store.items())
        for (std::size_t i = 0; i < p->size(); ++i)
            p->ema[i] = decay * p->ema[i] + (1.0 - decay) * p->w[i];
}

// Preload the whole dataset (normalized) when it fits comfortably in memory.
std::vector<Tensor> preload(const DatasetReader& data) {
    std::vector<Tensor> all;
    const std::size_t bytes = static_cast<std::size_t>(data.n_samples()) *
                              data.manifest().sample_elems() * sizeof(double);
    if (bytes > (3ull << 30)) return all;
    all.reserve(data.n_samples());
    for (int i = 0; i < data.n_samples(); ++i) all.push_back(data.sample(i, true));
    return all;
}

}  // namespace

void TrainConfig::validate() const {
    if (batch_size < 1) throw UsageError("TrainConfig: batch_size must be >= 1");
    if (steps < 1) throw UsageError("TrainConfig: steps must be >= 1");
    if (!(lr > 0.0)) throw UsageError("TrainConfig: learning_rate must be positive");
    if (!(ema_decay >= 0.0 && ema_decay < 1.0))
        throw UsageError("TrainConfig: ema_decay must lie in [0, 1)");
}

std::string train_denoiser(const DatasetReader& data, UNetConfig ucfg, const NoiseSchedule& sched,
                           const TrainConfig& tc, const std::string& out_base) {
    tc.validate();
    const DatasetManifest& man = data.manifest();
    if (man.kind != "decoupled")
        throw IncompatibilityError("train_denoiser: dataset kind must be decoupled, got " +
                                   man.kind);
    const int n_cond = man.n_channels() - 1;
    const int want_in = 1 + n_cond + (ucfg.time_coord_channel ? 1 : 0);
    if (ucfg.in_channels != want_in) {
        if (ucfg.in_channels != 0 && ucfg.in_channels != 3)
            throw IncompatibilityError("train_denoiser: config in_channels " +
                                       std::to_string(ucfg.in_channels) +
                                       " does not match dataset channels");
        ucfg.in_channels = want_in;
    }
    ucfg.param_kind = tc.param_kind;

    UNet net(ucfg, derive_seed(tc.seed, 0x11u));
    const int B = tc.batch_size;
    const int H = man.grid.nt, W = man.grid.nx;
    const std::size_t plane = static_cast<std::size_t>(H) * W;
    const int T = sched.T();

    const auto all = preload(data);
    auto get_sample = [&](int idx) -> Tensor {
        return all.empty() ? data.sample(idx, true) : all[idx];
    };

    Rng rng(derive_seed(tc.seed, 0x7121u));
    LossLog log(tc.loss_log_path, tc.log_every);

    Tensor x({B, ucfg.in_channels, H, W});
    Tensor target({B, 1, H, W});
    std::vector<int> tsteps(B);

    auto save = [&](const std::string& base) {
        CheckpointMeta meta;
        meta.model = "ddpm-unet";
        meta.param_kind = tc.param_kind;
        meta.unet = ucfg;
        meta.schedule_T = T;
        meta.beta_start = sched.beta_start();
        meta.beta_end = sched.beta_end();
        meta.system_id = man.system_id;
        meta.field_index = man.field_index;
        meta.grid = man.grid;
        meta.channels = man.channels;
        meta.norm_mean = man.norm_mean;
        meta.norm_std = man.norm_std;
        meta.train_steps = tc.steps;
        meta.batch_size = tc.batch_size;
        meta.lr = tc.lr;
        meta.ema_decay = tc.ema_decay;
        meta.seed = tc.seed;
        return save_checkpoint(base, meta, net.params());
    };

    for (int step = 1; step <= tc.steps; ++step) {
        for (int b = 0; b < B; ++b) {
            const int idx = rng.uniform_int(0, data.n_samples() - 1);
            const int t = rng.uniform_int(1, T);
            tsteps[b] = t;
            Tensor s = get_sample(idx);
            // channel 0: z_t built from the normalized output channel
            const double a = sched.a_coef(t), sg = sched.s_coef(t);
            double* xz = x.data() + static_cast<std::size_t>(b) * ucfg.in_channels * plane;
            double* tg = target.data() + static_cast<std::size_t>(b) * plane;
            const double* z0 = s.data();
            for (std::size_t i = 0; i < plane; ++i) {
                const double eps = rng.normal();
                xz[i] = a * z0[i] + sg * eps;
                tg[i] = tc.param_kind == ParamKind::Epsilon ? eps : a * eps - sg * z0[i];
            }
            for (int c = 1; c <= n_cond; ++c)
                std::copy_n(s.data() + static_cast<std::size_t>(c) * plane, plane,
                            xz + static_cast<std::size_t>(c) * plane);
            if (ucfg.time_coord_channel)
                for (int ti = 0; ti < H; ++ti)
                    for (int xi = 0; xi < W; ++xi)
                        xz[static_cast<std::size_t>(1 + n_cond) * plane + ti * W + xi] =
                            static_cast<double>(ti) / (H - 1);
        }

        Tensor pred = net.forward(x, tsteps);
        const std::size_t N = pred.size();
        double loss = 0.0;
        Tensor gy(pred.shape());
        const double inv = 1.0 / static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double d = pred[i] - target[i];
            loss += d * d * inv;
            gy[i] = 2.0 * d * inv;
        }
        if (!std::isfinite(loss))
            throw NumericalError("train_denoiser: non-finite loss at step " +
                                 std::to_string(step) + " (lr=" + std::to_string(tc.lr) + ")");
        net.params().zero_grads();
        net.backward(gy);
        adam_update(net.params(), tc, step);
        ema_update(net.params(), tc.ema_decay);
        log.record(step, loss);
        if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && step < tc.steps)
            save(out_base + ".step" + std::to_string(step));
    }
    return save(out_base);
}

std::string train_fno(const DatasetReader& data, FnoConfig fcfg, const TrainConfig& tc,
                      const std::string& out_base) {
    tc.validate();
    const DatasetManifest& man = data.manifest();
    if (man.kind != "coupled")
        throw IncompatibilityError("train_fno: dataset kind must be coupled, got " + man.kind);
    if (man.n_channels() != 6)
        throw IncompatibilityError("train_fno: expected 6 channels, got " +
                                   std::to_string(man.n_channels()));
    fcfg = fcfg.clamped_to(man.grid);
    fcfg.validate();

    Fno net(fcfg, derive_seed(tc.seed, 0x12u));
    const int B = tc.batch_size;
    const int H = man.grid.nt, W = man.grid.nx;
    const std::size_t plane = static_cast<std::size_t>(H) * W;

    const auto all = preload(data);
    auto get_sample = [&](int idx, bool normalized) -> Tensor {
        return all.empty() || !normalized ? data.sample(idx, normalized) : all[idx];
    };

    Rng rng(derive_seed(tc.seed, 0x7122u));
    LossLog log(tc.loss_log_path, tc.log_every);

    Tensor x({B, 4, H, W});
    Tensor target({B, 2, H, W});
    // Coordinate channels are the same map for every sample.
    std::vector<double> xcoord(plane), tcoord(plane);
    for (int ti = 0; ti < H; ++ti)
        for (int xi = 0; xi < W; ++xi) {
            xcoord[ti * W + xi] =
                (man.grid.x(xi) - man.grid.x_min) / (man.grid.x_max - man.grid.x_min);
            tcoord[ti * W + xi] = man.grid.t(ti) / man.grid.t_max;
        }

    auto save = [&](const std::string& base) {
        CheckpointMeta meta;
        meta.model = "fno";
        meta.param_kind = tc.param_kind;
        meta.fno = fcfg;
        meta.schedule_T = 1;
        meta.beta_start = meta.beta_end = 0.5;
        meta.system_id = man.system_id;
        meta.field_index = -1;
        meta.grid = man.grid;
        meta.channels = man.channels;
        meta.norm_mean = man.norm_mean;
        meta.norm_std = man.norm_std;
        meta.train_steps = tc.steps;
        meta.batch_size = tc.batch_size;
        meta.lr = tc.lr;
        meta.ema_decay = tc.ema_decay;
        meta.seed = tc.seed;
        return save_checkpoint(base, meta, net.params());
    };

    for (int step = 1; step <= tc.steps; ++step) {
        for (int b = 0; b < B; ++b) {
            const int idx = rng.uniform_int(0, data.n_samples() - 1);
            Tensor s = get_sample(idx, true);
            double* xb = x.data() + static_cast<std::size_t>(b) * 4 * plane;
            // inputs [xcoord, tcoord, ic0, ic1]: coords raw in [0,1], ics z-scored
            std::copy_n(xcoord.data(), plane, xb);
            std::copy_n(tcoord.data(), plane, xb + plane);
            std::copy_n(s.data() + 2 * plane, plane, xb + 2 * plane);
            std::copy_n(s.data() + 3 * plane, plane, xb + 3 * plane);
            double* tb = target.data() + static_cast<std::size_t>(b) * 2 * plane;
            std::copy_n(s.data(), plane, tb);
            std::copy_n(s.data() + plane, plane, tb + plane);
        }
        Tensor pred = net.forward(x);
        const std::size_t N = pred.size();
        double loss = 0.0;
        Tensor gy(pred.shape());
        const double inv = 1.0 / static_cast<double>(N);
        for (std::size_t i = 0; i < N; ++i) {
            const double d = pred[i] - target[i];
            loss += d * d * inv;
            gy[i] = 2.0 * d * inv;
        }
        if (!std::isfinite(loss))
            throw NumericalError("train_fno: non-finite loss at step " + std::to_string(step));
        net.params().zero_grads();
        net.backward(gy);
        adam_update(net.params(), tc, step);
        ema_update(net.params(), tc.ema_decay);
        log.record(step, loss);
        if (tc.checkpoint_every > 0 && step % tc.checkpoint_every == 0 && step < tc.steps)
            save(out_base + ".step" + std::to_string(step));
    }
    return save(out_base);
}

}  // namespace compdiff
