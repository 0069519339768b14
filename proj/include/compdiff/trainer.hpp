#pragma once

#include <cstdint>
#include <string>

#include "compdiff/checkpoint.hpp"
#include "compdiff/dataset.hpp"
#include "compdiff/fno.hpp"
#include "compdiff/schedule.hpp"
#include "compdiff/unet.hpp"

namespace compdiff {

struct TrainConfig {
    int batch_size = 16;
    int steps = 5000;
    double lr = 2e-4;
    double adam_beta1 = 0.9, adam_beta2 = 0.999, adam_eps = 1e-8;
    double ema_decay = 0.999;
    ParamKind param_kind = ParamKind::V;
    std::uint64_t seed = 0;
    int checkpoint_every = 0;  // 0 = final checkpoint only
    int log_every = 50;
    std::string loss_log_path;  // CSV: step, loss, ema_loss, wall_ms

    void validate() const;
};

// Per-step: sample a batch, a uniform diffusion step per sample, unit noise;
// form z_t, regress the network output onto the eps/v target with MSE.
// Returns the checkpoint manifest path.
std::string train_denoiser(const DatasetReader& data, UNetConfig ucfg, const NoiseSchedule& sched,
                           const TrainConfig& tc, const std::string& out_base);

// Supervised regression of the coupled fields from [x, t, ic0, ic1].
std::string train_fno(const DatasetReader& data, FnoConfig fcfg, const TrainConfig& tc,
                      const std::string& out_base);

}  // namespace compdiff
