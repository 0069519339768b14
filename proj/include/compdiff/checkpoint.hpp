#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "compdiff/fno.hpp"
#include "compdiff/grid.hpp"
#include "compdiff/nn.hpp"
#include "compdiff/schedule.hpp"
#include "compdiff/unet.hpp"

namespace compdiff {

// Checkpoint = JSON manifest (config + schedule + normalization stats +
// parameterization) + named float32 weight tensors in the payload container
// (groups "raw/" and "ema/").
struct CheckpointMeta {
    int format_version = 1;
    std::string model;  // "ddpm-unet" | "fno"
    ParamKind param_kind = ParamKind::V;
    UNetConfig unet;
    FnoConfig fno;
    int schedule_T = 0;
    double beta_start = 0.0, beta_end = 0.0;
    SystemId system_id = SystemId::ReactionDiffusion;
    int field_index = -1;
    GridSpec grid;
    std::vector<std::string> channels;
    std::vector<double> norm_mean, norm_std;
    int train_steps = 0, batch_size = 0;
    double lr = 0.0, ema_decay = 0.0;
    std::uint64_t seed = 0;
    std::string payload_file;
    std::uint32_t payload_crc32 = 0;

    NoiseSchedule schedule() const { return build_linear_schedule(schedule_T, beta_start, beta_end); }
    std::string digest() const;  // hex of the payload CRC
};

std::string save_checkpoint(const std::string& out_base, const CheckpointMeta& meta,
                            nn::ParamStore& store);
CheckpointMeta load_checkpoint_meta(const std::string& path_or_base);
// Fills an existing store (built from the meta's config) by tensor name;
// missing or shape-mismatched tensors raise IncompatibilityError.
void load_checkpoint_weights(const std::string& path_or_base, nn::ParamStore& store);

std::string checkpoint_manifest_path(const std::string& base);

}  // namespace compdiff
