#pragma once

#include <cstdint>
#include <set>
#include <vector>

#include "compdiff/ddpm.hpp"
#include "compdiff/nn.hpp"
#include "compdiff/tensor.hpp"

namespace compdiff {

// Conditional UNet: three encoder stages with channels [C, 2C, 4C], three
// decoder stages with skip connections, residual conv blocks FiLM-conditioned
// on the diffusion step (sinusoidal embedding), SiLU activations, and
// single-head spatial self-attention at the configured stages.
struct UNetConfig {
    int base_channels = 48;
    int in_channels = 3;  // noisy field + conditional field + ic channel
    int out_channels = 1;
    int embed_dim = 0;  // sinusoidal embedding width; 0 -> base_channels
    std::set<int> attention_stages = {1, 2};
    ParamKind param_kind = ParamKind::V;
    bool time_coord_channel = false;  // extra physical-time input channel
    int norm_groups = 8;

    int embed() const { return embed_dim > 0 ? embed_dim : base_channels; }
    std::vector<int> stage_channels() const {
        return {base_channels, 2 * base_channels, 4 * base_channels};
    }
    void validate() const;
};

// Frequency-geometric sin/cos embedding: pairs (sin(t w_j), cos(t w_j)) with
// w_j = 10000^(-2j/dim).
std::vector<double> sinusoidal_embed(int t, int dim);

// y[b,c,:,:] = (1 + gamma[b,c]) x[b,c,:,:] + delta[b,c]
Tensor film_modulate(const Tensor& features, const Tensor& gamma, const Tensor& delta);

class UNet {
public:
    UNet(const UNetConfig& cfg, std::uint64_t init_seed);
    ~UNet();
    UNet(UNet&&) noexcept;

    // x: (B, in_channels, H, W); t: one diffusion step per sample (1-based).
    // Returns (B, out_channels, H, W).
    Tensor forward(const Tensor& x, const std::vector<int>& t);
    // gy matches the forward output; accumulates parameter gradients.
    void backward(const Tensor& gy);

    nn::ParamStore& params();
    const UNetConfig& config() const;
    // Swap in the EMA weights (returns a guard-less copy of raw weights via
    // use_raw_weights to undo).
    void use_ema_weights();
    void use_raw_weights();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace compdiff
