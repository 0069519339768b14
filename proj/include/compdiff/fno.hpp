#pragma once

#include <cstdint>
#include <memory>

#include "compdiff/grid.hpp"
#include "compdiff/nn.hpp"
#include "compdiff/tensor.hpp"

namespace compdiff {

// 2-d Fourier neural operator: lift -> n_layers x (spectral conv + 1x1
// bypass, GELU between) -> projection. Inputs are channels
// [x coord, t coord, ic_0, ic_1], outputs the two coupled fields.
struct FnoConfig {
    int modes_t = 16;
    int modes_x = 16;
    int width = 32;
    int n_layers = 4;
    int in_channels = 4;
    int out_channels = 2;

    // Clamp modes to the grid Nyquist limits (modes_t <= nt/2, modes_x <= nx/2),
    // warning when a clamp fires.
    FnoConfig clamped_to(const GridSpec& g) const;
    void validate() const;
};

// One spectral convolution: FFT -> per-mode channel mixing on the lowest
// modes_t x modes_x modes (with the conjugate-symmetric partner block) ->
// inverse FFT. weights_ri has shape (Ci, Co, 2*modes_t, modes_x, 2), the last
// axis packing (re, im).
Tensor spectral_conv2d(const Tensor& x, const Tensor& weights_ri, int modes_t, int modes_x);

class Fno {
public:
    Fno(const FnoConfig& cfg, std::uint64_t init_seed);
    ~Fno();
    Fno(Fno&&) noexcept;

    // x: (B, in_channels, H, W) -> (B, out_channels, H, W)
    Tensor forward(const Tensor& x);
    void backward(const Tensor& gy);

    nn::ParamStore& params();
    const FnoConfig& config() const;
    void use_ema_weights();
    void use_raw_weights();

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
};

}  // namespace compdiff
