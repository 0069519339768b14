#pragma once

#include <cstdint>
#include <vector>

#include "compdiff/grid.hpp"
#include "compdiff/tensor.hpp"

namespace compdiff {

// Stationary Gaussian random field parameters: squared-exponential covariance
// k(r) = amplitude^2 exp(-r^2 / (2 l^2)), sampled spectrally on the periodic
// grid (circulant covariance diagonalized by the FFT).
struct GrfParams {
    double length_scale_x = 0.0;
    double length_scale_t = 0.0;  // space-time fields only
    double amplitude = 0.0;
    std::uint64_t seed = 0;

    // Spec'd defaults: l_x = 0.2 (x_max - x_min), l_t = 0.2 t_max, amplitude 0.5.
    static GrfParams defaults(const GridSpec& g, std::uint64_t seed);
};

// Zero-mean stationary field over x; deterministic given the seed.
std::vector<double> grf_sample_1d(const GridSpec& g, const GrfParams& p);

// Separable squared-exponential covariance over (t, x); shape (nt, nx).
Tensor grf_sample_2d(const GridSpec& g, const GrfParams& p);

}  // namespace compdiff
