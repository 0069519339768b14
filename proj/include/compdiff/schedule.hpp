#pragma once

#include <vector>

#include "compdiff/errors.hpp"

namespace compdiff {

// Precomputed diffusion noise schedule. Step indices are 1-based (t = 1..T);
// alpha_bar(0) is defined as 1, which makes beta_tilde(1) = 0 and hence the
// final denoising step deterministic.
class NoiseSchedule {
public:
    NoiseSchedule() = default;
    NoiseSchedule(std::vector<double> beta, double beta_start, double beta_end);

    int T() const { return static_cast<int>(beta_.size()); }

    double beta(int t) const { return beta_[idx(t)]; }
    double alpha(int t) const { return alpha_[idx(t)]; }
    double alpha_bar(int t) const { return t == 0 ? 1.0 : alpha_bar_[idx(t)]; }
    double beta_tilde(int t) const { return beta_tilde_[idx(t)]; }
    double sigma(int t) const { return sigma_[idx(t)]; }

    // Shorthands for the v-parameterization: alpha_t = sqrt(alpha_bar),
    // sigma_t = sqrt(1 - alpha_bar).
    double a_coef(int t) const { return sqrt_alpha_bar_[idx(t)]; }
    double s_coef(int t) const { return sqrt_one_minus_alpha_bar_[idx(t)]; }

    double beta_start() const { return beta_start_; }
    double beta_end() const { return beta_end_; }

private:
    std::size_t idx(int t) const {
        if (t < 1 || t > T()) throw UsageError("NoiseSchedule: step index out of range");
        return static_cast<std::size_t>(t - 1);
    }

    std::vector<double> beta_, alpha_, alpha_bar_, beta_tilde_, sigma_;
    std::vector<double> sqrt_alpha_bar_, sqrt_one_minus_alpha_bar_;
    double beta_start_ = 0.0, beta_end_ = 0.0;
};

// beta_t interpolated linearly over t = 1..T inclusive of both endpoints.
NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end);

// Signal-to-noise ratio alpha_bar_t / (1 - alpha_bar_t).
double snr(const NoiseSchedule& s, int t);

}  // namespace compdiff
