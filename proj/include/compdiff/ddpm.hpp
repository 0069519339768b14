#pragma once

#include "compdiff/schedule.hpp"
#include "compdiff/tensor.hpp"

namespace compdiff {

enum class ParamKind { Epsilon, V };

std::string to_string(ParamKind k);
ParamKind param_kind_from_string(const std::string& s);

// Pure diffusion algebra on tensors. Noise is always injected by the caller
// so that every operation is a deterministic function of its arguments.
namespace ddpm {

// z_t = sqrt(abar_t) z0 + sqrt(1 - abar_t) eps
Tensor forward_noise(const Tensor& z0, const Tensor& eps, const NoiseSchedule& s, int t);

// z_{t-1} = (z_t - (1-alpha_t)/sqrt(1-abar_t) eps_hat) / sqrt(alpha_t) + sigma_t tau
// tau must be all-zero at t = 1 (sigma_1 = 0).
Tensor ancestral_step(const Tensor& z_t, const Tensor& eps_hat, const Tensor& tau,
                      const NoiseSchedule& s, int t);

// v = a eps - s z0 with a = sqrt(abar_t), s = sqrt(1 - abar_t)
Tensor v_target(const Tensor& z0, const Tensor& eps, const NoiseSchedule& s, int t);

// eps = s z_t + a v
Tensor eps_from_v(const Tensor& z_t, const Tensor& v, const NoiseSchedule& s, int t);

// z0 = a z_t - s v
Tensor z0_from_v(const Tensor& z_t, const Tensor& v, const NoiseSchedule& s, int t);

// z0 = (z_t - s eps_hat) / a; the denominator is clamped at 1e-8 for extreme
// schedules where abar_t underflows, and *clamped is set when that happens.
Tensor z0_from_eps(const Tensor& z_t, const Tensor& eps_hat, const NoiseSchedule& s, int t,
                   bool* clamped = nullptr);

// The regression target: eps for Epsilon, v_target for V.
Tensor training_target(ParamKind kind, const Tensor& z0, const Tensor& eps,
                       const NoiseSchedule& s, int t);

// Prediction -> denoised-field estimate, dispatching on the parameterization.
Tensor z0_from_prediction(ParamKind kind, const Tensor& z_t, const Tensor& pred,
                          const NoiseSchedule& s, int t);

}  // namespace ddpm
}  // namespace compdiff
