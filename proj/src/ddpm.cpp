#include "compdiff/ddpm.hpp"

#include <cmath>

namespace compdiff {

std::string to_string(ParamKind k) { return k == ParamKind::Epsilon ? "epsilon" : "v"; }

ParamKind param_kind_from_string(const std::string& s) {
    if (s == "epsilon" || s == "eps") return ParamKind::Epsilon;
    if (s == "v") return ParamKind::V;
    throw UsageError("unknown parameterization: " + s);
}

namespace ddpm {

Tensor forward_noise(const Tensor& z0, const Tensor& eps, const NoiseSchedule& s, int t) {
    require_same_shape(z0, eps, "forward_noise");
    const double a = s.a_coef(t), sg = s.s_coef(t);
    Tensor out(z0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z0[i] + sg * eps[i];
    return out;
}

Tensor ancestral_step(const Tensor& z_t, const Tensor& eps_hat, const Tensor& tau,
                      const NoiseSchedule& s, int t) {
    require_same_shape(z_t, eps_hat, "ancestral_step");
    require_same_shape(z_t, tau, "ancestral_step");
    const double inv_sqrt_alpha = 1.0 / std::sqrt(s.alpha(t));
    const double coef = (1.0 - s.alpha(t)) / s.s_coef(t);
    const double sig = s.sigma(t);
    Tensor out(z_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = inv_sqrt_alpha * (z_t[i] - coef * eps_hat[i]) + sig * tau[i];
    return out;
}

Tensor v_target(const Tensor& z0, const Tensor& eps, const NoiseSchedule& s, int t) {
    require_same_shape(z0, eps, "v_target");
    const double a = s.a_coef(t), sg = s.s_coef(t);
    Tensor out(z0.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * eps[i] - sg * z0[i];
    return out;
}

Tensor eps_from_v(const Tensor& z_t, const Tensor& v, const NoiseSchedule& s, int t) {
    require_same_shape(z_t, v, "eps_from_v");
    const double a = s.a_coef(t), sg = s.s_coef(t);
    Tensor out(z_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = sg * z_t[i] + a * v[i];
    return out;
}

Tensor z0_from_v(const Tensor& z_t, const Tensor& v, const NoiseSchedule& s, int t) {
    require_same_shape(z_t, v, "z0_from_v");
    const double a = s.a_coef(t), sg = s.s_coef(t);
    Tensor out(z_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a * z_t[i] - sg * v[i];
    return out;
}

Tensor z0_from_eps(const Tensor& z_t, const Tensor& eps_hat, const NoiseSchedule& s, int t,
                   bool* clamped) {
    require_same_shape(z_t, eps_hat, "z0_from_eps");
    double a = s.a_coef(t);
    const double sg = s.s_coef(t);
    if (clamped) *clamped = false;
    if (a < 1e-8) {
        a = 1e-8;
        if (clamped) *clamped = true;
    }
    Tensor out(z_t.shape());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = (z_t[i] - sg * eps_hat[i]) / a;
    return out;
}

Tensor training_target(ParamKind kind, const Tensor& z0, const Tensor& eps,
                       const NoiseSchedule& s, int t) {
    if (kind == ParamKind::Epsilon) {
        require_same_shape(z0, eps, "training_target");
        s.beta(t);  // range check
        return eps;
    }
    return v_target(z0, eps, s, t);
}

Tensor z0_from_prediction(ParamKind kind, const Tensor& z_t, const Tensor& pred,
                          const NoiseSchedule& s, int t) {
    return kind == ParamKind::Epsilon ? z0_from_eps(z_t, pred, s, t)
                                      : z0_from_v(z_t, pred, s, t);
}

}  // namespace ddpm
}  // namespace compdiff
