#include "compdiff/schedule.hpp"

#include <cmath>

namespace compdiff {

NoiseSchedule::NoiseSchedule(std::vector<double> beta, double beta_start, double beta_end)
    : beta_(std::move(beta)), beta_start_(beta_start), beta_end_(beta_end) {
    const int T = static_cast<int>(beta_.size());
    if (T < 1) throw UsageError("NoiseSchedule: T must be >= 1");
    alpha_.resize(T);
    alpha_bar_.resize(T);
    beta_tilde_.resize(T);
    sigma_.resize(T);
    sqrt_alpha_bar_.resize(T);
    sqrt_one_minus_alpha_bar_.resize(T);
    double abar = 1.0;
    for (int i = 0; i < T; ++i) {
        const double b = beta_[i];
        if (!(b > 0.0 && b < 1.0)) throw UsageError("NoiseSchedule: beta_t must lie in (0, 1)");
        const double abar_prev = abar;
        alpha_[i] = 1.0 - b;
        abar *= alpha_[i];
        alpha_bar_[i] = abar;
        beta_tilde_[i] = b * (1.0 - abar_prev) / (1.0 - abar);
        sigma_[i] = std::sqrt(beta_tilde_[i]);
        sqrt_alpha_bar_[i] = std::sqrt(abar);
        sqrt_one_minus_alpha_bar_[i] = std::sqrt(1.0 - abar);
    }
}

NoiseSchedule build_linear_schedule(int T, double beta_start, double beta_end) {
    if (T < 1) throw UsageError("build_linear_schedule: T must be >= 1");
    if (!(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0))
        throw UsageError("build_linear_schedule: need 0 < beta_start <= beta_end < 1");
    std::vector<double> beta(T);
    if (T == 1) {
        beta[0] = beta_start;
    } else {
        for (int i = 0; i < T; ++i)
            beta[i] = beta_start + (beta_end - beta_start) * i / static_cast<double>(T - 1);
    }
    return NoiseSchedule(std::move(beta), beta_start, beta_end);
}

double snr(const NoiseSchedule& s, int t) {
    const double abar = s.alpha_bar(t);  // throws on out-of-range t
    return abar / (1.0 - abar);
}

}  // namespace compdiff
