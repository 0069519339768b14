#include <cmath>

#include "compdiff/kernels.hpp"

namespace compdiff::kernels {

namespace {

inline double block_sum(const double* a, std::size_t n) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lane[l] += a[i + l];
    double s = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
               ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) s += a[i];
    return s;
}

inline double block_sq_dev(const double* a, std::size_t n, double mu) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) {
            const double dv = a[i + l] - mu;
            lane[l] += dv * dv;
        }
    double s = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
               ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) {
        const double dv = a[i] - mu;
        s += dv * dv;
    }
    return s;
}

}  // namespace

namespace par {

void groupnorm_forward(int B, int C, int HW, int groups, double eps, const double* x,
                       const double* gamma, const double* beta, double* y, double* mean,
                       double* var) {
    const int Cg = C / groups;
    const std::size_t block = static_cast<std::size_t>(Cg) * HW;
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int g = 0; g < groups; ++g) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + g * Cg) * HW;
            const double mu = block_sum(x + off, block) / static_cast<double>(block);
            const double vr = block_sq_dev(x + off, block, mu) / static_cast<double>(block);
            mean[b * groups + g] = mu;
            var[b * groups + g] = vr;
            const double inv = 1.0 / std::sqrt(vr + eps);
            for (int cc = 0; cc < Cg; ++cc) {
                const int c = g * Cg + cc;
                const double a = gamma[c] * inv;
                const double sh = beta[c] - mu * a;
                const double* xr = x + off + static_cast<std::size_t>(cc) * HW;
                double* yr = y + off + static_cast<std::size_t>(cc) * HW;
                for (int i = 0; i < HW; ++i) yr[i] = a * xr[i] + sh;
            }
        }
    }
}

void groupnorm_backward(int B, int C, int HW, int groups, double eps, const double* x,
                        const double* gamma, const double* mean, const double* var,
                        const double* gy, double* gx, double* ggamma, double* gbeta) {
    const int Cg = C / groups;
    const std::size_t block = static_cast<std::size_t>(Cg) * HW;
    const double invN = 1.0 / static_cast<double>(block);
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b) {
        for (int g = 0; g < groups; ++g) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + g * Cg) * HW;
            const double mu = mean[b * groups + g];
            const double inv = 1.0 / std::sqrt(var[b * groups + g] + eps);
            double s1 = 0.0, s2 = 0.0;  // sum(gamma gy), sum(gamma gy xhat)
            for (int cc = 0; cc < Cg; ++cc) {
                const int c = g * Cg + cc;
                const double* xr = x + off + static_cast<std::size_t>(cc) * HW;
                const double* gr = gy + off + static_cast<std::size_t>(cc) * HW;
                double l1 = 0.0, l2 = 0.0;
                for (int i = 0; i < HW; ++i) {
                    const double gg = gamma[c] * gr[i];
                    l1 += gg;
                    l2 += gg * (xr[i] - mu) * inv;
                }
                s1 += l1;
                s2 += l2;
            }
            for (int cc = 0; cc < Cg; ++cc) {
                const int c = g * Cg + cc;
                const double* xr = x + off + static_cast<std::size_t>(cc) * HW;
                const double* gr = gy + off + static_cast<std::size_t>(cc) * HW;
                double* gxr = gx + off + static_cast<std::size_t>(cc) * HW;
                for (int i = 0; i < HW; ++i) {
                    const double xh = (xr[i] - mu) * inv;
                    gxr[i] = inv * (gamma[c] * gr[i] - invN * (s1 + xh * s2));
                }
            }
        }
    }
    // Parameter gradients: one owner per channel.
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        const int g = c / Cg;
        double sg = 0.0, sb = 0.0;
        for (int b = 0; b < B; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * HW;
            const double mu = mean[b * groups + g];
            const double inv = 1.0 / std::sqrt(var[b * groups + g] + eps);
            for (int i = 0; i < HW; ++i) {
                sg += gy[off + i] * (x[off + i] - mu) * inv;
                sb += gy[off + i];
            }
        }
        ggamma[c] += sg;
        gbeta[c] += sb;
    }
}

}  // namespace par

namespace ref {

void groupnorm_forward(int B, int C, int HW, int groups, double eps, const double* x,
                       const double* gamma, const double* beta, double* y, double* mean,
                       double* var) {
    const int Cg = C / groups;
    const std::size_t block = static_cast<std::size_t>(Cg) * HW;
    for (int b = 0; b < B; ++b) {
        for (int g = 0; g < groups; ++g) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + g * Cg) * HW;
            double mu = 0.0;
            for (std::size_t i = 0; i < block; ++i) mu += x[off + i];
            mu /= static_cast<double>(block);
            double vr = 0.0;
            for (std::size_t i = 0; i < block; ++i) {
                const double dv = x[off + i] - mu;
                vr += dv * dv;
            }
            vr /= static_cast<double>(block);
            mean[b * groups + g] = mu;
            var[b * groups + g] = vr;
            const double inv = 1.0 / std::sqrt(vr + eps);
            for (int cc = 0; cc < Cg; ++cc) {
                const int c = g * Cg + cc;
                for (int i = 0; i < HW; ++i) {
                    const std::size_t k = off + static_cast<std::size_t>(cc) * HW + i;
                    y[k] = gamma[c] * (x[k] - mu) * inv + beta[c];
                }
            }
        }
    }
}

void groupnorm_backward(int B, int C, int HW, int groups, double eps, const double* x,
                        const double* gamma, const double* mean, const double* var,
                        const double* gy, double* gx, double* ggamma, double* gbeta) {
    const int Cg = C / groups;
    const std::size_t block = static_cast<std::size_t>(Cg) * HW;
    for (int b = 0; b < B; ++b) {
        for (int g = 0; g < groups; ++g) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + g * Cg) * HW;
            const double mu = mean[b * groups + g];
            const double inv = 1.0 / std::sqrt(var[b * groups + g] + eps);
            double s1 = 0.0, s2 = 0.0;
            for (int cc = 0; cc < Cg; ++cc) {
                const int c = g * Cg + cc;
                for (int i = 0; i < HW; ++i) {
                    const std::size_t k = off + static_cast<std::size_t>(cc) * HW + i;
                    s1 += gamma[c] * gy[k];
                    s2 += gamma[c] * gy[k] * (x[k] - mu) * inv;
                }
            }
            for (int cc = 0; cc < Cg; ++cc) {
                const int c = g * Cg + cc;
                for (int i = 0; i < HW; ++i) {
                    const std::size_t k = off + static_cast<std::size_t>(cc) * HW + i;
                    const double xh = (x[k] - mu) * inv;
                    gx[k] = inv * (gamma[c] * gy[k] - (s1 + xh * s2) / static_cast<double>(block));
                }
            }
        }
    }
    for (int c = 0; c < C; ++c) {
        const int g = c / Cg;
        for (int b = 0; b < B; ++b) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * HW;
            const double mu = mean[b * groups + g];
            const double inv = 1.0 / std::sqrt(var[b * groups + g] + eps);
            for (int i = 0; i < HW; ++i) {
                ggamma[c] += gy[off + i] * (x[off + i] - mu) * inv;
                gbeta[c] += gy[off + i];
            }
        }
    }
}

}  // namespace ref

}  // namespace compdiff::kernels
