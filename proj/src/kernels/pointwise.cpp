#include <cmath>

#include "compdiff/kernels.hpp"

namespace compdiff::kernels::par {

namespace {
inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt2Pi = 0.39894228040143267794;
}  // namespace

void silu_forward(std::size_t N, const double* x, double* y) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i)
        y[i] = x[i] * sigmoid(x[i]);
}

void silu_backward(std::size_t N, const double* x, const double* gy, double* gx) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i) {
        const double s = sigmoid(x[i]);
        gx[i] = gy[i] * s * (1.0 + x[i] * (1.0 - s));
    }
}

void gelu_forward(std::size_t N, const double* x, double* y) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i)
        y[i] = 0.5 * x[i] * (1.0 + std::erf(x[i] * kInvSqrt2));
}

void gelu_backward(std::size_t N, const double* x, const double* gy, double* gx) {
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i) {
        const double cdf = 0.5 * (1.0 + std::erf(x[i] * kInvSqrt2));
        const double pdf = kInvSqrt2Pi * std::exp(-0.5 * x[i] * x[i]);
        gx[i] = gy[i] * (cdf + x[i] * pdf);
    }
}

void film_forward(int B, int C, int HW, const double* x, const double* gamma,
                  const double* delta, double* y) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * HW;
            const double a = 1.0 + gamma[b * C + c];
            const double d = delta[b * C + c];
            for (int i = 0; i < HW; ++i) y[off + i] = a * x[off + i] + d;
        }
}

void film_backward(int B, int C, int HW, const double* x, const double* gamma,
                   const double* gy, double* gx, double* ggamma, double* gdelta) {
#pragma omp parallel for collapse(2) schedule(static)
    for (int b = 0; b < B; ++b)
        for (int c = 0; c < C; ++c) {
            const std::size_t off = (static_cast<std::size_t>(b) * C + c) * HW;
            const double a = 1.0 + gamma[b * C + c];
            double sg = 0.0, sd = 0.0;
            for (int i = 0; i < HW; ++i) {
                gx[off + i] = a * gy[off + i];
                sg += gy[off + i] * x[off + i];
                sd += gy[off + i];
            }
            ggamma[b * C + c] = sg;
            gdelta[b * C + c] = sd;
        }
}

void adam_step(std::size_t N, double* p, const double* g, double* m, double* v, double lr,
               double beta1, double beta2, double eps, int step) {
    const double bc1 = 1.0 - std::pow(beta1, step);
    const double bc2 = 1.0 - std::pow(beta2, step);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t i = 0; i < static_cast<std::ptrdiff_t>(N); ++i) {
        m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
        v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
        const double mh = m[i] / bc1;
        const double vh = v[i] / bc2;
        p[i] -= lr * mh / (std::sqrt(vh) + eps);
    }
}

}  // namespace compdiff::kernels::par
