#include <algorithm>
#include <vector>

#include "compdiff/kernels.hpp"

#include <omp.h>

namespace compdiff::kernels {

namespace {
int g_threads = 0;  // 0 = OpenMP default

// 8-lane accumulator dot product: explicitly reassociated so the compiler can
// vectorize it without fast-math, with a fixed, thread-count-independent
// summation order.
inline double dot_lanes(const double* a, const double* b, int n) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lane[l] += a[i + l] * b[i + l];
    double s = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
               ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

inline double sum_lanes(const double* a, int n) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lane[l] += a[i + l];
    double s = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
               ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) s += a[i];
    return s;
}

}  // namespace

void set_threads(int n) {
    g_threads = n;
    if (n > 0) omp_set_num_threads(n);
}

int threads() { return g_threads > 0 ? g_threads : omp_get_max_threads(); }

namespace par {

void conv2d_forward(const ConvDims& d, const double* x, const double* w, const double* bias,
                    double* y) {
    const int Ho = d.Ho(), Wo = d.Wo();
    const std::size_t xsc = static_cast<std::size_t>(d.H) * d.W;
    const std::size_t xsb = static_cast<std::size_t>(d.Ci) * xsc;
    const std::size_t ysc = static_cast<std::size_t>(Ho) * Wo;
    const std::size_t ysb = static_cast<std::size_t>(d.Co) * ysc;
    const std::size_t wsc = static_cast<std::size_t>(d.Ci) * d.K * d.K;

#pragma omp parallel
    {
        std::vector<double> acc(static_cast<std::size_t>(4) * Wo);
#pragma omp for collapse(2) schedule(static)
    for (int b = 0; b < d.B; ++b) {
        for (int oy = 0; oy < Ho; ++oy) {
            for (int co0 = 0; co0 < d.Co; co0 += 4) {
                const int mb = std::min(4, d.Co - co0);
                for (int m = 0; m < mb; ++m)
                    std::fill_n(acc.data() + m * Wo, Wo, bias ? bias[co0 + m] : 0.0);
                for (int ci = 0; ci < d.Ci; ++ci) {
                    const double* xc = x + b * xsb + ci * xsc;
                    for (int ky = 0; ky < d.K; ++ky) {
                        const int iy = oy * d.stride + ky - d.pad;
                        if (iy < 0 || iy >= d.H) continue;
                        const double* xrow = xc + static_cast<std::size_t>(iy) * d.W;
                        for (int kx = 0; kx < d.K; ++kx) {
                            const int dx = kx - d.pad;
                            double wv[4];
                            for (int m = 0; m < mb; ++m)
                                wv[m] = w[(co0 + m) * wsc + (ci * d.K + ky) * d.K + kx];
                            if (d.stride == 1) {
                                const int lo = std::max(0, -dx);
                                const int hi = std::min(Wo, d.W - dx);
                                const double* xr = xrow + dx;
                                if (mb == 4) {
                                    double* a0 = acc.data();
                                    double* a1 = a0 + Wo;
                                    double* a2 = a1 + Wo;
                                    double* a3 = a2 + Wo;
                                    for (int ox = lo; ox < hi; ++ox) {
                                        const double xv = xr[ox];
                                        a0[ox] += wv[0] * xv;
                                        a1[ox] += wv[1] * xv;
                                        a2[ox] += wv[2] * xv;
                                        a3[ox] += wv[3] * xv;
                                    }
                                } else {
                                    for (int m = 0; m < mb; ++m) {
                                        double* am = acc.data() + m * Wo;
                                        const double wm = wv[m];
                                        for (int ox = lo; ox < hi; ++ox) am[ox] += wm * xr[ox];
                                    }
                                }
                            } else {
                                const int lo = dx < 0 ? (-dx + d.stride - 1) / d.stride : 0;
                                const int hi = std::min(Wo, (d.W - 1 - dx) / d.stride + 1);
                                for (int ox = lo; ox < hi; ++ox) {
                                    const double xv = xrow[ox * d.stride + dx];
                                    for (int m = 0; m < mb; ++m) acc[m * Wo + ox] += wv[m] * xv;
                                }
                            }
                        }
                    }
                }
                for (int m = 0; m < mb; ++m)
                    std::copy_n(acc.data() + m * Wo, Wo,
                                y + b * ysb + (co0 + m) * ysc + static_cast<std::size_t>(oy) * Wo);
            }
        }
    }
    }
}

void conv2d_backward(const ConvDims& d, const double* x, const double* w, const double* gy,
                     double* gx, double* gw, double* gb) {
    const int Ho = d.Ho(), Wo = d.Wo();
    const std::size_t xsc = static_cast<std::size_t>(d.H) * d.W;
    const std::size_t xsb = static_cast<std::size_t>(d.Ci) * xsc;
    const std::size_t ysc = static_cast<std::size_t>(Ho) * Wo;
    const std::size_t ysb = static_cast<std::size_t>(d.Co) * ysc;
    const std::size_t wsc = static_cast<std::size_t>(d.Ci) * d.K * d.K;

    if (gx) {
        // Each thread owns full gx rows (b, *, iy): no write races.
#pragma omp parallel
        {
        std::vector<double> acc(static_cast<std::size_t>(4) * d.W);
#pragma omp for collapse(2) schedule(static)
        for (int b = 0; b < d.B; ++b) {
            for (int iy = 0; iy < d.H; ++iy) {
                for (int ci0 = 0; ci0 < d.Ci; ci0 += 4) {
                    const int mb = std::min(4, d.Ci - ci0);
                    std::fill(acc.begin(), acc.end(), 0.0);
                    for (int co = 0; co < d.Co; ++co) {
                        const double* gc = gy + b * ysb + co * ysc;
                        for (int ky = 0; ky < d.K; ++ky) {
                            const int num = iy + d.pad - ky;
                            if (num < 0 || num % d.stride) continue;
                            const int oyy = num / d.stride;
                            if (oyy >= Ho) continue;
                            const double* grow = gc + static_cast<std::size_t>(oyy) * Wo;
                            for (int kx = 0; kx < d.K; ++kx) {
                                double wv[4];
                                for (int m = 0; m < mb; ++m)
                                    wv[m] = w[co * wsc + ((ci0 + m) * d.K + ky) * d.K + kx];
                                if (d.stride == 1) {
                                    const int dxo = d.pad - kx;
                                    const int lo = std::max(0, -dxo);
                                    const int hi = std::min(d.W, Wo - dxo);
                                    const double* gr = grow + dxo;
                                    if (mb == 4) {
                                        double* a0 = acc.data();
                                        double* a1 = a0 + d.W;
                                        double* a2 = a1 + d.W;
                                        double* a3 = a2 + d.W;
                                        for (int ix = lo; ix < hi; ++ix) {
                                            const double gv = gr[ix];
                                            a0[ix] += wv[0] * gv;
                                            a1[ix] += wv[1] * gv;
                                            a2[ix] += wv[2] * gv;
                                            a3[ix] += wv[3] * gv;
                                        }
                                    } else {
                                        for (int m = 0; m < mb; ++m) {
                                            double* am = acc.data() + m * d.W;
                                            const double wm = wv[m];
                                            for (int ix = lo; ix < hi; ++ix) am[ix] += wm * gr[ix];
                                        }
                                    }
                                } else {
                                    const int dx = kx - d.pad;
                                    const int lo = dx < 0 ? (-dx + d.stride - 1) / d.stride : 0;
                                    const int hi = std::min(Wo, (d.W - 1 - dx) / d.stride + 1);
                                    for (int ox = lo; ox < hi; ++ox)
                                        for (int m = 0; m < mb; ++m)
                                            acc[m * d.W + ox * d.stride + dx] += wv[m] * grow[ox];
                                }
                            }
                        }
                    }
                    for (int m = 0; m < mb; ++m)
                        for (int ix = 0; ix < d.W; ++ix)
                            gx[b * xsb + (ci0 + m) * xsc + static_cast<std::size_t>(iy) * d.W +
                               ix] = acc[m * d.W + ix];
                }
            }
        }
        }
    }

    if (gw || gb) {
        // Each thread owns one output channel co: gw[co][...] and gb[co].
#pragma omp parallel for schedule(static)
        for (int co = 0; co < d.Co; ++co) {
            for (int b = 0; b < d.B; ++b) {
                const double* gc = gy + b * ysb + co * ysc;
                if (gb) {
                    double s = 0.0;
                    for (int oy = 0; oy < Ho; ++oy)
                        s += sum_lanes(gc + static_cast<std::size_t>(oy) * Wo, Wo);
                    gb[co] += s;
                }
                if (!gw) continue;
                for (int ci = 0; ci < d.Ci; ++ci) {
                    const double* xc = x + b * xsb + ci * xsc;
                    for (int ky = 0; ky < d.K; ++ky) {
                        for (int kx = 0; kx < d.K; ++kx) {
                            const int dx = kx - d.pad;
                            double s = 0.0;
                            for (int oy = 0; oy < Ho; ++oy) {
                                const int iy = oy * d.stride + ky - d.pad;
                                if (iy < 0 || iy >= d.H) continue;
                                const double* grow = gc + static_cast<std::size_t>(oy) * Wo;
                                const double* xrow = xc + static_cast<std::size_t>(iy) * d.W;
                                if (d.stride == 1) {
                                    const int lo = std::max(0, -dx);
                                    const int hi = std::min(Wo, d.W - dx);
                                    s += dot_lanes(grow + lo, xrow + lo + dx, hi - lo);
                                } else {
                                    const int lo = dx < 0 ? (-dx + d.stride - 1) / d.stride : 0;
                                    const int hi = std::min(Wo, (d.W - 1 - dx) / d.stride + 1);
                                    for (int ox = lo; ox < hi; ++ox)
                                        s += grow[ox] * xrow[ox * d.stride + dx];
                                }
                            }
                            gw[co * wsc + (ci * d.K + ky) * d.K + kx] += s;
                        }
                    }
                }
            }
        }
    }
}

}  // namespace par

namespace ref {

void conv2d_forward(const ConvDims& d, const double* x, const double* w, const double* bias,
                    double* y) {
    const int Ho = d.Ho(), Wo = d.Wo();
    const std::size_t xsc = static_cast<std::size_t>(d.H) * d.W;
    const std::size_t xsb = static_cast<std::size_t>(d.Ci) * xsc;
    const std::size_t wsc = static_cast<std::size_t>(d.Ci) * d.K * d.K;
    std::size_t yi = 0;
    for (int b = 0; b < d.B; ++b)
        for (int co = 0; co < d.Co; ++co)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    double acc = bias ? bias[co] : 0.0;
                    for (int ci = 0; ci < d.Ci; ++ci)
                        for (int ky = 0; ky < d.K; ++ky)
                            for (int kx = 0; kx < d.K; ++kx) {
                                const int iy = oy * d.stride + ky - d.pad;
                                const int ix = ox * d.stride + kx - d.pad;
                                if (iy < 0 || iy >= d.H || ix < 0 || ix >= d.W) continue;
                                acc += w[co * wsc + (ci * d.K + ky) * d.K + kx] *
                                       x[b * xsb + ci * xsc + static_cast<std::size_t>(iy) * d.W +
                                         ix];
                            }
                    y[yi++] = acc;
                }
}

void conv2d_backward(const ConvDims& d, const double* x, const double* w, const double* gy,
                     double* gx, double* gw, double* gb) {
    const int Ho = d.Ho(), Wo = d.Wo();
    const std::size_t xsc = static_cast<std::size_t>(d.H) * d.W;
    const std::size_t xsb = static_cast<std::size_t>(d.Ci) * xsc;
    const std::size_t ysc = static_cast<std::size_t>(Ho) * Wo;
    const std::size_t ysb = static_cast<std::size_t>(d.Co) * ysc;
    const std::size_t wsc = static_cast<std::size_t>(d.Ci) * d.K * d.K;
    if (gx) std::fill_n(gx, static_cast<std::size_t>(d.B) * xsb, 0.0);
    for (int b = 0; b < d.B; ++b)
        for (int co = 0; co < d.Co; ++co)
            for (int oy = 0; oy < Ho; ++oy)
                for (int ox = 0; ox < Wo; ++ox) {
                    const double g = gy[b * ysb + co * ysc + static_cast<std::size_t>(oy) * Wo + ox];
                    if (gb) gb[co] += g;
                    for (int ci = 0; ci < d.Ci; ++ci)
                        for (int ky = 0; ky < d.K; ++ky)
                            for (int kx = 0; kx < d.K; ++kx) {
                                const int iy = oy * d.stride + ky - d.pad;
                                const int ix = ox * d.stride + kx - d.pad;
                                if (iy < 0 || iy >= d.H || ix < 0 || ix >= d.W) continue;
                                const std::size_t xi =
                                    b * xsb + ci * xsc + static_cast<std::size_t>(iy) * d.W + ix;
                                const std::size_t wi = co * wsc + (ci * d.K + ky) * d.K + kx;
                                if (gw) gw[wi] += g * x[xi];
                                if (gx) gx[xi] += g * w[wi];
                            }
                }
}

}  // namespace ref

}  // namespace compdiff::kernels
