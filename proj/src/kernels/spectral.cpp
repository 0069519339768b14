#include <algorithm>
#include <vector>

#include "compdiff/kernels.hpp"

namespace compdiff::kernels {

namespace {

// Retained cells: rows [0,mt) u [n0-mt,n0), columns [0,mx). The weight array
// is (Ci, Co, 2mt, mx); weight row rw maps to spectrum row rw < mt ? rw
// : n0 - 2mt + rw. Each retained cell also drives its conjugate-mirror cell
// (with conj(w)) unless the mirror is itself retained, which keeps the output
// spectrum of a real input Hermitian except on self-conjugate lines.
struct Cell {
    int r, c, rw, rm, cm;
    bool mirror_out;  // mirror cell lies outside the retained set
};

std::vector<Cell> make_cells(int n0, int n1, int mt, int mx) {
    std::vector<Cell> cells;
    cells.reserve(static_cast<std::size_t>(2 * mt) * mx);
    auto retained = [&](int r, int c) {
        return c < mx && (r < mt || r >= n0 - mt);
    };
    for (int rw = 0; rw < 2 * mt; ++rw) {
        const int r = rw < mt ? rw : n0 - 2 * mt + rw;
        for (int c = 0; c < mx; ++c) {
            Cell cl;
            cl.r = r;
            cl.c = c;
            cl.rw = rw;
            cl.rm = (n0 - r) % n0;
            cl.cm = (n1 - c) % n1;
            const bool self = (cl.rm == r && cl.cm == c);
            cl.mirror_out = !self && !retained(cl.rm, cl.cm);
            cells.push_back(cl);
        }
    }
    return cells;
}

}  // namespace

namespace par {

void spectral_mix_forward(int Ci, int Co, int n0, int n1, int mt, int mx,
                          const std::complex<double>* xs, const std::complex<double>* w,
                          std::complex<double>* ys) {
    const std::size_t plane = static_cast<std::size_t>(n0) * n1;
    const std::size_t wr = static_cast<std::size_t>(2 * mt) * mx;
    const auto cells = make_cells(n0, n1, mt, mx);
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t o = 0; o < Co; ++o)
        std::fill_n(ys + o * plane, plane, std::complex<double>{0.0, 0.0});
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ic = 0; ic < static_cast<std::ptrdiff_t>(cells.size()); ++ic) {
        const Cell& cl = cells[ic];
        const std::size_t sp = static_cast<std::size_t>(cl.r) * n1 + cl.c;
        const std::size_t mp = static_cast<std::size_t>(cl.rm) * n1 + cl.cm;
        for (int o = 0; o < Co; ++o) {
            std::complex<double> acc{0.0, 0.0};
            std::complex<double> accm{0.0, 0.0};
            for (int i = 0; i < Ci; ++i) {
                const std::complex<double> wv =
                    w[(static_cast<std::size_t>(i) * Co + o) * wr + cl.rw * mx + cl.c];
                acc += wv * xs[i * plane + sp];
                if (cl.mirror_out) accm += std::conj(wv) * xs[i * plane + mp];
            }
            ys[o * plane + sp] = acc;
            if (cl.mirror_out) ys[o * plane + mp] = accm;
        }
    }
}

void spectral_mix_backward(int Ci, int Co, int n0, int n1, int mt, int mx,
                           const std::complex<double>* xs, const std::complex<double>* w,
                           const std::complex<double>* gys, std::complex<double>* gxs,
                           std::complex<double>* gw) {
    const std::size_t plane = static_cast<std::size_t>(n0) * n1;
    const std::size_t wr = static_cast<std::size_t>(2 * mt) * mx;
    const auto cells = make_cells(n0, n1, mt, mx);
    if (gxs) {
#pragma omp parallel for schedule(static)
        for (std::ptrdiff_t i = 0; i < Ci; ++i)
            std::fill_n(gxs + i * plane, plane, std::complex<double>{0.0, 0.0});
    }
#pragma omp parallel for schedule(static)
    for (std::ptrdiff_t ic = 0; ic < static_cast<std::ptrdiff_t>(cells.size()); ++ic) {
        const Cell& cl = cells[ic];
        const std::size_t sp = static_cast<std::size_t>(cl.r) * n1 + cl.c;
        const std::size_t mp = static_cast<std::size_t>(cl.rm) * n1 + cl.cm;
        for (int i = 0; i < Ci; ++i) {
            std::complex<double> gx{0.0, 0.0};
            std::complex<double> gxm{0.0, 0.0};
            for (int o = 0; o < Co; ++o) {
                const std::size_t wi =
                    (static_cast<std::size_t>(i) * Co + o) * wr + cl.rw * mx + cl.c;
                const std::complex<double> wv = w[wi];
                const std::complex<double> gy = gys[o * plane + sp];
                gx += std::conj(wv) * gy;
                std::complex<double> gwv = std::conj(xs[i * plane + sp]) * gy;
                if (cl.mirror_out) {
                    const std::complex<double> gym = gys[o * plane + mp];
                    gxm += wv * gym;
                    gwv += xs[i * plane + mp] * std::conj(gym);
                }
                if (gw) gw[wi] += gwv;
            }
            if (gxs) {
                gxs[i * plane + sp] = gx;
                if (cl.mirror_out) gxs[i * plane + mp] = gxm;
            }
        }
    }
}

}  // namespace par

namespace ref {

void spectral_mix_forward(int Ci, int Co, int n0, int n1, int mt, int mx,
                          const std::complex<double>* xs, const std::complex<double>* w,
                          std::complex<double>* ys) {
    const std::size_t plane = static_cast<std::size_t>(n0) * n1;
    const std::size_t wr = static_cast<std::size_t>(2 * mt) * mx;
    for (std::size_t i = 0; i < static_cast<std::size_t>(Co) * plane; ++i)
        ys[i] = {0.0, 0.0};
    for (const Cell& cl : make_cells(n0, n1, mt, mx)) {
        const std::size_t sp = static_cast<std::size_t>(cl.r) * n1 + cl.c;
        const std::size_t mp = static_cast<std::size_t>(cl.rm) * n1 + cl.cm;
        for (int o = 0; o < Co; ++o)
            for (int i = 0; i < Ci; ++i) {
                const std::complex<double> wv =
                    w[(static_cast<std::size_t>(i) * Co + o) * wr + cl.rw * mx + cl.c];
                ys[o * plane + sp] += wv * xs[i * plane + sp];
                if (cl.mirror_out) ys[o * plane + mp] += std::conj(wv) * xs[i * plane + mp];
            }
    }
}

void spectral_mix_backward(int Ci, int Co, int n0, int n1, int mt, int mx,
                           const std::complex<double>* xs, const std::complex<double>* w,
                           const std::complex<double>* gys, std::complex<double>* gxs,
                           std::complex<double>* gw) {
    const std::size_t plane = static_cast<std::size_t>(n0) * n1;
    const std::size_t wr = static_cast<std::size_t>(2 * mt) * mx;
    if (gxs)
        for (std::size_t i = 0; i < static_cast<std::size_t>(Ci) * plane; ++i)
            gxs[i] = {0.0, 0.0};
    for (const Cell& cl : make_cells(n0, n1, mt, mx)) {
        const std::size_t sp = static_cast<std::size_t>(cl.r) * n1 + cl.c;
        const std::size_t mp = static_cast<std::size_t>(cl.rm) * n1 + cl.cm;
        for (int o = 0; o < Co; ++o)
            for (int i = 0; i < Ci; ++i) {
                const std::size_t wi =
                    (static_cast<std::size_t>(i) * Co + o) * wr + cl.rw * mx + cl.c;
                if (gxs) {
                    gxs[i * plane + sp] += std::conj(w[wi]) * gys[o * plane + sp];
                    if (cl.mirror_out) gxs[i * plane + mp] += w[wi] * gys[o * plane + mp];
                }
                if (gw) {
                    gw[wi] += std::conj(xs[i * plane + sp]) * gys[o * plane + sp];
                    if (cl.mirror_out)
                        gw[wi] += xs[i * plane + mp] * std::conj(gys[o * plane + mp]);
                }
            }
    }
}

}  // namespace ref

}  // namespace compdiff::kernels
