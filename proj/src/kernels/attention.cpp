#include <algorithm>
#include <cmath>
#include <vector>

#include "compdiff/kernels.hpp"

namespace compdiff::kernels {

namespace {

inline double dot8(const double* a, const double* b, int n) {
    double lane[8] = {0, 0, 0, 0, 0, 0, 0, 0};
    int i = 0;
    for (; i + 8 <= n; i += 8)
        for (int l = 0; l < 8; ++l) lane[l] += a[i + l] * b[i + l];
    double s = ((lane[0] + lane[1]) + (lane[2] + lane[3])) +
               ((lane[4] + lane[5]) + (lane[6] + lane[7]));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

}  // namespace

namespace par {

void attention_forward(int C, int n, const double* q, const double* k, const double* v,
                       double* probs, double* out) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    // probs row i: softmax over j of sum_c q[c,i] k[c,j] * scale
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* row = probs + static_cast<std::size_t>(i) * n;
        std::fill_n(row, n, 0.0);
        for (int c = 0; c < C; ++c) {
            const double qc = q[static_cast<std::size_t>(c) * n + i];
            const double* kr = k + static_cast<std::size_t>(c) * n;
            for (int j = 0; j < n; ++j) row[j] += qc * kr[j];
        }
        double mx = row[0] * scale;
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j] * scale);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] * scale - mx);
            sum += row[j];
        }
        const double inv = 1.0 / sum;
        for (int j = 0; j < n; ++j) row[j] *= inv;
    }
    // out[c,i] = sum_j probs[i,j] v[c,j]
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* row = probs + static_cast<std::size_t>(i) * n;
        for (int c = 0; c < C; ++c)
            out[static_cast<std::size_t>(c) * n + i] = dot8(row, v + static_cast<std::size_t>(c) * n, n);
    }
}

void attention_backward(int C, int n, const double* q, const double* k, const double* v,
                        const double* probs, const double* gout, double* gq, double* gk,
                        double* gv) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    std::vector<double> gs(static_cast<std::size_t>(n) * n);
    // gP[i,j] = sum_c gout[c,i] v[c,j]; then softmax backward to gS.
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        double* row = gs.data() + static_cast<std::size_t>(i) * n;
        std::fill_n(row, n, 0.0);
        for (int c = 0; c < C; ++c) {
            const double gc = gout[static_cast<std::size_t>(c) * n + i];
            const double* vr = v + static_cast<std::size_t>(c) * n;
            for (int j = 0; j < n; ++j) row[j] += gc * vr[j];
        }
        const double* p = probs + static_cast<std::size_t>(i) * n;
        const double dot = dot8(row, p, n);
        for (int j = 0; j < n; ++j) row[j] = p[j] * (row[j] - dot) * scale;
    }
    // gq[c,i] = sum_j gS[i,j] k[c,j]
#pragma omp parallel for schedule(static)
    for (int i = 0; i < n; ++i) {
        const double* row = gs.data() + static_cast<std::size_t>(i) * n;
        for (int c = 0; c < C; ++c)
            gq[static_cast<std::size_t>(c) * n + i] = dot8(row, k + static_cast<std::size_t>(c) * n, n);
    }
    // gk[c,j] = sum_i gS[i,j] q[c,i]; gv[c,j] = sum_i probs[i,j] gout[c,i]
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
        double* gkr = gk + static_cast<std::size_t>(c) * n;
        double* gvr = gv + static_cast<std::size_t>(c) * n;
        std::fill_n(gkr, n, 0.0);
        std::fill_n(gvr, n, 0.0);
        for (int i = 0; i < n; ++i) {
            const double qc = q[static_cast<std::size_t>(c) * n + i];
            const double gc = gout[static_cast<std::size_t>(c) * n + i];
            const double* gsr = gs.data() + static_cast<std::size_t>(i) * n;
            const double* pr = probs + static_cast<std::size_t>(i) * n;
            for (int j = 0; j < n; ++j) {
                gkr[j] += qc * gsr[j];
                gvr[j] += gc * pr[j];
            }
        }
    }
}

}  // namespace par

namespace ref {

void attention_forward(int C, int n, const double* q, const double* k, const double* v,
                       double* probs, double* out) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    for (int i = 0; i < n; ++i) {
        double* row = probs + static_cast<std::size_t>(i) * n;
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int c = 0; c < C; ++c)
                s += q[static_cast<std::size_t>(c) * n + i] * k[static_cast<std::size_t>(c) * n + j];
            row[j] = s * scale;
        }
        double mx = row[0];
        for (int j = 1; j < n; ++j) mx = std::max(mx, row[j]);
        double sum = 0.0;
        for (int j = 0; j < n; ++j) {
            row[j] = std::exp(row[j] - mx);
            sum += row[j];
        }
        for (int j = 0; j < n; ++j) row[j] /= sum;
    }
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                s += probs[static_cast<std::size_t>(i) * n + j] * v[static_cast<std::size_t>(c) * n + j];
            out[static_cast<std::size_t>(c) * n + i] = s;
        }
}

void attention_backward(int C, int n, const double* q, const double* k, const double* v,
                        const double* probs, const double* gout, double* gq, double* gk,
                        double* gv) {
    const double scale = 1.0 / std::sqrt(static_cast<double>(C));
    std::vector<double> gp(static_cast<std::size_t>(n) * n, 0.0);
    std::vector<double> gs(static_cast<std::size_t>(n) * n, 0.0);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            double s = 0.0;
            for (int c = 0; c < C; ++c)
                s += gout[static_cast<std::size_t>(c) * n + i] * v[static_cast<std::size_t>(c) * n + j];
            gp[static_cast<std::size_t>(i) * n + j] = s;
        }
    for (int i = 0; i < n; ++i) {
        double dot = 0.0;
        for (int j = 0; j < n; ++j)
            dot += gp[static_cast<std::size_t>(i) * n + j] * probs[static_cast<std::size_t>(i) * n + j];
        for (int j = 0; j < n; ++j) {
            const std::size_t ij = static_cast<std::size_t>(i) * n + j;
            gs[ij] = probs[ij] * (gp[ij] - dot) * scale;
        }
    }
    for (int c = 0; c < C; ++c)
        for (int i = 0; i < n; ++i) {
            double s = 0.0;
            for (int j = 0; j < n; ++j)
                s += gs[static_cast<std::size_t>(i) * n + j] * k[static_cast<std::size_t>(c) * n + j];
            gq[static_cast<std::size_t>(c) * n + i] = s;
        }
    for (int c = 0; c < C; ++c)
        for (int j = 0; j < n; ++j) {
            double sk = 0.0, sv = 0.0;
            for (int i = 0; i < n; ++i) {
                sk += gs[static_cast<std::size_t>(i) * n + j] * q[static_cast<std::size_t>(c) * n + i];
                sv += probs[static_cast<std::size_t>(i) * n + j] * gout[static_cast<std::size_t>(c) * n + i];
            }
            gk[static_cast<std::size_t>(c) * n + j] = sk;
            gv[static_cast<std::size_t>(c) * n + j] = sv;
        }
}

}  // namespace ref

}  // namespace compdiff::kernels
