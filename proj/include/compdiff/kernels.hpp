#pragma once

#include <complex>
#include <cstddef>

namespace compdiff::kernels {

// Threads used by the par:: kernels (and by sample-parallel loops elsewhere).
// Work is always partitioned by fixed ownership — one writer per output
// element, fixed accumulation order — so results are bitwise independent of
// the thread count.
void set_threads(int n);
int threads();

// ---------------------------------------------------------------------------
// Convolution. Tensors are (B, C, H, W) row-major; weights (Co, Ci, K, K);
// zero padding `pad`, square kernel, stride 1 or 2.
// Ho = (H + 2 pad - K) / stride + 1, likewise Wo.
// ---------------------------------------------------------------------------
struct ConvDims {
    int B, Ci, H, W, Co, K, stride, pad;
    int Ho() const { return (H + 2 * pad - K) / stride + 1; }
    int Wo() const { return (W + 2 * pad - K) / stride + 1; }
};

namespace par {

void conv2d_forward(const ConvDims& d, const double* x, const double* w, const double* bias,
                    double* y);
// gx may be null (skipped). gw/gb are accumulated into (caller zeroes them).
void conv2d_backward(const ConvDims& d, const double* x, const double* w, const double* gy,
                     double* gx, double* gw, double* gb);

// Group normalization over (Cg, H, W) blocks, Cg = C / groups.
// y = gamma_c * (x - mean) / sqrt(var + eps) + beta_c. mean/var are written
// per (b, g) for reuse in the backward pass.
void groupnorm_forward(int B, int C, int HW, int groups, double eps, const double* x,
                       const double* gamma, const double* beta, double* y, double* mean,
                       double* var);
void groupnorm_backward(int B, int C, int HW, int groups, double eps, const double* x,
                        const double* gamma, const double* mean, const double* var,
                        const double* gy, double* gx, double* ggamma, double* gbeta);

// Single-head self-attention core on channel-major tokens q,k,v: (C, n).
// probs (n, n) row-softmax of q^T k / sqrt(C) is written for the backward.
void attention_forward(int C, int n, const double* q, const double* k, const double* v,
                       double* probs, double* out);
void attention_backward(int C, int n, const double* q, const double* k, const double* v,
                        const double* probs, const double* gout, double* gq, double* gk,
                        double* gv);

// Pointwise ops (length-N arrays).
void silu_forward(std::size_t N, const double* x, double* y);
void silu_backward(std::size_t N, const double* x, const double* gy, double* gx);
void gelu_forward(std::size_t N, const double* x, double* y);
void gelu_backward(std::size_t N, const double* x, const double* gy, double* gx);

// FiLM: y[b,c,:] = (1 + gamma[b,c]) * x[b,c,:] + delta[b,c].
void film_forward(int B, int C, int HW, const double* x, const double* gamma,
                  const double* delta, double* y);
void film_backward(int B, int C, int HW, const double* x, const double* gamma,
                   const double* gy, double* gx, double* ggamma, double* gdelta);

// Adam with bias correction; updates p, m, v in place.
void adam_step(std::size_t N, double* p, const double* g, double* m, double* v, double lr,
               double beta1, double beta2, double eps, int step);

// Spectral mode mixing for the Fourier layer. xs/ys are full (C, n0, n1)
// complex spectra; weights w are (Ci, Co, 2*mt, mx) complex, applied on rows
// [0,mt) u [n0-mt,n0) and columns [0,mx), with the conjugate applied on the
// mirrored cells so the output spectrum stays Hermitian.
void spectral_mix_forward(int Ci, int Co, int n0, int n1, int mt, int mx,
                          const std::complex<double>* xs, const std::complex<double>* w,
                          std::complex<double>* ys);
void spectral_mix_backward(int Ci, int Co, int n0, int n1, int mt, int mx,
                           const std::complex<double>* xs, const std::complex<double>* w,
                           const std::complex<double>* gys, std::complex<double>* gxs,
                           std::complex<double>* gw);

}  // namespace par

// Serial reference implementations: straightforward loops, no OpenMP, kept
// for correctness testing and benchmarking against the parallel kernels.
namespace ref {

void conv2d_forward(const ConvDims& d, const double* x, const double* w, const double* bias,
                    double* y);
void conv2d_backward(const ConvDims& d, const double* x, const double* w, const double* gy,
                     double* gx, double* gw, double* gb);
void groupnorm_forward(int B, int C, int HW, int groups, double eps, const double* x,
                       const double* gamma, const double* beta, double* y, double* mean,
                       double* var);
void groupnorm_backward(int B, int C, int HW, int groups, double eps, const double* x,
                        const double* gamma, const double* mean, const double* var,
                        const double* gy, double* gx, double* ggamma, double* gbeta);
void attention_forward(int C, int n, const double* q, const double* k, const double* v,
                       double* probs, double* out);
void attention_backward(int C, int n, const double* q, const double* k, const double* v,
                        const double* probs, const double* gout, double* gq, double* gk,
                        double* gv);
void spectral_mix_forward(int Ci, int Co, int n0, int n1, int mt, int mx,
                          const std::complex<double>* xs, const std::complex<double>* w,
                          std::complex<double>* ys);
void spectral_mix_backward(int Ci, int Co, int n0, int n1, int mt, int mx,
                           const std::complex<double>* xs, const std::complex<double>* w,
                           const std::complex<double>* gys, std::complex<double>* gxs,
                           std::complex<double>* gw);

}  // namespace ref

}  // namespace compdiff::kernels
