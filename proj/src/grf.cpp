#include "compdiff/grf.hpp"

#include <cmath>
#include <complex>

#include "compdiff/fft.hpp"
#include "compdiff/rng.hpp"

namespace compdiff {

namespace {

// Periodized SE covariance sequence over an n-point circle with spacing h,
// unit amplitude. Summing a few wrap images keeps the sequence positive
// definite on the torus.
std::vector<double> periodized_se(int n, double h, double ell) {
    std::vector<double> c(n);
    const double period = n * h;
    for (int j = 0; j < n; ++j) {
        double s = 0.0;
        for (int m = -4; m <= 4; ++m) {
            const double r = j * h + m * period;
            s += std::exp(-r * r / (2.0 * ell * ell));
        }
        c[j] = s;
    }
    return c;
}

// Cosine taper to zero over the outer 10% of a Dirichlet domain.
double taper(int i, int n) {
    const double ramp = 0.1 * (n - 1);
    const double d = std::min(static_cast<double>(i), static_cast<double>(n - 1 - i));
    if (d >= ramp) return 1.0;
    return 0.5 * (1.0 - std::cos(3.14159265358979323846 * d / ramp));
}

void check_params(const GridSpec& g, const GrfParams& p, bool spacetime) {
    if (!(p.length_scale_x > 0.0) || !(p.amplitude > 0.0) ||
        (spacetime && !(p.length_scale_t > 0.0)))
        throw UsageError("GrfParams: length scales and amplitude must be positive");
    if (p.length_scale_x < 2.0 * g.dx())
        throw UsageError("grf_sample: length_scale_x below 2*dx is unresolvable");
    if (spacetime && p.length_scale_t < 2.0 * g.dt())
        throw UsageError("grf_sample: length_scale_t below 2*dt is unresolvable");
}

}  // namespace

GrfParams GrfParams::defaults(const GridSpec& g, std::uint64_t seed) {
    GrfParams p;
    p.length_scale_x = 0.2 * (g.x_max - g.x_min);
    p.length_scale_t = 0.2 * g.t_max;
    p.amplitude = 0.5;
    p.seed = seed;
    return p;
}

std::vector<double> grf_sample_1d(const GridSpec& g, const GrfParams& p) {
    check_params(g, p, false);
    const int n = g.nx;
    const auto cov = periodized_se(n, g.dx(), p.length_scale_x);

    std::vector<std::complex<double>> buf(n), spec(n);
    for (int i = 0; i < n; ++i) buf[i] = {cov[i], 0.0};
    fft::c2c_1d(n, buf.data(), spec.data(), -1);
    std::vector<double> sqrt_eig(n);
    for (int i = 0; i < n; ++i) sqrt_eig[i] = std::sqrt(std::max(spec[i].real(), 0.0));

    Rng rng(derive_seed(p.seed, 0x1du));
    for (int i = 0; i < n; ++i) buf[i] = {rng.normal(), 0.0};
    fft::c2c_1d(n, buf.data(), spec.data(), -1);
    for (int i = 0; i < n; ++i) spec[i] *= sqrt_eig[i];
    fft::c2c_1d(n, spec.data(), buf.data(), +1);

    std::vector<double> out(n);
    const double norm = 1.0 / n;
    // unit-amplitude field first, amplitude as one final multiply so outputs
    // scale exactly with it
    for (int i = 0; i < n; ++i) out[i] = p.amplitude * (buf[i].real() * norm);
    if (g.bc == Bc::Dirichlet)
        for (int i = 0; i < n; ++i) out[i] *= taper(i, n);
    return out;
}

Tensor grf_sample_2d(const GridSpec& g, const GrfParams& p) {
    check_params(g, p, true);
    const int nt = g.nt, nx = g.nx;
    const std::size_t N = static_cast<std::size_t>(nt) * nx;
    const auto ct = periodized_se(nt, g.dt(), p.length_scale_t);
    const auto cx = periodized_se(nx, g.dx(), p.length_scale_x);

    std::vector<std::complex<double>> buf(N), spec(N);
    for (int j = 0; j < nt; ++j)
        for (int i = 0; i < nx; ++i) buf[static_cast<std::size_t>(j) * nx + i] = {ct[j] * cx[i], 0.0};
    fft::c2c_2d(nt, nx, buf.data(), spec.data(), -1);
    std::vector<double> sqrt_eig(N);
    for (std::size_t i = 0; i < N; ++i) sqrt_eig[i] = std::sqrt(std::max(spec[i].real(), 0.0));

    Rng rng(derive_seed(p.seed, 0x2du));
    for (std::size_t i = 0; i < N; ++i) buf[i] = {rng.normal(), 0.0};
    fft::c2c_2d(nt, nx, buf.data(), spec.data(), -1);
    for (std::size_t i = 0; i < N; ++i) spec[i] *= sqrt_eig[i];
    fft::c2c_2d(nt, nx, spec.data(), buf.data(), +1);

    Tensor out({nt, nx});
    const double norm = 1.0 / static_cast<double>(N);
    for (std::size_t i = 0; i < N; ++i) out[i] = p.amplitude * (buf[i].real() * norm);
    if (g.bc == Bc::Dirichlet)
        for (int j = 0; j < nt; ++j)
            for (int i = 0; i < nx; ++i) out.at(j, i) *= taper(i, nx);
    return out;
}

}  // namespace compdiff
