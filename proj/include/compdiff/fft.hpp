#pragma once

#include <complex>

namespace compdiff::fft {

// Unnormalized c2c DFTs backed by FFTW with a process-wide plan cache.
// sign -1 = forward, +1 = backward. in and out must be distinct buffers.
// Execution is thread-safe; plan creation is serialized internally.
void c2c_1d(int n, const std::complex<double>* in, std::complex<double>* out, int sign);
void c2c_2d(int n0, int n1, const std::complex<double>* in, std::complex<double>* out, int sign);

}  // namespace compdiff::fft
