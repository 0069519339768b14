#include "compdiff/fft.hpp"

#include <map>
#include <mutex>
#include <vector>

#include <fftw3.h>

namespace compdiff::fft {

namespace {

std::mutex g_plan_mutex;

fftw_plan get_plan(int n0, int n1, int sign) {
    static std::map<std::tuple<int, int, int>, fftw_plan> cache;
    std::lock_guard<std::mutex> lock(g_plan_mutex);
    const auto key = std::make_tuple(n0, n1, sign);
    auto it = cache.find(key);
    if (it != cache.end()) return it->second;
    // FFTW_UNALIGNED lets the plan run on arbitrary heap buffers via the
    // new-array execute interface.
    std::vector<fftw_complex> a(static_cast<std::size_t>(n0) * (n1 > 0 ? n1 : 1));
    std::vector<fftw_complex> b(a.size());
    fftw_plan p;
    if (n1 > 0)
        p = fftw_plan_dft_2d(n0, n1, a.data(), b.data(), sign,
                             FFTW_ESTIMATE | FFTW_UNALIGNED);
    else
        p = fftw_plan_dft_1d(n0, a.data(), b.data(), sign, FFTW_ESTIMATE | FFTW_UNALIGNED);
    cache.emplace(key, p);
    return p;
}

}  // namespace

void c2c_1d(int n, const std::complex<double>* in, std::complex<double>* out, int sign) {
    fftw_plan p = get_plan(n, 0, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

void c2c_2d(int n0, int n1, const std::complex<double>* in, std::complex<double>* out,
            int sign) {
    fftw_plan p = get_plan(n0, n1, sign);
    fftw_execute_dft(p, reinterpret_cast<fftw_complex*>(const_cast<std::complex<double>*>(in)),
                     reinterpret_cast<fftw_complex*>(out));
}

}  // namespace compdiff::fft
