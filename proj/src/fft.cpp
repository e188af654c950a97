#include "mcse/fft.hpp"

#include <fftw3.h>

#include <map>
#include <mutex>
#include <vector>

#include "mcse/common.hpp"

namespace mcse::fft {
namespace {

enum class Kind { r2c, c2r, fwd, inv };

// fftw plan creation is not thread safe; execution via the new-array
// interface is. Plans are created with FFTW_UNALIGNED so they accept
// arbitrary caller buffers, and FFTW_ESTIMATE so planning is reproducible.
std::mutex plan_mutex;
std::map<std::pair<int, Kind>, fftw_plan> plan_cache;

fftw_plan get_plan(int n, Kind kind) {
    std::lock_guard<std::mutex> lock(plan_mutex);
    auto it = plan_cache.find({n, kind});
    if (it != plan_cache.end()) return it->second;

    const unsigned flags = FFTW_ESTIMATE | FFTW_UNALIGNED;
    fftw_plan plan = nullptr;
    if (kind == Kind::r2c) {
        std::vector<double> in(static_cast<std::size_t>(n));
        std::vector<fftw_complex> out(static_cast<std::size_t>(n / 2 + 1));
        plan = fftw_plan_dft_r2c_1d(n, in.data(), out.data(), flags);
    } else if (kind == Kind::c2r) {
        std::vector<fftw_complex> in(static_cast<std::size_t>(n / 2 + 1));
        std::vector<double> out(static_cast<std::size_t>(n));
        plan = fftw_plan_dft_c2r_1d(n, in.data(), out.data(), flags);
    } else {
        std::vector<fftw_complex> buf(static_cast<std::size_t>(n));
        plan = fftw_plan_dft_1d(n, buf.data(), buf.data(),
                                kind == Kind::fwd ? FFTW_FORWARD : FFTW_BACKWARD, flags);
    }
    if (plan == nullptr) fail("numeric", "fftw plan creation failed for n=" + std::to_string(n));
    plan_cache.emplace(std::make_pair(n, kind), plan);
    return plan;
}

}  // namespace

void rfft(const double* in, std::complex<double>* out, int n) {
    require(n >= 1, "config", "fft size must be >= 1");
    fftw_plan plan = get_plan(n, Kind::r2c);
    // r2c does not modify its input, the cast is for the C API only
    fftw_execute_dft_r2c(plan, const_cast<double*>(in),
                         reinterpret_cast<fftw_complex*>(out));
}

void irfft(const std::complex<double>* in, double* out, int n) {
    require(n >= 1, "config", "fft size must be >= 1");
    // c2r destroys its input, so work on a copy
    std::vector<std::complex<double>> tmp(in, in + n / 2 + 1);
    fftw_plan plan = get_plan(n, Kind::c2r);
    fftw_execute_dft_c2r(plan, reinterpret_cast<fftw_complex*>(tmp.data()), out);
    const double scale = 1.0 / n;
    for (int i = 0; i < n; ++i) out[i] *= scale;
}

void cfft(std::complex<double>* data, int n, bool inverse) {
    require(n >= 1, "config", "fft size must be >= 1");
    fftw_plan plan = get_plan(n, inverse ? Kind::inv : Kind::fwd);
    fftw_execute_dft(plan, reinterpret_cast<fftw_complex*>(data),
                     reinterpret_cast<fftw_complex*>(data));
    if (inverse) {
        const double scale = 1.0 / n;
        for (int i = 0; i < n; ++i) data[i] *= scale;
    }
}

std::size_t next_pow2(std::size_t n) {
    std::size_t p = 1;
    while (p < n) p <<= 1;
    return p;
}

}  // namespace mcse::fft
