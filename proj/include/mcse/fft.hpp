#pragma once

#include <complex>
#include <cstddef>

namespace mcse::fft {

// Thin wrappers over FFTW double precision. Plans are cached per size and
// guarded by a mutex; execution is thread safe. Inverse transforms include
// the 1/n normalization.

// n real samples -> n/2 + 1 one-sided complex bins.
void rfft(const double* in, std::complex<double>* out, int n);

// n/2 + 1 one-sided bins -> n real samples (scaled by 1/n).
void irfft(const std::complex<double>* in, double* out, int n);

// In-place complex transform of length n.
void cfft(std::complex<double>* data, int n, bool inverse);

std::size_t next_pow2(std::size_t n);

}  // namespace mcse::fft
