#pragma once

#include <Eigen/Dense>
#include <complex>
#include <string>
#include <vector>

#include "mcse/audio_io.hpp"

namespace mcse {

enum class Window { hann, sqrt_hann, blackman };

Window window_from_string(const std::string& name);
std::string to_string(Window w);

struct StftConfig {
    int fft_size = 1024;
    int hop = 256;
    Window window = Window::hann;

    int bins() const { return fft_size / 2 + 1; }
    bool operator==(const StftConfig&) const = default;
};

void validate(const StftConfig& cfg);

// Complex one-sided time-frequency representation: one T x B matrix per
// channel, DC in column 0, Nyquist in column B-1.
struct Spectrogram {
    std::vector<Eigen::MatrixXcd> data;  // per channel, frames x bins
    StftConfig config;
    int sample_rate = 0;

    int channels() const { return static_cast<int>(data.size()); }
    Eigen::Index frames() const { return data.empty() ? 0 : data[0].rows(); }
    int bins() const { return data.empty() ? 0 : static_cast<int>(data[0].cols()); }
};

// Analysis. The signal is zero padded by fft_size - hop on the left so the
// first frames taper in, giving T = 1 + ceil(N / hop) frames.
Spectrogram stft(const Waveform& w, const StftConfig& cfg);

// Weighted overlap-add synthesis, normalized per sample by the accumulated
// squared window, then cut/padded to out_len. Exact inverse of stft for any
// supported window wherever window coverage is nonzero.
Waveform istft(const Spectrogram& s, const StftConfig& cfg, Eigen::Index out_len);

// Entrywise |y_m(t, b)| of one channel.
Eigen::MatrixXd magnitude(const Spectrogram& s, int channel);

// Periodic analysis window of length cfg.fft_size.
std::vector<double> make_window(const StftConfig& cfg);

}  // namespace mcse
