#include "mcse/stft.hpp"

#include <cmath>
#include <numbers>

#include "mcse/fft.hpp"

namespace mcse {

Window window_from_string(const std::string& name) {
    if (name == "hann") return Window::hann;
    if (name == "sqrt_hann") return Window::sqrt_hann;
    if (name == "blackman") return Window::blackman;
    fail("config", "unknown window: " + name);
}

std::string to_string(Window w) {
    switch (w) {
        case Window::hann: return "hann";
        case Window::sqrt_hann: return "sqrt_hann";
        case Window::blackman: return "blackman";
    }
    return "hann";
}

void validate(const StftConfig& cfg) {
    require(cfg.fft_size >= 2, "config", "fft_size must be >= 2");
    require(cfg.fft_size % 2 == 0, "config", "fft_size must be even");
    require(cfg.hop >= 1, "config", "hop must be >= 1");
    require(cfg.hop <= cfg.fft_size, "config", "hop must not exceed fft_size");
}

std::vector<double> make_window(const StftConfig& cfg) {
    const int n = cfg.fft_size;
    std::vector<double> w(static_cast<std::size_t>(n));
    const double step = 2.0 * std::numbers::pi / n;
    for (int i = 0; i < n; ++i) {
        const double hann = 0.5 * (1.0 - std::cos(step * i));
        switch (cfg.window) {
            case Window::hann: w[i] = hann; break;
            case Window::sqrt_hann: w[i] = std::sqrt(hann); break;
            case Window::blackman:
                w[i] = 0.42 - 0.5 * std::cos(step * i) + 0.08 * std::cos(2.0 * step * i);
                break;
        }
    }
    return w;
}

Spectrogram stft(const Waveform& w, const StftConfig& cfg) {
    validate(cfg);
    require(w.frames() >= 1, "validation", "stft input must contain samples");

    const Eigen::Index n = w.frames();
    const int fft_size = cfg.fft_size;
    const int hop = cfg.hop;
    const int bins = cfg.bins();
    const Eigen::Index num_frames =
        1 + static_cast<Eigen::Index>((n + hop - 1) / hop);  // 1 + ceil(n / hop)
    const Eigen::Index left_pad = fft_size - hop;

    const std::vector<double> win = make_window(cfg);

    Spectrogram s;
    s.config = cfg;
    s.sample_rate = w.sample_rate;
    s.data.reserve(static_cast<std::size_t>(w.channels()));

    std::vector<double> frame(static_cast<std::size_t>(fft_size));
    std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins));
    for (int m = 0; m < w.channels(); ++m) {
        Eigen::MatrixXcd out(num_frames, bins);
        for (Eigen::Index t = 0; t < num_frames; ++t) {
            const Eigen::Index start = t * hop - left_pad;  // position in the raw signal
            for (int i = 0; i < fft_size; ++i) {
                const Eigen::Index idx = start + i;
                const double x = (idx >= 0 && idx < n) ? w.samples(m, idx) : 0.0;
                frame[static_cast<std::size_t>(i)] = x * win[static_cast<std::size_t>(i)];
            }
            fft::rfft(frame.data(), spec.data(), fft_size);
            for (int b = 0; b < bins; ++b) out(t, b) = spec[static_cast<std::size_t>(b)];
        }
        s.data.push_back(std::move(out));
    }
    return s;
}

Waveform istft(const Spectrogram& s, const StftConfig& cfg, Eigen::Index out_len) {
    validate(cfg);
    require(cfg == s.config, "config", "istft config does not match spectrogram config");
    require(s.channels() >= 1, "validation", "istft input must contain channels");
    require(out_len >= 0, "validation", "out_len must be nonnegative");

    const int fft_size = cfg.fft_size;
    const int hop = cfg.hop;
    const int bins = cfg.bins();
    require(s.bins() == bins, "config", "spectrogram bin count does not match config");

    const Eigen::Index num_frames = s.frames();
    const Eigen::Index padded_len = (num_frames - 1) * hop + fft_size;
    const Eigen::Index left_pad = fft_size - hop;
    const std::vector<double> win = make_window(cfg);

    // squared-window coverage, shared across channels
    std::vector<double> wsum(static_cast<std::size_t>(padded_len), 0.0);
    for (Eigen::Index t = 0; t < num_frames; ++t)
        for (int i = 0; i < fft_size; ++i)
            wsum[static_cast<std::size_t>(t * hop + i)] +=
                win[static_cast<std::size_t>(i)] * win[static_cast<std::size_t>(i)];

    Waveform out;
    out.sample_rate = s.sample_rate;
    out.samples = Eigen::MatrixXd::Zero(s.channels(), out_len);

    std::vector<std::complex<double>> spec(static_cast<std::size_t>(bins));
    std::vector<double> frame(static_cast<std::size_t>(fft_size));
    std::vector<double> acc(static_cast<std::size_t>(padded_len));
    for (int m = 0; m < s.channels(); ++m) {
        std::fill(acc.begin(), acc.end(), 0.0);
        for (Eigen::Index t = 0; t < num_frames; ++t) {
            for (int b = 0; b < bins; ++b) spec[static_cast<std::size_t>(b)] = s.data[m](t, b);
            fft::irfft(spec.data(), frame.data(), fft_size);
            for (int i = 0; i < fft_size; ++i)
                acc[static_cast<std::size_t>(t * hop + i)] +=
                    win[static_cast<std::size_t>(i)] * frame[static_cast<std::size_t>(i)];
        }
        for (Eigen::Index p = 0; p < out_len; ++p) {
            const Eigen::Index idx = p + left_pad;
            if (idx < padded_len && wsum[static_cast<std::size_t>(idx)] > 1e-15)
                out.samples(m, p) =
                    acc[static_cast<std::size_t>(idx)] / wsum[static_cast<std::size_t>(idx)];
        }
    }
    return out;
}

Eigen::MatrixXd magnitude(const Spectrogram& s, int channel) {
    require(channel >= 0 && channel < s.channels(), "channel",
            "channel index out of range: " + std::to_string(channel));
    return s.data[static_cast<std::size_t>(channel)].cwiseAbs();
}

}  // namespace mcse
