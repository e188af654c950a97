#pragma once

#include <Eigen/Dense>
#include <string>

#include "mcse/common.hpp"

namespace mcse {

// Multichannel time-domain signal, one row per channel, amplitudes
// nominally in [-1, 1].
struct Waveform {
    Eigen::MatrixXd samples;  // channels x frames
    int sample_rate = 16000;

    int channels() const { return static_cast<int>(samples.rows()); }
    Eigen::Index frames() const { return samples.cols(); }
};

enum class WavEncoding { pcm16, float32 };

// Reads a RIFF/WAVE file. Supported encodings: PCM-16 (scaled by 1/32768)
// and IEEE float-32. Anything else is rejected with code "encoding";
// a broken container is rejected with code "riff"; a missing file with "io".
Waveform read_wav(const std::string& path);

// Writes a RIFF/WAVE file readable by read_wav and common tools.
// pcm16 rounds to nearest and clips at full scale.
void write_wav(const std::string& path, const Waveform& w,
               WavEncoding encoding = WavEncoding::float32);

}  // namespace mcse
