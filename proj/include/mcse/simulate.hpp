#pragma once

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "mcse/audio_io.hpp"
#include "mcse/mask.hpp"
#include "mcse/stft.hpp"

namespace mcse {

// Synthetic multichannel scene: mixture = clean_image + noise_image
// samplewise, with the configured SNR holding exactly at channel 0.
struct Scene {
    Waveform mixture;
    Waveform clean_image;
    Waveform noise_image;
    std::vector<double> source_delays;  // per channel, samples
    double snr_db = 0.0;
    std::uint64_t seed = 0;
};

enum class NoiseKind { white, pink };

// Noise is either a generated kind or a caller-provided single-channel
// recording (decorrelated across channels by seeded circular shifts).
using NoiseSource = std::variant<NoiseKind, Waveform>;

// Builds an anechoic scene: the clean image of each channel is a
// 64-tap windowed-sinc fractional delay of the source, the noise image
// is an independent per-channel realization scaled to hit snr_db at
// channel 0. Deterministic given the seed.
Scene make_scene(const Waveform& clean, const NoiseSource& noise, int channels, double snr_db,
                 const std::vector<double>& delays, std::uint64_t seed);

enum class OracleKind { ibm, irm };

// Oracle masks from the separated channel-0 components of a scene.
MaskPair scene_to_oracle_masks(const Scene& scene, const StftConfig& cfg, OracleKind kind,
                               double ibm_threshold_db = 0.0);

// Deterministic synthetic speech: harmonic source with vibrato, a
// syllabic envelope and a fricative noise floor. Peak-normalized to 0.5.
Waveform synth_speech(Eigen::Index num_samples, int sample_rate, std::uint64_t seed);

// Scene directory layout: mixture.wav, clean.wav, noise.wav (float32)
// plus scene.json carrying {seed, snr_db, delays, channels, sample_rate}
// and the STFT config for provenance.
void write_scene(const std::string& dir, const Scene& scene, const StftConfig& stft_provenance);
Scene read_scene(const std::string& dir);

}  // namespace mcse
