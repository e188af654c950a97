#pragma once

#include <optional>
#include <string>
#include <vector>

#include "nlohmann/json.hpp"

#include "mcse/audio_io.hpp"

namespace mcse {

// Kaiser-windowed (beta = 14) polyphase sinc resampler, 64 taps per branch.
// Output length is round(frames * target / source).
Waveform resample(const Waveform& w, int target_rate);

// Scale-invariant, delay-searched signal-to-distortion ratio in dB.
// Searches integer delays in [-max_delay, max_delay] with the optimal
// scalar fit per delay; capped at +100 dB.
double sdr(const Waveform& reference, const Waveform& estimate, int max_delay);

// Short-time objective intelligibility at an internal 10 kHz rate:
// 256/128/512 STFT, 15 one-third-octave bands from 150 Hz, 30-frame
// segments, -15 dB clipping, mean of per-band segment correlations.
double stoi(const Waveform& reference, const Waveform& estimate);

// Extended STOI: same front end, no clipping, row+column normalized
// spectro-temporal segments scored by their mean inner product.
double estoi(const Waveform& reference, const Waveform& estimate);

struct MetricReport {
    std::string id;
    std::string method;
    double sdr_db = 0.0;
    double stoi = 0.0;
    double estoi = 0.0;
    std::optional<double> pesq;  // externally computed, never filled here
};

// sdr (max_delay 160) + stoi + estoi for one utterance.
MetricReport report(const Waveform& reference, const Waveform& estimate,
                    const std::string& id = "", const std::string& method = "");

nlohmann::json report_to_json(const MetricReport& r);
MetricReport report_from_json(const nlohmann::json& j);

// Arithmetic mean across reports, id "__mean__". pesq averages the
// non-null values only.
MetricReport mean_report(const std::vector<MetricReport>& reports);

}  // namespace mcse
