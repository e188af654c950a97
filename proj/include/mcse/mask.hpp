#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mcse/stft.hpp"

namespace mcse {

// Speech/noise time-frequency weights in [0, 1], frames x bins.
struct MaskPair {
    Eigen::MatrixXd speech;
    Eigen::MatrixXd noise;

    Eigen::Index frames() const { return speech.rows(); }
    Eigen::Index bins() const { return speech.cols(); }
};

// Ideal binary mask: speech wins where the local SNR strictly exceeds
// threshold_db. A bin with clean energy but no noise counts as speech;
// a bin with neither counts as noise.
MaskPair oracle_ibm(const Spectrogram& clean, const Spectrogram& noise, int channel,
                    double threshold_db);

// Ideal ratio mask from the power ratio; speech + noise == 1 exactly
// (0/0 resolves to noise).
MaskPair oracle_irm(const Spectrogram& clean, const Spectrogram& noise, int channel);

enum class CondenseMethod { median, mean };

// Entrywise median (default) or mean across per-channel mask estimates.
MaskPair condense(const std::vector<MaskPair>& per_channel,
                  CondenseMethod method = CondenseMethod::median);

// Mean binary cross-entropy over both masks, predictions clamped to
// [1e-7, 1 - 1e-7].
double bce_loss(const MaskPair& pred, const MaskPair& target);

// Per-bin zero-mean unit-variance normalization over frames, the feature
// prep in front of the mask network.
Eigen::MatrixXd normalize_features(const Eigen::MatrixXd& magnitudes);

}  // namespace mcse
