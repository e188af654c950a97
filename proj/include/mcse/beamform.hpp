#pragma once

#include <Eigen/Dense>
#include <vector>

#include "mcse/mask.hpp"
#include "mcse/stft.hpp"

namespace mcse {

// Per-bin M x M Hermitian cross-power matrices for speech and noise.
struct PsdPair {
    std::vector<Eigen::MatrixXcd> speech;
    std::vector<Eigen::MatrixXcd> noise;

    int bins() const { return static_cast<int>(speech.size()); }
    int mics() const { return speech.empty() ? 0 : static_cast<int>(speech[0].rows()); }
};

// Per-bin complex filters plus the SNR eigenvalue attained by each.
struct BeamformerWeights {
    Eigen::MatrixXcd filters;    // bins x mics
    Eigen::VectorXd eigenvalues; // bins

    int bins() const { return static_cast<int>(filters.rows()); }
    int mics() const { return static_cast<int>(filters.cols()); }
};

// Mask-weighted outer-product sums over frames, one matrix per bin and
// component. Sums are deliberately not normalized by the mask mass; the
// filter direction below is invariant to that scale.
PsdPair estimate_psd(const Spectrogram& s, const MaskPair& masks);

// Per bin: principal generalized eigenvector of (speech, noise) PSDs,
// solved by Cholesky whitening of the loaded noise matrix. Filters come
// back unit norm with the largest-modulus entry rotated real nonnegative;
// eigenvalues are the attained SNR Rayleigh quotients.
BeamformerWeights gev_solve(const PsdPair& psd, double diag_loading = 1e-6,
                            int num_threads = 1);

// output(t, b) = f(b)^H y(t, b); single-channel spectrogram.
Spectrogram apply_beamformer(const Spectrogram& s, const BeamformerWeights& w);

// Blind analytic normalization: rescales each filter to undo the
// arbitrary per-bin gain of the eigenvector, using the noise PSD.
BeamformerWeights ban_postfilter(const BeamformerWeights& w, const PsdPair& psd);

struct DelayEstimate {
    int lag = 0;
    bool degenerate = false;  // set when either input is all zero
};

// Integer-lag GCC-PHAT delay of `other` relative to `ref` within
// [-max_lag, max_lag]. Ties prefer smaller |lag|, then the negative lag.
DelayEstimate gcc_phat_delay(const Eigen::VectorXd& ref, const Eigen::VectorXd& other,
                             int max_lag);

// Aligns every channel to ref_channel by its GCC-PHAT lag and averages.
Waveform delay_and_sum(const Waveform& w, int ref_channel, int max_lag);

// Hadamard product of one channel with a speech mask.
Spectrogram mask_enhance_1ch(const Spectrogram& s, int channel,
                             const Eigen::MatrixXd& speech_mask);

}  // namespace mcse
