#include "mcse/beamform.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <cmath>
#include <complex>

#include "mcse/fft.hpp"

namespace mcse {

using Eigen::Index;
using Eigen::MatrixXcd;
using Eigen::VectorXcd;
using Eigen::VectorXd;
using std::complex;

PsdPair estimate_psd(const Spectrogram& s, const MaskPair& masks) {
    const int channels = s.channels();
    require(channels >= 1, "validation", "spectrogram must contain channels");
    require(masks.frames() == s.frames() && masks.bins() == s.bins() &&
                masks.noise.rows() == masks.speech.rows() &&
                masks.noise.cols() == masks.speech.cols(),
            "shape", "mask shape does not match spectrogram");

    const Index T = s.frames();
    const int B = s.bins();

    PsdPair psd;
    psd.speech.assign(static_cast<std::size_t>(B), MatrixXcd::Zero(channels, channels));
    psd.noise.assign(static_cast<std::size_t>(B), MatrixXcd::Zero(channels, channels));

    VectorXcd y(channels);
    for (int b = 0; b < B; ++b) {
        MatrixXcd& phi_s = psd.speech[static_cast<std::size_t>(b)];
        MatrixXcd& phi_n = psd.noise[static_cast<std::size_t>(b)];
        for (Index t = 0; t < T; ++t) {
            for (int m = 0; m < channels; ++m) y(m) = s.data[static_cast<std::size_t>(m)](t, b);
            const double ws = masks.speech(t, b);
            const double wn = masks.noise(t, b);
            if (ws != 0.0) phi_s.noalias() += ws * (y * y.adjoint());
            if (wn != 0.0) phi_n.noalias() += wn * (y * y.adjoint());
        }
        phi_s = 0.5 * (phi_s + phi_s.adjoint()).eval();
        phi_n = 0.5 * (phi_n + phi_n.adjoint()).eval();
    }
    return psd;
}

namespace {

void check_psd_matrix(const MatrixXcd& phi, int bin) {
    if (!phi.allFinite())
        fail("domain", "PSD matrix has non-finite entries at bin " + std::to_string(bin));
    const double fro = phi.norm();
    const double herm_err = (phi - phi.adjoint()).norm() / std::max(1.0, fro);
    if (herm_err > 1e-10)
        fail("domain", "PSD matrix is not Hermitian at bin " + std::to_string(bin));
}

// Phase convention: rotate so the largest-modulus entry is real nonnegative.
void fix_phase(VectorXcd& f) {
    Index k = 0;
    double best = -1.0;
    for (Index i = 0; i < f.size(); ++i) {
        const double mag = std::abs(f(i));
        if (mag > best) {
            best = mag;
            k = i;
        }
    }
    if (best > 0.0) f *= std::conj(f(k)) / best;
}

}  // namespace

BeamformerWeights gev_solve(const PsdPair& psd, double diag_loading, int num_threads) {
    const int B = psd.bins();
    const int M = psd.mics();
    require(B >= 1 && M >= 1, "validation", "empty PSD pair");
    require(static_cast<int>(psd.noise.size()) == B, "shape",
            "speech/noise PSD bin counts differ");
    require(diag_loading >= 0.0, "validation", "diag_loading must be nonnegative");

    BeamformerWeights w;
    w.filters.resize(B, M);
    w.eigenvalues.resize(B);

    parallel_for(static_cast<std::size_t>(B), num_threads, [&](std::size_t bi) {
        const int b = static_cast<int>(bi);
        const MatrixXcd& phi_s = psd.speech[bi];
        const MatrixXcd& phi_n = psd.noise[bi];
        require(phi_s.rows() == M && phi_n.rows() == M, "shape",
                "inconsistent PSD dimensions at bin " + std::to_string(b));
        check_psd_matrix(phi_s, b);
        check_psd_matrix(phi_n, b);

        // relative loading keeps the solve scale-equivariant in the noise PSD
        const double trace = phi_n.real().trace();
        MatrixXcd loaded =
            phi_n + diag_loading * (trace / M) * MatrixXcd::Identity(M, M);
        Eigen::LLT<MatrixXcd> llt(loaded);
        if (llt.info() != Eigen::Success) {
            loaded += 1e-10 * MatrixXcd::Identity(M, M);
            llt.compute(loaded);
            if (llt.info() != Eigen::Success)
                fail("numeric", "noise PSD not factorizable at bin " + std::to_string(b));
        }

        // whiten: S = L^-1 Phi_s L^-H, Hermitian by construction
        const MatrixXcd a = llt.matrixL().solve(phi_s);
        MatrixXcd s_white = llt.matrixL().solve(a.adjoint()).adjoint();
        s_white = 0.5 * (s_white + s_white.adjoint()).eval();

        Eigen::SelfAdjointEigenSolver<MatrixXcd> es(s_white);
        if (es.info() != Eigen::Success)
            fail("numeric", "eigendecomposition failed at bin " + std::to_string(b));

        VectorXcd f = llt.matrixU().solve(es.eigenvectors().col(M - 1));
        const double norm = f.norm();
        if (norm > 0.0) f /= norm;
        fix_phase(f);

        w.filters.row(b) = f.transpose();
        w.eigenvalues(b) = es.eigenvalues()(M - 1);
    });
    return w;
}

Spectrogram apply_beamformer(const Spectrogram& s, const BeamformerWeights& w) {
    const int M = s.channels();
    require(M >= 1, "validation", "spectrogram must contain channels");
    require(w.mics() == M, "shape", "filter channel count does not match spectrogram");
    require(w.bins() == s.bins(), "shape", "filter bin count does not match spectrogram");

    const Index T = s.frames();
    const int B = s.bins();
    Spectrogram out;
    out.config = s.config;
    out.sample_rate = s.sample_rate;
    out.data.assign(1, MatrixXcd::Zero(T, B));
    for (int m = 0; m < M; ++m)
        out.data[0].noalias() +=
            s.data[static_cast<std::size_t>(m)] *
            w.filters.col(m).conjugate().asDiagonal();
    return out;
}

BeamformerWeights ban_postfilter(const BeamformerWeights& w, const PsdPair& psd) {
    require(w.bins() == psd.bins() && w.mics() == psd.mics(), "shape",
            "weights and PSD dimensions do not match");
    const int M = w.mics();

    BeamformerWeights out = w;
    for (int b = 0; b < w.bins(); ++b) {
        const VectorXcd f = w.filters.row(b).transpose();
        const MatrixXcd& phi_n = psd.noise[static_cast<std::size_t>(b)];
        const VectorXcd nf = phi_n * f;
        const double numerator = std::sqrt(nf.squaredNorm() / M);
        const double denominator = std::real(f.dot(nf));  // f^H Phi_n f
        const double gain = denominator > 1e-12 ? numerator / denominator : 1.0;
        out.filters.row(b) = gain * w.filters.row(b);
    }
    return out;
}

DelayEstimate gcc_phat_delay(const VectorXd& ref, const VectorXd& other, int max_lag) {
    require(max_lag >= 0, "validation", "max_lag must be nonnegative");
    require(ref.size() == other.size(), "validation", "inputs must have equal length");
    require(ref.size() >= 2 * static_cast<Index>(max_lag), "validation",
            "inputs must be at least 2 * max_lag long");

    if (ref.isZero(0.0) || other.isZero(0.0)) return {0, true};

    const Index n = ref.size();
    const int p = static_cast<int>(fft::next_pow2(static_cast<std::size_t>(n + max_lag)));
    std::vector<complex<double>> xs(static_cast<std::size_t>(p), 0.0);
    std::vector<complex<double>> ys(static_cast<std::size_t>(p), 0.0);
    for (Index i = 0; i < n; ++i) {
        xs[static_cast<std::size_t>(i)] = ref(i);
        ys[static_cast<std::size_t>(i)] = other(i);
    }
    fft::cfft(xs.data(), p, false);
    fft::cfft(ys.data(), p, false);

    // phase transform: keep only the cross-spectrum phase
    for (int k = 0; k < p; ++k) {
        const complex<double> c = xs[static_cast<std::size_t>(k)] *
                                  std::conj(ys[static_cast<std::size_t>(k)]);
        const double mag = std::abs(c);
        xs[static_cast<std::size_t>(k)] = mag > 1e-300 ? c / mag : complex<double>(0.0);
    }
    fft::cfft(xs.data(), p, true);

    // correlation value for lag l sits at index (-l) mod p
    auto value_at = [&](int lag) {
        const int idx = lag <= 0 ? -lag : p - lag;
        return xs[static_cast<std::size_t>(idx)].real();
    };

    int best_lag = 0;
    double best = value_at(0);
    for (int a = 1; a <= max_lag; ++a) {
        for (int lag : {-a, a}) {
            const double v = value_at(lag);
            if (v > best) {
                best = v;
                best_lag = lag;
            }
        }
    }
    return {best_lag, false};
}

Waveform delay_and_sum(const Waveform& w, int ref_channel, int max_lag) {
    const int M = w.channels();
    require(M >= 1, "validation", "waveform must contain channels");
    require(ref_channel >= 0 && ref_channel < M, "channel", "reference channel out of range");

    const Index n = w.frames();
    Waveform out;
    out.sample_rate = w.sample_rate;
    out.samples = Eigen::MatrixXd::Zero(1, n);

    const VectorXd ref = w.samples.row(ref_channel).transpose();
    for (int m = 0; m < M; ++m) {
        int lag = 0;
        if (m != ref_channel) {
            const VectorXd other = w.samples.row(m).transpose();
            lag = gcc_phat_delay(ref, other, max_lag).lag;
        }
        // shift channel m by its lag so it lines up with the reference
        for (Index i = 0; i < n; ++i) {
            const Index src = i + lag;
            if (src >= 0 && src < n) out.samples(0, i) += w.samples(m, src);
        }
    }
    out.samples /= static_cast<double>(M);
    return out;
}

Spectrogram mask_enhance_1ch(const Spectrogram& s, int channel,
                             const Eigen::MatrixXd& speech_mask) {
    require(channel >= 0 && channel < s.channels(), "channel", "channel index out of range");
    require(speech_mask.rows() == s.frames() && speech_mask.cols() == s.bins(), "shape",
            "mask shape does not match spectrogram");
    require(speech_mask.minCoeff() >= 0.0 && speech_mask.maxCoeff() <= 1.0, "validation",
            "mask values must lie in [0, 1]");

    Spectrogram out;
    out.config = s.config;
    out.sample_rate = s.sample_rate;
    out.data.assign(1, s.data[static_cast<std::size_t>(channel)].cwiseProduct(
                           speech_mask.cast<complex<double>>()));
    return out;
}

}  // namespace mcse
