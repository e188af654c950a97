#include "mcse/metrics.hpp"

#include <Eigen/Dense>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "mcse/fft.hpp"

namespace mcse {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

// modified Bessel I0 by power series; converges fast for the beta range here
double bessel_i0(double x) {
    const double half_sq = 0.25 * x * x;
    double term = 1.0, sum = 1.0;
    for (int k = 1; k < 64; ++k) {
        term *= half_sq / (static_cast<double>(k) * k);
        sum += term;
        if (term < sum * 1e-18) break;
    }
    return sum;
}

double sinc(double x) {
    if (x == 0.0) return 1.0;
    const double px = std::numbers::pi * x;
    return std::sin(px) / px;
}

constexpr int kResampleHalf = 32;  // 64 taps per polyphase branch
constexpr double kResampleBeta = 14.0;

double resample_tap(double u, double cutoff, double inv_i0_beta) {
    const double v = u / kResampleHalf;
    if (std::abs(v) > 1.0) return 0.0;
    const double window = bessel_i0(kResampleBeta * std::sqrt(1.0 - v * v)) * inv_i0_beta;
    return 2.0 * cutoff * sinc(2.0 * cutoff * u) * window;
}

}  // namespace

Waveform resample(const Waveform& w, int target_rate) {
    require(target_rate > 0, "validation", "target rate must be positive");
    require(w.sample_rate > 0, "validation", "source rate must be positive");
    if (target_rate == w.sample_rate) return w;

    const long long g = std::gcd(static_cast<long long>(w.sample_rate),
                                 static_cast<long long>(target_rate));
    const long long up = target_rate / g;    // output samples per a
    const long long down = w.sample_rate / g;
    const Index n = w.frames();
    const Index out_len = static_cast<Index>(
        std::llround(static_cast<double>(n) * target_rate / w.sample_rate));

    const double cutoff =
        0.5 * std::min(1.0, static_cast<double>(target_rate) / w.sample_rate);
    const double inv_i0_beta = 1.0 / bessel_i0(kResampleBeta);

    // source position of output j is j*down/up; fractional phases repeat
    // with period `up`, so the tap sets are precomputed per phase
    std::vector<std::vector<double>> phase_taps(static_cast<std::size_t>(up));
    for (long long r = 0; r < up; ++r) {
        const double frac = static_cast<double>(r) / static_cast<double>(up);
        auto& taps = phase_taps[static_cast<std::size_t>(r)];
        taps.resize(2 * kResampleHalf + 1);
        for (int d = -kResampleHalf; d <= kResampleHalf; ++d)
            taps[static_cast<std::size_t>(d + kResampleHalf)] =
                resample_tap(frac - d, cutoff, inv_i0_beta);
    }

    Waveform out;
    out.sample_rate = target_rate;
    out.samples = MatrixXd::Zero(w.channels(), out_len);
    for (int m = 0; m < w.channels(); ++m) {
        for (Index j = 0; j < out_len; ++j) {
            const long long num = static_cast<long long>(j) * down;
            const Index base = static_cast<Index>(num / up);
            const auto& taps = phase_taps[static_cast<std::size_t>(num % up)];
            double acc = 0.0;
            for (int d = -kResampleHalf; d <= kResampleHalf; ++d) {
                const Index src = base + d;
                if (src >= 0 && src < n)
                    acc += w.samples(m, src) * taps[static_cast<std::size_t>(d + kResampleHalf)];
            }
            out.samples(m, j) = acc;
        }
    }
    return out;
}

double sdr(const Waveform& reference, const Waveform& estimate, int max_delay) {
    require(reference.channels() == 1 && estimate.channels() == 1, "validation",
            "sdr expects single-channel inputs");
    require(reference.sample_rate == estimate.sample_rate, "validation",
            "sdr inputs must share the sample rate");
    require(max_delay >= 0, "validation", "max_delay must be nonnegative");

    const VectorXd x = reference.samples.row(0).transpose();
    const VectorXd e = estimate.samples.row(0).transpose();
    require(x.squaredNorm() > 0.0, "validation", "zero-energy reference");
    require(std::llabs(static_cast<long long>(x.size()) - static_cast<long long>(e.size())) <=
                max_delay,
            "validation", "length mismatch beyond delay window");

    const double e_total = e.squaredNorm();
    double best = -std::numeric_limits<double>::infinity();
    for (int d = -max_delay; d <= max_delay; ++d) {
        // overlap of the shifted reference x[n-d] with estimate index range
        const Index lo = std::max<Index>(0, d);
        const Index hi = std::min<Index>(e.size(), x.size() + d);
        if (lo >= hi) continue;
        double dot = 0.0, exx = 0.0, eee = 0.0;
        for (Index nidx = lo; nidx < hi; ++nidx) {
            const double xv = x(nidx - d);
            dot += e(nidx) * xv;
            exx += xv * xv;
            eee += e(nidx) * e(nidx);
        }
        if (exx <= 0.0) continue;
        const double alpha = dot / exx;
        const double sig = alpha * alpha * exx;
        double err = e_total - eee;  // estimate energy outside the overlap
        for (Index nidx = lo; nidx < hi; ++nidx) {
            const double r = alpha * x(nidx - d) - e(nidx);
            err += r * r;
        }
        double value;
        if (err <= sig * 1e-10) {
            value = 100.0;
        } else if (sig <= 0.0) {
            value = -std::numeric_limits<double>::infinity();
        } else {
            value = std::min(100.0, 10.0 * std::log10(sig / err));
        }
        best = std::max(best, value);
    }
    return best;
}

namespace {

constexpr int kStoiRate = 10000;
constexpr int kStoiFrame = 256;
constexpr int kStoiHop = 128;
constexpr int kStoiFft = 512;
constexpr int kStoiBins = kStoiFft / 2 + 1;
constexpr int kNumBands = 15;
constexpr double kLowestBandHz = 150.0;
constexpr int kSegmentFrames = 30;
constexpr double kSilentRangeDb = 40.0;

// MATLAB-style hanning: no zero endpoints.
std::vector<double> hanning_window(int n) {
    std::vector<double> w(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
        w[static_cast<std::size_t>(i)] =
            0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * (i + 1) / (n + 1)));
    return w;
}

Index frame_count(Index len) {
    return len < kStoiFrame ? 0 : (len - kStoiFrame) / kStoiHop + 1;
}

// Drops frames whose reference energy is more than 40 dB below the loudest
// reference frame; the reference mask applies to both signals. Kept frames
// are overlap-added back into contiguous signals.
void remove_silent_frames(VectorXd& x, VectorXd& y) {
    const std::vector<double> w = hanning_window(kStoiFrame);
    const Index frames = frame_count(x.size());
    require(frames >= 1, "validation", "input too short for intelligibility scoring");

    std::vector<double> energy_db(static_cast<std::size_t>(frames));
    double max_db = -std::numeric_limits<double>::infinity();
    for (Index i = 0; i < frames; ++i) {
        double sq = 0.0;
        for (int k = 0; k < kStoiFrame; ++k) {
            const double v = x(i * kStoiHop + k) * w[static_cast<std::size_t>(k)];
            sq += v * v;
        }
        const double db = 10.0 * std::log10(sq + 1e-300);
        energy_db[static_cast<std::size_t>(i)] = db;
        max_db = std::max(max_db, db);
    }

    std::vector<Index> kept;
    for (Index i = 0; i < frames; ++i)
        if (energy_db[static_cast<std::size_t>(i)] > max_db - kSilentRangeDb) kept.push_back(i);

    const Index out_len = (static_cast<Index>(kept.size()) - 1) * kStoiHop + kStoiFrame;
    VectorXd xs = VectorXd::Zero(out_len);
    VectorXd ys = VectorXd::Zero(out_len);
    for (std::size_t j = 0; j < kept.size(); ++j) {
        const Index src = kept[j] * kStoiHop;
        const Index dst = static_cast<Index>(j) * kStoiHop;
        for (int k = 0; k < kStoiFrame; ++k) {
            xs(dst + k) += x(src + k) * w[static_cast<std::size_t>(k)];
            ys(dst + k) += y(src + k) * w[static_cast<std::size_t>(k)];
        }
    }
    x = std::move(xs);
    y = std::move(ys);
}

// One-third-octave bands realized as groups of FFT bins. Edges are snapped
// to the nearest bin frequency; a band covers [left_edge, right_edge).
std::vector<std::pair<int, int>> third_octave_bands() {
    std::vector<std::pair<int, int>> bands;
    auto nearest_bin = [](double f) {
        int best = 0;
        double best_err = std::numeric_limits<double>::infinity();
        for (int k = 0; k < kStoiBins; ++k) {
            const double fk = static_cast<double>(k) * kStoiRate / kStoiFft;
            const double err = (fk - f) * (fk - f);
            if (err < best_err) {
                best_err = err;
                best = k;
            }
        }
        return best;
    };
    for (int j = 0; j < kNumBands; ++j) {
        const double center = kLowestBandHz * std::pow(2.0, j / 3.0);
        const int lo = nearest_bin(center * std::pow(2.0, -1.0 / 6.0));
        const int hi = nearest_bin(center * std::pow(2.0, 1.0 / 6.0));
        bands.emplace_back(lo, hi);
    }
    return bands;
}

// 15 x frames matrix of band amplitudes.
MatrixXd band_spectrogram(const VectorXd& x) {
    const std::vector<double> w = hanning_window(kStoiFrame);
    const auto bands = third_octave_bands();
    const Index frames = frame_count(x.size());

    MatrixXd out(kNumBands, frames);
    std::vector<double> buf(kStoiFft, 0.0);
    std::vector<std::complex<double>> spec(kStoiBins);
    for (Index t = 0; t < frames; ++t) {
        for (int k = 0; k < kStoiFrame; ++k)
            buf[static_cast<std::size_t>(k)] =
                x(t * kStoiHop + k) * w[static_cast<std::size_t>(k)];
        std::fill(buf.begin() + kStoiFrame, buf.end(), 0.0);
        fft::rfft(buf.data(), spec.data(), kStoiFft);
        for (int j = 0; j < kNumBands; ++j) {
            double sq = 0.0;
            for (int b = bands[static_cast<std::size_t>(j)].first;
                 b < bands[static_cast<std::size_t>(j)].second; ++b)
                sq += std::norm(spec[static_cast<std::size_t>(b)]);
            out(j, t) = std::sqrt(sq);
        }
    }
    return out;
}

// Shared preparation: mono check, 10 kHz resample, silent-frame removal,
// band decomposition. Requires at least one full 30-frame segment.
void stoi_front_end(const Waveform& reference, const Waveform& estimate, MatrixXd& x_bands,
                    MatrixXd& y_bands) {
    require(reference.channels() == 1 && estimate.channels() == 1, "validation",
            "intelligibility metrics expect single-channel inputs");
    require(reference.sample_rate == estimate.sample_rate, "validation",
            "inputs must share the sample rate");
    require(reference.frames() == estimate.frames(), "validation",
            "inputs must have equal length");

    VectorXd x = resample(reference, kStoiRate).samples.row(0).transpose();
    VectorXd y = resample(estimate, kStoiRate).samples.row(0).transpose();
    remove_silent_frames(x, y);

    x_bands = band_spectrogram(x);
    y_bands = band_spectrogram(y);
    require(x_bands.cols() >= kSegmentFrames, "validation",
            "fewer than 30 frames remain after silence removal");
}

double centered_correlation(const VectorXd& a, const VectorXd& b) {
    const VectorXd ac = a.array() - a.mean();
    const VectorXd bc = b.array() - b.mean();
    const double den = ac.norm() * bc.norm();
    if (den < 1e-20) {
        // two flat rows are only "equal" when both are flat
        return (ac.norm() < 1e-20 && bc.norm() < 1e-20) ? 1.0 : 0.0;
    }
    return ac.dot(bc) / den;
}

}  // namespace

double stoi(const Waveform& reference, const Waveform& estimate) {
    MatrixXd x_bands, y_bands;
    stoi_front_end(reference, estimate, x_bands, y_bands);

    const double clip_factor = 1.0 + std::pow(10.0, 15.0 / 20.0);  // -15 dB bound
    const Index frames = x_bands.cols();

    double sum = 0.0;
    long count = 0;
    for (Index m = kSegmentFrames - 1; m < frames; ++m) {
        for (int j = 0; j < kNumBands; ++j) {
            VectorXd xr = x_bands.row(j).segment(m - kSegmentFrames + 1, kSegmentFrames);
            VectorXd yr = y_bands.row(j).segment(m - kSegmentFrames + 1, kSegmentFrames);
            const double ynorm = yr.norm();
            const double alpha = ynorm > 0.0 ? xr.norm() / ynorm : 0.0;
            VectorXd yc = (alpha * yr).cwiseMin(clip_factor * xr);
            sum += centered_correlation(xr, yc);
            ++count;
        }
    }
    return sum / static_cast<double>(count);
}

namespace {

// Subtract row means and scale rows to unit norm, then the same down
// the columns.
void row_col_normalize(MatrixXd& m) {
    for (Index r = 0; r < m.rows(); ++r) {
        m.row(r).array() -= m.row(r).mean();
        const double norm = m.row(r).norm();
        if (norm > 1e-20) m.row(r) /= norm;
    }
    for (Index c = 0; c < m.cols(); ++c) {
        m.col(c).array() -= m.col(c).mean();
        const double norm = m.col(c).norm();
        if (norm > 1e-20) m.col(c) /= norm;
    }
}

}  // namespace

double estoi(const Waveform& reference, const Waveform& estimate) {
    MatrixXd x_bands, y_bands;
    stoi_front_end(reference, estimate, x_bands, y_bands);

    const Index frames = x_bands.cols();
    double sum = 0.0;
    long count = 0;
    for (Index m = kSegmentFrames - 1; m < frames; ++m) {
        MatrixXd xs = x_bands.block(0, m - kSegmentFrames + 1, kNumBands, kSegmentFrames);
        MatrixXd ys = y_bands.block(0, m - kSegmentFrames + 1, kNumBands, kSegmentFrames);
        row_col_normalize(xs);
        row_col_normalize(ys);
        sum += xs.cwiseProduct(ys).sum() / static_cast<double>(kSegmentFrames);
        ++count;
    }
    return sum / static_cast<double>(count);
}

MetricReport report(const Waveform& reference, const Waveform& estimate, const std::string& id,
                    const std::string& method) {
    MetricReport r;
    r.id = id;
    r.method = method;
    r.sdr_db = sdr(reference, estimate, 160);
    r.stoi = stoi(reference, estimate);
    r.estoi = estoi(reference, estimate);
    return r;
}

nlohmann::json report_to_json(const MetricReport& r) {
    nlohmann::json j;
    j["id"] = r.id;
    j["method"] = r.method;
    j["sdr_db"] = r.sdr_db;
    j["stoi"] = r.stoi;
    j["estoi"] = r.estoi;
    j["pesq"] = r.pesq.has_value() ? nlohmann::json(*r.pesq) : nlohmann::json(nullptr);
    return j;
}

MetricReport report_from_json(const nlohmann::json& j) {
    MetricReport r;
    r.id = j.at("id").get<std::string>();
    r.method = j.at("method").get<std::string>();
    r.sdr_db = j.at("sdr_db").get<double>();
    r.stoi = j.at("stoi").get<double>();
    r.estoi = j.at("estoi").get<double>();
    if (j.contains("pesq") && !j.at("pesq").is_null()) r.pesq = j.at("pesq").get<double>();
    return r;
}

MetricReport mean_report(const std::vector<MetricReport>& reports) {
    require(!reports.empty(), "validation", "cannot aggregate an empty report list");
    MetricReport m;
    m.id = "__mean__";
    m.method = reports.front().method;
    for (const auto& r : reports) {
        if (r.method != m.method) m.method = "mixed";
        m.sdr_db += r.sdr_db;
        m.stoi += r.stoi;
        m.estoi += r.estoi;
    }
    const double n = static_cast<double>(reports.size());
    m.sdr_db /= n;
    m.stoi /= n;
    m.estoi /= n;

    double pesq_sum = 0.0;
    long pesq_count = 0;
    for (const auto& r : reports)
        if (r.pesq) {
            pesq_sum += *r.pesq;
            ++pesq_count;
        }
    if (pesq_count > 0) m.pesq = pesq_sum / static_cast<double>(pesq_count);
    return m;
}

}  // namespace mcse
