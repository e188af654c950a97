#include "mcse/mask.hpp"

#include <algorithm>
#include <cmath>

namespace mcse {
namespace {

void check_pair_shapes(const Spectrogram& clean, const Spectrogram& noise, int channel) {
    require(channel >= 0 && channel < clean.channels() && channel < noise.channels(),
            "channel", "channel index out of range");
    require(clean.frames() == noise.frames() && clean.bins() == noise.bins(), "shape",
            "clean and noise spectrograms must share shape");
}

}  // namespace

MaskPair oracle_ibm(const Spectrogram& clean, const Spectrogram& noise, int channel,
                    double threshold_db) {
    check_pair_shapes(clean, noise, channel);
    const auto& c = clean.data[static_cast<std::size_t>(channel)];
    const auto& n = noise.data[static_cast<std::size_t>(channel)];

    MaskPair out;
    out.speech.resize(c.rows(), c.cols());
    for (Eigen::Index t = 0; t < c.rows(); ++t) {
        for (Eigen::Index b = 0; b < c.cols(); ++b) {
            const double a = std::abs(c(t, b));
            const double v = std::abs(n(t, b));
            bool speech;
            if (v == 0.0) {
                speech = a > 0.0;
            } else if (a == 0.0) {
                speech = false;
            } else {
                speech = 20.0 * std::log10(a / v) > threshold_db;
            }
            out.speech(t, b) = speech ? 1.0 : 0.0;
        }
    }
    out.noise = Eigen::MatrixXd::Ones(c.rows(), c.cols()) - out.speech;
    return out;
}

MaskPair oracle_irm(const Spectrogram& clean, const Spectrogram& noise, int channel) {
    check_pair_shapes(clean, noise, channel);
    const auto& c = clean.data[static_cast<std::size_t>(channel)];
    const auto& n = noise.data[static_cast<std::size_t>(channel)];

    MaskPair out;
    out.speech.resize(c.rows(), c.cols());
    out.noise.resize(c.rows(), c.cols());
    for (Eigen::Index t = 0; t < c.rows(); ++t) {
        for (Eigen::Index b = 0; b < c.cols(); ++b) {
            const double p = std::norm(c(t, b));
            const double q = std::norm(n(t, b));
            const double total = p + q;
            const double speech = total > 0.0 ? p / total : 0.0;
            out.speech(t, b) = speech;
            out.noise(t, b) = 1.0 - speech;
        }
    }
    return out;
}

MaskPair condense(const std::vector<MaskPair>& per_channel, CondenseMethod method) {
    require(!per_channel.empty(), "validation", "condense needs at least one mask pair");
    const Eigen::Index rows = per_channel[0].frames();
    const Eigen::Index cols = per_channel[0].bins();
    for (const auto& p : per_channel)
        require(p.frames() == rows && p.bins() == cols && p.noise.rows() == rows &&
                    p.noise.cols() == cols,
                "shape", "condense inputs must share shape");

    const std::size_t k = per_channel.size();
    if (k == 1) return per_channel[0];

    MaskPair out;
    out.speech.resize(rows, cols);
    out.noise.resize(rows, cols);
    std::vector<double> vals(k);
    auto combine = [&](auto select, Eigen::MatrixXd& dst) {
        for (Eigen::Index t = 0; t < rows; ++t) {
            for (Eigen::Index b = 0; b < cols; ++b) {
                for (std::size_t i = 0; i < k; ++i) vals[i] = select(per_channel[i])(t, b);
                if (method == CondenseMethod::mean) {
                    double sum = 0.0;
                    for (double v : vals) sum += v;
                    dst(t, b) = sum / static_cast<double>(k);
                } else {
                    std::sort(vals.begin(), vals.end());
                    dst(t, b) = (k % 2 == 1) ? vals[k / 2]
                                             : 0.5 * (vals[k / 2 - 1] + vals[k / 2]);
                }
            }
        }
    };
    combine([](const MaskPair& p) -> const Eigen::MatrixXd& { return p.speech; }, out.speech);
    combine([](const MaskPair& p) -> const Eigen::MatrixXd& { return p.noise; }, out.noise);
    return out;
}

double bce_loss(const MaskPair& pred, const MaskPair& target) {
    require(pred.frames() == target.frames() && pred.bins() == target.bins(), "shape",
            "prediction and target masks must share shape");
    constexpr double kEps = 1e-7;
    double sum = 0.0;
    auto accumulate = [&](const Eigen::MatrixXd& p, const Eigen::MatrixXd& y) {
        for (Eigen::Index t = 0; t < p.rows(); ++t) {
            for (Eigen::Index b = 0; b < p.cols(); ++b) {
                const double pc = std::clamp(p(t, b), kEps, 1.0 - kEps);
                sum -= y(t, b) * std::log(pc) + (1.0 - y(t, b)) * std::log(1.0 - pc);
            }
        }
    };
    accumulate(pred.speech, target.speech);
    accumulate(pred.noise, target.noise);
    const double count = 2.0 * static_cast<double>(pred.frames()) *
                         static_cast<double>(pred.bins());
    return sum / count;
}

Eigen::MatrixXd normalize_features(const Eigen::MatrixXd& magnitudes) {
    const Eigen::Index rows = magnitudes.rows();
    require(rows >= 1, "validation", "feature matrix must contain frames");
    Eigen::MatrixXd out(rows, magnitudes.cols());
    for (Eigen::Index b = 0; b < magnitudes.cols(); ++b) {
        const double mean = magnitudes.col(b).mean();
        const double var =
            (magnitudes.col(b).array() - mean).square().sum() / static_cast<double>(rows);
        const double inv_std = 1.0 / std::sqrt(var + 1e-12);
        out.col(b) = (magnitudes.col(b).array() - mean) * inv_std;
    }
    return out;
}

}  // namespace mcse
