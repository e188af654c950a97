#include "mcse/simulate.hpp"

#include <array>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <numbers>

#include "nlohmann/json.hpp"

#include "mcse/fft.hpp"

namespace mcse {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

namespace {

constexpr int kDelayHalf = 32;  // 64-tap fractional delay kernel
constexpr double kDelayBeta = 8.6;
constexpr double kMaxDelay = 32.0;

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

// Windowed-sinc fractional delay; an integer delay reduces to an exact
// sample shift because the sinc vanishes on the other taps.
VectorXd fractional_delay(const VectorXd& x, double delay) {
    const double floor_d = std::floor(delay);
    const long shift = static_cast<long>(floor_d);
    const double frac = delay - floor_d;

    if (frac == 0.0) {
        VectorXd y = VectorXd::Zero(x.size());
        for (Index i = 0; i < x.size(); ++i) {
            const Index src = i - shift;
            if (src >= 0 && src < x.size()) y(i) = x(src);
        }
        return y;
    }

    const double inv_i0 = 1.0 / bessel_i0(kDelayBeta);
    std::array<double, 2 * kDelayHalf> taps{};
    for (int k = -kDelayHalf + 1; k <= kDelayHalf; ++k) {
        const double u = k - frac;
        const double v = u / kDelayHalf;
        const double window =
            std::abs(v) <= 1.0 ? bessel_i0(kDelayBeta * std::sqrt(1.0 - v * v)) * inv_i0 : 0.0;
        taps[static_cast<std::size_t>(k + kDelayHalf - 1)] = sinc(u) * window;
    }

    VectorXd y = VectorXd::Zero(x.size());
    for (Index i = 0; i < x.size(); ++i) {
        double acc = 0.0;
        for (int k = -kDelayHalf + 1; k <= kDelayHalf; ++k) {
            const Index src = i - shift - k;
            if (src >= 0 && src < x.size())
                acc += x(src) * taps[static_cast<std::size_t>(k + kDelayHalf - 1)];
        }
        y(i) = acc;
    }
    return y;
}

// -3 dB/octave shaping of a white channel: amplitude falls as 1/sqrt(f).
VectorXd pink_from_white(const VectorXd& white) {
    const Index n = white.size();
    const int p = static_cast<int>(fft::next_pow2(static_cast<std::size_t>(n)));
    std::vector<double> buf(static_cast<std::size_t>(p), 0.0);
    for (Index i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = white(i);

    std::vector<std::complex<double>> spec(static_cast<std::size_t>(p / 2 + 1));
    fft::rfft(buf.data(), spec.data(), p);
    spec[0] = 0.0;
    for (int k = 1; k <= p / 2; ++k)
        spec[static_cast<std::size_t>(k)] /= std::sqrt(static_cast<double>(k));
    fft::irfft(spec.data(), buf.data(), p);

    VectorXd out(n);
    for (Index i = 0; i < n; ++i) out(i) = buf[static_cast<std::size_t>(i)];
    // restore unit sample variance roughly so SNR scaling starts sane
    const double rms = std::sqrt(out.squaredNorm() / static_cast<double>(n));
    if (rms > 0.0) out /= rms;
    return out;
}

MatrixXd make_noise_image(const NoiseSource& noise, int channels, Index n, Rng& rng) {
    MatrixXd img(channels, n);
    if (const auto* kind = std::get_if<NoiseKind>(&noise)) {
        for (int m = 0; m < channels; ++m) {
            VectorXd white(n);
            for (Index i = 0; i < n; ++i) white(i) = rng.gaussian();
            img.row(m) = (*kind == NoiseKind::pink) ? pink_from_white(white).transpose()
                                                    : white.transpose();
        }
    } else {
        const Waveform& w = std::get<Waveform>(noise);
        require(w.channels() == 1, "validation", "noise recording must be single channel");
        require(w.frames() >= n, "validation", "noise recording shorter than the clean signal");
        // independent-ish realizations from one recording: seeded circular shifts
        for (int m = 0; m < channels; ++m) {
            const Index offset =
                static_cast<Index>(rng.uniform() * static_cast<double>(w.frames()));
            for (Index i = 0; i < n; ++i)
                img(m, i) = w.samples(0, (offset + i) % w.frames());
        }
    }
    return img;
}

}  // namespace

Scene make_scene(const Waveform& clean, const NoiseSource& noise, int channels, double snr_db,
                 const std::vector<double>& delays, std::uint64_t seed) {
    require(clean.channels() == 1, "validation", "clean source must be single channel");
    require(clean.frames() >= 1, "validation", "clean source is empty");
    require(clean.samples.row(0).squaredNorm() > 0.0, "validation", "silent clean input");
    require(channels >= 1, "validation", "channel count must be >= 1");
    require(static_cast<int>(delays.size()) == channels, "validation",
            "geometry must provide one delay per channel");
    for (double d : delays)
        require(std::abs(d) <= kMaxDelay, "validation",
                "delays must satisfy |d| <= " + std::to_string(kMaxDelay));

    const Index n = clean.frames();
    Scene scene;
    scene.seed = seed;
    scene.snr_db = snr_db;
    scene.source_delays = delays;

    scene.clean_image.sample_rate = clean.sample_rate;
    scene.clean_image.samples.resize(channels, n);
    const VectorXd src = clean.samples.row(0).transpose();
    for (int m = 0; m < channels; ++m)
        scene.clean_image.samples.row(m) =
            fractional_delay(src, delays[static_cast<std::size_t>(m)]).transpose();

    Rng rng(seed);
    MatrixXd noise_img = make_noise_image(noise, channels, n, rng);
    const double noise_ref = noise_img.row(0).squaredNorm();
    require(noise_ref > 0.0, "validation", "noise realization is silent at channel 0");

    // one global scale pins the channel-0 SNR exactly
    const double clean_ref = scene.clean_image.samples.row(0).squaredNorm();
    const double gain =
        std::sqrt(clean_ref / noise_ref) * std::pow(10.0, -snr_db / 20.0);
    noise_img *= gain;

    scene.noise_image.sample_rate = clean.sample_rate;
    scene.noise_image.samples = std::move(noise_img);

    scene.mixture.sample_rate = clean.sample_rate;
    scene.mixture.samples = scene.clean_image.samples + scene.noise_image.samples;
    return scene;
}

MaskPair scene_to_oracle_masks(const Scene& scene, const StftConfig& cfg, OracleKind kind,
                               double ibm_threshold_db) {
    require(scene.clean_image.channels() >= 1 && scene.noise_image.channels() >= 1, "validation",
            "scene is missing component images");

    Waveform clean0{scene.clean_image.samples.row(0), scene.clean_image.sample_rate};
    Waveform noise0{scene.noise_image.samples.row(0), scene.noise_image.sample_rate};
    const Spectrogram clean_spec = stft(clean0, cfg);
    const Spectrogram noise_spec = stft(noise0, cfg);
    return kind == OracleKind::ibm ? oracle_ibm(clean_spec, noise_spec, 0, ibm_threshold_db)
                                   : oracle_irm(clean_spec, noise_spec, 0);
}

Waveform synth_speech(Eigen::Index num_samples, int sample_rate, std::uint64_t seed) {
    require(num_samples >= 1, "validation", "sample count must be positive");
    require(sample_rate > 0, "validation", "sample rate must be positive");

    Rng rng(seed);
    const double f0_base = rng.uniform(95.0, 150.0);
    const double vibrato_rate = rng.uniform(2.0, 4.0);
    const double vibrato_depth = rng.uniform(0.02, 0.05);
    const double syllable_rate = rng.uniform(2.2, 3.6);
    const double syllable_phase = rng.uniform(0.0, 2.0 * std::numbers::pi);
    const int harmonics = std::max(
        3, static_cast<int>(0.45 * sample_rate / (f0_base * (1.0 + vibrato_depth))));

    std::vector<double> amp(static_cast<std::size_t>(harmonics));
    std::vector<double> phase(static_cast<std::size_t>(harmonics));
    for (int h = 0; h < harmonics; ++h) {
        amp[static_cast<std::size_t>(h)] = 1.0 / (1.0 + h);
        phase[static_cast<std::size_t>(h)] = rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    VectorXd x(num_samples);
    double carrier_phase = 0.0;
    for (Index i = 0; i < num_samples; ++i) {
        const double t = static_cast<double>(i) / sample_rate;
        const double f0 =
            f0_base * (1.0 + vibrato_depth * std::sin(2.0 * std::numbers::pi * vibrato_rate * t));
        carrier_phase += 2.0 * std::numbers::pi * f0 / sample_rate;

        double voiced = 0.0;
        for (int h = 0; h < harmonics; ++h)
            voiced += amp[static_cast<std::size_t>(h)] *
                      std::sin((h + 1) * carrier_phase + phase[static_cast<std::size_t>(h)]);

        const double syllable =
            0.5 * (1.0 - std::cos(2.0 * std::numbers::pi * syllable_rate * t + syllable_phase));
        const double envelope = 0.08 + 0.92 * syllable * syllable;
        x(i) = envelope * (voiced + 0.2 * rng.gaussian());
    }
    const double peak = x.cwiseAbs().maxCoeff();
    if (peak > 0.0) x *= 0.5 / peak;

    Waveform out;
    out.sample_rate = sample_rate;
    out.samples = x.transpose();
    return out;
}

void write_scene(const std::string& dir, const Scene& scene, const StftConfig& stft_provenance) {
    std::filesystem::create_directories(dir);
    const std::filesystem::path base(dir);
    write_wav((base / "mixture.wav").string(), scene.mixture, WavEncoding::float32);
    write_wav((base / "clean.wav").string(), scene.clean_image, WavEncoding::float32);
    write_wav((base / "noise.wav").string(), scene.noise_image, WavEncoding::float32);

    nlohmann::json j;
    j["seed"] = scene.seed;
    j["snr_db"] = scene.snr_db;
    j["delays"] = scene.source_delays;
    j["channels"] = scene.mixture.channels();
    j["sample_rate"] = scene.mixture.sample_rate;
    j["stft"] = {{"fft_size", stft_provenance.fft_size},
                 {"hop", stft_provenance.hop},
                 {"window", to_string(stft_provenance.window)}};
    std::ofstream f(base / "scene.json", std::ios::trunc);
    if (!f) fail("io", "cannot write scene sidecar in " + dir);
    f << j.dump(2) << "\n";
}

Scene read_scene(const std::string& dir) {
    const std::filesystem::path base(dir);
    Scene scene;
    scene.mixture = read_wav((base / "mixture.wav").string());
    scene.clean_image = read_wav((base / "clean.wav").string());
    scene.noise_image = read_wav((base / "noise.wav").string());

    std::ifstream f(base / "scene.json");
    if (!f) fail("io", "cannot read scene sidecar in " + dir);
    nlohmann::json j;
    try {
        f >> j;
    } catch (const nlohmann::json::exception& e) {
        fail("riff", std::string("scene sidecar parse error: ") + e.what());
    }
    scene.seed = j.at("seed").get<std::uint64_t>();
    scene.snr_db = j.at("snr_db").get<double>();
    scene.source_delays = j.at("delays").get<std::vector<double>>();

    require(scene.mixture.channels() == scene.clean_image.channels() &&
                scene.mixture.channels() == scene.noise_image.channels(),
            "validation", "scene components disagree on channel count in " + dir);
    return scene;
}

}  // namespace mcse
