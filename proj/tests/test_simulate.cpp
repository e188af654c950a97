#include <cmath>

#include "doctest.h"
#include "mcse/fft.hpp"
#include "mcse/simulate.hpp"
#include "test_util.hpp"

using mcse::make_scene;
using mcse::NoiseKind;
using mcse::Scene;
using mcse::synth_speech;
using mcse::Waveform;

namespace {

double channel_snr_db(const Scene& s, int channel) {
    const double c = s.clean_image.samples.row(channel).squaredNorm();
    const double n = s.noise_image.samples.row(channel).squaredNorm();
    return 10.0 * std::log10(c / n);
}

// integer-lag cross correlation argmax, the oracle for delay checks
int xcorr_peak(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int max_lag) {
    int best_lag = -max_lag;
    double best = -1e300;
    for (int lag = -max_lag; lag <= max_lag; ++lag) {
        double acc = 0.0;
        for (Eigen::Index i = 0; i < a.size(); ++i) {
            const Eigen::Index j = i + lag;
            if (j >= 0 && j < b.size()) acc += a(i) * b(j);
        }
        if (acc > best) {
            best = acc;
            best_lag = lag;
        }
    }
    return best_lag;
}

}  // namespace

TEST_SUITE("simulate") {

TEST_CASE("single-channel zero-delay scene hits the SNR setpoint exactly") {
    const Waveform clean = synth_speech(8000, 16000, 1);
    const Scene s = make_scene(clean, NoiseKind::white, 1, 0.0, {0.0}, 2);
    CHECK(std::abs(channel_snr_db(s, 0)) < 0.01);
    CHECK(s.clean_image.samples.row(0) == clean.samples.row(0));  // zero delay is exact
}

TEST_CASE("the same seed reproduces the scene bit for bit") {
    const Waveform clean = synth_speech(6000, 16000, 3);
    const Scene a = make_scene(clean, NoiseKind::white, 4, -3.0, {0, 1, 2, 3}, 42);
    const Scene b = make_scene(clean, NoiseKind::white, 4, -3.0, {0, 1, 2, 3}, 42);
    CHECK(a.mixture.samples == b.mixture.samples);
    CHECK(a.noise_image.samples == b.noise_image.samples);

    const Scene c = make_scene(clean, NoiseKind::white, 4, -3.0, {0, 1, 2, 3}, 43);
    CHECK((a.noise_image.samples - c.noise_image.samples).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("integer geometry shows up as a cross-correlation peak") {
    const Waveform clean = synth_speech(8000, 16000, 4);
    const Scene s = make_scene(clean, NoiseKind::white, 2, 20.0, {0.0, 8.0}, 5);
    const int peak = xcorr_peak(s.clean_image.samples.row(0).transpose(),
                                s.clean_image.samples.row(1).transpose(), 16);
    CHECK(peak == 8);
}

TEST_CASE("fractional geometry lands between the neighboring lags") {
    const Waveform clean = synth_speech(8000, 16000, 6);
    const Scene s = make_scene(clean, NoiseKind::white, 2, 20.0, {0.0, 2.5}, 7);
    const int peak = xcorr_peak(s.clean_image.samples.row(0).transpose(),
                                s.clean_image.samples.row(1).transpose(), 16);
    CHECK((peak == 2 || peak == 3));
}

TEST_CASE("mixture equals clean plus noise exactly") {
    const Waveform clean = synth_speech(5000, 16000, 8);
    const Scene s = make_scene(clean, NoiseKind::pink, 3, 4.0, {0, -1.5, 3}, 9);
    CHECK((s.mixture.samples - s.clean_image.samples - s.noise_image.samples)
              .cwiseAbs()
              .maxCoeff() == 0.0);
}

TEST_CASE("SNR setpoint holds across channel counts, kinds and seeds") {
    const Waveform clean = synth_speech(6000, 16000, 10);
    for (auto kind : {NoiseKind::white, NoiseKind::pink}) {
        for (std::uint64_t seed : {1ULL, 99ULL}) {
            const Scene s =
                make_scene(clean, kind, 4, -7.3, {0, 0.5, -0.5, 1.0}, seed);
            CHECK(std::abs(channel_snr_db(s, 0) + 7.3) < 0.01);
        }
    }
}

TEST_CASE("pink noise has flat octave energy where white doubles") {
    const Waveform clean = synth_speech(32768, 16000, 11);
    const Scene pink = make_scene(clean, NoiseKind::pink, 1, 0.0, {0.0}, 12);
    const Scene white = make_scene(clean, NoiseKind::white, 1, 0.0, {0.0}, 12);

    auto octave_energies = [](const Eigen::VectorXd& x) {
        const int n = 32768;
        std::vector<double> buf(n);
        for (int i = 0; i < n; ++i) buf[static_cast<std::size_t>(i)] = x(i);
        std::vector<std::complex<double>> spec(static_cast<std::size_t>(n / 2 + 1));
        mcse::fft::rfft(buf.data(), spec.data(), n);
        // octaves starting at bin 64: [64,128), [128,256), [256,512), [512,1024)
        std::vector<double> bands;
        for (int lo = 64; lo <= 512; lo *= 2) {
            double e = 0.0;
            for (int k = lo; k < 2 * lo; ++k) e += std::norm(spec[static_cast<std::size_t>(k)]);
            bands.push_back(e);
        }
        return bands;
    };

    const auto pe = octave_energies(pink.noise_image.samples.row(0).transpose());
    const auto we = octave_energies(white.noise_image.samples.row(0).transpose());
    for (std::size_t i = 1; i < pe.size(); ++i) {
        CHECK(pe[i] / pe[i - 1] == doctest::Approx(1.0).epsilon(0.35));  // flat per octave
        CHECK(we[i] / we[i - 1] == doctest::Approx(2.0).epsilon(0.35));  // doubles per octave
    }
}

TEST_CASE("recorded noise is decorrelated by circular shifts") {
    const Waveform clean = synth_speech(4000, 16000, 13);
    const Waveform recorded = testutil::random_waveform(1, 4000, 16000, 14);
    const Scene s = make_scene(clean, recorded, 3, 0.0, {0, 0, 0}, 15);
    // same marginal content, different alignment
    const Eigen::VectorXd a = s.noise_image.samples.row(0).transpose();
    const Eigen::VectorXd b = s.noise_image.samples.row(1).transpose();
    CHECK(std::abs(a.squaredNorm() - b.squaredNorm()) / a.squaredNorm() < 1e-9);
    CHECK((a - b).norm() > 1e-6);
}

TEST_CASE("oracle mask bridge equals manual composition") {
    const Waveform clean = synth_speech(6000, 16000, 16);
    const Scene s = make_scene(clean, NoiseKind::white, 2, 0.0, {0.0, 1.0}, 17);
    const mcse::StftConfig cfg;
    const mcse::MaskPair bridged = mcse::scene_to_oracle_masks(s, cfg, mcse::OracleKind::irm);

    const Waveform c0{s.clean_image.samples.row(0), 16000};
    const Waveform n0{s.noise_image.samples.row(0), 16000};
    const mcse::MaskPair manual =
        mcse::oracle_irm(mcse::stft(c0, cfg), mcse::stft(n0, cfg), 0);
    CHECK(bridged.speech == manual.speech);
    CHECK(bridged.noise == manual.noise);
}

TEST_CASE("invalid scenes are rejected") {
    Waveform silent;
    silent.sample_rate = 16000;
    silent.samples = Eigen::MatrixXd::Zero(1, 1000);
    CHECK_THROWS_AS(make_scene(silent, NoiseKind::white, 2, 0.0, {0, 0}, 1), mcse::Error);

    const Waveform clean = synth_speech(1000, 16000, 18);
    CHECK_THROWS_AS(make_scene(clean, NoiseKind::white, 2, 0.0, {0.0}, 1), mcse::Error);
    CHECK_THROWS_AS(make_scene(clean, NoiseKind::white, 2, 0.0, {0.0, 40.0}, 1), mcse::Error);
    CHECK_THROWS_AS(make_scene(clean, NoiseKind::white, 0, 0.0, {}, 1), mcse::Error);
}

TEST_CASE("scene directory round trip preserves float32 samples and metadata") {
    testutil::TempDir tmp("scene_io");
    const Waveform clean = synth_speech(3000, 16000, 19);
    Scene s = make_scene(clean, NoiseKind::white, 2, 1.5, {0.0, 4.0}, 20);
    // float32 storage: hold the images to storage precision before comparing
    for (Eigen::MatrixXd* m : {&s.mixture.samples, &s.clean_image.samples,
                               &s.noise_image.samples})
        *m = m->unaryExpr([](double v) { return static_cast<double>(static_cast<float>(v)); });
    s.mixture.samples = s.clean_image.samples + s.noise_image.samples;

    mcse::write_scene(tmp.str(), s, mcse::StftConfig{});
    const Scene r = mcse::read_scene(tmp.str());
    CHECK(r.clean_image.samples == s.clean_image.samples);
    CHECK(r.noise_image.samples == s.noise_image.samples);
    CHECK(r.snr_db == s.snr_db);
    CHECK(r.seed == s.seed);
    CHECK(r.source_delays == s.source_delays);

    const std::string sidecar = testutil::read_file(tmp.str("scene.json"));
    CHECK(sidecar.find("\"stft\"") != std::string::npos);
    CHECK(sidecar.find("\"fft_size\"") != std::string::npos);
}

TEST_CASE("synthetic speech is deterministic, bounded and voiced") {
    const Waveform a = synth_speech(8000, 16000, 21);
    const Waveform b = synth_speech(8000, 16000, 21);
    CHECK(a.samples == b.samples);
    CHECK(a.samples.cwiseAbs().maxCoeff() == doctest::Approx(0.5).epsilon(1e-12));
    CHECK(a.samples.cwiseAbs().sum() > 0.0);
    const Waveform c = synth_speech(8000, 16000, 22);
    CHECK((a.samples - c.samples).cwiseAbs().maxCoeff() > 0.0);
}

}  // TEST_SUITE
