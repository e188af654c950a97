#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <array>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "mcse/audio_io.hpp"
#include "mcse/common.hpp"
#include "mcse/stft.hpp"

namespace testutil {

// Unique scratch directory, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        static int counter = 0;
        path_ = std::filesystem::temp_directory_path() /
                ("mcse_test_" + tag + "_" + std::to_string(::getpid()) + "_" +
                 std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    const std::filesystem::path& path() const { return path_; }
    std::string str(const std::string& rel = "") const { return (path_ / rel).string(); }

private:
    std::filesystem::path path_;
};

inline mcse::Waveform random_waveform(int channels, Eigen::Index frames, int sample_rate,
                                      std::uint64_t seed, double amplitude = 0.5) {
    mcse::Rng rng(seed);
    mcse::Waveform w;
    w.sample_rate = sample_rate;
    w.samples.resize(channels, frames);
    for (int m = 0; m < channels; ++m)
        for (Eigen::Index i = 0; i < frames; ++i)
            w.samples(m, i) = rng.uniform(-amplitude, amplitude);
    return w;
}

// Random complex spectrogram with a config consistent with its bin count.
inline mcse::Spectrogram random_spectrogram(int channels, Eigen::Index frames, int bins,
                                            std::uint64_t seed) {
    mcse::Rng rng(seed);
    mcse::Spectrogram s;
    s.config.fft_size = 2 * (bins - 1);
    s.config.hop = std::max(1, s.config.fft_size / 4);
    s.sample_rate = 16000;
    for (int m = 0; m < channels; ++m) {
        Eigen::MatrixXcd d(frames, bins);
        for (Eigen::Index t = 0; t < frames; ++t)
            for (int b = 0; b < bins; ++b)
                d(t, b) = std::complex<double>(rng.uniform(-1.0, 1.0), rng.uniform(-1.0, 1.0));
        s.data.push_back(std::move(d));
    }
    return s;
}

struct CliResult {
    int exit_code = 0;
    std::string out;
    std::string err;
};

inline std::string read_file(const std::string& path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream ss;
    ss << f.rdbuf();
    return ss.str();
}

inline CliResult run_cli(const std::string& args, const std::string& scratch_dir) {
    const std::string out_path = scratch_dir + "/cli_stdout.txt";
    const std::string err_path = scratch_dir + "/cli_stderr.txt";
    const std::string cmd =
        std::string(MCSE_CLI_BIN) + " " + args + " >" + out_path + " 2>" + err_path;
    const int raw = std::system(cmd.c_str());
    CliResult r;
    r.exit_code = (raw == -1) ? -1 : WEXITSTATUS(raw);
    r.out = read_file(out_path);
    r.err = read_file(err_path);
    return r;
}

}  // namespace testutil
