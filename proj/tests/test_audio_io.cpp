#include <cstdint>
#include <fstream>

#include "doctest.h"
#include "mcse/audio_io.hpp"
#include "test_util.hpp"

using mcse::Error;
using mcse::read_wav;
using mcse::Waveform;
using mcse::WavEncoding;
using mcse::write_wav;

TEST_SUITE("audio_io") {

TEST_CASE("pcm16 file round trip preserves shape and rate") {
    testutil::TempDir tmp("wav_shape");
    Waveform w = testutil::random_waveform(1, 16000, 16000, 11);
    write_wav(tmp.str("a.wav"), w, WavEncoding::pcm16);
    const Waveform r = read_wav(tmp.str("a.wav"));
    CHECK(r.channels() == 1);
    CHECK(r.frames() == 16000);
    CHECK(r.sample_rate == 16000);
}

TEST_CASE("pcm16 full-scale negative maps to -1") {
    testutil::TempDir tmp("wav_neg");
    Waveform w;
    w.sample_rate = 8000;
    w.samples.resize(1, 3);
    w.samples << -1.0, 0.0, 1.0;
    write_wav(tmp.str("a.wav"), w, WavEncoding::pcm16);
    const Waveform r = read_wav(tmp.str("a.wav"));
    CHECK(r.samples(0, 0) == -1.0);                    // -32768 / 32768
    CHECK(r.samples(0, 1) == 0.0);
    CHECK(r.samples(0, 2) == 32767.0 / 32768.0);
}

TEST_CASE("pcm16 clips out-of-range amplitudes") {
    testutil::TempDir tmp("wav_clip");
    Waveform w;
    w.sample_rate = 8000;
    w.samples.resize(1, 2);
    w.samples << 1.5, -1.5;
    write_wav(tmp.str("a.wav"), w, WavEncoding::pcm16);
    const Waveform r = read_wav(tmp.str("a.wav"));
    CHECK(r.samples(0, 0) == 32767.0 / 32768.0);
    CHECK(r.samples(0, 1) == -1.0);
}

TEST_CASE("float32 round trip is bit exact") {
    testutil::TempDir tmp("wav_f32");
    mcse::Rng rng(3);
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(3, 777);
    for (int m = 0; m < 3; ++m)
        for (Eigen::Index i = 0; i < 777; ++i)
            w.samples(m, i) = static_cast<double>(static_cast<float>(rng.uniform(-1.0, 1.0)));
    write_wav(tmp.str("a.wav"), w, WavEncoding::float32);
    const Waveform r = read_wav(tmp.str("a.wav"));
    REQUIRE(r.channels() == 3);
    REQUIRE(r.frames() == 777);
    CHECK(r.samples == w.samples);
}

TEST_CASE("pcm16 round trip stays within one quantization step") {
    testutil::TempDir tmp("wav_q");
    Waveform w = testutil::random_waveform(2, 500, 16000, 5, 0.99);
    write_wav(tmp.str("a.wav"), w, WavEncoding::pcm16);
    const Waveform r = read_wav(tmp.str("a.wav"));
    CHECK((r.samples - w.samples).cwiseAbs().maxCoeff() <= 1.0 / 32768.0);
}

TEST_CASE("channel order is preserved") {
    testutil::TempDir tmp("wav_ch");
    Waveform w;
    w.sample_rate = 8000;
    w.samples.resize(2, 4);
    w.samples.row(0).setConstant(0.25);
    w.samples.row(1).setConstant(-0.5);
    write_wav(tmp.str("a.wav"), w, WavEncoding::float32);
    const Waveform r = read_wav(tmp.str("a.wav"));
    CHECK(r.samples.row(0).isConstant(0.25));
    CHECK(r.samples.row(1).isConstant(-0.5));
}

TEST_CASE("empty waveform writes a valid zero-length file") {
    testutil::TempDir tmp("wav_empty");
    Waveform w;
    w.sample_rate = 16000;
    w.samples.resize(1, 0);
    write_wav(tmp.str("a.wav"), w, WavEncoding::pcm16);
    const Waveform r = read_wav(tmp.str("a.wav"));
    CHECK(r.frames() == 0);
    CHECK(r.channels() == 1);
}

TEST_CASE("missing file raises an io error") {
    try {
        read_wav("/nonexistent/nowhere.wav");
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "io");
    }
}

TEST_CASE("garbage bytes raise a riff error") {
    testutil::TempDir tmp("wav_bad");
    std::ofstream f(tmp.str("bad.wav"), std::ios::binary);
    f << "this is not a wav file at all";
    f.close();
    try {
        read_wav(tmp.str("bad.wav"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "riff");
    }
}

TEST_CASE("unsupported encodings are rejected loudly") {
    testutil::TempDir tmp("wav_enc");
    // hand-built 24-bit PCM header with an empty data chunk
    std::vector<std::uint8_t> bytes;
    auto u16 = [&](std::uint16_t v) {
        bytes.push_back(v & 0xff);
        bytes.push_back(v >> 8);
    };
    auto u32 = [&](std::uint32_t v) {
        for (int i = 0; i < 4; ++i) bytes.push_back((v >> (8 * i)) & 0xff);
    };
    auto tag = [&](const char* t) { bytes.insert(bytes.end(), t, t + 4); };
    tag("RIFF");
    u32(36);
    tag("WAVE");
    tag("fmt ");
    u32(16);
    u16(1);      // PCM
    u16(1);      // mono
    u32(16000);
    u32(16000 * 3);
    u16(3);      // block align
    u16(24);     // unsupported bit depth
    tag("data");
    u32(0);
    std::ofstream f(tmp.str("x.wav"), std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
    f.close();
    try {
        read_wav(tmp.str("x.wav"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "encoding");
    }
}

TEST_CASE("truncated data chunk raises a riff error") {
    testutil::TempDir tmp("wav_trunc");
    Waveform w = testutil::random_waveform(1, 100, 16000, 9);
    write_wav(tmp.str("a.wav"), w, WavEncoding::pcm16);
    std::string bytes = testutil::read_file(tmp.str("a.wav"));
    bytes.resize(bytes.size() - 17);
    std::ofstream f(tmp.str("cut.wav"), std::ios::binary);
    f << bytes;
    f.close();
    try {
        read_wav(tmp.str("cut.wav"));
        FAIL("expected an error");
    } catch (const Error& e) {
        CHECK(e.code() == "riff");
    }
}

}  // TEST_SUITE
