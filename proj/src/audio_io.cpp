#include "mcse/audio_io.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <vector>

namespace mcse {
namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;

std::uint16_t read_u16(const std::uint8_t* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

std::uint32_t read_u32(const std::uint8_t* p) {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_tag(std::vector<std::uint8_t>& out, const char* tag) {
    out.insert(out.end(), tag, tag + 4);
}

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t block_align = 0;
    std::uint16_t bits = 0;
};

}  // namespace

Waveform read_wav(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) fail("io", "cannot open file: " + path);
    std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                    std::istreambuf_iterator<char>());

    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0)
        fail("riff", "not a RIFF/WAVE file: " + path);

    FmtChunk fmt;
    bool have_fmt = false;
    const std::uint8_t* data = nullptr;
    std::size_t data_len = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* tag = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t chunk_len = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + chunk_len > bytes.size())
            fail("riff", "truncated chunk '" + std::string(tag, 4) + "' in " + path);
        if (std::memcmp(tag, "fmt ", 4) == 0) {
            if (chunk_len < 16) fail("riff", "fmt chunk too short in " + path);
            const std::uint8_t* p = bytes.data() + body;
            fmt.format = read_u16(p);
            fmt.channels = read_u16(p + 2);
            fmt.sample_rate = read_u32(p + 4);
            fmt.block_align = read_u16(p + 12);
            fmt.bits = read_u16(p + 14);
            have_fmt = true;
        } else if (std::memcmp(tag, "data", 4) == 0) {
            data = bytes.data() + body;
            data_len = chunk_len;
        }
        pos = body + chunk_len + (chunk_len & 1);  // chunks are word aligned
    }

    if (!have_fmt || data == nullptr) fail("riff", "missing fmt or data chunk in " + path);
    if (fmt.channels == 0 || fmt.sample_rate == 0)
        fail("riff", "invalid fmt fields in " + path);

    bool is_float;
    if (fmt.format == kFormatPcm && fmt.bits == 16) {
        is_float = false;
    } else if (fmt.format == kFormatIeeeFloat && fmt.bits == 32) {
        is_float = true;
    } else {
        fail("encoding", "unsupported encoding (format " + std::to_string(fmt.format) +
                             ", " + std::to_string(fmt.bits) + " bit) in " + path);
    }

    const std::size_t bytes_per_sample = fmt.bits / 8;
    const std::size_t frame_bytes = bytes_per_sample * fmt.channels;
    if (data_len % frame_bytes != 0)
        fail("riff", "data chunk is not a whole number of frames in " + path);
    const Eigen::Index frames = static_cast<Eigen::Index>(data_len / frame_bytes);

    Waveform w;
    w.sample_rate = static_cast<int>(fmt.sample_rate);
    w.samples.resize(fmt.channels, frames);
    for (Eigen::Index n = 0; n < frames; ++n) {
        const std::uint8_t* p = data + static_cast<std::size_t>(n) * frame_bytes;
        for (int m = 0; m < fmt.channels; ++m) {
            if (is_float) {
                float v;
                std::memcpy(&v, p + m * 4, 4);
                w.samples(m, n) = static_cast<double>(v);
            } else {
                const std::uint16_t u = read_u16(p + m * 2);
                const std::int16_t v = static_cast<std::int16_t>(u);
                w.samples(m, n) = static_cast<double>(v) / 32768.0;
            }
        }
    }
    return w;
}

void write_wav(const std::string& path, const Waveform& w, WavEncoding encoding) {
    require(w.channels() >= 1, "validation", "waveform must have at least one channel");
    require(w.sample_rate > 0, "validation", "sample rate must be positive");

    const int channels = w.channels();
    const Eigen::Index frames = w.frames();
    const bool is_float = encoding == WavEncoding::float32;
    const std::uint16_t bits = is_float ? 32 : 16;
    const std::uint32_t byte_rate =
        static_cast<std::uint32_t>(w.sample_rate) * channels * (bits / 8);
    const std::uint16_t block_align = static_cast<std::uint16_t>(channels * (bits / 8));
    const std::uint32_t data_len =
        static_cast<std::uint32_t>(frames) * block_align;

    std::vector<std::uint8_t> out;
    out.reserve(64 + data_len);
    put_tag(out, "RIFF");
    put_u32(out, 0);  // patched below
    put_tag(out, "WAVE");
    put_tag(out, "fmt ");
    put_u32(out, 16);
    put_u16(out, is_float ? kFormatIeeeFloat : kFormatPcm);
    put_u16(out, static_cast<std::uint16_t>(channels));
    put_u32(out, static_cast<std::uint32_t>(w.sample_rate));
    put_u32(out, byte_rate);
    put_u16(out, block_align);
    put_u16(out, bits);
    if (is_float) {
        // fact chunk is customary for non-PCM formats
        put_tag(out, "fact");
        put_u32(out, 4);
        put_u32(out, static_cast<std::uint32_t>(frames));
    }
    put_tag(out, "data");
    put_u32(out, data_len);

    for (Eigen::Index n = 0; n < frames; ++n) {
        for (int m = 0; m < channels; ++m) {
            const double x = w.samples(m, n);
            if (is_float) {
                const float v = static_cast<float>(x);
                std::uint32_t u;
                std::memcpy(&u, &v, 4);
                put_u32(out, u);
            } else {
                long q = std::lround(x * 32768.0);
                if (q > 32767) q = 32767;
                if (q < -32768) q = -32768;
                put_u16(out, static_cast<std::uint16_t>(static_cast<std::int16_t>(q)));
            }
        }
    }

    const std::uint32_t riff_len = static_cast<std::uint32_t>(out.size()) - 8;
    for (int i = 0; i < 4; ++i) out[4 + i] = static_cast<std::uint8_t>((riff_len >> (8 * i)) & 0xff);

    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) fail("io", "cannot open file for writing: " + path);
    f.write(reinterpret_cast<const char*>(out.data()), static_cast<std::streamsize>(out.size()));
    if (!f) fail("io", "write failed: " + path);
}

}  // namespace mcse
