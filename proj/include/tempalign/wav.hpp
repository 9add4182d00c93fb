#pragma once

#include "tempalign/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <limits>
#include <span>
#include <string>
#include <vector>

namespace tempalign {

inline constexpr int kDefaultSampleRate = 32000;

// Mono float samples in [-1, 1).
struct AudioBuffer {
    int sample_rate = kDefaultSampleRate;
    std::vector<float> samples;

    double duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

namespace wav_detail {

inline void put_u16(std::string& out, std::uint16_t v) {
    out.push_back(static_cast<char>(v & 0xff));
    out.push_back(static_cast<char>(v >> 8));
}

inline void put_u32(std::string& out, std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

inline std::uint32_t get_u32(const unsigned char* p) {
    return p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

inline std::uint16_t get_u16(const unsigned char* p) {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

} // namespace wav_detail

inline std::int16_t to_pcm16(float x) {
    const long v = std::lround(static_cast<double>(x) * 32768.0);
    return static_cast<std::int16_t>(std::clamp<long>(v, -32768, 32767));
}

// Serialises a mono 16-bit PCM WAV into memory.
inline std::string encode_wav_pcm16(std::span<const float> samples, int sample_rate) {
    using namespace wav_detail;
    const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
    std::string out;
    out.reserve(44 + data_bytes);
    out += "RIFF";
    put_u32(out, 36 + data_bytes);
    out += "WAVEfmt ";
    put_u32(out, 16);
    put_u16(out, 1); // PCM
    put_u16(out, 1); // mono
    put_u32(out, static_cast<std::uint32_t>(sample_rate));
    put_u32(out, static_cast<std::uint32_t>(sample_rate) * 2);
    put_u16(out, 2);
    put_u16(out, 16);
    out += "data";
    put_u32(out, data_bytes);
    for (float x : samples) put_u16(out, static_cast<std::uint16_t>(to_pcm16(x)));
    return out;
}

inline void write_wav_pcm16(const std::filesystem::path& path, std::span<const float> samples,
                            int sample_rate) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path.string());
    const auto bytes = encode_wav_pcm16(samples, sample_rate);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

// Linear-interpolation resampler. Adequate for mixing ingredients; not
// band-limited.
inline std::vector<float> resample_linear(std::span<const float> in, int from_rate, int to_rate) {
    if (from_rate == to_rate || in.empty()) return {in.begin(), in.end()};
    const auto out_len = static_cast<std::size_t>(
        std::llround(static_cast<double>(in.size()) * to_rate / from_rate));
    std::vector<float> out(out_len);
    const double step = static_cast<double>(from_rate) / to_rate;
    for (std::size_t i = 0; i < out_len; ++i) {
        const double pos = static_cast<double>(i) * step;
        const auto k = static_cast<std::size_t>(pos);
        const double frac = pos - static_cast<double>(k);
        const float a = in[std::min(k, in.size() - 1)];
        const float b = in[std::min(k + 1, in.size() - 1)];
        out[i] = static_cast<float>(a + (b - a) * frac);
    }
    return out;
}

// Decodes PCM (8/16/24/32-bit) or float32 WAV from memory, downmixes to mono.
inline AudioBuffer decode_wav(std::span<const unsigned char> bytes, const std::string& name) {
    using namespace wav_detail;
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw IoError(name + ": not a RIFF/WAVE file");
    }
    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;
    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const unsigned char* chunk = bytes.data() + pos;
        const std::uint32_t size = get_u32(chunk + 4);
        const std::size_t body = pos + 8;
        const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
        if (std::memcmp(chunk, "fmt ", 4) == 0 && avail >= 16) {
            format = get_u16(chunk + 8);
            channels = get_u16(chunk + 10);
            rate = get_u32(chunk + 12);
            bits = get_u16(chunk + 22);
            if (format == 0xFFFE && avail >= 26) format = get_u16(chunk + 8 + 24);
        } else if (std::memcmp(chunk, "data", 4) == 0) {
            data = chunk + 8;
            data_size = avail;
        }
        pos = body + size + (size & 1);
    }
    if (!data || channels == 0 || rate == 0) throw IoError(name + ": missing fmt or data chunk");
    const bool is_float = format == 3 && bits == 32;
    if (!(format == 1 && (bits == 8 || bits == 16 || bits == 24 || bits == 32)) && !is_float) {
        throw IoError(name + ": unsupported WAV encoding (format " + std::to_string(format) +
                      ", " + std::to_string(bits) + " bits)");
    }
    const std::size_t width = bits / 8;
    const std::size_t frames = data_size / (width * channels);
    AudioBuffer buf;
    buf.sample_rate = static_cast<int>(rate);
    buf.samples.resize(frames);
    for (std::size_t f = 0; f < frames; ++f) {
        double acc = 0.0;
        for (std::size_t c = 0; c < channels; ++c) {
            const unsigned char* p = data + (f * channels + c) * width;
            double v = 0.0;
            if (is_float) {
                float x;
                std::memcpy(&x, p, 4);
                v = x;
            } else if (bits == 8) {
                v = (static_cast<int>(p[0]) - 128) / 128.0;
            } else if (bits == 16) {
                v = static_cast<std::int16_t>(get_u16(p)) / 32768.0;
            } else if (bits == 24) {
                std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
                if (s & 0x800000) s -= 0x1000000;
                v = s / 8388608.0;
            } else {
                v = static_cast<std::int32_t>(get_u32(p)) / 2147483648.0;
            }
            acc += v;
        }
        buf.samples[f] = static_cast<float>(acc / channels);
    }
    return buf;
}

// Reads a WAV file as mono at `target_rate`, resampling if needed.
inline AudioBuffer read_wav(const std::filesystem::path& path, int target_rate = kDefaultSampleRate) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open audio file " + path.string());
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    AudioBuffer buf = decode_wav(bytes, path.string());
    if (buf.sample_rate != target_rate) {
        buf.samples = resample_linear(buf.samples, buf.sample_rate, target_rate);
        buf.sample_rate = target_rate;
    }
    return buf;
}

// RMS level of a window in dBFS (full-scale sine reads -3 dBFS). -inf for silence.
inline double rms_dbfs(std::span<const float> window) {
    if (window.empty()) return -std::numeric_limits<double>::infinity();
    double acc = 0.0;
    for (float x : window) acc += static_cast<double>(x) * x;
    const double rms = std::sqrt(acc / static_cast<double>(window.size()));
    if (rms == 0.0) return -std::numeric_limits<double>::infinity();
    return 20.0 * std::log10(rms);
}

} // namespace tempalign
