// Licensed under the Apache License, Version 2.0 (the "License"); you
// may not use this file except in compliance with the License.  You
// may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or
// implied.  See the License for the specific language governing
// permissions and limitations under the License.

#include "deepgesi/audio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <numeric>

#include "deepgesi/errors.hpp"

namespace deepgesi {

namespace {

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatIeeeFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

auto read_u16(const unsigned char* p) -> std::uint16_t {
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
}

auto read_u32(const unsigned char* p) -> std::uint32_t {
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
}

void append_u16(std::vector<unsigned char>& out, std::uint16_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
}

void append_u32(std::vector<unsigned char>& out, std::uint32_t v) {
    out.push_back(static_cast<unsigned char>(v & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 8) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 16) & 0xFF));
    out.push_back(static_cast<unsigned char>((v >> 24) & 0xFF));
}

struct FmtChunk {
    std::uint16_t format = 0;
    std::uint16_t channels = 0;
    std::uint32_t sample_rate = 0;
    std::uint16_t bits_per_sample = 0;
};

auto decode_sample(const unsigned char* p, const FmtChunk& fmt) -> float {
    if (fmt.format == kFormatIeeeFloat) {
        float v = 0.0F;
        std::memcpy(&v, p, 4);
        return v;
    }
    if (fmt.bits_per_sample == 16) {
        const auto raw = static_cast<std::int16_t>(read_u16(p));
        return static_cast<float>(raw) / 32768.0F;
    }
    // PCM-24, little-endian, sign-extended.
    std::int32_t raw = static_cast<std::int32_t>(p[0]) | (static_cast<std::int32_t>(p[1]) << 8) |
                       (static_cast<std::int32_t>(p[2]) << 16);
    if ((raw & 0x800000) != 0) { raw |= ~0xFFFFFF; }
    return static_cast<float>(raw) / 8388608.0F;
}

void write_file_atomic(const std::string& path, const std::vector<unsigned char>& bytes) {
    const std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) { throw DataError("cannot open for writing: " + tmp); }
        out.write(reinterpret_cast<const char*>(bytes.data()),
                  static_cast<std::streamsize>(bytes.size()));
        if (!out) { throw DataError("short write: " + tmp); }
    }
    std::error_code ec;
    std::filesystem::rename(tmp, path, ec);
    if (ec) { throw DataError("cannot rename " + tmp + " to " + path + ": " + ec.message()); }
}

void write_wav(const std::string& path, const std::vector<float>& samples, int sample_rate_hz,
               bool as_float) {
    if (samples.empty()) { throw DataError("refusing to write zero-length audio: " + path); }
    if (sample_rate_hz <= 0) { throw DataError("invalid sample rate for " + path); }
    const std::uint16_t bytes_per_sample = as_float ? 4 : 2;
    const auto data_size = static_cast<std::uint32_t>(samples.size() * bytes_per_sample);

    std::vector<unsigned char> out;
    out.reserve(44 + data_size);
    out.insert(out.end(), {'R', 'I', 'F', 'F'});
    append_u32(out, 36 + data_size);
    out.insert(out.end(), {'W', 'A', 'V', 'E'});
    out.insert(out.end(), {'f', 'm', 't', ' '});
    append_u32(out, 16);
    append_u16(out, as_float ? kFormatIeeeFloat : kFormatPcm);
    append_u16(out, 1);  // mono
    append_u32(out, static_cast<std::uint32_t>(sample_rate_hz));
    append_u32(out, static_cast<std::uint32_t>(sample_rate_hz) * bytes_per_sample);
    append_u16(out, bytes_per_sample);
    append_u16(out, static_cast<std::uint16_t>(8 * bytes_per_sample));
    out.insert(out.end(), {'d', 'a', 't', 'a'});
    append_u32(out, data_size);

    if (as_float) {
        for (float s : samples) {
            unsigned char b[4];
            std::memcpy(b, &s, 4);
            out.insert(out.end(), b, b + 4);
        }
    } else {
        for (float s : samples) {
            const float clipped = std::clamp(s, -1.0F, 1.0F);
            const auto raw = static_cast<std::int16_t>(std::lrint(clipped * 32767.0F));
            append_u16(out, static_cast<std::uint16_t>(raw));
        }
    }
    write_file_atomic(path, out);
}

}  // namespace

auto load_wav(const std::string& path) -> AudioBuffer {
    std::ifstream in(path, std::ios::binary);
    if (!in) { throw DataError("cannot open audio file: " + path); }
    std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(in)),
                                     std::istreambuf_iterator<char>());
    if (bytes.size() < 12 || std::memcmp(bytes.data(), "RIFF", 4) != 0 ||
        std::memcmp(bytes.data() + 8, "WAVE", 4) != 0) {
        throw DataError("not a RIFF/WAVE file: " + path);
    }

    FmtChunk fmt;
    bool have_fmt = false;
    const unsigned char* data = nullptr;
    std::size_t data_size = 0;

    std::size_t pos = 12;
    while (pos + 8 <= bytes.size()) {
        const char* id = reinterpret_cast<const char*>(bytes.data() + pos);
        const std::uint32_t size = read_u32(bytes.data() + pos + 4);
        const std::size_t body = pos + 8;
        if (body + size > bytes.size()) { throw DataError("truncated WAV chunk in: " + path); }
        if (std::memcmp(id, "fmt ", 4) == 0) {
            if (size < 16) { throw DataError("malformed fmt chunk in: " + path); }
            const unsigned char* f = bytes.data() + body;
            fmt.format = read_u16(f);
            fmt.channels = read_u16(f + 2);
            fmt.sample_rate = read_u32(f + 4);
            fmt.bits_per_sample = read_u16(f + 14);
            if (fmt.format == kFormatExtensible) {
                // The first two bytes of the extensible GUID hold the
                // effective format tag.
                if (size < 40) { throw DataError("malformed extensible fmt chunk in: " + path); }
                fmt.format = read_u16(f + 24);
            }
            have_fmt = true;
        } else if (std::memcmp(id, "data", 4) == 0) {
            data = bytes.data() + body;
            data_size = size;
        }
        pos = body + size + (size % 2);  // chunks are word-aligned
    }

    if (!have_fmt) { throw DataError("missing fmt chunk in: " + path); }
    if (data == nullptr) { throw DataError("missing data chunk in: " + path); }
    if (fmt.channels == 0 || fmt.sample_rate == 0) {
        throw DataError("malformed fmt fields in: " + path);
    }

    const bool pcm_ok = fmt.format == kFormatPcm &&
                        (fmt.bits_per_sample == 16 || fmt.bits_per_sample == 24);
    const bool float_ok = fmt.format == kFormatIeeeFloat && fmt.bits_per_sample == 32;
    if (!pcm_ok && !float_ok) {
        throw DataError("unsupported WAV encoding (format tag " + std::to_string(fmt.format) +
                        ", " + std::to_string(fmt.bits_per_sample) + " bits) in: " + path);
    }

    const std::size_t bytes_per_sample = fmt.bits_per_sample / 8;
    const std::size_t frame_size = bytes_per_sample * fmt.channels;
    const std::size_t frames = data_size / frame_size;
    if (frames == 0) { throw DataError("zero-length audio in: " + path); }

    AudioBuffer buf;
    buf.sample_rate_hz = static_cast<int>(fmt.sample_rate);
    buf.source_path = path;
    buf.samples.resize(frames);
    const float inv_channels = 1.0F / static_cast<float>(fmt.channels);
    for (std::size_t i = 0; i < frames; ++i) {
        float acc = 0.0F;
        for (std::uint16_t c = 0; c < fmt.channels; ++c) {
            acc += decode_sample(data + i * frame_size + c * bytes_per_sample, fmt);
        }
        buf.samples[i] = acc * inv_channels;
    }
    return buf;
}

void write_wav_pcm16(const std::string& path, const std::vector<float>& samples,
                     int sample_rate_hz) {
    write_wav(path, samples, sample_rate_hz, /*as_float=*/false);
}

void write_wav_float32(const std::string& path, const std::vector<float>& samples,
                       int sample_rate_hz) {
    write_wav(path, samples, sample_rate_hz, /*as_float=*/true);
}

namespace {

// Modified Bessel function of the first kind, order zero (power series).
auto bessel_i0(double x) -> double {
    double sum = 1.0;
    double term = 1.0;
    const double half_x = x / 2.0;
    for (int k = 1; k < 64; ++k) {
        term *= (half_x / k) * (half_x / k);
        sum += term;
        if (term < 1e-16 * sum) { break; }
    }
    return sum;
}

}  // namespace

auto resample(const AudioBuffer& buf, int target_hz) -> AudioBuffer {
    if (buf.samples.empty()) { throw DataError("resample: empty buffer"); }
    if (buf.sample_rate_hz <= 0 || target_hz <= 0) {
        throw DataError("resample: sample rates must be positive");
    }
    if (buf.sample_rate_hz == target_hz) { return buf; }

    const int source_hz = buf.sample_rate_hz;
    const std::int64_t n_in = static_cast<std::int64_t>(buf.samples.size());
    const std::int64_t n_out =
        std::llround(static_cast<double>(n_in) * target_hz / source_hz);

    // Rational rate change target/source = up/down in lowest terms. Output
    // sample j sits at input instant j*down/up, whose fractional part cycles
    // through exactly `up` values, so one Kaiser-windowed sinc tap set is
    // precomputed per phase.
    const int g = std::gcd(source_hz, target_hz);
    const std::int64_t up = target_hz / g;
    const std::int64_t down = source_hz / g;

    constexpr int kTapsPerPhase = 64;
    constexpr double kBeta = 8.6;
    constexpr int kHalf = kTapsPerPhase / 2;
    const double cutoff = std::min(1.0, static_cast<double>(target_hz) / source_hz);
    const double i0_beta = bessel_i0(kBeta);

    // taps[p][k] weights input sample (base - kHalf + 1 + k) for fractional
    // offset p/up. Each phase is normalized to unit tap sum so constant
    // signals pass through exactly.
    std::vector<std::vector<float>> taps(static_cast<std::size_t>(up));
    for (std::int64_t p = 0; p < up; ++p) {
        auto& phase = taps[static_cast<std::size_t>(p)];
        phase.resize(kTapsPerPhase);
        const double frac = static_cast<double>(p) / static_cast<double>(up);
        double sum = 0.0;
        for (int k = 0; k < kTapsPerPhase; ++k) {
            const double offset = static_cast<double>(k - kHalf + 1) - frac;
            const double window_arg = offset / kHalf;
            double tap = 0.0;
            if (window_arg > -1.0 && window_arg < 1.0) {
                const double window =
                    bessel_i0(kBeta * std::sqrt(1.0 - window_arg * window_arg)) / i0_beta;
                const double x = std::numbers::pi * offset * cutoff;
                const double sinc = std::abs(x) < 1e-12 ? 1.0 : std::sin(x) / x;
                tap = cutoff * sinc * window;
            }
            phase[k] = static_cast<float>(tap);
            sum += tap;
        }
        for (float& t : phase) { t = static_cast<float>(t / sum); }
    }

    AudioBuffer out;
    out.sample_rate_hz = target_hz;
    out.source_path = buf.source_path;
    out.samples.resize(static_cast<std::size_t>(n_out));

    for (std::int64_t j = 0; j < n_out; ++j) {
        const std::int64_t num = j * down;           // input instant = num / up
        const std::int64_t base = num / up;
        const std::int64_t phase = num % up;
        const auto& t = taps[static_cast<std::size_t>(phase)];
        double acc = 0.0;
        const std::int64_t first = base - kHalf + 1;
        const std::int64_t lo = std::max<std::int64_t>(first, 0);
        const std::int64_t hi = std::min<std::int64_t>(first + kTapsPerPhase, n_in);
        for (std::int64_t i = lo; i < hi; ++i) {
            acc += static_cast<double>(t[static_cast<std::size_t>(i - first)]) *
                   buf.samples[static_cast<std::size_t>(i)];
        }
        out.samples[static_cast<std::size_t>(j)] = static_cast<float>(acc);
    }
    return out;
}

auto rms_normalize(const AudioBuffer& buf) -> AudioBuffer {
    if (buf.samples.empty()) { throw DataError("rms_normalize: empty buffer"); }
    double sum_sq = 0.0;
    for (float s : buf.samples) { sum_sq += static_cast<double>(s) * s; }
    const double rms = std::sqrt(sum_sq / static_cast<double>(buf.samples.size()));
    AudioBuffer out = buf;
    if (rms > 1e-12) {
        const auto g = static_cast<float>(1.0 / rms);
        for (float& s : out.samples) { s *= g; }
    }
    return out;
}

}  // namespace deepgesi
