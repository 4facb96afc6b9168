#pragma once

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <span>
#include <string>
#include <vector>

#include "nrsar/binary.hpp"
#include "nrsar/error.hpp"

namespace nrsar {

/// A sampled waveform. Channel-major storage: channels[c][i] is sample i of
/// channel c, in unit amplitude.
struct AudioClip {
    std::vector<std::vector<double>> channels;
    int sample_rate = 0;

    AudioClip() = default;
    AudioClip(std::vector<std::vector<double>> ch, int rate) : channels(std::move(ch)), sample_rate(rate) {}

    static AudioClip mono(std::vector<double> samples, int rate) {
        std::vector<std::vector<double>> ch;
        ch.push_back(std::move(samples));
        return {std::move(ch), rate};
    }

    std::size_t num_channels() const { return channels.size(); }
    std::size_t length() const { return channels.empty() ? 0 : channels.front().size(); }
    double duration() const { return sample_rate > 0 ? static_cast<double>(length()) / sample_rate : 0.0; }
    std::span<const double> channel(std::size_t c) const { return channels.at(c); }

    /// Throws DataError if the clip breaks its shape or finiteness invariants.
    void validate() const {
        if (sample_rate <= 0) throw DataError("audio clip has non-positive sample rate");
        if (channels.empty()) throw DataError("audio clip has no channels");
        for (const auto& ch : channels) {
            if (ch.size() != channels.front().size()) throw DataError("audio clip channels differ in length");
            for (double s : ch)
                if (!std::isfinite(s)) throw DataError("audio clip contains non-finite samples");
        }
    }
};

namespace detail {

inline std::vector<unsigned char> read_file_bytes(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw FileNotFoundError(path.string());
    in.seekg(0, std::ios::end);
    const auto size = static_cast<std::size_t>(in.tellg());
    in.seekg(0);
    std::vector<unsigned char> bytes(size);
    if (size > 0) in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(size));
    if (!in) throw DataError("failed to read " + path.string());
    return bytes;
}

inline void write_file_bytes(const std::filesystem::path& path, std::span<const unsigned char> bytes) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot open for writing: " + path.string());
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw DataError("write failed: " + path.string());
}

constexpr std::uint16_t kFormatPcm = 1;
constexpr std::uint16_t kFormatFloat = 3;
constexpr std::uint16_t kFormatExtensible = 0xFFFE;

} // namespace detail

/// Reads a RIFF/WAVE file holding PCM16, PCM24 or IEEE float32 samples.
/// Integer samples are scaled by 2^-(bits-1), so the most negative code maps
/// to exactly -1.0.
inline AudioClip read_wav(const std::filesystem::path& path) {
    const auto bytes = detail::read_file_bytes(path);
    const std::string ctx = path.string();
    binary::Reader r(bytes, ctx);

    if (bytes.size() < 12) throw FormatError(ctx + ": too short for a RIFF header");
    if (r.get_bytes(4) != "RIFF") throw FormatError(ctx + ": missing RIFF magic");
    r.get<std::uint32_t>();
    if (r.get_bytes(4) != "WAVE") throw FormatError(ctx + ": missing WAVE form type");

    std::uint16_t format = 0, channels = 0, bits = 0;
    std::uint32_t rate = 0;
    bool have_fmt = false;

    while (r.remaining() >= 8) {
        const std::string id = r.get_bytes(4);
        const std::uint32_t size = r.get<std::uint32_t>();
        if (id == "fmt ") {
            if (size < 16) throw FormatError(ctx + ": fmt chunk too small");
            binary::Reader fr(r.rest().first(std::min<std::size_t>(size, r.remaining())), ctx + " fmt");
            format = fr.get<std::uint16_t>();
            channels = fr.get<std::uint16_t>();
            rate = fr.get<std::uint32_t>();
            fr.get<std::uint32_t>();  // byte rate
            fr.get<std::uint16_t>();  // block align
            bits = fr.get<std::uint16_t>();
            if (format == detail::kFormatExtensible) {
                if (size < 40) throw FormatError(ctx + ": extensible fmt chunk too small");
                fr.skip(2 + 2 + 4);  // cbSize, valid bits, channel mask
                format = fr.get<std::uint16_t>();  // first two bytes of the subformat GUID
            }
            have_fmt = true;
            r.skip(std::min<std::size_t>(size + (size & 1u), r.remaining()));
        } else if (id == "data") {
            if (!have_fmt) throw FormatError(ctx + ": data chunk precedes fmt chunk");
            const bool pcm16 = format == detail::kFormatPcm && bits == 16;
            const bool pcm24 = format == detail::kFormatPcm && bits == 24;
            const bool f32 = format == detail::kFormatFloat && bits == 32;
            if (!(pcm16 || pcm24 || f32))
                throw UnsupportedFormatError(ctx + ": unsupported encoding (format tag " + std::to_string(format) +
                                             ", " + std::to_string(bits) + " bits)");
            if (channels == 0) throw FormatError(ctx + ": zero channels");
            if (rate == 0) throw FormatError(ctx + ": zero sample rate");
            const std::size_t frame_bytes = static_cast<std::size_t>(channels) * (bits / 8);
            if (size > r.remaining() || size % frame_bytes != 0)
                throw TruncatedDataError(ctx + ": data chunk declares " + std::to_string(size) + " bytes but " +
                                         std::to_string(r.remaining()) + " remain");
            const std::size_t frames = size / frame_bytes;
            std::vector<std::vector<double>> out(channels, std::vector<double>(frames));
            const unsigned char* p = r.rest().data();
            for (std::size_t i = 0; i < frames; ++i) {
                for (std::size_t c = 0; c < channels; ++c) {
                    double v;
                    if (pcm16) {
                        const auto u = static_cast<std::uint16_t>(p[0] | (p[1] << 8));
                        v = static_cast<std::int16_t>(u) / 32768.0;
                        p += 2;
                    } else if (pcm24) {
                        std::int32_t s = p[0] | (p[1] << 8) | (p[2] << 16);
                        if (s & 0x800000) s -= 0x1000000;
                        v = s / 8388608.0;
                        p += 3;
                    } else {
                        const std::uint32_t u = p[0] | (p[1] << 8) | (p[2] << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
                        v = std::bit_cast<float>(u);
                        p += 4;
                    }
                    out[c][i] = v;
                }
            }
            AudioClip clip(std::move(out), static_cast<int>(rate));
            for (const auto& ch : clip.channels)
                for (double s : ch)
                    if (!std::isfinite(s)) throw DataError(ctx + ": non-finite sample");
            return clip;
        } else {
            r.skip(std::min<std::size_t>(size + (size & 1u), r.remaining()));
        }
    }
    if (!have_fmt) throw FormatError(ctx + ": no fmt chunk");
    throw TruncatedDataError(ctx + ": no data chunk");
}

/// Writes an IEEE float32 WAV. Values are stored as-is (no clipping).
inline void write_wav(const AudioClip& clip, const std::filesystem::path& path) {
    if (clip.sample_rate <= 0) throw DataError("cannot write clip with non-positive sample rate");
    const auto channels = static_cast<std::uint16_t>(std::max<std::size_t>(clip.num_channels(), 1));
    const std::size_t frames = clip.length();
    const std::uint32_t data_bytes = static_cast<std::uint32_t>(frames * channels * 4);

    binary::Writer w;
    w.put_bytes("RIFF");
    w.put<std::uint32_t>(4 + (8 + 16) + (8 + data_bytes));
    w.put_bytes("WAVE");
    w.put_bytes("fmt ");
    w.put<std::uint32_t>(16);
    w.put<std::uint16_t>(detail::kFormatFloat);
    w.put<std::uint16_t>(channels);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(clip.sample_rate));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(clip.sample_rate) * channels * 4);
    w.put<std::uint16_t>(static_cast<std::uint16_t>(channels * 4));
    w.put<std::uint16_t>(32);
    w.put_bytes("data");
    w.put<std::uint32_t>(data_bytes);
    w.buffer().reserve(w.buffer().size() + data_bytes);
    for (std::size_t i = 0; i < frames; ++i)
        for (std::size_t c = 0; c < clip.num_channels(); ++c) {
            const double s = clip.channels[c][i];
            if (!std::isfinite(s)) throw DataError("cannot write non-finite sample to " + path.string());
            w.put<float>(static_cast<float>(s));
        }
    detail::write_file_bytes(path, w.buffer());
}

/// Averages all channels into one. Mono input is returned unchanged.
inline AudioClip to_mono(const AudioClip& clip) {
    if (clip.num_channels() <= 1) return clip;
    std::vector<double> out(clip.length(), 0.0);
    for (const auto& ch : clip.channels)
        for (std::size_t i = 0; i < out.size(); ++i) out[i] += ch[i];
    const double n = static_cast<double>(clip.num_channels());
    for (double& s : out) s /= n;
    return AudioClip::mono(std::move(out), clip.sample_rate);
}

/// Sample-accurate slice [round(start*rate), +round(duration*rate)).
/// Rounding is half away from zero.
inline AudioClip excerpt(const AudioClip& clip, double start_s, double duration_s) {
    if (start_s < 0 || duration_s < 0) throw UsageError("excerpt start and duration must be non-negative");
    const auto first = static_cast<std::size_t>(std::llround(start_s * clip.sample_rate));
    const auto count = static_cast<std::size_t>(std::llround(duration_s * clip.sample_rate));
    if (first + count > clip.length())
        throw ExcerptRangeError("excerpt [" + std::to_string(start_s) + " s, +" + std::to_string(duration_s) +
                                    " s) exceeds clip of " + std::to_string(clip.duration()) + " s",
                                clip.duration());
    AudioClip out;
    out.sample_rate = clip.sample_rate;
    for (const auto& ch : clip.channels) out.channels.emplace_back(ch.begin() + first, ch.begin() + first + count);
    return out;
}

} // namespace nrsar
