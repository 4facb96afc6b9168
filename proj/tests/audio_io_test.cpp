#include "nrsar/audio_io.hpp"

#include <cstdint>
#include <filesystem>
#include <fstream>
#include <random>

#include <gtest/gtest.h>

namespace {

using namespace nrsar;
namespace fs = std::filesystem;

class AudioIoTest : public ::testing::Test {
protected:
    void SetUp() override {
        dir_ = fs::temp_directory_path() / ("nrsar_audio_io_" + std::to_string(::getpid()));
        fs::create_directories(dir_);
    }
    void TearDown() override { fs::remove_all(dir_); }

    fs::path path(const std::string& name) const { return dir_ / name; }

    // Minimal hand-rolled PCM writer so the reader is checked against bytes
    // it did not produce itself.
    void write_pcm(const fs::path& p, std::uint16_t format, std::uint16_t channels, std::uint32_t rate,
                   std::uint16_t bits, const std::vector<unsigned char>& data, std::uint32_t declared_size = 0) {
        std::ofstream out(p, std::ios::binary);
        const auto u32 = [&](std::uint32_t v) { for (int i = 0; i < 4; ++i) out.put(static_cast<char>((v >> (8 * i)) & 0xFF)); };
        const auto u16 = [&](std::uint16_t v) { out.put(static_cast<char>(v & 0xFF)); out.put(static_cast<char>(v >> 8)); };
        const std::uint32_t size = declared_size ? declared_size : static_cast<std::uint32_t>(data.size());
        out.write("RIFF", 4);
        u32(36 + size);
        out.write("WAVE", 4);
        out.write("fmt ", 4);
        u32(16);
        u16(format);
        u16(channels);
        u32(rate);
        u32(rate * channels * bits / 8);
        u16(static_cast<std::uint16_t>(channels * bits / 8));
        u16(bits);
        out.write("data", 4);
        u32(size);
        out.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
    }

    fs::path dir_;
};

std::vector<unsigned char> int16_bytes(const std::vector<std::int16_t>& v) {
    std::vector<unsigned char> out;
    for (auto s : v) {
        const auto u = static_cast<std::uint16_t>(s);
        out.push_back(static_cast<unsigned char>(u & 0xFF));
        out.push_back(static_cast<unsigned char>(u >> 8));
    }
    return out;
}

TEST_F(AudioIoTest, Pcm16Scaling) {
    write_pcm(path("a.wav"), 1, 1, 16000, 16, int16_bytes({16384, -32768, 0, 32767}));
    const auto clip = read_wav(path("a.wav"));
    ASSERT_EQ(clip.length(), 4u);
    EXPECT_EQ(clip.channels[0][0], 0.5);
    EXPECT_EQ(clip.channels[0][1], -1.0);
    EXPECT_EQ(clip.channels[0][2], 0.0);
    EXPECT_EQ(clip.channels[0][3], 32767.0 / 32768.0);
    EXPECT_EQ(clip.sample_rate, 16000);
}

TEST_F(AudioIoTest, Pcm24Scaling) {
    // 4194304 = 2^22 -> 0.5 ; 0x800000 -> -1.0
    write_pcm(path("b.wav"), 1, 1, 8000, 24, {0x00, 0x00, 0x40, 0x00, 0x00, 0x80});
    const auto clip = read_wav(path("b.wav"));
    ASSERT_EQ(clip.length(), 2u);
    EXPECT_EQ(clip.channels[0][0], 0.5);
    EXPECT_EQ(clip.channels[0][1], -1.0);
}

TEST_F(AudioIoTest, StereoHeaderEcho) {
    std::vector<std::int16_t> frames(2 * 441000, 0);
    write_pcm(path("s.wav"), 1, 2, 44100, 16, int16_bytes(frames));
    const auto clip = read_wav(path("s.wav"));
    EXPECT_EQ(clip.num_channels(), 2u);
    EXPECT_EQ(clip.length(), 441000u);
    EXPECT_EQ(clip.sample_rate, 44100);
}

TEST_F(AudioIoTest, DistinctErrors) {
    EXPECT_THROW(read_wav(path("missing.wav")), FileNotFoundError);
    write_pcm(path("u8.wav"), 1, 1, 8000, 8, {1, 2, 3});
    EXPECT_THROW(read_wav(path("u8.wav")), UnsupportedFormatError);
    write_pcm(path("trunc.wav"), 1, 1, 8000, 16, int16_bytes({1, 2}), 400);
    EXPECT_THROW(read_wav(path("trunc.wav")), TruncatedDataError);
    {
        std::ofstream(path("junk.wav")) << "this is not a wave file";
    }
    EXPECT_THROW(read_wav(path("junk.wav")), FormatError);
}

TEST_F(AudioIoTest, FloatRoundTripIsExact) {
    std::mt19937_64 rng(5);
    std::normal_distribution<float> dist(0.f, 0.3f);
    std::vector<std::vector<double>> ch(2, std::vector<double>(1234));
    for (auto& c : ch)
        for (auto& s : c) s = dist(rng);
    ch[0][7] = 2.0;  // no clipping in the float container
    const AudioClip clip(ch, 22050);
    write_wav(clip, path("f.wav"));
    const auto back = read_wav(path("f.wav"));
    EXPECT_EQ(back.channels, clip.channels);
    EXPECT_EQ(back.sample_rate, 22050);
    EXPECT_EQ(back.channels[0][7], 2.0);
}

TEST_F(AudioIoTest, EmptyClipWritesValidFile) {
    write_wav(AudioClip::mono({}, 8000), path("e.wav"));
    const auto back = read_wav(path("e.wav"));
    EXPECT_EQ(back.length(), 0u);
    EXPECT_EQ(back.num_channels(), 1u);
}

TEST(ToMono, AveragesChannels) {
    const AudioClip st({{0.2, 0.5}, {0.4, -0.5}}, 8000);
    const auto m = to_mono(st);
    ASSERT_EQ(m.num_channels(), 1u);
    EXPECT_NEAR(m.channels[0][0], 0.3, 1e-15);
    EXPECT_EQ(m.channels[0][1], 0.0);
    EXPECT_EQ(to_mono(m).channels, m.channels);
    EXPECT_EQ(m.length(), st.length());
}

TEST(Excerpt, SampleAccurateSlices) {
    const auto clip = AudioClip::mono(std::vector<double>(44100 * 120, 0.0), 44100);
    EXPECT_EQ(excerpt(clip, 0, 116).length(), 5115600u);
    EXPECT_EQ(excerpt(clip, 1, 0).length(), 0u);
    try {
        excerpt(clip, 100, 30);
        FAIL() << "expected ExcerptRangeError";
    } catch (const ExcerptRangeError& e) {
        EXPECT_DOUBLE_EQ(e.available_seconds, 120.0);
    }
}

TEST(Excerpt, RoundsHalfAwayFromZero) {
    std::vector<double> x(100);
    for (std::size_t i = 0; i < x.size(); ++i) x[i] = static_cast<double>(i);
    const auto clip = AudioClip::mono(x, 10);
    // 0.25 s * 10 Hz = 2.5 samples -> 3
    EXPECT_EQ(excerpt(clip, 0.25, 1.0).channels[0].front(), 3.0);
}

}  // namespace
