#include "nrsar/dsp.hpp"

#include <cmath>
#include <numbers>
#include <random>

#include <gtest/gtest.h>

namespace {

using namespace nrsar;

AudioClip sine(double freq, int rate, std::size_t n, double amp = 1.0) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2 * std::numbers::pi * freq * static_cast<double>(i) / rate);
    return AudioClip::mono(std::move(x), rate);
}

TEST(Stft, SineAtBinFrequencyIsOrthogonal) {
    const int rate = 16000;
    const std::size_t N = 512;
    const std::size_t k = 37;
    const auto spec = stft_magnitude(sine(static_cast<double>(k) * rate / N, rate, 4 * N), N, N, Window::Rectangular);
    ASSERT_EQ(spec.frames(), 4u);
    for (Eigen::Index f = 0; f < spec.magnitudes.rows(); ++f) {
        const double peak = spec.magnitudes(f, static_cast<Eigen::Index>(k));
        EXPECT_NEAR(peak, N / 2.0, 1e-9);
        for (Eigen::Index b = 0; b < spec.magnitudes.cols(); ++b)
            if (std::abs(b - static_cast<Eigen::Index>(k)) > 1) { EXPECT_LT(spec.magnitudes(f, b), 1e-6 * peak); }
    }
}

TEST(Stft, ZeroClipAndFrameCounts) {
    const auto zero = AudioClip::mono(std::vector<double>(4096, 0.0), 8000);
    const auto spec = stft_magnitude(zero, 1024, 256);
    EXPECT_EQ(spec.frames(), 13u);
    EXPECT_EQ(spec.magnitudes.cwiseAbs().maxCoeff(), 0.0);

    EXPECT_EQ(stft_magnitude(AudioClip::mono(std::vector<double>(100), 8000), 1024, 256).frames(), 0u);

    // 116 s at 44.1 kHz with 2048/512: floor((5115600 - 2048) / 512) + 1
    const auto long_clip = AudioClip::mono(std::vector<double>(5115600, 0.0), 44100);
    EXPECT_EQ(stft_magnitude(long_clip, 2048, 512).frames(), 9988u);
}

TEST(Stft, ParsevalWithRectangularWindow) {
    std::mt19937_64 rng(1);
    std::normal_distribution<double> d;
    const std::size_t N = 1024;
    std::vector<double> x(N * 8);
    for (double& v : x) v = d(rng);
    const auto spec = stft_magnitude(AudioClip::mono(x, 8000), N, N, Window::Rectangular);
    double signal = 0;
    for (double v : x) signal += v * v;
    double spectral = 0;
    for (Eigen::Index f = 0; f < spec.magnitudes.rows(); ++f)
        for (Eigen::Index k = 0; k < spec.magnitudes.cols(); ++k) {
            const double p = spec.magnitudes(f, k) * spec.magnitudes(f, k);
            // one-sided spectrum: interior bins stand for two conjugate bins
            spectral += (k == 0 || k == static_cast<Eigen::Index>(N / 2)) ? p : 2 * p;
        }
    spectral /= static_cast<double>(N);
    EXPECT_NEAR(spectral / signal, 1.0, 1e-6);
}

TEST(Stft, RejectsBadArguments) {
    const AudioClip stereo({{0.0, 0.0}, {0.0, 0.0}}, 8000);
    EXPECT_THROW(stft_magnitude(stereo, 2, 1), DimensionError);
    const auto mono = AudioClip::mono(std::vector<double>(64), 8000);
    EXPECT_THROW(stft_magnitude(mono, 48, 16), UsageError);
    EXPECT_THROW(stft_magnitude(mono, 32, 0), UsageError);
    EXPECT_THROW(stft_magnitude(mono, 32, 64), UsageError);
}

TEST(Mel, ScaleClosedForm) {
    EXPECT_NEAR(hz_to_mel(700.0), 2595.0 * std::log10(2.0), 1e-12);
    EXPECT_NEAR(hz_to_mel(700.0), 781.17, 0.01);
    EXPECT_NEAR(mel_to_hz(hz_to_mel(1234.5)), 1234.5, 1e-9);
}

TEST(Mel, FilterbankShapeAndInvariants) {
    const auto fb = mel_filterbank(44100, 2048, 128, 0.0, 22050.0);
    EXPECT_EQ(fb.weights.rows(), 128);
    EXPECT_EQ(fb.weights.cols(), 1025);
    EXPECT_GE(fb.weights.minCoeff(), 0.0);
    EXPECT_LE(fb.weights.maxCoeff(), 1.0);
    for (std::size_t m = 1; m < fb.center_freqs.size(); ++m) EXPECT_GT(fb.center_freqs[m], fb.center_freqs[m - 1]);
    for (Eigen::Index m = 0; m < fb.weights.rows(); ++m) {
        const auto row = fb.weights.row(m);
        EXPECT_GT(row.maxCoeff(), 0.0);
        // unimodal: non-decreasing up to the maximum, non-increasing after
        Eigen::Index arg;
        row.maxCoeff(&arg);
        for (Eigen::Index k = 1; k <= arg; ++k) EXPECT_GE(row(k), row(k - 1));
        for (Eigen::Index k = arg + 1; k < row.size(); ++k) EXPECT_LE(row(k), row(k - 1));
    }
}

TEST(Mel, InfeasibleLayoutRejected) {
    EXPECT_THROW(mel_filterbank(8000, 64, 128, 0.0, 4000.0), UsageError);
    EXPECT_THROW(mel_filterbank(8000, 512, 10, 100.0, 5000.0), UsageError);
    EXPECT_THROW(mel_filterbank(8000, 512, 0, 0.0, 4000.0), UsageError);
}

Spectrogram toy_spectrogram(std::size_t frames, std::size_t frame_len) {
    Spectrogram s;
    s.frame_len = frame_len;
    s.hop = frame_len / 4;
    s.sample_rate = 16000;
    s.magnitudes = RowMatrix::Zero(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(frame_len / 2 + 1));
    return s;
}

TEST(MelSpectrogram, ZeroImpulseAndLinearity) {
    const auto fb = mel_filterbank(16000, 512, 40, 0.0, 8000.0);
    auto spec = toy_spectrogram(3, 512);
    for (auto c : {Compression::Linear, Compression::Log1p})
        EXPECT_EQ(mel_spectrogram(spec, fb, c).features.cwiseAbs().maxCoeff(), 0.0);

    spec.magnitudes(1, 60) = 2.5;
    const auto lin = mel_spectrogram(spec, fb, Compression::Linear);
    for (Eigen::Index m = 0; m < 40; ++m) EXPECT_DOUBLE_EQ(lin.features(1, m), 2.5 * fb.weights(m, 60));

    const auto log = mel_spectrogram(spec, fb, Compression::Log1p);
    for (Eigen::Index m = 0; m < 40; ++m) EXPECT_DOUBLE_EQ(log.features(1, m), std::log1p(lin.features(1, m)));

    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0, 3);
    for (Eigen::Index i = 0; i < spec.magnitudes.size(); ++i) spec.magnitudes.data()[i] = u(rng);
    const auto a = mel_spectrogram(spec, fb, Compression::Linear);
    for (double c : {0.0, 2.0, 0.37}) {
        auto scaled = spec;
        scaled.magnitudes *= c;
        const auto b = mel_spectrogram(scaled, fb, Compression::Linear);
        EXPECT_LT((b.features - c * a.features).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(MelSpectrogram, DimensionMismatch) {
    const auto fb = mel_filterbank(16000, 1024, 40, 0.0, 8000.0);
    EXPECT_THROW(mel_spectrogram(toy_spectrogram(2, 512), fb), DimensionError);
}

MelFeatureMatrix toy_mfs(std::size_t frames, std::size_t n_mels) {
    MelFeatureMatrix m;
    m.frame_len = 2048;
    m.hop = 512;
    m.sample_rate = 44100;
    m.features.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(n_mels));
    for (Eigen::Index f = 0; f < m.features.rows(); ++f)
        for (Eigen::Index b = 0; b < m.features.cols(); ++b) m.features(f, b) = static_cast<double>(f * 1000 + b);
    return m;
}

TEST(StackFrames, CountsAndLayout) {
    const auto vecs = stack_frames(toy_mfs(100, 128), 40, 10);
    ASSERT_EQ(vecs.size(), 7u);
    for (const auto& v : vecs) EXPECT_EQ(v.values.size(), 5120u);
    // time-major, mel-minor
    EXPECT_EQ(vecs[2].values[0], 20000.f);
    EXPECT_EQ(vecs[2].values[129], 21001.f);
    EXPECT_EQ(stack_frames(toy_mfs(40, 128), 40, 1).size(), 1u);
    EXPECT_TRUE(stack_frames(toy_mfs(39, 128), 40, 1).empty());
}

TEST(StackFrames, AnchorIsSpanCentre) {
    const auto mfs = toy_mfs(50, 4);
    const auto v = stack_at(mfs, 3, 40);
    const double first = 3 * 512;
    const double last = first + 39 * 512 + 2048;
    EXPECT_DOUBLE_EQ(v.anchor_time, (first + last) / 2 / 44100.0);
}

TEST(StackFrames, LengthPropertyAcrossShapes) {
    for (std::size_t n_stack : {1u, 3u, 17u, 40u})
        for (std::size_t mels : {1u, 16u, 128u})
            for (const auto& v : stack_frames(toy_mfs(60, mels), n_stack, 3)) EXPECT_EQ(v.values.size(), n_stack * mels);
}

}  // namespace
