#pragma once

#include <cmath>
#include <iomanip>
#include <numbers>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "nrsar/audio_io.hpp"
#include "nrsar/error.hpp"
#include "nrsar/fft.hpp"

namespace nrsar {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Window { Rectangular, Hann };
enum class Compression { Linear, Log1p };

inline std::string to_string(Window w) { return w == Window::Hann ? "hann" : "rectangular"; }
inline std::string to_string(Compression c) { return c == Compression::Log1p ? "log1p" : "linear"; }

inline Window parse_window(const std::string& s) {
    if (s == "hann") return Window::Hann;
    if (s == "rectangular" || s == "rect") return Window::Rectangular;
    throw UsageError("unknown window '" + s + "' (expected hann|rectangular)");
}

inline Compression parse_compression(const std::string& s) {
    if (s == "log1p") return Compression::Log1p;
    if (s == "linear") return Compression::Linear;
    throw UsageError("unknown compression '" + s + "' (expected log1p|linear)");
}

/// Magnitude STFT, frames x (frame_len/2 + 1).
struct Spectrogram {
    RowMatrix magnitudes;
    std::size_t frame_len = 0;
    std::size_t hop = 0;
    int sample_rate = 0;

    std::size_t frames() const { return static_cast<std::size_t>(magnitudes.rows()); }
    std::size_t bins() const { return frame_len / 2 + 1; }
};

struct MelFilterBank {
    RowMatrix weights;  // n_mels x bins
    std::vector<double> center_freqs;

    std::size_t n_mels() const { return static_cast<std::size_t>(weights.rows()); }
    std::size_t bins() const { return static_cast<std::size_t>(weights.cols()); }
};

struct MelFeatureMatrix {
    RowMatrix features;  // frames x n_mels
    std::size_t frame_len = 0;
    std::size_t hop = 0;
    int sample_rate = 0;

    std::size_t frames() const { return static_cast<std::size_t>(features.rows()); }
    std::size_t n_mels() const { return static_cast<std::size_t>(features.cols()); }
    double frame_period() const { return static_cast<double>(hop) / sample_rate; }
};

/// A flattened stack of consecutive mel frames, time-major.
struct FeatureVector {
    std::vector<float> values;
    double anchor_time = 0.0;  // seconds, centre of the covered span
};

inline std::vector<double> make_window(Window kind, std::size_t n) {
    std::vector<double> w(n, 1.0);
    if (kind == Window::Hann)
        for (std::size_t i = 0; i < n; ++i)
            w[i] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n));
    return w;
}

/// Unpadded STFT magnitudes. A clip shorter than one frame yields zero frames.
inline Spectrogram stft_magnitude(const AudioClip& clip, std::size_t frame_len, std::size_t hop,
                                  Window window = Window::Hann) {
    if (clip.num_channels() != 1) throw DimensionError("stft_magnitude expects a mono clip");
    if (frame_len == 0 || !std::has_single_bit(frame_len)) throw UsageError("frame_len must be a power of two");
    if (hop == 0 || hop > frame_len) throw UsageError("hop must satisfy 0 < hop <= frame_len");

    const auto& x = clip.channels.front();
    const std::size_t frames = x.size() < frame_len ? 0 : (x.size() - frame_len) / hop + 1;
    const std::size_t bins = frame_len / 2 + 1;

    Spectrogram spec;
    spec.frame_len = frame_len;
    spec.hop = hop;
    spec.sample_rate = clip.sample_rate;
    spec.magnitudes.resize(static_cast<Eigen::Index>(frames), static_cast<Eigen::Index>(bins));

    const FftPlan plan(frame_len);
    const auto win = make_window(window, frame_len);
    std::vector<std::complex<double>> buf(frame_len);
    for (std::size_t f = 0; f < frames; ++f) {
        const double* src = x.data() + f * hop;
        for (std::size_t i = 0; i < frame_len; ++i) buf[i] = src[i] * win[i];
        plan.transform(buf);
        for (std::size_t k = 0; k < bins; ++k) spec.magnitudes(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(k)) = std::abs(buf[k]);
    }
    return spec;
}

inline double hz_to_mel(double f) { return 2595.0 * std::log10(1.0 + f / 700.0); }
inline double mel_to_hz(double m) { return 700.0 * (std::pow(10.0, m / 2595.0) - 1.0); }

/// Triangular filters with unit peaks at n_mels points evenly spaced on the
/// HTK mel axis; each triangle reaches zero at its neighbours' centres.
inline MelFilterBank mel_filterbank(int sample_rate, std::size_t frame_len, std::size_t n_mels, double f_min,
                                    double f_max) {
    if (n_mels == 0) throw UsageError("n_mels must be positive");
    if (!(f_min >= 0 && f_min < f_max && f_max <= sample_rate / 2.0))
        throw UsageError("mel band edges must satisfy 0 <= f_min < f_max <= rate/2");

    const std::size_t bins = frame_len / 2 + 1;
    const double mel_lo = hz_to_mel(f_min);
    const double mel_hi = hz_to_mel(f_max);
    std::vector<double> edges(n_mels + 2);
    for (std::size_t i = 0; i < edges.size(); ++i)
        edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) / static_cast<double>(n_mels + 1));

    MelFilterBank fb;
    fb.weights = RowMatrix::Zero(static_cast<Eigen::Index>(n_mels), static_cast<Eigen::Index>(bins));
    fb.center_freqs.assign(edges.begin() + 1, edges.end() - 1);
    const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(frame_len);
    for (std::size_t m = 0; m < n_mels; ++m) {
        const double left = edges[m], centre = edges[m + 1], right = edges[m + 2];
        bool any = false;
        for (std::size_t k = 0; k < bins; ++k) {
            const double f = static_cast<double>(k) * bin_hz;
            double w = 0.0;
            if (f > left && f <= centre) w = (f - left) / (centre - left);
            else if (f > centre && f < right) w = (right - f) / (right - centre);
            if (w > 0) {
                fb.weights(static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k)) = w;
                any = true;
            }
        }
        if (!any)
            throw UsageError("mel band " + std::to_string(m) + " covers no FFT bin: " + std::to_string(n_mels) +
                             " bands is too many for frame length " + std::to_string(frame_len));
    }
    return fb;
}

inline MelFeatureMatrix mel_spectrogram(const Spectrogram& spec, const MelFilterBank& fb,
                                        Compression compression = Compression::Log1p) {
    if (fb.bins() != spec.bins() || static_cast<std::size_t>(spec.magnitudes.cols()) != fb.bins())
        throw DimensionError("filterbank has " + std::to_string(fb.bins()) + " bins, spectrogram has " +
                             std::to_string(spec.magnitudes.cols()));
    MelFeatureMatrix out;
    out.frame_len = spec.frame_len;
    out.hop = spec.hop;
    out.sample_rate = spec.sample_rate;
    out.features = spec.magnitudes * fb.weights.transpose();
    if (compression == Compression::Log1p) out.features = out.features.array().log1p().matrix();
    return out;
}

/// Centre time of the span covered by frames [start, start + n_stack).
inline double stack_anchor_time(const MelFeatureMatrix& mfs, std::size_t start, std::size_t n_stack) {
    const double first = static_cast<double>(start * mfs.hop);
    const double span = static_cast<double>((n_stack - 1) * mfs.hop + mfs.frame_len);
    return (first + span / 2.0) / mfs.sample_rate;
}

inline FeatureVector stack_at(const MelFeatureMatrix& mfs, std::size_t start, std::size_t n_stack) {
    if (start + n_stack > mfs.frames()) throw DimensionError("frame stack runs past the end of the feature matrix");
    FeatureVector v;
    v.values.reserve(n_stack * mfs.n_mels());
    for (std::size_t f = start; f < start + n_stack; ++f)
        for (std::size_t m = 0; m < mfs.n_mels(); ++m)
            v.values.push_back(static_cast<float>(mfs.features(static_cast<Eigen::Index>(f), static_cast<Eigen::Index>(m))));
    v.anchor_time = stack_anchor_time(mfs, start, n_stack);
    return v;
}

inline std::vector<FeatureVector> stack_frames(const MelFeatureMatrix& mfs, std::size_t n_stack, std::size_t stride) {
    if (n_stack == 0 || stride == 0) throw UsageError("n_stack and stride must be positive");
    std::vector<FeatureVector> out;
    if (mfs.frames() < n_stack) return out;
    const std::size_t count = (mfs.frames() - n_stack) / stride + 1;
    out.reserve(count);
    for (std::size_t i = 0; i < count; ++i) out.push_back(stack_at(mfs, i * stride, n_stack));
    return out;
}

/// frames x n_mels CSV with 9 significant digits, no header.
inline void write_features_csv(std::ostream& os, const MelFeatureMatrix& mfs) {
    os << std::setprecision(9);
    for (Eigen::Index f = 0; f < mfs.features.rows(); ++f) {
        for (Eigen::Index m = 0; m < mfs.features.cols(); ++m) {
            if (m) os << ',';
            os << mfs.features(f, m);
        }
        os << '\n';
    }
}

} // namespace nrsar
