#pragma once

// Synthetic two-stem songs and a bank of degradation profiles standing in for
// separation algorithms.

#include <cmath>
#include <filesystem>
#include <numbers>
#include <random>
#include <set>
#include <cstdio>
#include <string>
#include <vector>

#include "nrsar/audio_io.hpp"
#include "nrsar/dataset.hpp"
#include "nrsar/error.hpp"

namespace nrsar {

struct SynthConfig {
    std::size_t n_songs = 40;
    double duration_s = 10.0;
    int sample_rate = 44100;
    std::size_t n_algorithms = 8;
    std::size_t train_songs = 0;  // 0: round(0.7 * n_songs)
    std::uint64_t seed = 1;

    std::size_t resolved_train_songs() const {
        return train_songs ? train_songs : static_cast<std::size_t>(std::llround(0.7 * static_cast<double>(n_songs)));
    }

    void validate() const {
        if (n_songs < 2) throw UsageError("synth needs at least two songs");
        if (n_algorithms < 1) throw UsageError("synth needs at least one algorithm");
        if (!(duration_s > 0.5)) throw UsageError("synth duration must exceed 0.5 s");
        if (sample_rate < 8000) throw UsageError("synth sample rate must be at least 8000 Hz");
        const auto t = resolved_train_songs();
        if (t < 1 || t >= n_songs) throw UsageError("train song count must lie in [1, n_songs - 1]");
    }
};

struct SyntheticSong {
    AudioClip vocals;
    AudioClip accompaniment;
};

namespace detail {

inline double midi_hz(double m) { return 440.0 * std::pow(2.0, (m - 69.0) / 12.0); }

// Linear ramp of `ramp` samples into each new segment value.
inline std::vector<double> piecewise_envelope(std::size_t n, int rate, double min_len, double max_len, double lo_db,
                                              double hi_db, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> len(min_len, max_len), gain(lo_db, hi_db);
    std::vector<double> env(n);
    const auto ramp = static_cast<std::size_t>(0.08 * rate);
    double prev = std::pow(10.0, gain(rng) / 20.0);
    std::size_t t = 0;
    while (t < n) {
        const auto seg = static_cast<std::size_t>(len(rng) * rate);
        const double g = std::pow(10.0, gain(rng) / 20.0);
        for (std::size_t i = 0; i < seg && t < n; ++i, ++t) env[t] = i < ramp ? prev + (g - prev) * static_cast<double>(i) / static_cast<double>(ramp) : g;
        prev = g;
    }
    return env;
}

inline void add_note(std::vector<double>& out, std::size_t start, std::size_t len, double f0, int rate,
                     const std::vector<double>& harmonic_amps, double vibrato_depth, double amp) {
    const auto attack = static_cast<std::size_t>(0.02 * rate), release = static_cast<std::size_t>(0.04 * rate);
    const double nyq = rate / 2.0;
    std::vector<double> phase(harmonic_amps.size(), 0.0);
    for (std::size_t i = 0; i < len && start + i < out.size(); ++i) {
        const double t = static_cast<double>(i) / rate;
        const double f = f0 * (1.0 + vibrato_depth * std::sin(2 * std::numbers::pi * 5.5 * t));
        double env = 1.0;
        if (i < attack) env = static_cast<double>(i) / static_cast<double>(attack);
        if (len - i < release) env = std::min(env, static_cast<double>(len - i) / static_cast<double>(release));
        double v = 0;
        for (std::size_t h = 0; h < harmonic_amps.size(); ++h) {
            const double fh = f * static_cast<double>(h + 1);
            if (fh >= nyq * 0.9) break;
            phase[h] += 2 * std::numbers::pi * fh / rate;
            v += harmonic_amps[h] * std::sin(phase[h]);
        }
        out[start + i] += amp * env * v;
    }
}

inline double rms(const std::vector<double>& x) { return std::sqrt(energy(x) / static_cast<double>(x.size())); }

} // namespace detail

/// Vocal-like harmonic stem with phrase-level loudness changes, plus an
/// accompaniment of bass, pad chords and noise-burst percussion.
inline SyntheticSong make_song(std::size_t n, int rate, std::uint64_t seed) {
    std::seed_seq sseq{seed, std::uint64_t{0x736f6e67}};
    std::mt19937_64 rng(sseq);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    const auto uni = [&](double a, double b) { return a + (b - a) * u(rng); };

    std::vector<double> vocals(n, 0.0);
    const double key = std::floor(uni(52, 64));
    static constexpr int scale[] = {0, 2, 4, 5, 7, 9, 11, 12, 14, 16};
    const std::size_t n_harm = 14;
    std::vector<double> timbre(n_harm);
    for (std::size_t h = 0; h < n_harm; ++h) timbre[h] = uni(0.4, 1.0) / static_cast<double>(h + 1);
    for (std::size_t t = 0; t < n;) {
        const auto len = static_cast<std::size_t>(uni(0.25, 0.7) * rate);
        const double f0 = detail::midi_hz(key + scale[static_cast<std::size_t>(uni(0, 10)) % 10]);
        auto amps = timbre;
        for (double& a : amps) a *= uni(0.7, 1.3);
        detail::add_note(vocals, t, len, f0, rate, amps, 0.01, 1.0);
        t += len;
        if (u(rng) < 0.15) t += static_cast<std::size_t>(uni(0.03, 0.12) * rate);
    }
    const auto phrase = detail::piecewise_envelope(n, rate, 0.6, 1.8, -16.0, 0.0, rng);
    for (std::size_t i = 0; i < n; ++i) vocals[i] *= phrase[i];

    std::vector<double> accomp(n, 0.0);
    const double bass_root = std::floor(uni(28, 40));
    for (std::size_t t = 0; t < n;) {
        const auto len = static_cast<std::size_t>(uni(0.4, 0.9) * rate);
        const double f0 = detail::midi_hz(bass_root + scale[static_cast<std::size_t>(uni(0, 5)) % 5]);
        detail::add_note(accomp, t, len, f0, rate, {1.0, 0.5, 0.3, 0.2}, 0.0, 0.6);
        t += len;
    }
    for (std::size_t t = 0; t < n;) {
        const auto len = static_cast<std::size_t>(uni(1.5, 2.5) * rate);
        const double root = key - 12 + scale[static_cast<std::size_t>(uni(0, 6)) % 6];
        for (int iv : {0, 4, 7}) detail::add_note(accomp, t, len, detail::midi_hz(root + iv), rate, {1.0, 0.3, 0.1}, 0.0, 0.12);
        t += len;
    }
    const double beat = 60.0 / uni(90, 140);
    std::normal_distribution<double> g;
    for (double tb = 0; tb * rate < static_cast<double>(n); tb += beat) {
        const auto start = static_cast<std::size_t>(tb * rate);
        const double amp = uni(0.15, 0.35);
        for (std::size_t i = 0; i < static_cast<std::size_t>(0.15 * rate) && start + i < n; ++i)
            accomp[start + i] += amp * g(rng) * std::exp(-static_cast<double>(i) / (0.03 * rate));
    }

    double peak = 0;
    for (double v : vocals) peak = std::max(peak, std::abs(v));
    if (peak > 0)
        for (double& v : vocals) v *= 0.5 / peak;
    const double a_scale = detail::rms(vocals) / std::max(1e-12, detail::rms(accomp)) * std::pow(10.0, uni(-3, 3) / 20.0);
    for (double& v : accomp) v *= a_scale;
    return {AudioClip::mono(std::move(vocals), rate), AudioClip::mono(std::move(accomp), rate)};
}

/// Degradation profile k of K. Artifact SNR is spread evenly across the
/// profiles; the other knobs cycle so neighbouring profiles differ in kind.
inline DegradationParams degradation_profile(std::size_t k, std::size_t K) {
    DegradationParams p;
    p.artifact_snr_db = K == 1 ? 8.0 : -6.0 + 28.0 * static_cast<double>(k) / static_cast<double>(K - 1);
    static constexpr double interf[] = {0.05, 0.15, 0.1, 0.2};
    p.interference_gain = interf[k % 4];
    if (k % 3 == 1) p.lowpass_cutoff_hz = 5000.0 + 1000.0 * static_cast<double>(k % 5);
    if (k % 4 == 2) {
        p.gain_mod_depth = 0.25;
        p.gain_mod_rate_hz = 0.7;
    }
    if (k % 5 == 3) p.clip_level = 0.35;
    return p;
}

inline std::string synth_song_id(std::size_t i) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "song%03zu", i + 1);
    return buf;
}

inline std::string synth_algorithm_id(std::size_t k) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "algo%02zu", k + 1);
    return buf;
}

/// Writes songs/<id>/{vocals,accompaniment}.wav, estimates/<algo>/<id>.wav and
/// manifest.json (relative paths) under `out_dir`. Vocals are the target.
template <typename Progress = void (*)(std::size_t, std::size_t)>
Manifest synthesize_corpus(const std::filesystem::path& out_dir, const SynthConfig& cfg,
                           Progress&& progress = [](std::size_t, std::size_t) {}) {
    cfg.validate();
    namespace fs = std::filesystem;
    const auto n = static_cast<std::size_t>(std::llround(cfg.duration_s * cfg.sample_rate));
    std::vector<std::string> ids;
    for (std::size_t i = 0; i < cfg.n_songs; ++i) ids.push_back(synth_song_id(i));
    const auto [train, test] = split_songs(ids, cfg.resolved_train_songs(), cfg.seed);
    const std::set<std::string> train_set(train.begin(), train.end());

    Manifest m;
    m.base_dir = out_dir;
    for (std::size_t i = 0; i < cfg.n_songs; ++i) {
        const auto& id = ids[i];
        const auto song = make_song(n, cfg.sample_rate, cfg.seed * 1000003ULL + i);
        const fs::path song_dir = fs::path("songs") / id;
        fs::create_directories(out_dir / song_dir);
        write_wav(song.vocals, out_dir / song_dir / "vocals.wav");
        write_wav(song.accompaniment, out_dir / song_dir / "accompaniment.wav");

        std::mt19937_64 jitter(cfg.seed * 7919ULL + i);
        std::uniform_real_distribution<double> snr_jitter(-2.0, 2.0);
        for (std::size_t k = 0; k < cfg.n_algorithms; ++k) {
            auto p = degradation_profile(k, cfg.n_algorithms);
            p.artifact_snr_db += snr_jitter(jitter);
            p.seed = cfg.seed ^ (0x9e3779b97f4a7c15ULL * (i * cfg.n_algorithms + k + 1));
            const auto est = synth_degrade(song.vocals, {song.accompaniment}, p);
            const auto algo = synth_algorithm_id(k);
            const fs::path est_path = fs::path("estimates") / algo / (id + ".wav");
            fs::create_directories(out_dir / est_path.parent_path());
            write_wav(est, out_dir / est_path);
            m.entries.push_back({id, algo, est_path, {song_dir / "vocals.wav", song_dir / "accompaniment.wav"}, 0,
                                 train_set.count(id) ? "train" : "test"});
        }
        progress(i + 1, cfg.n_songs);
    }
    // algorithm-major order so algorithm ids appear in profile order
    std::stable_sort(m.entries.begin(), m.entries.end(),
                     [](const ManifestEntry& a, const ManifestEntry& b) { return a.algorithm_id < b.algorithm_id; });
    save_manifest(m, out_dir / "manifest.json");
    return m;
}

} // namespace nrsar
