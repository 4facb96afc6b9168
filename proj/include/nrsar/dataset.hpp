#pragma once

// Manifest handling, (feature, SAR label) example construction, the three
// evaluation protocols, and the parametric degrader used for synthetic data.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <numbers>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrsar/audio_io.hpp"
#include "nrsar/binary.hpp"
#include "nrsar/bss_eval.hpp"
#include "nrsar/dsp.hpp"
#include "nrsar/error.hpp"
#include "nrsar/mlp.hpp"

namespace nrsar {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Manifest

struct ManifestEntry {
    std::string song_id;
    std::string algorithm_id;
    fs::path estimate;
    std::vector<fs::path> references;
    std::size_t target_index = 0;
    std::string split;  // "train" | "test"
};

struct Manifest {
    std::vector<ManifestEntry> entries;
    fs::path base_dir;  // relative paths resolve against this

    fs::path resolve(const fs::path& p) const { return p.is_absolute() ? p : base_dir / p; }

    /// Algorithm ids in order of first appearance.
    std::vector<std::string> algorithms() const {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& e : entries)
            if (seen.insert(e.algorithm_id).second) out.push_back(e.algorithm_id);
        return out;
    }

    std::vector<std::string> songs(const std::string& split = "") const {
        std::vector<std::string> out;
        std::set<std::string> seen;
        for (const auto& e : entries)
            if ((split.empty() || e.split == split) && seen.insert(e.song_id).second) out.push_back(e.song_id);
        return out;
    }
};

inline void validate_manifest(const Manifest& m, bool check_files = true) {
    std::set<std::pair<std::string, std::string>> keys;
    std::map<std::string, std::string> song_split;
    for (const auto& e : m.entries) {
        if (e.song_id.empty() || e.algorithm_id.empty()) throw DataError("manifest entry with empty song or algorithm id");
        if (!keys.emplace(e.song_id, e.algorithm_id).second)
            throw DataError("duplicate manifest entry for song '" + e.song_id + "', algorithm '" + e.algorithm_id + "'");
        if (e.split != "train" && e.split != "test")
            throw DataError("entry " + e.song_id + "/" + e.algorithm_id + ": split must be train or test");
        if (e.references.empty()) throw DataError("entry " + e.song_id + "/" + e.algorithm_id + " has no references");
        if (e.target_index >= e.references.size())
            throw DataError("entry " + e.song_id + "/" + e.algorithm_id + ": target_index out of range");
        const auto [it, fresh] = song_split.emplace(e.song_id, e.split);
        if (!fresh && it->second != e.split)
            throw DataError("song '" + e.song_id + "' appears in both train and test splits");
        if (check_files) {
            if (!fs::exists(m.resolve(e.estimate))) throw FileNotFoundError(m.resolve(e.estimate).string());
            for (const auto& r : e.references)
                if (!fs::exists(m.resolve(r))) throw FileNotFoundError(m.resolve(r).string());
        }
    }
}

inline Manifest parse_manifest(const nlohmann::json& j, fs::path base_dir) {
    if (!j.is_array()) throw FormatError("manifest must be a JSON array");
    Manifest m;
    m.base_dir = std::move(base_dir);
    for (const auto& o : j) {
        try {
            ManifestEntry e;
            e.song_id = o.at("song_id").get<std::string>();
            e.algorithm_id = o.at("algorithm_id").get<std::string>();
            e.estimate = o.at("estimate").get<std::string>();
            for (const auto& r : o.at("references")) e.references.emplace_back(r.get<std::string>());
            const auto ti = o.at("target_index").get<long long>();
            if (ti < 0) throw FormatError("negative target_index");
            e.target_index = static_cast<std::size_t>(ti);
            e.split = o.at("split").get<std::string>();
            m.entries.push_back(std::move(e));
        } catch (const nlohmann::json::exception& ex) {
            throw FormatError(std::string("malformed manifest entry: ") + ex.what());
        }
    }
    return m;
}

inline Manifest load_manifest(const fs::path& path, bool check_files = true) {
    std::ifstream in(path);
    if (!in) throw FileNotFoundError(path.string());
    nlohmann::json j;
    try {
        in >> j;
    } catch (const nlohmann::json::exception& ex) {
        throw FormatError(path.string() + ": " + ex.what());
    }
    auto m = parse_manifest(j, path.parent_path());
    validate_manifest(m, check_files);
    return m;
}

inline nlohmann::json manifest_to_json(const Manifest& m) {
    auto j = nlohmann::json::array();
    for (const auto& e : m.entries) {
        nlohmann::json o;
        o["song_id"] = e.song_id;
        o["algorithm_id"] = e.algorithm_id;
        o["estimate"] = e.estimate.generic_string();
        o["references"] = nlohmann::json::array();
        for (const auto& r : e.references) o["references"].push_back(r.generic_string());
        o["target_index"] = e.target_index;
        o["split"] = e.split;
        j.push_back(std::move(o));
    }
    return j;
}

inline void save_manifest(const Manifest& m, const fs::path& path) {
    std::ofstream out(path);
    if (!out) throw DataError("cannot write " + path.string());
    out << manifest_to_json(m).dump(2) << '\n';
}

// ---------------------------------------------------------------------------
// Feature / label configuration and example construction

struct FeatureConfig {
    std::size_t frame_len = 2048;
    std::size_t hop = 512;
    Window window = Window::Hann;
    std::size_t n_mels = 128;
    double f_min = 0.0;
    double f_max = 0.0;  // 0 means Nyquist
    Compression compression = Compression::Log1p;
    std::size_t n_stack = 40;

    std::size_t vector_length() const { return n_stack * n_mels; }

    nlohmann::json to_json() const {
        return {{"frame_len", frame_len}, {"hop", hop},         {"window", to_string(window)},
                {"n_mels", n_mels},       {"f_min", f_min},     {"f_max", f_max},
                {"compression", to_string(compression)}, {"n_stack", n_stack}};
    }
};

struct LabelConfig {
    FramewiseConfig framewise;
    double excerpt_start_s = 0.0;
    double excerpt_duration_s = 0.0;  // 0 means to the end of the clip

    nlohmann::json to_json() const {
        const auto& p = framewise.projection;
        return {{"window_s", framewise.window_s},
                {"hop_s", framewise.hop_s},
                {"filter_len", p.filter_len},
                {"ridge", p.ridge},
                {"clamp_lo", p.clamp_lo},
                {"clamp_hi", p.clamp_hi},
                {"silence_threshold", p.silence_threshold},
                {"excerpt_start_s", excerpt_start_s},
                {"excerpt_duration_s", excerpt_duration_s},
                {"variant", "sources"}};
    }
};

struct LabeledExample {
    FeatureVector features;
    double label = 0;
    std::string song_id;
    std::string algorithm_id;
    double time = 0;
};

/// Reads a file, mixes it down to mono and applies the configured excerpt.
inline AudioClip load_mono(const fs::path& path, const LabelConfig& cfg) {
    auto clip = to_mono(read_wav(path));
    if (cfg.excerpt_start_s > 0 || cfg.excerpt_duration_s > 0) {
        const double dur = cfg.excerpt_duration_s > 0 ? cfg.excerpt_duration_s : clip.duration() - cfg.excerpt_start_s;
        clip = excerpt(clip, cfg.excerpt_start_s, std::max(0.0, dur));
    }
    return clip;
}

inline MelFeatureMatrix compute_features(const AudioClip& mono, const FeatureConfig& cfg) {
    const double f_max = cfg.f_max > 0 ? cfg.f_max : mono.sample_rate / 2.0;
    const auto fb = mel_filterbank(mono.sample_rate, cfg.frame_len, cfg.n_mels, cfg.f_min, f_max);
    return mel_spectrogram(stft_magnitude(mono, cfg.frame_len, cfg.hop, cfg.window), fb, cfg.compression);
}

/// Index of the frame stack whose anchor is nearest to time `t`.
inline std::size_t nearest_stack(const MelFeatureMatrix& mfs, std::size_t n_stack, double t) {
    const double span = static_cast<double>((n_stack - 1) * mfs.hop + mfs.frame_len);
    const double ideal = (t * mfs.sample_rate - span / 2.0) / static_cast<double>(mfs.hop);
    const double last = static_cast<double>(mfs.frames() - n_stack);
    return static_cast<std::size_t>(std::clamp(std::round(ideal), 0.0, last));
}

/// Pairs every valid label frame with the nearest feature stack; a label whose
/// nearest stack is more than half a label hop away raises AlignmentError.
inline std::vector<LabeledExample> pair_examples(const MelFeatureMatrix& mfs, const SarSeries& labels,
                                                 const FeatureConfig& cfg, const std::string& song,
                                                 const std::string& algorithm) {
    std::vector<LabeledExample> out;
    for (std::size_t k = 0; k < labels.size(); ++k) {
        if (!labels.valid[k]) continue;
        if (mfs.frames() < cfg.n_stack)
            throw AlignmentError("clip too short for a " + std::to_string(cfg.n_stack) + "-frame stack", k);
        const std::size_t start = nearest_stack(mfs, cfg.n_stack, labels.times[k]);
        const double anchor = stack_anchor_time(mfs, start, cfg.n_stack);
        if (std::abs(anchor - labels.times[k]) > labels.hop_s / 2.0 + 1e-9)
            throw AlignmentError("label frame " + std::to_string(k) + " has no feature stack within half a hop", k);
        LabeledExample ex;
        ex.features = stack_at(mfs, start, cfg.n_stack);
        ex.label = labels.values[k];
        ex.song_id = song;
        ex.algorithm_id = algorithm;
        ex.time = labels.times[k];
        out.push_back(std::move(ex));
    }
    return out;
}

inline std::vector<AudioClip> load_references(const Manifest& m, const ManifestEntry& e, const LabelConfig& cfg) {
    std::vector<AudioClip> refs;
    for (const auto& r : e.references) refs.push_back(load_mono(m.resolve(r), cfg));
    return refs;
}

inline std::vector<LabeledExample> build_examples(const Manifest& m, const ManifestEntry& e, const FeatureConfig& fcfg,
                                                  const LabelConfig& lcfg) {
    const auto est = load_mono(m.resolve(e.estimate), lcfg);
    const auto refs = load_references(m, e, lcfg);
    const auto series = framewise_sar(est, refs, e.target_index, lcfg.framewise);
    return pair_examples(compute_features(est, fcfg), series, fcfg, e.song_id, e.algorithm_id);
}

struct ExampleInfo {
    std::string song_id;
    std::string algorithm_id;
    double time = 0;
    std::size_t entry = 0;  // index into the manifest
};

/// Column-per-example feature matrix with labels and provenance.
struct Corpus {
    Eigen::MatrixXf features;
    std::vector<float> labels;
    std::vector<ExampleInfo> info;

    std::size_t size() const { return labels.size(); }

    TrainingSet<float> to_training_set() && {
        TrainingSet<float> t;
        t.features = std::move(features);
        t.labels = std::move(labels);
        for (const auto& i : info) t.groups.push_back(i.song_id);
        return t;
    }
};

namespace detail {

inline std::string cache_stem(const ManifestEntry& e) {
    std::string s = e.song_id + "__" + e.algorithm_id;
    for (char& c : s)
        if (!std::isalnum(static_cast<unsigned char>(c)) && c != '-' && c != '_' && c != '.') c = '_';
    return s;
}

inline nlohmann::json cache_sidecar(const ManifestEntry& e, const FeatureConfig& f, const LabelConfig& l,
                                    std::size_t rows) {
    nlohmann::json refs = nlohmann::json::array();
    for (const auto& r : e.references) refs.push_back(r.generic_string());
    return {{"song_id", e.song_id},
            {"algorithm_id", e.algorithm_id},
            {"estimate", e.estimate.generic_string()},
            {"references", refs},
            {"target_index", e.target_index},
            {"features", f.to_json()},
            {"labels", l.to_json()},
            {"rows", rows},
            {"columns", f.vector_length() + 2},
            {"layout", "float32 row-major: features..., label, time"}};
}

} // namespace detail

/// One binary file per entry (rows of features, label, time as float32) with
/// a JSON sidecar describing the configuration that produced it.
inline void write_cache(const fs::path& dir, const ManifestEntry& e, const std::vector<LabeledExample>& ex,
                        const FeatureConfig& f, const LabelConfig& l) {
    fs::create_directories(dir);
    const auto stem = detail::cache_stem(e);
    binary::Writer w;
    for (const auto& x : ex) {
        for (float v : x.features.values) w.put<float>(v);
        w.put<float>(static_cast<float>(x.label));
        w.put<float>(static_cast<float>(x.time));
    }
    detail::write_file_bytes(dir / (stem + ".f32"), w.buffer());
    std::ofstream(dir / (stem + ".json")) << detail::cache_sidecar(e, f, l, ex.size()).dump(2) << '\n';
}

/// Returns cached examples when the sidecar matches the current configuration.
inline std::optional<std::vector<LabeledExample>> read_cache(const fs::path& dir, const ManifestEntry& e,
                                                             const FeatureConfig& f, const LabelConfig& l) {
    const auto stem = detail::cache_stem(e);
    std::ifstream side(dir / (stem + ".json"));
    if (!side) return std::nullopt;
    nlohmann::json j;
    try {
        side >> j;
    } catch (const nlohmann::json::exception&) {
        return std::nullopt;
    }
    const auto rows = j.value("rows", std::size_t{0});
    if (j != detail::cache_sidecar(e, f, l, rows)) return std::nullopt;
    const auto bytes = detail::read_file_bytes(dir / (stem + ".f32"));
    const std::size_t cols = f.vector_length() + 2;
    if (bytes.size() != rows * cols * 4) throw TruncatedDataError("corpus cache " + stem + ".f32 has wrong size");
    binary::Reader r(bytes, stem);
    std::vector<LabeledExample> out(rows);
    for (auto& x : out) {
        x.features.values.resize(f.vector_length());
        for (float& v : x.features.values) v = r.get<float>();
        x.label = r.get<float>();
        x.time = r.get<float>();
        x.features.anchor_time = x.time;
        x.song_id = e.song_id;
        x.algorithm_id = e.algorithm_id;
    }
    return out;
}

struct CorpusOptions {
    std::optional<fs::path> cache_dir;
    bool write_cache = false;
};

/// Builds examples for the selected manifest entries. Entries sharing a
/// reference set are labelled together so each window's projection is
/// factorized once; output order follows `selection`.
template <typename Progress = void (*)(std::size_t, std::size_t)>
Corpus build_corpus(const Manifest& m, const std::vector<std::size_t>& selection, const FeatureConfig& fcfg,
                    const LabelConfig& lcfg, const CorpusOptions& opts = {},
                    Progress&& progress = [](std::size_t, std::size_t) {}) {
    std::vector<std::optional<std::vector<LabeledExample>>> per_entry(selection.size());
    std::size_t done = 0;

    if (opts.cache_dir && !opts.write_cache)
        for (std::size_t s = 0; s < selection.size(); ++s)
            if (auto c = read_cache(*opts.cache_dir, m.entries[selection[s]], fcfg, lcfg)) {
                per_entry[s] = std::move(c);
                progress(++done, selection.size());
            }

    // group remaining entries by (references, target)
    std::map<std::pair<std::vector<std::string>, std::size_t>, std::vector<std::size_t>> groups;
    std::vector<std::pair<std::vector<std::string>, std::size_t>> group_order;
    for (std::size_t s = 0; s < selection.size(); ++s) {
        if (per_entry[s]) continue;
        const auto& e = m.entries[selection[s]];
        std::vector<std::string> key;
        for (const auto& r : e.references) key.push_back(m.resolve(r).lexically_normal().string());
        auto k = std::make_pair(std::move(key), e.target_index);
        auto [it, fresh] = groups.try_emplace(k);
        if (fresh) group_order.push_back(k);
        it->second.push_back(s);
    }

    for (const auto& key : group_order) {
        const auto& members = groups[key];
        const auto& first = m.entries[selection[members.front()]];
        const auto refs = load_references(m, first, lcfg);
        std::vector<AudioClip> estimates;
        estimates.reserve(members.size());
        for (auto s : members) estimates.push_back(load_mono(m.resolve(m.entries[selection[s]].estimate), lcfg));
        std::vector<const AudioClip*> ptrs;
        for (const auto& e : estimates) ptrs.push_back(&e);
        const auto series = framewise_sar(ptrs, refs, first.target_index, lcfg.framewise);
        for (std::size_t i = 0; i < members.size(); ++i) {
            const auto& e = m.entries[selection[members[i]]];
            auto ex = pair_examples(compute_features(estimates[i], fcfg), series[i], fcfg, e.song_id, e.algorithm_id);
            if (opts.cache_dir && opts.write_cache) write_cache(*opts.cache_dir, e, ex, fcfg, lcfg);
            per_entry[members[i]] = std::move(ex);
            progress(++done, selection.size());
        }
    }

    std::size_t total = 0;
    for (const auto& p : per_entry) total += p->size();
    Corpus c;
    const auto dim = static_cast<Eigen::Index>(fcfg.vector_length());
    c.features.resize(dim, static_cast<Eigen::Index>(total));
    c.labels.reserve(total);
    c.info.reserve(total);
    Eigen::Index col = 0;
    for (std::size_t s = 0; s < selection.size(); ++s) {
        for (auto& ex : *per_entry[s]) {
            if (static_cast<Eigen::Index>(ex.features.values.size()) != dim)
                throw DimensionError("feature vector length differs from configuration");
            c.features.col(col++) = Eigen::Map<const Eigen::VectorXf>(ex.features.values.data(), dim);
            c.labels.push_back(static_cast<float>(ex.label));
            c.info.push_back({ex.song_id, ex.algorithm_id, ex.time, selection[s]});
        }
        per_entry[s].reset();
    }
    return c;
}

/// Recomputes the labels of a random sample of examples straight from the
/// audio files, one window at a time. Returns the largest absolute deviation
/// in dB and the number of examples checked.
inline std::pair<double, std::size_t> spot_check_labels(const Manifest& m, const Corpus& c, const LabelConfig& lcfg,
                                                        double fraction, std::uint64_t seed) {
    if (c.size() == 0) return {0.0, 0};
    const auto count = std::clamp<std::size_t>(
        static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(c.size()))), 1, c.size());
    std::vector<std::size_t> idx(c.size());
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(count);
    std::sort(idx.begin(), idx.end(), [&](auto a, auto b) { return c.info[a].entry < c.info[b].entry; });

    double worst = 0;
    std::optional<std::size_t> loaded;
    AudioClip est;
    std::vector<AudioClip> refs;
    for (auto i : idx) {
        const auto& info = c.info[i];
        const auto& e = m.entries[info.entry];
        if (loaded != info.entry) {
            est = load_mono(m.resolve(e.estimate), lcfg);
            refs = load_references(m, e, lcfg);
            loaded = info.entry;
        }
        const auto grid = label_grid(est.length(), est.sample_rate, lcfg.framewise.window_s, lcfg.framewise.hop_s);
        const auto k = static_cast<std::size_t>(std::llround(
            (info.time * est.sample_rate - static_cast<double>(grid.window) / 2.0) / static_cast<double>(grid.hop)));
        std::vector<std::span<const double>> windows;
        for (const auto& r : refs) windows.push_back(r.channel(0).subspan(grid.start(k), grid.window));
        const auto d = decompose(est.channel(0).subspan(grid.start(k), grid.window), windows, e.target_index,
                                 lcfg.framewise.projection);
        worst = std::max(worst, std::abs(sar(d, lcfg.framewise.projection) - static_cast<double>(c.labels[i])));
    }
    return {worst, count};
}

// ---------------------------------------------------------------------------
// Protocols

inline std::pair<std::vector<std::string>, std::vector<std::string>> split_songs(std::vector<std::string> song_ids,
                                                                                 std::size_t train_count,
                                                                                 std::uint64_t seed) {
    if (train_count >= song_ids.size())
        throw UsageError("train count " + std::to_string(train_count) + " must be below the number of songs (" +
                         std::to_string(song_ids.size()) + ")");
    std::mt19937_64 rng(seed);
    std::shuffle(song_ids.begin(), song_ids.end(), rng);
    std::vector<std::string> train(song_ids.begin(), song_ids.begin() + static_cast<std::ptrdiff_t>(train_count));
    std::vector<std::string> test(song_ids.begin() + static_cast<std::ptrdiff_t>(train_count), song_ids.end());
    return {train, test};
}

enum class ScenarioKind { Within, AcrossKnown, AcrossUnknown };

inline std::string to_string(ScenarioKind k) {
    switch (k) {
    case ScenarioKind::Within: return "within";
    case ScenarioKind::AcrossKnown: return "across-known";
    case ScenarioKind::AcrossUnknown: return "across-unknown";
    }
    return "?";
}

inline ScenarioKind parse_scenario(const std::string& s) {
    if (s == "within") return ScenarioKind::Within;
    if (s == "across-known") return ScenarioKind::AcrossKnown;
    if (s == "across-unknown") return ScenarioKind::AcrossUnknown;
    throw UsageError("unknown scenario '" + s + "' (expected within|across-known|across-unknown)");
}

struct ScenarioSpec {
    ScenarioKind kind = ScenarioKind::Within;
    std::vector<std::string> train_algorithms;
    std::vector<std::string> test_algorithms;
    std::vector<std::string> train_songs;
    std::vector<std::string> test_songs;
    std::uint64_t seed = 0;

    std::string name() const {
        return kind == ScenarioKind::Within ? "within:" + train_algorithms.front() : to_string(kind);
    }
};

/// Throws if a scenario leaks songs between train and test or breaks the
/// algorithm-set shape of its kind.
inline void check_scenario(const ScenarioSpec& s) {
    const std::set<std::string> tr(s.train_songs.begin(), s.train_songs.end());
    for (const auto& song : s.test_songs)
        if (tr.count(song)) throw DataError("scenario " + s.name() + ": song '" + song + "' is in both train and test");
    if (s.train_algorithms.empty() || s.test_algorithms.empty())
        throw DataError("scenario " + s.name() + " has an empty algorithm set");
    const std::set<std::string> ta(s.train_algorithms.begin(), s.train_algorithms.end());
    const std::set<std::string> te(s.test_algorithms.begin(), s.test_algorithms.end());
    switch (s.kind) {
    case ScenarioKind::Within:
        if (ta.size() != 1 || ta != te) throw DataError("within scenario needs equal singleton algorithm sets");
        break;
    case ScenarioKind::AcrossKnown:
        if (ta != te) throw DataError("across-known scenario needs identical algorithm sets");
        break;
    case ScenarioKind::AcrossUnknown:
        for (const auto& a : te)
            if (ta.count(a)) throw DataError("across-unknown scenario: algorithm '" + a + "' is in both sets");
        break;
    }
}

struct ScenarioOptions {
    std::size_t unknown_train_count = 0;  // 0: round(K * 17 / 24), clamped to [1, K-1]
};

/// Within yields one spec per algorithm; the across kinds yield one spec.
/// Songs follow the manifest's split tags. Across-unknown trains on the first
/// algorithms in manifest order and tests on the rest.
inline std::vector<ScenarioSpec> make_scenario(ScenarioKind kind, const Manifest& m, std::uint64_t seed,
                                               const ScenarioOptions& opts = {}) {
    const auto algos = m.algorithms();
    if (algos.empty()) throw DataError("manifest has no entries");
    const auto train_songs = m.songs("train");
    const auto test_songs = m.songs("test");
    if (train_songs.empty() || test_songs.empty()) throw DataError("manifest needs both train and test songs");

    std::vector<ScenarioSpec> out;
    const auto base = [&](ScenarioKind k) {
        ScenarioSpec s;
        s.kind = k;
        s.train_songs = train_songs;
        s.test_songs = test_songs;
        s.seed = seed;
        return s;
    };
    switch (kind) {
    case ScenarioKind::Within:
        for (const auto& a : algos) {
            auto s = base(kind);
            s.train_algorithms = s.test_algorithms = {a};
            out.push_back(std::move(s));
        }
        break;
    case ScenarioKind::AcrossKnown: {
        auto s = base(kind);
        s.train_algorithms = s.test_algorithms = algos;
        out.push_back(std::move(s));
        break;
    }
    case ScenarioKind::AcrossUnknown: {
        if (algos.size() < 2) throw UsageError("across-unknown needs at least two algorithms to partition");
        std::size_t n_train = opts.unknown_train_count;
        if (n_train == 0)
            n_train = static_cast<std::size_t>(std::llround(static_cast<double>(algos.size()) * 17.0 / 24.0));
        n_train = std::clamp<std::size_t>(n_train, 1, algos.size() - 1);
        auto s = base(kind);
        s.train_algorithms.assign(algos.begin(), algos.begin() + static_cast<std::ptrdiff_t>(n_train));
        s.test_algorithms.assign(algos.begin() + static_cast<std::ptrdiff_t>(n_train), algos.end());
        out.push_back(std::move(s));
        break;
    }
    }
    for (const auto& s : out) check_scenario(s);
    return out;
}

/// Manifest indices for one side of a scenario.
inline std::vector<std::size_t> scenario_entries(const ScenarioSpec& s, const Manifest& m, bool test_side) {
    const auto& algos = test_side ? s.test_algorithms : s.train_algorithms;
    const auto& songs = test_side ? s.test_songs : s.train_songs;
    const std::set<std::string> a(algos.begin(), algos.end()), so(songs.begin(), songs.end());
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < m.entries.size(); ++i)
        if (a.count(m.entries[i].algorithm_id) && so.count(m.entries[i].song_id)) out.push_back(i);
    return out;
}

// ---------------------------------------------------------------------------
// Parametric degradation

struct DegradationParams {
    double artifact_snr_db = 20.0;
    double interference_gain = 0.0;
    std::optional<double> lowpass_cutoff_hz;
    double gain_mod_depth = 0.0;
    double gain_mod_rate_hz = 0.0;
    std::optional<double> clip_level;
    std::uint64_t seed = 0;
};

/// Second-order Butterworth lowpass (bilinear transform), direct form I.
inline std::vector<double> lowpass(std::span<const double> x, double cutoff_hz, int rate) {
    const double w0 = 2.0 * std::numbers::pi * cutoff_hz / rate;
    const double alpha = std::sin(w0) / std::numbers::sqrt2;  // Q = 1/sqrt(2)
    const double cw = std::cos(w0);
    const double a0 = 1 + alpha;
    const double b0 = (1 - cw) / 2 / a0, b1 = (1 - cw) / a0, b2 = (1 - cw) / 2 / a0;
    const double a1 = -2 * cw / a0, a2 = (1 - alpha) / a0;
    std::vector<double> y(x.size());
    double x1 = 0, x2 = 0, y1 = 0, y2 = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double v = b0 * x[i] + b1 * x1 + b2 * x2 - a1 * y1 - a2 * y2;
        x2 = x1;
        x1 = x[i];
        y2 = y1;
        y1 = v;
        y[i] = v;
    }
    return y;
}

/// estimate = lowpass(ref) * (1 + depth sin(2 pi rate t)) + gain * sum(others)
///            + white noise at artifact_snr dB below the reference energy,
/// optionally hard-clipped at +-clip_level.
inline AudioClip synth_degrade(const AudioClip& ref, const std::vector<AudioClip>& others, const DegradationParams& p) {
    if (ref.num_channels() != 1) throw DimensionError("synth_degrade expects a mono reference");
    for (const auto& o : others)
        if (o.num_channels() != 1 || o.length() != ref.length() || o.sample_rate != ref.sample_rate)
            throw DimensionError("interfering stems must match the reference");
    if (!std::isfinite(p.artifact_snr_db)) throw UsageError("artifact SNR must be finite");
    if (p.interference_gain < 0 || p.gain_mod_depth < 0) throw UsageError("gains must be non-negative");

    const auto& r = ref.channels.front();
    const int rate = ref.sample_rate;
    std::vector<double> y = p.lowpass_cutoff_hz ? lowpass(r, *p.lowpass_cutoff_hz, rate) : r;
    if (p.gain_mod_depth > 0)
        for (std::size_t i = 0; i < y.size(); ++i)
            y[i] *= 1.0 + p.gain_mod_depth * std::sin(2.0 * std::numbers::pi * p.gain_mod_rate_hz * static_cast<double>(i) / rate);
    for (const auto& o : others)
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += p.interference_gain * o.channels.front()[i];

    std::mt19937_64 rng(p.seed);
    std::normal_distribution<double> g;
    std::vector<double> noise(y.size());
    for (double& v : noise) v = g(rng);
    const double e_ref = energy(r), e_noise = energy(noise);
    if (e_noise > 0 && e_ref > 0) {
        const double scale = std::sqrt(e_ref / e_noise / std::pow(10.0, p.artifact_snr_db / 10.0));
        for (std::size_t i = 0; i < y.size(); ++i) y[i] += scale * noise[i];
    }
    if (p.clip_level)
        for (double& v : y) v = std::clamp(v, -*p.clip_level, *p.clip_level);
    return AudioClip::mono(std::move(y), rate);
}

} // namespace nrsar
