#pragma once

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <optional>
#include <ostream>
#include <set>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrsar/error.hpp"

namespace nrsar {

inline double mae(std::span<const double> pred, std::span<const double> ref) {
    if (pred.size() != ref.size()) throw DimensionError("mae: series lengths differ");
    if (pred.empty()) throw DataError("mae: empty series");
    double s = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) s += std::abs(pred[i] - ref[i]);
    return s / static_cast<double>(pred.size());
}

/// Sample Pearson correlation; nullopt when either series is constant.
inline std::optional<double> pearson(std::span<const double> a, std::span<const double> b) {
    if (a.size() != b.size()) throw DimensionError("pearson: series lengths differ");
    if (a.size() < 2) throw DataError("pearson: need at least two samples");
    const auto n = static_cast<double>(a.size());
    double ma = 0, mb = 0, amax = 0, bmax = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
        amax = std::max(amax, std::abs(a[i]));
        bmax = std::max(bmax, std::abs(b[i]));
    }
    ma /= n;
    mb /= n;
    double sab = 0, saa = 0, sbb = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const double da = a[i] - ma, db = b[i] - mb;
        sab += da * db;
        saa += da * da;
        sbb += db * db;
    }
    // rounding noise around a constant series is not variation
    const auto flat = [n](double ss, double mx) { return ss <= n * (1e-12 * mx) * (1e-12 * mx); };
    if (flat(saa, amax) || flat(sbb, bmax)) return std::nullopt;
    return std::clamp(sab / std::sqrt(saa * sbb), -1.0, 1.0);
}

/// One predicted frame joined with its reference-based label.
struct PredictionRecord {
    std::string song_id;
    std::string algorithm_id;
    double time = 0;
    double predicted = 0;
    double reference = 0;
};

struct ReportRow {
    std::string algorithm_id;
    double mae_db = 0;
    std::optional<double> mean_r;    // mean of per-song correlations
    std::optional<double> pooled_r;  // correlation over all frames together
    std::size_t songs = 0;
    std::size_t frames = 0;
    std::size_t undefined_r = 0;  // songs whose correlation was undefined
};

struct EvalReport {
    std::string scenario;
    std::uint64_t seed = 0;
    std::vector<ReportRow> rows;
    ReportRow global;
    nlohmann::json metadata = nlohmann::json::object();
};

namespace detail {

inline std::optional<double> mean_of(const std::vector<double>& v) {
    if (v.empty()) return std::nullopt;
    double s = 0;
    for (double x : v) s += x;
    return s / static_cast<double>(v.size());
}

inline std::optional<double> pooled(const std::vector<const PredictionRecord*>& recs) {
    if (recs.size() < 2) return std::nullopt;
    std::vector<double> p, r;
    for (const auto* x : recs) {
        p.push_back(x->predicted);
        r.push_back(x->reference);
    }
    return pearson(p, r);
}

} // namespace detail

/// Per-algorithm accuracy. MAE pools every frame of the algorithm;
/// correlation is computed per (song, algorithm) series then averaged over
/// songs. Rows follow the order in which algorithms first appear.
inline EvalReport build_report(const std::vector<PredictionRecord>& records, const std::string& scenario,
                               std::uint64_t seed) {
    if (records.empty()) throw DataError("no predictions to report");
    EvalReport rep;
    rep.scenario = scenario;
    rep.seed = seed;

    std::vector<std::string> algo_order;
    std::map<std::string, std::vector<const PredictionRecord*>> by_algo;
    for (const auto& r : records) {
        auto [it, fresh] = by_algo.try_emplace(r.algorithm_id);
        if (fresh) algo_order.push_back(r.algorithm_id);
        it->second.push_back(&r);
    }

    std::vector<double> row_means;
    std::size_t undefined_total = 0;
    for (const auto& algo : algo_order) {
        const auto& recs = by_algo[algo];
        ReportRow row;
        row.algorithm_id = algo;
        row.frames = recs.size();
        std::vector<std::string> song_order;
        std::map<std::string, std::vector<const PredictionRecord*>> by_song;
        double abs_sum = 0;
        for (const auto* r : recs) {
            abs_sum += std::abs(r->predicted - r->reference);
            auto [it, fresh] = by_song.try_emplace(r->song_id);
            if (fresh) song_order.push_back(r->song_id);
            it->second.push_back(r);
        }
        row.mae_db = abs_sum / static_cast<double>(recs.size());
        row.songs = song_order.size();
        std::vector<double> rs;
        for (const auto& song : song_order) {
            const auto& s = by_song[song];
            std::optional<double> r;
            if (s.size() >= 2) {
                std::vector<double> p, q;
                for (const auto* x : s) {
                    p.push_back(x->predicted);
                    q.push_back(x->reference);
                }
                r = pearson(p, q);
            }
            if (r) rs.push_back(*r);
            else ++row.undefined_r;
        }
        row.mean_r = detail::mean_of(rs);
        row.pooled_r = detail::pooled(recs);
        if (row.mean_r) row_means.push_back(*row.mean_r);
        undefined_total += row.undefined_r;
        rep.rows.push_back(std::move(row));
    }

    ReportRow& g = rep.global;
    g.algorithm_id = "GLOBAL";
    std::set<std::string> songs;
    double abs_sum = 0;
    std::vector<const PredictionRecord*> all;
    for (const auto& r : records) {
        abs_sum += std::abs(r.predicted - r.reference);
        songs.insert(r.song_id);
        all.push_back(&r);
    }
    g.frames = records.size();
    g.mae_db = abs_sum / static_cast<double>(records.size());
    g.songs = songs.size();
    g.mean_r = detail::mean_of(row_means);
    g.pooled_r = detail::pooled(all);
    g.undefined_r = undefined_total;
    return rep;
}

/// Pairs predictions with labels on (song, algorithm, time). Times are matched
/// to the microsecond.
inline std::vector<PredictionRecord> join_predictions(const std::vector<PredictionRecord>& predictions,
                                                      const std::vector<PredictionRecord>& labels) {
    using Key = std::tuple<std::string, std::string, long long>;
    const auto key = [](const PredictionRecord& r) { return Key{r.song_id, r.algorithm_id, std::llround(r.time * 1e6)}; };
    std::map<Key, double> ref;
    for (const auto& l : labels)
        if (!ref.emplace(key(l), l.reference).second)
            throw DataError("duplicate label for " + l.song_id + "/" + l.algorithm_id + " at t=" + std::to_string(l.time));
    std::vector<PredictionRecord> out;
    out.reserve(predictions.size());
    for (const auto& p : predictions) {
        const auto it = ref.find(key(p));
        if (it == ref.end())
            throw DataError("no label for prediction " + p.song_id + "/" + p.algorithm_id + " at t=" + std::to_string(p.time));
        auto joined = p;
        joined.reference = it->second;
        out.push_back(std::move(joined));
    }
    if (out.size() != labels.size()) throw DataError("labels without predictions: join is not one-to-one");
    return out;
}

namespace detail {

inline std::string fmt_opt(const std::optional<double>& v) {
    if (!v) return "nan";
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << *v;
    return os.str();
}

inline nlohmann::json row_json(const ReportRow& r) {
    nlohmann::json j;
    j["algorithm"] = r.algorithm_id;
    j["mae_db"] = r.mae_db;
    j["mean_r"] = r.mean_r ? nlohmann::json(*r.mean_r) : nlohmann::json(nullptr);
    j["pooled_r"] = r.pooled_r ? nlohmann::json(*r.pooled_r) : nlohmann::json(nullptr);
    j["songs"] = r.songs;
    j["frames"] = r.frames;
    j["undefined_r"] = r.undefined_r;
    return j;
}

} // namespace detail

inline void write_report_csv(std::ostream& os, const EvalReport& rep) {
    os << "algorithm,mae_db,mean_r,pooled_r,songs,frames,undefined_r\n";
    const auto line = [&](const ReportRow& r) {
        std::ostringstream m;
        m << std::fixed << std::setprecision(6) << r.mae_db;
        os << r.algorithm_id << ',' << m.str() << ',' << detail::fmt_opt(r.mean_r) << ','
           << detail::fmt_opt(r.pooled_r) << ',' << r.songs << ',' << r.frames << ',' << r.undefined_r << '\n';
    };
    for (const auto& r : rep.rows) line(r);
    line(rep.global);
}

inline nlohmann::json report_to_json(const EvalReport& rep) {
    nlohmann::json j;
    j["scenario"] = rep.scenario;
    j["seed"] = rep.seed;
    j["rows"] = nlohmann::json::array();
    for (const auto& r : rep.rows) j["rows"].push_back(detail::row_json(r));
    j["global"] = detail::row_json(rep.global);
    j["metadata"] = rep.metadata;
    return j;
}

} // namespace nrsar
