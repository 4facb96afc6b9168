#pragma once

// Subcommand implementations behind the `nrsar` executable. Each takes parsed
// options plus the resolved RunConfig, writes its artifacts, prints a short
// summary and throws nrsar::Error subclasses on failure.

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrsar/audio_io.hpp"
#include "nrsar/bss_eval.hpp"
#include "nrsar/config.hpp"
#include "nrsar/dataset.hpp"
#include "nrsar/digest.hpp"
#include "nrsar/dsp.hpp"
#include "nrsar/metrics.hpp"
#include "nrsar/mlp.hpp"
#include "nrsar/model_io.hpp"
#include "nrsar/svg.hpp"
#include "nrsar/synth.hpp"

namespace nrsar::cli {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// shared helpers

inline std::ofstream open_out(const fs::path& p) {
    if (p.has_parent_path()) fs::create_directories(p.parent_path());
    std::ofstream out(p, std::ios::binary | std::ios::trunc);
    if (!out) throw DataError("cannot write " + p.string());
    return out;
}

/// `<output>.run.json`: the resolved config, its digest and the command inputs.
inline void write_run_record(const fs::path& output, const std::string& command, const RunConfig& cfg,
                             nlohmann::json inputs = nlohmann::json::object()) {
    nlohmann::json j;
    j["command"] = command;
    j["config"] = cfg.to_json();
    j["config_sha256"] = sha256_hex(cfg.to_text());
    j["seed"] = cfg.get_uint("train.seed");
    j["inputs"] = std::move(inputs);
    auto out = open_out(fs::path(output.string() + ".run.json"));
    out << j.dump(2) << '\n';
}

inline std::string fixed6(double v) {
    std::ostringstream os;
    os << std::fixed << std::setprecision(6) << v;
    return os.str();
}

inline std::string model_tag(const ScenarioSpec& s) {
    return s.kind == ScenarioKind::Within ? "within_" + s.train_algorithms.front() : to_string(s.kind);
}

inline std::vector<ScenarioSpec> select_scenarios(const std::string& scenario, const Manifest& m, const RunConfig& cfg,
                                                  const std::string& only_algorithm) {
    auto specs = make_scenario(parse_scenario(scenario), m, cfg.get_uint("train.seed"), cfg.scenario_options());
    if (!only_algorithm.empty()) {
        if (specs.front().kind != ScenarioKind::Within) throw UsageError("--algorithm only applies to the within scenario");
        std::erase_if(specs, [&](const ScenarioSpec& s) { return s.train_algorithms.front() != only_algorithm; });
        if (specs.empty()) throw DataError("algorithm '" + only_algorithm + "' is not in the manifest");
    }
    return specs;
}

/// Predicts every column of `x` in chunks to bound the normalized copy.
inline std::vector<double> predict_columns(const MlpModel<float>& model, const Eigen::MatrixXf& x) {
    if (static_cast<std::size_t>(x.rows()) != model.input_dim())
        throw DimensionError("model expects " + std::to_string(model.input_dim()) + " inputs, features have " +
                             std::to_string(x.rows()));
    std::vector<double> out;
    out.reserve(static_cast<std::size_t>(x.cols()));
    constexpr Eigen::Index chunk = 2048;
    for (Eigen::Index c = 0; c < x.cols(); c += chunk) {
        const Eigen::MatrixXf block = x.middleCols(c, std::min(chunk, x.cols() - c));
        const auto y = predict(model, block);
        for (Eigen::Index i = 0; i < y.size(); ++i) out.push_back(static_cast<double>(y(i)));
    }
    return out;
}

/// The stored config of a model, used as the base for predict/evaluate so
/// features match what the model was trained on.
inline void apply_model_config(RunConfig& cfg, const MlpModel<float>& model) {
    nlohmann::json meta;
    try {
        meta = nlohmann::json::parse(model.metadata);
    } catch (const nlohmann::json::exception&) {
        return;
    }
    if (!meta.contains("config") || !meta["config"].is_object()) return;
    for (const auto& [k, v] : meta["config"].items())
        if (v.is_string() && cfg.values().count(k)) cfg.set(k, v.get<std::string>());
}

// ---------------------------------------------------------------------------
// bss-eval

struct BssEvalOptions {
    fs::path estimate;
    std::vector<fs::path> references;
    std::size_t target = 0;
    std::optional<fs::path> out;
};

inline int cmd_bss_eval(const BssEvalOptions& o, const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    const auto lc = cfg.label_config();
    if (o.references.empty()) throw UsageError("at least one reference is required");
    if (o.target >= o.references.size()) throw UsageError("--target is out of range for the given references");
    const auto est = load_mono(o.estimate, lc);
    std::vector<AudioClip> refs;
    for (const auto& r : o.references) refs.push_back(load_mono(r, lc));
    const auto s = framewise_sar(est, refs, o.target, lc.framewise);

    std::vector<double> valid;
    for (std::size_t k = 0; k < s.size(); ++k)
        if (s.valid[k]) valid.push_back(s.values[k]);
    std::ostream& summary = o.out ? out : log;
    if (o.out) {
        auto f = open_out(*o.out);
        write_sar_csv(f, s);
        nlohmann::json in{{"estimate", o.estimate.string()}, {"estimate_sha256", file_sha256(o.estimate)},
                          {"target", o.target}};
        for (const auto& r : o.references) in["references"].push_back(r.string());
        write_run_record(*o.out, "bss-eval", cfg, in);
    } else {
        write_sar_csv(out, s);
    }
    summary << "frames " << s.size() << " valid " << valid.size();
    if (!valid.empty()) {
        std::sort(valid.begin(), valid.end());
        const double med = valid.size() % 2 ? valid[valid.size() / 2]
                                            : 0.5 * (valid[valid.size() / 2 - 1] + valid[valid.size() / 2]);
        summary << " median " << fixed6(med) << " min " << fixed6(valid.front()) << " max " << fixed6(valid.back());
    }
    summary << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// featurize

struct FeaturizeOptions {
    std::optional<fs::path> input;     // single file -> mel matrix CSV
    std::optional<fs::path> out;
    std::optional<fs::path> manifest;  // whole manifest -> corpus cache
    std::optional<fs::path> cache_dir;
};

inline int cmd_featurize(const FeaturizeOptions& o, const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    const auto fc = cfg.feature_config();
    const auto lc = cfg.label_config();
    if (o.input.has_value() == o.manifest.has_value()) throw UsageError("give exactly one of --input or --manifest");
    if (o.input) {
        if (!o.out) throw UsageError("--input needs --out");
        const auto mfs = compute_features(load_mono(*o.input, lc), fc);
        auto f = open_out(*o.out);
        write_features_csv(f, mfs);
        write_run_record(*o.out, "featurize", cfg, {{"input", o.input->string()}, {"input_sha256", file_sha256(*o.input)}});
        out << "frames " << mfs.frames() << " mels " << mfs.n_mels() << " stack_length " << fc.vector_length() << '\n';
        return 0;
    }
    if (!o.cache_dir) throw UsageError("--manifest needs --cache-dir");
    const auto m = load_manifest(*o.manifest);
    std::vector<std::size_t> all(m.entries.size());
    std::iota(all.begin(), all.end(), 0);
    const auto corpus = build_corpus(m, all, fc, lc, {*o.cache_dir, true},
                                     [&](std::size_t d, std::size_t n) { log << "featurize " << d << '/' << n << '\n'; });
    const auto [worst, checked] = spot_check_labels(m, corpus, lc, cfg.get_double("check.label_fraction"),
                                                    cfg.get_uint("check.seed"));
    if (worst > 1e-3) throw NumericalError("label spot-check deviates by " + std::to_string(worst) + " dB");
    write_run_record(*o.cache_dir / "corpus", "featurize", cfg,
                     {{"manifest", o.manifest->string()}, {"manifest_sha256", file_sha256(*o.manifest)}});
    out << "entries " << m.entries.size() << " examples " << corpus.size() << " spot_checked " << checked << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// synth

struct SynthOptions {
    fs::path out_dir;
    SynthConfig synth;
};

inline int cmd_synth(const SynthOptions& o, const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    const auto m = synthesize_corpus(o.out_dir, o.synth,
                                     [&](std::size_t d, std::size_t n) { log << "synth " << d << '/' << n << '\n'; });
    const auto& s = o.synth;
    write_run_record(o.out_dir / "manifest.json", "synth", cfg,
                     {{"songs", s.n_songs},
                      {"duration_s", s.duration_s},
                      {"sample_rate", s.sample_rate},
                      {"algorithms", s.n_algorithms},
                      {"train_songs", s.resolved_train_songs()},
                      {"synth_seed", s.seed}});
    out << "manifest " << (o.out_dir / "manifest.json").string() << " entries " << m.entries.size() << " train_songs "
        << m.songs("train").size() << " test_songs " << m.songs("test").size() << '\n';
    return 0;
}

// ---------------------------------------------------------------------------
// train

struct TrainOptions {
    fs::path manifest;
    std::string scenario;
    fs::path out_dir;
    std::string algorithm;  // within only: restrict to one algorithm
    std::optional<fs::path> cache_dir;
};

inline int cmd_train(const TrainOptions& o, const RunConfig& cfg, std::ostream& out, std::ostream& log) {
    cfg.validate();
    const auto fc = cfg.feature_config();
    const auto lc = cfg.label_config();
    const auto tc = cfg.train_config();
    const auto m = load_manifest(o.manifest);
    const auto specs = select_scenarios(o.scenario, m, cfg, o.algorithm);
    const auto manifest_digest = file_sha256(o.manifest);

    for (const auto& spec : specs) {
        const auto tag = model_tag(spec);
        const auto entries = scenario_entries(spec, m, false);
        CorpusOptions co;
        if (o.cache_dir) co.cache_dir = *o.cache_dir;
        auto corpus = build_corpus(m, entries, fc, lc, co,
                                   [&](std::size_t d, std::size_t n) { log << tag << ": examples " << d << '/' << n << '\n'; });
        const auto [worst, checked] = spot_check_labels(m, corpus, lc, cfg.get_double("check.label_fraction"),
                                                        cfg.get_uint("check.seed"));
        if (worst > 1e-3) throw NumericalError("label spot-check deviates by " + std::to_string(worst) + " dB");

        double mean = 0, var = 0;
        for (float l : corpus.labels) mean += l;
        mean /= static_cast<double>(std::max<std::size_t>(1, corpus.size()));
        for (float l : corpus.labels) var += (l - mean) * (l - mean);
        var /= static_cast<double>(std::max<std::size_t>(1, corpus.size()));

        const auto n_examples = corpus.size();
        const auto data = std::move(corpus).to_training_set();
        auto result = train(init_mlp<float>(cfg.layer_dims(), cfg.get_uint("model.init_seed")), data, tc,
                            [&](const EpochRecord& r) {
                                log << tag << ": epoch " << r.epoch << " train_mse " << fixed6(r.train_mse)
                                    << " val_mse " << fixed6(r.val_mse) << '\n';
                            });

        nlohmann::json meta;
        meta["scenario"] = spec.name();
        meta["train_algorithms"] = spec.train_algorithms;
        meta["train_songs"] = spec.train_songs;
        meta["config"] = cfg.to_json();
        meta["config_sha256"] = sha256_hex(cfg.to_text());
        meta["manifest_sha256"] = manifest_digest;
        meta["seed"] = tc.seed;
        meta["best_epoch"] = result.best_epoch;
        meta["examples"] = n_examples;
        meta["label_variance"] = var;
        result.model.metadata = meta.dump();

        const auto model_path = o.out_dir / (tag + ".mlpr");
        fs::create_directories(o.out_dir);
        save_model(result.model, model_path);
        const auto hist_path = o.out_dir / (tag + ".history.csv");
        {
            auto h = open_out(hist_path);
            h << "epoch,train_mse,val_mse\n";
            for (const auto& r : result.history) h << r.epoch << ',' << fixed6(r.train_mse) << ',' << fixed6(r.val_mse) << '\n';
        }
        const nlohmann::json in{{"manifest", o.manifest.string()}, {"manifest_sha256", manifest_digest}, {"scenario", spec.name()}};
        write_run_record(model_path, "train", cfg, in);
        write_run_record(hist_path, "train", cfg, in);

        double best_val = 0;
        for (const auto& r : result.history)
            if (r.epoch == result.best_epoch) best_val = r.val_mse;
        out << tag << ": examples " << n_examples << " (train " << result.train_examples << ", validation "
            << result.validation_examples << ") best_epoch " << result.best_epoch << " val_mse " << fixed6(best_val)
            << " label_variance " << fixed6(var) << " model " << model_path.string() << " sha256 "
            << file_sha256(model_path) << '\n';
    }
    return 0;
}

// ---------------------------------------------------------------------------
// predict

struct PredictOptions {
    fs::path model;
    fs::path input;
    fs::path out;
};

inline int cmd_predict(const PredictOptions& o, RunConfig cfg, const std::vector<std::string>& overrides,
                       std::ostream& out, std::ostream&) {
    const auto model = load_model(o.model);
    apply_model_config(cfg, model);
    for (const auto& kv : overrides) cfg.set_assignment(kv);
    const auto fc = cfg.feature_config();
    const auto lc = cfg.label_config();
    const auto clip = load_mono(o.input, lc);
    const auto grid = label_grid(clip.length(), clip.sample_rate, lc.framewise.window_s, lc.framewise.hop_s);

    // every grid frame is predicted; no reference means no silence mask
    SarSeries slots;
    slots.hop_s = lc.framewise.hop_s;
    slots.window_s = lc.framewise.window_s;
    for (std::size_t k = 0; k < grid.frames; ++k) {
        slots.values.push_back(0.0);
        slots.valid.push_back(true);
        slots.times.push_back(grid.centre_time(k));
    }
    const auto ex = pair_examples(compute_features(clip, fc), slots, fc, "", "");
    Eigen::MatrixXf x(static_cast<Eigen::Index>(fc.vector_length()), static_cast<Eigen::Index>(ex.size()));
    for (std::size_t i = 0; i < ex.size(); ++i)
        x.col(static_cast<Eigen::Index>(i)) =
            Eigen::Map<const Eigen::VectorXf>(ex[i].features.values.data(), x.rows());
    const auto y = predict_columns(model, x);

    auto f = open_out(o.out);
    f << "frame_index,time_s,predicted_sar_db\n";
    for (std::size_t i = 0; i < y.size(); ++i) f << i << ',' << fixed6(ex[i].time) << ',' << fixed6(y[i]) << '\n';
    write_run_record(o.out, "predict", cfg,
                     {{"model", o.model.string()}, {"model_sha256", file_sha256(o.model)}, {"input", o.input.string()},
                      {"input_sha256", file_sha256(o.input)}});
    if (!y.empty()) {
        double mean = 0;
        for (double v : y) mean += v;
        out << "frames " << y.size() << " mean_predicted_sar_db " << fixed6(mean / static_cast<double>(y.size())) << '\n';
    } else {
        out << "frames 0\n";
    }
    return 0;
}

// ---------------------------------------------------------------------------
// evaluate

struct EvaluateOptions {
    fs::path manifest;
    fs::path models;  // directory written by train
    std::string scenario;
    fs::path out_dir;
    std::string algorithm;
    std::string on = "test";  // or "train"
    bool svg = false;
    std::optional<fs::path> cache_dir;
};

inline int cmd_evaluate(const EvaluateOptions& o, RunConfig cfg, const std::vector<std::string>& overrides,
                        std::ostream& out, std::ostream& log) {
    if (o.on != "test" && o.on != "train") throw UsageError("--on must be test or train");
    const auto m = load_manifest(o.manifest);
    const auto specs = select_scenarios(o.scenario, m, cfg, o.algorithm);

    std::vector<PredictionRecord> records;
    nlohmann::json models = nlohmann::json::object();
    RunConfig used = cfg;
    for (const auto& spec : specs) {
        const auto tag = model_tag(spec);
        const auto path = o.models / (tag + ".mlpr");
        const auto model = load_model(path);
        RunConfig local = cfg;
        apply_model_config(local, model);
        for (const auto& kv : overrides) local.set_assignment(kv);
        used = local;
        models[tag] = file_sha256(path);

        const auto entries = scenario_entries(spec, m, o.on == "test");
        CorpusOptions co;
        if (o.cache_dir) co.cache_dir = *o.cache_dir;
        const auto corpus = build_corpus(m, entries, local.feature_config(), local.label_config(), co,
                                         [&](std::size_t d, std::size_t n) { log << tag << ": examples " << d << '/' << n << '\n'; });
        const auto y = predict_columns(model, corpus.features);
        for (std::size_t i = 0; i < y.size(); ++i)
            records.push_back({corpus.info[i].song_id, corpus.info[i].algorithm_id, corpus.info[i].time, y[i],
                               static_cast<double>(corpus.labels[i])});
    }

    const std::string scenario_name = to_string(specs.front().kind);
    auto rep = build_report(records, scenario_name, used.get_uint("train.seed"));
    rep.metadata["config"] = used.to_json();
    rep.metadata["config_sha256"] = sha256_hex(used.to_text());
    rep.metadata["manifest_sha256"] = file_sha256(o.manifest);
    rep.metadata["models_sha256"] = models;
    rep.metadata["evaluated_on"] = o.on;

    fs::create_directories(o.out_dir);
    {
        auto f = open_out(o.out_dir / "report.csv");
        write_report_csv(f, rep);
    }
    {
        auto f = open_out(o.out_dir / "report.json");
        f << report_to_json(rep).dump(2) << '\n';
    }
    const nlohmann::json in{{"manifest", o.manifest.string()}, {"models", models}, {"scenario", scenario_name}, {"on", o.on}};
    write_run_record(o.out_dir / "report.csv", "evaluate", used, in);

    // per (algorithm, song) series, in record order
    std::vector<std::pair<std::string, std::string>> order;
    std::map<std::pair<std::string, std::string>, std::vector<const PredictionRecord*>> series;
    for (const auto& r : records) {
        auto [it, fresh] = series.try_emplace({r.algorithm_id, r.song_id});
        if (fresh) order.push_back(it->first);
        it->second.push_back(&r);
    }
    for (const auto& key : order) {
        const auto& recs = series[key];
        const auto base = o.out_dir / "predictions" / key.first / key.second;
        {
            auto f = open_out(base.string() + ".csv");
            f << "time_s,predicted_sar_db,reference_sar_db\n";
            for (const auto* r : recs) f << fixed6(r->time) << ',' << fixed6(r->predicted) << ',' << fixed6(r->reference) << '\n';
        }
        if (o.svg) {
            std::vector<double> t, p, ref;
            for (const auto* r : recs) {
                t.push_back(r->time);
                p.push_back(r->predicted);
                ref.push_back(r->reference);
            }
            auto f = open_out(base.string() + ".svg");
            write_series_svg(f, key.second + " / " + key.first, t, p, ref);
        }
    }

    out << "scenario " << scenario_name << " on " << o.on << '\n';
    out << std::left << std::setw(16) << "algorithm" << std::setw(12) << "mae_db" << std::setw(12) << "mean_r"
        << std::setw(12) << "pooled_r" << "frames\n";
    const auto line = [&](const ReportRow& r) {
        out << std::setw(16) << r.algorithm_id << std::setw(12) << fixed6(r.mae_db).substr(0, 8) << std::setw(12)
            << detail::fmt_opt(r.mean_r).substr(0, 8) << std::setw(12) << detail::fmt_opt(r.pooled_r).substr(0, 8)
            << r.frames << '\n';
    };
    for (const auto& r : rep.rows) line(r);
    line(rep.global);
    out << std::right;
    return 0;
}

// ---------------------------------------------------------------------------
// report

struct ReportOptions {
    std::vector<fs::path> inputs;  // report.json files
    fs::path out;
};

/// Stacks several evaluation reports into one scenario-by-algorithm table.
inline int cmd_report(const ReportOptions& o, const RunConfig& cfg, std::ostream& out, std::ostream&) {
    if (o.inputs.empty()) throw UsageError("report needs at least one --input");
    std::ostringstream table;
    table << "scenario,algorithm,mae_db,mean_r,pooled_r,songs,frames,undefined_r\n";
    nlohmann::json in = nlohmann::json::array();
    for (const auto& p : o.inputs) {
        std::ifstream f(p);
        if (!f) throw FileNotFoundError(p.string());
        nlohmann::json j;
        try {
            f >> j;
            const auto scenario = j.at("scenario").get<std::string>();
            auto rows = j.at("rows");
            rows.push_back(j.at("global"));
            for (const auto& r : rows) {
                const auto opt = [&](const char* k) {
                    return r.at(k).is_null() ? std::string("nan") : fixed6(r.at(k).get<double>());
                };
                table << scenario << ',' << r.at("algorithm").get<std::string>() << ',' << fixed6(r.at("mae_db").get<double>())
                      << ',' << opt("mean_r") << ',' << opt("pooled_r") << ',' << r.at("songs").get<std::size_t>() << ','
                      << r.at("frames").get<std::size_t>() << ',' << r.at("undefined_r").get<std::size_t>() << '\n';
            }
        } catch (const nlohmann::json::exception& e) {
            throw FormatError(p.string() + ": not an evaluation report (" + e.what() + ")");
        }
        in.push_back({{"path", p.string()}, {"sha256", file_sha256(p)}});
    }
    auto f = open_out(o.out);
    f << table.str();
    write_run_record(o.out, "report", cfg, {{"reports", in}});
    out << table.str();
    return 0;
}

} // namespace nrsar::cli
