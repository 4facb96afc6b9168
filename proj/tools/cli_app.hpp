#pragma once

// Argument parsing for the `nrsar` executable, kept in a header so the test
// suite can drive it in-process and check exit codes.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "nrsar/commands.hpp"

namespace nrsar::cli {

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Referenceless SAR prediction: BSS-Eval labelling, mel features and an MLP regressor"};
    app.require_subcommand(1);
    app.set_version_flag("--version", "nrsar 0.1.0");

    std::string config_path;
    std::vector<std::string> overrides;
    const auto common = [&](CLI::App* sub) {
        sub->add_option("--config", config_path, "TOML-style config file")->check(CLI::ExistingFile);
        sub->add_option("--set", overrides, "override a config key (key=value), repeatable");
    };

    BssEvalOptions bss;
    std::string bss_out;
    auto* s_bss = app.add_subcommand("bss-eval", "framewise SAR of one estimate against its references");
    s_bss->add_option("--estimate", bss.estimate, "estimate WAV")->required();
    s_bss->add_option("--refs", bss.references, "reference WAVs, comma separated")->required()->delimiter(',');
    s_bss->add_option("--target", bss.target, "index of the target reference")->capture_default_str();
    s_bss->add_option("--out", bss_out, "CSV output (stdout when omitted)");
    common(s_bss);

    FeaturizeOptions feat;
    std::string feat_input, feat_out, feat_manifest, feat_cache;
    auto* s_feat = app.add_subcommand("featurize", "mel spectrogram of a file, or a feature cache for a manifest");
    s_feat->add_option("--input", feat_input, "WAV file");
    s_feat->add_option("--out", feat_out, "CSV output for --input");
    s_feat->add_option("--manifest", feat_manifest, "manifest JSON");
    s_feat->add_option("--cache-dir", feat_cache, "cache directory for --manifest");
    common(s_feat);

    SynthOptions syn;
    auto* s_syn = app.add_subcommand("synth", "generate a synthetic corpus and manifest");
    s_syn->add_option("--out-dir", syn.out_dir, "output directory")->required();
    s_syn->add_option("--songs", syn.synth.n_songs, "number of songs")->capture_default_str();
    s_syn->add_option("--duration", syn.synth.duration_s, "seconds per song")->capture_default_str();
    s_syn->add_option("--algorithms", syn.synth.n_algorithms, "number of degradation profiles")->capture_default_str();
    s_syn->add_option("--train-songs", syn.synth.train_songs, "songs tagged train (0: 70%)")->capture_default_str();
    s_syn->add_option("--rate", syn.synth.sample_rate, "sample rate")->capture_default_str();
    s_syn->add_option("--seed", syn.synth.seed, "seed")->capture_default_str();
    common(s_syn);

    TrainOptions tr;
    std::string tr_cache;
    auto* s_tr = app.add_subcommand("train", "train one model per scenario split");
    s_tr->add_option("--manifest", tr.manifest, "manifest JSON")->required();
    s_tr->add_option("--scenario", tr.scenario, "within | across-known | across-unknown")->required();
    s_tr->add_option("--out-dir", tr.out_dir, "directory for models and histories")->required();
    s_tr->add_option("--algorithm", tr.algorithm, "within: train only this algorithm");
    s_tr->add_option("--cache-dir", tr_cache, "read cached features written by featurize");
    common(s_tr);

    PredictOptions pr;
    auto* s_pr = app.add_subcommand("predict", "framewise SAR predictions for a WAV, no reference needed");
    s_pr->add_option("--model", pr.model, "MLPR weights file")->required();
    s_pr->add_option("--input", pr.input, "WAV file")->required();
    s_pr->add_option("--out", pr.out, "CSV output")->required();
    common(s_pr);

    EvaluateOptions ev;
    std::string ev_cache;
    auto* s_ev = app.add_subcommand("evaluate", "score trained models on a scenario's test songs");
    s_ev->add_option("--manifest", ev.manifest, "manifest JSON")->required();
    s_ev->add_option("--models", ev.models, "directory written by train")->required();
    s_ev->add_option("--scenario", ev.scenario, "within | across-known | across-unknown")->required();
    s_ev->add_option("--out-dir", ev.out_dir, "report directory")->required();
    s_ev->add_option("--algorithm", ev.algorithm, "within: evaluate only this algorithm");
    s_ev->add_option("--on", ev.on, "test | train")->capture_default_str();
    s_ev->add_flag("--svg", ev.svg, "also write an SVG chart per song");
    s_ev->add_option("--cache-dir", ev_cache, "read cached features written by featurize");
    common(s_ev);

    ReportOptions rep;
    auto* s_rep = app.add_subcommand("report", "stack evaluation reports into one table");
    s_rep->add_option("--input", rep.inputs, "report.json, repeatable")->required();
    s_rep->add_option("--out", rep.out, "CSV output")->required();
    common(s_rep);

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp& e) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::CallForVersion& e) {
        out << e.what() << '\n';
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << '\n';
        if (!app.get_subcommands().empty()) err << app.get_subcommands().front()->help();
        return static_cast<int>(ErrorKind::Usage);
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg.load_file(config_path);
        for (const auto& kv : overrides) cfg.set_assignment(kv);

        if (s_bss->parsed()) {
            if (!bss_out.empty()) bss.out = bss_out;
            return cmd_bss_eval(bss, cfg, out, err);
        }
        if (s_feat->parsed()) {
            if (!feat_input.empty()) feat.input = feat_input;
            if (!feat_out.empty()) feat.out = feat_out;
            if (!feat_manifest.empty()) feat.manifest = feat_manifest;
            if (!feat_cache.empty()) feat.cache_dir = feat_cache;
            return cmd_featurize(feat, cfg, out, err);
        }
        if (s_syn->parsed()) return cmd_synth(syn, cfg, out, err);
        if (s_tr->parsed()) {
            if (!tr_cache.empty()) tr.cache_dir = tr_cache;
            return cmd_train(tr, cfg, out, err);
        }
        if (s_pr->parsed()) return cmd_predict(pr, cfg, overrides, out, err);
        if (s_ev->parsed()) {
            if (!ev_cache.empty()) ev.cache_dir = ev_cache;
            return cmd_evaluate(ev, cfg, overrides, out, err);
        }
        if (s_rep->parsed()) return cmd_report(rep, cfg, out, err);
    } catch (const Error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(e.kind());
    } catch (const std::bad_alloc&) {
        err << "error: out of memory\n";
        return static_cast<int>(ErrorKind::Numerical);
    } catch (const std::filesystem::filesystem_error& e) {
        err << "error: " << e.what() << '\n';
        return static_cast<int>(ErrorKind::Data);
    }
    return static_cast<int>(ErrorKind::Usage);
}

} // namespace nrsar::cli
