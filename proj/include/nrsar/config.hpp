#pragma once

// Run configuration: a flat table of dotted keys with defaults, loadable from
// TOML-style `key = value` text with [section] headers and overridable by
// `--set key=value`.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "nrsar/dataset.hpp"
#include "nrsar/error.hpp"
#include "nrsar/mlp.hpp"

namespace nrsar {

class RunConfig {
public:
    RunConfig() {
        const FeatureConfig f;
        const LabelConfig l;
        const TrainConfig t;
        const auto& p = l.framewise.projection;
        values_ = {
            {"dsp.frame_len", num(f.frame_len)},
            {"dsp.hop", num(f.hop)},
            {"dsp.window", to_string(f.window)},
            {"dsp.n_mels", num(f.n_mels)},
            {"dsp.f_min", num(f.f_min)},
            {"dsp.f_max", num(f.f_max)},
            {"dsp.compression", to_string(f.compression)},
            {"dsp.n_stack", num(f.n_stack)},
            {"metric.window_s", num(l.framewise.window_s)},
            {"metric.hop_s", num(l.framewise.hop_s)},
            {"metric.filter_len", num(p.filter_len)},
            {"metric.ridge", num(p.ridge)},
            {"metric.clamp_lo", num(p.clamp_lo)},
            {"metric.clamp_hi", num(p.clamp_hi)},
            {"metric.silence_threshold", num(p.silence_threshold)},
            {"metric.excerpt_start_s", "0"},
            {"metric.excerpt_duration_s", "0"},
            {"model.hidden", "500,500,500"},
            {"model.init_seed", "1"},
            {"train.lr", num(t.adam.lr)},
            {"train.beta1", num(t.adam.beta1)},
            {"train.beta2", num(t.adam.beta2)},
            {"train.eps", num(t.adam.eps)},
            {"train.batch_size", num(t.batch_size)},
            {"train.max_epochs", num(t.max_epochs)},
            {"train.patience", num(t.patience)},
            {"train.seed", num(t.seed)},
            {"train.validation_fraction", num(t.validation_fraction)},
            {"train.std_floor", num(t.std_floor)},
            {"scenario.unknown_train_count", "0"},
            {"check.label_fraction", "0.01"},
            {"check.seed", "1"},
        };
    }

    /// Overrides one key; unknown keys are usage errors.
    void set(const std::string& key, const std::string& value) {
        const auto it = values_.find(key);
        if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
        it->second = value;
    }

    /// Parses "key=value".
    void set_assignment(const std::string& kv) {
        const auto eq = kv.find('=');
        if (eq == std::string::npos) throw UsageError("expected key=value, got '" + kv + "'");
        set(trim(kv.substr(0, eq)), unquote(trim(kv.substr(eq + 1))));
    }

    void load_text(const std::string& text, const std::string& context = "config") {
        std::istringstream in(text);
        std::string line, section;
        for (std::size_t lineno = 1; std::getline(in, line); ++lineno) {
            line = trim(strip_comment(line));
            if (line.empty()) continue;
            const auto where = context + ":" + std::to_string(lineno);
            if (line.front() == '[') {
                if (line.back() != ']') throw UsageError(where + ": unterminated section header");
                section = trim(line.substr(1, line.size() - 2));
                continue;
            }
            const auto eq = line.find('=');
            if (eq == std::string::npos) throw UsageError(where + ": expected key = value");
            const auto key = trim(line.substr(0, eq));
            try {
                set(section.empty() ? key : section + "." + key, unquote(trim(line.substr(eq + 1))));
            } catch (const UsageError& e) {
                throw UsageError(where + ": " + e.what());
            }
        }
    }

    void load_file(const std::filesystem::path& path) {
        std::ifstream in(path);
        if (!in) throw FileNotFoundError(path.string());
        std::stringstream ss;
        ss << in.rdbuf();
        load_text(ss.str(), path.string());
    }

    const std::string& get(const std::string& key) const {
        const auto it = values_.find(key);
        if (it == values_.end()) throw UsageError("unknown config key '" + key + "'");
        return it->second;
    }

    double get_double(const std::string& key) const {
        const auto& s = get(key);
        std::size_t used = 0;
        double v = 0;
        try {
            v = std::stod(s, &used);
        } catch (const std::exception&) {
            used = 0;
        }
        if (used != s.size() || !std::isfinite(v)) throw UsageError("config " + key + ": '" + s + "' is not a finite number");
        return v;
    }

    std::uint64_t get_uint(const std::string& key) const {
        const auto& s = get(key);
        std::uint64_t v = 0;
        const auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
        if (ec != std::errc{} || p != s.data() + s.size())
            throw UsageError("config " + key + ": '" + s + "' is not a non-negative integer");
        return v;
    }

    std::size_t get_size(const std::string& key) const { return static_cast<std::size_t>(get_uint(key)); }

    FeatureConfig feature_config() const {
        FeatureConfig f;
        f.frame_len = get_size("dsp.frame_len");
        f.hop = get_size("dsp.hop");
        f.window = parse_window(get("dsp.window"));
        f.n_mels = get_size("dsp.n_mels");
        f.f_min = get_double("dsp.f_min");
        f.f_max = get_double("dsp.f_max");
        f.compression = parse_compression(get("dsp.compression"));
        f.n_stack = get_size("dsp.n_stack");
        if (f.frame_len == 0 || f.hop == 0 || f.hop > f.frame_len) throw UsageError("dsp: need 0 < hop <= frame_len");
        if (f.n_mels == 0 || f.n_stack == 0) throw UsageError("dsp: n_mels and n_stack must be positive");
        if (f.f_min < 0 || (f.f_max != 0 && f.f_max <= f.f_min)) throw UsageError("dsp: need 0 <= f_min < f_max");
        return f;
    }

    LabelConfig label_config() const {
        LabelConfig l;
        l.framewise.window_s = get_double("metric.window_s");
        l.framewise.hop_s = get_double("metric.hop_s");
        auto& p = l.framewise.projection;
        p.filter_len = get_size("metric.filter_len");
        p.ridge = get_double("metric.ridge");
        p.clamp_lo = get_double("metric.clamp_lo");
        p.clamp_hi = get_double("metric.clamp_hi");
        p.silence_threshold = get_double("metric.silence_threshold");
        p.validate();
        l.excerpt_start_s = get_double("metric.excerpt_start_s");
        l.excerpt_duration_s = get_double("metric.excerpt_duration_s");
        if (!(l.framewise.window_s > 0 && l.framewise.hop_s > 0)) throw UsageError("metric: window and hop must be positive");
        if (l.excerpt_start_s < 0 || l.excerpt_duration_s < 0) throw UsageError("metric: excerpt bounds must be >= 0");
        return l;
    }

    TrainConfig train_config() const {
        TrainConfig t;
        t.adam.lr = get_double("train.lr");
        t.adam.beta1 = get_double("train.beta1");
        t.adam.beta2 = get_double("train.beta2");
        t.adam.eps = get_double("train.eps");
        t.batch_size = get_size("train.batch_size");
        t.max_epochs = get_size("train.max_epochs");
        t.patience = get_size("train.patience");
        t.seed = get_uint("train.seed");
        t.validation_fraction = get_double("train.validation_fraction");
        t.std_floor = get_double("train.std_floor");
        t.validate();
        return t;
    }

    std::vector<std::size_t> hidden_layers() const {
        std::vector<std::size_t> out;
        std::stringstream ss(get("model.hidden"));
        for (std::string item; std::getline(ss, item, ',');) {
            item = trim(item);
            std::size_t v = 0;
            const auto [p, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
            if (ec != std::errc{} || p != item.data() + item.size() || v == 0)
                throw UsageError("model.hidden must be a comma-separated list of positive sizes");
            out.push_back(v);
        }
        return out;
    }

    std::vector<std::size_t> layer_dims() const {
        std::vector<std::size_t> d{feature_config().vector_length()};
        for (auto h : hidden_layers()) d.push_back(h);
        d.push_back(1);
        return d;
    }

    ScenarioOptions scenario_options() const { return {get_size("scenario.unknown_train_count")}; }

    /// Parses every typed view once so a bad value fails before any work.
    void validate() const {
        feature_config();
        label_config();
        train_config();
        hidden_layers();
        scenario_options();
        get_uint("model.init_seed");
        get_uint("check.seed");
        const double f = get_double("check.label_fraction");
        if (f < 0 || f > 1) throw UsageError("check.label_fraction must lie in [0, 1]");
    }

    /// Canonical resolved form: sections in key order, one `key = value` per line.
    std::string to_text() const {
        std::string out, section;
        for (const auto& [k, v] : values_) {
            const auto dot = k.find('.');
            const auto sec = k.substr(0, dot);
            if (sec != section) {
                out += (section.empty() ? "[" : "\n[") + sec + "]\n";
                section = sec;
            }
            out += k.substr(dot + 1) + " = " + v + "\n";
        }
        return out;
    }

    nlohmann::json to_json() const {
        nlohmann::json j = nlohmann::json::object();
        for (const auto& [k, v] : values_) j[k] = v;
        return j;
    }

    const std::map<std::string, std::string>& values() const { return values_; }

private:
    std::map<std::string, std::string> values_;

    template <typename T>
    static std::string num(T v) {
        if constexpr (std::is_integral_v<T>) {
            return std::to_string(v);
        } else {
            char buf[64];
            const auto r = std::to_chars(buf, buf + sizeof buf, v);  // shortest round-trip form
            return std::string(buf, r.ptr);
        }
    }

    static std::string trim(const std::string& s) {
        const auto b = s.find_first_not_of(" \t\r\n");
        if (b == std::string::npos) return {};
        return s.substr(b, s.find_last_not_of(" \t\r\n") - b + 1);
    }

    static std::string unquote(const std::string& s) {
        if (s.size() >= 2 && (s.front() == '"' || s.front() == '\'') && s.back() == s.front()) return s.substr(1, s.size() - 2);
        return s;
    }

    static std::string strip_comment(const std::string& s) {
        char quote = 0;
        for (std::size_t i = 0; i < s.size(); ++i) {
            if (quote) {
                if (s[i] == quote) quote = 0;
            } else if (s[i] == '"' || s[i] == '\'') {
                quote = s[i];
            } else if (s[i] == '#') {
                return s.substr(0, i);
            }
        }
        return s;
    }
};

} // namespace nrsar
