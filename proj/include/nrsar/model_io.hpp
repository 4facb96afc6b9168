#pragma once

// MLPR weights file, little-endian:
//   "MLPR" | u32 version (=1) | u32 layer count
//   per layer: u32 rows | u32 cols | f32 weights[rows*cols] (row-major) | f32 biases[rows]
//   f32 feature_mean[input_dim] | f32 feature_std[input_dim]
//   u32 metadata byte length | UTF-8 JSON metadata

#include <filesystem>
#include <string>
#include <vector>

#include "nrsar/audio_io.hpp"
#include "nrsar/binary.hpp"
#include "nrsar/mlp.hpp"

namespace nrsar {

inline constexpr std::uint32_t kModelFormatVersion = 1;

inline std::vector<unsigned char> serialize_model(const MlpModel<float>& m) {
    m.validate();
    binary::Writer w;
    w.put_bytes("MLPR");
    w.put<std::uint32_t>(kModelFormatVersion);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.num_layers()));
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        const auto& W = m.weights[k];
        w.put<std::uint32_t>(static_cast<std::uint32_t>(W.rows()));
        w.put<std::uint32_t>(static_cast<std::uint32_t>(W.cols()));
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) w.put<float>(W(r, c));
        for (Eigen::Index r = 0; r < m.biases[k].size(); ++r) w.put<float>(m.biases[k](r));
    }
    for (Eigen::Index i = 0; i < m.feature_mean.size(); ++i) w.put<float>(m.feature_mean(i));
    for (Eigen::Index i = 0; i < m.feature_std.size(); ++i) w.put<float>(m.feature_std(i));
    w.put<std::uint32_t>(static_cast<std::uint32_t>(m.metadata.size()));
    w.put_bytes(m.metadata);
    return std::move(w.buffer());
}

inline MlpModel<float> deserialize_model(std::span<const unsigned char> bytes, const std::string& context = "model") {
    binary::Reader r(bytes, context);
    if (bytes.size() < 4 || r.get_bytes(4) != "MLPR") throw FormatError(context + ": bad magic (expected MLPR)");
    const auto version = r.get<std::uint32_t>();
    if (version != kModelFormatVersion)
        throw FormatError(context + ": unsupported weights format version " + std::to_string(version) +
                          " (this build reads version 1)");
    const auto layers = r.get<std::uint32_t>();
    if (layers == 0) throw FormatError(context + ": zero layers");

    MlpModel<float> m;
    for (std::uint32_t k = 0; k < layers; ++k) {
        const auto rows = r.get<std::uint32_t>();
        const auto cols = r.get<std::uint32_t>();
        if (k == 0) m.dims.push_back(cols);
        else if (cols != m.dims.back()) throw FormatError(context + ": layer " + std::to_string(k) + " input size mismatch");
        if (static_cast<std::uint64_t>(rows) * cols * 4 > r.remaining())
            throw TruncatedDataError(context + ": layer " + std::to_string(k) + " extends past end of file");
        m.dims.push_back(rows);
        MlpModel<float>::Matrix W(rows, cols);
        for (Eigen::Index i = 0; i < W.rows(); ++i)
            for (Eigen::Index j = 0; j < W.cols(); ++j) W(i, j) = r.get<float>();
        MlpModel<float>::Vector b(rows);
        for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = r.get<float>();
        m.weights.push_back(std::move(W));
        m.biases.push_back(std::move(b));
    }
    const auto d = static_cast<Eigen::Index>(m.dims.front());
    m.feature_mean.resize(d);
    m.feature_std.resize(d);
    for (Eigen::Index i = 0; i < d; ++i) m.feature_mean(i) = r.get<float>();
    for (Eigen::Index i = 0; i < d; ++i) m.feature_std(i) = r.get<float>();
    const auto meta_len = r.get<std::uint32_t>();
    m.metadata = r.get_bytes(meta_len);
    if (r.remaining() != 0) throw FormatError(context + ": trailing bytes after metadata");
    m.validate();
    return m;
}

inline void save_model(const MlpModel<float>& m, const std::filesystem::path& path) {
    detail::write_file_bytes(path, serialize_model(m));
}

inline MlpModel<float> load_model(const std::filesystem::path& path) {
    return deserialize_model(detail::read_file_bytes(path), path.string());
}

} // namespace nrsar
