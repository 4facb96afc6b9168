#pragma once

// Fully connected regressor: affine + ReLU hidden layers, affine output,
// trained on mean squared error with analytic reverse-mode gradients and an
// adaptive-moment optimizer. Everything is deterministic for a fixed seed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "nrsar/error.hpp"

namespace nrsar {

template <typename Scalar>
struct MlpModel {
    using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
    using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

    std::vector<std::size_t> dims;
    std::vector<Matrix> weights;  // layer k: dims[k+1] x dims[k]
    std::vector<Vector> biases;
    Vector feature_mean;
    Vector feature_std;
    std::string metadata = "{}";  // JSON text

    std::size_t input_dim() const { return dims.front(); }
    std::size_t num_layers() const { return weights.size(); }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        for (std::size_t k = 0; k < weights.size(); ++k)
            n += static_cast<std::size_t>(weights[k].size() + biases[k].size());
        return n;
    }

    void validate() const {
        if (dims.size() < 2) throw DataError("model needs at least an input and an output layer");
        if (weights.size() != dims.size() - 1 || biases.size() != weights.size())
            throw DataError("model layer count does not match its dimensions");
        for (std::size_t k = 0; k < weights.size(); ++k) {
            if (static_cast<std::size_t>(weights[k].rows()) != dims[k + 1] ||
                static_cast<std::size_t>(weights[k].cols()) != dims[k] ||
                static_cast<std::size_t>(biases[k].size()) != dims[k + 1])
                throw DataError("layer " + std::to_string(k) + " has inconsistent shape");
            if (!weights[k].allFinite() || !biases[k].allFinite())
                throw NumericalError("layer " + std::to_string(k) + " has non-finite parameters");
        }
        if (static_cast<std::size_t>(feature_mean.size()) != dims.front() ||
            static_cast<std::size_t>(feature_std.size()) != dims.front())
            throw DataError("normalization statistics do not match the input dimension");
        if ((feature_std.array() <= Scalar(0)).any()) throw DataError("feature std entries must be positive");
    }

    template <typename Other>
    MlpModel<Other> cast() const {
        MlpModel<Other> m;
        m.dims = dims;
        for (const auto& w : weights) m.weights.push_back(w.template cast<Other>());
        for (const auto& b : biases) m.biases.push_back(b.template cast<Other>());
        m.feature_mean = feature_mean.template cast<Other>();
        m.feature_std = feature_std.template cast<Other>();
        m.metadata = metadata;
        return m;
    }
};

/// He-initialized weights (std = sqrt(2 / fan_in)), zero biases, identity
/// normalization.
template <typename Scalar>
MlpModel<Scalar> init_mlp(const std::vector<std::size_t>& dims, std::uint64_t seed) {
    if (dims.size() < 2) throw UsageError("layer_dims needs at least two entries");
    for (auto d : dims)
        if (d == 0) throw UsageError("layer dimensions must be positive");
    MlpModel<Scalar> m;
    m.dims = dims;
    std::mt19937_64 rng(seed);
    for (std::size_t k = 0; k + 1 < dims.size(); ++k) {
        std::normal_distribution<double> dist(0.0, std::sqrt(2.0 / static_cast<double>(dims[k])));
        typename MlpModel<Scalar>::Matrix w(dims[k + 1], dims[k]);
        // column-major fill order is part of the determinism contract
        for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = static_cast<Scalar>(dist(rng));
        m.weights.push_back(std::move(w));
        m.biases.push_back(MlpModel<Scalar>::Vector::Zero(static_cast<Eigen::Index>(dims[k + 1])));
    }
    m.feature_mean = MlpModel<Scalar>::Vector::Zero(static_cast<Eigen::Index>(dims.front()));
    m.feature_std = MlpModel<Scalar>::Vector::Ones(static_cast<Eigen::Index>(dims.front()));
    return m;
}

/// z-scores raw feature columns in place using the model's statistics.
template <typename Scalar, typename Derived>
void normalize_features(const MlpModel<Scalar>& m, Eigen::MatrixBase<Derived>& x) {
    x.colwise() -= m.feature_mean;
    x.array().colwise() /= m.feature_std.array();
}

template <typename Scalar>
typename MlpModel<Scalar>::Vector forward_normalized(const MlpModel<Scalar>& m,
                                                     const typename MlpModel<Scalar>::Matrix& xn) {
    typename MlpModel<Scalar>::Matrix a = xn;
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        typename MlpModel<Scalar>::Matrix z = m.weights[k] * a;
        z.colwise() += m.biases[k];
        if (k + 1 < m.num_layers()) z = z.cwiseMax(Scalar(0));
        a = std::move(z);
    }
    return a.row(0).transpose();
}

/// Batch prediction; columns of `x` are raw (unnormalized) feature vectors.
template <typename Scalar>
typename MlpModel<Scalar>::Vector predict(const MlpModel<Scalar>& m, const typename MlpModel<Scalar>::Matrix& x) {
    if (static_cast<std::size_t>(x.rows()) != m.input_dim())
        throw DimensionError("feature dimension " + std::to_string(x.rows()) + " does not match model input " +
                             std::to_string(m.input_dim()));
    if (!x.allFinite()) throw DataError("non-finite feature value");
    typename MlpModel<Scalar>::Matrix xn = x;
    normalize_features(m, xn);
    return forward_normalized(m, xn);
}

template <typename Scalar, typename In>
Scalar forward(const MlpModel<Scalar>& m, std::span<const In> x) {
    if (x.size() != m.input_dim())
        throw DimensionError("feature vector has " + std::to_string(x.size()) + " entries, model expects " +
                             std::to_string(m.input_dim()));
    typename MlpModel<Scalar>::Matrix col(static_cast<Eigen::Index>(x.size()), 1);
    for (std::size_t i = 0; i < x.size(); ++i) col(static_cast<Eigen::Index>(i), 0) = static_cast<Scalar>(x[i]);
    return predict(m, col)(0);
}

template <typename Scalar>
struct Gradients {
    std::vector<typename MlpModel<Scalar>::Matrix> weights;
    std::vector<typename MlpModel<Scalar>::Vector> biases;
};

/// MSE over the batch and its gradient with respect to every parameter.
/// `xn` holds already-normalized inputs, one example per column.
template <typename Scalar>
std::pair<Scalar, Gradients<Scalar>> loss_and_grad_normalized(const MlpModel<Scalar>& m,
                                                              const typename MlpModel<Scalar>::Matrix& xn,
                                                              std::span<const Scalar> labels) {
    using Matrix = typename MlpModel<Scalar>::Matrix;
    const auto batch = xn.cols();
    if (batch == 0) throw UsageError("empty batch");
    if (static_cast<std::size_t>(batch) != labels.size()) throw DimensionError("batch and label counts differ");

    const std::size_t layers = m.num_layers();
    std::vector<Matrix> acts;  // acts[k] = input to layer k
    acts.reserve(layers);
    acts.push_back(xn);
    Matrix z;
    for (std::size_t k = 0; k < layers; ++k) {
        z = m.weights[k] * acts.back();
        z.colwise() += m.biases[k];
        if (k + 1 < layers) acts.push_back(z.cwiseMax(Scalar(0)));
    }

    Matrix delta(1, batch);
    Scalar loss = 0;
    for (Eigen::Index i = 0; i < batch; ++i) {
        const Scalar r = z(0, i) - labels[static_cast<std::size_t>(i)];
        loss += r * r;
        delta(0, i) = Scalar(2) * r / static_cast<Scalar>(batch);
    }
    loss /= static_cast<Scalar>(batch);

    Gradients<Scalar> g;
    g.weights.resize(layers);
    g.biases.resize(layers);
    for (std::size_t k = layers; k-- > 0;) {
        g.weights[k].noalias() = delta * acts[k].transpose();
        g.biases[k] = delta.rowwise().sum();
        if (k > 0) {
            Matrix back = m.weights[k].transpose() * delta;
            // ReLU gate: units with zero activation pass no gradient
            delta = (acts[k].array() > Scalar(0)).select(back, Scalar(0));
        }
    }
    return {loss, std::move(g)};
}

/// Same as loss_and_grad_normalized but takes raw features.
template <typename Scalar>
std::pair<Scalar, Gradients<Scalar>> loss_and_grad(const MlpModel<Scalar>& m,
                                                   const typename MlpModel<Scalar>::Matrix& x,
                                                   std::span<const Scalar> labels) {
    if (static_cast<std::size_t>(x.rows()) != m.input_dim()) throw DimensionError("feature dimension mismatch");
    typename MlpModel<Scalar>::Matrix xn = x;
    normalize_features(m, xn);
    return loss_and_grad_normalized(m, xn, labels);
}

struct AdamParams {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

template <typename Scalar>
struct AdamState {
    Gradients<Scalar> m, v;
    std::int64_t step = 0;

    explicit AdamState(const MlpModel<Scalar>& model) {
        for (std::size_t k = 0; k < model.num_layers(); ++k) {
            m.weights.push_back(MlpModel<Scalar>::Matrix::Zero(model.weights[k].rows(), model.weights[k].cols()));
            m.biases.push_back(MlpModel<Scalar>::Vector::Zero(model.biases[k].size()));
        }
        v = m;
    }
};

template <typename Scalar>
void adam_step(MlpModel<Scalar>& model, AdamState<Scalar>& state, const Gradients<Scalar>& g, const AdamParams& p) {
    ++state.step;
    const auto b1 = static_cast<Scalar>(p.beta1);
    const auto b2 = static_cast<Scalar>(p.beta2);
    const auto c1 = static_cast<Scalar>(1.0 - std::pow(p.beta1, static_cast<double>(state.step)));
    const auto c2 = static_cast<Scalar>(1.0 - std::pow(p.beta2, static_cast<double>(state.step)));
    const auto lr = static_cast<Scalar>(p.lr);
    const auto eps = static_cast<Scalar>(p.eps);
    const auto update = [&](auto& param, auto& m, auto& v, const auto& grad) {
        m = b1 * m + (Scalar(1) - b1) * grad;
        v = b2 * v + (Scalar(1) - b2) * grad.cwiseProduct(grad);
        param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    for (std::size_t k = 0; k < model.num_layers(); ++k) {
        update(model.weights[k], state.m.weights[k], state.v.weights[k], g.weights[k]);
        update(model.biases[k], state.m.biases[k], state.v.biases[k], g.biases[k]);
    }
}

// ---------------------------------------------------------------------------
// Training

struct TrainConfig {
    AdamParams adam;
    std::size_t batch_size = 128;
    std::size_t max_epochs = 200;
    std::size_t patience = 10;
    std::uint64_t seed = 1;
    double validation_fraction = 0.15;
    double std_floor = 1e-6;

    void validate() const {
        if (batch_size < 1) throw UsageError("batch size must be >= 1");
        if (!(validation_fraction > 0 && validation_fraction < 1))
            throw UsageError("validation fraction must lie in (0, 1)");
        if (!(adam.lr > 0)) throw UsageError("learning rate must be positive");
        if (max_epochs < 1) throw UsageError("max_epochs must be >= 1");
    }
};

/// Training examples, one per column. `groups` (optional, one per column)
/// names the song each example came from; validation is carved out by group
/// so no song straddles the train/validation boundary.
template <typename Scalar>
struct TrainingSet {
    typename MlpModel<Scalar>::Matrix features;
    std::vector<Scalar> labels;
    std::vector<std::string> groups;

    std::size_t size() const { return labels.size(); }
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_mse = 0;
    double val_mse = 0;
};

template <typename Scalar>
struct TrainResult {
    MlpModel<Scalar> model;
    std::vector<EpochRecord> history;
    std::size_t best_epoch = 0;
    std::size_t train_examples = 0;
    std::size_t validation_examples = 0;
};

namespace detail {

/// Deterministic train/validation partition of example indices.
inline std::pair<std::vector<std::size_t>, std::vector<std::size_t>> validation_split(
    const std::vector<std::string>& groups, std::size_t n, double fraction, std::mt19937_64& rng) {
    std::vector<std::size_t> train, val;
    std::vector<std::string> unique;
    if (groups.size() == n) {
        std::unordered_map<std::string, std::size_t> seen;
        for (const auto& g : groups)
            if (seen.emplace(g, unique.size()).second) unique.push_back(g);
    }
    if (unique.size() >= 2) {
        std::vector<std::size_t> order(unique.size());
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto n_val = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(fraction * static_cast<double>(unique.size()))), 1, unique.size() - 1);
        std::vector<bool> is_val(unique.size(), false);
        for (std::size_t i = 0; i < n_val; ++i) is_val[order[i]] = true;
        std::unordered_map<std::string, bool> lookup;
        for (std::size_t i = 0; i < unique.size(); ++i) lookup[unique[i]] = is_val[i];
        for (std::size_t i = 0; i < n; ++i) (lookup[groups[i]] ? val : train).push_back(i);
    } else {
        std::vector<std::size_t> order(n);
        std::iota(order.begin(), order.end(), 0);
        std::shuffle(order.begin(), order.end(), rng);
        const auto n_val = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n))), 1, n - 1);
        val.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
        train.assign(order.begin() + static_cast<std::ptrdiff_t>(n_val), order.end());
        std::sort(val.begin(), val.end());
        std::sort(train.begin(), train.end());
    }
    return {train, val};
}

template <typename Scalar>
typename MlpModel<Scalar>::Matrix gather(const typename MlpModel<Scalar>::Matrix& x, std::span<const std::size_t> idx) {
    typename MlpModel<Scalar>::Matrix out(x.rows(), static_cast<Eigen::Index>(idx.size()));
    for (std::size_t i = 0; i < idx.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = x.col(static_cast<Eigen::Index>(idx[i]));
    return out;
}

template <typename Scalar>
double mse_on(const MlpModel<Scalar>& m, const TrainingSet<Scalar>& data, const std::vector<std::size_t>& idx) {
    constexpr std::size_t kChunk = 512;
    double total = 0;
    for (std::size_t s = 0; s < idx.size(); s += kChunk) {
        const std::span<const std::size_t> part(idx.data() + s, std::min(kChunk, idx.size() - s));
        auto xn = gather<Scalar>(data.features, part);
        normalize_features(m, xn);
        const auto pred = forward_normalized(m, xn);
        for (std::size_t i = 0; i < part.size(); ++i) {
            const double r = static_cast<double>(pred(static_cast<Eigen::Index>(i))) - data.labels[part[i]];
            total += r * r;
        }
    }
    return total / static_cast<double>(idx.size());
}

} // namespace detail

/// Minibatch training with early stopping on validation MSE. Returns the
/// snapshot with the lowest validation error.
template <typename Scalar, typename Progress = void (*)(const EpochRecord&)>
TrainResult<Scalar> train(MlpModel<Scalar> model, const TrainingSet<Scalar>& data, const TrainConfig& cfg,
                          Progress&& progress = [](const EpochRecord&) {}) {
    cfg.validate();
    const std::size_t n = data.size();
    if (n == 0) throw DataError("empty training set");
    if (static_cast<std::size_t>(data.features.cols()) != n) throw DimensionError("feature and label counts differ");
    if (static_cast<std::size_t>(data.features.rows()) != model.input_dim())
        throw DimensionError("feature dimension does not match model input");
    if (n < 2 * cfg.batch_size)
        throw DataError("training set of " + std::to_string(n) + " examples is smaller than two batches of " +
                        std::to_string(cfg.batch_size) + "; lower the batch size or add data");
    for (Scalar y : data.labels)
        if (!std::isfinite(static_cast<double>(y))) throw DataError("non-finite training label");

    std::mt19937_64 rng(cfg.seed);
    auto [train_idx, val_idx] = detail::validation_split(data.groups, n, cfg.validation_fraction, rng);

    // statistics from the training split only
    const auto d = static_cast<Eigen::Index>(model.input_dim());
    Eigen::VectorXd sum = Eigen::VectorXd::Zero(d), sum_sq = Eigen::VectorXd::Zero(d);
    for (auto i : train_idx) {
        const Eigen::VectorXd c = data.features.col(static_cast<Eigen::Index>(i)).template cast<double>();
        sum += c;
        sum_sq += c.cwiseProduct(c);
    }
    const double count = static_cast<double>(train_idx.size());
    const Eigen::VectorXd mean = sum / count;
    const Eigen::VectorXd var = (sum_sq / count - mean.cwiseProduct(mean)).cwiseMax(0.0);
    model.feature_mean = mean.template cast<Scalar>();
    model.feature_std = var.cwiseSqrt().cwiseMax(cfg.std_floor).template cast<Scalar>();

    TrainResult<Scalar> result;
    result.train_examples = train_idx.size();
    result.validation_examples = val_idx.size();
    result.model = model;
    double best = std::numeric_limits<double>::infinity();
    std::size_t since_best = 0;
    AdamState<Scalar> state(model);

    for (std::size_t epoch = 1; epoch <= cfg.max_epochs; ++epoch) {
        std::shuffle(train_idx.begin(), train_idx.end(), rng);
        double loss_sum = 0;
        for (std::size_t s = 0, b = 0; s < train_idx.size(); s += cfg.batch_size, ++b) {
            const std::span<const std::size_t> part(train_idx.data() + s, std::min(cfg.batch_size, train_idx.size() - s));
            auto xn = detail::gather<Scalar>(data.features, part);
            normalize_features(model, xn);
            std::vector<Scalar> y(part.size());
            for (std::size_t i = 0; i < part.size(); ++i) y[i] = data.labels[part[i]];
            auto [loss, grads] = loss_and_grad_normalized(model, xn, std::span<const Scalar>(y));
            if (!std::isfinite(static_cast<double>(loss)))
                throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " + std::to_string(b));
            loss_sum += static_cast<double>(loss) * static_cast<double>(part.size());
            adam_step(model, state, grads, cfg.adam);
        }
        EpochRecord rec{epoch, loss_sum / count, detail::mse_on(model, data, val_idx)};
        result.history.push_back(rec);
        progress(rec);
        if (rec.val_mse < best) {
            best = rec.val_mse;
            result.best_epoch = epoch;
            result.model = model;
            since_best = 0;
        } else if (++since_best >= cfg.patience) {
            break;
        }
    }
    return result;
}

} // namespace nrsar
