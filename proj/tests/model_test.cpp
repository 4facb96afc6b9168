#include "nrsar/mlp.hpp"
#include "nrsar/model_io.hpp"

#include <cmath>
#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "finite_difference.hpp"

namespace {

using namespace nrsar;
using Md = MlpModel<double>;

TEST(InitMlp, DeterministicAndCounted) {
    const std::vector<std::size_t> dims{5120, 500, 500, 500, 1};
    const auto a = init_mlp<float>(dims, 42);
    const auto b = init_mlp<float>(dims, 42);
    // 5120*500+500 + 2*(500*500+500) + 500+1
    EXPECT_EQ(a.parameter_count(), 3062001u);
    for (std::size_t k = 0; k < a.num_layers(); ++k) {
        EXPECT_TRUE((a.weights[k].array() == b.weights[k].array()).all());
        EXPECT_TRUE((a.biases[k].array() == 0.f).all());
    }
    const auto c = init_mlp<float>(dims, 43);
    EXPECT_FALSE((a.weights[0].array() == c.weights[0].array()).all());
}

TEST(InitMlp, HeScale) {
    const auto m = init_mlp<double>({2000, 300, 1}, 7);
    const double var = m.weights[0].array().square().mean();
    EXPECT_NEAR(var, 2.0 / 2000.0, 0.05 * 2.0 / 2000.0);
}

TEST(Forward, ZeroParametersGiveZero) {
    auto m = init_mlp<double>({6, 4, 1}, 1);
    for (auto& w : m.weights) w.setZero();
    const std::vector<double> x{1, -2, 3, 4, 5, 6};
    EXPECT_EQ(forward(m, std::span<const double>(x)), 0.0);
}

TEST(Forward, SingleAffineLayer) {
    auto m = init_mlp<double>({3, 1}, 1);
    m.weights[0] << 0.5, -1.0, 2.0;
    m.biases[0] << 0.25;
    m.feature_mean << 1, 1, 1;
    m.feature_std << 2, 2, 2;
    const std::vector<double> x{3, 5, 1};  // normalized: 1, 2, 0
    EXPECT_DOUBLE_EQ(forward(m, std::span<const double>(x)), 0.5 * 1 - 1.0 * 2 + 0.25);
}

TEST(Forward, ReluBlocksNegativePreactivations) {
    auto m = init_mlp<double>({2, 2, 1}, 1);
    m.weights[0] << 1, 0, 0, 1;
    m.weights[1] << 1, 1;
    const std::vector<double> x{-3.0, 2.0};
    EXPECT_DOUBLE_EQ(forward(m, std::span<const double>(x)), 2.0);
    // changing the weight fed by the inactive unit has no effect
    m.weights[1](0, 0) = 100.0;
    EXPECT_DOUBLE_EQ(forward(m, std::span<const double>(x)), 2.0);
}

TEST(Forward, Errors) {
    const auto m = init_mlp<double>({3, 1}, 1);
    const std::vector<double> bad{1, 2};
    EXPECT_THROW(forward(m, std::span<const double>(bad)), DimensionError);
    const std::vector<double> nan{1, NAN, 2};
    EXPECT_THROW(forward(m, std::span<const double>(nan)), DataError);
}

TEST(LossAndGrad, ZeroAtExactFit) {
    auto m = init_mlp<double>({4, 3, 1}, 2);
    Md::Matrix x = Md::Matrix::Random(4, 5);
    const auto pred = predict(m, x);
    std::vector<double> y(pred.data(), pred.data() + pred.size());
    const auto [loss, g] = loss_and_grad(m, x, std::span<const double>(y));
    EXPECT_EQ(loss, 0.0);
    for (std::size_t k = 0; k < g.weights.size(); ++k) {
        EXPECT_EQ(g.weights[k].cwiseAbs().maxCoeff(), 0.0);
        EXPECT_EQ(g.biases[k].cwiseAbs().maxCoeff(), 0.0);
    }
}

TEST(LossAndGrad, LinearClosedForm) {
    auto m = init_mlp<double>({3, 1}, 3);
    m.feature_mean << 0.5, 0, 0;
    Md::Matrix x(3, 1);
    x << 1.5, -2, 0.25;
    const std::vector<double> y{0.7};
    const auto [loss, g] = loss_and_grad(m, x, std::span<const double>(y));
    const double pred = predict(m, x)(0);
    EXPECT_NEAR(loss, (pred - 0.7) * (pred - 0.7), 1e-15);
    const Eigen::Vector3d xn(1.0, -2.0, 0.25);
    for (int i = 0; i < 3; ++i) EXPECT_NEAR(g.weights[0](0, i), 2 * (pred - 0.7) * xn(i), 1e-14);
    EXPECT_NEAR(g.biases[0](0), 2 * (pred - 0.7), 1e-14);
}

TEST(LossAndGrad, MatchesCentralDifferences) {
    std::mt19937_64 rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const double err = nrsar::testing::max_gradient_rel_error({7, 5, 3, 1}, 4, rng);
        EXPECT_LE(err, 1e-4) << "trial " << trial;
    }
}

TEST(Adam, FirstStepIsLearningRate) {
    auto m = init_mlp<double>({3, 2, 1}, 5);
    const auto before = m;
    AdamState<double> st(m);
    Gradients<double> g;
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        g.weights.push_back(Md::Matrix::Constant(m.weights[k].rows(), m.weights[k].cols(), k == 0 ? 3.0 : -0.02));
        g.biases.push_back(Md::Vector::Constant(m.biases[k].size(), 40.0));
    }
    AdamParams p;
    p.lr = 1e-3;
    adam_step(m, st, g, p);
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        EXPECT_LT(((m.weights[k] - before.weights[k]).cwiseAbs().array() - 1e-3).abs().maxCoeff(), 1e-8);
        EXPECT_LT(((m.biases[k] - before.biases[k]).cwiseAbs().array() - 1e-3).abs().maxCoeff(), 1e-8);
    }
}

TEST(Adam, ZeroGradientLeavesParameters) {
    auto m = init_mlp<double>({3, 2, 1}, 5);
    const auto before = m;
    AdamState<double> st(m);
    Gradients<double> g;
    for (std::size_t k = 0; k < m.num_layers(); ++k) {
        g.weights.push_back(Md::Matrix::Zero(m.weights[k].rows(), m.weights[k].cols()));
        g.biases.push_back(Md::Vector::Zero(m.biases[k].size()));
    }
    for (int i = 0; i < 20; ++i) adam_step(m, st, g, {});
    for (std::size_t k = 0; k < m.num_layers(); ++k) EXPECT_TRUE((m.weights[k].array() == before.weights[k].array()).all());
}

// Training ------------------------------------------------------------------

TrainingSet<float> synthetic_set(std::size_t n, std::size_t d, std::uint64_t seed, bool linear_label,
                                 std::size_t groups = 10) {
    std::mt19937_64 rng(seed);
    std::normal_distribution<float> g;
    TrainingSet<float> s;
    s.features.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(n));
    for (Eigen::Index i = 0; i < s.features.size(); ++i) s.features.data()[i] = 3.f + 2.f * g(rng);
    for (std::size_t i = 0; i < n; ++i) {
        s.labels.push_back(linear_label ? 2.5f * s.features(1, static_cast<Eigen::Index>(i)) - 4.f : 5.f);
        s.groups.push_back("g" + std::to_string(i % groups));
    }
    return s;
}

TEST(Train, ConstantTarget) {
    const auto data = synthetic_set(3000, 8, 1, false);
    TrainConfig cfg;
    cfg.adam.lr = 3e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 60;
    cfg.patience = 20;
    const auto res = train(init_mlp<float>({8, 16, 16, 1}, 1), data, cfg);
    const auto held = synthetic_set(50, 8, 99, false);
    const auto pred = predict(res.model, held.features);
    for (Eigen::Index i = 0; i < pred.size(); ++i) EXPECT_NEAR(pred(i), 5.0f, 0.1f);
}

TEST(Train, LinearTargetLearnable) {
    const auto data = synthetic_set(2000, 8, 2, true);
    TrainConfig cfg;
    cfg.adam.lr = 1e-2;
    cfg.batch_size = 16;
    cfg.max_epochs = 50;
    cfg.patience = 50;
    const auto res = train(init_mlp<float>({8, 32, 32, 1}, 2), data, cfg);
    double best = 1e9;
    for (const auto& h : res.history) best = std::min(best, h.val_mse);
    EXPECT_LT(best, 1e-2);
    EXPECT_LE(res.history.size(), 50u);
}

TEST(Train, ShuffledLabelsAreNotLearnable) {
    auto data = synthetic_set(1000, 8, 3, true);
    std::mt19937_64 rng(17);
    std::shuffle(data.labels.begin(), data.labels.end(), rng);
    double mean = 0, var = 0;
    for (float y : data.labels) mean += y;
    mean /= static_cast<double>(data.labels.size());
    for (float y : data.labels) var += (y - mean) * (y - mean);
    var /= static_cast<double>(data.labels.size());
    TrainConfig cfg;
    cfg.adam.lr = 3e-3;
    cfg.batch_size = 32;
    cfg.max_epochs = 30;
    const auto res = train(init_mlp<float>({8, 32, 32, 1}, 2), data, cfg);
    double best = 1e9;
    for (const auto& h : res.history) best = std::min(best, h.val_mse);
    EXPECT_GE(best, 0.8 * var);
}

TEST(Train, DeterministicAndTrainSplitStatistics) {
    const auto data = synthetic_set(400, 6, 4, true);
    TrainConfig cfg;
    cfg.batch_size = 16;
    cfg.max_epochs = 5;
    const auto a = train(init_mlp<float>({6, 8, 1}, 9), data, cfg);
    const auto b = train(init_mlp<float>({6, 8, 1}, 9), data, cfg);
    EXPECT_EQ(serialize_model(a.model), serialize_model(b.model));

    // shifting every raw feature by a constant moves the mean but leaves std
    auto shifted = data;
    shifted.features.array() += 10.f;
    const auto c = train(init_mlp<float>({6, 8, 1}, 9), shifted, cfg);
    EXPECT_LT((c.model.feature_mean - a.model.feature_mean).array().abs().maxCoeff() - 10.f, 1e-3f);
    EXPECT_LT((c.model.feature_std - a.model.feature_std).cwiseAbs().maxCoeff(), 1e-3f);
}

TEST(Train, Errors) {
    TrainConfig cfg;
    cfg.batch_size = 8;
    TrainingSet<float> empty;
    empty.features.resize(3, 0);
    EXPECT_THROW(train(init_mlp<float>({3, 1}, 1), empty, cfg), DataError);
    auto small = synthetic_set(10, 3, 1, true);
    EXPECT_THROW(train(init_mlp<float>({3, 1}, 1), small, cfg), DataError);
    auto diverge = synthetic_set(100, 3, 1, true);
    diverge.features.array() *= 1e30f;
    diverge.features(0, 0) = 1e38f;
    cfg.adam.lr = 1e30;
    EXPECT_THROW(train(init_mlp<float>({3, 4, 1}, 1), diverge, cfg), NumericalError);
}

// Weights file ----------------------------------------------------------------

TEST(ModelIo, RoundTripIsBitExact) {
    auto m = init_mlp<float>({12, 7, 3, 1}, 11);
    m.feature_mean.setRandom();
    m.feature_std.setConstant(0.5f);
    m.metadata = R"({"digest":"abc"})";
    const auto path = std::filesystem::temp_directory_path() / "nrsar_model_test.mlpr";
    save_model(m, path);
    const auto back = load_model(path);
    std::filesystem::remove(path);
    EXPECT_EQ(back.dims, m.dims);
    EXPECT_EQ(back.metadata, m.metadata);
    EXPECT_EQ(serialize_model(back), serialize_model(m));
    MlpModel<float>::Matrix x = MlpModel<float>::Matrix::Random(12, 9);
    const auto p1 = predict(m, x), p2 = predict(back, x);
    for (Eigen::Index i = 0; i < p1.size(); ++i) EXPECT_EQ(p1(i), p2(i));
}

TEST(ModelIo, LayoutMatchesFormat) {
    auto m = init_mlp<float>({2, 1}, 1);
    m.weights[0] << 1.0f, 2.0f;
    m.biases[0] << 3.0f;
    m.metadata = "{}";
    const auto bytes = serialize_model(m);
    // magic + version + layers + (rows, cols) + 2 weights + 1 bias + 2 mean + 2 std + len + "{}"
    ASSERT_EQ(bytes.size(), 4u + 4 + 4 + 8 + 8 + 4 + 8 + 8 + 4 + 2);
    EXPECT_EQ(std::string(bytes.begin(), bytes.begin() + 4), "MLPR");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_EQ(bytes[8], 1);
    EXPECT_EQ(bytes[12], 1);  // rows
    EXPECT_EQ(bytes[16], 2);  // cols
    float w1;
    std::memcpy(&w1, bytes.data() + 24, 4);
    EXPECT_EQ(w1, 2.0f);
}

TEST(ModelIo, RejectsCorruption) {
    const auto m = init_mlp<float>({4, 2, 1}, 1);
    auto bytes = serialize_model(m);
    auto bad_magic = bytes;
    bad_magic[0] = 'X';
    EXPECT_THROW(deserialize_model(bad_magic), FormatError);
    auto v2 = bytes;
    v2[4] = 2;
    try {
        deserialize_model(v2);
        FAIL();
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("version 2"), std::string::npos);
    }
    bytes.resize(bytes.size() - 9);
    EXPECT_THROW(deserialize_model(bytes), TruncatedDataError);
}

}  // namespace
