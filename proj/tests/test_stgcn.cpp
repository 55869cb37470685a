#include <gtest/gtest.h>

#include "gradient_check.hpp"
#include "helpers.hpp"
#include "oracles.hpp"

using namespace rehab;
using testing_support::path_graph;
using testing_support::random_sequence;

namespace {

FeatureMap random_features(Rng& rng, std::size_t t, std::size_t j, std::size_t c) {
    FeatureMap x(t, j, c);
    for (Eigen::Index i = 0; i < x.data.size(); ++i) x.data.data()[i] = rng.uniform(-1.0, 1.0);
    return x;
}

TemporalKernel random_kernel(Rng& rng, std::size_t k, std::size_t cin, std::size_t cout) {
    TemporalKernel t;
    t.size = k;
    t.weight = Eigen::MatrixXd::NullaryExpr(static_cast<Eigen::Index>(k * cin), static_cast<Eigen::Index>(cout),
                                            [&] { return rng.uniform(-1.0, 1.0); });
    t.bias = Eigen::MatrixXd::NullaryExpr(1, static_cast<Eigen::Index>(cout), [&] { return rng.uniform(-1.0, 1.0); });
    return t;
}

StgcnConfig tiny_config(std::size_t input_length = 12) {
    StgcnConfig c;
    c.blocks = {{3, 4, 4, 3}, {4, 6, 6, 3}};
    c.lstm_hidden = 5;
    c.epochs = 40;
    c.batch_size = 4;
    c.learning_rate = 1e-2;
    c.input_length = input_length;
    c.seed = 3;
    return c;
}

std::vector<MotionSequence> synthetic_set(std::size_t n_correct, std::size_t n_incorrect, std::size_t length,
                                          std::uint64_t seed = 7) {
    SyntheticSpec spec;
    spec.seed = seed;
    auto raw = generate_dataset(spec, n_correct, n_incorrect, {"ex"});
    for (auto& s : raw) s = preprocess(s, {length, true, true});
    return raw;
}

} // namespace

// ---- primitive layers ------------------------------------------------------------

TEST(SpatialGraphConv, IdentityCase) {
    Rng rng(1);
    const auto x = random_features(rng, 5, 1, 3);
    const auto y = spatial_graph_conv(x, Eigen::MatrixXd::Identity(1, 1), Eigen::MatrixXd::Identity(3, 3));
    EXPECT_EQ(y.data, x.data);
}

TEST(SpatialGraphConv, TwoNodePath) {
    FeatureMap x(1, 2, 1);
    x.data << 2, 4;
    const auto y = spatial_graph_conv(x, build_normalized_adjacency(path_graph(2)), Eigen::MatrixXd::Ones(1, 1));
    EXPECT_DOUBLE_EQ(y.data(0, 0), 3.0);
    EXPECT_DOUBLE_EQ(y.data(1, 0), 3.0);
}

TEST(SpatialGraphConv, ZeroLinearityAndDenseOracle) {
    Rng rng(2);
    const auto adj = build_normalized_adjacency(builtin_graph(SkeletonFormat::openpose));
    const Eigen::MatrixXd w = Eigen::MatrixXd::NullaryExpr(3, 4, [&] { return rng.uniform(-1.0, 1.0); });
    FeatureMap zero(6, 25, 3);
    EXPECT_EQ(spatial_graph_conv(zero, adj, w).data, Eigen::MatrixXd::Zero(6 * 25, 4));

    const auto x = random_features(rng, 6, 25, 3), y = random_features(rng, 6, 25, 3);
    const double a = 1.7, b = -0.3;
    const FeatureMap combo(6, 25, Eigen::MatrixXd(a * x.data + b * y.data));
    const Eigen::MatrixXd lhs = spatial_graph_conv(combo, adj, w).data;
    const Eigen::MatrixXd rhs = a * spatial_graph_conv(x, adj, w).data + b * spatial_graph_conv(y, adj, w).data;
    EXPECT_LT((lhs - rhs).cwiseAbs().maxCoeff(), 1e-6);
    EXPECT_LT((spatial_graph_conv(x, adj, w).data - oracle::graph_conv(x, adj, w)).cwiseAbs().maxCoeff(), 1e-12);

    EXPECT_THROW(spatial_graph_conv(x, Eigen::MatrixXd::Identity(3, 3), w), SchemaError);
    EXPECT_THROW(spatial_graph_conv(x, adj, Eigen::MatrixXd::Identity(2, 2)), SchemaError);
}

TEST(TemporalGatedConv, ZeroGateHalvesInput) {
    Rng rng(3);
    const auto x = random_features(rng, 4, 3, 2);
    TemporalKernel value{1, Eigen::MatrixXd::Identity(2, 2), Eigen::MatrixXd::Zero(1, 2)};
    TemporalKernel gate{1, Eigen::MatrixXd::Zero(2, 2), Eigen::MatrixXd::Zero(1, 2)};
    EXPECT_EQ(temporal_gated_conv(x, value, gate).data, 0.5 * x.data);
    value.weight.setZero();
    gate = random_kernel(rng, 1, 2, 2);
    EXPECT_EQ(temporal_gated_conv(x, value, gate).data, Eigen::MatrixXd::Zero(12, 2));
}

TEST(TemporalGatedConv, MatchesNaiveConvolution) {
    Rng rng(4);
    for (int trial = 0; trial < 10; ++trial) {
        const auto x = random_features(rng, 7, 4, 3);
        const auto v = random_kernel(rng, 3, 3, 5), g = random_kernel(rng, 3, 3, 5);
        const auto y = temporal_gated_conv(x, v, g);
        EXPECT_EQ(y.frames, 5u);
        EXPECT_LT((y.data - oracle::gated_conv(x, v, g)).cwiseAbs().maxCoeff(), 1e-12);
    }
    const auto short_x = random_features(rng, 2, 4, 3);
    EXPECT_THROW(temporal_gated_conv(short_x, random_kernel(rng, 3, 3, 2), random_kernel(rng, 3, 3, 2)), SchemaError);
}

// ---- model -------------------------------------------------------------------------

TEST(StgcnConfig, Validation) {
    StgcnConfig c;
    EXPECT_NO_THROW(c.validate());
    c.blocks[0].temporal_kernel = 4;
    EXPECT_THROW(c.validate(), ConfigError);
    c = StgcnConfig{};
    c.blocks[1].in_channels = 16;
    EXPECT_THROW(c.validate(), ConfigError);
    c = StgcnConfig{};
    c.input_length = 32;
    EXPECT_THROW(c.validate(), ConfigError);
}

TEST(StgcnModel, ForwardRangePurityAndZeroHead) {
    Rng rng(5);
    const auto cfg = tiny_config();
    const auto g = path_graph(4);
    auto params = init_parameters(cfg, 1);
    const StgcnModel model(cfg, g, params);
    for (int i = 0; i < 20; ++i) {
        auto s = random_sequence(rng, g, cfg.input_length);
        for (auto& v : s.coords) v *= 10.0;
        const double p = model.forward(s);
        EXPECT_GT(p, 0.0);
        EXPECT_LT(p, 1.0);
        EXPECT_EQ(p, model.forward(s));
    }
    params.head_weight.setZero();
    params.head_bias.setZero();
    const StgcnModel zero(cfg, g, params);
    const auto s = random_sequence(rng, g, cfg.input_length);
    EXPECT_EQ(zero.forward(s), 0.5);
    EXPECT_EQ(zero.predict(s), Label::correct);
}

TEST(StgcnModel, InputChecks) {
    Rng rng(6);
    const auto cfg = tiny_config();
    const StgcnModel model(cfg, path_graph(4), init_parameters(cfg, 1));
    EXPECT_THROW(model.forward(random_sequence(rng, path_graph(5), cfg.input_length)), SchemaError);
    EXPECT_THROW(model.forward(random_sequence(rng, path_graph(4), cfg.input_length + 1)), SchemaError);
    auto other = path_graph(4);
    other.format = SkeletonFormat::kinect_v2;
    EXPECT_THROW(StgcnModel(cfg, path_graph(2, 2), init_parameters(cfg, 1)), ConfigError);
}

TEST(StgcnModel, GradientCheckTinyModel) {
    // 2 joints, 1 block, 4 frames: two temporal convolutions leave room for
    // kernel size 1 only.
    Rng rng(7);
    StgcnConfig cfg;
    cfg.blocks = {{3, 3, 2, 1}};
    cfg.lstm_hidden = 3;
    cfg.input_length = 4;
    const auto g = path_graph(2);
    const StgcnModel model(cfg, g, testing_support::random_parameters(cfg, rng));
    std::vector<MotionSequence> batch;
    for (int i = 0; i < 3; ++i) batch.push_back(random_sequence(rng, g, 4));
    const std::vector<Label> labels{Label::correct, Label::incorrect, Label::correct};
    const auto r = testing_support::check_gradients(model, batch, labels);
    EXPECT_EQ(r.checked, model.parameters().scalar_count());
    EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(StgcnModel, GradientCheckWiderKernelsAndTwoBlocks) {
    Rng rng(8);
    StgcnConfig cfg;
    cfg.blocks = {{2, 3, 3, 3}, {3, 2, 2, 1}};
    cfg.lstm_hidden = 2;
    cfg.input_length = 7;
    const auto g = path_graph(3, 2);
    const StgcnModel model(cfg, g, testing_support::random_parameters(cfg, rng));
    std::vector<MotionSequence> batch{random_sequence(rng, g, 7), random_sequence(rng, g, 7)};
    const std::vector<Label> labels{Label::incorrect, Label::correct};
    const auto r = testing_support::check_gradients(model, batch, labels);
    EXPECT_LT(r.max_relative_error, 1e-4) << r.worst_parameter;
}

TEST(StgcnModel, JointPermutationEquivariance) {
    Rng rng(9);
    const auto cfg = tiny_config();
    const auto g = builtin_graph(SkeletonFormat::kinect_v2);
    const auto params = init_parameters(cfg, 4);
    const StgcnModel model(cfg, g, params);

    std::vector<std::size_t> perm(g.joint_count);
    std::iota(perm.begin(), perm.end(), 0u);
    rng.shuffle(perm); // new index of old joint j is perm[j]
    SkeletonGraph pg = g;
    for (auto& [a, b] : pg.edges) a = perm[a], b = perm[b];
    for (std::size_t j = 0; j < g.joint_count; ++j) pg.joint_names[perm[j]] = g.joint_names[j];
    pg.root_joint = perm[g.root_joint];
    for (auto& j : pg.torso_lower) j = perm[j];
    for (auto& j : pg.torso_upper) j = perm[j];
    const StgcnModel permuted(cfg, pg, params);

    for (int trial = 0; trial < 5; ++trial) {
        const auto s = random_sequence(rng, g, cfg.input_length);
        MotionSequence ps = s;
        ps.graph = pg;
        for (std::size_t t = 0; t < s.frame_count; ++t)
            for (std::size_t j = 0; j < g.joint_count; ++j)
                for (std::size_t d = 0; d < 3; ++d) ps.at(t, perm[j], d) = s.at(t, j, d);
        EXPECT_NEAR(model.forward(s), permuted.forward(ps), 1e-6);
    }
}

TEST(StgcnTraining, OverfitsSmallSetDeterministically) {
    const auto data = synthetic_set(6, 6, 12);
    const auto cfg = tiny_config();
    const auto model = train_stgcn(cfg, data.front().graph, data);
    ASSERT_EQ(model.training_history().size(), cfg.epochs);
    EXPECT_EQ(model.training_history().back().accuracy, 1.0);
    for (const auto& s : data) EXPECT_EQ(model.predict(s), *s.label);
    const auto again = train_stgcn(cfg, data.front().graph, data);
    EXPECT_EQ(again.training_history(), model.training_history());
}

TEST(StgcnTraining, FinalLossBelowFirstOnRandomDatasets) {
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
        const auto data = synthetic_set(4, 4, 12, seed);
        auto cfg = tiny_config();
        cfg.epochs = 15;
        cfg.seed = seed;
        const auto model = train_stgcn(cfg, data.front().graph, data);
        EXPECT_LE(model.training_history().back().loss, model.training_history().front().loss) << "seed " << seed;
    }
}

TEST(StgcnTraining, RequiresBothClasses) {
    const auto data = synthetic_set(4, 0, 12);
    EXPECT_THROW(train_stgcn(tiny_config(), data.front().graph, data), ConfigError);
}

TEST(StgcnPersistence, RoundTripReproducesOutputs) {
    const auto data = synthetic_set(4, 4, 12);
    auto cfg = tiny_config();
    cfg.epochs = 3;
    const auto model = train_stgcn(cfg, data.front().graph, data);
    const auto back = stgcn_from_json(json::parse(stgcn_to_json(model).dump()));
    EXPECT_EQ(back.config(), model.config());
    EXPECT_EQ(back.graph(), model.graph());
    EXPECT_EQ(back.training_history(), model.training_history());
    for (const auto& s : data) {
        EXPECT_NEAR(back.forward(s), model.forward(s), 1e-6);
        EXPECT_EQ(back.predict(s), model.predict(s));
    }
}
