#include <gtest/gtest.h>

#include "helpers.hpp"

using namespace rehab;
using testing_support::path_graph;

TEST(Skeleton, BuiltinFormatsAreTrees) {
    const std::pair<SkeletonFormat, std::pair<std::size_t, int>> expected[] = {
        {SkeletonFormat::kinect_v2, {25, 3}}, {SkeletonFormat::openpose, {25, 2}}, {SkeletonFormat::blazepose, {33, 3}}};
    for (const auto& [f, shape] : expected) {
        const auto g = builtin_graph(f);
        EXPECT_EQ(g.joint_count, shape.first) << to_string(f);
        EXPECT_EQ(g.dimensionality, shape.second) << to_string(f);
        EXPECT_NO_THROW(g.validate());
        EXPECT_TRUE(g.is_tree()) << to_string(f);
        EXPECT_EQ(g.format, f);
    }
    EXPECT_THROW(builtin_graph(SkeletonFormat::custom), ConfigError);
}

TEST(Skeleton, FormatNamesRoundTrip) {
    for (auto f : {SkeletonFormat::kinect_v2, SkeletonFormat::openpose, SkeletonFormat::blazepose, SkeletonFormat::custom})
        EXPECT_EQ(parse_skeleton_format(to_string(f)), f);
    EXPECT_FALSE(parse_skeleton_format("vicon"));
}

TEST(Skeleton, ValidateRejectsBrokenGraphs) {
    auto g = path_graph(3);
    g.edges.emplace_back(0, 3);
    EXPECT_THROW(g.validate(), SchemaError);
    g = path_graph(3);
    g.edges.emplace_back(1, 1);
    EXPECT_THROW(g.validate(), SchemaError);
    g = path_graph(3);
    g.edges.pop_back();
    EXPECT_THROW(g.validate(), SchemaError);
    g = path_graph(3);
    g.dimensionality = 4;
    EXPECT_THROW(g.validate(), SchemaError);
}

TEST(Adjacency, SingleNode) {
    const auto a = build_normalized_adjacency(path_graph(1));
    ASSERT_EQ(a.rows(), 1);
    EXPECT_EQ(a(0, 0), 1.0);
}

TEST(Adjacency, TwoNodePath) {
    const auto a = build_normalized_adjacency(path_graph(2));
    for (int i = 0; i < 2; ++i)
        for (int j = 0; j < 2; ++j) EXPECT_DOUBLE_EQ(a(i, j), 0.5);
}

// Largest |eigenvalue| by power iteration on A^2 (A symmetric, so A^2 is PSD
// and its dominant eigenvalue is rho(A)^2).
static double spectral_radius(const Eigen::MatrixXd& a) {
    const Eigen::MatrixXd a2 = a * a;
    Eigen::VectorXd v = Eigen::VectorXd::LinSpaced(a.rows(), 1.0, 2.0);
    double lambda = 0.0;
    for (int i = 0; i < 5000; ++i) {
        const Eigen::VectorXd w = a2 * v;
        lambda = w.norm() / v.norm();
        v = w.normalized();
    }
    return std::sqrt(lambda);
}

TEST(Adjacency, BuiltinGraphProperties) {
    for (auto f : {SkeletonFormat::kinect_v2, SkeletonFormat::openpose, SkeletonFormat::blazepose}) {
        const auto g = builtin_graph(f);
        const auto a = build_normalized_adjacency(g);
        EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_GE(a.minCoeff(), 0.0);
        EXPECT_LE(a.maxCoeff(), 1.0);
        EXPECT_LE(spectral_radius(a), 1.0 + 1e-9) << to_string(f);

        // Row sums of A + I are degree + 1.
        std::vector<int> degree(g.joint_count, 0);
        for (auto [u, v] : g.edges) ++degree[u], ++degree[v];
        Eigen::MatrixXd raw = Eigen::MatrixXd::Identity(a.rows(), a.cols());
        for (auto [u, v] : g.edges) raw(u, v) = raw(v, u) = 1.0;
        for (std::size_t j = 0; j < g.joint_count; ++j)
            EXPECT_EQ(raw.row(static_cast<Eigen::Index>(j)).sum(), degree[j] + 1);
    }
}

TEST(Adjacency, RandomGraphsStayBounded) {
    Rng rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t n = 2 + rng.below(12);
        auto g = path_graph(n);
        for (int extra = 0; extra < 5; ++extra) {
            const auto u = rng.below(n), v = rng.below(n);
            if (u != v) g.edges.emplace_back(u, v);
        }
        const auto a = build_normalized_adjacency(g);
        EXPECT_LE(spectral_radius(a), 1.0 + 1e-9);
        EXPECT_LT((a - a.transpose()).cwiseAbs().maxCoeff(), 1e-12);
    }
}
