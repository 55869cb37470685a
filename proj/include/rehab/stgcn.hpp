#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "rehab/error.hpp"
#include "rehab/motion.hpp"
#include "rehab/rng.hpp"
#include "rehab/sequence_io.hpp"
#include "rehab/skeleton.hpp"

namespace rehab {

// ---- configuration -----------------------------------------------------------

/// One ST-Conv block: gated temporal conv (in -> spatial), graph conv
/// (spatial -> spatial) with ReLU, gated temporal conv (spatial -> out).
struct BlockSpec {
    std::size_t in_channels = 3;
    std::size_t spatial_channels = 32;
    std::size_t out_channels = 32;
    std::size_t temporal_kernel = 9;

    bool operator==(const BlockSpec&) const = default;
};

struct StgcnConfig {
    std::vector<BlockSpec> blocks{{3, 32, 32, 9}, {32, 64, 64, 9}};
    std::size_t lstm_hidden = 64;
    std::size_t epochs = 250;
    std::size_t batch_size = 8;
    double learning_rate = 1e-3;
    std::uint64_t seed = 0;
    std::size_t input_length = 100;

    bool operator==(const StgcnConfig&) const = default;

    /// Frames left after every block has consumed 2 * (kernel - 1).
    std::size_t output_length() const {
        std::size_t t = input_length;
        for (const auto& b : blocks) {
            const std::size_t shrink = 2 * (b.temporal_kernel - 1);
            t = t > shrink ? t - shrink : 0;
        }
        return t;
    }

    void validate() const {
        if (blocks.empty()) throw ConfigError("STGCN needs at least one ST-Conv block");
        for (std::size_t i = 0; i < blocks.size(); ++i) {
            const auto& b = blocks[i];
            const std::string where = "block " + std::to_string(i);
            if (b.temporal_kernel == 0 || b.temporal_kernel % 2 == 0)
                throw ConfigError(where + ": temporal kernel must be odd and >= 1");
            if (b.in_channels == 0 || b.spatial_channels == 0 || b.out_channels == 0)
                throw ConfigError(where + ": channel counts must be positive");
            if (i > 0 && b.in_channels != blocks[i - 1].out_channels)
                throw ConfigError(where + ": in_channels does not match the previous block's out_channels");
        }
        if (lstm_hidden == 0) throw ConfigError("lstm_hidden must be positive");
        if (epochs == 0) throw ConfigError("epochs must be positive");
        if (batch_size == 0) throw ConfigError("batch_size must be positive");
        if (!(learning_rate > 0.0)) throw ConfigError("learning_rate must be positive");
        if (output_length() < 1)
            throw ConfigError("input_length " + std::to_string(input_length) + " does not survive the temporal kernels");
    }
};

// ---- tensors and primitive layers -------------------------------------------

/// T x J x C features stored as a (T*J) x C matrix, row t*J + j.
struct FeatureMap {
    std::size_t frames = 0;
    std::size_t joints = 0;
    Eigen::MatrixXd data;

    FeatureMap() = default;
    FeatureMap(std::size_t t, std::size_t j, std::size_t c)
        : frames(t), joints(j), data(Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(t * j), static_cast<Eigen::Index>(c))) {}
    FeatureMap(std::size_t t, std::size_t j, Eigen::MatrixXd d) : frames(t), joints(j), data(std::move(d)) {}

    std::size_t channels() const { return static_cast<std::size_t>(data.cols()); }

    /// Rows of frames [t, t + count).
    auto frame_rows(std::size_t t, std::size_t count) {
        return data.middleRows(static_cast<Eigen::Index>(t * joints), static_cast<Eigen::Index>(count * joints));
    }
    auto frame_rows(std::size_t t, std::size_t count) const {
        return data.middleRows(static_cast<Eigen::Index>(t * joints), static_cast<Eigen::Index>(count * joints));
    }
};

inline FeatureMap to_feature_map(const MotionSequence& s) {
    using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
    const auto rows = static_cast<Eigen::Index>(s.frame_count * s.joint_count());
    return {s.frame_count, s.joint_count(),
            Eigen::MatrixXd(Eigen::Map<const RowMajor>(s.coords.data(), rows, static_cast<Eigen::Index>(s.dims())))};
}

/// 1-D convolution along time, shared across joints. `weight` stacks the
/// taps: rows [tau * C_in, (tau + 1) * C_in) hold the C_in x C_out map for
/// offset tau. `bias` is 1 x C_out.
struct TemporalKernel {
    std::size_t size = 1;
    Eigen::MatrixXd weight;
    Eigen::MatrixXd bias;

    std::size_t in_channels() const { return static_cast<std::size_t>(weight.rows()) / size; }
    std::size_t out_channels() const { return static_cast<std::size_t>(weight.cols()); }
    auto tap(std::size_t tau) const {
        return weight.middleRows(static_cast<Eigen::Index>(tau * in_channels()), static_cast<Eigen::Index>(in_channels()));
    }
};

namespace detail {

inline void check_temporal(const FeatureMap& x, const TemporalKernel& k) {
    if (k.size == 0 || k.weight.rows() != static_cast<Eigen::Index>(k.size * x.channels()))
        throw SchemaError("temporal kernel expects " + std::to_string(k.size == 0 ? 0 : k.in_channels()) +
                          " input channels, features have " + std::to_string(x.channels()));
    if (k.bias.rows() != 1 || k.bias.cols() != k.weight.cols()) throw SchemaError("temporal kernel bias has wrong shape");
    if (x.frames < k.size)
        throw SchemaError("sequence of " + std::to_string(x.frames) + " frames is shorter than the temporal kernel (" +
                          std::to_string(k.size) + ")");
}

/// Valid (unpadded) convolution: ((T - k + 1) * J) x C_out pre-activation.
inline Eigen::MatrixXd temporal_conv(const FeatureMap& x, const TemporalKernel& k) {
    check_temporal(x, k);
    const std::size_t out_frames = x.frames - k.size + 1;
    Eigen::MatrixXd out = k.bias.replicate(static_cast<Eigen::Index>(out_frames * x.joints), 1);
    for (std::size_t tau = 0; tau < k.size; ++tau) out.noalias() += x.frame_rows(tau, out_frames) * k.tap(tau);
    return out;
}

/// Accumulates dL/dx into d_x and dL/dkernel into grad, given dL/dpre.
inline void temporal_conv_backward(const FeatureMap& x, const TemporalKernel& k, const Eigen::MatrixXd& d_pre,
                                   Eigen::MatrixXd& d_x, TemporalKernel& grad) {
    const std::size_t out_frames = x.frames - k.size + 1;
    const auto cin = static_cast<Eigen::Index>(k.in_channels());
    for (std::size_t tau = 0; tau < k.size; ++tau) {
        const auto rows = x.frame_rows(tau, out_frames);
        grad.weight.middleRows(static_cast<Eigen::Index>(tau) * cin, cin).noalias() += rows.transpose() * d_pre;
        d_x.middleRows(static_cast<Eigen::Index>(tau * x.joints), static_cast<Eigen::Index>(out_frames * x.joints))
            .noalias() += d_pre * k.tap(tau).transpose();
    }
    grad.bias += d_pre.colwise().sum();
}

inline Eigen::MatrixXd sigmoid(const Eigen::MatrixXd& m) {
    return m.unaryExpr([](double v) {
        if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
}

inline double sigmoid(double v) {
    if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
    const double e = std::exp(v);
    return e / (1.0 + e);
}

/// log(1 + exp(v)) without overflow.
inline double softplus(double v) { return v > 0.0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

} // namespace detail

/// Gated linear unit over time: (x * W1 + b1) . sigmoid(x * W2 + b2).
inline FeatureMap temporal_gated_conv(const FeatureMap& x, const TemporalKernel& value, const TemporalKernel& gate) {
    if (value.size != gate.size || value.out_channels() != gate.out_channels())
        throw SchemaError("value and gate kernels differ in shape");
    const Eigen::MatrixXd v = detail::temporal_conv(x, value);
    const Eigen::MatrixXd g = detail::sigmoid(detail::temporal_conv(x, gate));
    return {x.frames - value.size + 1, x.joints, v.cwiseProduct(g)};
}

/// Per frame: A_hat * X_t * W. Linear; the block applies the activation.
inline FeatureMap spatial_graph_conv(const FeatureMap& x, const Eigen::MatrixXd& adjacency, const Eigen::MatrixXd& weight) {
    const auto j = static_cast<Eigen::Index>(x.joints);
    if (adjacency.rows() != j || adjacency.cols() != j)
        throw SchemaError("adjacency is " + std::to_string(adjacency.rows()) + "x" + std::to_string(adjacency.cols()) +
                          " but features have " + std::to_string(x.joints) + " joints");
    if (weight.rows() != static_cast<Eigen::Index>(x.channels()))
        throw SchemaError("graph conv weight expects " + std::to_string(weight.rows()) + " input channels, features have " +
                          std::to_string(x.channels()));
    const Eigen::MatrixXd mixed = x.data * weight;
    FeatureMap out(x.frames, x.joints, static_cast<std::size_t>(weight.cols()));
    for (std::size_t t = 0; t < x.frames; ++t)
        out.frame_rows(t, 1).noalias() = adjacency * mixed.middleRows(static_cast<Eigen::Index>(t) * j, j);
    return out;
}

// ---- parameters ----------------------------------------------------------------

struct BlockParameters {
    TemporalKernel temporal1_value, temporal1_gate;
    Eigen::MatrixXd spatial_weight;
    TemporalKernel temporal2_value, temporal2_gate;
};

struct StgcnParameters {
    std::vector<BlockParameters> blocks;
    Eigen::MatrixXd lstm_input;     // C x 4H, gate order i, f, g, o
    Eigen::MatrixXd lstm_recurrent; // H x 4H
    Eigen::MatrixXd lstm_bias;      // 1 x 4H
    Eigen::MatrixXd head_weight;    // 1 x H
    Eigen::MatrixXd head_bias;      // 1 x 1

    /// Visits every tensor with a stable name, in a fixed order.
    template <typename Self, typename Fn>
    static void visit(Self& self, Fn&& fn) {
        for (std::size_t b = 0; b < self.blocks.size(); ++b) {
            auto& blk = self.blocks[b];
            const std::string p = "block" + std::to_string(b) + ".";
            fn(p + "temporal1.value.weight", blk.temporal1_value.weight);
            fn(p + "temporal1.value.bias", blk.temporal1_value.bias);
            fn(p + "temporal1.gate.weight", blk.temporal1_gate.weight);
            fn(p + "temporal1.gate.bias", blk.temporal1_gate.bias);
            fn(p + "spatial.weight", blk.spatial_weight);
            fn(p + "temporal2.value.weight", blk.temporal2_value.weight);
            fn(p + "temporal2.value.bias", blk.temporal2_value.bias);
            fn(p + "temporal2.gate.weight", blk.temporal2_gate.weight);
            fn(p + "temporal2.gate.bias", blk.temporal2_gate.bias);
        }
        fn(std::string("lstm.input_weight"), self.lstm_input);
        fn(std::string("lstm.recurrent_weight"), self.lstm_recurrent);
        fn(std::string("lstm.bias"), self.lstm_bias);
        fn(std::string("head.weight"), self.head_weight);
        fn(std::string("head.bias"), self.head_bias);
    }

    template <typename Fn>
    void for_each(Fn&& fn) {
        visit(*this, std::forward<Fn>(fn));
    }
    template <typename Fn>
    void for_each(Fn&& fn) const {
        visit(*this, std::forward<Fn>(fn));
    }

    /// Same shapes, all zeros.
    StgcnParameters zeros_like() const {
        StgcnParameters z = *this;
        z.for_each([](const std::string&, Eigen::MatrixXd& m) { m.setZero(); });
        return z;
    }

    std::size_t scalar_count() const {
        std::size_t n = 0;
        for_each([&](const std::string&, const Eigen::MatrixXd& m) { n += static_cast<std::size_t>(m.size()); });
        return n;
    }
};

namespace detail {

inline Eigen::MatrixXd glorot(Rng& rng, std::size_t rows, std::size_t cols, double fan_in, double fan_out) {
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    Eigen::MatrixXd m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = rng.uniform(-limit, limit);
    return m;
}

inline TemporalKernel init_temporal(Rng& rng, std::size_t k, std::size_t cin, std::size_t cout) {
    TemporalKernel t;
    t.size = k;
    t.weight = glorot(rng, k * cin, cout, static_cast<double>(k * cin), static_cast<double>(cout));
    t.bias = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(cout));
    return t;
}

} // namespace detail

/// Glorot-uniform weights, zero biases, LSTM forget-gate bias 1.
inline StgcnParameters init_parameters(const StgcnConfig& cfg, std::uint64_t seed) {
    Rng rng(derive_seed(seed, "stgcn-init"));
    StgcnParameters p;
    for (const auto& b : cfg.blocks) {
        BlockParameters bp;
        bp.temporal1_value = detail::init_temporal(rng, b.temporal_kernel, b.in_channels, b.spatial_channels);
        bp.temporal1_gate = detail::init_temporal(rng, b.temporal_kernel, b.in_channels, b.spatial_channels);
        bp.spatial_weight = detail::glorot(rng, b.spatial_channels, b.spatial_channels,
                                           static_cast<double>(b.spatial_channels), static_cast<double>(b.spatial_channels));
        bp.temporal2_value = detail::init_temporal(rng, b.temporal_kernel, b.spatial_channels, b.out_channels);
        bp.temporal2_gate = detail::init_temporal(rng, b.temporal_kernel, b.spatial_channels, b.out_channels);
        p.blocks.push_back(std::move(bp));
    }
    const std::size_t c = cfg.blocks.back().out_channels;
    const std::size_t h = cfg.lstm_hidden;
    p.lstm_input = detail::glorot(rng, c, 4 * h, static_cast<double>(c), static_cast<double>(h));
    p.lstm_recurrent = detail::glorot(rng, h, 4 * h, static_cast<double>(h), static_cast<double>(h));
    p.lstm_bias = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(4 * h));
    p.lstm_bias.middleCols(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)).setOnes();
    p.head_weight = detail::glorot(rng, 1, h, static_cast<double>(h), 1.0);
    p.head_bias = Eigen::MatrixXd::Zero(1, 1);
    return p;
}

// ---- model -----------------------------------------------------------------------

struct EpochRecord {
    std::size_t epoch = 0;
    double loss = 0.0;
    double accuracy = 0.0;

    bool operator==(const EpochRecord&) const = default;
};

class StgcnModel;

namespace detail {

struct BlockCache {
    FeatureMap input;
    Eigen::MatrixXd value1, gate1; // gate holds sigmoid outputs
    FeatureMap out1;
    Eigen::MatrixXd spatial_pre; // before ReLU
    FeatureMap out2;
    Eigen::MatrixXd value2, gate2;
};

struct ForwardCache {
    std::vector<BlockCache> blocks;
    FeatureMap features; // output of the last block
    Eigen::MatrixXd pooled; // T'' x C
    // LSTM per step (row t): gate activations and states; h/c row t+1 is
    // the state after step t, row 0 is the zero initial state.
    Eigen::MatrixXd gi, gf, gg, go, cell, hidden;
    double logit = 0.0;
};

} // namespace detail

/// Spatio-temporal graph convolutional classifier bound to one skeleton.
/// Immutable; inference is safe from several threads.
class StgcnModel {
public:
    StgcnModel() = default;

    StgcnModel(StgcnConfig config, SkeletonGraph graph, StgcnParameters params, std::vector<EpochRecord> history = {})
        : config_(std::move(config)), graph_(std::move(graph)), params_(std::move(params)), history_(std::move(history)) {
        config_.validate();
        graph_.validate();
        if (config_.blocks.front().in_channels != static_cast<std::size_t>(graph_.dimensionality))
            throw ConfigError("first block expects " + std::to_string(config_.blocks.front().in_channels) +
                              " input channels but the skeleton is " + std::to_string(graph_.dimensionality) + "-D");
        check_shapes();
        adjacency_ = build_normalized_adjacency(graph_);
    }

    const StgcnConfig& config() const { return config_; }
    const SkeletonGraph& graph() const { return graph_; }
    const Eigen::MatrixXd& normalized_adjacency() const { return adjacency_; }
    const StgcnParameters& parameters() const { return params_; }
    const std::vector<EpochRecord>& training_history() const { return history_; }

    /// Probability that the sequence is a correct execution.
    double forward(const MotionSequence& s) const { return detail::sigmoid(logit(s)); }

    double logit(const MotionSequence& s) const {
        check_input(s);
        return run(to_feature_map(s)).logit;
    }

    Label predict(const MotionSequence& s) const { return forward(s) >= 0.5 ? Label::correct : Label::incorrect; }

    /// Mean binary cross-entropy over the batch; when `grad` is non-null it
    /// receives the gradient of that mean (it must be shaped like the
    /// parameters and is overwritten).
    double loss(std::span<const MotionSequence> batch, std::span<const Label> labels, StgcnParameters* grad,
                std::size_t* correct_predictions = nullptr) const {
        std::vector<FeatureMap> features;
        features.reserve(batch.size());
        for (const auto& s : batch) {
            check_input(s);
            features.push_back(to_feature_map(s));
        }
        std::vector<const FeatureMap*> ptrs;
        for (const auto& f : features) ptrs.push_back(&f);
        return loss(std::span<const FeatureMap* const>(ptrs), labels, grad, correct_predictions);
    }

    /// Same as above on already-converted inputs (shape checks are the
    /// caller's job).
    double loss(std::span<const FeatureMap* const> batch, std::span<const Label> labels, StgcnParameters* grad,
                std::size_t* correct_predictions = nullptr) const {
        if (batch.size() != labels.size() || batch.empty()) throw UsageError("batch and labels differ in size");
        if (grad) *grad = params_.zeros_like();
        const double scale = 1.0 / static_cast<double>(batch.size());
        double total = 0.0;
        for (std::size_t i = 0; i < batch.size(); ++i) {
            const auto cache = run(*batch[i]);
            const double y = labels[i] == Label::correct ? 1.0 : 0.0;
            total += detail::softplus(cache.logit) - y * cache.logit;
            if (correct_predictions && ((cache.logit >= 0.0) == (y == 1.0))) ++*correct_predictions;
            if (grad) backward(cache, (detail::sigmoid(cache.logit) - y) * scale, *grad);
        }
        return total * scale;
    }

    void check_input(const MotionSequence& s) const {
        if (s.joint_count() != graph_.joint_count || s.dims() != static_cast<std::size_t>(graph_.dimensionality))
            throw SchemaError("sequence has " + std::to_string(s.joint_count()) + " joints x " + std::to_string(s.dims()) +
                              "-D but the model expects " + std::to_string(graph_.joint_count) + " x " +
                              std::to_string(graph_.dimensionality) + "-D");
        if (s.format() != graph_.format)
            throw SchemaError("sequence format '" + std::string(to_string(s.format())) + "' does not match model format '" +
                              std::string(to_string(graph_.format)) + "'");
        if (s.frame_count != config_.input_length)
            throw SchemaError("sequence has " + std::to_string(s.frame_count) + " frames, model input_length is " +
                              std::to_string(config_.input_length));
    }

private:
    void check_shapes() const {
        if (params_.blocks.size() != config_.blocks.size()) throw SchemaError("parameter block count does not match config");
        auto expect = [](const Eigen::MatrixXd& m, std::size_t r, std::size_t c, const std::string& what) {
            if (m.rows() != static_cast<Eigen::Index>(r) || m.cols() != static_cast<Eigen::Index>(c))
                throw SchemaError("parameter " + what + " has shape " + std::to_string(m.rows()) + "x" +
                                  std::to_string(m.cols()) + ", expected " + std::to_string(r) + "x" + std::to_string(c));
        };
        for (std::size_t i = 0; i < config_.blocks.size(); ++i) {
            const auto& b = config_.blocks[i];
            const auto& p = params_.blocks[i];
            const std::string n = "block" + std::to_string(i);
            for (const auto* k : {&p.temporal1_value, &p.temporal1_gate}) {
                if (k->size != b.temporal_kernel) throw SchemaError(n + " temporal1 kernel size mismatch");
                expect(k->weight, b.temporal_kernel * b.in_channels, b.spatial_channels, n + ".temporal1.weight");
                expect(k->bias, 1, b.spatial_channels, n + ".temporal1.bias");
            }
            expect(p.spatial_weight, b.spatial_channels, b.spatial_channels, n + ".spatial.weight");
            for (const auto* k : {&p.temporal2_value, &p.temporal2_gate}) {
                if (k->size != b.temporal_kernel) throw SchemaError(n + " temporal2 kernel size mismatch");
                expect(k->weight, b.temporal_kernel * b.spatial_channels, b.out_channels, n + ".temporal2.weight");
                expect(k->bias, 1, b.out_channels, n + ".temporal2.bias");
            }
        }
        const std::size_t c = config_.blocks.back().out_channels;
        const std::size_t h = config_.lstm_hidden;
        expect(params_.lstm_input, c, 4 * h, "lstm.input_weight");
        expect(params_.lstm_recurrent, h, 4 * h, "lstm.recurrent_weight");
        expect(params_.lstm_bias, 1, 4 * h, "lstm.bias");
        expect(params_.head_weight, 1, h, "head.weight");
        expect(params_.head_bias, 1, 1, "head.bias");
    }

    detail::ForwardCache run(const FeatureMap& input) const {
        FeatureMap x = input;
        detail::ForwardCache cache;
        for (const auto& p : params_.blocks) {
            detail::BlockCache bc;
            bc.input = std::move(x);
            bc.value1 = detail::temporal_conv(bc.input, p.temporal1_value);
            bc.gate1 = detail::sigmoid(detail::temporal_conv(bc.input, p.temporal1_gate));
            bc.out1 = FeatureMap(bc.input.frames - p.temporal1_value.size + 1, bc.input.joints, bc.value1.cwiseProduct(bc.gate1));
            bc.spatial_pre = spatial_graph_conv(bc.out1, adjacency_, p.spatial_weight).data;
            bc.out2 = FeatureMap(bc.out1.frames, bc.out1.joints, bc.spatial_pre.cwiseMax(0.0));
            bc.value2 = detail::temporal_conv(bc.out2, p.temporal2_value);
            bc.gate2 = detail::sigmoid(detail::temporal_conv(bc.out2, p.temporal2_gate));
            x = FeatureMap(bc.out2.frames - p.temporal2_value.size + 1, bc.out2.joints, bc.value2.cwiseProduct(bc.gate2));
            cache.blocks.push_back(std::move(bc));
        }
        cache.features = std::move(x);

        const auto frames = static_cast<Eigen::Index>(cache.features.frames);
        const auto joints = static_cast<Eigen::Index>(cache.features.joints);
        cache.pooled.resize(frames, cache.features.data.cols());
        for (Eigen::Index t = 0; t < frames; ++t)
            cache.pooled.row(t) = cache.features.data.middleRows(t * joints, joints).colwise().mean();

        const auto h = static_cast<Eigen::Index>(config_.lstm_hidden);
        cache.gi.resize(frames, h);
        cache.gf.resize(frames, h);
        cache.gg.resize(frames, h);
        cache.go.resize(frames, h);
        cache.cell = Eigen::MatrixXd::Zero(frames + 1, h);
        cache.hidden = Eigen::MatrixXd::Zero(frames + 1, h);
        for (Eigen::Index t = 0; t < frames; ++t) {
            const Eigen::RowVectorXd a =
                cache.pooled.row(t) * params_.lstm_input + cache.hidden.row(t) * params_.lstm_recurrent + params_.lstm_bias;
            cache.gi.row(t) = detail::sigmoid(a.leftCols(h));
            cache.gf.row(t) = detail::sigmoid(a.middleCols(h, h));
            cache.gg.row(t) = a.middleCols(2 * h, h).array().tanh().matrix();
            cache.go.row(t) = detail::sigmoid(a.rightCols(h));
            cache.cell.row(t + 1) = cache.gf.row(t).cwiseProduct(cache.cell.row(t)) + cache.gi.row(t).cwiseProduct(cache.gg.row(t));
            cache.hidden.row(t + 1) = cache.go.row(t).cwiseProduct(cache.cell.row(t + 1).array().tanh().matrix());
        }
        cache.logit = (cache.hidden.row(frames) * params_.head_weight.transpose())(0, 0) + params_.head_bias(0, 0);
        return cache;
    }

    void backward(const detail::ForwardCache& cache, double d_logit, StgcnParameters& grad) const {
        const auto frames = static_cast<Eigen::Index>(cache.features.frames);
        const auto joints = static_cast<Eigen::Index>(cache.features.joints);
        const auto h = static_cast<Eigen::Index>(config_.lstm_hidden);

        grad.head_weight += d_logit * cache.hidden.row(frames);
        grad.head_bias(0, 0) += d_logit;

        Eigen::RowVectorXd dh = d_logit * params_.head_weight;
        Eigen::RowVectorXd dc = Eigen::RowVectorXd::Zero(h);
        Eigen::MatrixXd d_pooled(frames, cache.pooled.cols());
        Eigen::RowVectorXd da(4 * h);
        for (Eigen::Index t = frames - 1; t >= 0; --t) {
            const Eigen::RowVectorXd tc = cache.cell.row(t + 1).array().tanh().matrix();
            const auto& i = cache.gi.row(t);
            const auto& f = cache.gf.row(t);
            const auto& g = cache.gg.row(t);
            const auto& o = cache.go.row(t);
            const Eigen::RowVectorXd d_o = dh.cwiseProduct(tc);
            dc += dh.cwiseProduct(o).cwiseProduct((1.0 - tc.array().square()).matrix());
            da.leftCols(h) = dc.cwiseProduct(g).cwiseProduct(i).cwiseProduct((1.0 - i.array()).matrix());
            da.middleCols(h, h) = dc.cwiseProduct(cache.cell.row(t)).cwiseProduct(f).cwiseProduct((1.0 - f.array()).matrix());
            da.middleCols(2 * h, h) = dc.cwiseProduct(i).cwiseProduct((1.0 - g.array().square()).matrix());
            da.rightCols(h) = d_o.cwiseProduct(o).cwiseProduct((1.0 - o.array()).matrix());
            grad.lstm_input.noalias() += cache.pooled.row(t).transpose() * da;
            grad.lstm_recurrent.noalias() += cache.hidden.row(t).transpose() * da;
            grad.lstm_bias += da;
            d_pooled.row(t).noalias() = da * params_.lstm_input.transpose();
            dh.noalias() = da * params_.lstm_recurrent.transpose();
            dc = dc.cwiseProduct(f);
        }

        Eigen::MatrixXd d_x(cache.features.data.rows(), cache.features.data.cols());
        for (Eigen::Index t = 0; t < frames; ++t)
            d_x.middleRows(t * joints, joints) = (d_pooled.row(t) / static_cast<double>(joints)).replicate(joints, 1);

        for (std::size_t b = params_.blocks.size(); b-- > 0;) {
            const auto& p = params_.blocks[b];
            const auto& bc = cache.blocks[b];
            auto& g = grad.blocks[b];

            // second gated temporal conv
            Eigen::MatrixXd d_out2 = Eigen::MatrixXd::Zero(bc.out2.data.rows(), bc.out2.data.cols());
            {
                const Eigen::MatrixXd d_value = d_x.cwiseProduct(bc.gate2);
                const Eigen::MatrixXd d_gate = d_x.cwiseProduct(bc.value2)
                                                   .cwiseProduct(bc.gate2)
                                                   .cwiseProduct((1.0 - bc.gate2.array()).matrix());
                detail::temporal_conv_backward(bc.out2, p.temporal2_value, d_value, d_out2, g.temporal2_value);
                detail::temporal_conv_backward(bc.out2, p.temporal2_gate, d_gate, d_out2, g.temporal2_gate);
            }

            // ReLU and graph convolution
            const Eigen::MatrixXd d_pre = d_out2.cwiseProduct((bc.spatial_pre.array() > 0.0).cast<double>().matrix());
            const auto j = static_cast<Eigen::Index>(bc.out1.joints);
            Eigen::MatrixXd d_mixed(d_pre.rows(), d_pre.cols());
            for (std::size_t t = 0; t < bc.out1.frames; ++t) {
                const auto r = static_cast<Eigen::Index>(t) * j;
                d_mixed.middleRows(r, j).noalias() = adjacency_.transpose() * d_pre.middleRows(r, j);
            }
            g.spatial_weight.noalias() += bc.out1.data.transpose() * d_mixed;
            const Eigen::MatrixXd d_out1 = d_mixed * p.spatial_weight.transpose();

            // first gated temporal conv
            Eigen::MatrixXd d_in = Eigen::MatrixXd::Zero(bc.input.data.rows(), bc.input.data.cols());
            {
                const Eigen::MatrixXd d_value = d_out1.cwiseProduct(bc.gate1);
                const Eigen::MatrixXd d_gate = d_out1.cwiseProduct(bc.value1)
                                                   .cwiseProduct(bc.gate1)
                                                   .cwiseProduct((1.0 - bc.gate1.array()).matrix());
                detail::temporal_conv_backward(bc.input, p.temporal1_value, d_value, d_in, g.temporal1_value);
                detail::temporal_conv_backward(bc.input, p.temporal1_gate, d_gate, d_in, g.temporal1_gate);
            }
            d_x = std::move(d_in);
        }
    }

    StgcnConfig config_;
    SkeletonGraph graph_;
    StgcnParameters params_;
    std::vector<EpochRecord> history_;
    Eigen::MatrixXd adjacency_;
};

inline double forward(const StgcnModel& model, const MotionSequence& s) { return model.forward(s); }
inline Label predict(const StgcnModel& model, const MotionSequence& s) { return model.predict(s); }

// ---- training ------------------------------------------------------------------------

/// Adam with the usual defaults (beta1 0.9, beta2 0.999, eps 1e-8).
class AdamOptimizer {
public:
    explicit AdamOptimizer(const StgcnParameters& like, double learning_rate)
        : m_(like.zeros_like()), v_(like.zeros_like()), lr_(learning_rate) {}

    void step(StgcnParameters& params, const StgcnParameters& grad) {
        ++t_;
        const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
        const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
        std::vector<Eigen::MatrixXd*> p, m, v;
        std::vector<const Eigen::MatrixXd*> g;
        params.for_each([&](const std::string&, Eigen::MatrixXd& x) { p.push_back(&x); });
        m_.for_each([&](const std::string&, Eigen::MatrixXd& x) { m.push_back(&x); });
        v_.for_each([&](const std::string&, Eigen::MatrixXd& x) { v.push_back(&x); });
        grad.for_each([&](const std::string&, const Eigen::MatrixXd& x) { g.push_back(&x); });
        for (std::size_t i = 0; i < p.size(); ++i) {
            *m[i] = beta1_ * *m[i] + (1.0 - beta1_) * *g[i];
            *v[i] = beta2_ * *v[i] + (1.0 - beta2_) * g[i]->cwiseProduct(*g[i]);
            p[i]->array() -= lr_ * (m[i]->array() / c1) / ((v[i]->array() / c2).sqrt() + eps_);
        }
    }

private:
    StgcnParameters m_, v_;
    double lr_;
    double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
    std::uint64_t t_ = 0;
};

/// Mini-batch Adam on binary cross-entropy for exactly config.epochs epochs.
/// No validation data, no early stopping. Deterministic in config.seed.
inline StgcnModel train_stgcn(const StgcnConfig& config, const SkeletonGraph& graph, std::span<const MotionSequence> data,
                              std::span<const Label> labels) {
    config.validate();
    if (data.size() != labels.size()) throw UsageError("training data and labels differ in size");
    const auto positives = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), Label::correct));
    if (positives == 0 || positives == labels.size())
        throw ConfigError("STGCN training needs both correct and incorrect examples");

    StgcnModel model(config, graph, init_parameters(config, config.seed));
    StgcnParameters params = model.parameters();
    AdamOptimizer adam(params, config.learning_rate);
    std::vector<EpochRecord> history;

    std::vector<FeatureMap> features;
    features.reserve(data.size());
    for (const auto& s : data) {
        model.check_input(s);
        features.push_back(to_feature_map(s));
    }

    std::vector<std::size_t> order(data.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::vector<const FeatureMap*> batch;
    std::vector<Label> batch_labels;
    StgcnParameters grad;
    for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
        Rng rng(derive_seed(config.seed, "stgcn-shuffle", epoch));
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t hits = 0;
        std::size_t batch_index = 0;
        for (std::size_t start = 0; start < order.size(); start += config.batch_size, ++batch_index) {
            const std::size_t end = std::min(order.size(), start + config.batch_size);
            batch.clear();
            batch_labels.clear();
            for (std::size_t i = start; i < end; ++i) {
                batch.push_back(&features[order[i]]);
                batch_labels.push_back(labels[order[i]]);
            }
            const double loss = model.loss(std::span<const FeatureMap* const>(batch), batch_labels, &grad, &hits);
            if (!std::isfinite(loss))
                throw NumericalError("non-finite training loss at epoch " + std::to_string(epoch) + ", batch " +
                                     std::to_string(batch_index));
            loss_sum += loss * static_cast<double>(end - start);
            adam.step(params, grad);
            model = StgcnModel(config, graph, params);
        }
        history.push_back({epoch, loss_sum / static_cast<double>(data.size()),
                           static_cast<double>(hits) / static_cast<double>(data.size())});
    }
    return StgcnModel(config, graph, std::move(params), std::move(history));
}

inline StgcnModel train_stgcn(const StgcnConfig& config, const SkeletonGraph& graph, std::span<const MotionSequence> data) {
    std::vector<Label> labels;
    for (const auto& s : data) {
        if (!s.label) throw DataError("training sequence of subject '" + s.subject_id + "' has no label");
        labels.push_back(*s.label);
    }
    return train_stgcn(config, graph, data, labels);
}

// ---- persistence -------------------------------------------------------------------------

inline nlohmann::json stgcn_config_to_json(const StgcnConfig& c) {
    nlohmann::json blocks = nlohmann::json::array();
    for (const auto& b : c.blocks)
        blocks.push_back({{"in_channels", b.in_channels},
                          {"spatial_channels", b.spatial_channels},
                          {"out_channels", b.out_channels},
                          {"temporal_kernel", b.temporal_kernel}});
    return {{"blocks", blocks},
            {"lstm_hidden", c.lstm_hidden},
            {"epochs", c.epochs},
            {"batch_size", c.batch_size},
            {"learning_rate", c.learning_rate},
            {"seed", c.seed},
            {"input_length", c.input_length}};
}

inline StgcnConfig stgcn_config_from_json(const nlohmann::json& j, StgcnConfig c = {}) {
    try {
        if (j.contains("blocks")) {
            c.blocks.clear();
            for (const auto& b : j.at("blocks"))
                c.blocks.push_back({b.at("in_channels").get<std::size_t>(), b.at("spatial_channels").get<std::size_t>(),
                                    b.at("out_channels").get<std::size_t>(), b.at("temporal_kernel").get<std::size_t>()});
        }
        c.lstm_hidden = j.value("lstm_hidden", c.lstm_hidden);
        c.epochs = j.value("epochs", c.epochs);
        c.batch_size = j.value("batch_size", c.batch_size);
        c.learning_rate = j.value("learning_rate", c.learning_rate);
        c.seed = j.value("seed", c.seed);
        c.input_length = j.value("input_length", c.input_length);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("stgcn", e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json stgcn_to_json(const StgcnModel& m) {
    nlohmann::json params = nlohmann::json::object();
    m.parameters().for_each([&](const std::string& name, const Eigen::MatrixXd& x) {
        std::vector<double> values;
        values.reserve(static_cast<std::size_t>(x.size()));
        for (Eigen::Index r = 0; r < x.rows(); ++r)
            for (Eigen::Index c = 0; c < x.cols(); ++c) values.push_back(x(r, c));
        params[name] = {{"shape", {x.rows(), x.cols()}}, {"data", values}};
    });
    nlohmann::json history = nlohmann::json::array();
    for (const auto& h : m.training_history()) history.push_back({h.epoch, h.loss, h.accuracy});
    nlohmann::json graph = skeleton_to_json(m.graph());
    graph["format"] = std::string(to_string(m.graph().format));
    return {{"kind", "stgcn"},
            {"config", stgcn_config_to_json(m.config())},
            {"graph", graph},
            {"parameters", params},
            {"training_history", history}};
}

inline StgcnModel stgcn_from_json(const nlohmann::json& j) {
    try {
        const auto config = stgcn_config_from_json(j.at("config"));
        const auto& gj = j.at("graph");
        const auto fmt = parse_skeleton_format(gj.at("format").get<std::string>());
        if (!fmt) throw ParseError("graph.format", "unknown skeleton format");
        const SkeletonGraph graph = skeleton_from_json(gj, *fmt);
        StgcnParameters params = init_parameters(config, 0);
        const auto& pj = j.at("parameters");
        params.for_each([&](const std::string& name, Eigen::MatrixXd& x) {
            if (!pj.contains(name)) throw ParseError("parameters." + name, "missing");
            const auto shape = pj.at(name).at("shape").get<std::vector<Eigen::Index>>();
            const auto data = pj.at(name).at("data").get<std::vector<double>>();
            if (shape.size() != 2 || shape[0] != x.rows() || shape[1] != x.cols() ||
                data.size() != static_cast<std::size_t>(x.size()))
                throw SchemaError("parameter '" + name + "' has the wrong shape");
            std::size_t k = 0;
            for (Eigen::Index r = 0; r < x.rows(); ++r)
                for (Eigen::Index c = 0; c < x.cols(); ++c) x(r, c) = data[k++];
        });
        std::vector<EpochRecord> history;
        for (const auto& h : j.value("training_history", nlohmann::json::array()))
            history.push_back({h.at(0).get<std::size_t>(), h.at(1).get<double>(), h.at(2).get<double>()});
        return StgcnModel(config, graph, std::move(params), std::move(history));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("stgcn model", e.what());
    }
}

} // namespace rehab
