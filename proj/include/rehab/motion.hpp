#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "rehab/error.hpp"
#include "rehab/skeleton.hpp"

namespace rehab {

enum class Label { incorrect = 0, correct = 1 };

inline std::string_view to_string(Label l) { return l == Label::correct ? "correct" : "incorrect"; }

inline std::optional<Label> parse_label(std::string_view s) {
    if (s == "correct") return Label::correct;
    if (s == "incorrect") return Label::incorrect;
    return std::nullopt;
}

/// One annotator's verdict: a binary label, or a graded score (KIMORE-style).
using Annotation = std::variant<Label, double>;

/// A timed sequence of skeleton frames, stored frame-major then joint-major:
/// coords[(t * J + j) * D + d].
struct MotionSequence {
    SkeletonGraph graph;
    std::size_t frame_count = 0;
    std::vector<double> coords;
    std::vector<double> timestamps;
    std::string exercise_id;
    std::string subject_id;
    std::optional<Label> label;
    std::vector<Annotation> annotations;

    bool operator==(const MotionSequence&) const = default;

    SkeletonFormat format() const { return graph.format; }
    std::size_t joint_count() const { return graph.joint_count; }
    std::size_t dims() const { return static_cast<std::size_t>(graph.dimensionality); }
    std::size_t frame_stride() const { return joint_count() * dims(); }

    double& at(std::size_t t, std::size_t j, std::size_t d) {
        return coords[(t * joint_count() + j) * dims() + d];
    }
    double at(std::size_t t, std::size_t j, std::size_t d) const {
        return coords[(t * joint_count() + j) * dims() + d];
    }

    /// Throws SchemaError / DataError if a type invariant is violated.
    void validate() const {
        graph.validate();
        if (frame_count < 2) throw SchemaError("sequence needs at least 2 frames, got " + std::to_string(frame_count));
        if (timestamps.size() != frame_count)
            throw SchemaError("timestamps length " + std::to_string(timestamps.size()) + " does not match frame count " +
                              std::to_string(frame_count));
        if (coords.size() != frame_count * frame_stride())
            throw SchemaError("coordinate buffer size does not match T x J x D");
        for (std::size_t t = 0; t < frame_count; ++t) {
            if (!std::isfinite(timestamps[t])) throw DataError("non-finite timestamp at frame " + std::to_string(t));
            if (t > 0 && !(timestamps[t] > timestamps[t - 1])) throw DataError("timestamps not strictly increasing");
        }
        for (std::size_t i = 0; i < coords.size(); ++i) {
            if (!std::isfinite(coords[i]))
                throw DataError("non-finite coordinate at frame " + std::to_string(i / frame_stride()) + ", joint " +
                                std::to_string((i % frame_stride()) / dims()));
        }
    }
};

/// Fills non-finite coordinates by linear interpolation along time, per joint
/// coordinate; leading/trailing gaps take the nearest observed value.
inline void impute_missing(MotionSequence& seq) {
    const std::size_t stride = seq.frame_stride();
    for (std::size_t c = 0; c < stride; ++c) {
        auto value = [&](std::size_t t) -> double& { return seq.coords[t * stride + c]; };
        std::optional<std::size_t> prev;
        std::size_t t = 0;
        while (t < seq.frame_count) {
            if (std::isfinite(value(t))) {
                prev = t;
                ++t;
                continue;
            }
            std::size_t next = t;
            while (next < seq.frame_count && !std::isfinite(value(next))) ++next;
            if (!prev && next == seq.frame_count)
                throw DataError("joint " + std::to_string(c / seq.dims()) + " is never observed; cannot impute");
            for (std::size_t k = t; k < next; ++k) {
                if (!prev) {
                    value(k) = value(next);
                } else if (next == seq.frame_count) {
                    value(k) = value(*prev);
                } else {
                    const double t0 = seq.timestamps[*prev];
                    const double t1 = seq.timestamps[next];
                    const double w = (seq.timestamps[k] - t0) / (t1 - t0);
                    value(k) = (1.0 - w) * value(*prev) + w * value(next);
                }
            }
            t = next;
        }
    }
}

struct PreprocessConfig {
    std::size_t target_length = 100;
    bool center_on_root = true;
    bool scale_normalize = true;

    bool operator==(const PreprocessConfig&) const = default;

    void validate() const {
        if (target_length < 2) throw ConfigError("preprocess target_length must be >= 2");
    }
};

namespace detail {

inline Eigen::VectorXd joint_centroid(const MotionSequence& s, std::size_t t, const std::vector<std::size_t>& joints) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(s.dims()));
    for (auto j : joints)
        for (std::size_t d = 0; d < s.dims(); ++d) c[static_cast<Eigen::Index>(d)] += s.at(t, j, d);
    return c / static_cast<double>(joints.size());
}

} // namespace detail

/// Mean torso length over frames (distance between the torso reference
/// centroids).
inline double mean_torso_length(const MotionSequence& s) {
    double total = 0.0;
    for (std::size_t t = 0; t < s.frame_count; ++t)
        total += (detail::joint_centroid(s, t, s.graph.torso_upper) - detail::joint_centroid(s, t, s.graph.torso_lower)).norm();
    return total / static_cast<double>(s.frame_count);
}

/// Resamples to a fixed length on a uniform time grid, optionally centers on
/// the root joint and divides by the mean torso length, and maps timestamps
/// onto [0, 1].
inline MotionSequence preprocess(const MotionSequence& in, const PreprocessConfig& cfg) {
    cfg.validate();
    const std::size_t stride = in.frame_stride();
    const std::size_t n = cfg.target_length;
    const double t0 = in.timestamps.front();
    const double span = in.timestamps.back() - t0;

    MotionSequence out = in;
    out.frame_count = n;
    out.coords.assign(n * stride, 0.0);
    out.timestamps.assign(n, 0.0);

    std::size_t seg = 0;
    for (std::size_t k = 0; k < n; ++k) {
        const double u = static_cast<double>(k) / static_cast<double>(n - 1);
        out.timestamps[k] = u;
        const double tau = (k + 1 == n) ? in.timestamps.back() : t0 + u * span;
        while (seg + 2 < in.frame_count && in.timestamps[seg + 1] <= tau) ++seg;
        const double a = in.timestamps[seg];
        const double b = in.timestamps[seg + 1];
        const double w = std::clamp((tau - a) / (b - a), 0.0, 1.0);
        const double* lo = &in.coords[seg * stride];
        const double* hi = &in.coords[(seg + 1) * stride];
        double* dst = &out.coords[k * stride];
        if (w == 0.0) {
            std::copy(lo, lo + stride, dst);
        } else if (w == 1.0) {
            std::copy(hi, hi + stride, dst);
        } else {
            for (std::size_t c = 0; c < stride; ++c) dst[c] = lo[c] + w * (hi[c] - lo[c]);
        }
    }

    if (cfg.center_on_root) {
        const std::size_t root = out.graph.root_joint;
        for (std::size_t t = 0; t < n; ++t) {
            for (std::size_t d = 0; d < out.dims(); ++d) {
                const double r = out.at(t, root, d);
                for (std::size_t j = 0; j < out.joint_count(); ++j) out.at(t, j, d) -= r;
            }
        }
    }

    if (cfg.scale_normalize) {
        const double torso = mean_torso_length(out);
        if (!(torso > 1e-12) || !std::isfinite(torso))
            throw PreprocessError("mean torso length is zero; cannot scale-normalize sequence of subject '" +
                                  in.subject_id + "'");
        for (double& v : out.coords) v /= torso;
    }
    return out;
}

/// One row per frame: [t, x_0, ..., x_{J*D-1}] with joint-major flattening.
inline Eigen::MatrixXd to_gmm_datapoints(const MotionSequence& s) {
    const auto stride = static_cast<Eigen::Index>(s.frame_stride());
    Eigen::MatrixXd points(static_cast<Eigen::Index>(s.frame_count), stride + 1);
    for (std::size_t t = 0; t < s.frame_count; ++t) {
        const auto row = static_cast<Eigen::Index>(t);
        points(row, 0) = s.timestamps[t];
        for (Eigen::Index c = 0; c < stride; ++c) points(row, c + 1) = s.coords[static_cast<std::size_t>(row * stride + c)];
    }
    return points;
}

/// Inverse of to_gmm_datapoints: rebuilds timestamps and frames on the given
/// skeleton.
inline MotionSequence from_gmm_datapoints(const Eigen::MatrixXd& points, const SkeletonGraph& graph) {
    MotionSequence s;
    s.graph = graph;
    const auto stride = static_cast<Eigen::Index>(graph.joint_count * static_cast<std::size_t>(graph.dimensionality));
    if (points.cols() != stride + 1) throw SchemaError("datapoint width does not match the skeleton");
    s.frame_count = static_cast<std::size_t>(points.rows());
    s.timestamps.resize(s.frame_count);
    s.coords.resize(s.frame_count * static_cast<std::size_t>(stride));
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
        s.timestamps[static_cast<std::size_t>(r)] = points(r, 0);
        for (Eigen::Index c = 0; c < stride; ++c) s.coords[static_cast<std::size_t>(r * stride + c)] = points(r, c + 1);
    }
    return s;
}

} // namespace rehab
