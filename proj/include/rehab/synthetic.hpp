#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <queue>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rehab/error.hpp"
#include "rehab/motion.hpp"
#include "rehab/rng.hpp"
#include "rehab/sequence_io.hpp"
#include "rehab/skeleton.hpp"

namespace rehab {

/// A 16-joint 3-D stick figure (pelvis root, spine, head, arms, legs).
inline SkeletonGraph stick_figure_graph() {
    SkeletonGraph g;
    g.format = SkeletonFormat::custom;
    g.joint_count = 16;
    g.dimensionality = 3;
    g.joint_names = {"pelvis",     "spine",   "neck",    "head",   "l_shoulder", "l_elbow", "l_wrist", "r_shoulder",
                     "r_elbow",    "r_wrist", "l_hip",   "l_knee", "l_ankle",    "r_hip",   "r_knee",  "r_ankle"};
    g.edges = {{0, 1}, {1, 2},  {2, 3},   {2, 4},   {4, 5},   {5, 6},   {2, 7},  {7, 8},
               {8, 9}, {0, 10}, {10, 11}, {11, 12}, {0, 13},  {13, 14}, {14, 15}};
    g.root_joint = 0;
    g.torso_lower = {0};
    g.torso_upper = {2};
    return g;
}

struct IncorrectPerturbation {
    double amplitude_scale = 0.5;
    double noise_std = 0.02;
    /// Empty means every joint.
    std::vector<std::size_t> affected_joints;

    bool operator==(const IncorrectPerturbation&) const = default;
};

struct SyntheticSpec {
    SkeletonGraph graph = stick_figure_graph();
    std::size_t duration_frames = 60;
    double frame_rate = 30.0;
    /// Upper bound on any coordinate's oscillation amplitude.
    double motion_amplitude = 0.3;
    /// Relative spread of per-execution amplitude and phase, in [0, 0.1].
    double execution_jitter = 0.1;
    IncorrectPerturbation incorrect{0.5, 0.02, {5, 6, 8, 9}};
    std::uint64_t seed = 7;

    bool operator==(const SyntheticSpec&) const = default;

    /// Correct and incorrect executions coincide.
    bool is_degenerate() const { return incorrect.amplitude_scale == 1.0 && !(incorrect.noise_std > 0.0); }

    void validate() const {
        graph.validate();
        if (duration_frames < 2) throw ConfigError("synthetic duration_frames must be >= 2");
        if (!(frame_rate > 0.0)) throw ConfigError("synthetic frame_rate must be positive");
        if (!(motion_amplitude > 0.0)) throw ConfigError("synthetic motion_amplitude must be positive");
        if (!(execution_jitter >= 0.0 && execution_jitter <= 0.1))
            throw ConfigError("synthetic execution_jitter must lie in [0, 0.1]");
        if (!(incorrect.noise_std >= 0.0)) throw ConfigError("synthetic noise_std must be non-negative");
        for (auto j : incorrect.affected_joints)
            if (j >= graph.joint_count) throw ConfigError("affected joint " + std::to_string(j) + " is out of range");
    }
};

namespace detail {

// Rest pose: breadth-first from the root, each bone 0.2 long in a direction
// drawn from the seed.
inline std::vector<double> rest_pose(const SkeletonGraph& g, std::uint64_t seed) {
    const auto d = static_cast<std::size_t>(g.dimensionality);
    std::vector<double> pose(g.joint_count * d, 0.0);
    std::vector<std::vector<std::size_t>> adj(g.joint_count);
    for (auto [a, b] : g.edges) {
        adj[a].push_back(b);
        adj[b].push_back(a);
    }
    Rng rng(derive_seed(seed, "rest-pose"));
    std::vector<char> seen(g.joint_count, 0);
    std::queue<std::size_t> q;
    q.push(g.root_joint);
    seen[g.root_joint] = 1;
    while (!q.empty()) {
        const auto u = q.front();
        q.pop();
        for (auto v : adj[u]) {
            if (seen[v]) continue;
            seen[v] = 1;
            std::vector<double> dir(d);
            double norm = 0.0;
            do {
                norm = 0.0;
                for (auto& x : dir) {
                    x = rng.normal();
                    norm += x * x;
                }
            } while (norm < 1e-12);
            norm = std::sqrt(norm);
            for (std::size_t k = 0; k < d; ++k) pose[v * d + k] = pose[u * d + k] + 0.2 * dir[k] / norm;
            q.push(v);
        }
    }
    return pose;
}

} // namespace detail

/// One execution of `exercise_id`. Correct executions are smooth sinusoids
/// (one cycle over the duration) around a rest pose; incorrect executions
/// scale the amplitude of the affected joints and add Gaussian noise to them.
/// Deterministic in (spec.seed, exercise_id, label, call_index); the
/// execution-to-execution variation does not depend on the label.
inline MotionSequence generate_sequence(const SyntheticSpec& spec, Label label, const std::string& exercise_id = "exercise",
                                        std::size_t call_index = 0) {
    spec.validate();
    const auto& g = spec.graph;
    const auto d = static_cast<std::size_t>(g.dimensionality);
    const std::size_t stride = g.joint_count * d;
    const auto rest = detail::rest_pose(g, spec.seed);

    // Per-exercise base motion.
    Rng motion_rng(derive_seed(spec.seed, "motion", exercise_id));
    std::vector<double> amplitude(stride), phase(stride);
    for (std::size_t c = 0; c < stride; ++c) {
        amplitude[c] = spec.motion_amplitude * motion_rng.uniform(0.3, 0.9);
        phase[c] = motion_rng.uniform(0.0, 2.0 * std::numbers::pi);
    }

    // Per-execution variation (shared by both labels).
    Rng exec_rng(derive_seed(spec.seed, "execution", exercise_id, call_index));
    const double j = spec.execution_jitter;
    const double phase_shift = exec_rng.uniform(-j, j) * std::numbers::pi;
    std::vector<double> joint_scale(g.joint_count);
    for (auto& s : joint_scale) s = 1.0 + exec_rng.uniform(-j, j);

    std::vector<char> affected(g.joint_count, spec.incorrect.affected_joints.empty() ? 1 : 0);
    for (auto a : spec.incorrect.affected_joints) affected[a] = 1;
    const bool perturb = label == Label::incorrect;
    Rng noise_rng(derive_seed(spec.seed, "noise", exercise_id, call_index));

    MotionSequence s;
    s.graph = g;
    s.frame_count = spec.duration_frames;
    s.exercise_id = exercise_id;
    s.subject_id = "synthetic-" + std::to_string(call_index);
    s.label = label;
    s.timestamps.resize(s.frame_count);
    s.coords.resize(s.frame_count * stride);
    const double omega = 2.0 * std::numbers::pi / static_cast<double>(spec.duration_frames);
    for (std::size_t n = 0; n < s.frame_count; ++n) {
        s.timestamps[n] = static_cast<double>(n) / spec.frame_rate;
        for (std::size_t jt = 0; jt < g.joint_count; ++jt) {
            const bool hit = perturb && affected[jt];
            for (std::size_t k = 0; k < d; ++k) {
                const std::size_t c = jt * d + k;
                double a = amplitude[c] * joint_scale[jt];
                if (hit) a *= spec.incorrect.amplitude_scale;
                double v = rest[c] + a * std::sin(omega * static_cast<double>(n) + phase[c] + phase_shift);
                if (hit && spec.incorrect.noise_std > 0.0) v += spec.incorrect.noise_std * noise_rng.normal();
                s.coords[n * stride + c] = v;
            }
        }
    }
    return s;
}

/// Per exercise: n_correct correct executions (call indices 0..n_correct-1)
/// followed by n_incorrect incorrect ones.
inline std::vector<MotionSequence> generate_dataset(const SyntheticSpec& spec, std::size_t n_correct, std::size_t n_incorrect,
                                                    const std::vector<std::string>& exercises) {
    std::vector<MotionSequence> out;
    out.reserve(exercises.size() * (n_correct + n_incorrect));
    for (const auto& ex : exercises) {
        for (std::size_t i = 0; i < n_correct; ++i) out.push_back(generate_sequence(spec, Label::correct, ex, i));
        for (std::size_t i = 0; i < n_incorrect; ++i)
            out.push_back(generate_sequence(spec, Label::incorrect, ex, n_correct + i));
    }
    return out;
}

inline nlohmann::json synthetic_spec_to_json(const SyntheticSpec& s) {
    nlohmann::json graph = skeleton_to_json(s.graph);
    graph["format"] = std::string(to_string(s.graph.format));
    return {{"graph", graph},
            {"duration_frames", s.duration_frames},
            {"frame_rate", s.frame_rate},
            {"motion_amplitude", s.motion_amplitude},
            {"execution_jitter", s.execution_jitter},
            {"incorrect",
             {{"amplitude_scale", s.incorrect.amplitude_scale},
              {"noise_std", s.incorrect.noise_std},
              {"affected_joints", s.incorrect.affected_joints}}},
            {"seed", s.seed}};
}

inline SyntheticSpec synthetic_spec_from_json(const nlohmann::json& j, SyntheticSpec s = {}) {
    try {
        if (j.contains("graph")) {
            const auto& gj = j.at("graph");
            const auto fmt = parse_skeleton_format(gj.value("format", std::string("custom")));
            if (!fmt) throw ParseError("synthetic.graph.format", "unknown skeleton format");
            s.graph = gj.contains("joint_count") ? skeleton_from_json(gj, *fmt) : builtin_graph(*fmt);
            if (!j.contains("incorrect")) s.incorrect.affected_joints.clear();
        }
        s.duration_frames = j.value("duration_frames", s.duration_frames);
        s.frame_rate = j.value("frame_rate", s.frame_rate);
        s.motion_amplitude = j.value("motion_amplitude", s.motion_amplitude);
        s.execution_jitter = j.value("execution_jitter", s.execution_jitter);
        if (j.contains("incorrect")) {
            const auto& ij = j.at("incorrect");
            s.incorrect.amplitude_scale = ij.value("amplitude_scale", s.incorrect.amplitude_scale);
            s.incorrect.noise_std = ij.value("noise_std", s.incorrect.noise_std);
            s.incorrect.affected_joints = ij.value("affected_joints", s.incorrect.affected_joints);
        }
        s.seed = j.value("seed", s.seed);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("synthetic", e.what());
    }
    s.validate();
    return s;
}

} // namespace rehab
