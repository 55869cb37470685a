#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <queue>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "rehab/error.hpp"

namespace rehab {

enum class SkeletonFormat { kinect_v2, openpose, blazepose, custom };

inline std::string_view to_string(SkeletonFormat f) {
    switch (f) {
    case SkeletonFormat::kinect_v2: return "kinect_v2";
    case SkeletonFormat::openpose: return "openpose";
    case SkeletonFormat::blazepose: return "blazepose";
    case SkeletonFormat::custom: return "custom";
    }
    return "custom";
}

inline std::optional<SkeletonFormat> parse_skeleton_format(std::string_view s) {
    if (s == "kinect_v2") return SkeletonFormat::kinect_v2;
    if (s == "openpose") return SkeletonFormat::openpose;
    if (s == "blazepose") return SkeletonFormat::blazepose;
    if (s == "custom") return SkeletonFormat::custom;
    return std::nullopt;
}

using Edge = std::pair<std::size_t, std::size_t>;

/// Joint topology of one capture format.
///
/// The torso segment used for scale normalization runs between the centroid
/// of `torso_lower` and the centroid of `torso_upper`; for formats without a
/// single hip/shoulder-centre joint these are pairs of joints.
struct SkeletonGraph {
    SkeletonFormat format = SkeletonFormat::custom;
    std::size_t joint_count = 0;
    int dimensionality = 3;
    std::vector<Edge> edges;
    std::vector<std::string> joint_names;
    std::size_t root_joint = 0;
    std::vector<std::size_t> torso_lower;
    std::vector<std::size_t> torso_upper;

    bool operator==(const SkeletonGraph&) const = default;

    bool is_tree() const { return edges.size() + 1 == joint_count && is_connected(); }

    bool is_connected() const {
        if (joint_count == 0) return false;
        std::vector<std::vector<std::size_t>> adj(joint_count);
        for (auto [a, b] : edges) {
            adj[a].push_back(b);
            adj[b].push_back(a);
        }
        std::vector<char> seen(joint_count, 0);
        std::queue<std::size_t> q;
        q.push(0);
        seen[0] = 1;
        std::size_t visited = 1;
        while (!q.empty()) {
            const auto u = q.front();
            q.pop();
            for (auto v : adj[u]) {
                if (!seen[v]) {
                    seen[v] = 1;
                    ++visited;
                    q.push(v);
                }
            }
        }
        return visited == joint_count;
    }

    /// Throws SchemaError when any structural invariant is broken.
    void validate() const {
        if (joint_count == 0) throw SchemaError("skeleton has no joints");
        if (dimensionality != 2 && dimensionality != 3)
            throw SchemaError("skeleton dimensionality must be 2 or 3");
        if (joint_names.size() != joint_count)
            throw SchemaError("joint_names length " + std::to_string(joint_names.size()) +
                              " does not match joint_count " + std::to_string(joint_count));
        for (auto [a, b] : edges) {
            if (a >= joint_count || b >= joint_count)
                throw SchemaError("edge (" + std::to_string(a) + "," + std::to_string(b) +
                                  ") references a joint outside [0, " + std::to_string(joint_count) + ")");
            if (a == b) throw SchemaError("self-loop on joint " + std::to_string(a));
        }
        if (!is_connected()) throw SchemaError("skeleton edge set is not connected");
        if (root_joint >= joint_count) throw SchemaError("root joint out of range");
        for (const auto* set : {&torso_lower, &torso_upper}) {
            for (auto j : *set)
                if (j >= joint_count) throw SchemaError("torso joint out of range");
        }
        if (torso_lower.empty() || torso_upper.empty())
            throw SchemaError("torso reference joints are not defined");
    }
};

namespace detail {

inline std::vector<std::string> names(std::initializer_list<const char*> list) {
    return {list.begin(), list.end()};
}

} // namespace detail

inline SkeletonGraph kinect_v2_graph() {
    SkeletonGraph g;
    g.format = SkeletonFormat::kinect_v2;
    g.joint_count = 25;
    g.dimensionality = 3;
    g.joint_names = detail::names({"SpineBase",    "SpineMid",     "Neck",          "Head",
                                   "ShoulderLeft", "ElbowLeft",    "WristLeft",     "HandLeft",
                                   "ShoulderRight", "ElbowRight",  "WristRight",    "HandRight",
                                   "HipLeft",      "KneeLeft",     "AnkleLeft",     "FootLeft",
                                   "HipRight",     "KneeRight",    "AnkleRight",    "FootRight",
                                   "SpineShoulder", "HandTipLeft", "ThumbLeft",     "HandTipRight",
                                   "ThumbRight"});
    g.edges = {{0, 1},   {1, 20},  {20, 2},  {2, 3},   {20, 4},  {4, 5},   {5, 6},   {6, 7},
               {7, 21},  {6, 22},  {20, 8},  {8, 9},   {9, 10},  {10, 11}, {11, 23}, {10, 24},
               {0, 12},  {12, 13}, {13, 14}, {14, 15}, {0, 16},  {16, 17}, {17, 18}, {18, 19}};
    g.root_joint = 0;
    g.torso_lower = {0};
    g.torso_upper = {20};
    return g;
}

// OpenPose BODY_25 layout.
inline SkeletonGraph openpose_graph() {
    SkeletonGraph g;
    g.format = SkeletonFormat::openpose;
    g.joint_count = 25;
    g.dimensionality = 2;
    g.joint_names = detail::names({"Nose",    "Neck",     "RShoulder", "RElbow",    "RWrist",
                                   "LShoulder", "LElbow", "LWrist",    "MidHip",    "RHip",
                                   "RKnee",   "RAnkle",   "LHip",      "LKnee",     "LAnkle",
                                   "REye",    "LEye",     "REar",      "LEar",      "LBigToe",
                                   "LSmallToe", "LHeel",  "RBigToe",   "RSmallToe", "RHeel"});
    g.edges = {{1, 8},   {1, 2},   {1, 5},   {2, 3},   {3, 4},   {5, 6},   {6, 7},   {8, 9},
               {9, 10},  {10, 11}, {8, 12},  {12, 13}, {13, 14}, {1, 0},   {0, 15},  {15, 17},
               {0, 16},  {16, 18}, {14, 19}, {19, 20}, {14, 21}, {11, 22}, {22, 23}, {11, 24}};
    g.root_joint = 8;
    g.torso_lower = {8};
    g.torso_upper = {1};
    return g;
}

// BlazePose 33-landmark layout. The published connection list contains
// cycles (shoulder/hip rectangle, hand and foot triangles); this is a spanning
// tree of it rooted at the left hip.
inline SkeletonGraph blazepose_graph() {
    SkeletonGraph g;
    g.format = SkeletonFormat::blazepose;
    g.joint_count = 33;
    g.dimensionality = 3;
    g.joint_names = detail::names(
        {"nose",           "left_eye_inner", "left_eye",       "left_eye_outer", "right_eye_inner",
         "right_eye",      "right_eye_outer", "left_ear",      "right_ear",      "mouth_left",
         "mouth_right",    "left_shoulder",  "right_shoulder", "left_elbow",     "right_elbow",
         "left_wrist",     "right_wrist",    "left_pinky",     "right_pinky",    "left_index",
         "right_index",    "left_thumb",     "right_thumb",    "left_hip",       "right_hip",
         "left_knee",      "right_knee",     "left_ankle",     "right_ankle",    "left_heel",
         "right_heel",     "left_foot_index", "right_foot_index"});
    g.edges = {// torso
               {23, 24}, {11, 23}, {12, 24}, {0, 11},
               // face
               {0, 1}, {1, 2}, {2, 3}, {3, 7}, {0, 4}, {4, 5}, {5, 6}, {6, 8}, {0, 9}, {9, 10},
               // arms
               {11, 13}, {13, 15}, {15, 17}, {15, 19}, {15, 21},
               {12, 14}, {14, 16}, {16, 18}, {16, 20}, {16, 22},
               // legs
               {23, 25}, {25, 27}, {27, 29}, {27, 31},
               {24, 26}, {26, 28}, {28, 30}, {28, 32}};
    g.root_joint = 23;
    g.torso_lower = {23, 24};
    g.torso_upper = {11, 12};
    return g;
}

inline SkeletonGraph builtin_graph(SkeletonFormat f) {
    switch (f) {
    case SkeletonFormat::kinect_v2: return kinect_v2_graph();
    case SkeletonFormat::openpose: return openpose_graph();
    case SkeletonFormat::blazepose: return blazepose_graph();
    case SkeletonFormat::custom: break;
    }
    throw ConfigError("the custom skeleton format has no built-in graph");
}

/// Symmetric renormalized adjacency D^-1/2 (A + I) D^-1/2, with D the degree
/// matrix of A + I. Duplicate edges collapse to a single 0/1 entry.
inline Eigen::MatrixXd build_normalized_adjacency(const SkeletonGraph& graph) {
    const auto n = static_cast<Eigen::Index>(graph.joint_count);
    Eigen::MatrixXd a = Eigen::MatrixXd::Identity(n, n);
    for (auto [i, j] : graph.edges) {
        a(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = 1.0;
        a(static_cast<Eigen::Index>(j), static_cast<Eigen::Index>(i)) = 1.0;
    }
    const Eigen::VectorXd inv_sqrt_deg = a.rowwise().sum().cwiseSqrt().cwiseInverse();
    return inv_sqrt_deg.asDiagonal() * a * inv_sqrt_deg.asDiagonal();
}

} // namespace rehab
