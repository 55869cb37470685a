#pragma once

#include <filesystem>
#include <string>

#include "rehab/rehab.hpp"

namespace testing_support {

inline rehab::SkeletonGraph path_graph(std::size_t n, int dims = 3) {
    rehab::SkeletonGraph g;
    g.format = rehab::SkeletonFormat::custom;
    g.joint_count = n;
    g.dimensionality = dims;
    for (std::size_t i = 0; i + 1 < n; ++i) g.edges.emplace_back(i, i + 1);
    for (std::size_t i = 0; i < n; ++i) g.joint_names.push_back("j" + std::to_string(i));
    g.root_joint = 0;
    g.torso_lower = {0};
    g.torso_upper = {n > 1 ? 1u : 0u};
    return g;
}

// Uniform-random coordinates in [-1, 1], strictly increasing jittered timestamps.
inline rehab::MotionSequence random_sequence(rehab::Rng& rng, const rehab::SkeletonGraph& g, std::size_t frames) {
    rehab::MotionSequence s;
    s.graph = g;
    s.frame_count = frames;
    s.exercise_id = "ex";
    s.subject_id = "s" + std::to_string(rng.below(1000));
    double t = rng.uniform(0.0, 1.0);
    for (std::size_t i = 0; i < frames; ++i) {
        s.timestamps.push_back(t);
        t += rng.uniform(0.01, 0.1);
    }
    s.coords.resize(frames * s.frame_stride());
    for (auto& v : s.coords) v = rng.uniform(-1.0, 1.0);
    return s;
}

// Fresh empty directory under the system temp dir.
inline std::filesystem::path scratch_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("rehab_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace testing_support
