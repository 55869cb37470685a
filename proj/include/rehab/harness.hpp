#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <tuple>
#include <vector>

#include <nlohmann/json.hpp>

#include "rehab/error.hpp"
#include "rehab/gmm.hpp"
#include "rehab/metrics.hpp"
#include "rehab/motion.hpp"
#include "rehab/rng.hpp"
#include "rehab/stgcn.hpp"

namespace rehab {

enum class Algorithm { gmm, stgcn };

inline std::string_view to_string(Algorithm a) { return a == Algorithm::gmm ? "gmm" : "stgcn"; }

inline std::optional<Algorithm> parse_algorithm(std::string_view s) {
    if (s == "gmm") return Algorithm::gmm;
    if (s == "stgcn") return Algorithm::stgcn;
    return std::nullopt;
}

/// One learning-curve sweep: every (exercise, train size, validation size,
/// repeat) cell is split, trained and tested independently.
struct SweepSpec {
    Algorithm algorithm = Algorithm::gmm;
    SkeletonFormat skeleton_format = SkeletonFormat::kinect_v2;
    std::vector<std::size_t> train_sizes{10};
    std::vector<std::size_t> validation_sizes{10};
    std::size_t repeats = 5;
    std::uint64_t base_seed = 0;
    double test_fraction = 0.3;
    PreprocessConfig preprocess;
    GmmFitConfig gmm;
    StgcnConfig stgcn;

    bool operator==(const SweepSpec&) const = default;

    void validate() const {
        if (train_sizes.empty()) throw ConfigError("sweep train_sizes is empty");
        if (!std::is_sorted(train_sizes.begin(), train_sizes.end()))
            throw ConfigError("sweep train_sizes must be sorted ascending");
        if (std::find(train_sizes.begin(), train_sizes.end(), std::size_t{0}) != train_sizes.end())
            throw ConfigError("sweep train_sizes must be positive");
        if (validation_sizes.empty()) throw ConfigError("sweep validation_sizes is empty");
        if (algorithm == Algorithm::stgcn) {
            if (validation_sizes != std::vector<std::size_t>{0})
                throw ConfigError("the STGCN sweep uses no validation data; validation_sizes must be [0]");
        } else if (std::find(validation_sizes.begin(), validation_sizes.end(), std::size_t{0}) != validation_sizes.end()) {
            throw ConfigError("GMM validation_sizes must be positive (the threshold is calibrated on validation data)");
        }
        if (repeats == 0) throw ConfigError("sweep repeats must be positive");
        if (!(test_fraction > 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in (0, 1)");
        preprocess.validate();
        gmm.validate();
        if (algorithm == Algorithm::stgcn) {
            stgcn.validate();
            if (stgcn.input_length != preprocess.target_length)
                throw ConfigError("stgcn.input_length (" + std::to_string(stgcn.input_length) +
                                  ") must equal preprocess.target_length (" + std::to_string(preprocess.target_length) + ")");
        }
    }
};

// ---- splitting -------------------------------------------------------------------

struct DatasetSplit {
    std::vector<std::size_t> train;
    std::vector<std::size_t> validation;
    std::vector<std::size_t> test;
};

namespace detail {

// Splits `total` into (a, b) with a + b = total, a close to total * share,
// a <= cap_a, b <= cap_b.
inline std::pair<std::size_t, std::size_t> stratify(std::size_t total, double share, std::size_t cap_a, std::size_t cap_b) {
    auto a = static_cast<std::size_t>(std::llround(static_cast<double>(total) * share));
    a = std::min(a, total);
    std::size_t b = total - a;
    if (a > cap_a) {
        b += a - cap_a;
        a = cap_a;
    }
    if (b > cap_b) {
        a += b - cap_b;
        b = cap_b;
    }
    return {a, b};
}

} // namespace detail

/// Seeded, label-stratified split of one exercise's items.
///
/// The test set is drawn first and depends only on (labels, test_fraction,
/// seed), so every train/validation size shares it. GMM training takes the
/// first `train_size` correct items of the shuffled remainder; validation
/// items come from the other end, so both sets are nested across sizes.
inline DatasetSplit split_dataset(std::span<const Label> labels, Algorithm algorithm, std::size_t train_size,
                                  std::size_t validation_size, double test_fraction, std::uint64_t seed) {
    if (!(test_fraction >= 0.0 && test_fraction < 1.0)) throw ConfigError("test_fraction must lie in [0, 1)");
    std::vector<std::size_t> pos, neg;
    for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == Label::correct ? pos : neg).push_back(i);
    Rng rng(derive_seed(seed, "split"));
    rng.shuffle(pos);
    rng.shuffle(neg);

    const auto test_pos = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(pos.size())));
    const auto test_neg = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(neg.size())));
    DatasetSplit out;
    out.test.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(test_pos));
    out.test.insert(out.test.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(test_neg));
    const std::vector<std::size_t> rest_pos(pos.begin() + static_cast<std::ptrdiff_t>(test_pos), pos.end());
    const std::vector<std::size_t> rest_neg(neg.begin() + static_cast<std::ptrdiff_t>(test_neg), neg.end());
    const std::size_t pool = rest_pos.size() + rest_neg.size();
    const double pos_share = pool == 0 ? 0.0 : static_cast<double>(rest_pos.size()) / static_cast<double>(pool);

    auto insufficient = [&](const std::string& what) {
        return SizingError(what + " (available after reserving the test set: " + std::to_string(rest_pos.size()) +
                           " correct, " + std::to_string(rest_neg.size()) + " incorrect)");
    };

    std::size_t train_pos = 0, train_neg = 0;
    if (algorithm == Algorithm::gmm) {
        train_pos = train_size;
    } else {
        std::tie(train_pos, train_neg) = detail::stratify(train_size, pos_share, rest_pos.size(), rest_neg.size());
    }
    const auto [val_pos, val_neg] = detail::stratify(validation_size, pos_share, rest_pos.size(), rest_neg.size());
    if (train_pos + val_pos > rest_pos.size() || train_neg + val_neg > rest_neg.size())
        throw insufficient("cannot draw " + std::to_string(train_size) + " training and " + std::to_string(validation_size) +
                           " validation items");

    out.train.assign(rest_pos.begin(), rest_pos.begin() + static_cast<std::ptrdiff_t>(train_pos));
    out.train.insert(out.train.end(), rest_neg.begin(), rest_neg.begin() + static_cast<std::ptrdiff_t>(train_neg));
    out.validation.assign(rest_pos.end() - static_cast<std::ptrdiff_t>(val_pos), rest_pos.end());
    out.validation.insert(out.validation.end(), rest_neg.end() - static_cast<std::ptrdiff_t>(val_neg), rest_neg.end());
    return out;
}

// ---- report ----------------------------------------------------------------------

struct ReportRow {
    Algorithm algorithm = Algorithm::gmm;
    SkeletonFormat skeleton_format = SkeletonFormat::kinect_v2;
    std::string exercise_id;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
    std::size_t repeat_index = 0;
    std::uint64_t seed = 0;
    double f1 = 0.0;
    double accuracy = 0.0;
    std::string status = "ok";

    bool ok() const { return status == "ok"; }
    bool operator==(const ReportRow&) const = default;
};

struct Aggregate {
    Algorithm algorithm = Algorithm::gmm;
    SkeletonFormat skeleton_format = SkeletonFormat::kinect_v2;
    std::size_t train_size = 0;
    std::size_t validation_size = 0;
    std::size_t count = 0;
    double f1_mean = 0.0;
    double f1_stddev = 0.0;
    double accuracy_mean = 0.0;
    double accuracy_stddev = 0.0;

    bool operator==(const Aggregate&) const = default;
};

struct EvaluationReport {
    std::vector<ReportRow> rows;
    std::vector<Aggregate> aggregates;
};

namespace detail {

inline std::pair<double, double> mean_and_stddev(const std::vector<double>& v) {
    double sum = 0.0;
    for (double x : v) sum += x;
    const double mean = sum / static_cast<double>(v.size());
    if (v.size() < 2) return {mean, 0.0};
    double ss = 0.0;
    for (double x : v) ss += (x - mean) * (x - mean);
    return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

} // namespace detail

/// Mean and sample standard deviation across exercises and repeats, per
/// (algorithm, format, train size, validation size). Failed rows are left out.
inline std::vector<Aggregate> compute_aggregates(const std::vector<ReportRow>& rows) {
    using Key = std::tuple<int, int, std::size_t, std::size_t>;
    std::map<Key, std::pair<std::vector<double>, std::vector<double>>> groups;
    for (const auto& r : rows) {
        if (!r.ok()) continue;
        auto& g = groups[{static_cast<int>(r.algorithm), static_cast<int>(r.skeleton_format), r.train_size, r.validation_size}];
        g.first.push_back(r.f1);
        g.second.push_back(r.accuracy);
    }
    std::vector<Aggregate> out;
    for (const auto& [key, values] : groups) {
        Aggregate a;
        a.algorithm = static_cast<Algorithm>(std::get<0>(key));
        a.skeleton_format = static_cast<SkeletonFormat>(std::get<1>(key));
        a.train_size = std::get<2>(key);
        a.validation_size = std::get<3>(key);
        a.count = values.first.size();
        std::tie(a.f1_mean, a.f1_stddev) = detail::mean_and_stddev(values.first);
        std::tie(a.accuracy_mean, a.accuracy_stddev) = detail::mean_and_stddev(values.second);
        out.push_back(a);
    }
    return out;
}

// ---- sweep -----------------------------------------------------------------------

struct SweepOptions {
    std::size_t jobs = 1;
    /// Skip preprocessing (inputs already carry preprocess's output shape).
    bool inputs_preprocessed = false;
    /// Called after each finished cell (from worker threads, serialized).
    std::function<void(const ReportRow&, double seconds)> on_cell;
};

/// Seed of the test/train/validation split for one (exercise, repeat). It
/// does not depend on the sizes, which pairs the learning-curve points.
inline std::uint64_t split_seed(std::uint64_t base_seed, const std::string& exercise_id, std::size_t repeat) {
    return derive_seed(base_seed, "split", exercise_id, repeat);
}

/// Training seed of one cell, a pure function of its coordinates.
inline std::uint64_t cell_seed(std::uint64_t base_seed, Algorithm algorithm, const std::string& exercise_id,
                               std::size_t train_size, std::size_t validation_size, std::size_t repeat) {
    return derive_seed(base_seed, "cell", static_cast<int>(algorithm), exercise_id, train_size, validation_size, repeat);
}

/// Trains and tests one cell on the (preprocessed) items of one exercise.
/// Failures are reported in the row's status instead of thrown.
inline ReportRow run_cell(std::span<const MotionSequence> items, const SweepSpec& spec, const std::string& exercise_id,
                          std::size_t train_size, std::size_t validation_size, std::size_t repeat) {
    ReportRow row;
    row.algorithm = spec.algorithm;
    row.skeleton_format = spec.skeleton_format;
    row.exercise_id = exercise_id;
    row.train_size = train_size;
    row.validation_size = validation_size;
    row.repeat_index = repeat;
    row.seed = cell_seed(spec.base_seed, spec.algorithm, exercise_id, train_size, validation_size, repeat);
    try {
        std::vector<Label> labels;
        for (const auto& s : items) labels.push_back(*s.label);
        const auto split = split_dataset(labels, spec.algorithm, train_size, validation_size, spec.test_fraction,
                                         split_seed(spec.base_seed, exercise_id, repeat));
        if (split.test.empty()) throw SizingError("test set is empty");
        auto pick = [&](const std::vector<std::size_t>& idx) {
            std::vector<MotionSequence> v;
            v.reserve(idx.size());
            for (auto i : idx) v.push_back(items[i]);
            return v;
        };
        const auto train = pick(split.train);
        const auto test = pick(split.test);

        std::vector<Label> predictions, truth;
        for (const auto& s : test) truth.push_back(*s.label);
        if (spec.algorithm == Algorithm::gmm) {
            GmmFitConfig cfg = spec.gmm;
            cfg.seed = row.seed;
            const auto classifier = calibrate_threshold(fit_gmm(train, cfg), pick(split.validation));
            for (const auto& s : test) predictions.push_back(classify(classifier, s));
        } else {
            StgcnConfig cfg = spec.stgcn;
            cfg.seed = row.seed;
            const auto model = train_stgcn(cfg, items.front().graph, train);
            for (const auto& s : test) predictions.push_back(model.predict(s));
        }
        const auto counts = confusion(predictions, truth);
        row.f1 = counts.f1();
        row.accuracy = counts.accuracy();
    } catch (const std::exception& e) {
        row.f1 = 0.0;
        row.accuracy = 0.0;
        std::string reason = e.what();
        std::replace_if(reason.begin(), reason.end(), [](char c) { return c == ',' || c == '\n' || c == '\r'; }, ';');
        row.status = "failed: " + reason;
    }
    return row;
}

/// Runs every cell of the sweep. Rows come out in (exercise, train size,
/// validation size, repeat) order whatever the worker count, and every cell
/// seeds itself from base_seed and its coordinates.
inline EvaluationReport run_sweep(std::span<const MotionSequence> dataset, const SweepSpec& spec,
                                  const SweepOptions& options = {}) {
    spec.validate();
    std::map<std::string, std::vector<MotionSequence>> by_exercise;
    for (const auto& s : dataset) {
        if (s.format() != spec.skeleton_format) continue;
        if (!s.label) throw DataError("sequence of subject '" + s.subject_id + "' has no label");
        by_exercise[s.exercise_id].push_back(options.inputs_preprocessed ? s : preprocess(s, spec.preprocess));
    }
    if (by_exercise.empty())
        throw DataError("no sequences in format '" + std::string(to_string(spec.skeleton_format)) + "'");

    SweepSpec effective = spec;
    if (spec.algorithm == Algorithm::stgcn)
        effective.stgcn.blocks.front().in_channels = by_exercise.begin()->second.front().dims();

    struct Cell {
        const std::string* exercise;
        std::size_t train, validation, repeat;
    };
    std::vector<Cell> cells;
    for (const auto& [ex, items] : by_exercise)
        for (auto t : spec.train_sizes)
            for (auto v : spec.validation_sizes)
                for (std::size_t r = 0; r < spec.repeats; ++r) cells.push_back({&ex, t, v, r});

    EvaluationReport report;
    report.rows.resize(cells.size());
    std::atomic<std::size_t> next{0};
    std::mutex callback_mutex;
    auto worker = [&] {
        for (std::size_t i = next++; i < cells.size(); i = next++) {
            const auto& c = cells[i];
            const auto start = std::chrono::steady_clock::now();
            report.rows[i] = run_cell(by_exercise.at(*c.exercise), effective, *c.exercise, c.train, c.validation, c.repeat);
            if (options.on_cell) {
                const std::chrono::duration<double> took = std::chrono::steady_clock::now() - start;
                const std::lock_guard lock(callback_mutex);
                options.on_cell(report.rows[i], took.count());
            }
        }
    };
    const std::size_t jobs = std::max<std::size_t>(1, std::min(options.jobs, cells.size()));
    if (jobs == 1) {
        worker();
    } else {
        std::vector<std::jthread> pool;
        for (std::size_t w = 0; w < jobs; ++w) pool.emplace_back(worker);
    }
    report.aggregates = compute_aggregates(report.rows);
    return report;
}

// ---- spec files ------------------------------------------------------------------

inline nlohmann::json preprocess_config_to_json(const PreprocessConfig& c) {
    return {{"target_length", c.target_length}, {"center_on_root", c.center_on_root}, {"scale_normalize", c.scale_normalize}};
}

inline PreprocessConfig preprocess_config_from_json(const nlohmann::json& j, PreprocessConfig c = {}) {
    try {
        c.target_length = j.value("target_length", c.target_length);
        c.center_on_root = j.value("center_on_root", c.center_on_root);
        c.scale_normalize = j.value("scale_normalize", c.scale_normalize);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("preprocess", e.what());
    }
    c.validate();
    return c;
}

inline nlohmann::json sweep_spec_to_json(const SweepSpec& s) {
    return {{"algorithm", std::string(to_string(s.algorithm))},
            {"skeleton_format", std::string(to_string(s.skeleton_format))},
            {"train_sizes", s.train_sizes},
            {"validation_sizes", s.validation_sizes},
            {"repeats", s.repeats},
            {"base_seed", s.base_seed},
            {"test_fraction", s.test_fraction},
            {"preprocess", preprocess_config_to_json(s.preprocess)},
            {"gmm", gmm_fit_config_to_json(s.gmm)},
            {"stgcn", stgcn_config_to_json(s.stgcn)}};
}

/// Missing fields keep their defaults; an STGCN spec without
/// validation_sizes gets [0].
inline SweepSpec sweep_spec_from_json(const nlohmann::json& j) {
    if (!j.is_object()) throw ParseError("<sweep spec>", "expected an object");
    SweepSpec s;
    try {
        if (j.contains("algorithm")) {
            const auto a = parse_algorithm(j.at("algorithm").get<std::string>());
            if (!a) throw ParseError("algorithm", "expected 'gmm' or 'stgcn'");
            s.algorithm = *a;
        }
        if (j.contains("skeleton_format")) {
            const auto f = parse_skeleton_format(j.at("skeleton_format").get<std::string>());
            if (!f) throw ParseError("skeleton_format", "unknown skeleton format");
            s.skeleton_format = *f;
        }
        s.train_sizes = j.value("train_sizes", s.train_sizes);
        if (j.contains("validation_sizes"))
            s.validation_sizes = j.at("validation_sizes").get<std::vector<std::size_t>>();
        else if (s.algorithm == Algorithm::stgcn)
            s.validation_sizes = {0};
        s.repeats = j.value("repeats", s.repeats);
        s.base_seed = j.value("base_seed", s.base_seed);
        s.test_fraction = j.value("test_fraction", s.test_fraction);
        if (j.contains("preprocess")) s.preprocess = preprocess_config_from_json(j.at("preprocess"));
        if (j.contains("gmm")) s.gmm = gmm_fit_config_from_json(j.at("gmm"));
        if (j.contains("stgcn")) s.stgcn = stgcn_config_from_json(j.at("stgcn"));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError("sweep spec", e.what());
    }
    s.validate();
    return s;
}

} // namespace rehab
