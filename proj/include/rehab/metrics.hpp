#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rehab/error.hpp"
#include "rehab/motion.hpp"

namespace rehab {

/// Binary confusion counts with "correct" as the positive class.
struct ConfusionCounts {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t total() const { return tp + fp + fn + tn; }

    double precision() const { return tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp); }
    double recall() const { return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn); }

    /// 2PR/(P+R); 0 when P+R = 0, except that a confusion matrix with no
    /// positives anywhere (TP = FP = FN = 0) counts as perfect agreement.
    double f1() const {
        if (tp == 0 && fp == 0 && fn == 0) return 1.0;
        // Harmonic mean of precision and recall, in the single-division form.
        return 2.0 * static_cast<double>(tp) / static_cast<double>(2 * tp + fp + fn);
    }

    double accuracy() const {
        return total() == 0 ? 0.0 : static_cast<double>(tp + tn) / static_cast<double>(total());
    }
};

inline ConfusionCounts confusion(std::span<const Label> predictions, std::span<const Label> truth) {
    if (predictions.size() != truth.size())
        throw UsageError("predictions (" + std::to_string(predictions.size()) + ") and truth (" +
                         std::to_string(truth.size()) + ") differ in length");
    if (predictions.empty()) throw UsageError("metrics need at least one prediction");
    ConfusionCounts c;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        const bool p = predictions[i] == Label::correct;
        const bool t = truth[i] == Label::correct;
        if (p && t) ++c.tp;
        else if (p) ++c.fp;
        else if (t) ++c.fn;
        else ++c.tn;
    }
    return c;
}

inline double f1_score(std::span<const Label> predictions, std::span<const Label> truth) {
    return confusion(predictions, truth).f1();
}

inline double accuracy(std::span<const Label> predictions, std::span<const Label> truth) {
    return confusion(predictions, truth).accuracy();
}

/// Cohen's kappa for two raters over any ordered category type.
template <typename Category>
double cohens_kappa(std::span<const Category> a, std::span<const Category> b) {
    if (a.size() != b.size()) throw UsageError("annotator label lists differ in length");
    if (a.empty()) throw UsageError("cohens_kappa needs at least one item");
    const auto n = static_cast<double>(a.size());
    std::map<Category, std::pair<std::size_t, std::size_t>> marginals;
    std::size_t agree = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ++marginals[a[i]].first;
        ++marginals[b[i]].second;
        if (a[i] == b[i]) ++agree;
    }
    const double p_o = static_cast<double>(agree) / n;
    double p_e = 0.0;
    for (const auto& [cat, m] : marginals) p_e += (static_cast<double>(m.first) / n) * (static_cast<double>(m.second) / n);
    if (p_e == 1.0) return 1.0;
    return (p_o - p_e) / (1.0 - p_e);
}

template <typename Category>
double cohens_kappa(const std::vector<Category>& a, const std::vector<Category>& b) {
    return cohens_kappa(std::span<const Category>(a), std::span<const Category>(b));
}

/// items x annotators; std::nullopt marks a missing annotation.
template <typename Category>
using RatingTable = std::vector<std::vector<std::optional<Category>>>;

/// Krippendorff's alpha with the nominal metric, via the coincidence matrix.
/// Items with fewer than two annotations are not pairable and are skipped.
template <typename Category>
double krippendorff_alpha(const RatingTable<Category>& table) {
    std::size_t max_raters = 0;
    std::size_t pairable_items = 0;
    std::map<std::pair<Category, Category>, double> coincidence;
    std::map<Category, double> marginal;
    for (const auto& item : table) {
        std::vector<Category> values;
        for (const auto& v : item)
            if (v) values.push_back(*v);
        max_raters = std::max(max_raters, values.size());
        if (values.size() < 2) continue;
        ++pairable_items;
        const double w = 1.0 / static_cast<double>(values.size() - 1);
        for (std::size_t i = 0; i < values.size(); ++i)
            for (std::size_t j = 0; j < values.size(); ++j)
                if (i != j) coincidence[{values[i], values[j]}] += w;
    }
    if (max_raters < 2) throw UsageError("krippendorff_alpha needs at least two annotators on an item");
    if (pairable_items < 2) throw UsageError("krippendorff_alpha needs at least two items with two or more annotations");
    for (const auto& [pair, o] : coincidence) marginal[pair.first] += o;
    if (marginal.size() < 2)
        throw UsageError("krippendorff_alpha is undefined when only one category is observed (expected disagreement is 0)");

    double n = 0.0;
    for (const auto& [c, m] : marginal) n += m;
    double observed = 0.0;
    for (const auto& [pair, o] : coincidence)
        if (!(pair.first == pair.second)) observed += o;
    double expected = 0.0;
    for (const auto& [c, nc] : marginal)
        for (const auto& [k, nk] : marginal)
            if (!(c == k)) expected += nc * nk;
    return 1.0 - (n - 1.0) * observed / expected;
}

enum class MergePolicy { unanimous_correct, majority };

/// One merged label per sequence from its annotators' labels.
inline std::vector<Label> merge_annotations(const std::vector<std::vector<Label>>& annotations, MergePolicy policy) {
    std::vector<Label> out;
    out.reserve(annotations.size());
    for (std::size_t i = 0; i < annotations.size(); ++i) {
        const auto& item = annotations[i];
        if (item.empty()) throw DataError("sequence " + std::to_string(i) + " has no annotations");
        std::size_t correct = 0;
        for (Label l : item) correct += l == Label::correct ? 1 : 0;
        const bool ok = policy == MergePolicy::unanimous_correct ? correct == item.size() : 2 * correct > item.size();
        out.push_back(ok ? Label::correct : Label::incorrect);
    }
    return out;
}

/// Graded clinical scores to binary labels: correct iff score >= cutoff.
inline std::vector<Label> binarize_kimore_scores(std::span<const double> scores, double cutoff, double max_score = 50.0) {
    std::vector<Label> out;
    out.reserve(scores.size());
    for (std::size_t i = 0; i < scores.size(); ++i) {
        const double s = scores[i];
        if (!(s >= 0.0 && s <= max_score))
            throw DataError("score " + std::to_string(s) + " at index " + std::to_string(i) + " outside [0, " +
                            std::to_string(max_score) + "]");
        out.push_back(s >= cutoff ? Label::correct : Label::incorrect);
    }
    return out;
}

} // namespace rehab
