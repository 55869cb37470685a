#include <gtest/gtest.h>

#include "helpers.hpp"
#include "oracles.hpp"

using namespace rehab;
constexpr Label C = Label::correct;
constexpr Label I = Label::incorrect;

namespace {

std::vector<Label> random_labels(Rng& rng, std::size_t n, double p_correct = 0.5) {
    std::vector<Label> v;
    for (std::size_t i = 0; i < n; ++i) v.push_back(rng.uniform() < p_correct ? C : I);
    return v;
}

} // namespace

TEST(F1, FixedExamples) {
    const std::vector<Label> truth{C, I, C, I, C};
    EXPECT_EQ(f1_score(truth, truth), 1.0);
    // TP=2, FP=1, FN=1.
    EXPECT_DOUBLE_EQ(f1_score(std::vector<Label>{C, C, C, I}, std::vector<Label>{C, C, I, C}), 2.0 / 3.0);
    EXPECT_EQ(f1_score(std::vector<Label>{I, I}, std::vector<Label>{I, I}), 1.0);
    EXPECT_EQ(f1_score(std::vector<Label>{I, I}, std::vector<Label>{C, C}), 0.0);
    EXPECT_THROW(f1_score(std::vector<Label>{C}, std::vector<Label>{C, I}), UsageError);
    EXPECT_THROW(f1_score(std::vector<Label>{}, std::vector<Label>{}), UsageError);
}

TEST(Accuracy, FixedExamples) {
    EXPECT_EQ(accuracy(std::vector<Label>{C, I}, std::vector<Label>{C, I}), 1.0);
    EXPECT_EQ(accuracy(std::vector<Label>{C, I, C, I}, std::vector<Label>{C, I, I, C}), 0.5);
}

TEST(F1, MatchesCountingOracleAndIsPermutationInvariant) {
    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 1 + rng.below(40);
        auto p = random_labels(rng, n, rng.uniform()), t = random_labels(rng, n, rng.uniform());
        EXPECT_EQ(f1_score(p, t), oracle::f1(p, t));
        EXPECT_EQ(accuracy(p, t), oracle::accuracy(p, t));
        std::vector<std::size_t> perm(n);
        std::iota(perm.begin(), perm.end(), 0u);
        rng.shuffle(perm);
        std::vector<Label> pp, tp;
        for (auto k : perm) pp.push_back(p[k]), tp.push_back(t[k]);
        EXPECT_EQ(f1_score(pp, tp), f1_score(p, t));
        EXPECT_EQ(accuracy(pp, tp), accuracy(p, t));
    }
}

TEST(Kappa, FixedExamples) {
    EXPECT_EQ(cohens_kappa(std::vector<Label>{C, I, C}, std::vector<Label>{C, I, C}), 1.0);
    EXPECT_EQ(cohens_kappa(std::vector<Label>{C, C, I, I}, std::vector<Label>{C, I, C, I}), 0.0);
    EXPECT_EQ(cohens_kappa(std::vector<Label>{C, C}, std::vector<Label>{C, C}), 1.0);
    EXPECT_THROW(cohens_kappa(std::vector<Label>{C}, std::vector<Label>{C, C}), UsageError);
}

TEST(Kappa, MatchesContingencyOracleAndIsSymmetric) {
    Rng rng(2);
    for (int i = 0; i < 200; ++i) {
        const std::size_t n = 1 + rng.below(60);
        const auto a = random_labels(rng, n, rng.uniform()), b = random_labels(rng, n, rng.uniform());
        EXPECT_NEAR(cohens_kappa(a, b), oracle::kappa(a, b), 1e-12);
        EXPECT_EQ(cohens_kappa(a, b), cohens_kappa(b, a));
    }
}

TEST(Alpha, FixedExamples) {
    RatingTable<Label> unanimous{{C, C}, {I, I}, {C, C}};
    EXPECT_EQ(krippendorff_alpha(unanimous), 1.0);

    // (C,C),(I,I) against (C,I),(I,C): pooled into one table of four units.
    RatingTable<Label> mixed{{C, C}, {I, I}, {C, I}, {I, C}};
    std::vector<std::vector<std::optional<int>>> as_int{{1, 1}, {0, 0}, {1, 0}, {0, 1}};
    EXPECT_NEAR(krippendorff_alpha(mixed), oracle::alpha(as_int), 1e-12);
    // n = 8, four disagreeing ordered pairs, n_C = n_I = 4: 1 - 7 * 4 / 32.
    EXPECT_NEAR(krippendorff_alpha(mixed), 1.0 - 7.0 * 4.0 / 32.0, 1e-12);

    EXPECT_THROW(krippendorff_alpha(RatingTable<Label>{{C, C}, {C, C}}), UsageError);
    EXPECT_THROW(krippendorff_alpha(RatingTable<Label>{{C}, {I}}), UsageError);
    EXPECT_THROW(krippendorff_alpha(RatingTable<Label>{{C, I}}), UsageError);
}

TEST(Alpha, MatchesPairwiseOracleWithMissingData) {
    Rng rng(3);
    int checked = 0;
    for (int i = 0; checked < 200; ++i) {
        const std::size_t items = 2 + rng.below(30), raters = 2 + rng.below(4), cats = 2 + rng.below(3);
        RatingTable<int> table(items);
        std::vector<std::vector<std::optional<int>>> plain(items);
        for (std::size_t u = 0; u < items; ++u)
            for (std::size_t r = 0; r < raters; ++r) {
                std::optional<int> v;
                if (rng.uniform() > 0.2) v = static_cast<int>(rng.below(cats));
                table[u].push_back(v);
                plain[u].push_back(v);
            }
        double value = 0.0;
        try {
            value = krippendorff_alpha(table);
        } catch (const UsageError&) {
            continue;
        }
        EXPECT_NEAR(value, oracle::alpha(plain), 1e-12);

        // Relabelling the categories leaves alpha unchanged.
        RatingTable<int> relabelled = table;
        for (auto& row : relabelled)
            for (auto& v : row)
                if (v) v = 10 - 3 * *v;
        EXPECT_NEAR(krippendorff_alpha(relabelled), value, 1e-12);
        ++checked;
    }
}

TEST(Merge, Policies) {
    EXPECT_EQ(merge_annotations({{C, C}}, MergePolicy::unanimous_correct), std::vector<Label>{C});
    EXPECT_EQ(merge_annotations({{C, C}}, MergePolicy::majority), std::vector<Label>{C});
    EXPECT_EQ(merge_annotations({{C, I}}, MergePolicy::unanimous_correct), std::vector<Label>{I});
    EXPECT_EQ(merge_annotations({{C, I}}, MergePolicy::majority), std::vector<Label>{I});
    EXPECT_EQ(merge_annotations({{C, I, C}}, MergePolicy::majority), std::vector<Label>{C});
    EXPECT_THROW(merge_annotations({{C}, {}}, MergePolicy::majority), DataError);
}

TEST(Merge, UnanimousEqualsLogicalAnd) {
    Rng rng(4);
    std::vector<std::vector<Label>> pairs;
    for (int i = 0; i < 100; ++i) pairs.push_back(random_labels(rng, 2));
    const auto merged = merge_annotations(pairs, MergePolicy::unanimous_correct);
    for (std::size_t i = 0; i < pairs.size(); ++i)
        EXPECT_EQ(merged[i] == C, pairs[i][0] == C && pairs[i][1] == C);
}

TEST(Kimore, Binarization) {
    const std::vector<double> scores{50.0, 25.0, 24.999, 0.0};
    EXPECT_EQ(binarize_kimore_scores(scores, 25.0), (std::vector<Label>{C, C, I, I}));
    EXPECT_EQ(binarize_kimore_scores(std::vector<double>{50.0}, 50.0), std::vector<Label>{C});
    EXPECT_THROW(binarize_kimore_scores(std::vector<double>{50.5}, 25.0), DataError);
    EXPECT_THROW(binarize_kimore_scores(std::vector<double>{-1.0}, 25.0), DataError);
}

TEST(Kimore, MedianCutoffBalancesLabels) {
    Rng rng(5);
    for (int trial = 0; trial < 20; ++trial) {
        const std::size_t n = 10 + rng.below(90);
        std::vector<double> scores;
        for (std::size_t i = 0; i < n; ++i) scores.push_back(rng.uniform(0.0, 50.0));
        auto sorted = scores;
        std::sort(sorted.begin(), sorted.end());
        const double median = n % 2 ? sorted[n / 2] : 0.5 * (sorted[n / 2 - 1] + sorted[n / 2]);
        const auto labels = binarize_kimore_scores(scores, median);
        const auto correct = static_cast<long>(std::count(labels.begin(), labels.end(), C));
        EXPECT_LE(std::abs(2 * correct - static_cast<long>(n)), 2);
    }
}
