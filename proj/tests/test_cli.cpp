#include <gtest/gtest.h>

#include <sstream>

#include "cli.hpp"
#include "helpers.hpp"

using namespace rehab;
namespace fs = std::filesystem;

namespace {

struct Result {
    int code;
    std::string out, err;
};

Result run_cli(std::vector<std::string> args) {
    std::ostringstream out, err;
    const int code = cli::run(std::move(args), out, err);
    return {code, out.str(), err.str()};
}

void write_json(const fs::path& p, const json& j) { write_text_file(p, j.dump(2) + "\n"); }

// Small synthetic dataset (two exercises) generated through the CLI.
fs::path generated_manifest(const fs::path& root) {
    write_json(root / "gen.json", {{"n_correct", 24}, {"n_incorrect", 12}, {"exercises", {"a", "b"}}});
    const auto r = run_cli({"generate", "--spec", (root / "gen.json").string(), "--out", (root / "data").string()});
    EXPECT_EQ(r.code, 0) << r.err;
    return root / "data" / "manifest.json";
}

json small_gmm_sweep() {
    return {{"algorithm", "gmm"},
            {"skeleton_format", "custom"},
            {"train_sizes", {5, 10}},
            {"validation_sizes", {6}},
            {"repeats", 2},
            {"base_seed", 5},
            {"preprocess", {{"target_length", 24}}},
            {"gmm", {{"components", 3}}}};
}

} // namespace

TEST(Cli, SweepHappyPathAndResolvedConfigReproduces) {
    const auto root = testing_support::scratch_dir("cli_sweep");
    const auto manifest = generated_manifest(root);
    write_json(root / "sweep.json", small_gmm_sweep());
    auto r = run_cli({"sweep", "--spec", (root / "sweep.json").string(), "--data", manifest.string(), "--out",
                      (root / "first").string(), "--jobs", "2"});
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"report.csv", "summary.md", "learning_curve_gmm_custom.svg", "resolved_config.json"})
        EXPECT_TRUE(fs::exists(root / "first" / f)) << f;
    EXPECT_EQ(load_report_table(root / "first" / "report.csv").size(), 8u);

    const auto resolved = json::parse(read_text_file(root / "first" / "resolved_config.json"));
    EXPECT_EQ(resolved.at("base_seed"), 5);
    EXPECT_EQ(resolved.at("gmm").at("max_iterations"), GmmFitConfig{}.max_iterations);
    r = run_cli({"sweep", "--spec", (root / "first" / "resolved_config.json").string(), "--data", manifest.string(),
                 "--out", (root / "second").string(), "--jobs", "1"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_text_file(root / "second" / "report.csv"), read_text_file(root / "first" / "report.csv"));

    // Seed override changes the run and is logged.
    r = run_cli({"sweep", "--spec", (root / "sweep.json").string(), "--data", manifest.string(), "--out",
                 (root / "third").string(), "--seed", "6"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(json::parse(read_text_file(root / "third" / "resolved_config.json")).at("base_seed"), 6);

    r = run_cli({"report", "--data", (root / "first" / "report.csv").string(), "--out", (root / "again").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_text_file(root / "again" / "report.csv"), read_text_file(root / "first" / "report.csv"));
}

TEST(Cli, CacheDoesNotChangeResults) {
    const auto root = testing_support::scratch_dir("cli_cache");
    const auto manifest = generated_manifest(root);
    write_json(root / "sweep.json", small_gmm_sweep());
    const auto cache = root / "cache";
    ::setenv("REHAB_ASSESS_CACHE", cache.c_str(), 1);
    for (const char* name : {"cold", "warm"}) {
        const auto r = run_cli({"sweep", "--spec", (root / "sweep.json").string(), "--data", manifest.string(), "--out",
                                (root / name).string()});
        ASSERT_EQ(r.code, 0) << r.err;
    }
    ::unsetenv("REHAB_ASSESS_CACHE");
    EXPECT_FALSE(fs::is_empty(cache));
    EXPECT_EQ(read_text_file(root / "warm" / "report.csv"), read_text_file(root / "cold" / "report.csv"));
}

TEST(Cli, TrainAndEvaluate) {
    const auto root = testing_support::scratch_dir("cli_train");
    const auto manifest = generated_manifest(root);
    write_json(root / "train.json", {{"preprocess", {{"target_length", 24}}},
                                     {"gmm", {{"components", 3}}},
                                     {"stgcn", {{"blocks", {{{"in_channels", 3}, {"spatial_channels", 4}, {"out_channels", 4}, {"temporal_kernel", 3}}}},
                                                {"lstm_hidden", 4},
                                                {"epochs", 3}}}});
    for (const char* alg : {"gmm", "stgcn"}) {
        const auto dir = root / alg;
        auto r = run_cli({std::string("train-") + alg, "--spec", (root / "train.json").string(), "--data",
                          manifest.string(), "--out", dir.string()});
        ASSERT_EQ(r.code, 0) << r.err;
        r = run_cli({"evaluate", "--model", (dir / "model.json").string(), "--data", manifest.string(), "--out",
                     (dir / "eval").string()});
        ASSERT_EQ(r.code, 0) << r.err;
        const auto metrics = json::parse(read_text_file(dir / "eval" / "metrics.json"));
        EXPECT_EQ(metrics.at("count"), 72);
        EXPECT_NE(r.out.find("f1 "), std::string::npos);
    }
}

TEST(Cli, UsageErrorsExitOneWithUsage) {
    auto r = run_cli({"sweep", "--bogus"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
    r = run_cli({});
    EXPECT_EQ(r.code, 1);
    r = run_cli({"sweep", "--format", "vicon"});
    EXPECT_EQ(r.code, 1);
    r = run_cli({"--help"});
    EXPECT_EQ(r.code, 0);
    r = run_cli({"train-gmm", "--out", "/tmp/x"});
    EXPECT_EQ(r.code, 1);
}

TEST(Cli, DataErrorsExitTwo) {
    const auto root = testing_support::scratch_dir("cli_errors");
    auto r = run_cli({"train-gmm", "--data", (root / "missing.json").string(), "--out", (root / "o").string()});
    EXPECT_EQ(r.code, 2);
    write_text_file(root / "bad.json", R"(["seq.json"])");
    write_text_file(root / "seq.json", R"({"format": "kinect_v2"})");
    r = run_cli({"train-gmm", "--data", (root / "bad.json").string(), "--out", (root / "o").string()});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("exercise_id"), std::string::npos) << r.err;
}

TEST(Cli, NumericalFailureExitsThree) {
    const auto root = testing_support::scratch_dir("cli_numerical");
    const auto manifest = generated_manifest(root);
    write_json(root / "train.json", {{"preprocess", {{"target_length", 24}}}, {"gmm", {{"components", 2}}}});
    auto r = run_cli({"train-gmm", "--spec", (root / "train.json").string(), "--data", manifest.string(), "--out",
                      (root / "m").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    auto model = json::parse(read_text_file(root / "m" / "model.json"));
    for (auto& row : model["models"]["a"]["model"]["components"][0]["covariance"])
        for (auto& v : row) v = -v.get<double>();
    write_json(root / "broken.json", model);
    r = run_cli({"evaluate", "--model", (root / "broken.json").string(), "--data", manifest.string(), "--out",
                 (root / "e").string()});
    EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, AgreementMatchesLibrary) {
    const auto root = testing_support::scratch_dir("cli_agreement");
    Rng rng(3);
    std::vector<MotionSequence> seqs;
    std::vector<Label> a, b;
    RatingTable<Label> table;
    for (int i = 0; i < 30; ++i) {
        auto s = testing_support::random_sequence(rng, builtin_graph(SkeletonFormat::kinect_v2), 3);
        const Label la = rng.uniform() < 0.6 ? Label::correct : Label::incorrect;
        const Label lb = rng.uniform() < 0.8 ? la : (la == Label::correct ? Label::incorrect : Label::correct);
        s.annotations = {la, lb};
        a.push_back(la);
        b.push_back(lb);
        table.push_back({la, lb});
        seqs.push_back(s);
    }
    write_dataset(root / "data", seqs);
    const auto r = run_cli({"agreement", "--data", (root / "data" / "manifest.json").string(), "--out",
                            (root / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("kappa " + detail::format_real(cohens_kappa(a, b)) + "\n"), std::string::npos) << r.out;
    EXPECT_NE(r.out.find("alpha " + detail::format_real(krippendorff_alpha(table)) + "\n"), std::string::npos) << r.out;
    const auto saved = json::parse(read_text_file(root / "out" / "agreement.json"));
    EXPECT_EQ(saved.at("cohens_kappa").get<double>(), cohens_kappa(a, b));
    EXPECT_EQ(saved.at("krippendorff_alpha").get<double>(), krippendorff_alpha(table));
}

TEST(Cli, IngestRawExport) {
    const auto root = testing_support::scratch_dir("cli_ingest");
    std::string csv;
    for (int t = 0; t < 4; ++t) {
        for (int j = 0; j < 25; ++j) csv += std::to_string(0.01 * (t + j)) + ",0.5,1.5,2,";
        csv += "\n";
    }
    write_text_file(root / "E_ID1.csv", csv);
    const auto r = run_cli({"ingest", "--data", (root / "E_ID1.csv").string(), "--input-format", "kimore_positions",
                            "--exercise", "es1", "--label", "correct", "--out", (root / "out").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto seqs = load_manifest(root / "out" / "manifest.json");
    ASSERT_EQ(seqs.size(), 1u);
    EXPECT_EQ(seqs[0].subject_id, "E_ID1");
    EXPECT_EQ(seqs[0].label, Label::correct);
    EXPECT_EQ(seqs[0].frame_count, 4u);
}
