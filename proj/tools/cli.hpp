#pragma once

// rehab_assess command-line front end. Kept out of include/ because it pulls
// in CLI11; main() is a one-line wrapper around run().

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <CLI11.hpp>

#include "rehab/rehab.hpp"

namespace rehab::cli {

namespace fs = std::filesystem;

struct Options {
    std::string command;
    std::vector<std::string> data;
    std::string spec;
    std::string out;
    std::optional<std::uint64_t> seed;
    std::size_t jobs = std::max(1u, std::thread::hardware_concurrency());
    std::optional<std::string> format;
    std::optional<std::string> algorithm;
    bool verbose = false;

    std::string model;
    std::optional<std::string> input_format;
    std::optional<std::string> exercise;
    std::optional<std::string> subject;
    std::optional<std::string> label;
    std::optional<double> frame_rate;
};

// ---- shared plumbing -------------------------------------------------------

struct LabelPolicy {
    MergePolicy merge = MergePolicy::unanimous_correct;
    double score_max = 50.0;
    double score_cutoff = 25.0;
};

inline LabelPolicy label_policy_from_json(const json& j) {
    LabelPolicy p;
    const auto merge = j.value("merge_policy", std::string("unanimous_correct"));
    if (merge == "majority")
        p.merge = MergePolicy::majority;
    else if (merge != "unanimous_correct")
        throw ParseError("merge_policy", "expected 'unanimous_correct' or 'majority'");
    p.score_max = j.value("score_max", p.score_max);
    p.score_cutoff = j.value("score_cutoff", p.score_max / 2.0);
    return p;
}

inline json label_policy_to_json(const LabelPolicy& p) {
    return {{"merge_policy", p.merge == MergePolicy::majority ? "majority" : "unanimous_correct"},
            {"score_max", p.score_max},
            {"score_cutoff", p.score_cutoff}};
}

inline std::vector<Label> annotation_labels(const MotionSequence& s, const LabelPolicy& p) {
    std::vector<Label> out;
    for (const auto& a : s.annotations) {
        if (const auto* l = std::get_if<Label>(&a)) {
            out.push_back(*l);
        } else {
            const double score = std::get<double>(a);
            out.push_back(binarize_kimore_scores(std::span<const double>(&score, 1), p.score_cutoff, p.score_max).front());
        }
    }
    return out;
}

// Sequences without an explicit label get the merge of their annotations.
inline void resolve_label(MotionSequence& s, const LabelPolicy& p) {
    if (s.label || s.annotations.empty()) return;
    s.label = merge_annotations({annotation_labels(s, p)}, p.merge).front();
}

inline json read_json_file(const fs::path& path) {
    try {
        return json::parse(read_text_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError(path.string(), e.what());
    }
}

inline json load_spec(const Options& o) {
    if (o.spec.empty()) return json::object();
    json j = read_json_file(o.spec);
    if (!j.is_object()) throw ParseError(o.spec, "expected a JSON object");
    return j;
}

inline void write_resolved(const Options& o, json resolved) {
    resolved["command"] = o.command;
    write_text_file(fs::path(o.out) / "resolved_config.json", resolved.dump(2) + "\n");
}

inline void require_exists(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError(what + " is required");
    if (!fs::exists(path)) throw IoError(what + " '" + path + "' does not exist");
}

inline void prepare_out(const Options& o, bool required = true) {
    if (o.out.empty()) {
        if (required) throw UsageError("--out is required");
        return;
    }
    std::error_code ec;
    fs::create_directories(o.out, ec);
    if (ec || !fs::is_directory(o.out)) throw IoError("cannot create output directory '" + o.out + "'");
}

inline std::optional<SkeletonFormat> format_flag(const Options& o) {
    if (!o.format) return std::nullopt;
    return *parse_skeleton_format(*o.format);
}

struct Item {
    MotionSequence seq;
    std::string split;
};

/// Loads every manifest entry, preprocesses it (through the on-disk cache
/// named by REHAB_ASSESS_CACHE when set) and resolves labels.
inline std::vector<Item> load_items(const std::string& manifest, const PreprocessConfig& pre, const LabelPolicy& policy,
                                    std::optional<SkeletonFormat> only, bool verbose) {
    const auto entries = parse_manifest(read_text_file(manifest), fs::path(manifest).parent_path());
    const char* cache_env = std::getenv("REHAB_ASSESS_CACHE");
    const std::optional<fs::path> cache = cache_env && *cache_env ? std::optional<fs::path>(cache_env) : std::nullopt;
    if (cache) fs::create_directories(*cache);
    const std::string pre_key = preprocess_config_to_json(pre).dump();
    std::size_t hits = 0;

    std::vector<Item> items;
    for (const auto& e : entries) {
        const std::string content = read_text_file(e.path);
        MotionSequence s;
        std::optional<fs::path> cached;
        if (cache) {
            char name[48];
            std::snprintf(name, sizeof name, "%016llx.json",
                          static_cast<unsigned long long>(mix_seed(fnv1a(content), pre_key)));
            cached = *cache / name;
        }
        if (cached && fs::exists(*cached)) {
            s = sequence_from_json(read_json_file(*cached));
            ++hits;
        } else {
            try {
                s = parse_sequence_file(content, InputFormat::canonical);
            } catch (const ParseError& err) {
                throw ParseError(err.field(), std::string(err.what()) + " (in " + e.path.string() + ")");
            }
            if (only && s.format() != *only) continue;
            s = preprocess(s, pre);
            if (cached) write_text_file(*cached, serialize_sequence(s));
        }
        if (only && s.format() != *only) continue;
        resolve_label(s, policy);
        items.push_back({std::move(s), e.split});
    }
    if (verbose && cache) std::cerr << "cache: " << hits << " of " << items.size() << " sequences reused\n";
    return items;
}

inline SkeletonFormat common_format(const std::vector<Item>& items) {
    if (items.empty()) throw DataError("no sequences to work on");
    const auto f = items.front().seq.format();
    for (const auto& it : items)
        if (it.seq.format() != f) throw DataError("mixed skeleton formats in the data; select one with --format");
    return f;
}

inline std::map<std::string, std::vector<const Item*>> by_exercise(const std::vector<Item>& items) {
    std::map<std::string, std::vector<const Item*>> out;
    for (const auto& it : items) out[it.seq.exercise_id].push_back(&it);
    return out;
}

inline const Label& require_label(const MotionSequence& s) {
    if (!s.label) throw DataError("sequence of subject '" + s.subject_id + "' (" + s.exercise_id + ") has no label");
    return *s.label;
}

inline std::string fmt_real(double v) { return detail::format_real(v); }

// ---- subcommands -----------------------------------------------------------

inline int cmd_ingest(const Options& o, std::ostream& out) {
    if (o.data.empty()) throw UsageError("ingest needs at least one --data file");
    for (const auto& d : o.data) require_exists(d, "--data");
    prepare_out(o);
    json j = load_spec(o);
    if (o.input_format) j["input_format"] = *o.input_format;
    if (o.format) j["format"] = *o.format;
    if (o.exercise) j["exercise_id"] = *o.exercise;
    if (o.subject) j["subject_id"] = *o.subject;
    if (o.label) j["label"] = *o.label;
    if (o.frame_rate) j["frame_rate"] = *o.frame_rate;

    const auto input_name = j.value("input_format", std::string("canonical"));
    const auto input = parse_input_format(input_name);
    if (!input) throw UsageError("unknown input format '" + input_name + "'");
    ParseOptions opts;
    const auto fmt = parse_skeleton_format(j.value("format", std::string("kinect_v2")));
    if (!fmt) throw ParseError("format", "unknown skeleton format");
    opts.format = *fmt;
    opts.exercise_id = j.value("exercise_id", std::string("exercise"));
    opts.frame_rate = j.value("frame_rate", opts.frame_rate);
    opts.impute_missing = j.value("impute_missing", true);
    if (j.contains("label")) {
        opts.label = parse_label(j.at("label").get<std::string>());
        if (!opts.label) throw UsageError("label must be 'correct' or 'incorrect'");
    }

    std::vector<MotionSequence> seqs;
    for (const auto& path : o.data) {
        opts.subject_id = j.value("subject_id", fs::path(path).stem().string());
        try {
            seqs.push_back(parse_sequence_file(read_text_file(path), *input, opts));
        } catch (const ParseError& e) {
            throw ParseError(e.field(), std::string(e.what()) + " (in " + path + ")");
        }
        if (o.verbose) std::cerr << "ingested " << path << ": " << seqs.back().frame_count << " frames\n";
    }
    write_dataset(o.out, seqs);
    json resolved = {{"input_format", input_name},
                     {"format", std::string(to_string(opts.format))},
                     {"exercise_id", opts.exercise_id},
                     {"frame_rate", opts.frame_rate},
                     {"impute_missing", opts.impute_missing},
                     {"data", o.data}};
    if (j.contains("subject_id")) resolved["subject_id"] = j.at("subject_id");
    if (opts.label) resolved["label"] = std::string(to_string(*opts.label));
    write_resolved(o, resolved);
    out << "wrote " << seqs.size() << " sequences to " << (fs::path(o.out) / "manifest.json").string() << '\n';
    return 0;
}

inline int cmd_generate(const Options& o, std::ostream& out) {
    if (!o.spec.empty()) require_exists(o.spec, "--spec");
    prepare_out(o);
    json j = load_spec(o);
    json syn = j.value("synthetic", json::object());
    if (o.seed) syn["seed"] = *o.seed;
    if (o.format) {
        if (*o.format == "custom") throw UsageError("--format custom needs a skeleton in the spec's synthetic.graph");
        syn["graph"] = {{"format", *o.format}};
    }
    const auto spec = synthetic_spec_from_json(syn);
    const auto n_correct = j.value("n_correct", std::size_t{60});
    const auto n_incorrect = j.value("n_incorrect", std::size_t{60});
    const auto exercises = j.value("exercises", std::vector<std::string>{"exercise_1"});
    if (spec.is_degenerate()) std::cerr << "warning: correct and incorrect executions are identical under this spec\n";

    const auto seqs = generate_dataset(spec, n_correct, n_incorrect, exercises);
    write_dataset(o.out, seqs);
    write_resolved(o, {{"synthetic", synthetic_spec_to_json(spec)},
                       {"n_correct", n_correct},
                       {"n_incorrect", n_incorrect},
                       {"exercises", exercises}});
    out << "wrote " << seqs.size() << " sequences to " << (fs::path(o.out) / "manifest.json").string() << '\n';
    return 0;
}

// The STGCN input geometry follows the data unless the spec pins it.
inline void default_stgcn_geometry(json& j, std::size_t target_length) {
    if (!j.contains("stgcn")) j["stgcn"] = json::object();
    if (!j["stgcn"].contains("input_length")) j["stgcn"]["input_length"] = target_length;
}

inline int cmd_train(const Options& o, std::ostream& out, Algorithm algorithm) {
    if (o.data.size() != 1) throw UsageError("exactly one --data manifest is required");
    require_exists(o.data.front(), "--data");
    if (!o.spec.empty()) require_exists(o.spec, "--spec");
    prepare_out(o);
    json j = load_spec(o);
    const auto pre = preprocess_config_from_json(j.value("preprocess", json::object()));
    const auto policy = label_policy_from_json(j);
    const auto items = load_items(o.data.front(), pre, policy, format_flag(o), o.verbose);
    const auto format = common_format(items);

    json models = json::object();
    json resolved = {{"preprocess", preprocess_config_to_json(pre)}, {"data", o.data.front()}};
    resolved.update(label_policy_to_json(policy));
    if (algorithm == Algorithm::gmm) {
        auto cfg = gmm_fit_config_from_json(j.value("gmm", json::object()));
        if (o.seed) cfg.seed = *o.seed;
        resolved["gmm"] = gmm_fit_config_to_json(cfg);
        for (const auto& [ex, group] : by_exercise(items)) {
            std::vector<MotionSequence> train, validation, fallback;
            for (const auto* it : group) {
                if (it->split == "test") continue;
                const Label l = require_label(it->seq);
                if (it->split == "validation") {
                    validation.push_back(it->seq);
                } else {
                    fallback.push_back(it->seq);
                    if (l == Label::correct) train.push_back(it->seq);
                }
            }
            // Without explicit validation entries the threshold is calibrated
            // on the whole training pool, incorrect executions included.
            const auto& calib = validation.empty() ? fallback : validation;
            const auto c = calibrate_threshold(fit_gmm(train, cfg), calib);
            if (o.verbose)
                std::cerr << ex << ": " << train.size() << " correct training items, threshold " << c.threshold
                          << ", validation F1 " << c.validation_f1 << '\n';
            models[ex] = classifier_to_json(c);
        }
    } else {
        default_stgcn_geometry(j, pre.target_length);
        auto cfg = stgcn_config_from_json(j.at("stgcn"));
        if (o.seed) cfg.seed = *o.seed;
        const auto& graph = items.front().seq.graph;
        cfg.blocks.front().in_channels = items.front().seq.dims();
        cfg.validate();
        resolved["stgcn"] = stgcn_config_to_json(cfg);
        for (const auto& [ex, group] : by_exercise(items)) {
            std::vector<MotionSequence> train;
            for (const auto* it : group)
                if (it->split != "test" && it->split != "validation") {
                    require_label(it->seq);
                    train.push_back(it->seq);
                }
            const auto model = train_stgcn(cfg, graph, train);
            if (o.verbose && !model.training_history().empty())
                std::cerr << ex << ": final training loss " << model.training_history().back().loss << ", accuracy "
                          << model.training_history().back().accuracy << '\n';
            models[ex] = stgcn_to_json(model);
        }
    }
    const json doc = {{"kind", std::string(to_string(algorithm))},
                      {"format", std::string(to_string(format))},
                      {"preprocess", preprocess_config_to_json(pre)},
                      {"models", models}};
    write_text_file(fs::path(o.out) / "model.json", doc.dump() + "\n");
    write_resolved(o, resolved);
    out << "trained " << models.size() << " " << to_string(algorithm) << " model(s); wrote "
        << (fs::path(o.out) / "model.json").string() << '\n';
    return 0;
}

inline int cmd_evaluate(const Options& o, std::ostream& out) {
    if (o.data.size() != 1) throw UsageError("exactly one --data manifest is required");
    require_exists(o.data.front(), "--data");
    require_exists(o.model, "--model");
    prepare_out(o);
    const json doc = read_json_file(o.model);
    json j = load_spec(o);
    const auto policy = label_policy_from_json(j);
    std::optional<Algorithm> kind;
    PreprocessConfig pre;
    std::optional<SkeletonFormat> format;
    try {
        kind = parse_algorithm(doc.at("kind").get<std::string>());
        pre = preprocess_config_from_json(doc.at("preprocess"));
        format = parse_skeleton_format(doc.at("format").get<std::string>());
    } catch (const json::exception& e) {
        throw ParseError("model", e.what());
    }
    if (!kind || !format) throw ParseError("model", "unknown model kind or skeleton format");

    std::map<std::string, GmmClassifier> gmms;
    std::map<std::string, StgcnModel> nets;
    for (const auto& [ex, m] : doc.at("models").items()) {
        if (*kind == Algorithm::gmm)
            gmms.emplace(ex, classifier_from_json(m));
        else
            nets.emplace(ex, stgcn_from_json(m));
    }

    const auto items = load_items(o.data.front(), pre, policy, format, o.verbose);
    const bool has_test = std::any_of(items.begin(), items.end(), [](const Item& it) { return it.split == "test"; });
    std::vector<Label> pred, truth;
    std::string table = "exercise_id,subject_id,truth,prediction,score\n";
    for (const auto& it : items) {
        if (has_test && it.split != "test") continue;
        const auto& s = it.seq;
        double value = 0.0;
        Label p;
        if (*kind == Algorithm::gmm) {
            const auto found = gmms.find(s.exercise_id);
            if (found == gmms.end()) throw DataError("model has no classifier for exercise '" + s.exercise_id + "'");
            value = score(found->second.model, s);
            p = classify_score(value, found->second.threshold);
        } else {
            const auto found = nets.find(s.exercise_id);
            if (found == nets.end()) throw DataError("model has no network for exercise '" + s.exercise_id + "'");
            value = found->second.forward(s);
            p = value >= 0.5 ? Label::correct : Label::incorrect;
        }
        pred.push_back(p);
        truth.push_back(require_label(s));
        table += detail::csv_field(s.exercise_id) + ',' + detail::csv_field(s.subject_id) + ',' +
                 std::string(to_string(truth.back())) + ',' + std::string(to_string(p)) + ',' + fmt_real(value) + '\n';
    }
    if (pred.empty()) throw DataError("no sequences to evaluate");
    const auto counts = confusion(pred, truth);
    write_text_file(fs::path(o.out) / "predictions.csv", table);
    const json metrics = {{"f1", counts.f1()}, {"accuracy", counts.accuracy()}, {"count", pred.size()},
                          {"tp", counts.tp},   {"fp", counts.fp},             {"fn", counts.fn},
                          {"tn", counts.tn}};
    write_text_file(fs::path(o.out) / "metrics.json", metrics.dump(2) + "\n");
    json resolved = {{"data", o.data.front()}, {"model", o.model}};
    resolved.update(label_policy_to_json(policy));
    write_resolved(o, resolved);
    out << "f1 " << fmt_real(counts.f1()) << "\naccuracy " << fmt_real(counts.accuracy()) << '\n';
    return 0;
}

inline int cmd_sweep(const Options& o, std::ostream& out) {
    if (o.data.size() != 1) throw UsageError("exactly one --data manifest is required");
    require_exists(o.data.front(), "--data");
    require_exists(o.spec, "--spec");
    prepare_out(o);
    json j = load_spec(o);
    if (o.seed) j["base_seed"] = *o.seed;
    if (o.format) j["skeleton_format"] = *o.format;
    if (o.algorithm) {
        if (j.value("algorithm", std::string("gmm")) != *o.algorithm) j.erase("validation_sizes");
        j["algorithm"] = *o.algorithm;
    }
    if (j.value("algorithm", std::string("gmm")) == "stgcn")
        default_stgcn_geometry(j, j.value("preprocess", json::object()).value("target_length", PreprocessConfig{}.target_length));
    auto spec = sweep_spec_from_json(j);
    const auto policy = label_policy_from_json(j);

    auto items = load_items(o.data.front(), spec.preprocess, policy, spec.skeleton_format, o.verbose);
    if (items.empty())
        throw DataError("no sequences in format '" + std::string(to_string(spec.skeleton_format)) + "'");
    if (spec.algorithm == Algorithm::stgcn) spec.stgcn.blocks.front().in_channels = items.front().seq.dims();
    std::vector<MotionSequence> dataset;
    dataset.reserve(items.size());
    for (auto& it : items) dataset.push_back(std::move(it.seq));

    SweepOptions opts;
    opts.jobs = o.jobs;
    opts.inputs_preprocessed = true;
    if (o.verbose)
        opts.on_cell = [](const ReportRow& r, double seconds) {
            std::fprintf(stderr, "%s train=%zu validation=%zu repeat=%zu f1=%.4f accuracy=%.4f (%.1f s) %s\n",
                         r.exercise_id.c_str(), r.train_size, r.validation_size, r.repeat_index, r.f1, r.accuracy,
                         seconds, r.status.c_str());
        };
    const auto report = run_sweep(dataset, spec, opts);
    emit_report(report, o.out);

    json resolved = sweep_spec_to_json(spec);
    resolved.update(label_policy_to_json(policy));
    resolved["data"] = o.data.front();
    resolved["jobs"] = o.jobs;
    write_resolved(o, resolved);
    const auto failed = std::count_if(report.rows.begin(), report.rows.end(), [](const ReportRow& r) { return !r.ok(); });
    out << report.rows.size() << " cells (" << failed << " failed); report in " << o.out << '\n';
    for (const auto& a : report.aggregates)
        out << to_string(a.algorithm) << ' ' << to_string(a.skeleton_format) << " train=" << a.train_size
            << " validation=" << a.validation_size << " f1=" << fmt_real(a.f1_mean) << " accuracy=" << fmt_real(a.accuracy_mean)
            << '\n';
    return 0;
}

inline int cmd_report(const Options& o, std::ostream& out) {
    if (o.data.size() != 1) throw UsageError("exactly one --data report table is required");
    require_exists(o.data.front(), "--data");
    prepare_out(o);
    EvaluationReport report;
    report.rows = load_report_table(o.data.front());
    report.aggregates = compute_aggregates(report.rows);
    emit_report(report, o.out);
    write_resolved(o, {{"data", o.data.front()}});
    out << "re-emitted " << report.rows.size() << " rows into " << o.out << '\n';
    return 0;
}

inline int cmd_agreement(const Options& o, std::ostream& out) {
    if (o.data.size() != 1) throw UsageError("exactly one --data manifest is required");
    require_exists(o.data.front(), "--data");
    prepare_out(o, false);
    json j = load_spec(o);
    const auto policy = label_policy_from_json(j);
    const auto entries = parse_manifest(read_text_file(o.data.front()), fs::path(o.data.front()).parent_path());

    RatingTable<Label> table;
    std::vector<Label> a, b;
    bool pairwise = true;
    for (const auto& e : entries) {
        const auto s = load_sequence(e.path);
        if (s.annotations.empty()) continue;
        const auto labels = annotation_labels(s, policy);
        std::vector<std::optional<Label>> row(labels.begin(), labels.end());
        table.push_back(std::move(row));
        if (labels.size() == 2) {
            a.push_back(labels[0]);
            b.push_back(labels[1]);
        } else {
            pairwise = false;
        }
    }
    if (table.empty()) throw DataError("no annotated sequences in the manifest");
    json result = {{"items", table.size()}};
    out << "items " << table.size() << '\n';
    if (pairwise) {
        const double kappa = cohens_kappa(a, b);
        result["cohens_kappa"] = kappa;
        out << "kappa " << fmt_real(kappa) << '\n';
    } else {
        out << "kappa n/a (needs exactly two annotations per sequence)\n";
    }
    const double alpha = krippendorff_alpha(table);
    result["krippendorff_alpha"] = alpha;
    out << "alpha " << fmt_real(alpha) << '\n';
    if (!o.out.empty()) {
        write_text_file(fs::path(o.out) / "agreement.json", result.dump(2) + "\n");
        json resolved = {{"data", o.data.front()}};
        resolved.update(label_policy_to_json(policy));
        write_resolved(o, resolved);
    }
    return 0;
}

// ---- entry point -----------------------------------------------------------

inline int dispatch(const Options& o, std::ostream& out) {
    if (o.command == "ingest") return cmd_ingest(o, out);
    if (o.command == "generate") return cmd_generate(o, out);
    if (o.command == "train-gmm") return cmd_train(o, out, Algorithm::gmm);
    if (o.command == "train-stgcn") return cmd_train(o, out, Algorithm::stgcn);
    if (o.command == "evaluate") return cmd_evaluate(o, out);
    if (o.command == "sweep") return cmd_sweep(o, out);
    if (o.command == "report") return cmd_report(o, out);
    if (o.command == "agreement") return cmd_agreement(o, out);
    throw UsageError("unknown subcommand '" + o.command + "'");
}

/// Exit codes: 0 success, 1 usage or configuration error, 2 data, schema or
/// I/O error, 3 numerical failure.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Skeleton-based rehabilitation exercise assessment (GMM and STGCN)", "rehab_assess"};
    app.require_subcommand(1, 1);
    Options o;

    struct Sub {
        const char* name;
        const char* help;
    };
    const Sub subs[] = {
        {"ingest", "Convert raw skeleton exports into canonical sequence documents and a manifest"},
        {"generate", "Write a labeled synthetic dataset"},
        {"train-gmm", "Fit one GMM classifier per exercise"},
        {"train-stgcn", "Train one STGCN classifier per exercise"},
        {"evaluate", "Score a dataset with a trained model"},
        {"sweep", "Run a training-size / validation-size learning-curve sweep"},
        {"report", "Re-emit plots and summary from a report table"},
        {"agreement", "Inter-annotator agreement (Cohen's kappa, Krippendorff's alpha)"},
    };
    const std::vector<std::string> formats{"kinect_v2", "openpose", "blazepose", "custom"};
    for (const auto& sub : subs) {
        auto* s = app.add_subcommand(sub.name, sub.help);
        s->add_option("--data", o.data, "Input manifest (or raw files for ingest, report table for report)");
        s->add_option("--spec", o.spec, "JSON configuration file");
        s->add_option("--out", o.out, "Output directory");
        s->add_option("--seed", o.seed, "Seed override");
        s->add_option("--jobs", o.jobs, "Worker threads for sweeps")->check(CLI::PositiveNumber);
        s->add_option("--format", o.format, "Skeleton format")->check(CLI::IsMember(formats));
        s->add_option("--algorithm", o.algorithm, "Algorithm")->check(CLI::IsMember({"gmm", "stgcn"}));
        s->add_flag("--verbose", o.verbose, "Log progress to stderr");
        if (std::string(sub.name) == "evaluate") s->add_option("--model", o.model, "Model file from train-gmm/train-stgcn");
        if (std::string(sub.name) == "ingest") {
            s->add_option("--input-format", o.input_format, "canonical, kimore_positions or timestamped_table");
            s->add_option("--exercise", o.exercise, "Exercise id");
            s->add_option("--subject", o.subject, "Subject id (default: file stem)");
            s->add_option("--label", o.label, "correct or incorrect");
            s->add_option("--frame-rate", o.frame_rate, "Frame rate of untimed exports");
        }
        s->callback([&o, s] { o.command = s->get_name(); });
    }

    std::vector<std::string> reversed(args.rbegin(), args.rend());
    try {
        app.parse(std::move(reversed));
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return 0;
    } catch (const CLI::CallForAllHelp&) {
        out << app.help("", CLI::AppFormatMode::All);
        return 0;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return 1;
    }

    try {
        return dispatch(o, out);
    } catch (const UsageError& e) {
        err << "usage error: " << e.what() << "\n\n" << app.help();
        return 1;
    } catch (const ConfigError& e) {
        err << "configuration error: " << e.what() << '\n';
        return 1;
    } catch (const NumericalError& e) {
        err << "numerical error: " << e.what() << '\n';
        return 3;
    } catch (const DataError& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const json::exception& e) {
        err << "data error: " << e.what() << '\n';
        return 2;
    } catch (const fs::filesystem_error& e) {
        err << "I/O error: " << e.what() << '\n';
        return 2;
    }
}

} // namespace rehab::cli
