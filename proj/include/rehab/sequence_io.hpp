#pragma once

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rehab/error.hpp"
#include "rehab/motion.hpp"
#include "rehab/skeleton.hpp"

namespace rehab {

using json = nlohmann::json;

/// How to interpret the bytes handed to parse_sequence_file.
enum class InputFormat {
    canonical,        // JSON sequence document
    kimore_positions, // KIMORE joint-position CSV: 25 joints x (x, y, z, state), 30 fps, no timestamps
    timestamped_table // one frame per line: timestamp (s), then J x D coordinates
};

inline std::optional<InputFormat> parse_input_format(std::string_view s) {
    if (s == "canonical") return InputFormat::canonical;
    if (s == "kimore_positions") return InputFormat::kimore_positions;
    if (s == "timestamped_table") return InputFormat::timestamped_table;
    return std::nullopt;
}

/// Options for raw (non-canonical) inputs and for ingestion in general.
struct ParseOptions {
    SkeletonFormat format = SkeletonFormat::kinect_v2;
    std::string exercise_id;
    std::string subject_id;
    std::optional<Label> label;
    double frame_rate = 30.0;
    bool impute_missing = false;
};

// ---- skeleton <-> json ------------------------------------------------------

inline json skeleton_to_json(const SkeletonGraph& g) {
    json edges = json::array();
    for (auto [a, b] : g.edges) edges.push_back({a, b});
    return {{"joint_count", g.joint_count}, {"dimensionality", g.dimensionality}, {"edges", edges},
            {"joint_names", g.joint_names}, {"root_joint", g.root_joint},
            {"torso_lower", g.torso_lower}, {"torso_upper", g.torso_upper}};
}

namespace detail {

template <typename T>
T require(const json& obj, const char* field, const std::string& path_prefix = {}) {
    const std::string name = path_prefix + field;
    if (!obj.contains(field)) throw ParseError(name, "missing");
    try {
        return obj.at(field).get<T>();
    } catch (const json::exception& e) {
        throw ParseError(name, e.what());
    }
}

} // namespace detail

inline SkeletonGraph skeleton_from_json(const json& j, SkeletonFormat format) {
    if (!j.is_object()) throw ParseError("skeleton", "expected an object");
    SkeletonGraph g;
    g.format = format;
    g.joint_count = detail::require<std::size_t>(j, "joint_count", "skeleton.");
    g.dimensionality = detail::require<int>(j, "dimensionality", "skeleton.");
    for (const auto& e : detail::require<std::vector<std::vector<std::size_t>>>(j, "edges", "skeleton.")) {
        if (e.size() != 2) throw ParseError("skeleton.edges", "each edge needs exactly two joint indices");
        g.edges.emplace_back(e[0], e[1]);
    }
    if (j.contains("joint_names")) {
        g.joint_names = detail::require<std::vector<std::string>>(j, "joint_names", "skeleton.");
    } else {
        for (std::size_t i = 0; i < g.joint_count; ++i) g.joint_names.push_back("joint" + std::to_string(i));
    }
    g.root_joint = j.value("root_joint", std::size_t{0});
    g.torso_lower = j.value("torso_lower", std::vector<std::size_t>{g.root_joint});
    if (j.contains("torso_upper")) {
        g.torso_upper = detail::require<std::vector<std::size_t>>(j, "torso_upper", "skeleton.");
    } else if (!g.edges.empty()) {
        const auto [a, b] = g.edges.front();
        g.torso_lower = {a};
        g.torso_upper = {b};
    }
    g.validate();
    return g;
}

// ---- canonical sequence document -------------------------------------------

inline json sequence_to_json(const MotionSequence& s) {
    json doc;
    doc["format"] = std::string(to_string(s.format()));
    if (s.format() == SkeletonFormat::custom) doc["skeleton"] = skeleton_to_json(s.graph);
    doc["exercise_id"] = s.exercise_id;
    doc["subject_id"] = s.subject_id;
    if (s.label) doc["label"] = std::string(to_string(*s.label));
    if (!s.annotations.empty()) {
        json ann = json::array();
        for (const auto& a : s.annotations) {
            if (const auto* l = std::get_if<Label>(&a))
                ann.push_back(std::string(to_string(*l)));
            else
                ann.push_back(std::get<double>(a));
        }
        doc["annotations"] = ann;
    }
    doc["timestamps"] = s.timestamps;
    json frames = json::array();
    for (std::size_t t = 0; t < s.frame_count; ++t) {
        json frame = json::array();
        for (std::size_t jt = 0; jt < s.joint_count(); ++jt) {
            json joint = json::array();
            for (std::size_t d = 0; d < s.dims(); ++d) joint.push_back(s.at(t, jt, d));
            frame.push_back(std::move(joint));
        }
        frames.push_back(std::move(frame));
    }
    doc["frames"] = std::move(frames);
    return doc;
}

inline std::string serialize_sequence(const MotionSequence& s) { return sequence_to_json(s).dump(); }

namespace detail {

inline double coordinate_value(const json& v, const std::string& field) {
    if (v.is_number()) return v.get<double>();
    if (v.is_null()) return std::numeric_limits<double>::quiet_NaN();
    throw ParseError(field, "expected a number or null");
}

inline void finish_sequence(MotionSequence& s, bool impute) {
    if (impute) {
        bool any_missing = false;
        for (double v : s.coords) any_missing = any_missing || !std::isfinite(v);
        if (any_missing) impute_missing(s);
    }
    s.validate();
}

} // namespace detail

inline MotionSequence sequence_from_json(const json& doc, bool impute_missing_joints = false) {
    if (!doc.is_object()) throw ParseError("<document>", "expected a JSON object");
    MotionSequence s;

    const auto format_name = detail::require<std::string>(doc, "format");
    const auto format = parse_skeleton_format(format_name);
    if (!format) throw ParseError("format", "unknown skeleton format '" + format_name + "'");
    if (*format == SkeletonFormat::custom) {
        if (!doc.contains("skeleton")) throw ParseError("skeleton", "required for the custom format");
        s.graph = skeleton_from_json(doc.at("skeleton"), SkeletonFormat::custom);
    } else {
        s.graph = builtin_graph(*format);
    }

    s.exercise_id = detail::require<std::string>(doc, "exercise_id");
    s.subject_id = detail::require<std::string>(doc, "subject_id");
    if (doc.contains("label") && !doc.at("label").is_null()) {
        const auto text = detail::require<std::string>(doc, "label");
        s.label = parse_label(text);
        if (!s.label) throw ParseError("label", "expected 'correct' or 'incorrect', got '" + text + "'");
    }
    if (doc.contains("annotations") && !doc.at("annotations").is_null()) {
        const auto& ann = doc.at("annotations");
        if (!ann.is_array()) throw ParseError("annotations", "expected a list");
        for (std::size_t i = 0; i < ann.size(); ++i) {
            const auto& a = ann[i];
            if (a.is_number()) {
                s.annotations.emplace_back(a.get<double>());
            } else if (a.is_string() && parse_label(a.get<std::string>())) {
                s.annotations.emplace_back(*parse_label(a.get<std::string>()));
            } else {
                throw ParseError("annotations[" + std::to_string(i) + "]", "expected a label or a numeric score");
            }
        }
    }

    if (!doc.contains("timestamps")) throw ParseError("timestamps", "missing");
    const auto& ts = doc.at("timestamps");
    if (!ts.is_array()) throw ParseError("timestamps", "expected a list of numbers");
    for (std::size_t i = 0; i < ts.size(); ++i) {
        if (!ts[i].is_number()) throw ParseError("timestamps[" + std::to_string(i) + "]", "expected a number");
        s.timestamps.push_back(ts[i].get<double>());
    }

    if (!doc.contains("frames")) throw ParseError("frames", "missing");
    const auto& frames = doc.at("frames");
    if (!frames.is_array()) throw ParseError("frames", "expected a list of frames");
    s.frame_count = frames.size();
    s.coords.reserve(s.frame_count * s.frame_stride());
    for (std::size_t t = 0; t < frames.size(); ++t) {
        const auto& frame = frames[t];
        const std::string fname = "frames[" + std::to_string(t) + "]";
        if (!frame.is_array()) throw ParseError(fname, "expected a list of joints");
        if (frame.size() != s.joint_count())
            throw SchemaError(fname + " has " + std::to_string(frame.size()) + " joints but format '" + format_name +
                              "' declares " + std::to_string(s.joint_count()));
        for (std::size_t j = 0; j < frame.size(); ++j) {
            const auto& joint = frame[j];
            const std::string jname = fname + "[" + std::to_string(j) + "]";
            if (!joint.is_array()) throw ParseError(jname, "expected a list of coordinates");
            if (joint.size() != s.dims())
                throw SchemaError(jname + " has " + std::to_string(joint.size()) + " coordinates but format '" +
                                  format_name + "' is " + std::to_string(s.dims()) + "-D");
            for (std::size_t d = 0; d < joint.size(); ++d)
                s.coords.push_back(detail::coordinate_value(joint[d], jname));
        }
    }
    detail::finish_sequence(s, impute_missing_joints);
    return s;
}

namespace detail {

inline std::vector<std::string> split_fields(const std::string& line) {
    std::vector<std::string> fields;
    if (line.find_first_of(",;") != std::string::npos) {
        std::string cell;
        for (char c : line) {
            if (c == ',' || c == ';') {
                fields.push_back(std::move(cell));
                cell.clear();
            } else {
                cell.push_back(c);
            }
        }
        fields.push_back(std::move(cell));
    } else {
        std::istringstream ss(line);
        std::string token;
        while (ss >> token) fields.push_back(token);
    }
    return fields;
}

// Comma/semicolon separated (empty cell = missing value) or whitespace
// separated. A first line that does not parse as numbers is a header.
inline std::vector<std::vector<double>> read_numeric_table(std::string_view content) {
    std::vector<std::vector<double>> rows;
    std::istringstream in{std::string(content)};
    std::string line;
    std::size_t line_no = 0;
    bool first = true;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.find_first_not_of(" \t") == std::string::npos) continue;
        std::vector<double> row;
        std::optional<std::string> bad;
        for (const auto& raw : split_fields(line)) {
            const auto b = raw.find_first_not_of(" \t");
            if (b == std::string::npos) {
                row.push_back(std::numeric_limits<double>::quiet_NaN());
                continue;
            }
            const std::string token = raw.substr(b, raw.find_last_not_of(" \t") - b + 1);
            char* end = nullptr;
            const double v = std::strtod(token.c_str(), &end);
            if (end == token.c_str() || *end != '\0') {
                bad = token;
                break;
            }
            row.push_back(v);
        }
        const bool header = first && bad.has_value();
        first = false;
        if (header) continue;
        if (bad) throw ParseError("line " + std::to_string(line_no), "non-numeric value '" + *bad + "'");
        rows.push_back(std::move(row));
    }
    return rows;
}

} // namespace detail

/// Parses a canonical document or a raw dataset export into a validated
/// MotionSequence.
inline MotionSequence parse_sequence_file(std::string_view content, InputFormat hint, const ParseOptions& opts = {}) {
    if (hint == InputFormat::canonical) {
        json doc;
        try {
            doc = json::parse(content);
        } catch (const json::parse_error& e) {
            throw ParseError("<document>", e.what());
        }
        return sequence_from_json(doc, opts.impute_missing);
    }

    MotionSequence s;
    s.graph = hint == InputFormat::kimore_positions ? kinect_v2_graph() : builtin_graph(opts.format);
    s.exercise_id = opts.exercise_id;
    s.subject_id = opts.subject_id;
    s.label = opts.label;

    const auto rows = detail::read_numeric_table(content);
    const std::size_t stride = hint == InputFormat::kimore_positions ? 4 : s.dims();
    const std::size_t lead = hint == InputFormat::timestamped_table ? 1 : 0;
    const std::size_t expected = lead + s.joint_count() * stride;
    if (!(opts.frame_rate > 0.0)) throw ConfigError("frame rate must be positive");
    for (std::size_t r = 0; r < rows.size(); ++r) {
        const auto& row = rows[r];
        // Some KIMORE exports end every row with a trailing separator.
        if (row.size() != expected && !(row.size() == expected + 1 && std::isnan(row.back())))
            throw SchemaError("row " + std::to_string(r) + " has " + std::to_string(row.size()) + " values, expected " +
                              std::to_string(expected) + " for " + std::to_string(s.joint_count()) + " joints");
        s.timestamps.push_back(lead ? row[0] : static_cast<double>(r) / opts.frame_rate);
        for (std::size_t j = 0; j < s.joint_count(); ++j)
            for (std::size_t d = 0; d < s.dims(); ++d) s.coords.push_back(row[lead + j * stride + d]);
    }
    s.frame_count = rows.size();
    detail::finish_sequence(s, opts.impute_missing);
    return s;
}

// ---- files and manifests ---------------------------------------------------

inline std::string read_text_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open '" + path.string() + "' for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("failed writing '" + path.string() + "'");
}

struct ManifestEntry {
    std::filesystem::path path;
    std::string split; // optional hint: "train", "validation", "test" or empty

    bool operator==(const ManifestEntry&) const = default;
};

/// A manifest is a JSON document {"sequences": [{"path": ..., "split": ...}]}
/// or a bare list of paths. Relative paths resolve against the manifest's
/// directory.
inline std::vector<ManifestEntry> parse_manifest(std::string_view content, const std::filesystem::path& base_dir = {}) {
    json doc;
    try {
        doc = json::parse(content);
    } catch (const json::parse_error& e) {
        throw ParseError("<manifest>", e.what());
    }
    const json* list = &doc;
    if (doc.is_object()) {
        if (!doc.contains("sequences")) throw ParseError("sequences", "missing");
        list = &doc.at("sequences");
    }
    if (!list->is_array()) throw ParseError("sequences", "expected a list");
    std::vector<ManifestEntry> entries;
    for (std::size_t i = 0; i < list->size(); ++i) {
        const auto& item = (*list)[i];
        ManifestEntry e;
        if (item.is_string()) {
            e.path = item.get<std::string>();
        } else if (item.is_object() && item.contains("path") && item.at("path").is_string()) {
            e.path = item.at("path").get<std::string>();
            e.split = item.value("split", std::string{});
        } else {
            throw ParseError("sequences[" + std::to_string(i) + "]", "expected a path or {path, split}");
        }
        if (e.path.is_relative() && !base_dir.empty()) e.path = base_dir / e.path;
        entries.push_back(std::move(e));
    }
    return entries;
}

inline std::string serialize_manifest(const std::vector<ManifestEntry>& entries) {
    json list = json::array();
    for (const auto& e : entries) {
        json item = {{"path", e.path.generic_string()}};
        if (!e.split.empty()) item["split"] = e.split;
        list.push_back(std::move(item));
    }
    return json{{"sequences", list}}.dump(2) + "\n";
}

inline MotionSequence load_sequence(const std::filesystem::path& path, bool impute_missing_joints = false) {
    ParseOptions opts;
    opts.impute_missing = impute_missing_joints;
    try {
        return parse_sequence_file(read_text_file(path), InputFormat::canonical, opts);
    } catch (const ParseError& e) {
        throw ParseError(e.field(), std::string(e.what()) + " (in " + path.string() + ")");
    }
}

inline std::vector<MotionSequence> load_manifest(const std::filesystem::path& manifest_path, bool impute = false) {
    const auto entries = parse_manifest(read_text_file(manifest_path), manifest_path.parent_path());
    std::vector<MotionSequence> out;
    out.reserve(entries.size());
    for (const auto& e : entries) out.push_back(load_sequence(e.path, impute));
    return out;
}

/// Writes one canonical document per sequence plus `manifest.json` into
/// `dir` and returns the manifest entries (paths relative to `dir`).
inline std::vector<ManifestEntry> write_dataset(const std::filesystem::path& dir, const std::vector<MotionSequence>& sequences) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create directory '" + dir.string() + "': " + ec.message());
    std::vector<ManifestEntry> entries;
    entries.reserve(sequences.size());
    for (std::size_t i = 0; i < sequences.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof name, "seq_%05zu.json", i);
        write_text_file(dir / name, serialize_sequence(sequences[i]) + "\n");
        entries.push_back({name, {}});
    }
    write_text_file(dir / "manifest.json", serialize_manifest(entries));
    return entries;
}

} // namespace rehab
