#pragma once

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "rehab/error.hpp"
#include "rehab/harness.hpp"
#include "rehab/sequence_io.hpp"

namespace rehab {

inline constexpr const char* kReportColumns =
    "algorithm,skeleton_format,exercise_id,train_size,validation_size,repeat_index,seed,f1,accuracy,status";

namespace detail {

inline std::string format_real(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += c;
    }
    return out + "\"";
}

inline std::vector<std::string> parse_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    bool quoted = false;
    for (std::size_t i = 0; i < line.size(); ++i) {
        const char c = line[i];
        if (quoted) {
            if (c == '"' && i + 1 < line.size() && line[i + 1] == '"') {
                cur += '"';
                ++i;
            } else if (c == '"') {
                quoted = false;
            } else {
                cur += c;
            }
        } else if (c == '"') {
            quoted = true;
        } else if (c == ',') {
            out.push_back(std::move(cur));
            cur.clear();
        } else {
            cur += c;
        }
    }
    out.push_back(std::move(cur));
    return out;
}

} // namespace detail

inline std::string report_table(const std::vector<ReportRow>& rows) {
    std::string out = kReportColumns;
    out += '\n';
    for (const auto& r : rows) {
        out += std::string(to_string(r.algorithm)) + ',' + std::string(to_string(r.skeleton_format)) + ',' +
               detail::csv_field(r.exercise_id) + ',' + std::to_string(r.train_size) + ',' +
               std::to_string(r.validation_size) + ',' + std::to_string(r.repeat_index) + ',' + std::to_string(r.seed) +
               ',' + detail::format_real(r.f1) + ',' + detail::format_real(r.accuracy) + ',' +
               detail::csv_field(r.status) + '\n';
    }
    return out;
}

/// Inverse of report_table. %.17g makes the metric columns round-trip exactly.
inline std::vector<ReportRow> parse_report_table(std::string_view content) {
    std::istringstream in{std::string(content)};
    std::string line;
    if (!std::getline(in, line) || line != kReportColumns) throw SchemaError("report table header does not match");
    std::vector<ReportRow> rows;
    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const auto f = detail::parse_csv_line(line);
        const std::string where = "report line " + std::to_string(line_no);
        if (f.size() != 10) throw SchemaError(where + ": expected 10 columns, got " + std::to_string(f.size()));
        ReportRow r;
        const auto alg = parse_algorithm(f[0]);
        const auto fmt = parse_skeleton_format(f[1]);
        if (!alg) throw ParseError("algorithm", where + ": '" + f[0] + "'");
        if (!fmt) throw ParseError("skeleton_format", where + ": '" + f[1] + "'");
        r.algorithm = *alg;
        r.skeleton_format = *fmt;
        r.exercise_id = f[2];
        try {
            r.train_size = std::stoull(f[3]);
            r.validation_size = std::stoull(f[4]);
            r.repeat_index = std::stoull(f[5]);
            r.seed = std::stoull(f[6]);
            r.f1 = std::stod(f[7]);
            r.accuracy = std::stod(f[8]);
        } catch (const std::exception&) {
            throw ParseError("report row", where + ": malformed number");
        }
        r.status = f[9];
        rows.push_back(std::move(r));
    }
    return rows;
}

inline std::vector<ReportRow> load_report_table(const std::filesystem::path& path) {
    return parse_report_table(read_text_file(path));
}

/// F1 against train size, one polyline per validation size.
inline std::string learning_curve_svg(const std::vector<Aggregate>& aggregates, Algorithm algorithm, SkeletonFormat format) {
    std::map<std::size_t, std::vector<const Aggregate*>> lines;
    std::size_t max_train = 1;
    for (const auto& a : aggregates) {
        if (a.algorithm != algorithm || a.skeleton_format != format) continue;
        lines[a.validation_size].push_back(&a);
        max_train = std::max(max_train, a.train_size);
    }
    const double w = 640, h = 420, left = 60, right = 150, top = 40, bottom = 50;
    const double pw = w - left - right, ph = h - top - bottom;
    auto px = [&](double train) { return left + pw * train / static_cast<double>(max_train); };
    auto py = [&](double f1) { return top + ph * (1.0 - f1); };
    static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b", "#17becf"};

    std::ostringstream s;
    s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << w << "\" height=\"" << h
      << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
    s << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    s << "<text x=\"" << left << "\" y=\"22\" font-size=\"14\">F1 vs training size: " << to_string(algorithm) << ", "
      << to_string(format) << "</text>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
    s << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
      << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 5; ++i) {
        const double f = i / 5.0;
        s << "<text x=\"" << left - 8 << "\" y=\"" << py(f) + 4 << "\" text-anchor=\"end\">" << f << "</text>\n";
        s << "<line x1=\"" << left << "\" y1=\"" << py(f) << "\" x2=\"" << left + pw << "\" y2=\"" << py(f)
          << "\" stroke=\"#ddd\"/>\n";
    }
    std::vector<std::size_t> ticks;
    for (const auto& [v, pts] : lines)
        for (const auto* a : pts) ticks.push_back(a->train_size);
    std::sort(ticks.begin(), ticks.end());
    ticks.erase(std::unique(ticks.begin(), ticks.end()), ticks.end());
    for (auto t : ticks)
        s << "<text x=\"" << px(static_cast<double>(t)) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << t
          << "</text>\n";
    s << "<text x=\"" << left + pw / 2 << "\" y=\"" << h - 12 << "\" text-anchor=\"middle\">training examples</text>\n";
    s << "<text x=\"16\" y=\"" << top + ph / 2 << "\" transform=\"rotate(-90 16 " << top + ph / 2
      << ")\" text-anchor=\"middle\">F1</text>\n";

    std::size_t idx = 0;
    for (const auto& [v, pts] : lines) {
        const char* color = colors[idx % std::size(colors)];
        s << "<polyline fill=\"none\" stroke=\"" << color << "\" stroke-width=\"2\" points=\"";
        for (const auto* a : pts) s << px(static_cast<double>(a->train_size)) << ',' << py(a->f1_mean) << ' ';
        s << "\"/>\n";
        for (const auto* a : pts)
            s << "<circle cx=\"" << px(static_cast<double>(a->train_size)) << "\" cy=\"" << py(a->f1_mean)
              << "\" r=\"3\" fill=\"" << color << "\"/>\n";
        const double ly = top + 16.0 * static_cast<double>(idx);
        s << "<line x1=\"" << left + pw + 15 << "\" y1=\"" << ly << "\" x2=\"" << left + pw + 35 << "\" y2=\"" << ly
          << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
        s << "<text x=\"" << left + pw + 40 << "\" y=\"" << ly + 4 << "\">"
          << (algorithm == Algorithm::stgcn ? std::string("no validation") : "validation " + std::to_string(v))
          << "</text>\n";
        ++idx;
    }
    s << "</svg>\n";
    return s.str();
}

inline std::string report_summary(const EvaluationReport& report) {
    std::ostringstream s;
    const auto failed = std::count_if(report.rows.begin(), report.rows.end(), [](const ReportRow& r) { return !r.ok(); });
    s << "# Evaluation summary\n\n";
    s << report.rows.size() << " cells, " << failed << " failed.\n\n";
    s << "| algorithm | format | train | validation | n | F1 mean | F1 std | accuracy mean | accuracy std |\n";
    s << "|---|---|---|---|---|---|---|---|---|\n";
    char buf[64];
    for (const auto& a : report.aggregates) {
        s << "| " << to_string(a.algorithm) << " | " << to_string(a.skeleton_format) << " | " << a.train_size << " | "
          << a.validation_size << " | " << a.count;
        for (double v : {a.f1_mean, a.f1_stddev, a.accuracy_mean, a.accuracy_stddev}) {
            std::snprintf(buf, sizeof buf, " | %.4f", v);
            s << buf;
        }
        s << " |\n";
    }
    if (failed > 0) {
        s << "\n## Failed cells\n\n";
        for (const auto& r : report.rows)
            if (!r.ok())
                s << "- " << r.exercise_id << ", train " << r.train_size << ", validation " << r.validation_size
                  << ", repeat " << r.repeat_index << ": " << r.status << '\n';
    }
    return s.str();
}

/// Writes report.csv, one learning_curve_<algorithm>_<format>.svg per
/// (algorithm, format) present, and summary.md.
inline std::vector<std::filesystem::path> emit_report(const EvaluationReport& report, const std::filesystem::path& out_dir) {
    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create output directory '" + out_dir.string() + "': " + ec.message());
    std::vector<std::filesystem::path> written;
    auto put = [&](const std::string& name, const std::string& content) {
        write_text_file(out_dir / name, content);
        written.push_back(out_dir / name);
    };
    put("report.csv", report_table(report.rows));
    std::vector<std::pair<Algorithm, SkeletonFormat>> curves;
    for (const auto& a : report.aggregates)
        if (std::find(curves.begin(), curves.end(), std::pair{a.algorithm, a.skeleton_format}) == curves.end())
            curves.emplace_back(a.algorithm, a.skeleton_format);
    for (const auto& [alg, fmt] : curves)
        put("learning_curve_" + std::string(to_string(alg)) + "_" + std::string(to_string(fmt)) + ".svg",
            learning_curve_svg(report.aggregates, alg, fmt));
    put("summary.md", report_summary(report));
    return written;
}

} // namespace rehab
