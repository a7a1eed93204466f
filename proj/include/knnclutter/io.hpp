#pragma once

#include "knnclutter/benchmark.hpp"
#include "knnclutter/errors.hpp"
#include "knnclutter/geometry.hpp"
#include "knnclutter/iterate.hpp"
#include "knnclutter/metrics.hpp"
#include "knnclutter/mixture.hpp"
#include "knnclutter/selection.hpp"

#include <json.hpp>

#include <charconv>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <system_error>
#include <vector>

namespace knnclutter {

/// Shortest round-trip decimal form of a double (std::to_chars), so files
/// re-read to the exact same values and repeated runs are byte-identical.
inline std::string format_double(double v) {
    char buf[64];
    const auto res = std::to_chars(buf, buf + sizeof(buf), v);
    return std::string(buf, res.ptr);
}

inline std::string read_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path + " for reading");
    std::ostringstream ss;
    ss << in.rdbuf();
    if (in.bad()) throw IoError("read failure on " + path);
    return ss.str();
}

/// Temp-file-and-rename write; partially written outputs never land at path.
inline void write_file_atomic(const std::string& path, const std::string& content) {
    const std::filesystem::path target(path);
    std::filesystem::path tmp = target;
    tmp += ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) throw IoError("write failure on " + tmp.string());
    }
    std::error_code ec;
    std::filesystem::rename(tmp, target, ec);
    if (ec) {
        std::filesystem::remove(tmp);
        throw IoError("cannot move " + tmp.string() + " to " + path + ": " + ec.message());
    }
}

/// FNV-1a 64-bit content digest, hex encoded.
inline std::string fnv1a_hex(const std::string& bytes) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return std::string(buf);
}

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string field;
    for (char c : line) {
        if (c == ',') {
            out.push_back(field);
            field.clear();
        } else if (c != '\r') {
            field += c;
        }
    }
    out.push_back(field);
    return out;
}

inline double parse_double(const std::string& s, const std::string& path, std::size_t lineno,
                           const std::string& column) {
    double v = 0.0;
    const char* first = s.data();
    const char* last = s.data() + s.size();
    const auto res = std::from_chars(first, last, v);
    if (res.ec != std::errc{} || res.ptr != last)
        throw ParseError(path + ":" + std::to_string(lineno) + ": expected numeric " + column +
                         ", got '" + s + "'");
    return v;
}

} // namespace detail

/// Pattern CSV: header `x,y` or `x,y,label` with label in {clutter, feature}.
/// The observation window is taken as the bounding box of the points
/// (degenerate extents are padded; an empty file gets the unit window).
inline PointPattern read_pattern_csv(const std::string& path) {
    const std::string content = read_file(path);
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: empty file, expected a header");
    const auto header = detail::split_csv_line(line);
    bool with_label = false;
    if (header.size() == 3 && header[0] == "x" && header[1] == "y" && header[2] == "label") {
        with_label = true;
    } else if (!(header.size() == 2 && header[0] == "x" && header[1] == "y")) {
        throw ParseError(path + ":1: expected header 'x,y' or 'x,y,label'");
    }

    std::vector<Point> pts;
    std::vector<bool> truth;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        Point p;
        p.x = detail::parse_double(fields[0], path, lineno, "x");
        p.y = detail::parse_double(fields[1], path, lineno, "y");
        pts.push_back(p);
        if (with_label) {
            if (fields[2] == "feature") truth.push_back(true);
            else if (fields[2] == "clutter") truth.push_back(false);
            else
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": unknown label '" + fields[2] + "' (expected clutter or feature)");
        }
    }

    double xmin = 0.0, xmax = 1.0, ymin = 0.0, ymax = 1.0;
    if (!pts.empty()) {
        xmin = xmax = pts[0].x;
        ymin = ymax = pts[0].y;
        for (const auto& p : pts) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
        if (!(xmin < xmax)) { xmin -= 0.5; xmax += 0.5; }
        if (!(ymin < ymax)) { ymin -= 0.5; ymax += 0.5; }
    }
    const Window window(xmin, xmax, ymin, ymax);
    if (with_label) return PointPattern(std::move(pts), window, std::move(truth));
    return PointPattern(std::move(pts), window);
}

inline std::string pattern_to_csv(const PointPattern& pattern) {
    std::string out = pattern.has_truth() ? "x,y,label\n" : "x,y\n";
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        out += format_double(pattern.points()[i].x);
        out += ',';
        out += format_double(pattern.points()[i].y);
        if (pattern.has_truth()) {
            out += ',';
            out += pattern.truth()[i] ? "feature" : "clutter";
        }
        out += '\n';
    }
    return out;
}

inline void write_pattern_csv(const std::string& path, const PointPattern& pattern) {
    write_file_atomic(path, pattern_to_csv(pattern));
}

/// Labels CSV: one row per input point, in input order.
inline std::string labels_to_csv(const PointPattern& pattern, const Labels& labels,
                                 const std::vector<double>& delta) {
    if (labels.is_feature.size() != pattern.size() || delta.size() != pattern.size())
        throw LengthMismatch("labels/delta length does not match pattern size");
    std::string out = "index,x,y,is_feature,delta\n";
    for (std::size_t i = 0; i < pattern.size(); ++i) {
        out += std::to_string(i);
        out += ',';
        out += format_double(pattern.points()[i].x);
        out += ',';
        out += format_double(pattern.points()[i].y);
        out += ',';
        out += labels.is_feature[i] ? '1' : '0';
        out += ',';
        out += format_double(delta[i]);
        out += '\n';
    }
    return out;
}

/// Reads the is_feature column of a labels CSV, or the label column of a
/// pattern CSV, whichever the header announces.
inline std::vector<bool> read_labels_csv(const std::string& path) {
    const std::string content = read_file(path);
    std::istringstream in(content);
    std::string line;
    if (!std::getline(in, line)) throw ParseError(path + ":1: empty file, expected a header");
    const auto header = detail::split_csv_line(line);

    std::ptrdiff_t feature_col = -1;
    bool word_labels = false;
    for (std::size_t c = 0; c < header.size(); ++c) {
        if (header[c] == "is_feature") feature_col = static_cast<std::ptrdiff_t>(c);
        if (header[c] == "label") {
            feature_col = static_cast<std::ptrdiff_t>(c);
            word_labels = true;
        }
    }
    if (feature_col < 0)
        throw ParseError(path + ":1: no is_feature or label column in header");

    std::vector<bool> out;
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.empty() || line == "\r") continue;
        const auto fields = detail::split_csv_line(line);
        if (fields.size() != header.size())
            throw ParseError(path + ":" + std::to_string(lineno) + ": expected " +
                             std::to_string(header.size()) + " fields, got " +
                             std::to_string(fields.size()));
        const std::string& f = fields[static_cast<std::size_t>(feature_col)];
        if (word_labels) {
            if (f == "feature") out.push_back(true);
            else if (f == "clutter") out.push_back(false);
            else
                throw ParseError(path + ":" + std::to_string(lineno) + ": unknown label '" + f + "'");
        } else {
            if (f == "1") out.push_back(true);
            else if (f == "0") out.push_back(false);
            else
                throw ParseError(path + ":" + std::to_string(lineno) +
                                 ": is_feature must be 0 or 1, got '" + f + "'");
        }
    }
    return out;
}

inline std::string curve_to_csv(const EntropyCurve& curve) {
    std::string out = "k,entropy\n";
    for (std::size_t j = 0; j < curve.k_set.size(); ++j) {
        out += std::to_string(curve.k_set[j]);
        out += ',';
        out += format_double(curve.s[j]);
        out += '\n';
    }
    return out;
}

inline std::string rates_to_csv(const ConfusionRates& r) {
    std::string out = "tpr,fpr,acc,tp,fp,tn,fn\n";
    out += format_double(r.tpr);
    out += ',';
    out += format_double(r.fpr);
    out += ',';
    out += format_double(r.acc);
    out += ',';
    out += std::to_string(r.tp);
    out += ',';
    out += std::to_string(r.fp);
    out += ',';
    out += std::to_string(r.tn);
    out += ',';
    out += std::to_string(r.fn);
    out += '\n';
    return out;
}

inline std::string bench_to_csv(const std::vector<BenchRow>& rows) {
    std::string out = "scenario,k_mode,iteration,tpr,fpr,acc,se_tpr,se_fpr,se_acc,replicates,seed\n";
    for (const auto& r : rows) {
        out += std::to_string(r.scenario);
        out += ',';
        out += r.k_mode;
        out += ',';
        out += std::to_string(r.iteration);
        out += ',';
        out += format_double(r.tpr);
        out += ',';
        out += format_double(r.fpr);
        out += ',';
        out += format_double(r.acc);
        out += ',';
        out += format_double(r.se_tpr);
        out += ',';
        out += format_double(r.se_fpr);
        out += ',';
        out += format_double(r.se_acc);
        out += ',';
        out += std::to_string(r.replicates);
        out += ',';
        out += std::to_string(r.seed);
        out += '\n';
    }
    return out;
}

/// Per-iteration summary in the machine-readable run report.
struct ReportIteration {
    int j = 0;
    std::uint64_t n = 0;
    int k_used = 0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double p = 0.0;
    bool em_converged = false;
    int em_iters = 0;
    double s_j = 0.0;
    std::uint64_t n_feature = 0;
    std::vector<int> degenerate_k;
    bool flat_curve = false;

    bool operator==(const ReportIteration&) const = default;
};

struct RunReport {
    std::string input_digest;
    std::string k_mode;  // "fixed" or "auto"
    int k_fixed = 0;     // 0 when auto
    std::vector<int> k_set;
    std::vector<ReportIteration> iterations;
    int j_hat = 0;
    std::string stop_reason;
    double wall_time_sec = 0.0;

    bool operator==(const RunReport&) const = default;
};

inline void to_json(nlohmann::json& j, const ReportIteration& it) {
    j = nlohmann::json{{"j", it.j},
                       {"n", it.n},
                       {"k_used", it.k_used},
                       {"lambda1", it.lambda1},
                       {"lambda2", it.lambda2},
                       {"p", it.p},
                       {"em_converged", it.em_converged},
                       {"em_iters", it.em_iters},
                       {"s_j", it.s_j},
                       {"n_feature", it.n_feature},
                       {"degenerate_k", it.degenerate_k},
                       {"flat_curve", it.flat_curve}};
}

inline void from_json(const nlohmann::json& j, ReportIteration& it) {
    j.at("j").get_to(it.j);
    j.at("n").get_to(it.n);
    j.at("k_used").get_to(it.k_used);
    j.at("lambda1").get_to(it.lambda1);
    j.at("lambda2").get_to(it.lambda2);
    j.at("p").get_to(it.p);
    j.at("em_converged").get_to(it.em_converged);
    j.at("em_iters").get_to(it.em_iters);
    j.at("s_j").get_to(it.s_j);
    j.at("n_feature").get_to(it.n_feature);
    j.at("degenerate_k").get_to(it.degenerate_k);
    j.at("flat_curve").get_to(it.flat_curve);
}

inline void to_json(nlohmann::json& j, const RunReport& r) {
    j = nlohmann::json{{"input_digest", r.input_digest},
                       {"k_mode", r.k_mode},
                       {"k_fixed", r.k_fixed},
                       {"k_set", r.k_set},
                       {"iterations", r.iterations},
                       {"j_hat", r.j_hat},
                       {"stop_reason", r.stop_reason},
                       {"wall_time_sec", r.wall_time_sec}};
}

inline void from_json(const nlohmann::json& j, RunReport& r) {
    j.at("input_digest").get_to(r.input_digest);
    j.at("k_mode").get_to(r.k_mode);
    j.at("k_fixed").get_to(r.k_fixed);
    j.at("k_set").get_to(r.k_set);
    j.at("iterations").get_to(r.iterations);
    j.at("j_hat").get_to(r.j_hat);
    j.at("stop_reason").get_to(r.stop_reason);
    j.at("wall_time_sec").get_to(r.wall_time_sec);
}

inline std::string report_to_json(const RunReport& report) {
    nlohmann::json j = report;
    return j.dump(2) + "\n";
}

inline RunReport report_from_json(const std::string& text) {
    try {
        return nlohmann::json::parse(text).get<RunReport>();
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("run report: ") + e.what());
    }
}

inline ReportIteration report_iteration(const IterationRecord& rec) {
    ReportIteration it;
    it.j = rec.j;
    it.n = rec.n;
    it.k_used = rec.k_used;
    it.lambda1 = rec.fit.lambda1;
    it.lambda2 = rec.fit.lambda2;
    it.p = rec.fit.p;
    it.em_converged = rec.fit.converged;
    it.em_iters = rec.fit.n_iter;
    it.s_j = rec.s_j;
    it.n_feature = rec.feature_count;
    for (std::size_t c = 0; c < rec.per_k_entropy.k_set.size(); ++c)
        if (rec.per_k_entropy.degenerate[c]) it.degenerate_k.push_back(rec.per_k_entropy.k_set[c]);
    it.flat_curve = rec.flat_curve;
    return it;
}

} // namespace knnclutter
