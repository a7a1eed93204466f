// knnclutter command line: separate feature points from clutter in planar
// point patterns via K-th NN distance mixtures, with automatic K selection,
// entropy-based iterative removal, simulation and benchmarking.

#include "knnclutter/knnclutter.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

namespace {

constexpr int exit_usage = 2;
constexpr int exit_parse = 3;
constexpr int exit_numeric = 4;
constexpr int exit_io = 5;

using namespace knnclutter;

int exit_code_for(const Error& e) {
    switch (e.kind()) {
        case ErrorKind::usage: return exit_usage;
        case ErrorKind::parse: return exit_parse;
        case ErrorKind::numeric: return exit_numeric;
        case ErrorKind::io: return exit_io;
    }
    return 1;
}

struct KFlags {
    int fixed_k = 0;  // 0 = auto
    bool auto_k = false;
    int k_min = 1;
    int k_max = 35;
};

void add_k_flags(CLI::App* cmd, KFlags& kf, bool required) {
    auto* fixed = cmd->add_option("--k", kf.fixed_k, "fixed number of nearest neighbours")
                      ->check(CLI::PositiveNumber);
    auto* autok = cmd->add_flag("--auto-k", kf.auto_k, "select K automatically per pattern");
    fixed->excludes(autok);
    autok->excludes(fixed);
    if (required) {
        // one of the two must be given; validated after parse
    }
    cmd->add_option("--k-min", kf.k_min, "smallest candidate K (auto mode)")->check(CLI::PositiveNumber);
    cmd->add_option("--k-max", kf.k_max, "largest candidate K (auto mode)")->check(CLI::PositiveNumber);
}

void require_mode(const KFlags& kf) {
    if (!kf.auto_k && kf.fixed_k < 1)
        throw ConfigError("either --k <int> or --auto-k is required");
    if (kf.k_min < 1 || kf.k_max < kf.k_min) throw ConfigError("need 1 <= --k-min <= --k-max");
}

/// Candidate K set {k_min..k_max} clipped so max(k_set) <= n - 2; warns when
/// the requested ceiling does not fit the pattern.
std::vector<int> clipped_k_set(const KFlags& kf, std::size_t n) {
    int k_hi = kf.k_max;
    const int fit = static_cast<int>(n) - 2;
    if (k_hi > fit) {
        k_hi = fit;
        std::fprintf(stderr, "warning: k_set clipped to {%d..%d} for a pattern of %zu points\n",
                     kf.k_min, k_hi, n);
    }
    if (k_hi < kf.k_min)
        throw TooFewPoints("pattern of " + std::to_string(n) + " points cannot support k >= " +
                           std::to_string(kf.k_min));
    std::vector<int> ks;
    for (int k = kf.k_min; k <= k_hi; ++k) ks.push_back(k);
    return ks;
}

std::vector<double> compose_deltas(const IterationTrace& trace, int upto_j, std::size_t n0) {
    // delta for each original point from the last iteration <= upto_j it appeared in
    std::vector<double> delta(n0, 0.0);
    for (int j = 1; j <= upto_j; ++j) {
        const auto& rec = trace.records[static_cast<std::size_t>(j) - 1];
        for (std::size_t local = 0; local < rec.original_indices.size(); ++local)
            delta[rec.original_indices[local]] = rec.fit.delta[local];
    }
    return delta;
}

Labels composed_at(const IterationTrace& trace, int j) {
    const auto& rec = trace.records[static_cast<std::size_t>(j) - 1];
    Labels out;
    out.is_feature.assign(trace.records.front().n, false);
    for (std::size_t local = 0; local < rec.original_indices.size(); ++local)
        if (rec.labels.is_feature[local]) out.is_feature[rec.original_indices[local]] = true;
    return out;
}

int cmd_simulate(int scenario, std::uint64_t seed, const std::string& out_path) {
    const PointPattern pat = make_scenario(standard_scenario(scenario, seed));
    write_pattern_csv(out_path, pat);
    std::printf("wrote %s: %zu points (scenario %d, seed %llu)\n", out_path.c_str(), pat.size(),
                scenario, static_cast<unsigned long long>(seed));
    return 0;
}

int cmd_classify(const std::string& in_path, const KFlags& kf, const std::string& labels_path,
                 const std::string& report_path) {
    require_mode(kf);
    const auto t0 = std::chrono::steady_clock::now();
    const std::string raw = read_file(in_path);
    const PointPattern pat = read_pattern_csv(in_path);

    RunReport report;
    report.input_digest = fnv1a_hex(raw);
    report.j_hat = 1;
    report.stop_reason = "single";

    MixtureFit fit;
    ReportIteration it;
    it.j = 1;
    it.n = pat.size();
    if (kf.auto_k) {
        const auto k_set = clipped_k_set(kf, pat.size());
        SelectKResult sel = select_k(pat, k_set);
        if (!sel.fit_at_k_hat)
            throw DegenerateComponent("EM degenerated at the selected K = " + std::to_string(sel.k_hat));
        fit = std::move(*sel.fit_at_k_hat);
        report.k_mode = "auto";
        report.k_set = k_set;
        it.k_used = sel.k_hat;
        it.s_j = 0.0;
        for (std::size_t c = 0; c < sel.curve.s.size(); ++c) {
            it.s_j += sel.curve.s[c];
            if (sel.curve.degenerate[c]) it.degenerate_k.push_back(sel.curve.k_set[c]);
        }
        it.flat_curve = sel.fit.flat_curve;
    } else {
        fit = em_fit(knn_distances(pat, kf.fixed_k));
        report.k_mode = "fixed";
        report.k_fixed = kf.fixed_k;
        report.k_set = {kf.fixed_k};
        it.k_used = kf.fixed_k;
        it.s_j = entropy(fit.delta);
    }
    const Labels labels = classify(fit);
    it.lambda1 = fit.lambda1;
    it.lambda2 = fit.lambda2;
    it.p = fit.p;
    it.em_converged = fit.converged;
    it.em_iters = fit.n_iter;
    it.n_feature = labels.feature_count();
    report.iterations.push_back(it);
    report.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

    write_file_atomic(labels_path, labels_to_csv(pat, labels, fit.delta));
    if (!report_path.empty()) write_file_atomic(report_path, report_to_json(report));
    std::printf("classified %zu points at K = %d: %llu feature, %llu clutter\n", pat.size(),
                it.k_used, static_cast<unsigned long long>(it.n_feature),
                static_cast<unsigned long long>(pat.size() - it.n_feature));
    return 0;
}

int cmd_iterate(const std::string& in_path, const KFlags& kf, int max_iter, int min_points,
                const std::string& out_prefix, std::string report_path) {
    require_mode(kf);
    const auto t0 = std::chrono::steady_clock::now();
    const std::string raw = read_file(in_path);
    const PointPattern pat = read_pattern_csv(in_path);

    IterateConfig cfg;
    cfg.k_mode = kf.auto_k ? KMode::automatic() : KMode::fixed(kf.fixed_k);
    cfg.k_set = clipped_k_set(kf, pat.size());
    cfg.max_iter = max_iter;
    cfg.min_points = min_points;
    const IterationTrace trace = run_iterative(pat, cfg);

    RunReport report;
    report.input_digest = fnv1a_hex(raw);
    report.k_mode = kf.auto_k ? "auto" : "fixed";
    report.k_fixed = kf.auto_k ? 0 : kf.fixed_k;
    report.k_set = cfg.k_set;
    report.j_hat = trace.j_hat;
    report.stop_reason = to_string(trace.stop_reason);
    for (const auto& rec : trace.records) report.iterations.push_back(report_iteration(rec));

    for (const auto& rec : trace.records) {
        const Labels composed = composed_at(trace, rec.j);
        const auto delta = compose_deltas(trace, rec.j, pat.size());
        write_file_atomic(out_prefix + "_iter" + std::to_string(rec.j) + ".csv",
                          labels_to_csv(pat, composed, delta));
    }
    const auto final_delta = compose_deltas(trace, trace.j_hat, pat.size());
    write_file_atomic(out_prefix + "_final.csv",
                      labels_to_csv(pat, trace.final_labels, final_delta));

    report.wall_time_sec =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    if (report_path.empty()) report_path = out_prefix + "_report.json";
    write_file_atomic(report_path, report_to_json(report));

    std::printf("stopped at iteration %d (%s); %llu of %zu points kept as feature\n", trace.j_hat,
                report.stop_reason.c_str(),
                static_cast<unsigned long long>(trace.final_labels.feature_count()), pat.size());
    for (const auto& rec : trace.records)
        std::printf("  j=%d n=%zu k=%d s_j=%s\n", rec.j, rec.n, rec.k_used,
                    format_double(rec.s_j).c_str());
    return 0;
}

int cmd_entropy_curve(const std::string& in_path, const KFlags& kf, const std::string& out_path) {
    const PointPattern pat = read_pattern_csv(in_path);
    const auto k_set = clipped_k_set(kf, pat.size());
    const EntropyCurve curve = entropy_curve(pat, k_set);
    write_file_atomic(out_path, curve_to_csv(curve));
    std::printf("wrote %s: %zu rows\n", out_path.c_str(), curve.k_set.size());
    return 0;
}

int cmd_metrics(const std::string& pred_path, const std::string& truth_path,
                const std::string& out_path) {
    const std::vector<bool> pred_vec = read_labels_csv(pred_path);
    const std::vector<bool> truth = read_labels_csv(truth_path);
    Labels pred;
    pred.is_feature = pred_vec;
    const ConfusionRates r = rates(pred, truth);
    std::printf("tpr=%s fpr=%s acc=%s (tp=%zu fp=%zu tn=%zu fn=%zu)\n", format_double(r.tpr).c_str(),
                format_double(r.fpr).c_str(), format_double(r.acc).c_str(), r.tp, r.fp, r.tn, r.fn);
    if (!out_path.empty()) write_file_atomic(out_path, rates_to_csv(r));
    return 0;
}

BenchConfig parse_bench_config(const std::string& path) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(read_file(path));
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path + ": " + e.what());
    }
    BenchConfig cfg;
    try {
        if (!j.contains("scenarios")) throw ConfigError("config: missing key 'scenarios'");
        cfg.scenarios = j.at("scenarios").get<std::vector<int>>();
        for (std::size_t i = 0; i < cfg.scenarios.size(); ++i) {
            const int s = cfg.scenarios[i];
            if (s < 1 || s > 4)
                throw ConfigError("config: scenarios[" + std::to_string(i) + "]: unknown scenario id " +
                                  std::to_string(s));
        }
        if (!j.contains("k_modes")) throw ConfigError("config: missing key 'k_modes'");
        cfg.modes.clear();
        const auto modes = j.at("k_modes").get<std::vector<std::string>>();
        for (std::size_t i = 0; i < modes.size(); ++i) {
            const std::string& m = modes[i];
            if (m == "auto") {
                cfg.modes.push_back({true, 0});
            } else if (m.rfind("fixed-", 0) == 0) {
                try {
                    const int k = std::stoi(m.substr(6));
                    if (k < 1) throw std::invalid_argument("k");
                    cfg.modes.push_back({false, k});
                } catch (const std::exception&) {
                    throw ConfigError("config: k_modes[" + std::to_string(i) +
                                      "]: expected 'auto' or 'fixed-<k>', got '" + m + "'");
                }
            } else {
                throw ConfigError("config: k_modes[" + std::to_string(i) +
                                  "]: expected 'auto' or 'fixed-<k>', got '" + m + "'");
            }
        }
        if (j.contains("iterations")) cfg.iterations = j.at("iterations").get<int>();
        if (j.contains("replicates")) cfg.replicates = j.at("replicates").get<int>();
        if (j.contains("seed")) cfg.seed = j.at("seed").get<std::uint64_t>();
        if (j.contains("k_min")) cfg.k_min = j.at("k_min").get<int>();
        if (j.contains("k_max")) cfg.k_max = j.at("k_max").get<int>();
    } catch (const nlohmann::json::exception& e) {
        throw ConfigError("config: " + std::string(e.what()));
    }
    if (cfg.iterations < 1) throw ConfigError("config: iterations: must be >= 1");
    if (cfg.replicates < 1) throw ConfigError("config: replicates: must be >= 1");
    if (cfg.k_min < 1 || cfg.k_max < cfg.k_min) throw ConfigError("config: need 1 <= k_min <= k_max");
    return cfg;
}

int cmd_bench(const std::string& config_path, const std::string& out_path, int replicates_override,
              std::optional<std::uint64_t> seed_override) {
    BenchConfig cfg = parse_bench_config(config_path);
    if (replicates_override > 0) cfg.replicates = replicates_override;
    if (seed_override) cfg.seed = *seed_override;
    const auto rows = run_benchmark(cfg);
    write_file_atomic(out_path, bench_to_csv(rows));
    std::printf("wrote %s: %zu rows\n", out_path.c_str(), rows.size());
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"K-th nearest-neighbour clutter removal for planar point patterns"};
    app.require_subcommand(1);

    // simulate
    auto* sim = app.add_subcommand("simulate", "simulate a clutter+feature scenario to CSV");
    int scenario = 0;
    std::uint64_t sim_seed = 1;
    std::string sim_out;
    sim->add_option("--scenario", scenario, "scenario id (1..4)")->required()->check(CLI::Range(1, 4));
    sim->add_option("--seed", sim_seed, "random seed");
    sim->add_option("--out", sim_out, "output pattern CSV")->required();

    // classify
    auto* cls = app.add_subcommand("classify", "one-shot feature/clutter classification");
    std::string cls_in, cls_labels, cls_report;
    KFlags cls_k;
    cls->add_option("--in", cls_in, "input pattern CSV")->required();
    add_k_flags(cls, cls_k, true);
    cls->add_option("--out-labels", cls_labels, "output labels CSV")->required();
    cls->add_option("--report", cls_report, "output run report JSON");

    // iterate
    auto* itr = app.add_subcommand("iterate", "iterative removal with the entropy stopping rule");
    std::string itr_in, itr_prefix, itr_report;
    KFlags itr_k;
    int itr_max_iter = 10, itr_min_points = 0;
    itr->add_option("--in", itr_in, "input pattern CSV")->required();
    add_k_flags(itr, itr_k, true);
    itr->add_option("--max-iter", itr_max_iter, "iteration cap")->check(CLI::PositiveNumber);
    itr->add_option("--min-points", itr_min_points, "smallest pattern worth iterating on");
    itr->add_option("--out-prefix", itr_prefix, "prefix for per-iteration label files")->required();
    itr->add_option("--report", itr_report, "output run report JSON (default <prefix>_report.json)");

    // entropy-curve
    auto* cur = app.add_subcommand("entropy-curve", "per-K separation entropies as CSV");
    std::string cur_in, cur_out;
    KFlags cur_k;
    cur->add_option("--in", cur_in, "input pattern CSV")->required();
    cur->add_option("--k-min", cur_k.k_min, "smallest K")->check(CLI::PositiveNumber);
    cur->add_option("--k-max", cur_k.k_max, "largest K")->check(CLI::PositiveNumber);
    cur->add_option("--out", cur_out, "output curve CSV")->required();

    // metrics
    auto* met = app.add_subcommand("metrics", "classification rates against truth labels");
    std::string met_pred, met_truth, met_out;
    met->add_option("--pred", met_pred, "predicted labels CSV")->required();
    met->add_option("--truth", met_truth, "truth labels CSV")->required();
    met->add_option("--out", met_out, "optional rates CSV");

    // bench
    auto* ben = app.add_subcommand("bench", "Monte-Carlo benchmark over scenarios");
    std::string ben_config, ben_out;
    int ben_replicates = 0;
    std::uint64_t ben_seed = 0;
    bool ben_seed_set = false;
    ben->add_option("--config", ben_config, "benchmark config JSON")->required();
    ben->add_option("--out", ben_out, "output table CSV")->required();
    ben->add_option("--replicates", ben_replicates, "override config replicates")
        ->check(CLI::PositiveNumber);
    ben->add_option_function<std::uint64_t>(
        "--seed", [&](std::uint64_t v) { ben_seed = v; ben_seed_set = true; },
        "override config seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return exit_usage;
    }

    try {
        if (sim->parsed()) return cmd_simulate(scenario, sim_seed, sim_out);
        if (cls->parsed()) return cmd_classify(cls_in, cls_k, cls_labels, cls_report);
        if (itr->parsed())
            return cmd_iterate(itr_in, itr_k, itr_max_iter, itr_min_points, itr_prefix, itr_report);
        if (cur->parsed()) return cmd_entropy_curve(cur_in, cur_k, cur_out);
        if (met->parsed()) return cmd_metrics(met_pred, met_truth, met_out);
        if (ben->parsed())
            return cmd_bench(ben_config, ben_out, ben_replicates,
                             ben_seed_set ? std::optional<std::uint64_t>(ben_seed) : std::nullopt);
    } catch (const Error& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return exit_code_for(e);
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return exit_usage;
}
