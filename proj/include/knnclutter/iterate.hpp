#pragma once

#include "knnclutter/errors.hpp"
#include "knnclutter/geometry.hpp"
#include "knnclutter/mixture.hpp"
#include "knnclutter/selection.hpp"

#include <cstddef>
#include <numeric>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace knnclutter {

struct KMode {
    bool auto_k = false;
    int fixed_k = 0;

    static KMode fixed(int k) { return KMode{false, k}; }
    static KMode automatic() { return KMode{true, 0}; }
};

struct IterateConfig {
    KMode k_mode = KMode::automatic();
    std::vector<int> k_set;   // candidate K values; also the summation set for s_j
    int max_iter = 10;
    int min_points = 0;       // 0 -> max(k_set) + 2
    EmConfig em;
    unsigned threads = 0;
};

enum class StopReason {
    entropy_increase,  // S_{j+1} > S_j observed
    max_iterations,
    min_points,
    degenerate_fit
};

inline const char* to_string(StopReason r) {
    switch (r) {
        case StopReason::entropy_increase: return "entropy_increase";
        case StopReason::max_iterations: return "max_iterations";
        case StopReason::min_points: return "min_points";
        case StopReason::degenerate_fit: return "degenerate_fit";
    }
    return "unknown";
}

/// One pass of the classification on the surviving pattern. s_j sums the
/// per-K entropies over the full k_set (the same set at every iteration),
/// and original_indices maps this iteration's points back to the input.
struct IterationRecord {
    int j = 0;
    std::size_t n = 0;
    int k_used = 0;
    Labels labels;
    MixtureFit fit;
    double s_j = 0.0;
    EntropyCurve per_k_entropy;
    bool flat_curve = false;
    std::vector<std::size_t> original_indices;
    std::size_t feature_count = 0;
};

struct IterationTrace {
    std::vector<IterationRecord> records;
    int j_hat = 0;
    Labels final_labels;  // on the original pattern
    StopReason stop_reason = StopReason::max_iterations;
};

/// Survival labels on the original pattern: point i is feature iff it was
/// classified feature at every iteration 1..j_hat in which it appeared.
/// Records beyond j_hat (the lookahead that triggered the stop) are ignored.
inline Labels compose_labels(const IterationTrace& trace) {
    if (trace.records.empty()) throw InvalidParams("trace has no records");
    if (trace.j_hat < 1 || trace.j_hat > static_cast<int>(trace.records.size()))
        throw InvalidParams("trace j_hat outside record range");
    const std::size_t n0 = trace.records.front().n;
    Labels out;
    out.is_feature.assign(n0, false);
    // Presence at iteration j_hat already encodes survival through j_hat - 1.
    const IterationRecord& rec = trace.records[static_cast<std::size_t>(trace.j_hat) - 1];
    for (std::size_t local = 0; local < rec.original_indices.size(); ++local)
        if (rec.labels.is_feature[local]) out.is_feature[rec.original_indices[local]] = true;
    return out;
}

namespace detail {

inline IterationRecord evaluate_iteration(const PointPattern& pattern,
                                          std::vector<std::size_t> original_indices, int j,
                                          const IterateConfig& cfg) {
    IterationRecord rec;
    rec.j = j;
    rec.n = pattern.size();
    rec.original_indices = std::move(original_indices);

    if (cfg.k_mode.auto_k) {
        SelectKResult sel = select_k(pattern, cfg.k_set, cfg.em, cfg.threads);
        if (!sel.fit_at_k_hat)
            throw DegenerateComponent("EM degenerated at the selected K = " +
                                      std::to_string(sel.k_hat) + " (iteration " +
                                      std::to_string(j) + ")");
        rec.k_used = sel.k_hat;
        rec.fit = std::move(*sel.fit_at_k_hat);
        rec.per_k_entropy = std::move(sel.curve);
        rec.flat_curve = sel.fit.flat_curve;
    } else {
        rec.k_used = cfg.k_mode.fixed_k;
        rec.fit = em_fit(knn_distances(pattern, rec.k_used), cfg.em);
        // The stopping statistic still needs the whole curve.
        rec.per_k_entropy = entropy_curve(pattern, cfg.k_set, cfg.em, cfg.threads);
    }
    rec.s_j = std::accumulate(rec.per_k_entropy.s.begin(), rec.per_k_entropy.s.end(), 0.0);
    rec.labels = classify(rec.fit);
    rec.feature_count = rec.labels.feature_count();
    return rec;
}

} // namespace detail

/// Iterative clutter removal with the overall-entropy stopping rule.
///
/// Iteration j classifies the current pattern (K fixed or re-estimated each
/// round) and records S_j = sum of S_K over k_set. The loop continues onto
/// the feature subset and stops with j_hat = j at the first j where
/// S_{j+1} > S_j; deciding that requires computing iteration j+1, so a
/// criterion-triggered trace holds j_hat + 1 records. max_iter and
/// min_points are safety halts that set j_hat to the last completed
/// iteration instead.
inline IterationTrace run_iterative(const PointPattern& pattern, const IterateConfig& cfg) {
    detail::check_k_set(cfg.k_set);
    const int k_max = cfg.k_set.back();
    int min_points = cfg.min_points > 0 ? cfg.min_points : k_max + 2;
    if (min_points <= k_max)
        throw ConfigError("min_points must exceed max(k_set) = " + std::to_string(k_max));
    if (min_points < 4) min_points = 4;  // EM floor
    if (!cfg.k_mode.auto_k && cfg.k_mode.fixed_k < 1) throw InvalidK("fixed K must be >= 1");
    if (cfg.max_iter < 1) throw ConfigError("max_iter must be >= 1");
    if (pattern.size() < static_cast<std::size_t>(min_points))
        throw PatternTooSmall("pattern has " + std::to_string(pattern.size()) +
                              " points, below min_points = " + std::to_string(min_points));

    IterationTrace trace;
    PointPattern current = pattern;
    std::vector<std::size_t> alive(pattern.size());
    std::iota(alive.begin(), alive.end(), std::size_t{0});

    for (int j = 1;; ++j) {
        IterationRecord rec;
        try {
            rec = detail::evaluate_iteration(current, alive, j, cfg);
        } catch (const DegenerateComponent&) {
            if (j == 1) throw;  // nothing usable yet
            trace.j_hat = j - 1;
            trace.stop_reason = StopReason::degenerate_fit;
            break;
        }
        trace.records.push_back(std::move(rec));
        const IterationRecord& here = trace.records.back();

        if (j >= 2 && here.s_j > trace.records[static_cast<std::size_t>(j) - 2].s_j) {
            trace.j_hat = j - 1;
            trace.stop_reason = StopReason::entropy_increase;
            break;
        }
        if (j >= cfg.max_iter) {
            trace.j_hat = j;
            trace.stop_reason = StopReason::max_iterations;
            break;
        }
        const std::size_t n_next = here.feature_count;
        if (n_next < static_cast<std::size_t>(min_points) ||
            (!cfg.k_mode.auto_k && n_next <= static_cast<std::size_t>(cfg.k_mode.fixed_k))) {
            trace.j_hat = j;
            trace.stop_reason = StopReason::min_points;
            break;
        }

        std::vector<std::size_t> next_alive;
        next_alive.reserve(n_next);
        for (std::size_t local = 0; local < here.labels.is_feature.size(); ++local)
            if (here.labels.is_feature[local]) next_alive.push_back(here.original_indices[local]);
        current = subset(current, here.labels.is_feature);
        alive = std::move(next_alive);
    }

    trace.final_labels = compose_labels(trace);
    return trace;
}

} // namespace knnclutter
