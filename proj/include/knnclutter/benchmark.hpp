#pragma once

#include "knnclutter/errors.hpp"
#include "knnclutter/geometry.hpp"
#include "knnclutter/iterate.hpp"
#include "knnclutter/metrics.hpp"
#include "knnclutter/mixture.hpp"
#include "knnclutter/parallel.hpp"
#include "knnclutter/selection.hpp"
#include "knnclutter/simulate.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <string>
#include <vector>

namespace knnclutter {

/// Forced-depth classification: exactly `depth` passes of classify-and-keep,
/// no stopping rule. Returns the labels composed back onto the original
/// pattern after 1, 2, ..., depth iterations (the per-iteration columns of a
/// benchmark table). In auto mode K is re-estimated each pass on the
/// surviving pattern, with the candidate set clipped to the pattern size.
/// A pattern too small to classify again stops shrinking: remaining depths
/// repeat the last composed labels.
inline std::vector<Labels> classify_fixed_depth(const PointPattern& pattern, const KMode& k_mode,
                                                int depth, int k_min = 1, int k_max = 35,
                                                const EmConfig& em = {}, unsigned threads = 0) {
    if (depth < 1) throw ConfigError("depth must be >= 1");
    if (!k_mode.auto_k && k_mode.fixed_k < 1) throw InvalidK("fixed K must be >= 1");
    if (k_mode.auto_k && (k_min < 1 || k_max < k_min))
        throw ConfigError("auto mode requires 1 <= k_min <= k_max");

    const std::size_t n0 = pattern.size();
    std::vector<Labels> out;
    out.reserve(static_cast<std::size_t>(depth));

    PointPattern current = pattern;
    std::vector<std::size_t> alive(n0);
    std::iota(alive.begin(), alive.end(), std::size_t{0});

    Labels composed;
    composed.is_feature.assign(n0, false);

    for (int t = 1; t <= depth; ++t) {
        bool classified = false;
        Labels local;
        if (current.size() >= 4) {
            try {
                if (k_mode.auto_k) {
                    const int kmax_here =
                        std::min<int>(k_max, static_cast<int>(current.size()) - 2);
                    if (kmax_here - k_min + 1 >= 4) {
                        std::vector<int> k_set;
                        for (int k = k_min; k <= kmax_here; ++k) k_set.push_back(k);
                        SelectKResult sel = select_k(current, k_set, em, threads);
                        if (sel.fit_at_k_hat) {
                            local = classify(*sel.fit_at_k_hat);
                            classified = true;
                        }
                    }
                } else if (current.size() > static_cast<std::size_t>(k_mode.fixed_k)) {
                    local = classify(em_fit(knn_distances(current, k_mode.fixed_k), em));
                    classified = true;
                }
            } catch (const DegenerateComponent&) {
                classified = false;
            } catch (const NonFinite&) {
                classified = false;
            }
        }

        if (!classified) {
            // Cannot refine further; composed labels stay frozen from here on.
            for (int rest = t; rest <= depth; ++rest) out.push_back(composed);
            return out;
        }

        Labels next_composed;
        next_composed.is_feature.assign(n0, false);
        std::vector<std::size_t> next_alive;
        for (std::size_t local_i = 0; local_i < local.is_feature.size(); ++local_i) {
            if (local.is_feature[local_i]) {
                next_composed.is_feature[alive[local_i]] = true;
                next_alive.push_back(alive[local_i]);
            }
        }
        composed = next_composed;
        out.push_back(composed);
        if (t == depth) break;
        current = subset(current, local.is_feature);
        alive = std::move(next_alive);
    }
    return out;
}

struct BenchMode {
    bool auto_k = false;
    int k = 0;

    std::string name() const { return auto_k ? "auto" : "fixed-" + std::to_string(k); }
};

struct BenchConfig {
    std::vector<int> scenarios{1, 2, 3, 4};
    std::vector<BenchMode> modes{{false, 10}, {false, 20}, {false, 30}, {true, 0}};
    int iterations = 3;
    int replicates = 200;
    std::uint64_t seed = 1;
    int k_min = 1;
    int k_max = 35;
    EmConfig em;
    unsigned threads = 0;
};

struct BenchRow {
    int scenario = 0;
    std::string k_mode;
    int iteration = 0;
    double tpr = 0.0, fpr = 0.0, acc = 0.0;
    double se_tpr = 0.0, se_fpr = 0.0, se_acc = 0.0;
    int replicates = 0;
    std::uint64_t seed = 0;
};

namespace detail {

struct MeanSe {
    double mean = std::numeric_limits<double>::quiet_NaN();
    double se = 0.0;
};

/// Mean and Monte-Carlo standard error over the finite entries (a replicate
/// with no positives has an undefined TPR and is skipped for that rate).
inline MeanSe mean_se(const std::vector<double>& xs) {
    double sum = 0.0;
    std::size_t m = 0;
    for (double x : xs)
        if (std::isfinite(x)) {
            sum += x;
            ++m;
        }
    MeanSe out;
    if (m == 0) return out;
    out.mean = sum / static_cast<double>(m);
    if (m < 2) return out;
    double ss = 0.0;
    for (double x : xs)
        if (std::isfinite(x)) ss += (x - out.mean) * (x - out.mean);
    out.se = std::sqrt(ss / static_cast<double>(m - 1)) / std::sqrt(static_cast<double>(m));
    return out;
}

} // namespace detail

/// Monte-Carlo benchmark over scenarios x k-modes x iteration depths.
/// Replicate r of scenario s uses the child seed (seed, s, r), so the same
/// simulated patterns are scored under every mode, and the whole table is
/// reproducible bit for bit for a given master seed regardless of thread
/// count. Rows are ordered by (scenario, mode, iteration).
inline std::vector<BenchRow> run_benchmark(const BenchConfig& cfg) {
    if (cfg.replicates < 1) throw ConfigError("replicates must be >= 1");
    if (cfg.iterations < 1) throw ConfigError("iterations must be >= 1");
    if (cfg.scenarios.empty()) throw ConfigError("no scenarios given");
    if (cfg.modes.empty()) throw ConfigError("no k modes given");
    for (int s : cfg.scenarios) standard_scenario(s, 0);  // validates ids up front

    const Rng master(cfg.seed);
    const std::size_t n_modes = cfg.modes.size();
    const std::size_t n_iter = static_cast<std::size_t>(cfg.iterations);
    const std::size_t reps = static_cast<std::size_t>(cfg.replicates);

    std::vector<BenchRow> rows;
    for (int scenario : cfg.scenarios) {
        // cell(m, t, r): rate of mode m at depth t+1 in replicate r
        std::vector<double> tpr(n_modes * n_iter * reps), fpr(n_modes * n_iter * reps),
            acc(n_modes * n_iter * reps);
        auto at = [&](std::size_t m, std::size_t t, std::size_t r) {
            return (m * n_iter + t) * reps + r;
        };

        parallel_for(
            reps,
            [&](std::size_t r) {
                const std::uint64_t child =
                    master.child(static_cast<std::uint64_t>(scenario), r).seed();
                const PointPattern pat = make_scenario(standard_scenario(scenario, child));
                for (std::size_t m = 0; m < n_modes; ++m) {
                    KMode mode = cfg.modes[m].auto_k ? KMode::automatic()
                                                     : KMode::fixed(cfg.modes[m].k);
                    const auto labels = classify_fixed_depth(pat, mode, cfg.iterations, cfg.k_min,
                                                             cfg.k_max, cfg.em, 1);
                    for (std::size_t t = 0; t < n_iter; ++t) {
                        const ConfusionRates cr = rates(labels[t], pat);
                        tpr[at(m, t, r)] = cr.tpr;
                        fpr[at(m, t, r)] = cr.fpr;
                        acc[at(m, t, r)] = cr.acc;
                    }
                }
            },
            cfg.threads);

        for (std::size_t m = 0; m < n_modes; ++m) {
            for (std::size_t t = 0; t < n_iter; ++t) {
                BenchRow row;
                row.scenario = scenario;
                row.k_mode = cfg.modes[m].name();
                row.iteration = static_cast<int>(t) + 1;
                std::vector<double> col(reps);
                for (std::size_t r = 0; r < reps; ++r) col[r] = tpr[at(m, t, r)];
                auto ms = detail::mean_se(col);
                row.tpr = ms.mean;
                row.se_tpr = ms.se;
                for (std::size_t r = 0; r < reps; ++r) col[r] = fpr[at(m, t, r)];
                ms = detail::mean_se(col);
                row.fpr = ms.mean;
                row.se_fpr = ms.se;
                for (std::size_t r = 0; r < reps; ++r) col[r] = acc[at(m, t, r)];
                ms = detail::mean_se(col);
                row.acc = ms.mean;
                row.se_acc = ms.se;
                row.replicates = cfg.replicates;
                row.seed = cfg.seed;
                rows.push_back(std::move(row));
            }
        }
    }
    return rows;
}

} // namespace knnclutter
