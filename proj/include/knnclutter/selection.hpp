#pragma once

#include "knnclutter/errors.hpp"
#include "knnclutter/geometry.hpp"
#include "knnclutter/mixture.hpp"
#include "knnclutter/parallel.hpp"

#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace knnclutter {

/// Entropy measure of cluster separation, S = -sum_i delta_i * log2(delta_i)
/// with 0*log2(0) = 0. Only the delta term enters, not 1-delta. Low values
/// mean confident assignments; the maximum per point is log2(e)/e at delta=1/e.
inline double entropy(const std::vector<double>& delta) {
    double s = 0.0;
    for (double v : delta) {
        if (!(v >= 0.0) || !(v <= 1.0)) throw OutOfRange("posterior outside [0, 1]");
        if (v > 0.0) s -= v * std::log2(v);
    }
    return s;
}

/// Per-K separation entropies over a candidate set of neighbour orders.
/// degenerate[j] marks K values where the EM collapsed; those get s = 0
/// (a degenerate posterior is a fully certain one) instead of aborting.
struct EntropyCurve {
    std::vector<int> k_set;
    std::vector<double> s;
    std::vector<bool> degenerate;
};

namespace detail {

inline void check_k_set(const std::vector<int>& k_set) {
    if (k_set.empty()) throw InvalidK("k_set is empty");
    int prev = 0;
    for (int k : k_set) {
        if (k <= prev) throw InvalidK("k_set must be strictly increasing positive integers");
        prev = k;
    }
}

struct CurvePoint {
    double s = 0.0;
    bool degenerate = false;
    std::optional<MixtureFit> fit;
};

/// One EM sweep per K, sharing a single kNN table. Fits are kept so callers
/// that classify at the selected K do not re-run EM.
inline std::vector<CurvePoint> curve_points(const PointPattern& pattern,
                                            const std::vector<int>& k_set, const EmConfig& em,
                                            unsigned threads) {
    check_k_set(k_set);
    const std::size_t n = pattern.size();
    if (static_cast<std::size_t>(k_set.back()) >= n)
        throw KSetTooLarge("max(k_set) = " + std::to_string(k_set.back()) +
                           " must be < pattern size " + std::to_string(n));
    const KnnTable table(pattern, k_set.back());
    std::vector<CurvePoint> points(k_set.size());
    parallel_for(
        k_set.size(),
        [&](std::size_t j) {
            const KnnDistances d = table.column(k_set[j]);
            try {
                MixtureFit fit = em_fit(d, em);
                points[j].s = entropy(fit.delta);
                points[j].fit = std::move(fit);
            } catch (const DegenerateComponent&) {
                points[j].degenerate = true;
            } catch (const NonFinite&) {
                points[j].degenerate = true;
            }
        },
        threads);
    return points;
}

} // namespace detail

/// Entropy S_K for each K in k_set (EM fit per K on a shared kNN table).
inline EntropyCurve entropy_curve(const PointPattern& pattern, const std::vector<int>& k_set,
                                  const EmConfig& em = {}, unsigned threads = 0) {
    auto points = detail::curve_points(pattern, k_set, em, threads);
    EntropyCurve curve;
    curve.k_set = k_set;
    curve.s.resize(points.size());
    curve.degenerate.resize(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        curve.s[j] = points[j].s;
        curve.degenerate[j] = points[j].degenerate;
    }
    return curve;
}

/// One-changepoint segmented fit of an entropy curve:
///   y = alpha + beta * x          for x <= psi
///   y = alpha + beta * psi        for x >  psi   (post-break slope pinned to 0)
/// continuous at psi. flat_curve marks curves where the break explains almost
/// nothing over a constant fit, i.e. there is no levelling-off to find.
struct SegmentedFit {
    double psi = 0.0;
    double beta = 0.0;
    double alpha = 0.0;
    double rss = 0.0;
    int k_hat = 0;
    bool flat_curve = false;
};

/// Exhaustive profiling over the changepoint: candidates at every k_set value
/// and every midpoint between consecutive values; for each candidate the
/// model is ordinary least squares of y on min(x, psi), solved in closed
/// form; the global RSS minimum wins (smallest psi on exact ties).
inline SegmentedFit fit_segmented(const EntropyCurve& curve) {
    const std::size_t m = curve.k_set.size();
    if (m < 4) throw TooFewPoints("segmented fit needs at least 4 curve points, got " + std::to_string(m));
    detail::check_k_set(curve.k_set);
    if (curve.s.size() != m) throw LengthMismatch("curve k_set and s lengths differ");
    for (double v : curve.s)
        if (!std::isfinite(v)) throw NonFinite("entropy curve contains a non-finite value");

    std::vector<double> x(m), y(curve.s);
    for (std::size_t i = 0; i < m; ++i) x[i] = static_cast<double>(curve.k_set[i]);

    std::vector<double> candidates;
    candidates.reserve(2 * m - 1);
    for (std::size_t i = 0; i < m; ++i) {
        candidates.push_back(x[i]);
        if (i + 1 < m) candidates.push_back(0.5 * (x[i] + x[i + 1]));
    }
    std::sort(candidates.begin(), candidates.end());

    const double md = static_cast<double>(m);
    double sum_y = 0.0, sum_yy = 0.0;
    for (double v : y) {
        sum_y += v;
        sum_yy += v * v;
    }
    const double mean_y = sum_y / md;

    SegmentedFit best;
    best.rss = std::numeric_limits<double>::infinity();
    double rss_flat = 0.0;
    for (double v : y) rss_flat += (v - mean_y) * (v - mean_y);

    std::vector<double> g(m);
    for (double psi : candidates) {
        double sum_g = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            g[i] = std::min(x[i], psi);
            sum_g += g[i];
        }
        const double mean_g = sum_g / md;
        double sgg = 0.0, sgy = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            sgg += (g[i] - mean_g) * (g[i] - mean_g);
            sgy += (g[i] - mean_g) * (y[i] - mean_y);
        }
        double beta = 0.0;
        if (sgg > 1e-12 * std::max(1.0, mean_g * mean_g * md)) beta = sgy / sgg;
        const double alpha = mean_y - beta * mean_g;
        double rss = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const double r = y[i] - alpha - beta * g[i];
            rss += r * r;
        }
        if (rss < best.rss) {
            best.rss = rss;
            best.psi = psi;
            best.beta = beta;
            best.alpha = alpha;
        }
    }

    // No levelling-off structure: the profiled break explains under 5% of the
    // constant model's residual, or the curve is constant outright. Weakly
    // structured curves (low-contrast patterns) must NOT be flagged, or K
    // selection would collapse to min(k_set) exactly where it matters.
    const double improvement = rss_flat - best.rss;
    best.flat_curve = improvement <= std::max(0.05 * rss_flat, 1e-12 * std::max(1.0, sum_yy));
    if (best.flat_curve) {
        best.psi = candidates.front();
        best.k_hat = curve.k_set.front();
        return best;
    }

    int k_hat = curve.k_set.front();
    double best_dist = std::numeric_limits<double>::infinity();
    for (int k : curve.k_set) {
        const double dist = std::abs(static_cast<double>(k) - best.psi);
        if (dist <= best_dist) {  // <= : ties go to the larger K
            best_dist = dist;
            k_hat = k;
        }
    }
    best.k_hat = k_hat;
    return best;
}

struct SelectKResult {
    int k_hat = 0;
    EntropyCurve curve;
    SegmentedFit fit;
    /// Mixture fit from the curve sweep at k_hat; empty if that K degenerated.
    std::optional<MixtureFit> fit_at_k_hat;
};

/// Automatic choice of the neighbour order: entropy curve over k_set, then
/// the segmented changepoint, k_hat = the k_set element nearest to psi.
inline SelectKResult select_k(const PointPattern& pattern, const std::vector<int>& k_set,
                              const EmConfig& em = {}, unsigned threads = 0) {
    auto points = detail::curve_points(pattern, k_set, em, threads);
    SelectKResult out;
    out.curve.k_set = k_set;
    out.curve.s.resize(points.size());
    out.curve.degenerate.resize(points.size());
    for (std::size_t j = 0; j < points.size(); ++j) {
        out.curve.s[j] = points[j].s;
        out.curve.degenerate[j] = points[j].degenerate;
    }
    out.fit = fit_segmented(out.curve);
    out.k_hat = out.fit.k_hat;
    for (std::size_t j = 0; j < k_set.size(); ++j)
        if (k_set[j] == out.k_hat && points[j].fit) out.fit_at_k_hat = std::move(points[j].fit);
    return out;
}

} // namespace knnclutter
