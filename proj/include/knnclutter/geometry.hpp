#pragma once

#include "knnclutter/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace knnclutter {

struct Point {
    double x = 0.0;
    double y = 0.0;
};

/// Axis-aligned rectangular observation window.
class Window {
public:
    Window(double xmin, double xmax, double ymin, double ymax)
        : xmin_(xmin), xmax_(xmax), ymin_(ymin), ymax_(ymax) {
        if (!(xmin < xmax) || !(ymin < ymax))
            throw InvalidWindow("window requires xmin < xmax and ymin < ymax");
    }

    static Window unit() { return Window(0.0, 1.0, 0.0, 1.0); }

    double xmin() const noexcept { return xmin_; }
    double xmax() const noexcept { return xmax_; }
    double ymin() const noexcept { return ymin_; }
    double ymax() const noexcept { return ymax_; }
    double width() const noexcept { return xmax_ - xmin_; }
    double height() const noexcept { return ymax_ - ymin_; }
    double area() const noexcept { return width() * height(); }

    bool contains(const Point& p) const noexcept {
        return p.x >= xmin_ && p.x <= xmax_ && p.y >= ymin_ && p.y <= ymax_;
    }

private:
    double xmin_, xmax_, ymin_, ymax_;
};

/// Planar point set with its observation window and optional ground-truth
/// feature/clutter labels. Point order is stable: every per-point output
/// downstream (distances, posteriors, labels) is aligned to this order.
///
/// Containment of points in the window is not enforced: simulated cluster
/// offspring may fall outside the nominal window and are kept as-is. The
/// window takes part in simulation only, never in distance computation.
class PointPattern {
public:
    PointPattern(std::vector<Point> points, Window window)
        : points_(std::move(points)), window_(window) {}

    PointPattern(std::vector<Point> points, Window window, std::vector<bool> truth_is_feature)
        : points_(std::move(points)), window_(window), truth_(std::move(truth_is_feature)) {
        if (truth_ && truth_->size() != points_.size())
            throw LengthMismatch("truth labels length " + std::to_string(truth_->size()) +
                                 " does not match pattern size " + std::to_string(points_.size()));
    }

    std::size_t size() const noexcept { return points_.size(); }
    bool empty() const noexcept { return points_.empty(); }

    const std::vector<Point>& points() const noexcept { return points_; }
    const Window& window() const noexcept { return window_; }

    bool has_truth() const noexcept { return truth_.has_value(); }
    const std::vector<bool>& truth() const {
        if (!truth_) throw MissingTruth("pattern carries no ground-truth labels");
        return *truth_;
    }

private:
    std::vector<Point> points_;
    Window window_;
    std::optional<std::vector<bool>> truth_;
};

/// K-th nearest-neighbour distances, index-aligned to the source pattern.
struct KnnDistances {
    int k = 0;
    std::vector<double> d;
};

namespace detail {

inline double squared_dist(const Point& a, const Point& b) {
    const double dx = a.x - b.x;
    const double dy = a.y - b.y;
    return dx * dx + dy * dy;
}

/// All-pairs path: per point, the k smallest distances (squared), ascending.
/// Used below a size cutoff and kept simple on purpose.
inline std::vector<double> knn_rows_brute(const std::vector<Point>& pts, int k) {
    const std::size_t n = pts.size();
    const auto ku = static_cast<std::size_t>(k);
    std::vector<double> rows(n * ku);
    std::vector<double> scratch;
    scratch.reserve(n - 1);
    for (std::size_t i = 0; i < n; ++i) {
        scratch.clear();
        for (std::size_t j = 0; j < n; ++j) {
            if (j == i) continue;
            scratch.push_back(squared_dist(pts[i], pts[j]));
        }
        std::partial_sort(scratch.begin(), scratch.begin() + k, scratch.end());
        std::copy(scratch.begin(), scratch.begin() + k, rows.begin() + i * ku);
    }
    return rows;
}

/// Uniform-grid accelerated path. Exact: candidate cells are pruned with
/// conservative ring bounds, and the same squared-distance expression as the
/// brute path is used, so results agree with all-pairs search bit for bit.
class KnnGrid {
public:
    KnnGrid(const std::vector<Point>& pts) : pts_(pts) {
        double xmin = std::numeric_limits<double>::infinity(), xmax = -xmin;
        double ymin = xmin, ymax = -xmin;
        for (const auto& p : pts_) {
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
        const double w = xmax - xmin, h = ymax - ymin;
        degenerate_ = !(w > 0.0) && !(h > 0.0);
        if (degenerate_) return;

        const double area = std::max(w, 1e-300) * std::max(h, 1e-300);
        double cell = std::sqrt(2.0 * area / static_cast<double>(pts_.size()));
        cell = std::max(cell, 1e-300);
        ncx_ = std::max<std::size_t>(1, static_cast<std::size_t>(w / cell) + 1);
        ncy_ = std::max<std::size_t>(1, static_cast<std::size_t>(h / cell) + 1);
        // Cap the table at a few cells per point.
        while (ncx_ * ncy_ > 4 * pts_.size() + 16) {
            if (ncx_ > ncy_) ncx_ = (ncx_ + 1) / 2; else ncy_ = (ncy_ + 1) / 2;
        }
        x0_ = xmin;
        y0_ = ymin;
        hx_ = w > 0.0 ? w / static_cast<double>(ncx_) : 1.0;
        hy_ = h > 0.0 ? h / static_cast<double>(ncy_) : 1.0;

        cell_of_.resize(pts_.size());
        std::vector<std::size_t> count(ncx_ * ncy_ + 1, 0);
        for (std::size_t i = 0; i < pts_.size(); ++i) {
            cell_of_[i] = cell_index(pts_[i]);
            ++count[cell_of_[i] + 1];
        }
        for (std::size_t c = 1; c < count.size(); ++c) count[c] += count[c - 1];
        start_ = count;
        members_.resize(pts_.size());
        std::vector<std::size_t> cursor(start_.begin(), start_.end() - 1);
        for (std::size_t i = 0; i < pts_.size(); ++i) members_[cursor[cell_of_[i]]++] = i;
    }

    bool degenerate() const noexcept { return degenerate_; }

    /// k smallest squared distances from point i to other points, ascending.
    void query(std::size_t i, int k, std::vector<double>& out) const {
        const auto ku = static_cast<std::size_t>(k);
        out.clear();
        const Point q = pts_[i];
        const std::size_t qcx = cell_of_[i] % ncx_;
        const std::size_t qcy = cell_of_[i] / ncx_;
        const double hmin = std::min(hx_, hy_);
        const std::size_t max_ring = std::max(ncx_, ncy_);

        // out is kept as a max-heap of the best k squared distances.
        auto consider = [&](double d2) {
            if (out.size() < ku) {
                out.push_back(d2);
                std::push_heap(out.begin(), out.end());
            } else if (d2 < out.front()) {
                std::pop_heap(out.begin(), out.end());
                out.back() = d2;
                std::push_heap(out.begin(), out.end());
            }
        };
        auto scan_cell = [&](std::size_t cx, std::size_t cy) {
            const std::size_t c = cy * ncx_ + cx;
            for (std::size_t m = start_[c]; m < start_[c + 1]; ++m) {
                const std::size_t j = members_[m];
                if (j == i) continue;
                consider(squared_dist(q, pts_[j]));
            }
        };

        for (std::size_t ring = 0; ring <= max_ring; ++ring) {
            if (ring > 0 && out.size() == ku) {
                // Any point in a ring-r cell is at least (r-1)*hmin away.
                const double lb = (static_cast<double>(ring) - 1.0) * hmin;
                if (lb * lb > out.front()) break;
            }
            const std::ptrdiff_t r = static_cast<std::ptrdiff_t>(ring);
            const std::ptrdiff_t cx0 = static_cast<std::ptrdiff_t>(qcx);
            const std::ptrdiff_t cy0 = static_cast<std::ptrdiff_t>(qcy);
            for (std::ptrdiff_t dy = -r; dy <= r; ++dy) {
                const std::ptrdiff_t cy = cy0 + dy;
                if (cy < 0 || cy >= static_cast<std::ptrdiff_t>(ncy_)) continue;
                const bool edge_row = (dy == -r || dy == r);
                const std::ptrdiff_t step = edge_row ? 1 : 2 * r;
                for (std::ptrdiff_t dx = -r; dx <= r; dx += (r == 0 ? 1 : step)) {
                    const std::ptrdiff_t cx = cx0 + dx;
                    if (cx < 0 || cx >= static_cast<std::ptrdiff_t>(ncx_)) continue;
                    scan_cell(static_cast<std::size_t>(cx), static_cast<std::size_t>(cy));
                    if (r == 0) break;
                }
            }
        }
        std::sort_heap(out.begin(), out.end());
    }

private:
    std::size_t cell_index(const Point& p) const {
        auto clampc = [](double v, std::size_t n) {
            if (v < 0.0) return std::size_t{0};
            auto c = static_cast<std::size_t>(v);
            return c >= n ? n - 1 : c;
        };
        const std::size_t cx = clampc((p.x - x0_) / hx_, ncx_);
        const std::size_t cy = clampc((p.y - y0_) / hy_, ncy_);
        return cy * ncx_ + cx;
    }

    const std::vector<Point>& pts_;
    bool degenerate_ = false;
    std::size_t ncx_ = 1, ncy_ = 1;
    double x0_ = 0.0, y0_ = 0.0, hx_ = 1.0, hy_ = 1.0;
    std::vector<std::size_t> cell_of_;
    std::vector<std::size_t> start_;
    std::vector<std::size_t> members_;
};

/// Row-major n x k table of squared kNN distances, each row ascending.
inline std::vector<double> knn_rows(const std::vector<Point>& pts, int k) {
    const std::size_t n = pts.size();
    if (n < 64) return knn_rows_brute(pts, k);
    KnnGrid grid(pts);
    if (grid.degenerate()) return knn_rows_brute(pts, k);
    const auto ku = static_cast<std::size_t>(k);
    std::vector<double> rows(n * ku);
    std::vector<double> row;
    row.reserve(ku);
    for (std::size_t i = 0; i < n; ++i) {
        grid.query(i, k, row);
        std::copy(row.begin(), row.end(), rows.begin() + i * ku);
    }
    return rows;
}

inline void check_knn_args(std::size_t n, int k) {
    if (k < 1) throw InvalidK("k must be >= 1, got " + std::to_string(k));
    if (n <= static_cast<std::size_t>(k))
        throw TooFewPoints("pattern has " + std::to_string(n) + " points, need at least " +
                           std::to_string(k + 1) + " for k = " + std::to_string(k));
}

} // namespace detail

/// Distance table from every point to its 1st..k_max-th nearest neighbour.
/// Column K-1 equals knn_distances(pattern, K).d; computing the table once
/// is how the entropy curve avoids one search per K.
class KnnTable {
public:
    KnnTable(const PointPattern& pattern, int k_max) : k_max_(k_max), n_(pattern.size()) {
        detail::check_knn_args(n_, k_max);
        d2_ = detail::knn_rows(pattern.points(), k_max);
    }

    int k_max() const noexcept { return k_max_; }
    std::size_t size() const noexcept { return n_; }

    KnnDistances column(int k) const {
        if (k < 1 || k > k_max_) throw InvalidK("k out of table range");
        KnnDistances out;
        out.k = k;
        out.d.resize(n_);
        const auto km = static_cast<std::size_t>(k_max_);
        for (std::size_t i = 0; i < n_; ++i)
            out.d[i] = std::sqrt(d2_[i * km + static_cast<std::size_t>(k) - 1]);
        return out;
    }

private:
    int k_max_;
    std::size_t n_;
    std::vector<double> d2_;
};

/// Distance from each point to its k-th closest other point (Euclidean,
/// no edge correction). Ties are resolved on distance value alone: the k-th
/// order statistic of the distance multiset is returned.
inline KnnDistances knn_distances(const PointPattern& pattern, int k) {
    detail::check_knn_args(pattern.size(), k);
    return KnnTable(pattern, k).column(k);
}

/// Indices kept by a boolean mask, in original order.
inline std::vector<std::size_t> subset_indices(const std::vector<bool>& keep) {
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < keep.size(); ++i)
        if (keep[i]) idx.push_back(i);
    return idx;
}

/// Pattern restricted to the kept indices; window unchanged, truth labels
/// subset along. Use subset_indices(keep) for the map back to the parent.
inline PointPattern subset(const PointPattern& pattern, const std::vector<bool>& keep) {
    if (keep.size() != pattern.size())
        throw LengthMismatch("keep mask length " + std::to_string(keep.size()) +
                             " does not match pattern size " + std::to_string(pattern.size()));
    std::vector<Point> pts;
    std::vector<bool> truth;
    for (std::size_t i = 0; i < keep.size(); ++i) {
        if (!keep[i]) continue;
        pts.push_back(pattern.points()[i]);
        if (pattern.has_truth()) truth.push_back(pattern.truth()[i]);
    }
    if (pattern.has_truth()) return PointPattern(std::move(pts), pattern.window(), std::move(truth));
    return PointPattern(std::move(pts), pattern.window());
}

} // namespace knnclutter
