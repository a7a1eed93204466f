#pragma once

#include "knnclutter/errors.hpp"
#include "knnclutter/geometry.hpp"
#include "knnclutter/rng.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <string>
#include <utility>
#include <vector>

namespace knnclutter {

/// Homogeneous Poisson process: N ~ Poisson(expected_n) points uniform on the
/// window. Labels are all clutter unless as_feature is set.
inline PointPattern sim_poisson(const Window& window, double expected_n, Rng& rng,
                                bool as_feature = false) {
    if (!(expected_n > 0.0)) throw InvalidParams("expected_n must be > 0");
    const std::size_t n = rng.poisson(expected_n);
    std::vector<Point> pts(n);
    for (auto& p : pts) {
        p.x = rng.uniform(window.xmin(), window.xmax());
        p.y = rng.uniform(window.ymin(), window.ymax());
    }
    return PointPattern(std::move(pts), window, std::vector<bool>(n, as_feature));
}

/// Poisson cluster process: parents ~ Poisson(kappa * area) uniform on the
/// window dilated by the disc radius, each spawning exactly
/// points_per_cluster offspring uniform in a disc of the given radius;
/// offspring are trimmed to the window. Dilation plus trimming realises the
/// stationary process restricted to the window, so the expected count is
/// kappa * points_per_cluster * area and boundary clusters appear partially,
/// as they would in a larger world. Labels are all feature.
inline PointPattern sim_cluster(const Window& window, double kappa, int points_per_cluster,
                                double radius, Rng& rng) {
    if (!(kappa > 0.0) || !(radius > 0.0) || points_per_cluster < 1)
        throw InvalidParams("sim_cluster requires kappa > 0, radius > 0, points_per_cluster >= 1");
    const Window dilated(window.xmin() - radius, window.xmax() + radius, window.ymin() - radius,
                         window.ymax() + radius);
    const std::size_t n_parents = rng.poisson(kappa * dilated.area());
    std::vector<Point> pts;
    for (std::size_t c = 0; c < n_parents; ++c) {
        const double px = rng.uniform(dilated.xmin(), dilated.xmax());
        const double py = rng.uniform(dilated.ymin(), dilated.ymax());
        for (int o = 0; o < points_per_cluster; ++o) {
            const double r = radius * std::sqrt(rng.uniform01());
            const double theta = 2.0 * std::numbers::pi * rng.uniform01();
            const Point p{px + r * std::cos(theta), py + r * std::sin(theta)};
            if (window.contains(p)) pts.push_back(p);
        }
    }
    const std::size_t n = pts.size();
    return PointPattern(std::move(pts), window, std::vector<bool>(n, true));
}

enum class FeatureKind { poisson, cluster };

/// Clutter-plus-feature superposition design. The four standard scenarios
/// share 300 expected clutter points on the unit square:
///   1: cluster process, kappa = 7.5, 20 points per cluster, disc radius 0.2
///   2: cluster process, kappa = 15,  10 points per cluster, disc radius 0.2
///   3: Poisson, 150 expected points on [0, 0.5]^2
///   4: Poisson,  20 expected points on [0.25, 0.5]^2
struct ScenarioSpec {
    int id = 0;  // 1..4 for the standard designs, 0 for custom
    Window clutter_window = Window::unit();
    double clutter_expected = 300.0;
    FeatureKind feature_kind = FeatureKind::poisson;
    Window feature_window = Window::unit();
    double feature_expected = 150.0;   // poisson feature
    double kappa = 7.5;                // cluster feature
    int points_per_cluster = 20;
    double cluster_radius = 0.2;
    std::uint64_t seed = 1;
};

inline ScenarioSpec standard_scenario(int id, std::uint64_t seed) {
    ScenarioSpec spec;
    spec.id = id;
    spec.seed = seed;
    switch (id) {
        case 1:
            spec.feature_kind = FeatureKind::cluster;
            spec.kappa = 7.5;
            spec.points_per_cluster = 20;
            spec.cluster_radius = 0.2;
            break;
        case 2:
            spec.feature_kind = FeatureKind::cluster;
            spec.kappa = 15.0;
            spec.points_per_cluster = 10;
            spec.cluster_radius = 0.2;
            break;
        case 3:
            spec.feature_kind = FeatureKind::poisson;
            spec.feature_window = Window(0.0, 0.5, 0.0, 0.5);
            spec.feature_expected = 150.0;
            break;
        case 4:
            spec.feature_kind = FeatureKind::poisson;
            spec.feature_window = Window(0.25, 0.5, 0.25, 0.5);
            spec.feature_expected = 20.0;
            break;
        default:
            throw ConfigError("unknown scenario id " + std::to_string(id) + " (expected 1..4)");
    }
    return spec;
}

/// Superposition of the clutter and feature processes with truth labels
/// attached and the point order shuffled. Deterministic in spec.seed.
inline PointPattern make_scenario(const ScenarioSpec& spec) {
    Rng rng(spec.seed);
    Rng clutter_rng = rng.child(1);
    Rng feature_rng = rng.child(2);
    Rng shuffle_rng = rng.child(3);

    PointPattern clutter = sim_poisson(spec.clutter_window, spec.clutter_expected, clutter_rng, false);
    PointPattern feature =
        spec.feature_kind == FeatureKind::poisson
            ? sim_poisson(spec.feature_window, spec.feature_expected, feature_rng, true)
            : sim_cluster(spec.feature_window, spec.kappa, spec.points_per_cluster,
                          spec.cluster_radius, feature_rng);

    std::vector<Point> pts;
    std::vector<bool> truth;
    pts.reserve(clutter.size() + feature.size());
    truth.reserve(clutter.size() + feature.size());
    for (std::size_t i = 0; i < clutter.size(); ++i) {
        pts.push_back(clutter.points()[i]);
        truth.push_back(false);
    }
    for (std::size_t i = 0; i < feature.size(); ++i) {
        pts.push_back(feature.points()[i]);
        truth.push_back(true);
    }
    // Fisher-Yates so clutter and feature rows are interleaved.
    for (std::size_t i = pts.size(); i > 1; --i) {
        const std::size_t j = shuffle_rng.index(i);
        std::swap(pts[i - 1], pts[j]);
        const bool t = truth[i - 1];
        truth[i - 1] = truth[j];
        truth[j] = t;
    }
    return PointPattern(std::move(pts), spec.clutter_window, std::move(truth));
}

} // namespace knnclutter
