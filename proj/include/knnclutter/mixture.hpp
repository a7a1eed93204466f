#pragma once

#include "knnclutter/errors.hpp"
#include "knnclutter/geometry.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

namespace knnclutter {

/// Parameters of the K-th nearest-neighbour distance law under a homogeneous
/// Poisson process of intensity lambda: the squared distance is Gamma
/// distributed with shape K and rate lambda*pi.
struct NnDensityParams {
    int k = 1;
    double lambda = 1.0;

    void validate() const {
        if (k < 1 || !(lambda > 0.0) || !std::isfinite(lambda))
            throw InvalidParams("nn density requires k >= 1 and lambda > 0");
    }
};

/// log f(x) of the K-th NN distance density,
///   f(x) = exp(-lambda*pi*x^2) * 2*(lambda*pi)^K * x^(2K-1) / (K-1)!
/// evaluated in the log domain so large K (>= 100) stays finite.
inline double log_nn_density(double x, const NnDensityParams& params) {
    params.validate();
    if (!(x >= 0.0)) throw OutOfRange("nn density defined for x >= 0");
    const double rate = params.lambda * std::numbers::pi;
    const double K = static_cast<double>(params.k);
    // x = 0 gives log(0) = -inf; exp maps it back to the true density 0.
    return std::numbers::ln2 + K * std::log(rate) + (2.0 * K - 1.0) * std::log(x) -
           rate * x * x - std::lgamma(K);
}

inline double nn_density(double x, const NnDensityParams& params) {
    return std::exp(log_nn_density(x, params));
}

namespace detail {

inline double lambda_mle_impl(const std::vector<double>& d, int k) {
    double sum_sq = 0.0;
    for (double v : d) {
        if (!(v >= 0.0) || !std::isfinite(v))
            throw InvalidParams("distances must be finite and >= 0");
        sum_sq += v * v;
    }
    if (!(sum_sq > 0.0))
        throw DegenerateDistances("sum of squared distances is zero");
    return static_cast<double>(d.size()) * static_cast<double>(k) / (std::numbers::pi * sum_sq);
}

} // namespace detail

/// Maximum likelihood intensity: lambda = n*K / (pi * sum d_i^2).
inline double lambda_mle(const KnnDistances& d) {
    if (d.k < 1) throw InvalidK("k must be >= 1");
    if (d.d.empty()) throw TooFewPoints("no distances");
    return detail::lambda_mle_impl(d.d, d.k);
}

/// Two-component fit of the K-th NN distances. Component 1 is the denser
/// process (the feature): lambda1 >= lambda2 on output, and delta[i] is the
/// posterior probability that point i belongs to it.
struct MixtureFit {
    int k = 0;
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double p = 0.0;
    std::vector<double> delta;
    std::vector<double> loglik_trace;
    bool converged = false;
    int n_iter = 0;
};

struct EmInit {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    double p = 0.5;
};

struct EmConfig {
    std::optional<EmInit> init;  // default: median split of the distances
    double tol = 1e-8;           // max relative parameter change
    int max_iter = 1000;
};

/// Posterior probability of the feature component for one distance. This is
/// the E step in ratio form: the shared x^(2K-1) and (K-1)! factors cancel,
/// leaving a logistic in log(p/(1-p)) + K*log(l1/l2) - (l1-l2)*pi*d^2.
/// At d = 0 this evaluates the continuous extension p*l1^K/(p*l1^K+(1-p)*l2^K),
/// so duplicate points never produce NaN.
inline double posterior_feature(double d, int k, double lambda1, double lambda2, double p) {
    const double t = std::log(p) - std::log(1.0 - p) +
                     static_cast<double>(k) * (std::log(lambda1) - std::log(lambda2)) -
                     (lambda1 - lambda2) * std::numbers::pi * d * d;
    if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
    const double e = std::exp(t);
    return e / (1.0 + e);
}

namespace detail {

inline double logsumexp2(double a, double b) {
    const double m = std::max(a, b);
    if (m == -std::numeric_limits<double>::infinity()) return m;
    return m + std::log(std::exp(a - m) + std::exp(b - m));
}

/// Mixture log-likelihood under the D_K density.
inline double mixture_loglik(const std::vector<double>& d, int k, double lambda1, double lambda2,
                             double p) {
    const double K = static_cast<double>(k);
    const double lp = std::log(p);
    const double lq = std::log(1.0 - p);
    const double c1 = K * std::log(lambda1 * std::numbers::pi);
    const double c2 = K * std::log(lambda2 * std::numbers::pi);
    const double base = std::numbers::ln2 - std::lgamma(K);
    double ll = 0.0;
    for (double x : d) {
        const double shared = base + (2.0 * K - 1.0) * std::log(x);
        const double a = lp + shared + c1 - lambda1 * std::numbers::pi * x * x;
        const double b = lq + shared + c2 - lambda2 * std::numbers::pi * x * x;
        ll += logsumexp2(a, b);
    }
    return ll;
}

inline EmInit median_split_init(const std::vector<double>& d, int k) {
    std::vector<double> sorted(d);
    std::sort(sorted.begin(), sorted.end());
    const std::size_t half = sorted.size() / 2;
    std::vector<double> lower(sorted.begin(), sorted.begin() + half);
    std::vector<double> upper(sorted.begin() + half, sorted.end());
    EmInit init;
    init.lambda1 = lambda_mle_impl(lower, k);
    init.lambda2 = lambda_mle_impl(upper, k);
    init.p = 0.5;
    return init;
}

} // namespace detail

/// EM for the two-component K-th NN distance mixture.
///
/// Alternates the posterior update with the closed-form rate updates
///   lambda1 = K*sum(delta) / (pi*sum(delta*d^2)),
///   lambda2 = K*sum(1-delta) / (pi*sum((1-delta)*d^2)),
///   p = mean(delta)
/// until the largest relative parameter change drops below tol. Components
/// are swapped if needed so lambda1 >= lambda2 on output, with delta and p
/// flipped along.
///
/// Throws DegenerateComponent when one component's posterior mass collapses
/// (below 1e-10 * n), NonFinite when an update leaves the valid domain.
inline MixtureFit em_fit(const KnnDistances& dist, const EmConfig& cfg = {}) {
    const std::vector<double>& d = dist.d;
    const std::size_t n = d.size();
    const int k = dist.k;
    if (k < 1) throw InvalidK("k must be >= 1");
    if (n < 4) throw TooFewPoints("EM needs at least 4 distances, got " + std::to_string(n));
    if (!(cfg.tol > 0.0)) throw InvalidParams("tol must be > 0");
    if (cfg.max_iter < 1) throw InvalidParams("max_iter must be >= 1");
    for (double v : d)
        if (!(v >= 0.0) || !std::isfinite(v)) throw InvalidParams("distances must be finite and >= 0");

    EmInit init = cfg.init ? *cfg.init : detail::median_split_init(d, k);
    if (!(init.lambda1 > 0.0) || !(init.lambda2 > 0.0) || !std::isfinite(init.lambda1) ||
        !std::isfinite(init.lambda2) || !(init.p >= 0.0) || !(init.p <= 1.0))
        throw InvalidParams("EM init requires lambda1, lambda2 > 0 and p in [0, 1]");

    std::vector<double> d2(n);
    for (std::size_t i = 0; i < n; ++i) d2[i] = d[i] * d[i];

    double lambda1 = init.lambda1, lambda2 = init.lambda2, p = init.p;
    const double eps_mass = 1e-10 * static_cast<double>(n);
    const double K = static_cast<double>(k);

    MixtureFit fit;
    fit.k = k;
    fit.delta.resize(n);
    fit.loglik_trace.push_back(detail::mixture_loglik(d, k, lambda1, lambda2, p));

    auto rel_change = [](double now, double before) {
        return std::abs(now - before) / std::max(std::abs(before), 1e-300);
    };

    bool converged = false;
    int iter = 0;
    while (iter < cfg.max_iter) {
        ++iter;
        // E step
        const double lodds = std::log(p) - std::log(1.0 - p);
        const double lrate = K * (std::log(lambda1) - std::log(lambda2));
        const double drate = (lambda1 - lambda2) * std::numbers::pi;
        double s_delta = 0.0, s_delta_d2 = 0.0, s_comp = 0.0, s_comp_d2 = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double t = lodds + lrate - drate * d2[i];
            double delta;
            if (t >= 0.0) {
                delta = 1.0 / (1.0 + std::exp(-t));
            } else {
                const double e = std::exp(t);
                delta = e / (1.0 + e);
            }
            fit.delta[i] = delta;
            s_delta += delta;
            s_delta_d2 += delta * d2[i];
            s_comp += 1.0 - delta;
            s_comp_d2 += (1.0 - delta) * d2[i];
        }
        if (s_delta < eps_mass || s_comp < eps_mass)
            throw DegenerateComponent("mixture collapsed to a single component at EM iteration " +
                                      std::to_string(iter));

        // M step
        const double new_lambda1 = K * s_delta / (std::numbers::pi * s_delta_d2);
        const double new_lambda2 = K * s_comp / (std::numbers::pi * s_comp_d2);
        const double new_p = s_delta / static_cast<double>(n);
        if (!std::isfinite(new_lambda1) || !std::isfinite(new_lambda2) || !(new_lambda1 > 0.0) ||
            !(new_lambda2 > 0.0) || !std::isfinite(new_p))
            throw NonFinite("EM parameter update is not finite at iteration " + std::to_string(iter));

        const double change = std::max({rel_change(new_lambda1, lambda1),
                                        rel_change(new_lambda2, lambda2), rel_change(new_p, p)});
        lambda1 = new_lambda1;
        lambda2 = new_lambda2;
        p = new_p;
        fit.loglik_trace.push_back(detail::mixture_loglik(d, k, lambda1, lambda2, p));
        if (change < cfg.tol) {
            converged = true;
            break;
        }
    }

    fit.lambda1 = lambda1;
    fit.lambda2 = lambda2;
    fit.p = p;
    fit.converged = converged;
    fit.n_iter = iter;
    if (fit.lambda1 < fit.lambda2) {
        std::swap(fit.lambda1, fit.lambda2);
        fit.p = 1.0 - fit.p;
        for (double& dl : fit.delta) dl = 1.0 - dl;
    }
    return fit;
}

/// Hard feature/clutter labels, index-aligned to the pattern.
struct Labels {
    std::vector<bool> is_feature;

    std::size_t feature_count() const {
        return static_cast<std::size_t>(std::count(is_feature.begin(), is_feature.end(), true));
    }
};

/// A point is feature iff its distance is likelier under the feature
/// component than under the clutter one: f(d; lambda1) >= f(d; lambda2).
/// In posterior terms that is delta_i >= p (the mixing weight divides out),
/// so with equal weights the rule reduces to delta >= 0.5. Ties go to the
/// feature.
inline Labels classify(const MixtureFit& fit) {
    Labels out;
    out.is_feature.resize(fit.delta.size());
    for (std::size_t i = 0; i < fit.delta.size(); ++i) out.is_feature[i] = fit.delta[i] >= fit.p;
    return out;
}

} // namespace knnclutter
