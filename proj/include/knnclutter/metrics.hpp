#pragma once

#include "knnclutter/errors.hpp"
#include "knnclutter/mixture.hpp"

#include <cstddef>
#include <limits>
#include <string>
#include <vector>

namespace knnclutter {

/// Classification rates against ground truth; feature is the positive class.
struct ConfusionRates {
    std::size_t tp = 0, fp = 0, tn = 0, fn = 0;
    double tpr = 0.0;  // tp / (tp + fn)
    double fpr = 0.0;  // fp / (fp + tn)
    double acc = 0.0;  // (tp + tn) / n

    std::size_t total() const noexcept { return tp + fp + tn + fn; }
};

inline ConfusionRates rates(const Labels& pred, const std::vector<bool>& truth) {
    if (truth.empty()) throw MissingTruth("no truth labels");
    if (pred.is_feature.size() != truth.size())
        throw LengthMismatch("prediction length " + std::to_string(pred.is_feature.size()) +
                             " vs truth length " + std::to_string(truth.size()));
    ConfusionRates r;
    for (std::size_t i = 0; i < truth.size(); ++i) {
        if (truth[i]) {
            if (pred.is_feature[i]) ++r.tp; else ++r.fn;
        } else {
            if (pred.is_feature[i]) ++r.fp; else ++r.tn;
        }
    }
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const std::size_t pos = r.tp + r.fn;
    const std::size_t neg = r.fp + r.tn;
    r.tpr = pos > 0 ? static_cast<double>(r.tp) / static_cast<double>(pos) : nan;
    r.fpr = neg > 0 ? static_cast<double>(r.fp) / static_cast<double>(neg) : nan;
    r.acc = static_cast<double>(r.tp + r.tn) / static_cast<double>(r.total());
    return r;
}

inline ConfusionRates rates(const Labels& pred, const PointPattern& pattern) {
    if (!pattern.has_truth()) throw MissingTruth("pattern carries no ground-truth labels");
    return rates(pred, pattern.truth());
}

} // namespace knnclutter
