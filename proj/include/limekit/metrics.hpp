#pragma once

#include <optional>
#include <utility>
#include <vector>

#include "limekit/surrogate.hpp"

namespace limekit {

/// Quality scores of one explanation. recall/precision are present only when
/// the black box exposes gold-standard features, coverage only when gold
/// segments apply. r2 is unset when the neighborhood labels carried no
/// variance and the surrogate left residuals (`zero_variance` is then true).
struct FidelityReport {
    std::optional<double> r2;
    bool zero_variance = false;
    std::optional<double> recall;
    std::optional<double> precision;
    std::optional<double> coverage;
};

/// Weighted coefficient of determination 1 - RSS/TSS of the surrogate on the
/// sample, using the sample's own weights. 1 means a perfect fit, 0 matches
/// the best constant model, negative is worse than it. When all labels are
/// identical: returns 1 if the surrogate interpolates them, otherwise throws
/// ZeroVariance.
double r2_score(const LinearSurrogate& surrogate, const NeighborhoodSample& sample);

/// (|gold ∩ explained| / |gold|, |gold ∩ explained| / |explained|)
std::pair<double, double> recall_precision(const std::vector<int>& gold,
                                           const std::vector<int>& explained);

/// |gold ∩ explained| / |gold| over segment indices.
double coverage(const std::vector<int>& gold_segments, const std::vector<int>& explained_segments);

}  // namespace limekit
