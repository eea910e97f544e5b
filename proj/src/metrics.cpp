#include "limekit/metrics.hpp"

#include <algorithm>

namespace limekit {
namespace {

std::size_t intersection_size(std::vector<int> a, std::vector<int> b) {
    std::sort(a.begin(), a.end());
    std::sort(b.begin(), b.end());
    a.erase(std::unique(a.begin(), a.end()), a.end());
    b.erase(std::unique(b.begin(), b.end()), b.end());
    std::vector<int> common;
    std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(common));
    return common.size();
}

std::size_t unique_count(std::vector<int> v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
    return v.size();
}

}  // namespace

double r2_score(const LinearSurrogate& surrogate, const NeighborhoodSample& sample) {
    if (sample.size() < 2) throw InvalidArgument("r2 needs at least 2 points");
    if (sample.dim() != surrogate.coefficients.size() ||
        sample.weights.size() != sample.size() || sample.labels.size() != sample.size()) {
        throw DimensionMismatch("sample shapes do not match surrogate");
    }
    const Eigen::VectorXd fitted =
        (sample.points * surrogate.coefficients).array() + surrogate.intercept;
    const Eigen::VectorXd residual = sample.labels - fitted;
    const double rss = residual.dot(sample.weights.cwiseProduct(residual));

    const double mean = sample.weights.dot(sample.labels) / sample.weights.sum();
    const Eigen::VectorXd centered = sample.labels.array() - mean;
    const double tss = centered.dot(sample.weights.cwiseProduct(centered));

    bool constant = true;
    for (Eigen::Index i = 1; i < sample.labels.size(); ++i) {
        if (sample.labels[i] != sample.labels[0]) {
            constant = false;
            break;
        }
    }
    if (constant) {
        if (rss <= 1e-24) return 1.0;  // the surrogate interpolates the flat labels
        throw ZeroVariance("labels carry no variance but the surrogate leaves residuals");
    }
    return 1.0 - rss / tss;
}

std::pair<double, double> recall_precision(const std::vector<int>& gold,
                                           const std::vector<int>& explained) {
    if (gold.empty()) throw EmptyGold("gold feature set is empty");
    if (explained.empty()) throw EmptyExplained("explained feature set is empty");
    const auto common = static_cast<double>(intersection_size(gold, explained));
    return {common / static_cast<double>(unique_count(gold)),
            common / static_cast<double>(unique_count(explained))};
}

double coverage(const std::vector<int>& gold_segments, const std::vector<int>& explained_segments) {
    if (gold_segments.empty()) throw EmptyGold("gold segment set is empty");
    const auto common = static_cast<double>(intersection_size(gold_segments, explained_segments));
    return common / static_cast<double>(unique_count(gold_segments));
}

}  // namespace limekit
