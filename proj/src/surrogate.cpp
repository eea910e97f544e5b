#include "limekit/surrogate.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <string>

namespace limekit {
namespace {

void check_sample(const NeighborhoodSample& sample) {
    if (sample.points.rows() < 1) {
        throw InvalidArgument("sample must contain at least one point");
    }
    if (sample.weights.size() != sample.points.rows() ||
        sample.labels.size() != sample.points.rows()) {
        throw DimensionMismatch("points, weights and labels must agree on n");
    }
    for (Eigen::Index i = 0; i < sample.weights.size(); ++i) {
        if (!(sample.weights[i] > 0.0) || !std::isfinite(sample.weights[i])) {
            throw InvalidArgument("weights must be strictly positive and finite");
        }
    }
}

bool labels_all_equal(const Eigen::VectorXd& labels) {
    for (Eigen::Index i = 1; i < labels.size(); ++i) {
        if (labels[i] != labels[0]) return false;
    }
    return true;
}

// Weighted second moments of the design matrix [1 Z]; every subset fit below
// is solved from these, so the data is traversed once.
struct Moments {
    Eigen::MatrixXd gram;  // (dhat+1)^2
    Eigen::VectorXd xty;
    double yty = 0.0;
};

Moments weighted_moments(const NeighborhoodSample& sample) {
    const Eigen::Index n = sample.size();
    const Eigen::Index d = sample.dim();
    Eigen::MatrixXd design(n, d + 1);
    design.col(0).setOnes();
    design.rightCols(d) = sample.points;
    const Eigen::VectorXd wy = sample.weights.cwiseProduct(sample.labels);
    Moments m;
    m.gram = design.transpose() * sample.weights.asDiagonal() * design;
    m.xty = design.transpose() * wy;
    m.yty = sample.labels.dot(wy);
    return m;
}

// Normal equations restricted to the design columns in `cols` (column 0 is
// the intercept and must be present). Ridge is added to non-intercept
// diagonal entries. Returns nullopt when the system cannot be solved:
// rank-deficient at ridge == 0, or a non-finite solution.
std::optional<Eigen::VectorXd> solve_subset(const Moments& m, const std::vector<int>& cols,
                                            double ridge) {
    const int s = static_cast<int>(cols.size());
    Eigen::MatrixXd a(s, s);
    Eigen::VectorXd b(s);
    for (int i = 0; i < s; ++i) {
        b[i] = m.xty[cols[i]];
        for (int j = 0; j < s; ++j) a(i, j) = m.gram(cols[i], cols[j]);
        if (cols[i] != 0) a(i, i) += ridge;
    }
    Eigen::VectorXd x;
    if (ridge == 0.0) {
        Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
        if (qr.rank() < s) return std::nullopt;
        x = qr.solve(b);
    } else {
        // Positive definite for ridge > 0 since all weights are positive.
        x = a.ldlt().solve(b);
    }
    if (!x.allFinite()) return std::nullopt;
    return x;
}

// Unpenalized weighted RSS of the subset solution, from the moments alone.
double subset_rss(const Moments& m, const std::vector<int>& cols, const Eigen::VectorXd& alpha) {
    const int s = static_cast<int>(cols.size());
    double lin = 0.0;
    double quad = 0.0;
    for (int i = 0; i < s; ++i) {
        lin += alpha[i] * m.xty[cols[i]];
        for (int j = 0; j < s; ++j) quad += alpha[i] * m.gram(cols[i], cols[j]) * alpha[j];
    }
    return m.yty - 2.0 * lin + quad;
}

LinearSurrogate constant_surrogate(double value, int dhat, std::vector<int> selected) {
    LinearSurrogate s;
    s.intercept = value;
    s.coefficients = Eigen::VectorXd::Zero(dhat);
    s.selected = std::move(selected);
    return s;
}

LinearSurrogate assemble(const std::vector<int>& cols, const Eigen::VectorXd& alpha, int dhat) {
    LinearSurrogate s;
    s.coefficients = Eigen::VectorXd::Zero(dhat);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        if (cols[i] == 0) {
            s.intercept = alpha[static_cast<Eigen::Index>(i)];
        } else {
            s.coefficients[cols[i] - 1] = alpha[static_cast<Eigen::Index>(i)];
            s.selected.push_back(cols[i] - 1);
        }
    }
    std::sort(s.selected.begin(), s.selected.end());
    if (!std::isfinite(s.intercept) || !s.coefficients.allFinite()) {
        throw SingularSystem("fit produced non-finite values");
    }
    return s;
}

std::vector<int> all_feature_indices(int dhat) {
    std::vector<int> v(dhat);
    for (int i = 0; i < dhat; ++i) v[i] = i;
    return v;
}

}  // namespace

LinearSurrogate fit_weighted_least_squares(const NeighborhoodSample& sample, double ridge) {
    check_sample(sample);
    if (ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
    const int d = static_cast<int>(sample.dim());
    if (ridge == 0.0 && sample.size() < d + 1) {
        throw SingularSystem("unregularized fit needs at least dhat+1 points, got " +
                             std::to_string(sample.size()));
    }
    Moments m = weighted_moments(sample);
    std::vector<int> cols(static_cast<std::size_t>(d) + 1);
    for (int i = 0; i <= d; ++i) cols[static_cast<std::size_t>(i)] = i;
    auto alpha = solve_subset(m, cols, ridge);
    if (!alpha) throw SingularSystem("normal matrix is rank-deficient");
    if (labels_all_equal(sample.labels)) {
        // The constant model interpolates, so it is the exact minimizer.
        return constant_surrogate(sample.labels[0], d, all_feature_indices(d));
    }
    return assemble(cols, *alpha, d);
}

LinearSurrogate fit_k_sparse(const NeighborhoodSample& sample, int k, double ridge) {
    check_sample(sample);
    if (ridge < 0.0) throw InvalidArgument("ridge must be nonnegative");
    const int d = static_cast<int>(sample.dim());
    if (k < 1 || k > d) {
        throw InvalidK("k must lie in [1, dhat], got " + std::to_string(k));
    }
    const Moments m = weighted_moments(sample);

    std::vector<int> cols{0};
    std::vector<bool> in_model(static_cast<std::size_t>(d) + 1, false);
    for (int step = 0; step < k; ++step) {
        int best_feature = -1;
        double best_rss = std::numeric_limits<double>::infinity();
        std::vector<int> trial = cols;
        trial.push_back(0);
        for (int j = 1; j <= d; ++j) {
            if (in_model[static_cast<std::size_t>(j)]) continue;
            trial.back() = j;
            auto alpha = solve_subset(m, trial, ridge);
            if (!alpha) continue;  // feature would make the subsystem singular
            const double rss = subset_rss(m, trial, *alpha);
            if (rss < best_rss) {
                best_rss = rss;
                best_feature = j;
            }
        }
        if (best_feature < 0) break;
        cols.push_back(best_feature);
        in_model[static_cast<std::size_t>(best_feature)] = true;
    }

    auto alpha = solve_subset(m, cols, ridge);
    if (!alpha) throw SingularSystem("selected subsystem is rank-deficient");
    if (labels_all_equal(sample.labels)) {
        std::vector<int> selected;
        for (int c : cols) {
            if (c != 0) selected.push_back(c - 1);
        }
        std::sort(selected.begin(), selected.end());
        return constant_surrogate(sample.labels[0], d, std::move(selected));
    }
    return assemble(cols, *alpha, d);
}

double predict(const LinearSurrogate& surrogate, const Eigen::VectorXd& point) {
    if (point.size() != surrogate.coefficients.size()) {
        throw DimensionMismatch("point length does not match surrogate dimension");
    }
    return surrogate.intercept + surrogate.coefficients.dot(point);
}

bool is_degenerate(const LinearSurrogate& surrogate, double tol) {
    if (!(tol > 0.0)) throw InvalidArgument("tol must be positive");
    if (surrogate.coefficients.size() == 0) return true;
    return surrogate.coefficients.cwiseAbs().maxCoeff() < tol;
}

}  // namespace limekit
