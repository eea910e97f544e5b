#pragma once

#include <Eigen/Dense>
#include <vector>

#include "limekit/errors.hpp"

namespace limekit {

/// Sparse affine explanation g(z) = intercept + coefficients . z.
///
/// `selected` lists the features allowed to carry a non-zero coefficient;
/// every coefficient outside it is exactly 0. The intercept never counts
/// toward the sparsity budget.
struct LinearSurrogate {
    double intercept = 0.0;
    Eigen::VectorXd coefficients;
    std::vector<int> selected;

    int dim() const { return static_cast<int>(coefficients.size()); }
};

/// Training set for one explanation: surrogate-space points with strictly
/// positive weights and black-box labels. Weights are all 1 when the
/// neighborhood distribution already encodes locality.
struct NeighborhoodSample {
    Eigen::MatrixXd points;   // n x dhat
    Eigen::VectorXd weights;  // n
    Eigen::VectorXd labels;   // n

    Eigen::Index size() const { return points.rows(); }
    Eigen::Index dim() const { return points.cols(); }
};

/// Minimizes sum_i w_i (y_i - a0 - a.z_i)^2 + ridge * |a|^2 via the normal
/// equations on the weight-scaled design matrix, intercept unpenalized.
///
/// Throws SingularSystem when ridge == 0 and the normal matrix is
/// rank-deficient beyond tolerance (callers may retry with a small ridge),
/// DimensionMismatch on inconsistent shapes.
LinearSurrogate fit_weighted_least_squares(const NeighborhoodSample& sample, double ridge);

/// Greedy forward selection: starting from the intercept-only model,
/// repeatedly adds the feature whose inclusion most reduces the weighted
/// residual sum of squares (ties go to the lowest feature index), up to k
/// features, then refits least squares on the selected set. Candidates whose
/// restricted system is rank-deficient at ridge 0 cannot be evaluated and are
/// skipped, so fewer than k features may end up selected; with fully
/// concentrated weights that degrades to the intercept-only model.
LinearSurrogate fit_k_sparse(const NeighborhoodSample& sample, int k, double ridge);

/// Affine evaluation of the surrogate at a surrogate-space point.
double predict(const LinearSurrogate& surrogate, const Eigen::VectorXd& point);

/// True iff every coefficient magnitude is below tol (intercept ignored):
/// the surrogate carries no attribution information.
bool is_degenerate(const LinearSurrogate& surrogate, double tol = 1e-9);

}  // namespace limekit
