#pragma once

#include <Eigen/Dense>
#include <functional>

#include "limekit/blackbox.hpp"
#include "limekit/neighborhood.hpp"
#include "limekit/surrogate.hpp"

namespace limekit {

/// A distribution over all 2^dhat binary surrogate vectors, enumerated in
/// counting order (bit j of the support index is coordinate j). Capped at
/// dhat <= 14; this exists for desk-scale verification, not production use.
struct DiscreteDistribution {
    int dhat = 1;
    Eigen::VectorXd mass;  // 2^dhat nonnegative entries summing to 1 (within 1e-12)

    static DiscreteDistribution uniform(int dhat);
    void validate() const;
};

/// Coordinates of support point `index` of a dhat-dimensional enumeration.
Eigen::VectorXd binary_point(int dhat, std::uint64_t index);

/// Exact minimizer of E[ weight(z) * (f(eta(z)) - g(z))^2 ] over affine g on
/// the full support — no sampling, no sparsity constraint. Solved by
/// Householder QR on the sqrt(weight)-scaled design, rows ordered by
/// decreasing weight and carried in extended precision, so results stay
/// meaningful even when a sharp kernel grades the weights over hundreds of
/// orders of magnitude. Throws SingularSystem when the population design is
/// rank-deficient (e.g. a point mass).
LinearSurrogate exact_weighted_minimizer(
    const BlackBox& model, const ConversionSpec& conversion, const DiscreteDistribution& dist,
    const std::function<double(const Eigen::VectorXd&)>& weight_fn);

/// Reweights every support point by its kernel value against `target` and
/// renormalizes: the generating distribution under which unweighted fitting
/// minimizes the same expected loss as kernel-weighted fitting under `dist`.
DiscreteDistribution lemma1_distribution(const DiscreteDistribution& dist,
                                         const KernelSpec& kernel, const Eigen::VectorXd& target);

/// L-infinity distance between the kernel-weighted minimizer under `dist`
/// and the unit-weight minimizer under the reweighted distribution. Equal
/// minimizers (distance <= 1e-8 on full-rank inputs) are the executable form
/// of the equivalence between the two explainers.
double verify_lemma1(const BlackBox& model, const ConversionSpec& conversion,
                     const DiscreteDistribution& dist, const KernelSpec& kernel);

}  // namespace limekit
