#include "limekit/oracle.hpp"

#include <cmath>
#include <quadmath.h>
#include <algorithm>
#include <numeric>
#include <optional>
#include <vector>

namespace limekit {
namespace {

constexpr int kMaxDhat = 14;  // 16384 support points

void check_dhat(int dhat) {
    if (dhat < 1 || dhat > kMaxDhat) {
        throw InvalidArgument("enumeration supports 1 <= dhat <= 14, got " + std::to_string(dhat));
    }
}

// Concentrated kernels make the weighted design "stiff": row weights span
// hundreds of orders of magnitude while the system stays exactly full-rank.
// Normal equations collapse that hierarchy (small shells vanish into the
// rounding of gram entries), so the population fit uses Householder QR on
// the sqrt(weight)-scaled design with rows presorted by decreasing weight
// (Powell-Reid ordering), carried in extended precision.
using quad = __float128;

inline quad qabs(quad x) { return x < 0 ? -x : x; }

// Least squares min |A x - b| over the rows provided; A is m x n dense in
// row-major order, m >= 1. Returns nullopt when a diagonal of R is zero
// beyond tolerance relative to the first, i.e. a genuinely deficient design.
std::optional<std::vector<quad>> solve_qr_row_sorted(std::vector<quad> a, std::vector<quad> b,
                                                     int m, int n) {
    static const quad kRankTol = static_cast<quad>(1e-250) * static_cast<quad>(1e-250) *
                                 static_cast<quad>(1e-250) * static_cast<quad>(1e-250);
    if (m < n) return std::nullopt;
    quad first_diag = 0;
    for (int k = 0; k < n; ++k) {
        quad norm2 = 0;
        for (int i = k; i < m; ++i) {
            const quad v = a[static_cast<std::size_t>(i) * n + k];
            norm2 += v * v;
        }
        const quad norm = sqrtq(norm2);
        if (k == 0) first_diag = norm;
        if (norm == 0 || norm <= first_diag * kRankTol) return std::nullopt;
        const quad akk = a[static_cast<std::size_t>(k) * n + k];
        const quad alpha = akk >= 0 ? -norm : norm;
        // Householder vector v = x - alpha e1, stored in place of column k.
        a[static_cast<std::size_t>(k) * n + k] = akk - alpha;
        quad vtv = 0;
        for (int i = k; i < m; ++i) {
            const quad v = a[static_cast<std::size_t>(i) * n + k];
            vtv += v * v;
        }
        for (int j = k + 1; j < n; ++j) {
            quad dot = 0;
            for (int i = k; i < m; ++i) {
                dot += a[static_cast<std::size_t>(i) * n + k] * a[static_cast<std::size_t>(i) * n + j];
            }
            const quad factor = 2 * dot / vtv;
            for (int i = k; i < m; ++i) {
                a[static_cast<std::size_t>(i) * n + j] -=
                    factor * a[static_cast<std::size_t>(i) * n + k];
            }
        }
        quad dot = 0;
        for (int i = k; i < m; ++i) {
            dot += a[static_cast<std::size_t>(i) * n + k] * b[static_cast<std::size_t>(i)];
        }
        const quad factor = 2 * dot / vtv;
        for (int i = k; i < m; ++i) {
            b[static_cast<std::size_t>(i)] -= factor * a[static_cast<std::size_t>(i) * n + k];
        }
        a[static_cast<std::size_t>(k) * n + k] = alpha;
    }
    std::vector<quad> x(static_cast<std::size_t>(n));
    for (int i = n - 1; i >= 0; --i) {
        quad sum = b[static_cast<std::size_t>(i)];
        for (int j = i + 1; j < n; ++j) {
            sum -= a[static_cast<std::size_t>(i) * n + j] * x[static_cast<std::size_t>(j)];
        }
        x[static_cast<std::size_t>(i)] = sum / a[static_cast<std::size_t>(i) * n + i];
    }
    return x;
}

}  // namespace

DiscreteDistribution DiscreteDistribution::uniform(int dhat) {
    check_dhat(dhat);
    DiscreteDistribution d;
    d.dhat = dhat;
    const auto support = static_cast<Eigen::Index>(1) << dhat;
    d.mass = Eigen::VectorXd::Constant(support, 1.0 / static_cast<double>(support));
    return d;
}

void DiscreteDistribution::validate() const {
    check_dhat(dhat);
    const auto support = static_cast<Eigen::Index>(1) << dhat;
    if (mass.size() != support) {
        throw DimensionMismatch("mass must list all 2^dhat support points");
    }
    for (Eigen::Index i = 0; i < mass.size(); ++i) {
        if (!(mass[i] >= 0.0) || !std::isfinite(mass[i])) {
            throw InvalidArgument("mass entries must be nonnegative and finite");
        }
    }
    if (std::abs(mass.sum() - 1.0) > 1e-12) {
        throw InvalidArgument("mass must sum to 1 within 1e-12");
    }
}

Eigen::VectorXd binary_point(int dhat, std::uint64_t index) {
    check_dhat(dhat);
    Eigen::VectorXd z(dhat);
    for (int j = 0; j < dhat; ++j) z[j] = static_cast<double>((index >> j) & 1ULL);
    return z;
}

namespace {

// Shared population solve: per-point weights are supplied at extended
// precision so callers can keep exact scaling relationships between runs.
LinearSurrogate population_minimizer(const BlackBox& model, const ConversionSpec& conversion,
                                     int dhat, const std::vector<quad>& point_weights) {
    const int cols = dhat + 1;
    std::vector<std::size_t> rows;
    for (std::size_t idx = 0; idx < point_weights.size(); ++idx) {
        if (point_weights[idx] > 0) rows.push_back(idx);
    }
    // Heaviest rows first; ties keep the enumeration order.
    std::stable_sort(rows.begin(), rows.end(), [&](std::size_t l, std::size_t r) {
        return point_weights[l] > point_weights[r];
    });

    const int m = static_cast<int>(rows.size());

    // Rank deficiency is a property of the support alone (weights are
    // positive there), so detect it exactly on the unweighted 0/1 design;
    // pivot magnitudes in the weighted solve cannot distinguish a dependent
    // support from legitimate deep grading.
    if (m < cols) throw SingularSystem("population design is rank-deficient");
    Eigen::MatrixXd support_design(m, cols);
    for (int i = 0; i < m; ++i) {
        support_design(i, 0) = 1.0;
        support_design.row(i).tail(dhat) =
            binary_point(dhat, rows[static_cast<std::size_t>(i)]);
    }
    if (Eigen::ColPivHouseholderQR<Eigen::MatrixXd>(support_design).rank() < cols) {
        throw SingularSystem("population design is rank-deficient");
    }

    std::vector<quad> design(static_cast<std::size_t>(m) * cols, 0);
    std::vector<quad> target(static_cast<std::size_t>(m), 0);
    for (int i = 0; i < m; ++i) {
        const std::size_t idx = rows[static_cast<std::size_t>(i)];
        const Eigen::VectorXd z = binary_point(dhat, idx);
        const quad scale = sqrtq(point_weights[idx]);
        design[static_cast<std::size_t>(i) * cols] = scale;
        for (int j = 0; j < dhat; ++j) {
            design[static_cast<std::size_t>(i) * cols + j + 1] = scale * static_cast<quad>(z[j]);
        }
        target[static_cast<std::size_t>(i)] =
            scale * static_cast<quad>(model.predict(convert(conversion, z)));
    }

    const auto alpha = solve_qr_row_sorted(std::move(design), std::move(target), m, cols);
    if (!alpha) throw SingularSystem("population design is rank-deficient");
    LinearSurrogate surrogate;
    surrogate.intercept = static_cast<double>((*alpha)[0]);
    surrogate.coefficients.resize(dhat);
    for (int j = 0; j < dhat; ++j) {
        surrogate.coefficients[j] = static_cast<double>((*alpha)[static_cast<std::size_t>(j) + 1]);
    }
    surrogate.selected.resize(static_cast<std::size_t>(dhat));
    std::iota(surrogate.selected.begin(), surrogate.selected.end(), 0);
    if (!std::isfinite(surrogate.intercept) || !surrogate.coefficients.allFinite()) {
        throw SingularSystem("population solve produced non-finite values");
    }
    return surrogate;
}

}  // namespace

LinearSurrogate exact_weighted_minimizer(
    const BlackBox& model, const ConversionSpec& conversion, const DiscreteDistribution& dist,
    const std::function<double(const Eigen::VectorXd&)>& weight_fn) {
    dist.validate();
    if (conversion.surrogate_dim() != dist.dhat) {
        throw DimensionMismatch("conversion surrogate dimension does not match dist.dhat");
    }
    const auto support = static_cast<std::size_t>(dist.mass.size());
    std::vector<quad> weights(support, 0);
    for (std::size_t idx = 0; idx < support; ++idx) {
        const double mass = dist.mass[static_cast<Eigen::Index>(idx)];
        if (mass == 0.0) continue;
        const double w = weight_fn(binary_point(dist.dhat, idx));
        if (!(w >= 0.0) || !std::isfinite(w)) {
            throw InvalidArgument("weight function must return nonnegative finite values");
        }
        weights[idx] = static_cast<quad>(mass) * static_cast<quad>(w);
    }
    return population_minimizer(model, conversion, dist.dhat, weights);
}

DiscreteDistribution lemma1_distribution(const DiscreteDistribution& dist,
                                         const KernelSpec& kernel, const Eigen::VectorXd& target) {
    dist.validate();
    if (target.size() != dist.dhat) {
        throw DimensionMismatch("target length does not match dist.dhat");
    }
    DiscreteDistribution out;
    out.dhat = dist.dhat;
    out.mass.resize(dist.mass.size());
    for (Eigen::Index i = 0; i < dist.mass.size(); ++i) {
        const Eigen::VectorXd z = binary_point(dist.dhat, static_cast<std::uint64_t>(i));
        out.mass[i] = kernel_weight(target, z, kernel) * dist.mass[i];
    }
    const double normalizer = out.mass.sum();
    if (!(normalizer > 0.0)) throw ZeroMass("kernel reweighting produced zero total mass");
    out.mass /= normalizer;
    return out;
}

double verify_lemma1(const BlackBox& model, const ConversionSpec& conversion,
                     const DiscreteDistribution& dist, const KernelSpec& kernel) {
    dist.validate();
    if (conversion.surrogate_dim() != dist.dhat) {
        throw DimensionMismatch("conversion surrogate dimension does not match dist.dhat");
    }
    const Eigen::VectorXd target = Eigen::VectorXd::Ones(dist.dhat);

    // The reweighted distribution is carried at extended precision: rounding
    // its masses to double would be amplified by the weight sensitivity of
    // the minimizer, drowning the algebraic identity under test.
    const auto support = static_cast<std::size_t>(dist.mass.size());
    std::vector<quad> weighted_mass(support, 0);
    quad normalizer = 0;
    for (std::size_t idx = 0; idx < support; ++idx) {
        const double mass = dist.mass[static_cast<Eigen::Index>(idx)];
        if (mass == 0.0) continue;
        const double pi = kernel_weight(target, binary_point(dist.dhat, idx), kernel);
        weighted_mass[idx] = static_cast<quad>(mass) * static_cast<quad>(pi);
        normalizer += weighted_mass[idx];
    }
    if (!(normalizer > 0)) throw ZeroMass("kernel reweighting produced zero total mass");
    std::vector<quad> renormalized(support, 0);
    for (std::size_t idx = 0; idx < support; ++idx) {
        renormalized[idx] = weighted_mass[idx] / normalizer;
    }

    const LinearSurrogate weighted =
        population_minimizer(model, conversion, dist.dhat, weighted_mass);
    const LinearSurrogate unweighted =
        population_minimizer(model, conversion, dist.dhat, renormalized);

    double dist_inf = std::abs(weighted.intercept - unweighted.intercept);
    dist_inf = std::max(dist_inf,
                        (weighted.coefficients - unweighted.coefficients).cwiseAbs().maxCoeff());
    return dist_inf;
}

}  // namespace limekit
