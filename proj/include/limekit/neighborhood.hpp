#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "limekit/errors.hpp"

namespace limekit {

enum class Distance { Euclidean };

/// Exponential kernel pi(z) = exp(-D(target, z)^2 / sigma^2) on the
/// surrogate space. Smaller sigma concentrates the weight near the target.
struct KernelSpec {
    double sigma = 0.75;
    Distance distance = Distance::Euclidean;
};

enum class SamplerKind { BinaryToggle, UniformCube, GaussianOffset };

struct SamplerSpec {
    SamplerKind kind = SamplerKind::BinaryToggle;
    double sigma = 1.0;  // neighborhood width; UniformCube requires sigma in (0, 1]
    int n = 1;
    std::uint64_t seed = 0;
};

/// Maps surrogate-space points back to the black box's original space.
///
/// Tabular: eta(z) = target + z (z is an offset vector, dhat == d).
/// Segmented: each original feature i belongs to one segment j and is
/// interpolated between baseline and target, eta(z)[i] =
/// (1 - z[j]) * baseline[i] + z[j] * target[i]. Binary points are the
/// special case z[j] in {0, 1}: keep the target's segment or replace it
/// with the baseline's.
struct ConversionSpec {
    enum class Kind { Tabular, Segmented };

    Kind kind = Kind::Tabular;
    Eigen::VectorXd target;
    Eigen::VectorXd baseline;     // Segmented only
    std::vector<int> segment_of;  // Segmented only: original index -> segment index

    static ConversionSpec tabular(Eigen::VectorXd target);
    static ConversionSpec segmented(Eigen::VectorXd target, Eigen::VectorXd baseline,
                                    std::vector<int> segment_of);

    int original_dim() const { return static_cast<int>(target.size()); }
    int surrogate_dim() const;
    /// True when every original feature is its own segment (segment j == feature j).
    bool identity_segments() const;
};

/// One segment per feature, the segmented analogue of a tabular instance.
std::vector<int> identity_segmentation(int d);

/// Binary neighborhood of the all-ones target representation. Row 0 is the
/// target itself; each following row toggles off m bits, with m uniform on
/// {1..dhat} and the bit subset uniform among subsets of size m, so every
/// locality shell is covered and the target row stays unique.
/// Deterministic given spec.seed; rows derive independent streams so the
/// result does not depend on generation order.
Eigen::MatrixXd sample_binary_neighborhood(int dhat, const SamplerSpec& spec);

/// I.i.d. rows uniform on [1-sigma, 1]^dhat, sigma in (0, 1].
Eigen::MatrixXd sample_uniform_cube(int dhat, const SamplerSpec& spec);

/// I.i.d. rows from N(0, sigma^2 I).
Eigen::MatrixXd sample_gaussian_offsets(int dhat, const SamplerSpec& spec);

/// exp(-|target - point|^2 / sigma^2), clamped to the smallest positive
/// normal double so downstream weights stay strictly positive.
double kernel_weight(const Eigen::VectorXd& target, const Eigen::VectorXd& point,
                     const KernelSpec& kernel);

/// Surrogate point -> original-space instance.
Eigen::VectorXd convert(const ConversionSpec& conversion, const Eigen::VectorXd& point);

/// (sum w)^2 / sum w^2: the number of equally-weighted samples the weighted
/// set is worth. Lies in [1, n]; near 1 means the weight mass sits on a
/// single point.
double effective_sample_size(const Eigen::VectorXd& weights);

/// CSV round-trip for segmentation maps, header `original_index,segment_index`.
void save_segmentation_csv(const std::string& path, const std::vector<int>& segment_of);
std::vector<int> load_segmentation_csv(const std::string& path);

}  // namespace limekit
