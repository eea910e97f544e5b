#pragma once

#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "limekit/blackbox.hpp"
#include "limekit/metrics.hpp"
#include "limekit/neighborhood.hpp"
#include "limekit/surrogate.hpp"

namespace limekit {

enum class Method { Lime, Slime };

/// Full recipe for one explanation. Use the factories: they pick the sampler
/// and kernel that match the method and conversion (binary toggles plus
/// kernel weighting for LIME; Gaussian offsets for tabular s-LIME, the
/// uniform cube for segmented s-LIME).
struct ExplainConfig {
    Method method = Method::Lime;
    double sigma = 0.75;
    int n = 5000;
    int k = 6;
    KernelSpec kernel;    // LIME only
    SamplerSpec sampler;
    ConversionSpec conversion;
    std::uint64_t seed = 0;

    static ExplainConfig lime(double sigma, int n, int k, ConversionSpec conversion,
                              std::uint64_t seed);
    static ExplainConfig slime(double sigma, int n, int k, ConversionSpec conversion,
                               std::uint64_t seed);
    ExplainConfig with_sigma(double sigma) const;
    ExplainConfig with_seed(std::uint64_t seed) const;
};

struct Explanation {
    LinearSurrogate surrogate;
    FidelityReport report;
    bool degenerate = false;
    double ess = 0.0;
    ExplainConfig config;
    std::vector<std::string> warnings;  // diagnostics; not part of the JSON contract
};

/// Classic LIME: binary toggle neighborhood of the target, kernel-weighted
/// k-sparse least squares on the black-box labels. On a rank-deficient
/// system (all weight concentrated on the target) the fit is retried with
/// ridge 1e-8 and, failing that, degrades to the zero surrogate rather than
/// erroring.
Explanation explain_lime(const BlackBox& model, const Eigen::VectorXd& target,
                         const ExplainConfig& config);

/// s-LIME: locality comes from the generating distribution instead of
/// weights. Draws n points from the width-sigma distribution, labels them,
/// and fits the k-sparse surrogate with unit weights. For tabular
/// conversions the fit runs on the offsets themselves, so the coefficients
/// estimate the gradient of f at the target.
Explanation explain_slime(const BlackBox& model, const Eigen::VectorXd& target,
                          const ExplainConfig& config);

/// Dispatch on config.method.
Explanation explain(const BlackBox& model, const Eigen::VectorXd& target,
                    const ExplainConfig& config);

struct SweepRow {
    double sigma = 0.0;
    std::optional<Explanation> explanation;
    std::optional<std::string> error;
};

/// One explanation per sigma (ascending grid); row i reruns the base config
/// with sigma_i and a seed derived from (base.seed, i). Per-row failures are
/// recorded in the row, the sweep itself never throws.
std::vector<SweepRow> sweep_sigma(const BlackBox& model, const Eigen::VectorXd& target,
                                  const ExplainConfig& base, const std::vector<double>& sigmas);

/// Row with the highest r2; ties go to the smaller sigma (more local).
/// Throws AllRowsFailed when no row carries an r2.
std::pair<double, Explanation> select_best_sigma(const std::vector<SweepRow>& sweep);

/// Logarithmically spaced grid from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, int points);

/// Stable JSON document for one explanation; field order is fixed and no
/// wall-clock data is included, so identical runs give identical bytes.
std::string explanation_to_json(const Explanation& explanation);

/// CSV table (sigma, r2, degenerate, ess, recall, precision, coverage) with
/// empty cells for absent metrics and failed rows.
std::string sweep_to_csv(const std::vector<SweepRow>& rows);

}  // namespace limekit
