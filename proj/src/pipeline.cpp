#include "limekit/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <sstream>

#include <json.hpp>

#include "limekit/rng.hpp"

namespace limekit {
namespace {

constexpr double kDegeneracyTol = 1e-9;
constexpr double kRetryRidge = 1e-8;
constexpr double kEssWarningLevel = 1.5;

void validate_config(const ExplainConfig& config, const Eigen::VectorXd& target) {
    if (target.size() != config.conversion.target.size() || target != config.conversion.target) {
        throw InvalidArgument("target instance differs from the conversion target");
    }
    const int dhat = config.conversion.surrogate_dim();
    if (config.n < 1) throw InvalidArgument("n must be positive");
    if (config.k < 1 || config.k > dhat) throw InvalidK("k must lie in [1, dhat]");
    if (!(config.sigma > 0.0)) throw InvalidSigma("sigma must be positive");
    if (config.method == Method::Lime) {
        if (config.sampler.kind != SamplerKind::BinaryToggle) {
            throw InvalidArgument("LIME requires the binary toggle sampler");
        }
        if (config.conversion.kind != ConversionSpec::Kind::Segmented) {
            throw InvalidArgument("LIME operates on segment toggles; use a segmented conversion");
        }
        if (config.kernel.sigma != config.sigma) {
            throw InvalidArgument("kernel sigma must equal the config sigma");
        }
    } else {
        const bool tabular = config.conversion.kind == ConversionSpec::Kind::Tabular;
        const SamplerKind expected = tabular ? SamplerKind::GaussianOffset : SamplerKind::UniformCube;
        if (config.sampler.kind != expected) {
            throw InvalidArgument("s-LIME sampler does not match the conversion kind");
        }
        if (config.sampler.sigma != config.sigma) {
            throw InvalidArgument("sampler sigma must equal the config sigma");
        }
    }
}

// ridge-0 fit, retry with a small ridge on rank deficiency, and as a last
// resort the best constant model with zero coefficients (the degenerate
// explanation a fully concentrated neighborhood deserves).
LinearSurrogate fit_with_recovery(const NeighborhoodSample& sample, int k,
                                  std::vector<std::string>& warnings) {
    try {
        return fit_k_sparse(sample, k, 0.0);
    } catch (const SingularSystem&) {
        warnings.emplace_back("rank-deficient weighted system; retried with ridge 1e-8");
    }
    try {
        return fit_k_sparse(sample, k, kRetryRidge);
    } catch (const SingularSystem&) {
        warnings.emplace_back("ridge retry failed; returning the zero surrogate");
    }
    LinearSurrogate zero;
    zero.intercept = sample.weights.dot(sample.labels) / sample.weights.sum();
    zero.coefficients = Eigen::VectorXd::Zero(sample.dim());
    return zero;
}

std::vector<int> nonzero_selected(const LinearSurrogate& surrogate) {
    std::vector<int> out;
    for (int i : surrogate.selected) {
        if (surrogate.coefficients[i] != 0.0) out.push_back(i);
    }
    return out;
}

void attach_metrics(Explanation& explanation, const BlackBox& model,
                    const NeighborhoodSample& sample) {
    try {
        explanation.report.r2 = r2_score(explanation.surrogate, sample);
    } catch (const ZeroVariance&) {
        explanation.report.zero_variance = true;
        explanation.warnings.emplace_back("neighborhood labels carry no variance; r2 undefined");
    }

    if (!model.gold_features() || model.gold_features()->empty()) return;
    const std::vector<int> explained = nonzero_selected(explanation.surrogate);
    if (explained.empty()) {
        explanation.warnings.emplace_back("degenerate surrogate; gold agreement not scored");
        return;
    }
    const ConversionSpec& conversion = explanation.config.conversion;
    if (conversion.identity_segments()) {
        const auto [rec, prec] = recall_precision(*model.gold_features(), explained);
        explanation.report.recall = rec;
        explanation.report.precision = prec;
    } else {
        std::vector<int> gold_segments;
        for (int feature : *model.gold_features()) {
            gold_segments.push_back(conversion.segment_of[static_cast<std::size_t>(feature)]);
        }
        explanation.report.coverage = coverage(gold_segments, explained);
    }
}

Explanation finish(const BlackBox& model, const NeighborhoodSample& sample,
                   const ExplainConfig& config, std::vector<std::string> warnings) {
    Explanation explanation;
    explanation.config = config;
    explanation.warnings = std::move(warnings);
    explanation.surrogate = fit_with_recovery(sample, config.k, explanation.warnings);
    explanation.degenerate = is_degenerate(explanation.surrogate, kDegeneracyTol);
    explanation.ess = effective_sample_size(sample.weights);
    if (explanation.ess < kEssWarningLevel) {
        explanation.warnings.emplace_back(
            "DegenerateWarning: effective sample size below 1.5; weights are concentrated on the target");
    }
    attach_metrics(explanation, model, sample);
    return explanation;
}

std::string format_double(double value) {
    char buffer[32];
    auto res = std::to_chars(buffer, buffer + sizeof(buffer), value);
    return std::string(buffer, res.ptr);
}

}  // namespace

ExplainConfig ExplainConfig::lime(double sigma, int n, int k, ConversionSpec conversion,
                                  std::uint64_t seed) {
    ExplainConfig c;
    c.method = Method::Lime;
    c.sigma = sigma;
    c.n = n;
    c.k = k;
    c.kernel = KernelSpec{sigma, Distance::Euclidean};
    c.sampler = SamplerSpec{SamplerKind::BinaryToggle, sigma, n, seed};
    c.conversion = std::move(conversion);
    c.seed = seed;
    return c;
}

ExplainConfig ExplainConfig::slime(double sigma, int n, int k, ConversionSpec conversion,
                                   std::uint64_t seed) {
    ExplainConfig c;
    c.method = Method::Slime;
    c.sigma = sigma;
    c.n = n;
    c.k = k;
    const bool tabular = conversion.kind == ConversionSpec::Kind::Tabular;
    c.sampler = SamplerSpec{tabular ? SamplerKind::GaussianOffset : SamplerKind::UniformCube,
                            sigma, n, seed};
    c.conversion = std::move(conversion);
    c.seed = seed;
    return c;
}

ExplainConfig ExplainConfig::with_sigma(double sigma) const {
    ExplainConfig c = *this;
    c.sigma = sigma;
    c.kernel.sigma = sigma;
    c.sampler.sigma = sigma;
    return c;
}

ExplainConfig ExplainConfig::with_seed(std::uint64_t seed) const {
    ExplainConfig c = *this;
    c.seed = seed;
    c.sampler.seed = seed;
    return c;
}

Explanation explain_lime(const BlackBox& model, const Eigen::VectorXd& target,
                         const ExplainConfig& config) {
    if (config.method != Method::Lime) throw InvalidArgument("config method is not LIME");
    validate_config(config, target);
    const int dhat = config.conversion.surrogate_dim();

    NeighborhoodSample sample;
    sample.points = sample_binary_neighborhood(dhat, config.sampler);
    Eigen::MatrixXd originals(config.n, target.size());
    for (int i = 0; i < config.n; ++i) {
        originals.row(i) = convert(config.conversion, sample.points.row(i));
    }
    sample.labels = predict_batch(model, originals);
    const Eigen::VectorXd target_repr = Eigen::VectorXd::Ones(dhat);
    sample.weights.resize(config.n);
    for (int i = 0; i < config.n; ++i) {
        sample.weights[i] = kernel_weight(target_repr, sample.points.row(i), config.kernel);
    }
    return finish(model, sample, config, {});
}

Explanation explain_slime(const BlackBox& model, const Eigen::VectorXd& target,
                          const ExplainConfig& config) {
    if (config.method != Method::Slime) throw InvalidArgument("config method is not s-LIME");
    validate_config(config, target);
    const int dhat = config.conversion.surrogate_dim();
    const bool tabular = config.conversion.kind == ConversionSpec::Kind::Tabular;

    NeighborhoodSample sample;
    sample.points = tabular ? sample_gaussian_offsets(dhat, config.sampler)
                            : sample_uniform_cube(dhat, config.sampler);
    Eigen::MatrixXd originals(config.n, target.size());
    for (int i = 0; i < config.n; ++i) {
        originals.row(i) = convert(config.conversion, sample.points.row(i));
    }
    sample.labels = predict_batch(model, originals);
    sample.weights = Eigen::VectorXd::Ones(config.n);
    return finish(model, sample, config, {});
}

Explanation explain(const BlackBox& model, const Eigen::VectorXd& target,
                    const ExplainConfig& config) {
    return config.method == Method::Lime ? explain_lime(model, target, config)
                                         : explain_slime(model, target, config);
}

std::vector<SweepRow> sweep_sigma(const BlackBox& model, const Eigen::VectorXd& target,
                                  const ExplainConfig& base, const std::vector<double>& sigmas) {
    if (sigmas.empty()) throw InvalidArgument("sigma grid must be non-empty");
    if (!std::is_sorted(sigmas.begin(), sigmas.end())) {
        throw InvalidArgument("sigma grid must be ascending");
    }
    std::vector<SweepRow> rows;
    rows.reserve(sigmas.size());
    for (std::size_t i = 0; i < sigmas.size(); ++i) {
        SweepRow row;
        row.sigma = sigmas[i];
        const ExplainConfig config =
            base.with_sigma(sigmas[i]).with_seed(derive_seed(base.seed, i));
        try {
            row.explanation = explain(model, target, config);
        } catch (const std::exception& e) {
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::pair<double, Explanation> select_best_sigma(const std::vector<SweepRow>& sweep) {
    const SweepRow* best = nullptr;
    for (const SweepRow& row : sweep) {
        if (!row.explanation || !row.explanation->report.r2) continue;
        if (!best) {
            best = &row;
            continue;
        }
        const double r2 = *row.explanation->report.r2;
        const double best_r2 = *best->explanation->report.r2;
        if (r2 > best_r2 || (r2 == best_r2 && row.sigma < best->sigma)) best = &row;
    }
    if (!best) throw AllRowsFailed("no sweep row produced an r2 score");
    return {best->sigma, *best->explanation};
}

std::vector<double> log_grid(double lo, double hi, int points) {
    if (!(lo > 0.0) || !(hi > 0.0) || hi < lo) throw InvalidArgument("grid needs 0 < lo <= hi");
    if (points < 1) throw InvalidArgument("grid needs at least one point");
    if (points == 1) return {lo};
    std::vector<double> grid(static_cast<std::size_t>(points));
    const double step = (std::log(hi) - std::log(lo)) / (points - 1);
    for (int i = 0; i < points; ++i) {
        grid[static_cast<std::size_t>(i)] = std::exp(std::log(lo) + step * i);
    }
    grid.front() = lo;
    grid.back() = hi;
    return grid;
}

std::string explanation_to_json(const Explanation& explanation) {
    nlohmann::ordered_json j;
    j["method"] = explanation.config.method == Method::Lime ? "lime" : "slime";
    j["sigma"] = explanation.config.sigma;
    j["n"] = explanation.config.n;
    j["k"] = explanation.config.k;
    j["seed"] = explanation.config.seed;
    j["intercept"] = explanation.surrogate.intercept;
    nlohmann::ordered_json coeffs = nlohmann::ordered_json::array();
    for (Eigen::Index i = 0; i < explanation.surrogate.coefficients.size(); ++i) {
        coeffs.push_back(explanation.surrogate.coefficients[i]);
    }
    j["coefficients"] = std::move(coeffs);
    j["selected"] = explanation.surrogate.selected;
    if (explanation.report.r2) {
        j["r2"] = *explanation.report.r2;
    } else {
        j["r2"] = nullptr;
    }
    j["degenerate"] = explanation.degenerate;
    j["ess"] = explanation.ess;
    if (explanation.report.recall) j["recall"] = *explanation.report.recall;
    if (explanation.report.precision) j["precision"] = *explanation.report.precision;
    if (explanation.report.coverage) j["coverage"] = *explanation.report.coverage;
    return j.dump(2) + "\n";
}

std::string sweep_to_csv(const std::vector<SweepRow>& rows) {
    std::ostringstream out;
    out << "sigma,r2,degenerate,ess,recall,precision,coverage\n";
    for (const SweepRow& row : rows) {
        out << format_double(row.sigma) << ',';
        if (!row.explanation) {
            out << ",,,,,\n";
            continue;
        }
        const Explanation& e = *row.explanation;
        if (e.report.r2) out << format_double(*e.report.r2);
        out << ',' << (e.degenerate ? "true" : "false") << ',' << format_double(e.ess) << ',';
        if (e.report.recall) out << format_double(*e.report.recall);
        out << ',';
        if (e.report.precision) out << format_double(*e.report.precision);
        out << ',';
        if (e.report.coverage) out << format_double(*e.report.coverage);
        out << '\n';
    }
    return out.str();
}

}  // namespace limekit
