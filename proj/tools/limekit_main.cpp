#include <charconv>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "limekit/dataset.hpp"
#include "limekit/model_io.hpp"
#include "limekit/oracle.hpp"
#include "limekit/pipeline.hpp"
#include "limekit/rng.hpp"

namespace {

using namespace limekit;

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitValidation = 2;
constexpr int kExitNonConvergence = 3;
constexpr int kExitIo = 4;

// Write-then-rename so a failed run never leaves a partial file behind.
void write_atomic(const std::string& path, const std::string& content) {
    namespace fs = std::filesystem;
    const fs::path target(path);
    fs::path tmp(path + ".tmp");
    {
        std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
        if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
        out << content;
        out.flush();
        if (!out) {
            std::error_code ec;
            fs::remove(tmp, ec);
            throw IoError("failed writing " + tmp.string());
        }
    }
    std::error_code ec;
    fs::rename(tmp, target, ec);
    if (ec) {
        std::error_code ignore;
        fs::remove(tmp, ignore);
        throw IoError("cannot move output into place at " + path);
    }
}

double parse_double(const std::string& text, const std::string& what) {
    double value = 0.0;
    const char* b = text.data();
    auto res = std::from_chars(b, b + text.size(), value);
    if (res.ec != std::errc{} || res.ptr != b + text.size() || !std::isfinite(value)) {
        throw InvalidArgument("malformed " + what + ": '" + text + "'");
    }
    return value;
}

// "lo:hi:points" -> log-spaced grid, endpoints inclusive.
std::vector<double> parse_grid(const std::string& text) {
    const auto first = text.find(':');
    const auto second = text.find(':', first + 1);
    if (first == std::string::npos || second == std::string::npos) {
        throw InvalidArgument("grid must look like lo:hi:points, got '" + text + "'");
    }
    const double lo = parse_double(text.substr(0, first), "grid lower bound");
    const double hi = parse_double(text.substr(first + 1, second - first - 1), "grid upper bound");
    int points = 0;
    const std::string tail = text.substr(second + 1);
    auto res = std::from_chars(tail.data(), tail.data() + tail.size(), points);
    if (res.ec != std::errc{} || res.ptr != tail.data() + tail.size()) {
        throw InvalidArgument("grid point count must be an integer, got '" + tail + "'");
    }
    return log_grid(lo, hi, points);
}

struct ExplainArgs {
    std::string model_path;
    std::string data_path;
    int row = 0;
    std::string method = "lime";
    double sigma = 0.75;
    int n = 5000;
    int k = 6;
    std::uint64_t seed = 1;
    std::string segmentation_path;
    double baseline = 0.0;
    std::string out_path;
};

void add_explain_options(CLI::App* sub, ExplainArgs& args, bool with_sigma) {
    sub->add_option("--model", args.model_path, "Model JSON file")->required();
    sub->add_option("--data", args.data_path, "Dataset CSV")->required();
    sub->add_option("--row", args.row, "Row index of the target instance")->required();
    sub->add_option("--method", args.method, "Explainer: lime or slime")
        ->check(CLI::IsMember({"lime", "slime"}));
    if (with_sigma) sub->add_option("--sigma", args.sigma, "Bandwidth");
    sub->add_option("--n", args.n, "Number of neighborhood samples");
    sub->add_option("--k", args.k, "Number of features in the explanation");
    sub->add_option("--seed", args.seed, "RNG seed; all randomness derives from it");
    sub->add_option("--segmentation", args.segmentation_path,
                    "Segmentation CSV (original_index,segment_index)");
    sub->add_option("--baseline", args.baseline, "Baseline feature value for segment toggles");
    sub->add_option("--out", args.out_path, "Output path")->required();
}

Eigen::VectorXd target_row(const Dataset& data, int row) {
    if (row < 0 || row >= data.size()) {
        throw InvalidArgument("row " + std::to_string(row) + " outside dataset of " +
                              std::to_string(data.size()) + " rows");
    }
    return data.features.row(row);
}

ConversionSpec build_conversion(Method method, const Eigen::VectorXd& target,
                                const std::string& segmentation_path, double baseline) {
    const auto d = static_cast<int>(target.size());
    const Eigen::VectorXd baseline_vec = Eigen::VectorXd::Constant(d, baseline);
    if (!segmentation_path.empty()) {
        auto segment_of = load_segmentation_csv(segmentation_path);
        if (segment_of.size() != static_cast<std::size_t>(d)) {
            throw InvalidArgument("segmentation covers " + std::to_string(segment_of.size()) +
                                  " features, dataset has " + std::to_string(d));
        }
        return ConversionSpec::segmented(target, baseline_vec, std::move(segment_of));
    }
    if (method == Method::Lime) {
        // LIME toggles feature presence; without an explicit map every
        // feature is its own segment.
        return ConversionSpec::segmented(target, baseline_vec, identity_segmentation(d));
    }
    return ConversionSpec::tabular(target);
}

ExplainConfig build_config(const ExplainArgs& args, const Eigen::VectorXd& target) {
    const Method method = args.method == "lime" ? Method::Lime : Method::Slime;
    auto conversion = build_conversion(method, target, args.segmentation_path, args.baseline);
    return method == Method::Lime
               ? ExplainConfig::lime(args.sigma, args.n, args.k, std::move(conversion), args.seed)
               : ExplainConfig::slime(args.sigma, args.n, args.k, std::move(conversion), args.seed);
}

void print_warnings(const Explanation& explanation) {
    for (const std::string& w : explanation.warnings) std::cerr << "warning: " << w << "\n";
}

// --- subcommand bodies -----------------------------------------------------

struct TrainArgs {
    std::string data_path;
    std::string kind = "logistic";
    double l1 = 0.0;
    int trees = 25;
    int depth = 3;
    int hidden = 100;
    std::uint64_t seed = 1;
    std::string out_path;
};

int run_train(const TrainArgs& args) {
    const Dataset data = load_dataset_csv(args.data_path);
    BlackBox model = [&] {
        if (args.kind == "logistic") return train_logistic(data, args.l1);
        if (args.kind == "forest") return train_stump_forest(data, args.trees, args.depth, args.seed);
        if (args.kind == "mlp") return train_mlp(data, args.hidden, args.seed);
        throw InvalidArgument("unknown model kind: " + args.kind);
    }();

    nlohmann::ordered_json doc = nlohmann::ordered_json::parse(model_to_json(model));
    nlohmann::ordered_json config;
    config["data"] = args.data_path;
    config["kind"] = args.kind;
    if (args.kind == "logistic") config["l1"] = args.l1;
    if (args.kind == "forest") {
        config["trees"] = args.trees;
        config["depth"] = args.depth;
        config["seed"] = args.seed;
    }
    if (args.kind == "mlp") {
        config["hidden"] = args.hidden;
        config["seed"] = args.seed;
    }
    doc["config"] = std::move(config);
    write_atomic(args.out_path, doc.dump(2) + "\n");

    std::cerr << "trained " << args.kind << " on " << data.size() << " rows, " << data.dim()
              << " features\n";
    if (!model.converged()) {
        std::cerr << "warning: training hit the iteration budget before the loss plateaued\n";
        return kExitNonConvergence;
    }
    return kExitOk;
}

int run_explain(const ExplainArgs& args) {
    const BlackBox model = load_model_json(args.model_path);
    const Dataset data = load_dataset_csv(args.data_path);
    const Eigen::VectorXd target = target_row(data, args.row);
    const Explanation explanation = explain(model, target, build_config(args, target));
    print_warnings(explanation);
    write_atomic(args.out_path, explanation_to_json(explanation));
    return kExitOk;  // a degenerate explanation is a result, not a failure
}

struct SweepArgs {
    ExplainArgs base;
    std::string grid = "1e-2:1e2:20";
};

int run_sweep(const SweepArgs& args) {
    const BlackBox model = load_model_json(args.base.model_path);
    const Dataset data = load_dataset_csv(args.base.data_path);
    const Eigen::VectorXd target = target_row(data, args.base.row);
    const std::vector<double> grid = parse_grid(args.grid);
    ExplainArgs with_sigma = args.base;
    with_sigma.sigma = grid.front();
    const ExplainConfig base = build_config(with_sigma, target);
    const auto rows = sweep_sigma(model, target, base, grid);
    std::cerr << "sweep: method=" << args.base.method << " grid=" << args.grid
              << " n=" << args.base.n << " k=" << args.base.k << " seed=" << args.base.seed << "\n";
    for (const SweepRow& row : rows) {
        if (row.error) std::cerr << "sigma " << row.sigma << ": " << *row.error << "\n";
    }
    write_atomic(args.base.out_path, sweep_to_csv(rows));
    return kExitOk;
}

struct LemmaArgs {
    std::string model_path;
    int dhat = 3;
    int trials = 100;
    std::uint64_t seed = 1;
};

int run_lemma_check(const LemmaArgs& args) {
    if (args.dhat < 1 || args.dhat > 14) {
        throw InvalidArgument("dhat must lie in [1, 14] for exact enumeration");
    }
    if (args.trials < 1) throw InvalidArgument("trials must be positive");
    const BlackBox model = load_model_json(args.model_path);
    if (model.input_dim() != args.dhat) {
        throw InvalidArgument("model expects " + std::to_string(model.input_dim()) +
                              " features, dhat is " + std::to_string(args.dhat));
    }

    double worst = 0.0;
    for (int t = 0; t < args.trials; ++t) {
        SplitMix64 rng(derive_seed(args.seed, static_cast<std::uint64_t>(t)));
        Eigen::VectorXd target(args.dhat);
        for (int i = 0; i < args.dhat; ++i) target[i] = 0.5 + rng.next_unit();
        const auto conversion =
            ConversionSpec::segmented(target, Eigen::VectorXd::Zero(args.dhat),
                                      identity_segmentation(args.dhat));
        DiscreteDistribution dist;
        dist.dhat = args.dhat;
        dist.mass.resize(static_cast<Eigen::Index>(1) << args.dhat);
        for (Eigen::Index i = 0; i < dist.mass.size(); ++i) dist.mass[i] = 0.1 + 0.9 * rng.next_unit();
        dist.mass /= dist.mass.sum();
        const double sigma = std::exp(std::log(0.1) + std::log(100.0) * rng.next_unit());
        worst = std::max(
            worst, verify_lemma1(model, conversion, dist, {sigma, Distance::Euclidean}));
    }
    std::cout << "max l-infinity distance over " << args.trials << " trials: " << worst << "\n";
    return worst <= 1e-8 ? kExitOk : kExitCheckFailed;
}

struct ParadoxArgs {
    ExplainArgs base;
    std::string sigmas = "0.1,100";
};

nlohmann::ordered_json weight_histogram(const Eigen::VectorXd& weights) {
    constexpr int kBins = 20;
    const double lo = weights.minCoeff();
    const double hi = weights.maxCoeff();
    nlohmann::ordered_json edges = nlohmann::ordered_json::array();
    nlohmann::ordered_json counts = nlohmann::ordered_json::array();
    std::vector<int> bin_counts(kBins, 0);
    if (hi <= lo * (1.0 + 1e-12)) {
        for (int i = 0; i <= kBins; ++i) edges.push_back(lo);
        bin_counts[0] = static_cast<int>(weights.size());
    } else {
        const double log_lo = std::log(lo);
        const double span = std::log(hi) - log_lo;
        for (int i = 0; i <= kBins; ++i) edges.push_back(std::exp(log_lo + span * i / kBins));
        for (Eigen::Index i = 0; i < weights.size(); ++i) {
            const int bin = std::clamp(
                static_cast<int>(kBins * (std::log(weights[i]) - log_lo) / span), 0, kBins - 1);
            ++bin_counts[static_cast<std::size_t>(bin)];
        }
    }
    for (int c : bin_counts) counts.push_back(c);
    nlohmann::ordered_json histogram;
    histogram["edges"] = std::move(edges);
    histogram["counts"] = std::move(counts);
    return histogram;
}

int run_paradox(const ParadoxArgs& args) {
    const auto comma = args.sigmas.find(',');
    if (comma == std::string::npos || args.sigmas.find(',', comma + 1) != std::string::npos) {
        throw InvalidArgument("expected exactly two sigmas, e.g. 0.1,100");
    }
    const double sigma_a = parse_double(args.sigmas.substr(0, comma), "sigma");
    const double sigma_b = parse_double(args.sigmas.substr(comma + 1), "sigma");

    const BlackBox model = load_model_json(args.base.model_path);
    const Dataset data = load_dataset_csv(args.base.data_path);
    const Eigen::VectorXd target = target_row(data, args.base.row);

    nlohmann::ordered_json blocks = nlohmann::ordered_json::array();
    for (double sigma : {sigma_a, sigma_b}) {
        ExplainArgs one = args.base;
        one.method = "lime";
        one.sigma = sigma;
        const ExplainConfig config = build_config(one, target);
        const Explanation explanation = explain_lime(model, target, config);
        print_warnings(explanation);

        // Same seed, same sampler: recompute the kernel weights the run used.
        const int dhat = config.conversion.surrogate_dim();
        const Eigen::MatrixXd points = sample_binary_neighborhood(dhat, config.sampler);
        const Eigen::VectorXd ones = Eigen::VectorXd::Ones(dhat);
        Eigen::VectorXd weights(points.rows());
        for (Eigen::Index i = 0; i < points.rows(); ++i) {
            weights[i] = kernel_weight(ones, points.row(i), config.kernel);
        }

        nlohmann::ordered_json block;
        block["sigma"] = sigma;
        block["ess"] = explanation.ess;
        block["weight_histogram"] = weight_histogram(weights);
        block["explanation"] = nlohmann::ordered_json::parse(explanation_to_json(explanation));
        blocks.push_back(std::move(block));
    }

    nlohmann::ordered_json doc;
    doc["n"] = args.base.n;
    doc["k"] = args.base.k;
    doc["seed"] = args.base.seed;
    doc["sigmas"] = nlohmann::ordered_json::array({sigma_a, sigma_b});
    doc["blocks"] = std::move(blocks);
    write_atomic(args.base.out_path, doc.dump(2) + "\n");
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"limekit: local surrogate explanations for black-box classifiers"};
    app.require_subcommand(1);
    // key=value lines grouped under a [subcommand] section; flags win.
    app.set_config("--config", "", "Config file ([subcommand] sections, key=value lines)");

    TrainArgs train_args;
    auto* train = app.add_subcommand("train", "Train a built-in model and save it as JSON");
    train->add_option("--data", train_args.data_path, "Training CSV (last column = label)")
        ->required();
    train->add_option("--kind", train_args.kind, "logistic, forest or mlp")
        ->check(CLI::IsMember({"logistic", "forest", "mlp"}));
    train->add_option("--l1", train_args.l1, "L1 penalty (logistic)");
    train->add_option("--trees", train_args.trees, "Number of trees (forest)");
    train->add_option("--depth", train_args.depth, "Tree depth (forest)");
    train->add_option("--hidden", train_args.hidden, "Hidden units (mlp)");
    train->add_option("--seed", train_args.seed, "RNG seed");
    train->add_option("--out", train_args.out_path, "Output model JSON")->required();

    ExplainArgs explain_args;
    auto* explain_cmd = app.add_subcommand("explain", "Explain one instance");
    add_explain_options(explain_cmd, explain_args, true);

    SweepArgs sweep_args;
    auto* sweep = app.add_subcommand("sweep", "Explain one instance across a bandwidth grid");
    add_explain_options(sweep, sweep_args.base, false);
    sweep->add_option("--grid", sweep_args.grid, "Log-spaced grid lo:hi:points");

    LemmaArgs lemma_args;
    auto* lemma = app.add_subcommand("lemma-check",
                                     "Verify that weighted and reweighted fits coincide");
    lemma->add_option("--model", lemma_args.model_path, "Model JSON file")->required();
    lemma->add_option("--dhat", lemma_args.dhat, "Surrogate dimension (<= 14)")->required();
    lemma->add_option("--trials", lemma_args.trials, "Number of randomized checks");
    lemma->add_option("--seed", lemma_args.seed, "RNG seed");

    ParadoxArgs paradox_args;
    auto* paradox = app.add_subcommand(
        "paradox", "Weight histograms and explanations for a bandwidth pair");
    add_explain_options(paradox, paradox_args.base, false);
    paradox->add_option("--sigmas", paradox_args.sigmas, "Two bandwidths, e.g. 0.1,100");

    int rc = kExitOk;
    train->callback([&] { rc = run_train(train_args); });
    explain_cmd->callback([&] { rc = run_explain(explain_args); });
    sweep->callback([&] { rc = run_sweep(sweep_args); });
    lemma->callback([&] { rc = run_lemma_check(lemma_args); });
    paradox->callback([&] { rc = run_paradox(paradox_args); });

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int cli_rc = app.exit(e);
        return cli_rc == 0 ? kExitOk : kExitValidation;
    } catch (const IoError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitIo;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return rc;
}
