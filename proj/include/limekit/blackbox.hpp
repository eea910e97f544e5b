#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <optional>
#include <variant>
#include <vector>

#include "limekit/dataset.hpp"
#include "limekit/errors.hpp"
#include "limekit/neighborhood.hpp"

namespace limekit {

enum class Smoothness { Smooth, PiecewiseConstant };

struct LogisticModel {
    Eigen::VectorXd weights;
    double bias = 0.0;
};

/// Axis-aligned decision tree stored as a flat node array. Leaves have
/// feature == -1 and carry the class-1 fraction of their training rows.
struct TreeNode {
    int feature = -1;
    double threshold = 0.0;
    int left = -1;   // x[feature] < threshold
    int right = -1;  // x[feature] >= threshold
    double value = 0.0;
};

struct Tree {
    std::vector<TreeNode> nodes;  // node 0 is the root
    double predict(const Eigen::VectorXd& x) const;
};

struct StumpForestModel {
    std::vector<Tree> trees;
    int input_dim = 0;
};

struct MlpModel {
    Eigen::MatrixXd w1;  // hidden x d
    Eigen::VectorXd b1;  // hidden
    Eigen::VectorXd w2;  // hidden
    double b2 = 0.0;
};

using ModelParams = std::variant<LogisticModel, StumpForestModel, MlpModel>;

/// A deterministic scoring function f: R^d -> [0, 1] (class-1 probability),
/// optionally carrying the set of features the model actually uses and,
/// for the built-in kinds, the parameters needed for JSON round-trips.
/// Immutable after construction and safe to share across threads.
class BlackBox {
public:
    using Predictor = std::function<double(const Eigen::VectorXd&)>;

    BlackBox(Predictor predictor, int input_dim, Smoothness smoothness,
             std::optional<std::vector<int>> gold_features = std::nullopt,
             std::optional<ModelParams> params = std::nullopt, bool converged = true);

    double predict(const Eigen::VectorXd& x) const;
    int input_dim() const { return input_dim_; }
    Smoothness smoothness() const { return smoothness_; }
    const std::optional<std::vector<int>>& gold_features() const { return gold_features_; }
    const std::optional<ModelParams>& params() const { return params_; }
    /// False when a trainer hit its iteration budget before the loss
    /// plateaued; the model is still usable.
    bool converged() const { return converged_; }

private:
    Predictor predictor_;
    int input_dim_;
    Smoothness smoothness_;
    std::optional<std::vector<int>> gold_features_;
    std::optional<ModelParams> params_;
    bool converged_;
};

BlackBox make_logistic_blackbox(LogisticModel model, bool converged = true);
BlackBox make_stump_forest_blackbox(StumpForestModel model);
BlackBox make_mlp_blackbox(MlpModel model, int input_dim, bool converged = true);

/// Elementwise, order-preserving application of the predictor to the rows
/// of `points`.
Eigen::VectorXd predict_batch(const BlackBox& model, const Eigen::MatrixXd& points);

/// Sparse logistic regression fit by full-batch proximal gradient descent
/// (soft-thresholding for the L1 term, bias unpenalized, zero init, fixed
/// iteration budget). Gold features are the non-zero weights.
BlackBox train_logistic(const Dataset& data, double l1);

/// Bagged axis-aligned decision trees with greedy Gini splits; bootstrap
/// resampling per tree, all features considered at every split. Gold
/// features are the features used by any split.
BlackBox train_stump_forest(const Dataset& data, int trees, int depth, std::uint64_t seed);

/// One hidden layer, logistic sigmoid activations throughout, full-batch
/// gradient descent on the cross-entropy loss.
BlackBox train_mlp(const Dataset& data, int hidden, std::uint64_t seed);

/// Central-difference estimate of the gradient of f(eta(.)) at `at`:
/// component i is (f(eta(at + h e_i)) - f(eta(at - h e_i))) / (2h).
/// Only meaningful for smooth models; for piecewise-constant models it
/// returns zero whenever `at` sits in the interior of a cell.
Eigen::VectorXd surrogate_gradient_fd(const BlackBox& model, const ConversionSpec& conversion,
                                      const Eigen::VectorXd& at, double h = 1e-4);

}  // namespace limekit
