#include "limekit/blackbox.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <utility>

#include "limekit/rng.hpp"

namespace limekit {
namespace {

constexpr int kLogisticIterations = 5000;
constexpr int kMlpIterations = 20000;
constexpr double kMlpLearningRate = 2.0;
constexpr double kPlateauTol = 1e-10;
constexpr double kGoldWeightTol = 1e-9;

double sigmoid(double z) { return 1.0 / (1.0 + std::exp(-z)); }

double binary_cross_entropy(const Eigen::VectorXd& p, const Eigen::VectorXd& y) {
    double loss = 0.0;
    for (Eigen::Index i = 0; i < p.size(); ++i) {
        const double pi = std::clamp(p[i], 1e-12, 1.0 - 1e-12);
        loss -= y[i] * std::log(pi) + (1.0 - y[i]) * std::log(1.0 - pi);
    }
    return loss / static_cast<double>(p.size());
}

void require_both_classes(const Dataset& data) {
    bool has0 = false;
    bool has1 = false;
    for (int label : data.labels) (label == 0 ? has0 : has1) = true;
    if (!has0 || !has1) throw DegenerateData("training data must contain both classes");
}

void check_dataset(const Dataset& data) {
    if (data.size() < 2) throw InvalidArgument("dataset needs at least 2 rows");
    if (data.features.hasNaN()) throw InvalidArgument("dataset contains NaN");
    if (static_cast<Eigen::Index>(data.labels.size()) != data.size()) {
        throw DimensionMismatch("labels must match feature rows");
    }
    require_both_classes(data);
}

Eigen::VectorXd label_vector(const Dataset& data) {
    Eigen::VectorXd y(data.size());
    for (Eigen::Index i = 0; i < y.size(); ++i) y[i] = data.labels[static_cast<std::size_t>(i)];
    return y;
}

double gini(double count1, double total) {
    if (total <= 0.0) return 0.0;
    const double p1 = count1 / total;
    const double p0 = 1.0 - p1;
    return 1.0 - p0 * p0 - p1 * p1;
}

struct SplitChoice {
    int feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

SplitChoice best_gini_split(const Dataset& data, const std::vector<int>& rows) {
    const auto n = static_cast<double>(rows.size());
    double ones = 0.0;
    for (int r : rows) ones += data.labels[static_cast<std::size_t>(r)];
    const double parent = gini(ones, n);
    SplitChoice best;
    if (parent <= 0.0) return best;

    std::vector<std::pair<double, int>> sorted(rows.size());
    for (int j = 0; j < data.dim(); ++j) {
        for (std::size_t i = 0; i < rows.size(); ++i) {
            sorted[i] = {data.features(rows[i], j), data.labels[static_cast<std::size_t>(rows[i])]};
        }
        std::sort(sorted.begin(), sorted.end());
        double left_count = 0.0;
        double left_ones = 0.0;
        for (std::size_t i = 0; i + 1 < sorted.size(); ++i) {
            left_count += 1.0;
            left_ones += sorted[i].second;
            if (sorted[i].first == sorted[i + 1].first) continue;
            const double right_count = n - left_count;
            const double right_ones = ones - left_ones;
            const double child =
                (left_count * gini(left_ones, left_count) + right_count * gini(right_ones, right_count)) / n;
            const double gain = parent - child;
            if (gain > best.gain) {
                best.gain = gain;
                best.feature = j;
                best.threshold = 0.5 * (sorted[i].first + sorted[i + 1].first);
            }
        }
    }
    return best;
}

Tree build_tree(const Dataset& data, const std::vector<int>& bootstrap, int max_depth) {
    Tree tree;
    struct Pending {
        std::vector<int> rows;
        int depth;
        int node;
    };
    tree.nodes.emplace_back();
    std::vector<Pending> stack;
    stack.push_back({bootstrap, max_depth, 0});
    while (!stack.empty()) {
        Pending cur = std::move(stack.back());
        stack.pop_back();
        double ones = 0.0;
        for (int r : cur.rows) ones += data.labels[static_cast<std::size_t>(r)];
        TreeNode& node = tree.nodes[static_cast<std::size_t>(cur.node)];
        node.value = ones / static_cast<double>(cur.rows.size());
        if (cur.depth == 0 || cur.rows.size() < 2) continue;
        const SplitChoice split = best_gini_split(data, cur.rows);
        if (split.feature < 0) continue;

        std::vector<int> left_rows;
        std::vector<int> right_rows;
        for (int r : cur.rows) {
            (data.features(r, split.feature) < split.threshold ? left_rows : right_rows).push_back(r);
        }
        if (left_rows.empty() || right_rows.empty()) continue;
        const int left = static_cast<int>(tree.nodes.size());
        tree.nodes.emplace_back();
        tree.nodes.emplace_back();
        TreeNode& parent = tree.nodes[static_cast<std::size_t>(cur.node)];
        parent.feature = split.feature;
        parent.threshold = split.threshold;
        parent.left = left;
        parent.right = left + 1;
        stack.push_back({std::move(right_rows), cur.depth - 1, left + 1});
        stack.push_back({std::move(left_rows), cur.depth - 1, left});
    }
    return tree;
}

std::vector<int> forest_split_features(const StumpForestModel& model) {
    std::vector<int> features;
    for (const Tree& tree : model.trees) {
        for (const TreeNode& node : tree.nodes) {
            if (node.feature >= 0) features.push_back(node.feature);
        }
    }
    std::sort(features.begin(), features.end());
    features.erase(std::unique(features.begin(), features.end()), features.end());
    return features;
}

}  // namespace

double Tree::predict(const Eigen::VectorXd& x) const {
    int node = 0;
    while (nodes[static_cast<std::size_t>(node)].feature >= 0) {
        const TreeNode& n = nodes[static_cast<std::size_t>(node)];
        node = x[n.feature] < n.threshold ? n.left : n.right;
    }
    return nodes[static_cast<std::size_t>(node)].value;
}

BlackBox::BlackBox(Predictor predictor, int input_dim, Smoothness smoothness,
                   std::optional<std::vector<int>> gold_features, std::optional<ModelParams> params,
                   bool converged)
    : predictor_(std::move(predictor)),
      input_dim_(input_dim),
      smoothness_(smoothness),
      gold_features_(std::move(gold_features)),
      params_(std::move(params)),
      converged_(converged) {
    if (!predictor_) throw InvalidArgument("black box needs a predictor");
    if (input_dim_ < 1) throw InvalidArgument("input dimension must be positive");
}

double BlackBox::predict(const Eigen::VectorXd& x) const {
    if (x.size() != input_dim_) {
        throw DimensionMismatch("instance length does not match model input dimension");
    }
    const double p = predictor_(x);
    if (!(p >= 0.0 && p <= 1.0)) throw InvalidArgument("predictor output outside [0, 1]");
    return p;
}

BlackBox make_logistic_blackbox(LogisticModel model, bool converged) {
    const auto d = static_cast<int>(model.weights.size());
    std::vector<int> gold;
    for (int i = 0; i < d; ++i) {
        if (std::abs(model.weights[i]) > kGoldWeightTol) gold.push_back(i);
    }
    auto predictor = [m = model](const Eigen::VectorXd& x) {
        return sigmoid(m.weights.dot(x) + m.bias);
    };
    return BlackBox(std::move(predictor), d, Smoothness::Smooth, std::move(gold),
                    ModelParams(std::move(model)), converged);
}

BlackBox make_stump_forest_blackbox(StumpForestModel model) {
    if (model.trees.empty()) throw InvalidArgument("forest needs at least one tree");
    const int d = model.input_dim;
    for (const Tree& tree : model.trees) {
        for (const TreeNode& node : tree.nodes) {
            if (node.feature >= d) throw DimensionMismatch("split feature outside input dimension");
        }
    }
    std::vector<int> gold = forest_split_features(model);
    auto predictor = [m = model](const Eigen::VectorXd& x) {
        double sum = 0.0;
        for (const Tree& tree : m.trees) sum += tree.predict(x);
        return sum / static_cast<double>(m.trees.size());
    };
    return BlackBox(std::move(predictor), d, Smoothness::PiecewiseConstant, std::move(gold),
                    ModelParams(std::move(model)), true);
}

BlackBox make_mlp_blackbox(MlpModel model, int input_dim, bool converged) {
    if (model.w1.cols() != input_dim || model.w1.rows() != model.b1.size() ||
        model.w1.rows() != model.w2.size()) {
        throw DimensionMismatch("inconsistent MLP parameter shapes");
    }
    auto predictor = [m = model](const Eigen::VectorXd& x) {
        Eigen::VectorXd z = m.w1 * x + m.b1;
        for (Eigen::Index i = 0; i < z.size(); ++i) z[i] = sigmoid(z[i]);
        return sigmoid(m.w2.dot(z) + m.b2);
    };
    return BlackBox(std::move(predictor), input_dim, Smoothness::Smooth, std::nullopt,
                    ModelParams(std::move(model)), converged);
}

Eigen::VectorXd predict_batch(const BlackBox& model, const Eigen::MatrixXd& points) {
    if (points.rows() > 0 && points.cols() != model.input_dim()) {
        throw DimensionMismatch("batch column count does not match model input dimension");
    }
    Eigen::VectorXd out(points.rows());
    for (Eigen::Index i = 0; i < points.rows(); ++i) out[i] = model.predict(points.row(i));
    return out;
}

BlackBox train_logistic(const Dataset& data, double l1) {
    check_dataset(data);
    if (l1 < 0.0) throw InvalidArgument("l1 must be nonnegative");
    const Eigen::Index m = data.size();
    const Eigen::Index d = data.dim();
    const Eigen::MatrixXd& x = data.features;
    const Eigen::VectorXd y = label_vector(data);

    // 1/L step size; L bounds the gradient Lipschitz constant of the mean
    // logistic loss with intercept column, and is invariant under row
    // duplication.
    const double lipschitz = (x.squaredNorm() + static_cast<double>(m)) / (4.0 * static_cast<double>(m));
    const double lr = 1.0 / lipschitz;

    Eigen::VectorXd w = Eigen::VectorXd::Zero(d);
    double b = 0.0;
    bool converged = false;
    double prev_obj = std::numeric_limits<double>::infinity();
    for (int iter = 0; iter < kLogisticIterations; ++iter) {
        Eigen::VectorXd p = x * w;
        p.array() += b;
        for (Eigen::Index i = 0; i < m; ++i) p[i] = sigmoid(p[i]);
        const Eigen::VectorXd residual = (p - y) / static_cast<double>(m);
        w -= lr * (x.transpose() * residual);
        b -= lr * residual.sum();
        const double shrink = lr * l1;
        for (Eigen::Index i = 0; i < d; ++i) {
            w[i] = std::copysign(std::max(std::abs(w[i]) - shrink, 0.0), w[i]);
        }

        Eigen::VectorXd p2 = x * w;
        p2.array() += b;
        for (Eigen::Index i = 0; i < m; ++i) p2[i] = sigmoid(p2[i]);
        const double obj = binary_cross_entropy(p2, y) + l1 * w.lpNorm<1>();
        if (std::abs(prev_obj - obj) <= kPlateauTol * std::max(1.0, std::abs(obj))) {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    return make_logistic_blackbox({std::move(w), b}, converged);
}

BlackBox train_stump_forest(const Dataset& data, int trees, int depth, std::uint64_t seed) {
    check_dataset(data);
    if (trees < 1) throw InvalidArgument("trees must be positive");
    if (depth < 1) throw InvalidArgument("depth must be positive");
    const auto m = static_cast<std::uint64_t>(data.size());
    StumpForestModel model;
    model.input_dim = static_cast<int>(data.dim());
    model.trees.reserve(static_cast<std::size_t>(trees));
    for (int t = 0; t < trees; ++t) {
        SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::vector<int> bootstrap(static_cast<std::size_t>(m));
        for (auto& r : bootstrap) r = static_cast<int>(rng.next_below(m));
        model.trees.push_back(build_tree(data, bootstrap, depth));
    }
    return make_stump_forest_blackbox(std::move(model));
}

BlackBox train_mlp(const Dataset& data, int hidden, std::uint64_t seed) {
    check_dataset(data);
    if (hidden < 1) throw InvalidArgument("hidden must be positive");
    const Eigen::Index m = data.size();
    const Eigen::Index d = data.dim();
    const Eigen::MatrixXd& x = data.features;
    const Eigen::VectorXd y = label_vector(data);

    SplitMix64 rng(seed);
    MlpModel net;
    net.w1.resize(hidden, d);
    const double a1 = 1.0 / std::sqrt(static_cast<double>(d));
    for (Eigen::Index i = 0; i < hidden; ++i) {
        for (Eigen::Index j = 0; j < d; ++j) net.w1(i, j) = a1 * (2.0 * rng.next_unit() - 1.0);
    }
    net.b1 = Eigen::VectorXd::Zero(hidden);
    net.w2.resize(hidden);
    const double a2 = 1.0 / std::sqrt(static_cast<double>(hidden));
    for (Eigen::Index i = 0; i < hidden; ++i) net.w2[i] = a2 * (2.0 * rng.next_unit() - 1.0);
    net.b2 = 0.0;

    bool converged = false;
    double prev_obj = std::numeric_limits<double>::infinity();
    Eigen::MatrixXd h(m, hidden);
    for (int iter = 0; iter < kMlpIterations; ++iter) {
        h.noalias() = x * net.w1.transpose();
        h.rowwise() += net.b1.transpose();
        for (Eigen::Index i = 0; i < h.size(); ++i) h.data()[i] = sigmoid(h.data()[i]);
        Eigen::VectorXd p = h * net.w2;
        p.array() += net.b2;
        for (Eigen::Index i = 0; i < m; ++i) p[i] = sigmoid(p[i]);

        const Eigen::VectorXd delta = (p - y) / static_cast<double>(m);
        const Eigen::VectorXd gw2 = h.transpose() * delta;
        const double gb2 = delta.sum();
        Eigen::MatrixXd dh = delta * net.w2.transpose();
        dh.array() *= h.array() * (1.0 - h.array());
        const Eigen::MatrixXd gw1 = dh.transpose() * x;
        const Eigen::VectorXd gb1 = dh.colwise().sum();

        net.w1 -= kMlpLearningRate * gw1;
        net.b1 -= kMlpLearningRate * gb1;
        net.w2 -= kMlpLearningRate * gw2;
        net.b2 -= kMlpLearningRate * gb2;

        const double obj = binary_cross_entropy(p, y);
        if (std::abs(prev_obj - obj) <= kPlateauTol * std::max(1.0, std::abs(obj))) {
            converged = true;
            break;
        }
        prev_obj = obj;
    }
    return make_mlp_blackbox(std::move(net), static_cast<int>(d), converged);
}

Eigen::VectorXd surrogate_gradient_fd(const BlackBox& model, const ConversionSpec& conversion,
                                      const Eigen::VectorXd& at, double h) {
    if (!(h > 0.0)) throw InvalidArgument("step h must be positive");
    if (at.size() != conversion.surrogate_dim()) {
        throw DimensionMismatch("point length does not match surrogate dimension");
    }
    Eigen::VectorXd grad(at.size());
    Eigen::VectorXd probe = at;
    for (Eigen::Index i = 0; i < at.size(); ++i) {
        probe[i] = at[i] + h;
        const double up = model.predict(convert(conversion, probe));
        probe[i] = at[i] - h;
        const double down = model.predict(convert(conversion, probe));
        probe[i] = at[i];
        grad[i] = (up - down) / (2.0 * h);
    }
    return grad;
}

}  // namespace limekit
