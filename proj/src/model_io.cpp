#include "limekit/model_io.hpp"

#include <fstream>
#include <sstream>

#include <json.hpp>

namespace limekit {
namespace {

using json = nlohmann::ordered_json;

json vector_to_json(const Eigen::VectorXd& v) {
    json arr = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const json& arr) {
    Eigen::VectorXd v(arr.size());
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    return v;
}

json logistic_to_json(const LogisticModel& m) {
    json j;
    j["kind"] = "logistic";
    j["weights"] = vector_to_json(m.weights);
    j["bias"] = m.bias;
    return j;
}

json forest_to_json(const StumpForestModel& m) {
    json j;
    j["kind"] = "stump_forest";
    j["input_dim"] = m.input_dim;
    json trees = json::array();
    for (const Tree& tree : m.trees) {
        json t;
        json feature = json::array();
        json threshold = json::array();
        json left = json::array();
        json right = json::array();
        json value = json::array();
        for (const TreeNode& node : tree.nodes) {
            feature.push_back(node.feature);
            threshold.push_back(node.threshold);
            left.push_back(node.left);
            right.push_back(node.right);
            value.push_back(node.value);
        }
        t["feature"] = std::move(feature);
        t["threshold"] = std::move(threshold);
        t["left"] = std::move(left);
        t["right"] = std::move(right);
        t["value"] = std::move(value);
        trees.push_back(std::move(t));
    }
    j["trees"] = std::move(trees);
    return j;
}

json mlp_to_json(const MlpModel& m, int input_dim) {
    json j;
    j["kind"] = "mlp";
    j["input_dim"] = input_dim;
    j["hidden"] = m.w1.rows();
    json w1 = json::array();
    for (Eigen::Index i = 0; i < m.w1.rows(); ++i) {
        for (Eigen::Index k = 0; k < m.w1.cols(); ++k) w1.push_back(m.w1(i, k));
    }
    j["w1"] = std::move(w1);
    j["b1"] = vector_to_json(m.b1);
    j["w2"] = vector_to_json(m.w2);
    j["b2"] = m.b2;
    return j;
}

}  // namespace

std::string model_to_json(const BlackBox& model) {
    if (!model.params()) {
        throw InvalidArgument("custom black boxes carry no serializable parameters");
    }
    json j = std::visit(
        [&](const auto& m) -> json {
            using T = std::decay_t<decltype(m)>;
            if constexpr (std::is_same_v<T, LogisticModel>) return logistic_to_json(m);
            if constexpr (std::is_same_v<T, StumpForestModel>) return forest_to_json(m);
            if constexpr (std::is_same_v<T, MlpModel>) return mlp_to_json(m, model.input_dim());
        },
        *model.params());
    j["converged"] = model.converged();
    return j.dump(2) + "\n";
}

void save_model_json(const std::string& path, const BlackBox& model) {
    const std::string text = model_to_json(model);
    std::ofstream out(path);
    if (!out) throw IoError("cannot open " + path + " for writing");
    out << text;
    if (!out) throw IoError("failed writing " + path);
}

BlackBox model_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed model JSON: ") + e.what());
    }
    try {
        const std::string kind = j.at("kind").get<std::string>();
        const bool converged = j.value("converged", true);
        if (kind == "logistic") {
            LogisticModel m;
            m.weights = vector_from_json(j.at("weights"));
            m.bias = j.at("bias").get<double>();
            return make_logistic_blackbox(std::move(m), converged);
        }
        if (kind == "stump_forest") {
            StumpForestModel m;
            m.input_dim = j.at("input_dim").get<int>();
            for (const json& t : j.at("trees")) {
                Tree tree;
                const auto& feature = t.at("feature");
                const auto& threshold = t.at("threshold");
                const auto& left = t.at("left");
                const auto& right = t.at("right");
                const auto& value = t.at("value");
                for (std::size_t i = 0; i < feature.size(); ++i) {
                    TreeNode node;
                    node.feature = feature[i].get<int>();
                    node.threshold = threshold[i].get<double>();
                    node.left = left[i].get<int>();
                    node.right = right[i].get<int>();
                    node.value = value[i].get<double>();
                    tree.nodes.push_back(node);
                }
                m.trees.push_back(std::move(tree));
            }
            return make_stump_forest_blackbox(std::move(m));
        }
        if (kind == "mlp") {
            MlpModel m;
            const int input_dim = j.at("input_dim").get<int>();
            const auto hidden = j.at("hidden").get<Eigen::Index>();
            const auto& w1 = j.at("w1");
            m.w1.resize(hidden, input_dim);
            for (Eigen::Index i = 0; i < hidden; ++i) {
                for (int k = 0; k < input_dim; ++k) {
                    m.w1(i, k) = w1[static_cast<std::size_t>(i * input_dim + k)].get<double>();
                }
            }
            m.b1 = vector_from_json(j.at("b1"));
            m.w2 = vector_from_json(j.at("w2"));
            m.b2 = j.at("b2").get<double>();
            return make_mlp_blackbox(std::move(m), input_dim, converged);
        }
        throw InvalidArgument("unknown model kind: " + kind);
    } catch (const json::exception& e) {
        throw InvalidArgument(std::string("malformed model JSON: ") + e.what());
    }
}

BlackBox load_model_json(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream buffer;
    buffer << in.rdbuf();
    return model_from_json(buffer.str());
}

}  // namespace limekit
