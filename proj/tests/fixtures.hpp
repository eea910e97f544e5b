#pragma once

#include <cmath>
#include <string>

#include "limekit/blackbox.hpp"
#include "limekit/dataset.hpp"
#include "limekit/rng.hpp"

namespace fixtures {

/// Synthetic 13-feature binary classification data in the spirit of the
/// classic wine measurements: a handful of informative features whose class
/// means differ, the rest pure noise.
inline limekit::Dataset wine_like_dataset(int m = 240, int d = 13, std::uint64_t seed = 20240) {
    limekit::SplitMix64 rng(seed);
    limekit::Dataset data;
    data.features.resize(m, d);
    data.labels.resize(static_cast<std::size_t>(m));
    for (int r = 0; r < m; ++r) {
        const int label = r % 2;
        data.labels[static_cast<std::size_t>(r)] = label;
        for (int c = 0; c < d; ++c) {
            double shift = 0.0;
            if (c == 0 || c == 4 || c == 9) shift = label == 1 ? 1.2 : -1.2;
            data.features(r, c) = shift + rng.next_gaussian();
        }
    }
    for (int c = 0; c < d; ++c) data.feature_names.push_back("f" + std::to_string(c));
    return data;
}

inline limekit::BlackBox wine_forest(const limekit::Dataset& data, std::uint64_t seed = 7) {
    return limekit::train_stump_forest(data, 25, 3, seed);
}

/// Smallest distance from x to any split threshold of the forest along the
/// split's own feature; a positive margin means x sits in a cell interior.
inline double threshold_margin(const limekit::BlackBox& forest, const Eigen::VectorXd& x) {
    const auto& params = std::get<limekit::StumpForestModel>(*forest.params());
    double margin = std::numeric_limits<double>::infinity();
    for (const limekit::Tree& tree : params.trees) {
        for (const limekit::TreeNode& node : tree.nodes) {
            if (node.feature >= 0) {
                margin = std::min(margin, std::abs(x[node.feature] - node.threshold));
            }
        }
    }
    return margin;
}

/// Index of a dataset row lying comfortably inside a forest cell.
inline int interior_row(const limekit::BlackBox& forest, const limekit::Dataset& data,
                        double margin = 0.05) {
    for (Eigen::Index r = 0; r < data.size(); ++r) {
        if (threshold_margin(forest, data.features.row(r)) > margin) return static_cast<int>(r);
    }
    throw std::runtime_error("no dataset row is interior to a forest cell");
}

}  // namespace fixtures
