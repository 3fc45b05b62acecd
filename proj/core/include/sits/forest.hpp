#pragma once

#include "sits/series.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sits {

/// 1 - sum_c p_c^2 over the class proportions of a count histogram.
double gini(std::span<const std::int64_t> histogram);

/// Either a split (feature, threshold, children) or a leaf (class histogram).
/// Routing: x[feature] <= threshold goes left.
struct TreeNode {
    int feature = -1;  // -1 marks a leaf
    double threshold = 0.0;
    int left = -1;
    int right = -1;
    std::vector<std::int64_t> histogram;  // leaves only

    bool is_leaf() const { return feature < 0; }
};

struct Tree {
    std::vector<TreeNode> nodes;  // nodes[0] is the root

    const TreeNode& route(std::span<const double> x) const;
    /// Leaf majority class; ties break toward the lowest class index.
    int predict(std::span<const double> x) const;
};

/// Flattened feature matrix view of a gap-filled dataset (row-major N x F).
struct FlatFeatures {
    std::vector<double> values;
    int rows = 0;
    int cols = 0;
    std::vector<int> labels;

    std::span<const double> row(int i) const {
        return {values.data() + static_cast<std::size_t>(i) * cols, static_cast<std::size_t>(cols)};
    }
};

FlatFeatures flatten_dataset(const Dataset& dataset);

struct ForestModel {
    std::vector<Tree> trees;
    int n_features = 0;
    int n_classes = 0;
    int mtry = 0;  // features considered per split, floor(sqrt(F))
    std::uint64_t seed = 0;
};

/// Breiman-style forest: each tree grows on a bootstrap resample to purity or
/// single-sample nodes, choosing at every node the best Gini-gain midpoint
/// threshold among mtry features sampled without replacement (scanning the
/// remaining features only when none of the sampled ones can split). Tie
/// breaks: lowest feature index, then lowest threshold.
/// `mtry_override` forces the per-split feature count (tests use the full
/// feature set to make trees a deterministic function of the data alone);
/// non-positive keeps the floor(sqrt(F)) default.
ForestModel fit_forest(const FlatFeatures& train, int n_classes, int n_trees = 500,
                       std::uint64_t seed = 0, int mtry_override = 0);
ForestModel fit_forest(const Dataset& train, int n_trees = 500, std::uint64_t seed = 0);

/// Majority vote over trees; ties break toward the lowest class index.
std::vector<int> predict_forest(const ForestModel& model, const FlatFeatures& data);
std::vector<int> predict_forest(const ForestModel& model, const Dataset& data);

/// Per-sample vote counts (N x C, row-major).
std::vector<std::int64_t> forest_votes(const ForestModel& model, const FlatFeatures& data);

/// Versioned binary flat node table per tree; round-trips exactly.
void save_forest(const ForestModel& model, const std::string& path);
ForestModel load_forest(const std::string& path);

} // namespace sits
