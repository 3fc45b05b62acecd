#include "sits/forest.hpp"

#include "sits/errors.hpp"
#include "sits/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

namespace sits {

double gini(std::span<const std::int64_t> histogram) {
    std::int64_t total = 0;
    for (const std::int64_t c : histogram) total += c;
    if (total == 0) return 0.0;
    double sum_sq = 0.0;
    for (const std::int64_t c : histogram) {
        const double p = static_cast<double>(c) / static_cast<double>(total);
        sum_sq += p * p;
    }
    return 1.0 - sum_sq;
}

const TreeNode& Tree::route(std::span<const double> x) const {
    int node = 0;
    while (!nodes[node].is_leaf()) {
        const TreeNode& n = nodes[node];
        node = x[n.feature] <= n.threshold ? n.left : n.right;
    }
    return nodes[node];
}

int Tree::predict(std::span<const double> x) const {
    const TreeNode& leaf = route(x);
    int best = 0;
    for (std::size_t c = 1; c < leaf.histogram.size(); ++c) {
        if (leaf.histogram[c] > leaf.histogram[best]) best = static_cast<int>(c);
    }
    return best;
}

FlatFeatures flatten_dataset(const Dataset& dataset) {
    if (dataset.samples.empty()) throw DataError("cannot flatten an empty dataset");
    FlatFeatures flat;
    flat.rows = dataset.size();
    flat.cols = dataset.time_len() * dataset.channels();
    flat.values.resize(static_cast<std::size_t>(flat.rows) * flat.cols);
    flat.labels.resize(flat.rows);
    for (int i = 0; i < flat.rows; ++i) {
        const auto& s = dataset.samples[i].series;
        if (!s.fully_valid()) {
            throw DataError("sample " + std::to_string(i) + " has invalid entries; gap-fill first");
        }
        std::memcpy(flat.values.data() + static_cast<std::size_t>(i) * flat.cols, s.values.data(),
                    sizeof(double) * static_cast<std::size_t>(flat.cols));
        flat.labels[i] = dataset.samples[i].label;
    }
    return flat;
}

namespace {

struct SplitChoice {
    bool found = false;
    int feature = -1;
    double threshold = 0.0;
    double gain = -1.0;
    // partition of the node's index range after the scan
    std::vector<int> left, right;
};

struct TreeBuilder {
    const FlatFeatures& data;
    int n_classes;
    int mtry;
    Rng rng;
    std::vector<TreeNode> nodes;

    // scratch reused across nodes
    std::vector<int> feature_pool;
    std::vector<std::pair<double, int>> sorted;  // (value, label) of node samples

    TreeBuilder(const FlatFeatures& d, int classes, int m, std::uint64_t seed)
        : data(d), n_classes(classes), mtry(m), rng(seed) {
        feature_pool.resize(data.cols);
        std::iota(feature_pool.begin(), feature_pool.end(), 0);
    }

    std::vector<std::int64_t> histogram(const std::vector<int>& idx) const {
        std::vector<std::int64_t> hist(n_classes, 0);
        for (const int i : idx) hist[data.labels[i]]++;
        return hist;
    }

    // Evaluates one feature on the node samples; updates `best` when a valid
    // split strictly improves it. Candidates iterate in ascending feature and
    // threshold order with strict comparisons, so ties keep the lowest pair.
    void scan_feature(int feature, const std::vector<int>& idx,
                      const std::vector<std::int64_t>& parent_hist, double parent_gini,
                      SplitChoice& best) {
        const std::size_t n = idx.size();
        sorted.clear();
        for (const int i : idx) {
            sorted.emplace_back(data.values[static_cast<std::size_t>(i) * data.cols + feature],
                                data.labels[i]);
        }
        std::sort(sorted.begin(), sorted.end());
        if (sorted.front().first == sorted.back().first) return;  // constant feature

        std::vector<std::int64_t> left_hist(n_classes, 0);
        std::vector<std::int64_t> right_hist = parent_hist;
        const double dn = static_cast<double>(n);

        for (std::size_t k = 0; k + 1 < n; ++k) {
            left_hist[sorted[k].second]++;
            right_hist[sorted[k].second]--;
            if (sorted[k].first == sorted[k + 1].first) continue;
            const double threshold = sorted[k].first + (sorted[k + 1].first - sorted[k].first) / 2.0;
            // Guard against the midpoint collapsing onto the upper value,
            // which would route both sides left.
            if (!(threshold < sorted[k + 1].first)) continue;
            const double nl = static_cast<double>(k + 1);
            const double nr = dn - nl;
            const double gain =
                parent_gini - (nl * gini(left_hist) + nr * gini(right_hist)) / dn;
            if (gain > best.gain) {
                best.found = true;
                best.gain = gain;
                best.feature = feature;
                best.threshold = threshold;
            }
        }
    }

    SplitChoice find_split(const std::vector<int>& idx, const std::vector<std::int64_t>& hist) {
        const double parent_gini = gini(hist);
        SplitChoice best;

        // mtry candidates without replacement (partial Fisher-Yates), then
        // evaluated in ascending index order for deterministic tie breaking.
        for (int k = 0; k < mtry; ++k) {
            const std::size_t j = k + rng.below(feature_pool.size() - k);
            std::swap(feature_pool[k], feature_pool[j]);
        }
        std::vector<int> candidates(feature_pool.begin(), feature_pool.begin() + mtry);
        std::sort(candidates.begin(), candidates.end());
        for (const int f : candidates) scan_feature(f, idx, hist, parent_gini, best);

        if (!best.found) {
            // None of the sampled features can split this node; fall back to
            // the remaining features so impure distinguishable nodes still
            // purify.
            std::sort(feature_pool.begin() + mtry, feature_pool.end());
            for (std::size_t k = mtry; k < feature_pool.size() && !best.found; ++k) {
                scan_feature(feature_pool[k], idx, hist, parent_gini, best);
            }
        }

        if (best.found) {
            for (const int i : idx) {
                const double v = data.values[static_cast<std::size_t>(i) * data.cols + best.feature];
                (v <= best.threshold ? best.left : best.right).push_back(i);
            }
        }
        return best;
    }

    int grow(std::vector<int> idx) {
        std::vector<std::int64_t> hist = histogram(idx);
        const bool pure =
            std::count_if(hist.begin(), hist.end(), [](std::int64_t c) { return c > 0; }) <= 1;

        if (pure || idx.size() < 2) {
            nodes.push_back(TreeNode{-1, 0.0, -1, -1, std::move(hist)});
            return static_cast<int>(nodes.size()) - 1;
        }

        SplitChoice split = find_split(idx, hist);
        if (!split.found) {  // identical feature vectors with mixed labels
            nodes.push_back(TreeNode{-1, 0.0, -1, -1, std::move(hist)});
            return static_cast<int>(nodes.size()) - 1;
        }

        const int self = static_cast<int>(nodes.size());
        nodes.push_back(TreeNode{split.feature, split.threshold, -1, -1, {}});
        idx.clear();
        idx.shrink_to_fit();
        const int left = grow(std::move(split.left));
        const int right = grow(std::move(split.right));
        nodes[self].left = left;
        nodes[self].right = right;
        return self;
    }
};

} // namespace

ForestModel fit_forest(const FlatFeatures& train, int n_classes, int n_trees, std::uint64_t seed,
                       int mtry_override) {
    if (train.rows == 0) throw DataError("cannot fit a forest on an empty training set");
    if (n_trees < 1) throw std::invalid_argument("forest needs at least one tree");
    if (mtry_override > train.cols) throw std::invalid_argument("mtry exceeds the feature count");

    ForestModel model;
    model.n_features = train.cols;
    model.n_classes = n_classes;
    model.mtry = mtry_override > 0
                     ? mtry_override
                     : std::max(1, static_cast<int>(std::sqrt(static_cast<double>(train.cols))));
    model.seed = seed;
    model.trees.resize(n_trees);

    for (int t = 0; t < n_trees; ++t) {
        Rng boot(derive_seed(seed, "bootstrap", static_cast<std::uint64_t>(t)));
        std::vector<int> idx(train.rows);
        for (int i = 0; i < train.rows; ++i) {
            idx[i] = static_cast<int>(boot.below(static_cast<std::uint64_t>(train.rows)));
        }
        TreeBuilder builder(train, n_classes, model.mtry,
                            derive_seed(seed, "tree", static_cast<std::uint64_t>(t)));
        builder.grow(std::move(idx));
        model.trees[t].nodes = std::move(builder.nodes);
    }
    return model;
}

ForestModel fit_forest(const Dataset& train, int n_trees, std::uint64_t seed) {
    return fit_forest(flatten_dataset(train), train.num_classes(), n_trees, seed);
}

std::vector<std::int64_t> forest_votes(const ForestModel& model, const FlatFeatures& data) {
    if (data.cols != model.n_features) {
        throw DataError("forest was fitted on " + std::to_string(model.n_features) +
                        " features, data has " + std::to_string(data.cols));
    }
    std::vector<std::int64_t> votes(static_cast<std::size_t>(data.rows) * model.n_classes, 0);
    for (const Tree& tree : model.trees) {
        for (int i = 0; i < data.rows; ++i) {
            votes[static_cast<std::size_t>(i) * model.n_classes + tree.predict(data.row(i))]++;
        }
    }
    return votes;
}

std::vector<int> predict_forest(const ForestModel& model, const FlatFeatures& data) {
    const auto votes = forest_votes(model, data);
    std::vector<int> labels(data.rows);
    for (int i = 0; i < data.rows; ++i) {
        const std::int64_t* row = votes.data() + static_cast<std::size_t>(i) * model.n_classes;
        int best = 0;
        for (int c = 1; c < model.n_classes; ++c) {
            if (row[c] > row[best]) best = c;
        }
        labels[i] = best;
    }
    return labels;
}

std::vector<int> predict_forest(const ForestModel& model, const Dataset& data) {
    return predict_forest(model, flatten_dataset(data));
}

namespace {
constexpr char kForestMagic[8] = {'S', 'I', 'T', 'S', 'F', 'R', 'S', '1'};
}

void save_forest(const ForestModel& model, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write forest file: " + path);
    auto put = [&out](const auto& v) { out.write(reinterpret_cast<const char*>(&v), sizeof(v)); };

    out.write(kForestMagic, sizeof(kForestMagic));
    put(model.n_features);
    put(model.n_classes);
    put(model.mtry);
    put(model.seed);
    const std::uint64_t n_trees = model.trees.size();
    put(n_trees);
    for (const Tree& tree : model.trees) {
        const std::uint64_t n_nodes = tree.nodes.size();
        put(n_nodes);
        for (const TreeNode& node : tree.nodes) {
            put(node.feature);
            put(node.threshold);
            put(node.left);
            put(node.right);
            const std::uint64_t h = node.histogram.size();
            put(h);
            out.write(reinterpret_cast<const char*>(node.histogram.data()),
                      static_cast<std::streamsize>(h * sizeof(std::int64_t)));
        }
    }
    if (!out) throw DataError("failed writing forest file: " + path);
}

ForestModel load_forest(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot open forest file: " + path);
    auto get = [&in, &path](auto& v) {
        in.read(reinterpret_cast<char*>(&v), sizeof(v));
        if (!in) throw DataError(path + ": forest file truncated");
    };

    char magic[8];
    in.read(magic, sizeof(magic));
    if (!in || std::memcmp(magic, kForestMagic, sizeof(kForestMagic)) != 0) {
        throw DataError(path + " is not a forest file");
    }
    ForestModel model;
    get(model.n_features);
    get(model.n_classes);
    get(model.mtry);
    get(model.seed);
    std::uint64_t n_trees = 0;
    get(n_trees);
    model.trees.resize(n_trees);
    for (Tree& tree : model.trees) {
        std::uint64_t n_nodes = 0;
        get(n_nodes);
        tree.nodes.resize(n_nodes);
        for (TreeNode& node : tree.nodes) {
            get(node.feature);
            get(node.threshold);
            get(node.left);
            get(node.right);
            std::uint64_t h = 0;
            get(h);
            node.histogram.resize(h);
            in.read(reinterpret_cast<char*>(node.histogram.data()),
                    static_cast<std::streamsize>(h * sizeof(std::int64_t)));
            if (!in) throw DataError(path + ": forest file truncated");
        }
    }
    return model;
}

} // namespace sits
