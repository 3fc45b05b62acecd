#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sits/errors.hpp"
#include "sits/forest.hpp"
#include "sits/rng.hpp"

#include <algorithm>
#include <filesystem>

using namespace sits;

namespace {

FlatFeatures random_features(Rng& rng, int rows, int cols, int classes) {
    FlatFeatures flat;
    flat.rows = rows;
    flat.cols = cols;
    flat.values.resize(static_cast<std::size_t>(rows) * cols);
    for (auto& v : flat.values) v = rng.uniform(-1, 1);
    flat.labels.resize(rows);
    for (auto& y : flat.labels) y = static_cast<int>(rng.below(classes));
    return flat;
}

// Two clearly separated clusters in a 2-feature space with label-irrelevant
// extra dimensions.
FlatFeatures separable_features(Rng& rng, int per_class, int cols) {
    FlatFeatures flat;
    flat.rows = 2 * per_class;
    flat.cols = cols;
    for (int i = 0; i < flat.rows; ++i) {
        const int label = i % 2;
        flat.labels.push_back(label);
        for (int c = 0; c < cols; ++c) {
            double v = rng.uniform(-0.2, 0.2);
            if (c < 2) v += label == 0 ? -1.0 : 1.0;
            flat.values.push_back(v);
        }
    }
    return flat;
}

} // namespace

TEST_CASE("gini impurity values") {
    CHECK(gini(std::vector<std::int64_t>{7, 0, 0}) == 0.0);
    CHECK(gini(std::vector<std::int64_t>{5, 5}) == doctest::Approx(0.5));
    CHECK(gini(std::vector<std::int64_t>{1, 2, 3}) == doctest::Approx(11.0 / 18.0));
    CHECK(gini(std::vector<std::int64_t>{}) == 0.0);
}

TEST_CASE("single-class training data produces single-leaf trees") {
    Rng rng(3);
    FlatFeatures flat = random_features(rng, 40, 6, 3);
    std::fill(flat.labels.begin(), flat.labels.end(), 1);
    const ForestModel model = fit_forest(flat, 3, 20, 99);
    for (const Tree& tree : model.trees) {
        REQUIRE(tree.nodes.size() == 1);
        CHECK(tree.nodes[0].is_leaf());
    }
    for (const int pred : predict_forest(model, flat)) CHECK(pred == 1);
}

TEST_CASE("forest fitting is deterministic under the seed") {
    Rng rng(5);
    const FlatFeatures train = separable_features(rng, 40, 5);
    const FlatFeatures test = separable_features(rng, 20, 5);
    const ForestModel a = fit_forest(train, 2, 15, 1234);
    const ForestModel b = fit_forest(train, 2, 15, 1234);
    CHECK(predict_forest(a, test) == predict_forest(b, test));
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
            CHECK(a.trees[t].nodes[n].feature == b.trees[t].nodes[n].feature);
            CHECK(a.trees[t].nodes[n].threshold == b.trees[t].nodes[n].threshold);
        }
    }
}

TEST_CASE("separable data trains to a perfect fit with 25 trees") {
    Rng rng(7);
    const FlatFeatures train = separable_features(rng, 60, 4);
    const ForestModel model = fit_forest(train, 2, 25, 7);
    CHECK(predict_forest(model, train) == train.labels);
}

TEST_CASE("trees grow to purity: bootstrap samples end in leaves holding their class") {
    Rng rng(11);
    FlatFeatures train = random_features(rng, 30, 4, 3);
    // distinct feature vectors guarantee purity is achievable
    for (int i = 0; i < train.rows; ++i) train.values[i * train.cols] += 10.0 * i;

    const std::uint64_t seed = 31;
    const ForestModel model = fit_forest(train, 3, 8, seed);
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        // re-derive the bootstrap stream exactly as the fitter does
        Rng boot(derive_seed(seed, "bootstrap", t));
        for (int i = 0; i < train.rows; ++i) {
            const int idx = static_cast<int>(boot.below(static_cast<std::uint64_t>(train.rows)));
            const TreeNode& leaf = model.trees[t].route(train.row(idx));
            CHECK(leaf.histogram[train.labels[idx]] > 0);
        }
    }
}

TEST_CASE("feature permutation relabels the tree without changing its structure") {
    Rng rng(13);
    const FlatFeatures train = separable_features(rng, 25, 6);

    // permute columns of a copy
    const std::vector<int> perm{3, 0, 5, 1, 4, 2};  // new index -> old index
    FlatFeatures permuted = train;
    for (int i = 0; i < train.rows; ++i) {
        for (int c = 0; c < 6; ++c) {
            permuted.values[i * 6 + c] = train.values[i * 6 + perm[c]];
        }
    }
    std::vector<int> old_to_new(6);
    for (int c = 0; c < 6; ++c) old_to_new[perm[c]] = c;

    // mtry = F makes the candidate set permutation-covariant
    const ForestModel a = fit_forest(train, 2, 3, 555, 6);
    const ForestModel b = fit_forest(permuted, 2, 3, 555, 6);
    REQUIRE(a.trees.size() == b.trees.size());
    for (std::size_t t = 0; t < a.trees.size(); ++t) {
        REQUIRE(a.trees[t].nodes.size() == b.trees[t].nodes.size());
        for (std::size_t n = 0; n < a.trees[t].nodes.size(); ++n) {
            const TreeNode& na = a.trees[t].nodes[n];
            const TreeNode& nb = b.trees[t].nodes[n];
            CHECK(na.is_leaf() == nb.is_leaf());
            if (!na.is_leaf()) {
                CHECK(nb.feature == old_to_new[na.feature]);
                CHECK(nb.threshold == na.threshold);
                CHECK(nb.left == na.left);
                CHECK(nb.right == na.right);
            } else {
                CHECK(nb.histogram == na.histogram);
            }
        }
    }
}

TEST_CASE("predictions are invariant to the sample order of the test set") {
    Rng rng(17);
    const FlatFeatures train = separable_features(rng, 30, 4);
    FlatFeatures test = separable_features(rng, 15, 4);
    const ForestModel model = fit_forest(train, 2, 10, 3);

    const std::vector<int> forward = predict_forest(model, test);
    FlatFeatures reversed = test;
    for (int i = 0; i < test.rows; ++i) {
        for (int c = 0; c < 4; ++c) {
            reversed.values[i * 4 + c] = test.values[(test.rows - 1 - i) * 4 + c];
        }
        reversed.labels[i] = test.labels[test.rows - 1 - i];
    }
    std::vector<int> backward = predict_forest(model, reversed);
    std::reverse(backward.begin(), backward.end());
    CHECK(forward == backward);
}

TEST_CASE("vote counts are consistent with majority predictions") {
    Rng rng(19);
    const FlatFeatures train = separable_features(rng, 20, 4);
    const FlatFeatures test = separable_features(rng, 10, 4);

    const ForestModel one_tree = fit_forest(train, 2, 1, 5);
    const auto single = predict_forest(one_tree, test);
    for (int i = 0; i < test.rows; ++i) {
        CHECK(single[i] == one_tree.trees[0].predict(test.row(i)));
    }

    const ForestModel model = fit_forest(train, 2, 9, 5);
    const auto votes = forest_votes(model, test);
    const auto pred = predict_forest(model, test);
    for (int i = 0; i < test.rows; ++i) {
        std::int64_t total = 0;
        int best = 0;
        for (int c = 0; c < 2; ++c) {
            total += votes[i * 2 + c];
            if (votes[i * 2 + c] > votes[i * 2 + best]) best = c;
        }
        CHECK(total == 9);
        CHECK(pred[i] == best);
    }
}

TEST_CASE("empty training set and bad configs are rejected") {
    FlatFeatures empty;
    CHECK_THROWS_AS(fit_forest(empty, 2, 10, 0), DataError);
    Rng rng(23);
    const FlatFeatures train = separable_features(rng, 10, 4);
    CHECK_THROWS_AS(fit_forest(train, 2, 0, 0), std::invalid_argument);
    CHECK_THROWS_AS(fit_forest(train, 2, 10, 0, 99), std::invalid_argument);
}

TEST_CASE("forest serialization round-trips the node tables") {
    Rng rng(29);
    const FlatFeatures train = separable_features(rng, 30, 5);
    const FlatFeatures test = separable_features(rng, 12, 5);
    const ForestModel model = fit_forest(train, 2, 7, 77);

    const std::string path = (std::filesystem::temp_directory_path() / "sits_forest.bin").string();
    save_forest(model, path);
    const ForestModel back = load_forest(path);

    CHECK(back.n_features == model.n_features);
    CHECK(back.mtry == model.mtry);
    REQUIRE(back.trees.size() == model.trees.size());
    for (std::size_t t = 0; t < model.trees.size(); ++t) {
        REQUIRE(back.trees[t].nodes.size() == model.trees[t].nodes.size());
        for (std::size_t n = 0; n < model.trees[t].nodes.size(); ++n) {
            CHECK(back.trees[t].nodes[n].feature == model.trees[t].nodes[n].feature);
            CHECK(back.trees[t].nodes[n].threshold == model.trees[t].nodes[n].threshold);
            CHECK(back.trees[t].nodes[n].histogram == model.trees[t].nodes[n].histogram);
        }
    }
    CHECK(predict_forest(back, test) == predict_forest(model, test));
}
