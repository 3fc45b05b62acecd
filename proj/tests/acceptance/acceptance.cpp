// Acceptance suite: one pass/fail line per criterion, in order. The
// direction-matching experiments (criteria 6-10) retrain full models over
// polygon folds and dominate the runtime.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sits/architectures.hpp"
#include "sits/dataset_io.hpp"
#include "sits/eval.hpp"
#include "sits/forest.hpp"
#include "sits/model_io.hpp"
#include "sits/network.hpp"
#include "sits/preprocess.hpp"
#include "sits/rng.hpp"
#include "sits/studies.hpp"
#include "sits/synth.hpp"

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

using namespace sits;
namespace fs = std::filesystem;

namespace {

struct Timer {
    std::chrono::steady_clock::time_point start = std::chrono::steady_clock::now();
    double seconds() const {
        return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
};

void report(int criterion, bool ok, const std::string& detail) {
    std::printf("[%s] criterion %02d: %s\n", ok ? "PASS" : "FAIL", criterion, detail.c_str());
    std::fflush(stdout);
}

std::string fmt(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.4f", v);
    return buf;
}

Tensor3 random_batch(Rng& rng, int n, int t, int d) {
    Tensor3 x(n, t, d);
    for (auto& v : x.data) v = rng.uniform(0.0, 1.0);
    return x;
}

std::vector<int> random_labels(Rng& rng, int n, int classes) {
    std::vector<int> y(n);
    for (auto& v : y) v = static_cast<int>(rng.below(classes));
    return y;
}

fs::path work_dir() {
    static const fs::path dir = [] {
        fs::path d = fs::temp_directory_path() / "sits_acceptance";
        fs::create_directories(d);
        return d;
    }();
    return dir;
}

double pair_mean(const RowOutcome& row) {
    double acc = 0.0;
    for (const auto& f : row.folds) acc += pair_accuracy(f.cm, 0, 1);
    return acc / static_cast<double>(row.folds.size());
}

// Shared shift-benchmark experiment: computed once, consumed by criteria 6-8.
struct BenchmarkResults {
    RowOutcome rf, fc, tempcnn, gap, tempcnn_shuffled;
    std::vector<RowOutcome> rf_seeds, rf_seeds_shuffled;
};

const BenchmarkResults& benchmark_results() {
    static const BenchmarkResults results = [] {
        constexpr std::uint64_t kSeed = 2026;
        const Dataset raw = make_shift_benchmark(30.0, kSeed, 0.02);
        const auto folds = polygon_split(raw, 0.6, 5, derive_seed(kSeed, "split"));
        TrainConfig base;
        base.seed = derive_seed(kSeed, "benchmark");

        BenchmarkResults out;
        ExperimentRow rf;
        rf.name = "rf";
        rf.pipeline = {FeatureStrategy::spectral_bands, Sampling::original};
        rf.train = base;
        out.rf = run_row(raw, folds, rf);

        ExperimentRow fc = rf;
        fc.name = "fc";
        fc.build = [](int t, int d, int c) { return build_fc_baseline(t, d, c); };
        out.fc = run_row(raw, folds, fc);

        ExperimentRow tempcnn;
        tempcnn.name = "tempcnn";
        tempcnn.pipeline = {FeatureStrategy::spectral_bands, Sampling::two_day};
        tempcnn.train = base;
        tempcnn.build = [](int t, int d, int c) { return build_tempcnn(t, d, c); };
        out.tempcnn = run_row(raw, folds, tempcnn);

        ExperimentRow gap = tempcnn;
        gap.name = "gap";
        gap.build = [](int t, int d, int c) {
            return build_pooling_variant(PoolVariant::gap, 4, t, d, c);
        };
        out.gap = run_row(raw, folds, gap);

        const auto grid_len = AcquisitionCalendar::resample(raw.calendar(), 2).length();
        ExperimentRow shuffled = tempcnn;
        shuffled.name = "tempcnn-shuffled";
        shuffled.time_permutation_grid =
            random_time_permutation(grid_len, derive_seed(kSeed, "permutation"));
        out.tempcnn_shuffled = run_row(raw, folds, shuffled);

        // RF order-obliviousness: five seeds, each on one fold, with and
        // without the fixed permutation applied to train and test alike.
        const auto perm_original =
            random_time_permutation(raw.time_len(), derive_seed(kSeed, "permutation"));
        for (int s = 0; s < 5; ++s) {
            ExperimentRow seeded = rf;
            seeded.name = "rf-seed" + std::to_string(s);
            seeded.train.seed = derive_seed(kSeed, "rf-seed", static_cast<std::uint64_t>(s));
            const std::vector<SplitAssignment> one_fold{folds[static_cast<std::size_t>(s)]};
            out.rf_seeds.push_back(run_row(raw, one_fold, seeded));
            seeded.time_permutation_grid = perm_original;
            out.rf_seeds_shuffled.push_back(run_row(raw, one_fold, seeded));
        }
        return out;
    }();
    return results;
}

} // namespace

TEST_CASE("criterion 01: gradient correctness per layer and for the full network") {
    Timer timer;
    Rng rng(1);
    const Tensor3 batch = random_batch(rng, 4, 16, 2);
    const std::vector<int> labels = random_labels(rng, 4, 3);

    double worst = 0.0;
    std::string worst_name = "none";
    auto check_spec = [&](const std::string& name, const NetworkSpec& spec) {
        const double err = gradient_check(spec, batch, labels, 1e-6);
        if (err > worst) {
            worst = err;
            worst_name = name;
        }
    };

    const auto layer_specs = [&]() {
        std::vector<std::pair<std::string, std::vector<LayerDesc>>> cases;
        cases.push_back({"conv", {ConvDesc{5, 4, ConvKind::full}, FlattenDesc{}, SoftmaxDesc{3}}});
        cases.push_back({"conv-shared",
                         {ConvDesc{5, 4, ConvKind::temporal_shared}, FlattenDesc{}, SoftmaxDesc{3}}});
        cases.push_back({"dense", {FlattenDesc{}, DenseDesc{6}, SoftmaxDesc{3}}});
        cases.push_back({"relu", {ConvDesc{3, 4, ConvKind::full}, ReluDesc{}, FlattenDesc{},
                                  SoftmaxDesc{3}}});
        cases.push_back({"batchnorm", {ConvDesc{3, 4, ConvKind::full}, BatchNormDesc{},
                                       FlattenDesc{}, SoftmaxDesc{3}}});
        cases.push_back({"dropout", {ConvDesc{3, 4, ConvKind::full}, DropoutDesc{0.5},
                                     FlattenDesc{}, SoftmaxDesc{3}}});
        cases.push_back({"max-pool", {ConvDesc{3, 4, ConvKind::full}, PoolDesc{PoolKind::max, 2},
                                      FlattenDesc{}, SoftmaxDesc{3}}});
        cases.push_back({"avg-pool", {ConvDesc{3, 4, ConvKind::full}, PoolDesc{PoolKind::avg, 2},
                                      FlattenDesc{}, SoftmaxDesc{3}}});
        cases.push_back({"global-avg-pool",
                         {ConvDesc{3, 4, ConvKind::full}, GlobalAvgPoolDesc{}, SoftmaxDesc{3}}});
        return cases;
    }();
    for (const auto& [name, layers] : layer_specs) {
        NetworkSpec spec;
        spec.input_time = 16;
        spec.input_channels = 2;
        spec.layers = layers;
        check_spec(name, spec);
    }
    check_spec("tempcnn-tiny", build_tempcnn(16, 2, 3, 4, 3, 5, 4));

    const double secs = timer.seconds();
    const bool ok = worst < 1e-5 && secs < 30.0;
    report(1, ok, "max relative gradient error " + std::to_string(worst) + " (worst: " +
                      worst_name + "), " + fmt(secs) + " s");
    CHECK(worst < 1e-5);
    CHECK(secs < 30.0);
}

TEST_CASE("criterion 02: convolution equals the nested-loop oracle on 100 random shapes") {
    Timer timer;
    Rng rng(2);
    double worst = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
        const int f = 1 + 2 * static_cast<int>(rng.below(5));
        const int d = 1 + static_cast<int>(rng.below(5));
        const int n = 1 + static_cast<int>(rng.below(6));
        const int t = 1 + static_cast<int>(rng.below(20));
        const int batch = 1 + static_cast<int>(rng.below(4));
        const ConvKind kind = rng.bernoulli(0.3) ? ConvKind::temporal_shared : ConvKind::full;

        ConvLayerParams p = ConvLayerParams::create(f, d, n, kind);
        for (auto& w : p.weights) w = rng.uniform(-1, 1);
        for (auto& b : p.bias) b = rng.uniform(-1, 1);
        const Tensor3 x = random_batch(rng, batch, t, d);
        const Tensor3 fast = conv1d_forward(x, p);

        // direct nested-loop sum with zero padding
        const int off = f / 2;
        for (int b = 0; b < batch; ++b) {
            for (int tt = 0; tt < t; ++tt) {
                for (int u = 0; u < n; ++u) {
                    double acc = p.bias[u];
                    for (int j = 0; j < f; ++j) {
                        const int src = tt + j - off;
                        if (src < 0 || src >= t) continue;
                        for (int dd = 0; dd < d; ++dd) {
                            const double w =
                                kind == ConvKind::temporal_shared
                                    ? p.weights[static_cast<std::size_t>(j) * n + u]
                                    : p.weights[(static_cast<std::size_t>(j) * d + dd) * n + u];
                            acc += w * x(b, src, dd);
                        }
                    }
                    worst = std::max(worst, std::abs(acc - fast(b, tt, u)));
                }
            }
        }
    }
    const double secs = timer.seconds();
    const bool ok = worst < 1e-12 && secs < 10.0;
    report(2, ok, "max absolute deviation " + std::to_string(worst) + ", " + fmt(secs) + " s");
    CHECK(worst < 1e-12);
    CHECK(secs < 10.0);
}

TEST_CASE("criterion 03: gradient filter signs on monotone ramps") {
    ConvLayerParams p = ConvLayerParams::create(5, 1, 1);
    p.weights = {-1, -1, 0, 1, 1};
    Tensor3 up(1, 24, 1), down(1, 24, 1);
    for (int t = 0; t < 24; ++t) {
        up(0, t, 0) = 0.04 * t + 0.1;
        down(0, t, 0) = 1.1 - 0.04 * t;
    }
    const Tensor3 out_up = conv1d_forward(up, p);
    const Tensor3 out_down = conv1d_forward(down, p);
    bool ok = true;
    for (int t = 2; t < 22; ++t) {
        ok = ok && out_up(0, t, 0) > 0.0 && out_down(0, t, 0) < 0.0;
    }
    report(3, ok, "interior responses strictly positive on rising, negative on falling ramps");
    CHECK(ok);
}

TEST_CASE("criterion 04: per-strategy feature counts on both samplings") {
    const auto original = std::make_shared<AcquisitionCalendar>(default_calendar());
    const auto grid =
        std::make_shared<AcquisitionCalendar>(AcquisitionCalendar::resample(*original, 2));
    Rng rng(4);
    bool ok = true;
    std::ostringstream detail;
    for (const auto& [cal, ndvi_n, sb_n, all_n] :
         {std::tuple{original, 46, 138, 276}, std::tuple{grid, 149, 447, 894}}) {
        MultivariateSeries s(cal, 3);
        for (int t = 0; t < cal->length(); ++t) {
            for (int d = 0; d < 3; ++d) s.set(t, d, rng.uniform(0.01, 1.0));
        }
        const auto count = [&](FeatureStrategy strat) {
            const auto out = assemble_features(s, strat);
            return out.time_len * out.channels;
        };
        const int got_ndvi = count(FeatureStrategy::ndvi_only);
        const int got_sb = count(FeatureStrategy::spectral_bands);
        const int got_all = count(FeatureStrategy::bands_and_indices);
        ok = ok && got_ndvi == ndvi_n && got_sb == sb_n && got_all == all_n;
        detail << "T=" << cal->length() << ": " << got_ndvi << "/" << got_sb << "/" << got_all
               << "  ";
    }
    report(4, ok, detail.str() + "(expected 46/138/276 and 149/447/894)");
    CHECK(ok);
}

TEST_CASE("criterion 05: convergence smoke test on a noiseless separable set") {
    Timer timer;
    // 200 samples, 4 classes with well-separated profiles, no noise/clouds.
    SceneSpec spec = shift_benchmark_scene(60.0, 0.0, 10, 5);
    spec.cloud_probability = 0.0;
    spec.polygon_baseline_sd = 0.0;
    spec.polygon_amplitude_jitter = 0.0;
    spec.polygon_time_jitter_days = 0.0;
    spec.smooth_nuisance_sd = 0.0;
    const Dataset raw = generate_scene(spec, 5);
    REQUIRE(raw.size() == 200);

    SplitAssignment all;
    all.train_polygons = raw.polygon_ids();
    const PreparedData data =
        prepare_fold(raw, all, {FeatureStrategy::spectral_bands, Sampling::two_day});

    TrainConfig config;
    config.max_epochs = 50;
    config.patience = -1;
    config.val_fraction = 0.0;
    config.seed = 55;
    TrainResult trained =
        train(build_tempcnn(data.train.time_len(), data.train.channels(), raw.num_classes()),
              data.train, {}, config);
    const std::vector<int> pred = predict(trained.network, data.train);
    const std::vector<int> ref = to_labels(data.train);
    int correct = 0;
    for (std::size_t i = 0; i < pred.size(); ++i) correct += pred[i] == ref[i];
    const double nn_acc = static_cast<double>(correct) / pred.size();

    const ForestModel forest = fit_forest(data.train, 500, 55);
    const std::vector<int> rf_pred = predict_forest(forest, data.train);
    int rf_correct = 0;
    for (std::size_t i = 0; i < rf_pred.size(); ++i) rf_correct += rf_pred[i] == ref[i];
    const double rf_acc = static_cast<double>(rf_correct) / rf_pred.size();

    const double secs = timer.seconds();
    const bool ok = nn_acc >= 0.99 && rf_acc == 1.0 && secs < 120.0;
    report(5, ok, "network train accuracy " + fmt(nn_acc) + ", forest " + fmt(rf_acc) + ", " +
                      fmt(secs) + " s");
    CHECK(nn_acc >= 0.99);
    CHECK(rf_acc == 1.0);
    CHECK(secs < 120.0);
}

TEST_CASE("criterion 06: guidance ordering on the shift benchmark") {
    Timer timer;
    const BenchmarkResults& bench = benchmark_results();
    const double t_pair = pair_mean(bench.tempcnn);
    const double rf_pair = pair_mean(bench.rf);
    const double fc_pair = pair_mean(bench.fc);
    const double secs = timer.seconds();
    const bool ok = t_pair - rf_pair >= 0.05 && t_pair - fc_pair >= 0.05 && secs < 900.0;
    report(6, ok, "shift-pair accuracy: network " + fmt(t_pair) + ", fc " + fmt(fc_pair) + ", rf " +
                      fmt(rf_pair) + " (need +5 points on both), " + fmt(secs) + " s");
    CHECK(t_pair - rf_pair >= 0.05);
    CHECK(t_pair - fc_pair >= 0.05);
    CHECK(secs < 900.0);
}

TEST_CASE("criterion 07: global average pooling hurts on the shift benchmark") {
    const BenchmarkResults& bench = benchmark_results();
    const double no_pool = bench.tempcnn.oa.mean;
    const double gap = bench.gap.oa.mean;
    const bool ok = no_pool - gap >= 0.02;
    report(7, ok, "mean OA without pooling " + fmt(no_pool) + " vs global-average-pool " + fmt(gap) +
                      " (need a drop of >= 2 points)");
    CHECK(no_pool - gap >= 0.02);
}

TEST_CASE("criterion 08: time-shuffle contrast") {
    const BenchmarkResults& bench = benchmark_results();

    std::vector<double> rf_original, rf_shuffled;
    for (const auto& row : bench.rf_seeds) rf_original.push_back(row.oa.mean);
    for (const auto& row : bench.rf_seeds_shuffled) rf_shuffled.push_back(row.oa.mean);
    const Aggregate orig = aggregate_folds(rf_original);
    const Aggregate shuf = aggregate_folds(rf_shuffled);
    const double rf_change = std::abs(orig.mean - shuf.mean);

    const double t_drop = pair_mean(bench.tempcnn) - pair_mean(bench.tempcnn_shuffled);
    const bool ok = rf_change < orig.sd && t_drop >= 0.05;
    report(8, ok, "rf OA change " + fmt(rf_change) + " vs sd " + fmt(orig.sd) +
                      "; network shift-pair drop " + fmt(t_drop) + " (need >= 5 points)");
    CHECK(rf_change < orig.sd);
    CHECK(t_drop >= 0.05);
}

TEST_CASE("criterion 09: batch size stability and epoch throughput") {
    const Dataset raw = generate_scene(default_scene(), 909);
    TrainConfig base;
    base.seed = 909;
    const StudyReport study = run_study(raw, StudyKind::batch, base, 5, 909);
    REQUIRE(study.rows.size() == 5);

    double lo = 1.0, hi = 0.0;
    for (const auto& row : study.rows) {
        lo = std::min(lo, row.oa.mean);
        hi = std::max(hi, row.oa.mean);
    }

    auto epoch_seconds = [&](const std::string& name) {
        for (const auto& row : study.rows) {
            if (row.name == name) {
                double acc = 0.0;
                for (const auto& f : row.folds) acc += f.mean_epoch_seconds;
                return acc / static_cast<double>(row.folds.size());
            }
        }
        return -1.0;
    };
    const double t8 = epoch_seconds("batch=8");
    const double t128 = epoch_seconds("batch=128");

    const bool ok = hi - lo <= 0.02 && t128 < 0.25 * t8;
    report(9, ok, "OA spread " + fmt(hi - lo) + " (need <= 0.02); epoch seconds batch=8 " + fmt(t8) +
                      " vs batch=128 " + fmt(t128) + " (need < 1/4)");
    CHECK(hi - lo <= 0.02);
    CHECK(t128 < 0.25 * t8);
}

TEST_CASE("criterion 10: regularization ablation direction") {
    const Dataset raw = generate_scene(default_scene(), 1010);
    TrainConfig base;
    base.seed = 1010;
    const StudyReport study = run_study(raw, StudyKind::regularization, base, 5, 1010);
    REQUIRE(study.rows.size() == 10);

    double nothing = -1.0, all = -1.0;
    for (const auto& row : study.rows) {
        if (row.name == "nothing") nothing = row.oa.mean;
        if (row.name == "all") all = row.oa.mean;
    }
    const bool ok = nothing >= 0.0 && all >= nothing;
    report(10, ok, "10 rows completed; OA all-mechanisms " + fmt(all) + " vs none " + fmt(nothing));
    CHECK(all >= nothing);
}

TEST_CASE("criterion 11: parameter accounting and the width-sweep range") {
    bool alloc_ok = true;
    std::vector<NetworkSpec> specs;
    specs.push_back(build_tempcnn(149, 3, 13));
    specs.push_back(build_fc_baseline(46, 3, 13));
    for (const auto kind : {GuidanceKind::none, GuidanceKind::temporal, GuidanceKind::spectral,
                            GuidanceKind::spectro_temporal}) {
        specs.push_back(build_guidance(kind, 149, 3, 13));
    }
    for (const auto v : {PoolVariant::mp, PoolVariant::ap, PoolVariant::mp_gap, PoolVariant::ap_gap,
                         PoolVariant::gap}) {
        specs.push_back(build_pooling_variant(v, 8, 149, 3, 13));
    }
    for (const auto& grid : {make_width_sweep(149, 3, 13), make_depth_sweep(149, 3, 13)}) {
        for (const auto& [name, spec] : grid.entries) specs.push_back(spec);
    }
    for (const auto& spec : specs) {
        Network net(spec);
        alloc_ok = alloc_ok && net.allocated_param_count() == param_count(spec);
    }

    const SweepGrid width = make_width_sweep(149, 3, 13);
    const long long smallest = param_count(width.entries.front().second);
    const long long largest = param_count(width.entries.back().second);
    const bool range_ok =
        smallest >= 160'000 && smallest <= 640'000 && largest >= 25'000'000 && largest <= 100'000'000;

    const bool ok = alloc_ok && range_ok;
    report(11, ok, "allocated == closed form for " + std::to_string(specs.size()) +
                       " builder outputs; width extremes " + std::to_string(smallest) + " .. " +
                       std::to_string(largest));
    CHECK(alloc_ok);
    CHECK(range_ok);
}

TEST_CASE("criterion 12: training through the CLI is bit-identical under one seed") {
    const char* cli = std::getenv("SITS_CLI");
    REQUIRE_MESSAGE(cli != nullptr, "SITS_CLI must point at the sits binary");

    const fs::path dir = work_dir();
    const fs::path dataset = dir / "det_scene.csv";
    const fs::path model_a = dir / "det_a.bin";
    const fs::path model_b = dir / "det_b.bin";

    SceneSpec spec = default_scene();
    spec.min_pixels_per_polygon = 2;
    spec.max_pixels_per_polygon = 5;
    write_dataset(generate_scene(spec, 12), dataset.string());

    auto run_train = [&](const fs::path& out) {
        const std::string cmd = std::string(cli) + " train --dataset " + dataset.string() +
                                " --arch tempcnn:width=8,dense=16 --epochs 3 --seed 99 --out " +
                                out.string() + " > /dev/null 2>&1";
        return std::system(cmd.c_str());
    };
    const bool ran = run_train(model_a) == 0 && run_train(model_b) == 0;

    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };
    const std::string bytes_a = slurp(model_a);
    const bool ok = ran && !bytes_a.empty() && bytes_a == slurp(model_b);
    report(12, ok, ok ? "two runs produced identical " + std::to_string(bytes_a.size()) +
                            "-byte model files"
                      : "model files differ or training failed");
    CHECK(ok);
}

TEST_CASE("criterion 13: fitted percentiles map to 0 and 1") {
    const Dataset raw = generate_scene(default_scene(), 13);
    SplitAssignment all;
    all.train_polygons = raw.polygon_ids();
    const PreparedData data =
        prepare_fold(raw, all, {FeatureStrategy::bands_and_indices, Sampling::two_day});

    // Recompute the empirical percentiles of the raw (pre-normalization)
    // training features and push them through the fitted transform.
    const Dataset features = assemble_features_dataset(
        gapfill_dataset(raw, data.target_calendar), FeatureStrategy::bands_and_indices);
    double worst = 0.0;
    for (int d = 0; d < features.channels(); ++d) {
        std::vector<double> pool;
        for (const auto& s : features.samples) {
            for (int t = 0; t < s.series.time_len; ++t) pool.push_back(s.series.at(t, d));
        }
        const double p2 = percentile(pool, 2.0);
        const double p98 = percentile(pool, 98.0);
        const double range = data.normalization.high[d] - data.normalization.low[d];
        REQUIRE(range > 0.0);
        worst = std::max(worst, std::abs((p2 - data.normalization.low[d]) / range - 0.0));
        worst = std::max(worst, std::abs((p98 - data.normalization.low[d]) / range - 1.0));
    }
    const bool ok = worst < 1e-9;
    report(13, ok, "max deviation of mapped percentiles " + std::to_string(worst));
    CHECK(worst < 1e-9);
}

TEST_CASE("criterion 14: round-trips for datasets, models and rendered maps") {
    const fs::path dir = work_dir();

    // dataset CSV round-trip
    SceneSpec scene = default_scene();
    scene.min_pixels_per_polygon = 2;
    scene.max_pixels_per_polygon = 4;
    const Dataset ds = generate_scene(scene, 14);
    const fs::path csv = dir / "roundtrip.csv";
    write_dataset(ds, csv.string());
    const Dataset back = read_dataset(csv.string());
    bool dataset_ok = back.size() == ds.size() && back.legend == ds.legend;
    for (int i = 0; dataset_ok && i < ds.size(); ++i) {
        dataset_ok = back.samples[i].series.valid == ds.samples[i].series.valid &&
                     back.samples[i].polygon_id == ds.samples[i].polygon_id;
        for (int t = 0; dataset_ok && t < ds.time_len(); ++t) {
            for (int d = 0; d < ds.channels(); ++d) {
                if (ds.samples[i].series.is_valid(t, d) &&
                    back.samples[i].series.at(t, d) != ds.samples[i].series.at(t, d)) {
                    dataset_ok = false;
                    break;
                }
            }
        }
    }
    const fs::path csv2 = dir / "roundtrip2.csv";
    write_dataset(back, csv2.string());
    auto slurp = [](const fs::path& p) {
        std::ifstream in(p, std::ios::binary);
        std::ostringstream out;
        out << in.rdbuf();
        return out.str();
    };
    dataset_ok = dataset_ok && slurp(csv) == slurp(csv2);

    // model serialization round-trip (bit-exact parameters)
    TrainConfig config;
    config.max_epochs = 2;
    config.patience = -1;
    config.val_fraction = 0.0;
    config.seed = 21;
    SplitAssignment all;
    all.train_polygons = ds.polygon_ids();
    const PreparedData data =
        prepare_fold(ds, all, {FeatureStrategy::spectral_bands, Sampling::two_day});
    TrainResult trained =
        train(build_tempcnn(data.train.time_len(), 3, ds.num_classes(), 4, 1, 3, 4), data.train,
              {}, config);
    TrainedModel model{std::move(trained.network)};
    model.legend = ds.legend;
    model.target_calendar = *data.target_calendar;
    model.normalization = data.normalization;
    const fs::path model_path = dir / "roundtrip_model.bin";
    save_model(model, model_path.string());
    TrainedModel loaded = load_model(model_path.string());
    bool model_ok = loaded.network.spec() == model.network.spec();
    for (std::size_t b = 0; model_ok && b < model.network.blocks().size(); ++b) {
        model_ok = *loaded.network.blocks()[b].values == *model.network.blocks()[b].values;
    }

    // rendered maps: dimensions and exact disagreement count
    const int rows = 9, cols = 13;
    std::vector<int> a(rows * cols, 0), b(rows * cols, 0);
    Rng rng(14);
    int expected_red = 0;
    for (std::size_t i = 0; i < b.size(); ++i) {
        a[i] = static_cast<int>(rng.below(ds.num_classes()));
        b[i] = a[i];
        if (rng.bernoulli(0.2)) {
            b[i] = (a[i] + 1) % ds.num_classes();
            ++expected_red;
        }
    }
    const fs::path map_path = dir / "map.ppm";
    const fs::path dis_path = dir / "disagreement.ppm";
    render_map(a, rows, cols, ds.legend, map_path.string());
    disagreement_map(a, b, rows, cols, ds.legend, dis_path.string());
    const PpmImage map_img = read_ppm(map_path.string());
    const PpmImage dis_img = read_ppm(dis_path.string());
    int red = 0;
    for (const auto& px : dis_img.pixels) {
        red += px == std::array<std::uint8_t, 3>{255, 0, 0};
    }
    const bool map_ok = map_img.rows == rows && map_img.cols == cols && dis_img.rows == rows &&
                        dis_img.cols == cols && red == expected_red;

    const bool ok = dataset_ok && model_ok && map_ok;
    report(14, ok, std::string("dataset ") + (dataset_ok ? "ok" : "FAILED") + ", model " +
                       (model_ok ? "ok" : "FAILED") + ", maps " + (map_ok ? "ok" : "FAILED") +
                       " (" + std::to_string(red) + "/" + std::to_string(expected_red) +
                       " red pixels)");
    CHECK(dataset_ok);
    CHECK(model_ok);
    CHECK(map_ok);
}
