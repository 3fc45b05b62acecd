#include "sits/studies.hpp"

#include "sits/errors.hpp"
#include "sits/forest.hpp"
#include "sits/rng.hpp"

#include <chrono>
#include <fstream>
#include <memory>
#include <numeric>

namespace sits {

std::string to_string(Sampling s) {
    return s == Sampling::original ? "original" : "2day";
}

Sampling parse_sampling(const std::string& s) {
    if (s == "original") return Sampling::original;
    if (s == "2day") return Sampling::two_day;
    throw DataError("unknown sampling '" + s + "' (expected original or 2day)");
}

PreparedData prepare_fold(const Dataset& raw, const SplitAssignment& split,
                          const PipelineConfig& pipeline) {
    if (raw.samples.empty()) throw DataError("cannot prepare an empty dataset");

    PreparedData out;
    out.target_calendar = std::make_shared<AcquisitionCalendar>(
        pipeline.sampling == Sampling::two_day ? AcquisitionCalendar::resample(raw.calendar(), 2)
                                               : raw.calendar());

    auto prepare = [&](const std::set<std::string>& polygons) {
        Dataset subset = raw.subset(polygons);
        if (subset.samples.empty()) return subset;
        return assemble_features_dataset(gapfill_dataset(subset, out.target_calendar),
                                         pipeline.strategy);
    };
    out.train = prepare(split.train_polygons);
    out.validation = prepare(split.validation_polygons);
    out.test = prepare(split.test_polygons);

    out.normalization = fit_normalization(out.train);
    out.train = apply_normalization(out.train, out.normalization);
    if (!out.validation.samples.empty()) {
        out.validation = apply_normalization(out.validation, out.normalization);
    }
    if (!out.test.samples.empty()) {
        out.test = apply_normalization(out.test, out.normalization);
    }
    return out;
}

void permute_time(Dataset& dataset, std::span<const int> permutation) {
    const int T = dataset.time_len();
    if (permutation.size() != static_cast<std::size_t>(T)) {
        throw std::invalid_argument("permutation does not match the time length");
    }
    for (auto& sample : dataset.samples) {
        MultivariateSeries& s = sample.series;
        const std::vector<double> values = s.values;
        const std::vector<std::uint8_t> valid = s.valid;
        for (int t = 0; t < T; ++t) {
            const int src = permutation[t];
            for (int d = 0; d < s.channels; ++d) {
                s.values[static_cast<std::size_t>(t) * s.channels + d] =
                    values[static_cast<std::size_t>(src) * s.channels + d];
                s.valid[static_cast<std::size_t>(t) * s.channels + d] =
                    valid[static_cast<std::size_t>(src) * s.channels + d];
            }
        }
    }
}

std::vector<int> random_time_permutation(int time_len, std::uint64_t seed) {
    std::vector<int> perm(time_len);
    std::iota(perm.begin(), perm.end(), 0);
    Rng rng(derive_seed(seed, "time-permutation"));
    rng.shuffle(perm);
    return perm;
}

RowOutcome run_row(const Dataset& raw, const std::vector<SplitAssignment>& folds,
                   const ExperimentRow& row) {
    RowOutcome outcome;
    outcome.name = row.name;

    for (const SplitAssignment& base_split : folds) {
        SplitAssignment split = base_split;
        const bool is_network = static_cast<bool>(row.build);
        if (is_network && row.train.patience >= 0 && row.train.val_fraction > 0.0) {
            split = carve_validation(base_split, raw, row.train.val_fraction, row.train.seed);
        }

        PreparedData data = prepare_fold(raw, split, row.pipeline);
        if (row.time_permutation_grid) {
            permute_time(data.train, *row.time_permutation_grid);
            if (!data.validation.samples.empty()) {
                permute_time(data.validation, *row.time_permutation_grid);
            }
            permute_time(data.test, *row.time_permutation_grid);
        }

        FoldResult result;
        result.fold_id = split.fold_id;
        const std::vector<int> reference = to_labels(data.test);
        std::vector<int> predicted;

        const auto t0 = std::chrono::steady_clock::now();
        if (is_network) {
            const NetworkSpec spec =
                row.build(data.train.time_len(), data.train.channels(), raw.num_classes());
            TrainConfig config = row.train;
            config.seed = derive_seed(row.train.seed, "fold", static_cast<std::uint64_t>(split.fold_id));
            TrainResult trained = train(spec, data.train, data.validation, config);
            result.train_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            result.epochs = static_cast<int>(trained.history.epochs());
            if (result.epochs > 0) {
                result.mean_epoch_seconds =
                    std::accumulate(trained.history.seconds.begin(), trained.history.seconds.end(),
                                    0.0) /
                    result.epochs;
            }
            predicted = predict(trained.network, data.test);
        } else {
            const ForestModel model =
                fit_forest(data.train, row.rf_trees,
                           derive_seed(row.train.seed, "fold", static_cast<std::uint64_t>(split.fold_id)));
            result.train_seconds =
                std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
            predicted = predict_forest(model, data.test);
        }

        result.cm = confusion(reference, predicted, raw.num_classes());
        result.overall_accuracy = overall_accuracy(result.cm);
        outcome.folds.push_back(std::move(result));
    }

    outcome.oa = aggregate_oa(outcome.folds);
    return outcome;
}

std::string to_string(StudyKind k) {
    switch (k) {
        case StudyKind::guidance: return "guidance";
        case StudyKind::reach: return "reach";
        case StudyKind::pooling: return "pooling";
        case StudyKind::width: return "width";
        case StudyKind::depth: return "depth";
        case StudyKind::regularization: return "regularization";
        case StudyKind::batch: return "batch";
    }
    throw std::invalid_argument("unreachable study kind");
}

StudyKind parse_study(const std::string& s) {
    if (s == "guidance") return StudyKind::guidance;
    if (s == "reach") return StudyKind::reach;
    if (s == "pooling") return StudyKind::pooling;
    if (s == "width") return StudyKind::width;
    if (s == "depth") return StudyKind::depth;
    if (s == "regularization") return StudyKind::regularization;
    if (s == "batch") return StudyKind::batch;
    throw DataError("unknown study '" + s + "'");
}

namespace {

ExperimentRow nn_row(std::string name, PipelineConfig pipeline, const TrainConfig& base,
                     std::function<NetworkSpec(int, int, int)> build) {
    ExperimentRow row;
    row.name = std::move(name);
    row.pipeline = pipeline;
    row.train = base;
    row.build = std::move(build);
    return row;
}

ExperimentRow rf_row(std::string name, PipelineConfig pipeline, const TrainConfig& base) {
    ExperimentRow row;
    row.name = std::move(name);
    row.pipeline = pipeline;
    row.train = base;
    return row;
}

std::vector<ExperimentRow> guidance_rows(const TrainConfig& base) {
    std::vector<ExperimentRow> rows;
    for (const FeatureStrategy strategy :
         {FeatureStrategy::ndvi_only, FeatureStrategy::spectral_bands,
          FeatureStrategy::bands_and_indices}) {
        const std::string suffix = ":" + to_string(strategy);
        // RF and FC need no regular sampling, so they run on the original
        // calendar where the feature space is smaller.
        const PipelineConfig original{strategy, Sampling::original};
        const PipelineConfig two_day{strategy, Sampling::two_day};
        rows.push_back(rf_row("rf" + suffix, original, base));
        rows.push_back(nn_row("fc" + suffix, original, base, [base](int t, int d, int c) {
            return build_fc_baseline(t, d, c, 1024, {base.dropout_rate, true});
        }));
        for (const GuidanceKind kind :
             {GuidanceKind::temporal, GuidanceKind::spectral, GuidanceKind::spectro_temporal}) {
            rows.push_back(nn_row("guidance:" + to_string(kind) + suffix, two_day,
                                  base, [kind, base](int t, int d, int c) {
                                      return build_guidance(kind, t, d, c, 5,
                                                            {base.dropout_rate, true});
                                  }));
        }
    }
    return rows;
}

std::vector<ExperimentRow> reach_rows(const TrainConfig& base) {
    std::vector<ExperimentRow> rows;
    for (const int reach : {2, 4, 8, 16, 32}) {
        rows.push_back(nn_row("reach=" + std::to_string(reach),
                              {FeatureStrategy::spectral_bands, Sampling::two_day}, base,
                              [reach, base](int t, int d, int c) {
                                  return build_tempcnn(t, d, c, 64, 3, filter_for_reach(reach, 2),
                                                       256, {base.dropout_rate, true});
                              }));
    }
    return rows;
}

std::vector<ExperimentRow> pooling_rows(const TrainConfig& base) {
    std::vector<ExperimentRow> rows;
    for (const PoolVariant variant : {PoolVariant::mp, PoolVariant::ap, PoolVariant::mp_gap,
                                      PoolVariant::ap_gap, PoolVariant::gap}) {
        for (const int reach : {2, 4, 8, 16, 32}) {
            rows.push_back(nn_row(to_string(variant) + ":reach=" + std::to_string(reach),
                                  {FeatureStrategy::spectral_bands, Sampling::two_day}, base,
                                  [variant, reach, base](int t, int d, int c) {
                                      return build_pooling_variant(variant, reach, t, d, c, 2,
                                                                   {base.dropout_rate, true});
                                  }));
        }
    }
    return rows;
}

std::vector<ExperimentRow> width_rows(const TrainConfig& base) {
    std::vector<ExperimentRow> rows;
    for (const int width : {16, 32, 64, 128, 256, 512, 1024}) {
        rows.push_back(nn_row("width=" + std::to_string(width),
                              {FeatureStrategy::spectral_bands, Sampling::two_day}, base,
                              [width, base](int t, int d, int c) {
                                  return build_tempcnn(t, d, c, width, 3, 5, 256,
                                                       {base.dropout_rate, true});
                              }));
    }
    return rows;
}

std::vector<ExperimentRow> depth_rows(const TrainConfig& base) {
    std::vector<ExperimentRow> rows;
    for (int depth = 1; depth <= 6; ++depth) {
        rows.push_back(nn_row("depth=" + std::to_string(depth),
                              {FeatureStrategy::spectral_bands, Sampling::two_day}, base,
                              [depth, base](int t, int d, int c) {
                                  SweepGrid grid = make_depth_sweep(t, d, c);
                                  NetworkSpec spec = grid.entries[depth - 1].second;
                                  (void)base;
                                  return spec;
                              }));
    }
    return rows;
}

std::vector<ExperimentRow> regularization_rows(const TrainConfig& base) {
    struct Toggle {
        std::string name;
        bool dropout, batch_norm, validation, weight_decay;
    };
    const std::vector<Toggle> toggles = {
        {"nothing", false, false, false, false},
        {"only-dropout", true, false, false, false},
        {"only-batchnorm", false, true, false, false},
        {"only-validation", false, false, true, false},
        {"only-weight-decay", false, false, false, true},
        {"all-except-dropout", false, true, true, true},
        {"all-except-batchnorm", true, false, true, true},
        {"all-except-validation", true, true, false, true},
        {"all-except-weight-decay", true, true, true, false},
        {"all", true, true, true, true},
    };
    std::vector<ExperimentRow> rows;
    for (const Toggle& t : toggles) {
        TrainConfig config = base;
        config.weight_decay = t.weight_decay ? base.weight_decay : 0.0;
        if (!t.validation) {
            config.patience = -1;
            config.val_fraction = 0.0;
        }
        const ArchOptions options{t.dropout ? base.dropout_rate : 0.0, t.batch_norm};
        rows.push_back(nn_row(t.name, {FeatureStrategy::spectral_bands, Sampling::two_day}, config,
                              [options](int time_len, int d, int c) {
                                  return build_tempcnn(time_len, d, c, 64, 3, 5, 256, options);
                              }));
    }
    return rows;
}

std::vector<ExperimentRow> batch_rows(const TrainConfig& base) {
    std::vector<ExperimentRow> rows;
    for (const int batch : {8, 16, 32, 64, 128}) {
        TrainConfig config = base;
        config.batch_size = batch;
        rows.push_back(nn_row("batch=" + std::to_string(batch),
                              {FeatureStrategy::spectral_bands, Sampling::two_day}, config,
                              [config](int t, int d, int c) {
                                  return build_tempcnn(t, d, c, 64, 3, 5, 256,
                                                       {config.dropout_rate, true});
                              }));
    }
    return rows;
}

} // namespace

std::vector<ExperimentRow> make_study(StudyKind kind, const TrainConfig& base) {
    switch (kind) {
        case StudyKind::guidance: return guidance_rows(base);
        case StudyKind::reach: return reach_rows(base);
        case StudyKind::pooling: return pooling_rows(base);
        case StudyKind::width: return width_rows(base);
        case StudyKind::depth: return depth_rows(base);
        case StudyKind::regularization: return regularization_rows(base);
        case StudyKind::batch: return batch_rows(base);
    }
    throw std::invalid_argument("unreachable study kind");
}

StudyReport run_study(const Dataset& raw, StudyKind kind, const TrainConfig& base, int n_folds,
                      std::uint64_t seed) {
    StudyReport report;
    report.kind = kind;
    const auto folds = polygon_split(raw, 0.6, n_folds, derive_seed(seed, "split"));
    std::vector<ExperimentRow> rows = make_study(kind, base);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        rows[i].train.seed = derive_seed(seed, rows[i].name);
        report.rows.push_back(run_row(raw, folds, rows[i]));
    }
    return report;
}

void save_study_csv(const StudyReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write study report: " + path);
    out << "config,mean_oa,sd_oa,mean_seconds,mean_epoch_seconds\n";
    for (const auto& row : report.rows) {
        double mean_seconds = 0.0, mean_epoch = 0.0;
        for (const auto& f : row.folds) {
            mean_seconds += f.train_seconds;
            mean_epoch += f.mean_epoch_seconds;
        }
        mean_seconds /= static_cast<double>(row.folds.size());
        mean_epoch /= static_cast<double>(row.folds.size());
        out << row.name << ',' << row.oa.mean << ',' << row.oa.sd << ',' << mean_seconds << ','
            << mean_epoch << '\n';
    }
    if (!out) throw DataError("failed writing study report: " + path);
}

void save_study_folds_csv(const StudyReport& report, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write fold report: " + path);
    out << "config,fold,oa,seconds\n";
    for (const auto& row : report.rows) {
        for (const auto& f : row.folds) {
            out << row.name << ',' << f.fold_id << ',' << f.overall_accuracy << ','
                << f.train_seconds << '\n';
        }
    }
    if (!out) throw DataError("failed writing fold report: " + path);
}

} // namespace sits
