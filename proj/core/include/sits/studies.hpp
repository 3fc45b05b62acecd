#pragma once

#include "sits/architectures.hpp"
#include "sits/eval.hpp"
#include "sits/network.hpp"
#include "sits/preprocess.hpp"
#include "sits/series.hpp"

#include <functional>
#include <optional>
#include <string>
#include <vector>

namespace sits {

/// Temporal sampling of the preprocessing pipeline: gap-fill on the source
/// calendar, or resample onto the regular 2-day grid.
enum class Sampling { original, two_day };

std::string to_string(Sampling s);
Sampling parse_sampling(const std::string& s);

struct PipelineConfig {
    FeatureStrategy strategy = FeatureStrategy::spectral_bands;
    Sampling sampling = Sampling::two_day;
};

struct PreparedData {
    Dataset train, validation, test;
    NormalizationParams normalization;  // fitted on train only
    CalendarPtr target_calendar;
};

/// Gap-fills, assembles features and normalizes the three polygon sets of a
/// fold. Normalization percentiles come from the training subset alone.
PreparedData prepare_fold(const Dataset& raw, const SplitAssignment& split,
                          const PipelineConfig& pipeline);

/// Applies one fixed permutation of the time axis to every sample (train and
/// test alike), in place.
void permute_time(Dataset& dataset, std::span<const int> permutation);
std::vector<int> random_time_permutation(int time_len, std::uint64_t seed);

/// One experiment row: either a network (built per fold from the prepared
/// shapes) or the random-forest baseline.
struct ExperimentRow {
    std::string name;
    PipelineConfig pipeline;
    std::function<NetworkSpec(int time_len, int channels, int classes)> build;  // null => RF
    TrainConfig train;
    int rf_trees = 500;
    std::optional<std::vector<int>> time_permutation_grid;  // applied on the 2-day grid
};

struct RowOutcome {
    std::string name;
    std::vector<FoldResult> folds;
    Aggregate oa;
};

/// Runs one row over the given folds; fold f trains with a seed derived from
/// (row seed, fold id) so rows are independently reproducible.
RowOutcome run_row(const Dataset& raw, const std::vector<SplitAssignment>& folds,
                   const ExperimentRow& row);

enum class StudyKind { guidance, reach, pooling, width, depth, regularization, batch };

std::string to_string(StudyKind k);
StudyKind parse_study(const std::string& s);

/// The rows of each ablation study, mirroring the reference experiment grids:
/// guidance {RF, FC, temporal, spectral, spectro-temporal} x {ndvi, sb,
/// sb-sf}; reach {2,4,8,16,32} days; pooling {MP, AP, MP+GAP, AP+GAP, GAP} x
/// reach; width (7 members); depth (6); regularization (10 toggle rows);
/// batch sizes {8,16,32,64,128}.
std::vector<ExperimentRow> make_study(StudyKind kind, const TrainConfig& base);

struct StudyReport {
    StudyKind kind = StudyKind::guidance;
    std::vector<RowOutcome> rows;
};

StudyReport run_study(const Dataset& raw, StudyKind kind, const TrainConfig& base, int n_folds,
                      std::uint64_t seed);

/// Aggregate table: row name, mean OA, OA sd, mean seconds per fold, mean
/// epoch seconds.
void save_study_csv(const StudyReport& report, const std::string& path);
/// Per-fold detail: row name, fold, OA, seconds.
void save_study_folds_csv(const StudyReport& report, const std::string& path);

} // namespace sits
