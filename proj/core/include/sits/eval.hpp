#pragma once

#include "sits/series.hpp"

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace sits {

/// C x C counts, rows = reference, columns = prediction.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::int64_t> counts;  // row-major

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int c) : classes(c), counts(static_cast<std::size_t>(c) * c, 0) {}

    std::int64_t& at(int ref, int pred) { return counts[static_cast<std::size_t>(ref) * classes + pred]; }
    std::int64_t at(int ref, int pred) const {
        return counts[static_cast<std::size_t>(ref) * classes + pred];
    }
    std::int64_t total() const;
    std::int64_t trace() const;
};

ConfusionMatrix confusion(std::span<const int> reference, std::span<const int> predicted,
                          int classes);
double overall_accuracy(const ConfusionMatrix& cm);

/// Accuracy restricted to samples whose reference label is `class_a` or
/// `class_b` (predictions outside the pair count as errors).
double pair_accuracy(const ConfusionMatrix& cm, int class_a, int class_b);

void save_confusion_csv(const ConfusionMatrix& cm, const ClassLegend& legend,
                        const std::string& path);

/// Splits polygons into ~train_fraction/test by pixel count, per class, for
/// `n_folds` independently shuffled folds. A class with a single polygon goes
/// to train with a recorded warning. Polygons never straddle sets.
std::vector<SplitAssignment> polygon_split(const Dataset& dataset, double train_fraction = 0.6,
                                           int n_folds = 5, std::uint64_t seed = 0);

/// Moves whole polygons totaling ~`fraction` of the training pixels from
/// train to validation, never draining a class's last training polygon.
SplitAssignment carve_validation(const SplitAssignment& split, const Dataset& dataset,
                                 double fraction = 0.05, std::uint64_t seed = 0);

struct FoldResult {
    int fold_id = 0;
    ConfusionMatrix cm;
    double overall_accuracy = 0.0;
    double train_seconds = 0.0;
    double mean_epoch_seconds = 0.0;
    int epochs = 0;
};

struct Aggregate {
    double mean = 0.0;
    double sd = 0.0;  // population standard deviation
};

Aggregate aggregate_folds(std::span<const double> values);
Aggregate aggregate_oa(std::span<const FoldResult> results);

// ---------------------------------------------------------------------------
// Map rendering (binary PPM)
// ---------------------------------------------------------------------------

struct PpmImage {
    int rows = 0;
    int cols = 0;
    std::vector<std::array<std::uint8_t, 3>> pixels;  // row-major

    const std::array<std::uint8_t, 3>& at(int r, int c) const {
        return pixels[static_cast<std::size_t>(r) * cols + c];
    }
};

/// Renders row-major class labels in legend colors.
void render_map(std::span<const int> labels, int rows, int cols, const ClassLegend& legend,
                const std::string& path);

/// Pure red where a != b; agreements in a's class color at half brightness.
void disagreement_map(std::span<const int> labels_a, std::span<const int> labels_b, int rows,
                      int cols, const ClassLegend& legend, const std::string& path);

PpmImage read_ppm(const std::string& path);

} // namespace sits
