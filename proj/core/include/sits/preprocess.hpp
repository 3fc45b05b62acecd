#pragma once

#include "sits/series.hpp"

#include <span>
#include <string>
#include <vector>

namespace sits {

/// Which feature vector a pipeline feeds the classifiers, for 3 input bands
/// (G, R, NIR): the vegetation index alone, the raw spectral bands, or the
/// bands plus NDVI, NDWI and the brilliance index.
enum class FeatureStrategy { ndvi_only, spectral_bands, bands_and_indices };

std::string to_string(FeatureStrategy s);
FeatureStrategy parse_feature_strategy(const std::string& s);

/// Output channel count per strategy for a 3-band input.
int feature_channels(FeatureStrategy s);

/// Imputes invalid observations and resamples onto `target` by temporal
/// linear interpolation per channel. Points outside the valid observation
/// range clamp to the nearest valid value. The output is fully valid.
/// Throws DataError naming the channel when a channel has no valid point.
MultivariateSeries linear_gapfill(const MultivariateSeries& series, const CalendarPtr& target);

/// Gap-fills every sample of a dataset onto a shared target calendar.
Dataset gapfill_dataset(const Dataset& dataset, const CalendarPtr& target);

/// (nir - red) / (nir + red); returns 0 when the denominator is near zero
/// (the occurrence is counted when a counter is supplied).
double ndvi(double nir, double red, long long* zero_denominator = nullptr);

/// (green - nir) / (green + nir), with the same degenerate-denominator rule.
double ndwi(double green, double nir, long long* zero_denominator = nullptr);

/// Euclidean norm of the available bands.
double brilliance(std::span<const double> bands);

/// Builds the per-strategy feature series from a gap-filled series whose 3
/// channels are, in order, G, R, NIR. Throws DataError on any other channel
/// count.
MultivariateSeries assemble_features(const MultivariateSeries& series, FeatureStrategy strategy,
                                     long long* zero_denominator = nullptr);

/// Dataset-level feature assembly; renames feature_names accordingly.
Dataset assemble_features_dataset(const Dataset& dataset, FeatureStrategy strategy,
                                  long long* zero_denominator = nullptr);

/// Per-channel affine normalization fitted as the 2nd/98th percentiles of the
/// training data, pooled over all samples and time stamps of a channel.
struct NormalizationParams {
    std::vector<double> low;   // 2nd percentile per channel
    std::vector<double> high;  // 98th percentile per channel

    int channels() const { return static_cast<int>(low.size()); }
};

NormalizationParams fit_normalization(const Dataset& train, double low_percentile = 2.0,
                                      double high_percentile = 98.0);

/// x -> (x - low) / (high - low), not clipped; degenerate channels
/// (high - low below epsilon) map to 0. Invalid entries pass through
/// untouched. Throws DataError on channel mismatch.
MultivariateSeries apply_normalization(const MultivariateSeries& series,
                                       const NormalizationParams& params);
Dataset apply_normalization(const Dataset& dataset, const NormalizationParams& params);

/// Percentile with linear interpolation between order statistics.
/// `values` need not be sorted; p in [0, 100].
double percentile(std::vector<double> values, double p);

/// Text table `feature_index,low,high`, one row per channel.
void save_normalization(const NormalizationParams& params, const std::string& path);
NormalizationParams load_normalization(const std::string& path);

} // namespace sits
