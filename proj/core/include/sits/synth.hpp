#pragma once

#include "sits/calendar.hpp"
#include "sits/series.hpp"

#include <array>
#include <cstdint>
#include <string>
#include <vector>

namespace sits {

/// Double-logistic seasonal reflectance profile: a green-up sigmoid minus a
/// senescence sigmoid riding on a baseline.
struct PhenologyProfile {
    double baseline = 0.0;
    double amplitude = 0.0;
    double green_up_day = 0.0;
    double senescence_day = 0.0;
    double green_up_rate = 0.0;   // 1/days
    double senescence_rate = 0.0; // 1/days
};

/// baseline + amplitude * (sigmoid(g*(t - t_up)) - sigmoid(s*(t - t_sen))).
double double_logistic(double day, const PhenologyProfile& p);

struct SceneClass {
    std::string name;
    std::array<std::uint8_t, 3> color{};
    std::vector<PhenologyProfile> band_profiles;  // one per band
    int polygons = 0;
};

/// Generator configuration. Per-polygon nuisance factors (baseline offset,
/// amplitude scale, time shift) decorrelate polygons of one class so that
/// polygon-disjoint evaluation is meaningful; cloud gaps invalidate whole
/// polygon-dates across all bands.
struct SceneSpec {
    std::vector<SceneClass> classes;
    std::vector<std::string> band_names{"G", "R", "NIR"};
    int min_pixels_per_polygon = 10;
    int max_pixels_per_polygon = 30;
    double noise_sd = 0.02;
    double cloud_probability = 0.0;
    double polygon_baseline_sd = 0.0;
    double polygon_amplitude_jitter = 0.0;   // relative, e.g. 0.25 for +-25%
    double polygon_time_jitter_days = 0.0;   // uniform +- days
    double date_gain_jitter = 0.0;           // per (polygon, date) multiplicative, +- relative
    // Smooth seasonal confounder: a few low-frequency harmonics drawn per
    // (polygon, band) and added to the profile. Corrupts absolute levels
    // while leaving steep transitions intact.
    double smooth_nuisance_sd = 0.0;
    int smooth_nuisance_harmonics = 3;
    double smooth_nuisance_period_days = 300.0;
    AcquisitionCalendar calendar;

    void check() const;
};

/// Deterministic under `seed`; every polygon draws its own derived stream.
Dataset generate_scene(const SceneSpec& spec, std::uint64_t seed);

/// The 46 irregular acquisition days used by default scenes: one year,
/// summer-weighted, spanning 296 days so the 2-day resampling yields 149 grid
/// points.
AcquisitionCalendar default_calendar();

/// Desk-scale 13-class scene whose polygon counts follow the reference
/// class-imbalance structure at roughly 1/20 scale.
SceneSpec default_scene();

/// Four-class benchmark where temporal order carries the signal: two classes
/// share one profile separated only by a time shift of `shift_days`, plus an
/// amplitude-coded pair with identical timing. Classes 0 and 1 are the
/// shift pair.
SceneSpec shift_benchmark_scene(double shift_days, double noise_sd = 0.02,
                                int polygons_per_class = 60, int pixels_per_polygon = 21);
Dataset make_shift_benchmark(double shift_days, std::uint64_t seed, double noise_sd = 0.02,
                             int polygons_per_class = 60, int pixels_per_polygon = 21);

/// Rectangular raster variant for map rendering: `rows` x `cols` pixels carved
/// into rectangular polygon patches, emitted in row-major pixel order.
Dataset generate_grid_scene(const SceneSpec& spec, int rows, int cols, int patch, std::uint64_t seed);

} // namespace sits
