#include "sits/synth.hpp"

#include "sits/errors.hpp"
#include "sits/rng.hpp"

#include <cmath>
#include <memory>

namespace sits {

double double_logistic(double day, const PhenologyProfile& p) {
    const double up = 1.0 / (1.0 + std::exp(-p.green_up_rate * (day - p.green_up_day)));
    const double down = 1.0 / (1.0 + std::exp(-p.senescence_rate * (day - p.senescence_day)));
    return p.baseline + p.amplitude * (up - down);
}

void SceneSpec::check() const {
    if (classes.size() < 2) throw DataError("scene needs at least 2 classes");
    if (band_names.empty()) throw DataError("scene needs at least one band");
    for (const auto& c : classes) {
        if (c.name.empty()) throw DataError("scene class without a name");
        if (c.band_profiles.size() != band_names.size()) {
            throw DataError("class '" + c.name + "' declares " +
                            std::to_string(c.band_profiles.size()) + " profiles for " +
                            std::to_string(band_names.size()) + " bands");
        }
        for (const auto& p : c.band_profiles) {
            if (p.amplitude < 0 || p.green_up_rate <= 0 || p.senescence_rate <= 0 ||
                p.green_up_day >= p.senescence_day) {
                throw DataError("class '" + c.name + "' has an invalid phenology profile");
            }
        }
        if (c.polygons < 0) throw DataError("class '" + c.name + "' has a negative polygon count");
    }
    if (min_pixels_per_polygon < 0 || max_pixels_per_polygon < min_pixels_per_polygon) {
        throw DataError("invalid pixels-per-polygon range");
    }
    if (cloud_probability < 0.0 || cloud_probability > 1.0) {
        throw DataError("cloud probability outside [0, 1]");
    }
    if (noise_sd < 0.0) throw DataError("negative noise level");
    if (date_gain_jitter < 0.0 || date_gain_jitter >= 1.0) {
        throw DataError("per-date gain jitter outside [0, 1)");
    }
    if (smooth_nuisance_sd < 0.0 || smooth_nuisance_harmonics < 1 ||
        smooth_nuisance_period_days <= 0.0) {
        throw DataError("invalid smooth-nuisance configuration");
    }
    if (calendar.length() < 2) throw DataError("scene calendar needs at least 2 dates");
}

namespace {

struct Harmonic {
    double amplitude = 0.0;
    double phase_days = 0.0;
};

struct PolygonDraw {
    std::vector<PhenologyProfile> profiles;   // class profiles with nuisance applied
    std::vector<std::uint8_t> cloudy;         // per calendar date
    std::vector<double> date_gain;            // per calendar date, multiplicative
    std::vector<std::vector<Harmonic>> wiggles;  // per band
    int pixels = 0;
};

double wiggle_value(const SceneSpec& spec, const std::vector<Harmonic>& harmonics, double day) {
    double acc = 0.0;
    for (std::size_t k = 0; k < harmonics.size(); ++k) {
        acc += harmonics[k].amplitude *
               std::sin(6.283185307179586 * static_cast<double>(k + 1) *
                        (day - harmonics[k].phase_days) / spec.smooth_nuisance_period_days);
    }
    return acc;
}

PolygonDraw draw_polygon(const SceneSpec& spec, const SceneClass& cls, Rng& rng) {
    PolygonDraw out;
    const double amp_scale =
        spec.polygon_amplitude_jitter > 0.0
            ? rng.uniform(1.0 - spec.polygon_amplitude_jitter, 1.0 + spec.polygon_amplitude_jitter)
            : 1.0;
    const double time_shift =
        spec.polygon_time_jitter_days > 0.0
            ? rng.uniform(-spec.polygon_time_jitter_days, spec.polygon_time_jitter_days)
            : 0.0;
    out.profiles.reserve(cls.band_profiles.size());
    for (const PhenologyProfile& base : cls.band_profiles) {
        PhenologyProfile p = base;
        if (spec.polygon_baseline_sd > 0.0) p.baseline += rng.normal(0.0, spec.polygon_baseline_sd);
        p.amplitude *= amp_scale;
        p.green_up_day += time_shift;
        p.senescence_day += time_shift;
        out.profiles.push_back(p);
    }

    out.wiggles.assign(cls.band_profiles.size(), {});
    if (spec.smooth_nuisance_sd > 0.0) {
        for (auto& band : out.wiggles) {
            for (int k = 1; k <= spec.smooth_nuisance_harmonics; ++k) {
                band.push_back({rng.normal(0.0, spec.smooth_nuisance_sd / k),
                                rng.uniform(0.0, spec.smooth_nuisance_period_days)});
            }
        }
    }

    out.date_gain.assign(spec.calendar.days.size(), 1.0);
    if (spec.date_gain_jitter > 0.0) {
        for (auto& g : out.date_gain) {
            g = rng.uniform(1.0 - spec.date_gain_jitter, 1.0 + spec.date_gain_jitter);
        }
    }
    out.cloudy.assign(spec.calendar.days.size(), 0);
    if (spec.cloud_probability > 0.0) {
        bool all_cloudy = true;
        for (auto& c : out.cloudy) {
            c = rng.bernoulli(spec.cloud_probability) ? 1 : 0;
            all_cloudy = all_cloudy && c;
        }
        if (all_cloudy) out.cloudy.front() = 0;  // keep gap-filling feasible
    }

    const int range = spec.max_pixels_per_polygon - spec.min_pixels_per_polygon;
    out.pixels = spec.min_pixels_per_polygon +
                 (range > 0 ? static_cast<int>(rng.below(static_cast<std::uint64_t>(range) + 1)) : 0);
    return out;
}

MultivariateSeries render_pixel(const SceneSpec& spec, const PolygonDraw& poly,
                                const CalendarPtr& calendar, Rng& rng) {
    const int bands = static_cast<int>(spec.band_names.size());
    MultivariateSeries series(calendar, bands);
    for (int t = 0; t < calendar->length(); ++t) {
        const double day = calendar->days[t];
        for (int d = 0; d < bands; ++d) {
            double value = double_logistic(day, poly.profiles[d]) * poly.date_gain[t];
            if (!poly.wiggles[d].empty()) value += wiggle_value(spec, poly.wiggles[d], day);
            if (spec.noise_sd > 0.0) value += rng.normal(0.0, spec.noise_sd);
            series.set(t, d, value, poly.cloudy[t] == 0);
        }
    }
    return series;
}

ClassLegend legend_of(const SceneSpec& spec) {
    ClassLegend legend;
    for (const auto& c : spec.classes) {
        legend.names.push_back(c.name);
        legend.colors.push_back(c.color);
    }
    legend.check();
    return legend;
}

} // namespace

Dataset generate_scene(const SceneSpec& spec, std::uint64_t seed) {
    spec.check();
    Dataset ds;
    ds.legend = legend_of(spec);
    ds.feature_names = spec.band_names;

    auto calendar = std::make_shared<AcquisitionCalendar>(spec.calendar);
    std::uint64_t polygon_index = 0;
    for (std::size_t ci = 0; ci < spec.classes.size(); ++ci) {
        const SceneClass& cls = spec.classes[ci];
        for (int k = 0; k < cls.polygons; ++k, ++polygon_index) {
            Rng rng(derive_seed(seed, "polygon", polygon_index));
            const PolygonDraw poly = draw_polygon(spec, cls, rng);
            const std::string polygon_id = cls.name + "_pg" + std::to_string(polygon_index);
            for (int px = 0; px < poly.pixels; ++px) {
                LabeledSample sample;
                sample.label = static_cast<int>(ci);
                sample.polygon_id = polygon_id;
                sample.series = render_pixel(spec, poly, calendar, rng);
                ds.samples.push_back(std::move(sample));
            }
        }
    }
    if (ds.samples.empty()) throw DataError("scene produced zero pixels");
    ds.check_invariants();
    return ds;
}

AcquisitionCalendar default_calendar() {
    // 46 acquisitions over one year, dense through the summer; the 296-day
    // span resamples to 149 points on the 2-day grid.
    static const std::vector<int> kDays = {
        5,   19,  33,  47,  61,  75,  89,  100, 110, 120, 130, 138, 146, 152, 158, 163,
        168, 173, 177, 181, 185, 189, 193, 197, 201, 205, 209, 213, 217, 221, 225, 230,
        235, 240, 245, 251, 257, 263, 269, 275, 281, 287, 292, 295, 298, 301};
    return AcquisitionCalendar::irregular(kDays);
}

namespace {

// Crop-like band triple (G, R, NIR). NIR carries most of the seasonal
// amplitude; G and R move mildly with the same timing.
std::vector<PhenologyProfile> crop_bands(double up_day, double down_day, double nir_amp,
                                         double up_rate = 0.12, double down_rate = 0.10,
                                         double nir_base = 0.10, double g_amp = 0.04,
                                         double r_amp = 0.05) {
    return {
        {0.08, g_amp, up_day, down_day, up_rate, down_rate},
        {0.10, r_amp, up_day, down_day, up_rate, down_rate},
        {nir_base, nir_amp, up_day, down_day, up_rate, down_rate},
    };
}

std::vector<PhenologyProfile> flat_bands(double g, double r, double nir) {
    // Near-constant profiles; a tiny amplitude keeps the rates meaningful.
    return {
        {g, 0.005, 100, 250, 0.05, 0.05},
        {r, 0.005, 100, 250, 0.05, 0.05},
        {nir, 0.005, 100, 250, 0.05, 0.05},
    };
}

} // namespace

SceneSpec default_scene() {
    SceneSpec spec;
    spec.calendar = default_calendar();
    spec.min_pixels_per_polygon = 10;
    spec.max_pixels_per_polygon = 28;
    spec.noise_sd = 0.02;
    spec.cloud_probability = 0.15;
    spec.polygon_baseline_sd = 0.01;
    spec.polygon_amplitude_jitter = 0.10;
    spec.polygon_time_jitter_days = 5.0;

    spec.classes = {
        {"wheat", {216, 181, 101}, crop_bands(60, 150, 0.30), 15},
        {"barley", {210, 204, 122}, crop_bands(55, 140, 0.26), 2},
        {"rapeseed", {230, 230, 0}, crop_bands(50, 160, 0.34, 0.12, 0.10, 0.10, 0.10, 0.05), 3},
        {"corn", {255, 211, 127}, crop_bands(160, 270, 0.38), 4},
        {"soy", {38, 115, 0}, crop_bands(170, 265, 0.30), 1},
        {"sunflower", {168, 112, 0}, crop_bands(150, 240, 0.32), 9},
        {"sorghum", {255, 170, 0}, crop_bands(165, 275, 0.28), 1},
        {"pea", {152, 230, 0}, crop_bands(70, 155, 0.24), 1},
        {"grassland", {76, 230, 0}, crop_bands(45, 290, 0.20, 0.06, 0.05), 16},
        {"deciduous", {56, 168, 0}, crop_bands(90, 300, 0.30, 0.08, 0.08, 0.15), 1},
        {"conifer", {0, 115, 76}, crop_bands(80, 320, 0.10, 0.05, 0.05, 0.25), 1},
        {"water", {0, 112, 255}, flat_bands(0.06, 0.04, 0.02), 2},
        {"urban", {178, 178, 178}, flat_bands(0.12, 0.14, 0.15), 15},
    };
    return spec;
}

SceneSpec shift_benchmark_scene(double shift_days, double noise_sd, int polygons_per_class,
                                int pixels_per_polygon) {
    SceneSpec spec;
    spec.calendar = default_calendar();
    spec.min_pixels_per_polygon = pixels_per_polygon;
    spec.max_pixels_per_polygon = pixels_per_polygon;
    spec.noise_sd = noise_sd;
    spec.cloud_probability = 0.10;
    // Heavy polygon-level nuisance keeps single-timestamp values ambiguous
    // between the shift pair: the reliable signal for classes 0/1 is when the
    // season happens, not how bright any one date is. The smooth seasonal
    // confounder corrupts absolute levels at low frequency while the steep
    // green-up edge stays intact for local temporal filters.
    spec.polygon_baseline_sd = 0.05;
    spec.polygon_amplitude_jitter = 0.30;
    spec.polygon_time_jitter_days = 14.0;
    spec.smooth_nuisance_sd = 0.08;

    auto shifted = [](std::vector<PhenologyProfile> bands, double shift) {
        for (auto& p : bands) {
            p.green_up_day += shift;
            p.senescence_day += shift;
        }
        return bands;
    };
    const auto shift_profile = crop_bands(120, 210, 0.40, 0.15, 0.12);
    // The amplitude-coded pair lives on a long flat season far from the shift
    // pair's timing, so each pair is separable only by its own cue.
    const auto amp_lo = crop_bands(60, 280, 0.20, 0.12, 0.10);
    const auto amp_hi = crop_bands(60, 280, 0.55, 0.12, 0.10);

    spec.classes = {
        {"shift-early", {230, 170, 60}, shift_profile, polygons_per_class},
        {"shift-late", {150, 90, 200}, shifted(shift_profile, shift_days), polygons_per_class},
        {"amp-low", {120, 200, 120}, amp_lo, polygons_per_class},
        {"amp-high", {20, 120, 40}, amp_hi, polygons_per_class},
    };
    return spec;
}

Dataset make_shift_benchmark(double shift_days, std::uint64_t seed, double noise_sd,
                             int polygons_per_class, int pixels_per_polygon) {
    return generate_scene(
        shift_benchmark_scene(shift_days, noise_sd, polygons_per_class, pixels_per_polygon), seed);
}

Dataset generate_grid_scene(const SceneSpec& spec, int rows, int cols, int patch,
                            std::uint64_t seed) {
    spec.check();
    if (rows < 1 || cols < 1 || patch < 1) throw DataError("grid scene needs positive dimensions");

    Dataset ds;
    ds.legend = legend_of(spec);
    ds.feature_names = spec.band_names;
    auto calendar = std::make_shared<AcquisitionCalendar>(spec.calendar);

    const int blocks_per_row = (cols + patch - 1) / patch;
    const int block_rows = (rows + patch - 1) / patch;
    const int n_blocks = block_rows * blocks_per_row;

    // One polygon per rectangular patch, with its class and nuisance drawn
    // from a block-derived stream.
    std::vector<PolygonDraw> blocks;
    std::vector<int> block_class(n_blocks);
    blocks.reserve(n_blocks);
    for (int g = 0; g < n_blocks; ++g) {
        Rng rng(derive_seed(seed, "block", static_cast<std::uint64_t>(g)));
        block_class[g] = static_cast<int>(rng.below(spec.classes.size()));
        blocks.push_back(draw_polygon(spec, spec.classes[block_class[g]], rng));
    }

    ds.samples.reserve(static_cast<std::size_t>(rows) * cols);
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const int g = (r / patch) * blocks_per_row + (c / patch);
            Rng rng(derive_seed(seed, "pixel", static_cast<std::uint64_t>(r) * cols + c));
            LabeledSample sample;
            sample.label = block_class[g];
            sample.polygon_id = "patch_" + std::to_string(g);
            sample.series = render_pixel(spec, blocks[g], calendar, rng);
            ds.samples.push_back(std::move(sample));
        }
    }
    ds.check_invariants();
    return ds;
}

} // namespace sits
