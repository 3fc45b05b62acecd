#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sits/dataset_io.hpp"
#include "sits/errors.hpp"
#include "sits/preprocess.hpp"
#include "sits/rng.hpp"
#include "sits/synth.hpp"

#include <Eigen/Dense>

#include <cmath>
#include <filesystem>
#include <map>

using namespace sits;

TEST_CASE("double logistic: flat, saturated, and limit behavior") {
    PhenologyProfile p{0.3, 0.0, 100, 200, 0.2, 0.2};
    CHECK(double_logistic(150, p) == doctest::Approx(0.3));

    p.amplitude = 0.5;
    // midway with steep symmetric rates: up-sigmoid saturated, down not yet
    CHECK(double_logistic(150, p) == doctest::Approx(0.8).epsilon(1e-4));
    // limits at both ends return the baseline
    CHECK(double_logistic(-1000, p) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(double_logistic(1000, p) == doctest::Approx(0.3).epsilon(1e-9));
}

TEST_CASE("default calendar: 46 irregular dates resampling to 149") {
    const AcquisitionCalendar cal = default_calendar();
    REQUIRE(cal.length() == 46);
    for (int i = 1; i < 46; ++i) CHECK(cal.days[i] > cal.days[i - 1]);
    CHECK_FALSE(cal.regular);
    CHECK(AcquisitionCalendar::resample(cal, 2).length() == 149);
}

TEST_CASE("scene generation is deterministic and respects the polygon accounting") {
    const SceneSpec spec = default_scene();
    const Dataset a = generate_scene(spec, 42);
    const Dataset b = generate_scene(spec, 42);
    REQUIRE(a.size() == b.size());
    for (int i = 0; i < a.size(); ++i) {
        CHECK(a.samples[i].polygon_id == b.samples[i].polygon_id);
        CHECK(a.samples[i].label == b.samples[i].label);
        CHECK(a.samples[i].series.values == b.samples[i].series.values);
        CHECK(a.samples[i].series.valid == b.samples[i].series.valid);
    }
    CHECK(generate_scene(spec, 43).samples[0].series.values != a.samples[0].series.values);

    // counting oracle: polygons per class and pixel bounds
    std::map<std::string, std::pair<int, int>> polygons;  // id -> (label, pixels)
    for (const auto& s : a.samples) {
        auto& info = polygons[s.polygon_id];
        info.first = s.label;
        info.second++;
    }
    std::vector<int> polys_per_class(spec.classes.size(), 0);
    for (const auto& [id, info] : polygons) {
        polys_per_class[info.first]++;
        CHECK(info.second >= spec.min_pixels_per_polygon);
        CHECK(info.second <= spec.max_pixels_per_polygon);
    }
    for (std::size_t c = 0; c < spec.classes.size(); ++c) {
        CHECK(polys_per_class[c] == spec.classes[c].polygons);
    }

    CHECK_NOTHROW(a.check_invariants());
}

TEST_CASE("noise-free cloud-free polygons are internally identical") {
    SceneSpec spec = default_scene();
    spec.noise_sd = 0.0;
    spec.cloud_probability = 0.0;
    spec.date_gain_jitter = 0.0;
    const Dataset ds = generate_scene(spec, 5);
    std::map<std::string, const MultivariateSeries*> first_of;
    for (const auto& s : ds.samples) {
        auto [it, inserted] = first_of.try_emplace(s.polygon_id, &s.series);
        if (!inserted) {
            CHECK(s.series.values == it->second->values);
        }
        CHECK(s.series.fully_valid());
    }
}

TEST_CASE("cloud-free generation makes gap-filling onto the source calendar the identity") {
    SceneSpec spec = default_scene();
    spec.cloud_probability = 0.0;
    const Dataset ds = generate_scene(spec, 9);
    const auto& sample = ds.samples[0].series;
    const MultivariateSeries filled = linear_gapfill(sample, sample.calendar);
    CHECK(filled.values == sample.values);
}

TEST_CASE("clouds invalidate whole polygon-dates, never only some band") {
    SceneSpec spec = default_scene();
    spec.cloud_probability = 0.35;
    const Dataset ds = generate_scene(spec, 21);
    bool saw_invalid = false;
    for (const auto& s : ds.samples) {
        for (int t = 0; t < s.series.time_len; ++t) {
            const bool v0 = s.series.is_valid(t, 0);
            for (int d = 1; d < s.series.channels; ++d) {
                CHECK(s.series.is_valid(t, d) == v0);
            }
            saw_invalid = saw_invalid || !v0;
        }
    }
    CHECK(saw_invalid);
}

TEST_CASE("generated scenes survive the CSV round-trip") {
    SceneSpec spec = default_scene();
    spec.min_pixels_per_polygon = 2;
    spec.max_pixels_per_polygon = 4;
    const Dataset ds = generate_scene(spec, 77);
    const std::string path = (std::filesystem::temp_directory_path() / "sits_scene.csv").string();
    write_dataset(ds, path);
    const Dataset back = read_dataset(path);
    REQUIRE(back.size() == ds.size());
    CHECK(back.legend == ds.legend);
    for (int i = 0; i < ds.size(); ++i) {
        CHECK(back.samples[i].series.valid == ds.samples[i].series.valid);
        for (int t = 0; t < ds.time_len(); ++t) {
            for (int d = 0; d < ds.channels(); ++d) {
                if (ds.samples[i].series.is_valid(t, d)) {
                    CHECK(back.samples[i].series.at(t, d) == ds.samples[i].series.at(t, d));
                }
            }
        }
    }
}

TEST_CASE("zero-pixel scenes are rejected") {
    SceneSpec spec = default_scene();
    for (auto& c : spec.classes) c.polygons = 0;
    CHECK_THROWS_AS(generate_scene(spec, 1), DataError);

    SceneSpec bad = default_scene();
    bad.classes.resize(1);
    CHECK_THROWS_AS(generate_scene(bad, 1), DataError);
}

TEST_CASE("shift benchmark: zero shift makes the pair generators identical") {
    const SceneSpec spec = shift_benchmark_scene(0.0);
    REQUIRE(spec.classes.size() == 4);
    for (std::size_t band = 0; band < 3; ++band) {
        const auto& a = spec.classes[0].band_profiles[band];
        const auto& b = spec.classes[1].band_profiles[band];
        CHECK(a.green_up_day == b.green_up_day);
        CHECK(a.senescence_day == b.senescence_day);
        CHECK(a.amplitude == b.amplitude);
        CHECK(a.baseline == b.baseline);
    }
    const Dataset x = make_shift_benchmark(30.0, 3, 0.02, 4, 6);
    const Dataset y = make_shift_benchmark(30.0, 3, 0.02, 4, 6);
    CHECK(x.samples[5].series.values == y.samples[5].series.values);
}

TEST_CASE("shift benchmark: the pair is separable by a noiseless nearest-profile oracle") {
    // Per class, fit the full generative shape by least squares over a jitter
    // grid: baseline + amplitude * curve(t - jitter) + three sin/cos harmonic
    // pairs (the smooth confounder subspace), on the NIR band. The class with
    // the lower residual wins.
    const double shift = 30.0;
    const Dataset ds = make_shift_benchmark(shift, 17, 0.02, 12, 8);
    const SceneSpec spec = shift_benchmark_scene(shift);
    const auto& cal = ds.calendar();
    const double period = spec.smooth_nuisance_period_days;

    auto residual = [&](const MultivariateSeries& s, const PhenologyProfile& base) {
        double best = 1e100;
        for (double jitter = -14.0; jitter <= 14.0; jitter += 1.0) {
            PhenologyProfile shape = base;
            shape.baseline = 0.0;
            shape.amplitude = 1.0;
            shape.green_up_day += jitter;
            shape.senescence_day += jitter;

            std::vector<double> ys;
            std::vector<std::array<double, 8>> rows;
            for (int t = 0; t < s.time_len; ++t) {
                if (!s.is_valid(t, 2)) continue;
                const double day = cal.days[t];
                std::array<double, 8> row{};
                row[0] = 1.0;
                row[1] = double_logistic(day, shape);
                for (int k = 1; k <= 3; ++k) {
                    row[2 * k] = std::sin(6.283185307179586 * k * day / period);
                    row[2 * k + 1] = std::cos(6.283185307179586 * k * day / period);
                }
                rows.push_back(row);
                ys.push_back(s.at(t, 2));
            }
            Eigen::MatrixXd x(rows.size(), 8);
            Eigen::VectorXd y(rows.size());
            for (std::size_t i = 0; i < rows.size(); ++i) {
                for (int j = 0; j < 8; ++j) x(static_cast<long>(i), j) = rows[i][j];
                y(static_cast<long>(i)) = ys[i];
            }
            // MAP fit: flat prior on baseline/amplitude, the generative
            // normal prior on the harmonic coefficients, observation noise
            // from the pixel noise level.
            const double noise_var = spec.noise_sd * spec.noise_sd;
            Eigen::VectorXd prior = Eigen::VectorXd::Zero(8);
            for (int k = 1; k <= 3; ++k) {
                const double sd = spec.smooth_nuisance_sd / k;
                prior(2 * k) = prior(2 * k + 1) = 1.0 / (sd * sd);
            }
            const Eigen::MatrixXd gram =
                x.transpose() * x / noise_var + prior.asDiagonal().toDenseMatrix();
            const Eigen::VectorXd coef = gram.ldlt().solve(x.transpose() * y / noise_var);
            const double score = (x * coef - y).squaredNorm() / noise_var +
                                 coef.dot(prior.asDiagonal() * coef);
            best = std::min(best, score);
        }
        return best;
    };

    int correct = 0, total = 0;
    for (const auto& s : ds.samples) {
        if (s.label > 1) continue;
        const double r0 = residual(s.series, spec.classes[0].band_profiles[2]);
        const double r1 = residual(s.series, spec.classes[1].band_profiles[2]);
        correct += (r0 < r1 ? 0 : 1) == s.label;
        ++total;
    }
    CHECK(total > 0);
    CHECK(static_cast<double>(correct) / total > 0.95);
}

TEST_CASE("grid scenes emit row-major rectangular patches") {
    SceneSpec spec = default_scene();
    spec.noise_sd = 0.0;
    spec.cloud_probability = 0.0;
    const int rows = 12, cols = 20, patch = 4;
    const Dataset ds = generate_grid_scene(spec, rows, cols, patch, 99);
    REQUIRE(ds.size() == rows * cols);

    // pixels inside one patch share polygon and label
    for (int r = 0; r < rows; ++r) {
        for (int c = 0; c < cols; ++c) {
            const auto& here = ds.samples[r * cols + c];
            const auto& anchor = ds.samples[(r / patch * patch) * cols + (c / patch * patch)];
            CHECK(here.polygon_id == anchor.polygon_id);
            CHECK(here.label == anchor.label);
        }
    }
}
