#pragma once

#include "sits/calendar.hpp"

#include <array>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

namespace sits {

/// One pixel's multi-band reflectance profile: a T x D value matrix with a
/// per-entry validity mask (clouds and saturation invalidate observations).
/// Values are row-major: entry (t, d) sits at index t * channels + d.
struct MultivariateSeries {
    std::vector<double> values;
    std::vector<std::uint8_t> valid;
    int time_len = 0;
    int channels = 0;
    CalendarPtr calendar;

    MultivariateSeries() = default;
    MultivariateSeries(CalendarPtr cal, int num_channels);

    double at(int t, int d) const { return values[static_cast<std::size_t>(t) * channels + d]; }
    double& at(int t, int d) { return values[static_cast<std::size_t>(t) * channels + d]; }
    bool is_valid(int t, int d) const { return valid[static_cast<std::size_t>(t) * channels + d] != 0; }
    void set(int t, int d, double value, bool is_valid = true);

    bool fully_valid() const;
    void check_consistent() const;
};

/// Flattens a fully valid series into a vector of length T*D, time-major:
/// element (t*D + d) is values[t][d]. Throws DataError on invalid entries
/// (flatten only applies after gap-filling).
std::vector<double> flatten(const MultivariateSeries& series);

/// Inverse of flatten for a known shape.
MultivariateSeries unflatten(const std::vector<double>& flat, CalendarPtr calendar, int channels);

struct LabeledSample {
    MultivariateSeries series;
    int label = 0;
    std::string polygon_id;
};

/// Ordered class names with display colors; the class index of a label is its
/// position in this list.
struct ClassLegend {
    std::vector<std::string> names;
    std::vector<std::array<std::uint8_t, 3>> colors;

    int size() const { return static_cast<int>(names.size()); }
    int index_of(const std::string& name) const;  // -1 when absent
    void check() const;

    bool operator==(const ClassLegend&) const = default;
};

/// A labeled collection of pixel series sharing one calendar and channel
/// layout, with polygon identifiers for disjoint splitting.
struct Dataset {
    std::vector<LabeledSample> samples;
    ClassLegend legend;
    std::vector<std::string> feature_names;

    int size() const { return static_cast<int>(samples.size()); }
    int time_len() const;
    int channels() const;
    int num_classes() const { return legend.size(); }
    const AcquisitionCalendar& calendar() const;

    std::set<std::string> polygon_ids() const;
    std::vector<std::string> class_names() const { return legend.names; }

    /// Verifies the shared shape/calendar/label invariants; throws DataError.
    void check_invariants() const;

    /// Samples whose polygon_id belongs to `polygons`, in original order.
    Dataset subset(const std::set<std::string>& polygons) const;

    /// Per-class sample counts (length C).
    std::vector<std::int64_t> class_histogram() const;
};

/// Polygon-level fold assignment. The three sets are pairwise disjoint and
/// jointly cover every polygon of the dataset they were built from.
struct SplitAssignment {
    int fold_id = 0;
    std::set<std::string> train_polygons;
    std::set<std::string> validation_polygons;
    std::set<std::string> test_polygons;
    std::vector<std::string> warnings;

    void check_disjoint() const;
};

} // namespace sits
