#include "sits/series.hpp"

#include "sits/errors.hpp"

#include <algorithm>

namespace sits {

MultivariateSeries::MultivariateSeries(CalendarPtr cal, int num_channels)
    : time_len(cal ? cal->length() : 0), channels(num_channels), calendar(std::move(cal)) {
    if (!calendar) throw DataError("series requires a calendar");
    if (channels < 1) throw DataError("series requires at least one channel");
    values.assign(static_cast<std::size_t>(time_len) * channels, 0.0);
    valid.assign(values.size(), 1);
}

void MultivariateSeries::set(int t, int d, double value, bool entry_valid) {
    const std::size_t i = static_cast<std::size_t>(t) * channels + d;
    values[i] = value;
    valid[i] = entry_valid ? 1 : 0;
}

bool MultivariateSeries::fully_valid() const {
    return std::all_of(valid.begin(), valid.end(), [](std::uint8_t v) { return v != 0; });
}

void MultivariateSeries::check_consistent() const {
    if (!calendar) throw DataError("series has no calendar");
    if (time_len != calendar->length()) {
        throw DataError("series length " + std::to_string(time_len) +
                        " does not match calendar length " + std::to_string(calendar->length()));
    }
    const std::size_t expect = static_cast<std::size_t>(time_len) * channels;
    if (values.size() != expect || valid.size() != expect) {
        throw DataError("series storage does not match declared T x D shape");
    }
}

std::vector<double> flatten(const MultivariateSeries& series) {
    if (!series.fully_valid()) {
        throw DataError("flatten requires a fully valid series; gap-fill first");
    }
    return series.values;  // already stored time-major
}

MultivariateSeries unflatten(const std::vector<double>& flat, CalendarPtr calendar, int channels) {
    MultivariateSeries s(std::move(calendar), channels);
    if (flat.size() != s.values.size()) {
        throw DataError("unflatten: vector length " + std::to_string(flat.size()) +
                        " does not match T*D = " + std::to_string(s.values.size()));
    }
    s.values = flat;
    return s;
}

int ClassLegend::index_of(const std::string& name) const {
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i] == name) return static_cast<int>(i);
    }
    return -1;
}

void ClassLegend::check() const {
    if (names.size() != colors.size()) throw DataError("legend names/colors length mismatch");
    for (std::size_t i = 0; i < names.size(); ++i) {
        if (names[i].empty()) throw DataError("legend contains an empty class name");
        for (std::size_t j = i + 1; j < names.size(); ++j) {
            if (names[i] == names[j]) throw DataError("duplicate class name in legend: " + names[i]);
        }
    }
}

int Dataset::time_len() const {
    return samples.empty() ? 0 : samples.front().series.time_len;
}

int Dataset::channels() const {
    return samples.empty() ? 0 : samples.front().series.channels;
}

const AcquisitionCalendar& Dataset::calendar() const {
    if (samples.empty()) throw DataError("empty dataset has no calendar");
    return *samples.front().series.calendar;
}

std::set<std::string> Dataset::polygon_ids() const {
    std::set<std::string> ids;
    for (const auto& s : samples) ids.insert(s.polygon_id);
    return ids;
}

void Dataset::check_invariants() const {
    legend.check();
    if (samples.empty()) return;
    const auto* cal = samples.front().series.calendar.get();
    const int t = time_len();
    const int d = channels();
    if (static_cast<int>(feature_names.size()) != d) {
        throw DataError("feature_names length " + std::to_string(feature_names.size()) +
                        " does not match channel count " + std::to_string(d));
    }
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        s.series.check_consistent();
        if (s.series.calendar.get() != cal) {
            throw DataError("sample " + std::to_string(i) + " does not share the dataset calendar");
        }
        if (s.series.time_len != t || s.series.channels != d) {
            throw DataError("sample " + std::to_string(i) + " has shape " +
                            std::to_string(s.series.time_len) + "x" + std::to_string(s.series.channels) +
                            ", expected " + std::to_string(t) + "x" + std::to_string(d));
        }
        if (s.label < 0 || s.label >= legend.size()) {
            throw DataError("sample " + std::to_string(i) + " label " + std::to_string(s.label) +
                            " outside legend of size " + std::to_string(legend.size()));
        }
        if (s.polygon_id.empty()) {
            throw DataError("sample " + std::to_string(i) + " has an empty polygon_id");
        }
    }
}

Dataset Dataset::subset(const std::set<std::string>& polygons) const {
    Dataset out;
    out.legend = legend;
    out.feature_names = feature_names;
    for (const auto& s : samples) {
        if (polygons.count(s.polygon_id)) out.samples.push_back(s);
    }
    return out;
}

std::vector<std::int64_t> Dataset::class_histogram() const {
    std::vector<std::int64_t> hist(legend.size(), 0);
    for (const auto& s : samples) hist[s.label]++;
    return hist;
}

void SplitAssignment::check_disjoint() const {
    auto overlaps = [](const std::set<std::string>& a, const std::set<std::string>& b) {
        for (const auto& x : a) {
            if (b.count(x)) return true;
        }
        return false;
    };
    if (overlaps(train_polygons, test_polygons) || overlaps(train_polygons, validation_polygons) ||
        overlaps(validation_polygons, test_polygons)) {
        throw DataError("split fold " + std::to_string(fold_id) + " has overlapping polygon sets");
    }
}

} // namespace sits
