#pragma once

#include <memory>
#include <vector>

namespace sits {

/// Ordered acquisition dates of a time series, as day-of-year integers.
/// A calendar is either irregular (raw acquisitions) or a regular grid with a
/// fixed step in days.
struct AcquisitionCalendar {
    std::vector<int> days;    // strictly increasing
    bool regular = false;
    int step = 0;             // grid step in days, >= 1 when regular

    /// Builds an irregular calendar. Throws on fewer than 2 dates or
    /// non-increasing dates.
    static AcquisitionCalendar irregular(std::vector<int> days);

    /// Builds a regular grid covering [first, last] with the given step.
    /// `last` must be reachable from `first` in whole steps.
    static AcquisitionCalendar regular_grid(int first_day, int last_day, int step_days);

    /// Regular grid spanning the same date range as `source`.
    static AcquisitionCalendar resample(const AcquisitionCalendar& source, int step_days);

    int length() const { return static_cast<int>(days.size()); }
    int first_day() const { return days.front(); }
    int last_day() const { return days.back(); }

    bool operator==(const AcquisitionCalendar&) const = default;
};

using CalendarPtr = std::shared_ptr<const AcquisitionCalendar>;

} // namespace sits
