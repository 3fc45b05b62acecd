#include "sits/calendar.hpp"

#include "sits/errors.hpp"

#include <string>

namespace sits {

namespace {

void check_increasing(const std::vector<int>& days) {
    if (days.size() < 2) {
        throw DataError("calendar needs at least 2 dates, got " + std::to_string(days.size()));
    }
    for (std::size_t i = 1; i < days.size(); ++i) {
        if (days[i] <= days[i - 1]) {
            throw DataError("calendar dates must be strictly increasing (position " +
                            std::to_string(i) + ": " + std::to_string(days[i - 1]) + " then " +
                            std::to_string(days[i]) + ")");
        }
    }
}

} // namespace

AcquisitionCalendar AcquisitionCalendar::irregular(std::vector<int> days) {
    check_increasing(days);
    AcquisitionCalendar cal;
    cal.days = std::move(days);
    // Uniformly spaced dates canonicalize to a regular grid so that calendars
    // survive serialization round-trips unchanged.
    const int gap = cal.days[1] - cal.days[0];
    cal.regular = true;
    for (std::size_t i = 1; i < cal.days.size(); ++i) {
        if (cal.days[i] - cal.days[i - 1] != gap) {
            cal.regular = false;
            break;
        }
    }
    cal.step = cal.regular ? gap : 0;
    return cal;
}

AcquisitionCalendar AcquisitionCalendar::regular_grid(int first_day, int last_day, int step_days) {
    if (step_days < 1) {
        throw DataError("regular calendar step must be >= 1 day, got " + std::to_string(step_days));
    }
    if (last_day <= first_day || (last_day - first_day) % step_days != 0) {
        throw DataError("regular calendar span [" + std::to_string(first_day) + ", " +
                        std::to_string(last_day) + "] is not a whole number of " +
                        std::to_string(step_days) + "-day steps");
    }
    AcquisitionCalendar cal;
    for (int d = first_day; d <= last_day; d += step_days) {
        cal.days.push_back(d);
    }
    cal.regular = true;
    cal.step = step_days;
    check_increasing(cal.days);
    return cal;
}

AcquisitionCalendar AcquisitionCalendar::resample(const AcquisitionCalendar& source, int step_days) {
    const int span = source.last_day() - source.first_day();
    const int last = source.first_day() + (span / step_days) * step_days;
    return regular_grid(source.first_day(), last, step_days);
}

} // namespace sits
