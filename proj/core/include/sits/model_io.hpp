#pragma once

#include "sits/calendar.hpp"
#include "sits/network.hpp"
#include "sits/preprocess.hpp"
#include "sits/series.hpp"

#include <string>

namespace sits {

/// Everything needed to classify raw series with a trained network: the
/// architecture and its parameters, batch-norm running state, the legend the
/// labels refer to, and the preprocessing recipe (target calendar, feature
/// strategy, fitted normalization).
struct TrainedModel {
    Network network;
    ClassLegend legend;
    FeatureStrategy strategy = FeatureStrategy::spectral_bands;
    AcquisitionCalendar target_calendar;
    NormalizationParams normalization;

    explicit TrainedModel(Network net) : network(std::move(net)) {}
};

/// Versioned binary container; parameters are stored as raw IEEE-754 doubles
/// in declared layer order, so save/load round-trips are bit-exact.
void save_model(TrainedModel& model, const std::string& path);
TrainedModel load_model(const std::string& path);

} // namespace sits
