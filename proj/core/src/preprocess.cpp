#include "sits/preprocess.hpp"

#include "sits/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>

namespace sits {

namespace {
constexpr double kDenomEpsilon = 1e-12;
constexpr double kRangeEpsilon = 1e-12;
} // namespace

std::string to_string(FeatureStrategy s) {
    switch (s) {
        case FeatureStrategy::ndvi_only: return "ndvi";
        case FeatureStrategy::spectral_bands: return "sb";
        case FeatureStrategy::bands_and_indices: return "sb-sf";
    }
    throw std::invalid_argument("unreachable feature strategy");
}

FeatureStrategy parse_feature_strategy(const std::string& s) {
    if (s == "ndvi") return FeatureStrategy::ndvi_only;
    if (s == "sb") return FeatureStrategy::spectral_bands;
    if (s == "sb-sf") return FeatureStrategy::bands_and_indices;
    throw DataError("unknown feature strategy '" + s + "' (expected ndvi, sb or sb-sf)");
}

int feature_channels(FeatureStrategy s) {
    switch (s) {
        case FeatureStrategy::ndvi_only: return 1;
        case FeatureStrategy::spectral_bands: return 3;
        case FeatureStrategy::bands_and_indices: return 6;
    }
    throw std::invalid_argument("unreachable feature strategy");
}

MultivariateSeries linear_gapfill(const MultivariateSeries& series, const CalendarPtr& target) {
    series.check_consistent();
    if (!target) throw DataError("gap-fill requires a target calendar");

    MultivariateSeries out(target, series.channels);
    const auto& src_days = series.calendar->days;

    for (int d = 0; d < series.channels; ++d) {
        // Valid observation positions of this channel, in time order.
        std::vector<int> obs;
        for (int t = 0; t < series.time_len; ++t) {
            if (series.is_valid(t, d)) obs.push_back(t);
        }
        if (obs.empty()) {
            throw DataError("gap-fill: channel " + std::to_string(d) + " has no valid observation");
        }

        std::size_t seg = 0;  // current segment [obs[seg], obs[seg+1]]
        for (int i = 0; i < target->length(); ++i) {
            const int day = target->days[i];
            double value;
            if (day <= src_days[obs.front()]) {
                value = series.at(obs.front(), d);
            } else if (day >= src_days[obs.back()]) {
                value = series.at(obs.back(), d);
            } else {
                while (src_days[obs[seg + 1]] < day) ++seg;
                const int t0 = obs[seg], t1 = obs[seg + 1];
                if (day == src_days[t0]) {          // exact hits stay bit-identical
                    value = series.at(t0, d);
                } else if (day == src_days[t1]) {
                    value = series.at(t1, d);
                } else {
                    const double day0 = src_days[t0], day1 = src_days[t1];
                    const double w = (day - day0) / (day1 - day0);
                    value = series.at(t0, d) + w * (series.at(t1, d) - series.at(t0, d));
                }
            }
            out.set(i, d, value, true);
        }
    }
    return out;
}

Dataset gapfill_dataset(const Dataset& dataset, const CalendarPtr& target) {
    Dataset out;
    out.legend = dataset.legend;
    out.feature_names = dataset.feature_names;
    out.samples.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        LabeledSample filled;
        filled.label = s.label;
        filled.polygon_id = s.polygon_id;
        filled.series = linear_gapfill(s.series, target);
        out.samples.push_back(std::move(filled));
    }
    return out;
}

double ndvi(double nir, double red, long long* zero_denominator) {
    const double denom = nir + red;
    if (std::abs(denom) < kDenomEpsilon) {
        if (zero_denominator) ++*zero_denominator;
        return 0.0;
    }
    return (nir - red) / denom;
}

double ndwi(double green, double nir, long long* zero_denominator) {
    const double denom = green + nir;
    if (std::abs(denom) < kDenomEpsilon) {
        if (zero_denominator) ++*zero_denominator;
        return 0.0;
    }
    return (green - nir) / denom;
}

double brilliance(std::span<const double> bands) {
    if (bands.empty()) throw std::invalid_argument("brilliance requires at least one band");
    double sum = 0.0;
    for (const double b : bands) sum += b * b;
    return std::sqrt(sum);
}

MultivariateSeries assemble_features(const MultivariateSeries& series, FeatureStrategy strategy,
                                     long long* zero_denominator) {
    if (series.channels != 3) {
        throw DataError("feature assembly expects 3 bands (G, R, NIR), got " +
                        std::to_string(series.channels));
    }
    if (!series.fully_valid()) {
        throw DataError("feature assembly expects a gap-filled series");
    }

    MultivariateSeries out(series.calendar, feature_channels(strategy));
    for (int t = 0; t < series.time_len; ++t) {
        const double g = series.at(t, 0);
        const double r = series.at(t, 1);
        const double nir = series.at(t, 2);
        switch (strategy) {
            case FeatureStrategy::ndvi_only:
                out.set(t, 0, ndvi(nir, r, zero_denominator));
                break;
            case FeatureStrategy::spectral_bands:
                out.set(t, 0, g);
                out.set(t, 1, r);
                out.set(t, 2, nir);
                break;
            case FeatureStrategy::bands_and_indices: {
                const double bands[3] = {g, r, nir};
                out.set(t, 0, g);
                out.set(t, 1, r);
                out.set(t, 2, nir);
                out.set(t, 3, ndvi(nir, r, zero_denominator));
                out.set(t, 4, ndwi(g, nir, zero_denominator));
                out.set(t, 5, brilliance(bands));
                break;
            }
        }
    }
    return out;
}

Dataset assemble_features_dataset(const Dataset& dataset, FeatureStrategy strategy,
                                  long long* zero_denominator) {
    Dataset out;
    out.legend = dataset.legend;
    switch (strategy) {
        case FeatureStrategy::ndvi_only: out.feature_names = {"NDVI"}; break;
        case FeatureStrategy::spectral_bands: out.feature_names = {"G", "R", "NIR"}; break;
        case FeatureStrategy::bands_and_indices:
            out.feature_names = {"G", "R", "NIR", "NDVI", "NDWI", "IB"};
            break;
    }
    out.samples.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        LabeledSample fs;
        fs.label = s.label;
        fs.polygon_id = s.polygon_id;
        fs.series = assemble_features(s.series, strategy, zero_denominator);
        out.samples.push_back(std::move(fs));
    }
    return out;
}

double percentile(std::vector<double> values, double p) {
    if (values.empty()) throw std::invalid_argument("percentile of an empty set");
    if (p < 0.0 || p > 100.0) throw std::invalid_argument("percentile outside [0, 100]");
    std::sort(values.begin(), values.end());
    const double rank = p / 100.0 * static_cast<double>(values.size() - 1);
    const std::size_t lo = static_cast<std::size_t>(rank);
    if (lo + 1 >= values.size()) return values.back();
    const double frac = rank - static_cast<double>(lo);
    return values[lo] * (1.0 - frac) + values[lo + 1] * frac;
}

NormalizationParams fit_normalization(const Dataset& train, double low_percentile,
                                      double high_percentile) {
    if (train.samples.empty()) throw DataError("cannot fit normalization on an empty dataset");
    const int D = train.channels();
    NormalizationParams params;
    params.low.resize(D);
    params.high.resize(D);
    for (int d = 0; d < D; ++d) {
        std::vector<double> pool;
        pool.reserve(train.samples.size() * static_cast<std::size_t>(train.time_len()));
        for (const auto& s : train.samples) {
            for (int t = 0; t < s.series.time_len; ++t) {
                if (s.series.is_valid(t, d)) pool.push_back(s.series.at(t, d));
            }
        }
        if (pool.empty()) {
            throw DataError("normalization: channel " + std::to_string(d) + " has no valid values");
        }
        params.low[d] = percentile(pool, low_percentile);
        params.high[d] = percentile(std::move(pool), high_percentile);
    }
    return params;
}

MultivariateSeries apply_normalization(const MultivariateSeries& series,
                                       const NormalizationParams& params) {
    if (series.channels != params.channels()) {
        throw DataError("normalization fitted for " + std::to_string(params.channels()) +
                        " channels, series has " + std::to_string(series.channels));
    }
    MultivariateSeries out = series;
    for (int d = 0; d < series.channels; ++d) {
        const double range = params.high[d] - params.low[d];
        const bool degenerate = range < kRangeEpsilon;
        for (int t = 0; t < series.time_len; ++t) {
            if (!series.is_valid(t, d)) continue;
            out.at(t, d) = degenerate ? 0.0 : (series.at(t, d) - params.low[d]) / range;
        }
    }
    return out;
}

Dataset apply_normalization(const Dataset& dataset, const NormalizationParams& params) {
    Dataset out;
    out.legend = dataset.legend;
    out.feature_names = dataset.feature_names;
    out.samples.reserve(dataset.samples.size());
    for (const auto& s : dataset.samples) {
        out.samples.push_back({apply_normalization(s.series, params), s.label, s.polygon_id});
    }
    return out;
}

void save_normalization(const NormalizationParams& params, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write normalization file: " + path);
    out << "feature_index,low,high\n";
    char buf[32];
    auto fmt = [&buf](double v) {
        auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
        if (ec != std::errc()) throw DataError("failed to format normalization value");
        return std::string(buf, ptr);
    };
    for (int d = 0; d < params.channels(); ++d) {
        out << d << ',' << fmt(params.low[d]) << ',' << fmt(params.high[d]) << '\n';
    }
    if (!out) throw DataError("failed writing normalization file: " + path);
}

NormalizationParams load_normalization(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open normalization file: " + path);
    std::string line;
    if (!std::getline(in, line) || line.rfind("feature_index,low,high", 0) != 0) {
        throw DataError(path + ": missing normalization header");
    }
    NormalizationParams params;
    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        int index = 0;
        double lo = 0.0, hi = 0.0;
        const char* p = line.c_str();
        const char* end = p + line.size();
        auto r1 = std::from_chars(p, end, index);
        if (r1.ec != std::errc() || r1.ptr == end || *r1.ptr != ',') {
            throw DataError(path + " line " + std::to_string(line_no) + ": bad row");
        }
        auto r2 = std::from_chars(r1.ptr + 1, end, lo);
        if (r2.ec != std::errc() || r2.ptr == end || *r2.ptr != ',') {
            throw DataError(path + " line " + std::to_string(line_no) + ": bad row");
        }
        auto r3 = std::from_chars(r2.ptr + 1, end, hi);
        if (r3.ec != std::errc() || r3.ptr != end) {
            throw DataError(path + " line " + std::to_string(line_no) + ": bad row");
        }
        if (index != params.channels()) {
            throw DataError(path + " line " + std::to_string(line_no) + ": rows out of order");
        }
        params.low.push_back(lo);
        params.high.push_back(hi);
    }
    if (params.channels() == 0) throw DataError(path + ": no normalization rows");
    return params;
}

} // namespace sits
