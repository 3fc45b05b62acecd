#include "sits/dataset_io.hpp"

#include "sits/errors.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <system_error>

namespace sits {

namespace {

std::string format_double(double v) {
    char buf[32];
    auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    if (ec != std::errc()) throw DataError("failed to format value");
    return std::string(buf, ptr);
}

double parse_double(std::string_view s, int line) {
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw DataError("line " + std::to_string(line) + ": cannot parse value '" + std::string(s) + "'");
    }
    return v;
}

std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> fields;
    std::size_t start = 0;
    while (true) {
        const std::size_t comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            fields.push_back(line.substr(start));
            break;
        }
        fields.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
    return fields;
}

struct HeaderLayout {
    std::vector<std::string> feature_names;
    std::vector<int> days;
};

// Header columns after polygon_id,label come as D features repeated per day:
// f0_t<d0>, f1_t<d0>, ..., f0_t<d1>, ...
HeaderLayout parse_header(const std::vector<std::string_view>& fields) {
    if (fields.size() < 4 || fields[0] != "polygon_id" || fields[1] != "label") {
        throw DataError("line 1: header must start with polygon_id,label and carry at least "
                        "two feature columns");
    }
    struct Col { std::string feature; int day; };
    std::vector<Col> cols;
    for (std::size_t i = 2; i < fields.size(); ++i) {
        const std::string_view f = fields[i];
        const std::size_t sep = f.rfind("_t");
        if (sep == std::string_view::npos || sep == 0 || sep + 2 >= f.size()) {
            throw DataError("line 1: column '" + std::string(f) + "' is not of the form <feature>_t<day>");
        }
        int day = 0;
        const std::string_view day_str = f.substr(sep + 2);
        auto [ptr, ec] = std::from_chars(day_str.data(), day_str.data() + day_str.size(), day);
        if (ec != std::errc() || ptr != day_str.data() + day_str.size()) {
            throw DataError("line 1: column '" + std::string(f) + "' has a non-integer day suffix");
        }
        cols.push_back({std::string(f.substr(0, sep)), day});
    }

    HeaderLayout layout;
    layout.days.push_back(cols[0].day);
    std::size_t d = 0;
    while (d < cols.size() && cols[d].day == cols[0].day) {
        layout.feature_names.push_back(cols[d].feature);
        ++d;
    }
    const std::size_t num_features = layout.feature_names.size();
    if (cols.size() % num_features != 0) {
        throw DataError("line 1: column count is not a whole number of " +
                        std::to_string(num_features) + "-feature groups");
    }
    for (std::size_t i = num_features; i < cols.size(); i += num_features) {
        const int day = cols[i].day;
        if (day <= layout.days.back()) {
            throw DataError("line 1: day " + std::to_string(day) + " is not strictly increasing");
        }
        for (std::size_t k = 0; k < num_features; ++k) {
            if (cols[i + k].feature != layout.feature_names[k] || cols[i + k].day != day) {
                throw DataError("line 1: column '" + cols[i + k].feature + "_t" +
                                std::to_string(cols[i + k].day) +
                                "' breaks the time-major feature grouping");
            }
        }
        layout.days.push_back(day);
    }
    return layout;
}

} // namespace

std::string legend_path_for(const std::string& csv_path) {
    return csv_path + ".legend";
}

ClassLegend read_legend(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw DataError("cannot open legend file: " + path);
    ClassLegend legend;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        const std::size_t sep = line.rfind(':');
        if (sep == std::string::npos || sep + 8 != line.size() || line[sep + 1] != '#') {
            throw DataError(path + " line " + std::to_string(line_no) +
                            ": expected `name:#RRGGBB`, got '" + line + "'");
        }
        unsigned rgb = 0;
        const char* hex = line.c_str() + sep + 2;
        auto [ptr, ec] = std::from_chars(hex, hex + 6, rgb, 16);
        if (ec != std::errc() || ptr != hex + 6) {
            throw DataError(path + " line " + std::to_string(line_no) + ": bad color '" +
                            line.substr(sep + 1) + "'");
        }
        legend.names.push_back(line.substr(0, sep));
        legend.colors.push_back({static_cast<std::uint8_t>((rgb >> 16) & 0xff),
                                 static_cast<std::uint8_t>((rgb >> 8) & 0xff),
                                 static_cast<std::uint8_t>(rgb & 0xff)});
    }
    legend.check();
    if (legend.size() == 0) throw DataError("legend file is empty: " + path);
    return legend;
}

void write_legend(const ClassLegend& legend, const std::string& path) {
    legend.check();
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot write legend file: " + path);
    char buf[16];
    for (int c = 0; c < legend.size(); ++c) {
        std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", legend.colors[c][0], legend.colors[c][1],
                      legend.colors[c][2]);
        out << legend.names[c] << ':' << buf << '\n';
    }
    if (!out) throw DataError("failed writing legend file: " + path);
}

Dataset read_dataset(const std::string& csv_path, const std::string& legend_path) {
    const std::string lpath = legend_path.empty() ? legend_path_for(csv_path) : legend_path;
    Dataset ds;
    ds.legend = read_legend(lpath);

    std::ifstream in(csv_path, std::ios::binary);
    if (!in) throw DataError("cannot open dataset file: " + csv_path);

    std::string line;
    if (!std::getline(in, line)) throw DataError(csv_path + ": empty file");
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const HeaderLayout layout = parse_header(split_csv(line));
    ds.feature_names = layout.feature_names;

    auto calendar = std::make_shared<AcquisitionCalendar>(AcquisitionCalendar::irregular(layout.days));
    const int T = calendar->length();
    const int D = static_cast<int>(layout.feature_names.size());
    const std::size_t expected_fields = 2 + static_cast<std::size_t>(T) * D;

    int line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (line.empty()) continue;
        const auto fields = split_csv(line);
        if (fields.size() != expected_fields) {
            throw DataError(csv_path + " line " + std::to_string(line_no) + ": expected " +
                            std::to_string(expected_fields) + " fields, got " +
                            std::to_string(fields.size()));
        }
        LabeledSample sample;
        sample.polygon_id = std::string(fields[0]);
        if (sample.polygon_id.empty()) {
            throw DataError(csv_path + " line " + std::to_string(line_no) + ": empty polygon_id");
        }
        const std::string label_name(fields[1]);
        sample.label = ds.legend.index_of(label_name);
        if (sample.label < 0) {
            throw DataError(csv_path + " line " + std::to_string(line_no) + ": unknown class name '" +
                            label_name + "'");
        }
        sample.series = MultivariateSeries(calendar, D);
        for (std::size_t i = 0; i < static_cast<std::size_t>(T) * D; ++i) {
            const auto f = fields[2 + i];
            const int t = static_cast<int>(i) / D;
            const int d = static_cast<int>(i) % D;
            if (f == "NA") {
                sample.series.set(t, d, 0.0, false);
            } else {
                sample.series.set(t, d, parse_double(f, line_no), true);
            }
        }
        ds.samples.push_back(std::move(sample));
    }
    ds.check_invariants();
    return ds;
}

void write_dataset(const Dataset& dataset, const std::string& csv_path,
                   const std::string& legend_path) {
    if (dataset.samples.empty()) throw DataError("refusing to write an empty dataset");
    dataset.check_invariants();

    const std::string lpath = legend_path.empty() ? legend_path_for(csv_path) : legend_path;
    write_legend(dataset.legend, lpath);

    std::ofstream out(csv_path, std::ios::binary);
    if (!out) throw DataError("cannot write dataset file: " + csv_path);

    out << "polygon_id,label";
    const auto& cal = dataset.calendar();
    for (const int day : cal.days) {
        for (const auto& f : dataset.feature_names) {
            out << ',' << f << "_t" << day;
        }
    }
    out << '\n';

    const int T = dataset.time_len();
    const int D = dataset.channels();
    for (const auto& sample : dataset.samples) {
        out << sample.polygon_id << ',' << dataset.legend.names[sample.label];
        for (int t = 0; t < T; ++t) {
            for (int d = 0; d < D; ++d) {
                out << ',';
                if (sample.series.is_valid(t, d)) {
                    out << format_double(sample.series.at(t, d));
                } else {
                    out << "NA";
                }
            }
        }
        out << '\n';
    }
    if (!out) throw DataError("failed writing dataset file: " + csv_path);
}

} // namespace sits
