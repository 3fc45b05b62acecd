#include "sits/architectures.hpp"

#include "sits/errors.hpp"

#include <charconv>
#include <stdexcept>

namespace sits {

namespace {

void append_conv_block(NetworkSpec& spec, int filter, int units, ConvKind kind,
                       const ArchOptions& options) {
    spec.layers.push_back(ConvDesc{filter, units, kind});
    if (options.batch_norm) spec.layers.push_back(BatchNormDesc{});
    spec.layers.push_back(ReluDesc{});
    if (options.dropout_rate > 0.0) spec.layers.push_back(DropoutDesc{options.dropout_rate});
}

void append_dense_block(NetworkSpec& spec, int units, const ArchOptions& options) {
    spec.layers.push_back(DenseDesc{units});
    if (options.batch_norm) spec.layers.push_back(BatchNormDesc{});
    spec.layers.push_back(ReluDesc{});
    if (options.dropout_rate > 0.0) spec.layers.push_back(DropoutDesc{options.dropout_rate});
}

} // namespace

std::string to_string(GuidanceKind k) {
    switch (k) {
        case GuidanceKind::none: return "none";
        case GuidanceKind::temporal: return "temporal";
        case GuidanceKind::spectral: return "spectral";
        case GuidanceKind::spectro_temporal: return "spectro-temporal";
    }
    throw std::invalid_argument("unreachable guidance kind");
}

GuidanceKind parse_guidance(const std::string& s) {
    if (s == "none") return GuidanceKind::none;
    if (s == "temporal") return GuidanceKind::temporal;
    if (s == "spectral") return GuidanceKind::spectral;
    if (s == "spectro-temporal") return GuidanceKind::spectro_temporal;
    throw DataError("unknown guidance kind '" + s + "'");
}

std::string to_string(PoolVariant v) {
    switch (v) {
        case PoolVariant::mp: return "mp";
        case PoolVariant::ap: return "ap";
        case PoolVariant::mp_gap: return "mp+gap";
        case PoolVariant::ap_gap: return "ap+gap";
        case PoolVariant::gap: return "gap";
    }
    throw std::invalid_argument("unreachable pool variant");
}

PoolVariant parse_pool_variant(const std::string& s) {
    if (s == "mp") return PoolVariant::mp;
    if (s == "ap") return PoolVariant::ap;
    if (s == "mp+gap") return PoolVariant::mp_gap;
    if (s == "ap+gap") return PoolVariant::ap_gap;
    if (s == "gap") return PoolVariant::gap;
    throw DataError("unknown pooling variant '" + s + "'");
}

NetworkSpec build_tempcnn(int time_len, int channels, int classes, int width, int depth, int filter,
                          int dense_units, ArchOptions options) {
    NetworkSpec spec;
    spec.input_time = time_len;
    spec.input_channels = channels;
    for (int i = 0; i < depth; ++i) {
        append_conv_block(spec, filter, width, ConvKind::full, options);
    }
    spec.layers.push_back(FlattenDesc{});
    append_dense_block(spec, dense_units, options);
    spec.layers.push_back(SoftmaxDesc{classes});
    spec.validate();
    return spec;
}

NetworkSpec build_fc_baseline(int time_len, int channels, int classes, int width,
                              ArchOptions options) {
    NetworkSpec spec;
    spec.input_time = time_len;
    spec.input_channels = channels;
    spec.layers.push_back(FlattenDesc{});
    for (int i = 0; i < 3; ++i) append_dense_block(spec, width, options);
    spec.layers.push_back(SoftmaxDesc{classes});
    spec.validate();
    return spec;
}

NetworkSpec build_guidance(GuidanceKind kind, int time_len, int channels, int classes, int filter,
                           ArchOptions options, int width, int dense_units) {
    switch (kind) {
        case GuidanceKind::none:
            return build_fc_baseline(time_len, channels, classes, 1024, options);
        case GuidanceKind::spectro_temporal:
            return build_tempcnn(time_len, channels, classes, width, 3, filter, dense_units, options);
        case GuidanceKind::temporal: {
            NetworkSpec spec;
            spec.input_time = time_len;
            spec.input_channels = channels;
            for (int i = 0; i < 3; ++i) {
                append_conv_block(spec, filter, width, ConvKind::temporal_shared, options);
            }
            spec.layers.push_back(FlattenDesc{});
            append_dense_block(spec, dense_units, options);
            spec.layers.push_back(SoftmaxDesc{classes});
            spec.validate();
            return spec;
        }
        case GuidanceKind::spectral: {
            // A (1, D) convolution collapses the spectral axis; the following
            // layers keep filter length 1 so no temporal structure is used.
            // With D = 1 every convolution degenerates to (1, 1).
            NetworkSpec spec;
            spec.input_time = time_len;
            spec.input_channels = channels;
            for (int i = 0; i < 3; ++i) {
                append_conv_block(spec, 1, width, ConvKind::full, options);
            }
            spec.layers.push_back(FlattenDesc{});
            append_dense_block(spec, dense_units, options);
            spec.layers.push_back(SoftmaxDesc{classes});
            spec.validate();
            return spec;
        }
    }
    throw std::invalid_argument("unreachable guidance kind");
}

int filter_for_reach(int reach_days, int grid_step_days) {
    if (reach_days < grid_step_days || reach_days % grid_step_days != 0) {
        throw DataError("reach of " + std::to_string(reach_days) +
                        " days is not a whole number of " + std::to_string(grid_step_days) +
                        "-day grid steps");
    }
    return 2 * (reach_days / grid_step_days) + 1;
}

std::vector<int> pooling_filter_schedule(int reach_days, int levels, int grid_step_days) {
    std::vector<int> filters;
    int step = grid_step_days;
    for (int level = 0; level < levels; ++level) {
        const int half_width = reach_days / step;  // grid steps at this scale
        filters.push_back(std::max(3, 2 * half_width + 1));
        step *= 2;  // width-2 pooling halves the resolution
    }
    return filters;
}

NetworkSpec build_pooling_variant(PoolVariant variant, int reach_days, int time_len, int channels,
                                  int classes, int grid_step_days, ArchOptions options, int width,
                                  int dense_units) {
    const bool local = variant != PoolVariant::gap;
    const bool global = variant != PoolVariant::mp && variant != PoolVariant::ap;
    const PoolKind local_kind =
        (variant == PoolVariant::mp || variant == PoolVariant::mp_gap) ? PoolKind::max : PoolKind::avg;

    NetworkSpec spec;
    spec.input_time = time_len;
    spec.input_channels = channels;

    const std::vector<int> filters =
        local ? pooling_filter_schedule(reach_days, 3, grid_step_days)
              : std::vector<int>(3, filter_for_reach(reach_days, grid_step_days));
    for (int i = 0; i < 3; ++i) {
        append_conv_block(spec, filters[i], width, ConvKind::full, options);
        if (local && i < 2) spec.layers.push_back(PoolDesc{local_kind, 2});
    }
    if (global) {
        spec.layers.push_back(GlobalAvgPoolDesc{});
    } else {
        spec.layers.push_back(FlattenDesc{});
    }
    append_dense_block(spec, dense_units, options);
    spec.layers.push_back(SoftmaxDesc{classes});
    spec.validate();
    return spec;
}

SweepGrid make_width_sweep(int time_len, int channels, int classes) {
    SweepGrid grid;
    for (const int width : {16, 32, 64, 128, 256, 512, 1024}) {
        grid.entries.emplace_back("width=" + std::to_string(width),
                                  build_tempcnn(time_len, channels, classes, width));
    }
    return grid;
}

SweepGrid make_depth_sweep(int time_len, int channels, int classes) {
    // (conv width, dense width) per depth, chosen to hold the trainable
    // parameter count near the reference model's operating point.
    static constexpr int kConvWidth[6] = {256, 128, 64, 32, 24, 16};
    static constexpr int kDenseWidth[6] = {64, 128, 256, 512, 768, 1024};
    SweepGrid grid;
    for (int depth = 1; depth <= 6; ++depth) {
        grid.entries.emplace_back(
            "depth=" + std::to_string(depth),
            build_tempcnn(time_len, channels, classes, kConvWidth[depth - 1], depth, 5,
                          kDenseWidth[depth - 1]));
    }
    return grid;
}

namespace {

int parse_int_option(const std::string& text, const std::string& key) {
    int value = 0;
    auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
    if (ec != std::errc() || ptr != text.data() + text.size()) {
        throw DataError("architecture option " + key + " expects an integer, got '" + text + "'");
    }
    return value;
}

// Parses "key=value,key=value" option tails.
std::vector<std::pair<std::string, std::string>> parse_options(const std::string& text) {
    std::vector<std::pair<std::string, std::string>> opts;
    std::size_t start = 0;
    while (start < text.size()) {
        std::size_t comma = text.find(',', start);
        if (comma == std::string::npos) comma = text.size();
        const std::string item = text.substr(start, comma - start);
        const std::size_t eq = item.find('=');
        if (eq == std::string::npos || eq == 0 || eq + 1 == item.size()) {
            throw DataError("malformed architecture option '" + item + "'");
        }
        opts.emplace_back(item.substr(0, eq), item.substr(eq + 1));
        start = comma + 1;
    }
    return opts;
}

} // namespace

NetworkSpec build_by_name(const std::string& name, int time_len, int channels, int classes,
                          ArchOptions options) {
    const std::size_t colon = name.find(':');
    const std::string head = name.substr(0, colon);
    const std::string tail = colon == std::string::npos ? "" : name.substr(colon + 1);

    if (head == "tempcnn") {
        int width = 64, depth = 3, filter = 5, dense = 256;
        for (const auto& [key, value] : parse_options(tail)) {
            if (key == "width") width = parse_int_option(value, key);
            else if (key == "depth") depth = parse_int_option(value, key);
            else if (key == "filter") filter = parse_int_option(value, key);
            else if (key == "dense") dense = parse_int_option(value, key);
            else throw DataError("unknown tempcnn option '" + key + "'");
        }
        return build_tempcnn(time_len, channels, classes, width, depth, filter, dense, options);
    }
    if (head == "fc") {
        int width = 1024;
        for (const auto& [key, value] : parse_options(tail)) {
            if (key == "width") width = parse_int_option(value, key);
            else throw DataError("unknown fc option '" + key + "'");
        }
        return build_fc_baseline(time_len, channels, classes, width, options);
    }
    if (head == "guidance") {
        if (tail.empty()) throw DataError("guidance needs a kind, e.g. guidance:temporal");
        return build_guidance(parse_guidance(tail), time_len, channels, classes, 5, options);
    }
    if (head == "pool") {
        const std::size_t second = tail.find(':');
        if (second == std::string::npos) {
            throw DataError("pool needs a variant and reach, e.g. pool:ap+gap:reach=8");
        }
        const PoolVariant variant = parse_pool_variant(tail.substr(0, second));
        int reach = 0;
        for (const auto& [key, value] : parse_options(tail.substr(second + 1))) {
            if (key == "reach") reach = parse_int_option(value, key);
            else throw DataError("unknown pool option '" + key + "'");
        }
        if (reach <= 0) throw DataError("pool variant needs reach=<days>");
        return build_pooling_variant(variant, reach, time_len, channels, classes, 2, options);
    }
    throw DataError("unknown architecture '" + name + "'");
}

} // namespace sits
