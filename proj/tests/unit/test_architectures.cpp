#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "sits/architectures.hpp"
#include "sits/errors.hpp"
#include "sits/network.hpp"

#include <algorithm>

using namespace sits;

namespace {

int count_layers(const NetworkSpec& spec, auto predicate) {
    int n = 0;
    for (const auto& layer : spec.layers) {
        if (predicate(layer)) ++n;
    }
    return n;
}

bool is_conv(const LayerDesc& d) { return std::holds_alternative<ConvDesc>(d); }

} // namespace

TEST_CASE("reference network structure") {
    const NetworkSpec spec = build_tempcnn(149, 3, 13);
    CHECK(count_layers(spec, is_conv) == 3);
    CHECK(count_layers(spec, [](const LayerDesc& d) {
              return std::holds_alternative<BatchNormDesc>(d);
          }) == 4);  // three conv blocks plus the dense block
    CHECK(count_layers(spec, [](const LayerDesc& d) {
              return std::holds_alternative<DropoutDesc>(d);
          }) == 4);
    CHECK(spec.num_classes() == 13);

    // parameter count near the reference operating point of ~2.5M
    const long long params = param_count(spec);
    CHECK(params > 2'000'000);
    CHECK(params < 3'000'000);

    // depth 0 degenerates to a dense-only network
    const NetworkSpec dense_only = build_tempcnn(149, 3, 13, 64, 0);
    CHECK(count_layers(dense_only, is_conv) == 0);
    CHECK_NOTHROW(dense_only.validate());
}

TEST_CASE("fc baseline flattens the original-sampling features") {
    const NetworkSpec spec = build_fc_baseline(46, 3, 13);
    CHECK(count_layers(spec, is_conv) == 0);
    // first dense takes the 138 flattened features
    const long long expected = (138LL * 1024 + 1024) + 2LL * 1024          // dense1 + bn
                               + 2 * (1024LL * 1024 + 1024 + 2LL * 1024)   // dense2/3 + bn
                               + (1024LL * 13 + 13);                       // softmax
    CHECK(param_count(spec) == expected);
}

TEST_CASE("guidance variants") {
    const NetworkSpec none = build_guidance(GuidanceKind::none, 46, 3, 13);
    CHECK(none == build_fc_baseline(46, 3, 13));

    const NetworkSpec spectro = build_guidance(GuidanceKind::spectro_temporal, 149, 3, 13);
    CHECK(spectro == build_tempcnn(149, 3, 13));

    const NetworkSpec temporal = build_guidance(GuidanceKind::temporal, 149, 3, 13);
    for (const auto& layer : temporal.layers) {
        if (const auto* conv = std::get_if<ConvDesc>(&layer)) {
            CHECK(conv->kind == ConvKind::temporal_shared);
        }
    }
    CHECK(param_count(temporal) < param_count(spectro));

    // spectral guidance degenerates to (1,1) convolutions when D = 1
    const NetworkSpec spectral = build_guidance(GuidanceKind::spectral, 149, 1, 13);
    for (const auto& layer : spectral.layers) {
        if (const auto* conv = std::get_if<ConvDesc>(&layer)) {
            CHECK(conv->filter_len == 1);
        }
    }
}

TEST_CASE("reach-to-filter conversion matches the studied grid") {
    const std::vector<std::pair<int, int>> expected{{2, 3}, {4, 5}, {8, 9}, {16, 17}, {32, 33}};
    for (const auto& [reach, filter] : expected) {
        CHECK(filter_for_reach(reach, 2) == filter);
    }
    CHECK_THROWS_AS(filter_for_reach(3, 2), DataError);
}

TEST_CASE("pooling filter schedule keeps the reach constant across scales") {
    CHECK(pooling_filter_schedule(8, 3, 2) == std::vector<int>{9, 5, 3});
    CHECK(pooling_filter_schedule(2, 3, 2) == std::vector<int>{3, 3, 3});
    CHECK(pooling_filter_schedule(4, 3, 2) == std::vector<int>{5, 3, 3});
    CHECK(pooling_filter_schedule(16, 3, 2) == std::vector<int>{17, 9, 5});
    CHECK(pooling_filter_schedule(32, 3, 2) == std::vector<int>{33, 17, 9});
}

TEST_CASE("pooling variants wire the expected layers") {
    const NetworkSpec mp = build_pooling_variant(PoolVariant::mp, 8, 149, 3, 13);
    CHECK(count_layers(mp, [](const LayerDesc& d) {
              const auto* p = std::get_if<PoolDesc>(&d);
              return p && p->kind == PoolKind::max;
          }) == 2);
    CHECK(count_layers(mp, [](const LayerDesc& d) {
              return std::holds_alternative<GlobalAvgPoolDesc>(d);
          }) == 0);

    const NetworkSpec ap_gap = build_pooling_variant(PoolVariant::ap_gap, 8, 149, 3, 13);
    CHECK(count_layers(ap_gap, [](const LayerDesc& d) {
              const auto* p = std::get_if<PoolDesc>(&d);
              return p && p->kind == PoolKind::avg;
          }) == 2);
    CHECK(count_layers(ap_gap, [](const LayerDesc& d) {
              return std::holds_alternative<GlobalAvgPoolDesc>(d);
          }) == 1);

    const NetworkSpec gap = build_pooling_variant(PoolVariant::gap, 8, 149, 3, 13);
    CHECK(count_layers(gap, [](const LayerDesc& d) {
              return std::holds_alternative<PoolDesc>(d);
          }) == 0);

    // the global pool collapses the dense input to the channel count
    CHECK(param_count(gap) * 5 < param_count(build_tempcnn(149, 3, 13, 64, 3, 9)));
}

TEST_CASE("width sweep spans seven members whose extremes cover the studied range") {
    const SweepGrid grid = make_width_sweep(149, 3, 13);
    REQUIRE(grid.entries.size() == 7);
    const long long smallest = param_count(grid.entries.front().second);
    const long long largest = param_count(grid.entries.back().second);
    CHECK(smallest < largest);
    // reference range: about 320,000 to 50 million, required within 2x
    CHECK(smallest >= 160'000);
    CHECK(smallest <= 640'000);
    CHECK(largest >= 25'000'000);
    CHECK(largest <= 100'000'000);
}

TEST_CASE("depth sweep holds the parameter count within +-20% of the median") {
    const SweepGrid grid = make_depth_sweep(149, 3, 13);
    REQUIRE(grid.entries.size() == 6);
    std::vector<long long> counts;
    for (const auto& [name, spec] : grid.entries) counts.push_back(param_count(spec));
    std::vector<long long> sorted = counts;
    std::sort(sorted.begin(), sorted.end());
    const double median = 0.5 * (sorted[2] + sorted[3]);
    for (const long long c : counts) {
        CHECK(static_cast<double>(c) >= 0.8 * median);
        CHECK(static_cast<double>(c) <= 1.2 * median);
    }
    // depths really do increase
    for (int depth = 1; depth <= 6; ++depth) {
        CHECK(count_layers(grid.entries[depth - 1].second, is_conv) == depth);
    }
}

TEST_CASE("every builder output allocates exactly param_count scalars") {
    std::vector<NetworkSpec> specs;
    specs.push_back(build_tempcnn(30, 3, 5));
    specs.push_back(build_fc_baseline(30, 3, 5, 32));
    for (const auto kind : {GuidanceKind::none, GuidanceKind::temporal, GuidanceKind::spectral,
                            GuidanceKind::spectro_temporal}) {
        specs.push_back(build_guidance(kind, 30, 3, 5, 5, {}, 8, 16));
    }
    for (const auto variant : {PoolVariant::mp, PoolVariant::ap, PoolVariant::mp_gap,
                               PoolVariant::ap_gap, PoolVariant::gap}) {
        specs.push_back(build_pooling_variant(variant, 8, 30, 3, 5, 2, {}, 8, 16));
    }
    for (const auto& spec : specs) {
        Network net(spec);
        CHECK(net.allocated_param_count() == param_count(spec));
    }
}

TEST_CASE("builders are addressable by name") {
    CHECK(build_by_name("tempcnn", 149, 3, 13) == build_tempcnn(149, 3, 13));
    CHECK(build_by_name("tempcnn:width=128,filter=9", 149, 3, 13) ==
          build_tempcnn(149, 3, 13, 128, 3, 9));
    CHECK(build_by_name("fc", 46, 3, 13) == build_fc_baseline(46, 3, 13));
    CHECK(build_by_name("guidance:temporal", 149, 3, 13) ==
          build_guidance(GuidanceKind::temporal, 149, 3, 13));
    CHECK(build_by_name("pool:ap+gap:reach=8", 149, 3, 13) ==
          build_pooling_variant(PoolVariant::ap_gap, 8, 149, 3, 13));

    CHECK_THROWS_AS(build_by_name("transformer", 149, 3, 13), DataError);
    CHECK_THROWS_AS(build_by_name("tempcnn:width=", 149, 3, 13), DataError);
    CHECK_THROWS_AS(build_by_name("pool:ap+gap", 149, 3, 13), DataError);
}
