#pragma once

#include "sits/network.hpp"

#include <string>
#include <utility>
#include <vector>

namespace sits {

/// Which data dimensions the network's weight sharing exploits.
enum class GuidanceKind { none, temporal, spectral, spectro_temporal };

std::string to_string(GuidanceKind k);
GuidanceKind parse_guidance(const std::string& s);

/// Pooling layout of a pooling-study variant: local max/avg pooling between
/// convolutions, optionally a global average pool instead of the flatten, or
/// the global pool alone.
enum class PoolVariant { mp, ap, mp_gap, ap_gap, gap };

std::string to_string(PoolVariant v);
PoolVariant parse_pool_variant(const std::string& s);

/// Regularization toggles threaded through the builders. Weight decay and the
/// validation set are training-time mechanisms and live in TrainConfig.
struct ArchOptions {
    double dropout_rate = 0.5;
    bool batch_norm = true;
};

/// Reference network: `depth` conv blocks (conv + batch norm + ReLU +
/// dropout) of `width` units and filter length `filter`, a flatten, one dense
/// block, and the softmax layer.
NetworkSpec build_tempcnn(int time_len, int channels, int classes, int width = 64, int depth = 3,
                          int filter = 5, int dense_units = 256, ArchOptions options = {});

/// No-guidance baseline: three dense blocks of `width` units on the flattened
/// series.
NetworkSpec build_fc_baseline(int time_len, int channels, int classes, int width = 1024,
                              ArchOptions options = {});

/// The four guidance levels: none delegates to the FC baseline; temporal uses
/// channel-shared (f, 1) filters; spectral opens with a (1, D) convolution
/// that collapses the spectral axis, followed by (1, 1) convolutions;
/// spectro-temporal is the reference network.
NetworkSpec build_guidance(GuidanceKind kind, int time_len, int channels, int classes,
                           int filter = 5, ArchOptions options = {}, int width = 64,
                           int dense_units = 256);

/// Filter length on a regular grid for a temporal reach expressed in days:
/// a filter of length f spans (f-1)/2 grid steps on each side.
int filter_for_reach(int reach_days, int grid_step_days);

/// Per-level filter lengths that hold the reach constant while local pooling
/// halves the resolution after each convolution: the filter shrinks by the
/// pooling factor at every level, floored at the minimum odd length 3.
/// Reach 8 days on a 2-day grid gives (9, 5, 3).
std::vector<int> pooling_filter_schedule(int reach_days, int levels, int grid_step_days);

/// Pooling-study variant with a constant temporal reach. Local variants
/// interleave width-2 pools between the three convolutions and shrink the
/// filters per pooling_filter_schedule; GAP variants replace the flatten with
/// a global average pool.
NetworkSpec build_pooling_variant(PoolVariant variant, int reach_days, int time_len, int channels,
                                  int classes, int grid_step_days = 2, ArchOptions options = {},
                                  int width = 64, int dense_units = 256);

struct SweepGrid {
    std::vector<std::pair<std::string, NetworkSpec>> entries;
    TrainConfig config;
};

/// Seven members with conv widths {16, 32, 64, 128, 256, 512, 1024} at depth 3.
SweepGrid make_width_sweep(int time_len, int channels, int classes);

/// Six members of depth 1..6 whose (conv width, dense width) pairs are chosen
/// so the trainable parameter counts stay within +-20% of the grid median.
SweepGrid make_depth_sweep(int time_len, int channels, int classes);

/// Builder addressable by name, the grammar used by the CLI:
///   tempcnn[:width=W,depth=L,filter=F,dense=U]
///   fc[:width=W]
///   guidance:{none|temporal|spectral|spectro-temporal}
///   pool:{mp|ap|mp+gap|ap+gap|gap}:reach=R
/// Throws DataError on an unknown name or malformed option.
NetworkSpec build_by_name(const std::string& name, int time_len, int channels, int classes,
                          ArchOptions options = {});

} // namespace sits
