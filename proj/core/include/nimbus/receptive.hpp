#pragma once

#include <vector>

#include "nimbus/common.hpp"

namespace nimbus {

/// One residual-block entry of a dilation schedule: `convs` convolutions of
/// extent `kernel` sharing dilation `dilation`.
struct ScheduleEntry {
  int dilation = 1;
  int convs = 2;
};

/// Closed-form one-dimensional receptive-field extent of a chain of dilated
/// convolutions: 1 + sum over layers of dilation * (kernel - 1).
int receptive_field(const std::vector<ScheduleEntry>& schedule, int kernel_extent);

/// Analytical halo (boundary-exchange) plan for running the conv stack over
/// an N x N spatial partition. Nothing is executed; this reports what a
/// distributed run would have to fetch per layer.
struct HaloLayer {
  int dilation = 1;
  int halo = 0;                       // per-side width: dilation*(kernel-1)/2
  long long interior_fetch_cells = 0; // ring cells an interior tile reads
  long long grid_fetch_cells = 0;     // total cross-tile reads over the grid
  int depth_into_adjacent = 0;        // cells reached into a neighbor tile
  bool touches_diagonal = false;      // corner fetch hits diagonal tiles
  bool spans_past_adjacent = false;   // halo wider than one tile
};

struct HaloPlan {
  int grid = 0;
  int tile_extent = 0;
  std::vector<HaloLayer> layers;      // one per convolution, schedule order
  long long total_grid_fetch_cells = 0;
};

HaloPlan halo_plan(const std::vector<ScheduleEntry>& schedule, int grid, int tile_extent,
                   int kernel_extent);

}  // namespace nimbus
