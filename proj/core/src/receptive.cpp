#include "nimbus/receptive.hpp"

#include <algorithm>

namespace nimbus {

int receptive_field(const std::vector<ScheduleEntry>& schedule, int kernel_extent) {
  NIMBUS_CHECK(kernel_extent >= 1 && kernel_extent % 2 == 1, "kernel extent must be odd");
  int extent = 1;
  for (const ScheduleEntry& e : schedule) {
    NIMBUS_CHECK(e.dilation >= 1 && e.convs >= 0, "bad schedule entry");
    extent += e.convs * e.dilation * (kernel_extent - 1);
  }
  return extent;
}

HaloPlan halo_plan(const std::vector<ScheduleEntry>& schedule, int grid, int tile_extent,
                   int kernel_extent) {
  NIMBUS_CHECK(grid >= 1 && tile_extent >= 1, "bad grid geometry");
  NIMBUS_CHECK(kernel_extent >= 1 && kernel_extent % 2 == 1, "kernel extent must be odd");
  const long long full = static_cast<long long>(grid) * tile_extent;

  HaloPlan plan;
  plan.grid = grid;
  plan.tile_extent = tile_extent;
  for (const ScheduleEntry& e : schedule) {
    const int h = e.dilation * (kernel_extent - 1) / 2;
    NIMBUS_CHECK(h <= full, "halo of " + std::to_string(h) +
                                " exceeds the full grid extent " + std::to_string(full));
    HaloLayer layer;
    layer.dilation = e.dilation;
    layer.halo = h;
    layer.depth_into_adjacent = std::min(h, tile_extent);
    layer.touches_diagonal = h > 0 && grid > 1;
    layer.spans_past_adjacent = h > tile_extent;
    // ring around an interior tile: (t+2h)^2 - t^2 = 4 t h + 4 h^2
    layer.interior_fetch_cells =
        4LL * tile_extent * h + 4LL * static_cast<long long>(h) * h;

    // exact per-tile count, clipping the fetch window at the grid boundary
    long long grid_total = 0;
    for (int ty = 0; ty < grid; ++ty) {
      for (int tx = 0; tx < grid; ++tx) {
        const long long y0 = std::max<long long>(0, static_cast<long long>(ty) * tile_extent - h);
        const long long y1 =
            std::min<long long>(full, static_cast<long long>(ty + 1) * tile_extent + h);
        const long long x0 = std::max<long long>(0, static_cast<long long>(tx) * tile_extent - h);
        const long long x1 =
            std::min<long long>(full, static_cast<long long>(tx + 1) * tile_extent + h);
        grid_total += (y1 - y0) * (x1 - x0) -
                      static_cast<long long>(tile_extent) * tile_extent;
      }
    }
    layer.grid_fetch_cells = grid_total;
    for (int cidx = 0; cidx < e.convs; ++cidx) {
      plan.total_grid_fetch_cells += layer.grid_fetch_cells;
      plan.layers.push_back(layer);
    }
  }
  return plan;
}

}  // namespace nimbus
