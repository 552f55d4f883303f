#pragma once

#include "nimbus/common.hpp"

namespace nimbus {

/// Mapping between precipitation rate (mm/hr) and categorical buckets.
/// Bucket i covers [i*bin_width, (i+1)*bin_width); the last bucket also
/// absorbs everything at or above max_rate() - bin_width.
struct RateBinning {
  int bin_count = 512;
  double bin_width = 0.2;  // mm/hr

  double max_rate() const { return bin_count * bin_width; }
  double lower_edge(int bin) const { return bin * bin_width; }

  int bin_of(double rate) const;  // throws DataError on negative/non-finite rate
};

/// Forecast lead time on the 2-minute grid: minutes in [2, max_minutes]
/// stepping by 2, index == minutes/2 - 1.
struct LeadTime {
  int minutes = 2;

  static constexpr int kStepMinutes = 2;
  static constexpr int kMaxMinutes = 720;

  static LeadTime from_minutes(int minutes, int max_minutes = kMaxMinutes);
  static LeadTime from_index(int index, int max_minutes = kMaxMinutes);

  int index() const { return minutes / kStepMinutes - 1; }
  int hour_bucket() const { return (minutes + 59) / 60; }  // 1-based lead hour
};

enum class TargetKind { Instantaneous, Cumulative };

}  // namespace nimbus
