#include "nimbus/binning.hpp"

#include <cmath>
#include <string>

namespace nimbus {

int RateBinning::bin_of(double rate) const {
  NIMBUS_CHECK(std::isfinite(rate), "rate must be finite");
  NIMBUS_CHECK(rate >= 0.0, "rate must be non-negative, got " + std::to_string(rate));
  const int idx = static_cast<int>(std::floor(rate / bin_width));
  return idx >= bin_count ? bin_count - 1 : idx;
}

LeadTime LeadTime::from_minutes(int minutes, int max_minutes) {
  NIMBUS_CHECK(minutes >= kStepMinutes && minutes <= max_minutes &&
                   minutes % kStepMinutes == 0,
               "lead time must be an even number of minutes in [2," +
                   std::to_string(max_minutes) + "], got " + std::to_string(minutes));
  return LeadTime{minutes};
}

LeadTime LeadTime::from_index(int index, int max_minutes) {
  return from_minutes((index + 1) * kStepMinutes, max_minutes);
}

}  // namespace nimbus
