#pragma once

#include <functional>
#include <string>
#include <vector>

#include "nimbus/binning.hpp"
#include "nimbus/model.hpp"
#include "nimbus/tnsr_io.hpp"
#include "nimbus/world.hpp"

namespace nimbus {

/// Random access to the precipitation field at a given step. Lets the
/// sampling pipeline run off a stored trajectory or a sliding window.
using PrecipSource = std::function<const Tensor&(int step)>;
PrecipSource trajectory_source(const Trajectory& traj);

/// Rate-like input channels (radar, satellite precip proxy, nwp) are stored
/// as log1p(rate); winds, latents, geo and time features stay in natural
/// units. Targets are raw mm/hr.
double norm_rate(double rate);

struct SampleGeometry {
  int context_extent = 64;  // post-downsample positions per side
  int target_extent = 32;   // native positions per side
  int radar_slices = 13;
  int sat_slices = 3;
  int assim_slices = 3;

  int native_context() const { return 4 * context_extent; }
  int history_steps() const { return radar_slices - 1; }
};

/// Degradation profile of the synthetic NWP forecast. Zero everything and
/// the forecast reproduces the true evolution exactly.
struct NwpDegradation {
  double wind_sigma = 0.0;  // stddev of the smooth wind perturbation, cells/step
  double blur_sigma = 0.0;  // gaussian blur applied to the forecast field
  double bias = 1.0;        // multiplicative bias
  int init_delay = 0;       // forecast starts from this many steps before t0
};

struct NwpForecast {
  Tensor instantaneous;  // [H,W] native, valid at t0+lead
  Tensor cumulative;     // [H,W] native, mean rate over the hour ending at t0+lead
};

/// Re-runs the world dynamics from t0 - delay with perturbed winds, then
/// blurs and biases the result.
NwpForecast synth_nwp(const World& world, const PrecipSource& precip, int t0,
                      const LeadTime& lead, const NwpDegradation& degradation);

struct Sample {
  ModelInputs inputs;
  int center_y = 0, center_x = 0;  // native world cell of the window center
  Tensor target;       // [target,target] mm/hr
  Tensor mask;         // [target,target] {0,1}
  Tensor persistence;  // [target,target] native rate at t0 (baseline support)
  Tensor nwp_target;   // [target,target] degraded forecast at native res (empty w/o nwp)
  LeadTime lead;
  TargetKind kind = TargetKind::Instantaneous;
  int t0 = 0;
};

/// Cuts one sample centered at (center_y, center_x) in native world cells;
/// negative coordinates mean the world center. The context window must fit.
Sample make_sample(const World& world, const PrecipSource& precip, int t0, const LeadTime& lead,
                   TargetKind kind, const SampleGeometry& geom, const Tensor& quality_mask,
                   const NwpDegradation* nwp = nullptr, int center_y = -1, int center_x = -1);

/// Drops all but the selected assimilation channels from a cut sample.
Sample restrict_assim_channels(const Sample& s, const std::vector<int>& channels);

/// Reporting buckets from the event-frequency table: 0, .2, 1, 2, 4, 8, >=20.
int reporting_bucket(double rate);
extern const std::vector<double> kReportingBucketEdges;  // {0.2, 1, 2, 4, 8, 20}
std::vector<std::string> reporting_bucket_labels();

/// Fraction of target pixels per reporting bucket.
std::vector<double> event_frequency(const std::vector<Sample>& samples);

/// Importance-sampling schedule. Weights act as per-bucket multipliers on
/// the natural sample frequency (uniform weights reproduce a uniform
/// shuffle); a sample's bucket is that of its max target pixel. Buckets that
/// are empty but positively weighted are dropped with a warning flag.
struct ResampleSchedule {
  std::vector<int> order;               // sample indices, one per draw
  std::vector<int> dropped_buckets;     // empty buckets that had weight
};
ResampleSchedule resample(const std::vector<Sample>& samples,
                          const std::vector<double>& bucket_weights, int draws,
                          std::uint64_t seed);
ResampleSchedule resample(const std::vector<int>& sample_buckets,
                          const std::vector<double>& bucket_weights, int draws,
                          std::uint64_t seed);

/// Disjoint t0 ranges with blackout gaps. A sample rooted at t0 touches
/// [t0 - history, t0 + max_lead]; ranges are spaced so that those spans,
/// padded by the blackout, never cross splits.
struct SplitPlan {
  int history = 12;
  int max_lead_steps = 60;
  int blackout_steps = 360;  // 12 hours at 2-minute steps
  int train_begin = 0, train_end = 0;  // half-open t0 ranges
  int val_begin = 0, val_end = 0;
  int test_begin = 0, test_end = 0;

  static SplitPlan layout(int history, int max_lead_steps, int train_span, int val_span,
                          int test_span, int blackout_steps = 360, int warmup_steps = 0);
  int total_steps() const { return test_end + max_lead_steps; }
  void validate() const;
  const char* split_of(int t0) const;  // "train" | "val" | "test" | ""
};

struct GenConfig {
  WorldConfig world;
  SampleGeometry geometry;
  std::uint64_t seed = 1;
  int warmup_steps = 240;  // spin-up before the first usable t0
  int trajectories = 2;
  int train_samples = 8192;
  int val_samples = 1024;
  int test_samples = 1024;
  int min_lead_minutes = 2;
  int max_lead_minutes = 120;
  bool with_nwp = false;
  bool cumulative = false;  // additionally emit hourly-cumulative samples
  NwpDegradation nwp_degradation;
  Dtype dtype = Dtype::F32;

};

struct SampleMeta {
  int id = 0;
  int trajectory = 0;
  int t0 = 0;
  int lead_minutes = 2;
  TargetKind kind = TargetKind::Instantaneous;
  std::string split;
  int bucket_max = 0;
  bool has_nwp = false;
};

struct DatasetIndex {
  std::vector<SampleMeta> entries;
  std::string dir;
};

/// Writes samples/sample_<id>.tnsr files, index.txt and gen.cfg.
DatasetIndex generate_dataset(const GenConfig& cfg, const std::string& dir);
DatasetIndex load_dataset_index(const std::string& dir);
Sample load_sample(const DatasetIndex& index, int id);

/// In-memory generation used by experiments: cuts `count` samples of the
/// given split directly from fresh trajectories.
std::vector<Sample> cut_samples(const GenConfig& cfg, const std::string& split, int count);

}  // namespace nimbus
