#pragma once

#include <map>
#include <string>
#include <vector>

#include "nimbus/binning.hpp"
#include "nimbus/receptive.hpp"
#include "nimbus/tape.hpp"

namespace nimbus {

// How the lead-time embedding reaches the convolutions.
//  Film:        per-conv bias then scale, both projected from the embedding
//  AddOnly:     per-conv bias only
//  ConcatInput: embedding tiled onto the encoder input, no per-conv terms
enum class Conditioning { Film, AddOnly, ConcatInput };

// Which observation sets feed the network.
//  Default:     radar + satellite + assimilation + geo + time
//  Postprocess: nwp forecast + geo + time only
//  Hybrid:      everything
enum class InputMode { Default, Postprocess, Hybrid };

const char* to_string(Conditioning c);
const char* to_string(InputMode m);
Conditioning conditioning_from_string(const std::string& s);
InputMode input_mode_from_string(const std::string& s);

struct ModelConfig {
  int context_extent = 64;  // positions per side after the 4x downsample
  int target_extent = 32;   // native positions per side
  int crop_extent = 8;      // centered window, == target_extent / 4
  int lstm_channels = 16;
  int encoder_channels = 32;
  int stack_count = 2;
  int blocks_per_stack = 4;
  std::vector<int> dilation_schedule{1, 2, 4, 8};  // one entry per block, reused per stack
  int upsampler_blocks = 2;
  int upsampler_channels = 32;
  int leadtime_net_layers = 2;
  int leadtime_net_features = 64;
  int bin_count = 64;
  double bin_width = 0.2;
  int lead_count = 60;  // one-hot size; valid lead indices are [0, lead_count)
  Conditioning conditioning = Conditioning::Film;

  static ModelConfig desk();
  /// Full-scale configuration: 3 stacks of 8 blocks, dilations 1..128.
  static ModelConfig paper();
  /// Variant with 18 encoder blocks total (3 stacks of 6).
  static ModelConfig paper_18_blocks();

  void validate() const;
  RateBinning binning() const { return RateBinning{bin_count, bin_width}; }
  int max_lead_minutes() const { return lead_count * LeadTime::kStepMinutes; }
  /// Encoder schedule flattened across stacks, two convolutions per block.
  std::vector<ScheduleEntry> conv_schedule() const;
};

/// Channel/slice layout of the assembled network input.
struct InputSpec {
  bool radar = true, satellite = true, assim = true, geo = true, time = true, nwp = false;
  int radar_slices = 13, sat_slices = 3, assim_slices = 3;
  int sat_channels = 2, assim_channels = 4;
  int geo_channels = 3, time_channels = 3, nwp_channels = 2;

  static InputSpec for_mode(InputMode mode, int sat_channels = 2, int assim_channels = 4);

  int time_steps() const;
  int step_channels() const;  // channels per assembled time step
};

/// Names for every (set, slice, channel) input feature, in the order the
/// attribution module flattens them.
std::vector<std::string> input_feature_names(const InputSpec& spec);

/// Per-set input tensors at context resolution, oldest slice first.
struct ModelInputs {
  Tensor radar;       // [R,H,W,1]
  Tensor satellite;   // [S,H,W,sat_channels]
  Tensor assim;       // [A,H,W,assim_channels]
  Tensor geo;         // [1,H,W,3]
  Tensor time_feats;  // [1,H,W,3]
  Tensor nwp;         // [1,H,W,2], empty unless generated
};

/// Ordered parameter store; iteration order is creation order and is the
/// deterministic order used by the optimizer and checkpoints.
class Params {
 public:
  int add(std::string name, Tensor t);
  int index_of(const std::string& name) const;  // -1 if absent
  Tensor& at(const std::string& name);
  const Tensor& at(const std::string& name) const;
  Tensor& at(int i) { return tensors_[static_cast<std::size_t>(i)]; }
  const Tensor& at(int i) const { return tensors_[static_cast<std::size_t>(i)]; }
  const std::string& name(int i) const { return names_[static_cast<std::size_t>(i)]; }
  int count() const { return static_cast<int>(names_.size()); }
  std::int64_t total_size() const;

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
};

struct ForecastDistribution {
  Tensor probs;  // [target_extent, target_extent, bin_count]
  LeadTime lead;
  RateBinning binning;
};

class MetNet2 {
 public:
  MetNet2(ModelConfig config, InputSpec spec, std::uint64_t seed);

  struct ForwardNodes {
    Tape::NodeId logits = -1;  // [target, target, bins]
    Tape::NodeId probs = -1;
    // leaves of the active sets, ordered radar, satellite, assim, geo, time, nwp
    std::vector<Tape::NodeId> input_leaves;
    std::vector<std::string> input_leaf_sets;
    // one leaf per parameter, aligned with Params indices
    std::vector<Tape::NodeId> param_nodes;
  };

  /// Builds the whole network on the tape and returns the output nodes.
  /// `inputs_require_grad` turns the observation tensors into differentiable
  /// leaves (needed for attribution, wasted work during training).
  ForwardNodes build_forward(Tape& tape, const ModelInputs& in, const LeadTime& lead,
                             TargetKind kind, bool inputs_require_grad = false) const;

  /// Convenience forward pass with no gradient bookkeeping kept.
  ForecastDistribution forward(const ModelInputs& in, const LeadTime& lead,
                               TargetKind kind = TargetKind::Instantaneous) const;

  /// The continuous lead-time conditioning vector (exposed for tests).
  Tape::NodeId embed_lead(Tape& tape, const LeadTime& lead, TargetKind kind) const;

  Params& params() { return params_; }
  const Params& params() const { return params_; }
  const ModelConfig& config() const { return config_; }
  const InputSpec& input_spec() const { return spec_; }

  /// Smallest |preactivation| that reached a rectifier in the last
  /// build_forward on this thread; used by the finite-difference harness to
  /// reject points too close to a kink.
  static double last_min_relu_gap();

 private:
  Tape::NodeId condition(Tape& tape, Tape::NodeId x, Tape::NodeId emb,
                         const std::string& prefix,
                         const std::vector<Tape::NodeId>& param_nodes) const;
  ModelConfig config_;
  InputSpec spec_;
  Params params_;
};

/// Saves parameters as one TNSR1 file per tensor plus manifest.txt.
void save_checkpoint(const std::string& dir, const Params& params,
                     const std::map<std::string, std::string>& manifest);
std::map<std::string, std::string> load_checkpoint(const std::string& dir, Params* params);

std::map<std::string, std::string> model_config_manifest(const ModelConfig& cfg,
                                                         const InputSpec& spec);
ModelConfig model_config_from_manifest(const std::map<std::string, std::string>& kv);
InputSpec input_spec_from_manifest(const std::map<std::string, std::string>& kv);

}  // namespace nimbus
