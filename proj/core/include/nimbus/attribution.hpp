#pragma once

#include <string>
#include <vector>

#include "nimbus/dataset.hpp"
#include "nimbus/model.hpp"

namespace nimbus {

/// Reduction of the forecast to a single differentiable scalar.
struct OutputSpec {
  enum class Kind { MeanExceedance, PixelExceedance };
  Kind kind = Kind::MeanExceedance;
  double rate = 0.2;       // exceedance level
  int pixel_y = 0, pixel_x = 0;  // for PixelExceedance
  Tensor mask;             // optional [T,T] weights for the mean; empty = uniform

  static OutputSpec mean_exceedance(double rate, Tensor mask = {});
  static OutputSpec pixel_exceedance(int y, int x, double rate);
};

/// Per-set attributions mirroring the input tensors, with the completeness
/// bookkeeping recorded alongside.
struct AttributionMap {
  std::vector<std::string> set_names;
  std::vector<Tensor> attributions;  // same shapes as the model inputs
  double completeness_residual = 0.0;
  double f_input = 0.0;
  double f_baseline = 0.0;
  int steps = 0;
};

/// Per-channel minima over a reference set, broadcast to input shape.
ModelInputs baseline_of(const std::vector<const ModelInputs*>& reference, const InputSpec& spec);
ModelInputs baseline_of(const std::vector<Sample>& reference, const InputSpec& spec);

/// Midpoint-rule path integral of gradients from baseline to input:
/// (x - x') .* mean_i grad f(x' + (i-0.5)/steps * (x - x')).
AttributionMap integrated_gradients(const MetNet2& model, const ModelInputs& input,
                                    const ModelInputs& baseline, int steps,
                                    const LeadTime& lead, const OutputSpec& output,
                                    TargetKind kind = TargetKind::Instantaneous);

/// Evaluates the OutputSpec scalar without gradients.
double output_scalar(const MetNet2& model, const ModelInputs& input, const LeadTime& lead,
                     const OutputSpec& output, TargetKind kind = TargetKind::Instantaneous);

struct FeatureImportance {
  std::string feature;
  double importance = 0.0;
};

/// Mean attribution magnitude per (set, slice, channel) feature across space
/// and maps. `signed_mean` switches to the signed average.
std::vector<FeatureImportance> aggregate_global(const std::vector<AttributionMap>& maps,
                                                const InputSpec& spec,
                                                bool signed_mean = false);

std::string importance_table_csv(
    const std::vector<std::pair<int, std::vector<FeatureImportance>>>& by_lead_minutes);

/// Zero-centered diverging heatmap of one [H,W] attribution plane.
std::string attribution_map_svg(const Tensor& plane);

}  // namespace nimbus
