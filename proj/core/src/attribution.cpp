#include "nimbus/attribution.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "nimbus/svg.hpp"

namespace nimbus {

OutputSpec OutputSpec::mean_exceedance(double rate, Tensor mask) {
  OutputSpec s;
  s.kind = Kind::MeanExceedance;
  s.rate = rate;
  s.mask = std::move(mask);
  return s;
}

OutputSpec OutputSpec::pixel_exceedance(int y, int x, double rate) {
  OutputSpec s;
  s.kind = Kind::PixelExceedance;
  s.rate = rate;
  s.pixel_y = y;
  s.pixel_x = x;
  return s;
}

namespace {

struct SetView {
  const char* name;
  Tensor ModelInputs::*member;
  bool InputSpec::*active;
};

constexpr SetView kSetViews[] = {
    {"radar", &ModelInputs::radar, &InputSpec::radar},
    {"satellite", &ModelInputs::satellite, &InputSpec::satellite},
    {"assim", &ModelInputs::assim, &InputSpec::assim},
    {"geo", &ModelInputs::geo, &InputSpec::geo},
    {"time", &ModelInputs::time_feats, &InputSpec::time},
    {"nwp", &ModelInputs::nwp, &InputSpec::nwp},
};

Tensor& member_of(ModelInputs& in, Tensor ModelInputs::*member) { return in.*member; }

// scalar node per the OutputSpec, built on top of the probs node
Tape::NodeId output_node(Tape& tape, Tape::NodeId probs, const RateBinning& binning,
                         const OutputSpec& spec) {
  const Tensor& p = tape.value(probs);
  const int bins = p.dim(p.rank() - 1);
  const int k = std::max(0, static_cast<int>(std::ceil(spec.rate / binning.bin_width - 1e-9)));
  NIMBUS_CHECK(k < bins, "exceedance rate above the last bucket");
  Tape::NodeId exceed = tape.sum_last(tape.slice_last(probs, k, bins));  // [T,T]
  const Tensor& e = tape.value(exceed);
  Tensor weights(e.shape());
  if (spec.kind == OutputSpec::Kind::PixelExceedance) {
    weights.at2(spec.pixel_y, spec.pixel_x) = 1.0;
  } else if (spec.mask.empty()) {
    weights.fill(1.0 / static_cast<double>(e.size()));
  } else {
    NIMBUS_CHECK(spec.mask.same_shape(e), "output mask shape mismatch");
    const double total = spec.mask.sum();
    NIMBUS_CHECK(total > 0.0, "output mask selects no pixels");
    for (std::int64_t i = 0; i < weights.size(); ++i) weights[i] = spec.mask[i] / total;
  }
  return tape.weighted_sum(exceed, weights);
}

}  // namespace

ModelInputs baseline_of(const std::vector<const ModelInputs*>& reference,
                        const InputSpec& spec) {
  NIMBUS_CHECK(!reference.empty(), "baseline needs a nonempty reference set");
  ModelInputs out = *reference.front();
  for (const SetView& view : kSetViews) {
    if (!(spec.*(view.active))) continue;
    Tensor& t = member_of(out, view.member);
    if (t.empty()) continue;
    const int channels = t.dim(3);
    // one minimum per channel across samples, slices and space
    std::vector<double> mins(static_cast<std::size_t>(channels),
                             std::numeric_limits<double>::infinity());
    for (const ModelInputs* in : reference) {
      const Tensor& src = in->*(view.member);
      NIMBUS_CHECK(src.same_shape(t), "reference inputs disagree in shape");
      for (std::int64_t i = 0; i < src.size(); ++i) {
        const int c = static_cast<int>(i % channels);
        mins[static_cast<std::size_t>(c)] = std::min(mins[static_cast<std::size_t>(c)], src[i]);
      }
    }
    for (std::int64_t i = 0; i < t.size(); ++i)
      t[i] = mins[static_cast<std::size_t>(i % channels)];
  }
  return out;
}

ModelInputs baseline_of(const std::vector<Sample>& reference, const InputSpec& spec) {
  std::vector<const ModelInputs*> refs;
  refs.reserve(reference.size());
  for (const Sample& s : reference) refs.push_back(&s.inputs);
  return baseline_of(refs, spec);
}

double output_scalar(const MetNet2& model, const ModelInputs& input, const LeadTime& lead,
                     const OutputSpec& spec, TargetKind kind) {
  Tape tape;
  MetNet2::ForwardNodes nodes = model.build_forward(tape, input, lead, kind, false);
  return tape.value(output_node(tape, nodes.probs, model.config().binning(), spec))[0];
}

AttributionMap integrated_gradients(const MetNet2& model, const ModelInputs& input,
                                    const ModelInputs& baseline, int steps,
                                    const LeadTime& lead, const OutputSpec& spec,
                                    TargetKind kind) {
  NIMBUS_CHECK(steps >= 2, "integrated gradients needs steps >= 2");
  const InputSpec& ispec = model.input_spec();

  AttributionMap map;
  map.steps = steps;

  // active sets in the order build_forward exposes its leaves
  std::vector<const SetView*> active;
  for (const SetView& view : kSetViews)
    if (ispec.*(view.active)) active.push_back(&view);

  std::vector<Tensor> grad_sums;
  for (const SetView* view : active)
    grad_sums.emplace_back((input.*(view->member)).shape());

  for (int i = 1; i <= steps; ++i) {
    const double alpha = (static_cast<double>(i) - 0.5) / steps;
    ModelInputs point = input;
    for (const SetView* view : active) {
      Tensor& t = member_of(point, view->member);
      const Tensor& x = input.*(view->member);
      const Tensor& x0 = baseline.*(view->member);
      NIMBUS_CHECK(x.same_shape(x0), "baseline shape mismatch for set " + std::string(view->name));
      for (std::int64_t j = 0; j < t.size(); ++j) t[j] = x0[j] + alpha * (x[j] - x0[j]);
    }
    Tape tape;
    MetNet2::ForwardNodes nodes = model.build_forward(tape, point, lead, kind, true);
    Tape::NodeId scalar = output_node(tape, nodes.probs, model.config().binning(), spec);
    tape.backward(scalar);
    for (std::size_t v = 0; v < active.size(); ++v) {
      const Tensor& g = tape.grad(nodes.input_leaves[v]);
      if (!g.all_finite()) throw NumericError("non-finite gradient on the attribution path");
      Tensor& acc = grad_sums[v];
      for (std::int64_t j = 0; j < acc.size(); ++j) acc[j] += g[j];
    }
  }

  double attr_total = 0.0;
  for (std::size_t v = 0; v < active.size(); ++v) {
    const Tensor& x = input.*(active[v]->member);
    const Tensor& x0 = baseline.*(active[v]->member);
    Tensor attr(x.shape());
    for (std::int64_t j = 0; j < attr.size(); ++j) {
      attr[j] = (x[j] - x0[j]) * grad_sums[v][j] / steps;
      attr_total += attr[j];
    }
    map.set_names.emplace_back(active[v]->name);
    map.attributions.push_back(std::move(attr));
  }

  map.f_input = output_scalar(model, input, lead, spec, kind);
  map.f_baseline = output_scalar(model, baseline, lead, spec, kind);
  map.completeness_residual = std::abs(attr_total - (map.f_input - map.f_baseline));
  return map;
}

std::vector<FeatureImportance> aggregate_global(const std::vector<AttributionMap>& maps,
                                                const InputSpec& spec, bool signed_mean) {
  NIMBUS_CHECK(!maps.empty(), "aggregate_global of an empty collection");
  const std::vector<std::string> names = input_feature_names(spec);

  std::vector<double> sums(names.size(), 0.0);
  std::vector<double> counts(names.size(), 0.0);
  for (const AttributionMap& map : maps) {
    std::size_t feature = 0;
    for (std::size_t v = 0; v < map.attributions.size(); ++v) {
      const Tensor& attr = map.attributions[v];
      const int slices = attr.dim(0), h = attr.dim(1), w = attr.dim(2), c = attr.dim(3);
      for (int s = 0; s < slices; ++s)
        for (int ch = 0; ch < c; ++ch) {
          const std::size_t f = feature + static_cast<std::size_t>(s) * c + ch;
          NIMBUS_CHECK(f < names.size(), "feature layout mismatch");
          for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
              const double a = attr.at4(s, y, x, ch);
              sums[f] += signed_mean ? a : std::abs(a);
              counts[f] += 1.0;
            }
        }
      feature += static_cast<std::size_t>(slices) * c;
    }
    NIMBUS_CHECK(feature == names.size(), "attribution maps do not cover every feature");
  }

  std::vector<FeatureImportance> out;
  for (std::size_t f = 0; f < names.size(); ++f)
    out.push_back(FeatureImportance{names[f], counts[f] > 0 ? sums[f] / counts[f] : 0.0});
  return out;
}

std::string importance_table_csv(
    const std::vector<std::pair<int, std::vector<FeatureImportance>>>& by_lead_minutes) {
  std::ostringstream out;
  out << "channel_name,lead_minutes,importance\n";
  for (const auto& [lead, table] : by_lead_minutes)
    for (const FeatureImportance& f : table)
      out << f.feature << ',' << lead << ',' << format_double(f.importance) << "\n";
  return out.str();
}

std::string attribution_map_svg(const Tensor& plane) { return svg_heatmap(plane); }

}  // namespace nimbus
