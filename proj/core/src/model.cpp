#include "nimbus/model.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>

#include "nimbus/tnsr_io.hpp"

namespace nimbus {

namespace fs = std::filesystem;

const char* to_string(Conditioning c) {
  switch (c) {
    case Conditioning::Film: return "film";
    case Conditioning::AddOnly: return "add_only";
    case Conditioning::ConcatInput: return "concat_input";
  }
  return "?";
}

const char* to_string(InputMode m) {
  switch (m) {
    case InputMode::Default: return "default";
    case InputMode::Postprocess: return "postprocess";
    case InputMode::Hybrid: return "hybrid";
  }
  return "?";
}

Conditioning conditioning_from_string(const std::string& s) {
  if (s == "film") return Conditioning::Film;
  if (s == "add_only") return Conditioning::AddOnly;
  if (s == "concat_input") return Conditioning::ConcatInput;
  throw UsageError("unknown conditioning '" + s + "'");
}

InputMode input_mode_from_string(const std::string& s) {
  if (s == "default") return InputMode::Default;
  if (s == "postprocess") return InputMode::Postprocess;
  if (s == "hybrid") return InputMode::Hybrid;
  throw UsageError("unknown mode '" + s + "'");
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::paper() {
  ModelConfig c;
  c.context_extent = 512;
  c.target_extent = 512;
  c.crop_extent = 128;
  c.lstm_channels = 128;
  c.encoder_channels = 384;
  c.stack_count = 3;
  c.blocks_per_stack = 8;
  c.dilation_schedule = {1, 2, 4, 8, 16, 32, 64, 128};
  c.upsampler_blocks = 2;
  c.upsampler_channels = 512;
  c.leadtime_net_layers = 2;
  c.leadtime_net_features = 2048;
  c.bin_count = 512;
  c.bin_width = 0.2;
  c.lead_count = 360;
  return c;
}

ModelConfig ModelConfig::paper_18_blocks() {
  ModelConfig c = paper();
  c.blocks_per_stack = 6;
  c.dilation_schedule = {1, 2, 4, 8, 16, 32};
  return c;
}

void ModelConfig::validate() const {
  NIMBUS_CHECK(target_extent == 4 * crop_extent, "target_extent must equal 4*crop_extent");
  NIMBUS_CHECK(context_extent >= crop_extent, "context must cover the cropped target area");
  NIMBUS_CHECK(static_cast<int>(dilation_schedule.size()) == blocks_per_stack,
               "dilation_schedule needs one entry per block");
  int prev = 0;
  for (int d : dilation_schedule) {
    NIMBUS_CHECK(d >= 1 && (d & (d - 1)) == 0, "dilation factors must be powers of two");
    // non-decreasing rather than strictly increasing, so capped schedules
    // (the dilation-factor ablation) stay expressible at equal depth
    NIMBUS_CHECK(d >= prev, "dilation schedule must be non-decreasing within a stack");
    prev = d;
  }
  NIMBUS_CHECK(bin_count >= 2 && bin_width > 0.0, "bad binning");
  NIMBUS_CHECK(lead_count >= 1 && lead_count <= 360, "lead_count out of range");
  NIMBUS_CHECK(lstm_channels >= 1 && encoder_channels >= 1 && upsampler_channels >= 1,
               "channel counts must be positive");
  NIMBUS_CHECK(leadtime_net_layers >= 1 && leadtime_net_features >= 1, "bad lead-time net");
}

std::vector<ScheduleEntry> ModelConfig::conv_schedule() const {
  std::vector<ScheduleEntry> sched;
  for (int s = 0; s < stack_count; ++s)
    for (int d : dilation_schedule) sched.push_back(ScheduleEntry{d, 2});
  return sched;
}

InputSpec InputSpec::for_mode(InputMode mode, int sat_channels, int assim_channels) {
  InputSpec spec;
  spec.sat_channels = sat_channels;
  spec.assim_channels = assim_channels;
  switch (mode) {
    case InputMode::Default:
      break;
    case InputMode::Postprocess:
      spec.radar = spec.satellite = spec.assim = false;
      spec.nwp = true;
      break;
    case InputMode::Hybrid:
      spec.nwp = true;
      break;
  }
  return spec;
}

int InputSpec::time_steps() const {
  int t = 1;
  if (radar) t = std::max(t, radar_slices);
  if (satellite) t = std::max(t, sat_slices);
  if (assim) t = std::max(t, assim_slices);
  return t;
}

int InputSpec::step_channels() const {
  int c = 0;
  if (radar) c += 1;
  if (satellite) c += sat_channels;
  if (assim) c += assim_channels;
  if (geo) c += geo_channels;
  if (time) c += time_channels;
  if (nwp) c += nwp_channels;
  return c;
}

std::vector<std::string> input_feature_names(const InputSpec& spec) {
  std::vector<std::string> names;
  auto minutes_ago = [](int slice, int count) { return (count - 1 - slice) * 2; };
  if (spec.radar)
    for (int s = 0; s < spec.radar_slices; ++s)
      names.push_back("radar[-" + std::to_string(minutes_ago(s, spec.radar_slices)) + "m]");
  if (spec.satellite)
    for (int s = 0; s < spec.sat_slices; ++s)
      for (int c = 0; c < spec.sat_channels; ++c)
        names.push_back("sat" + std::to_string(c) + "[-" +
                        std::to_string(minutes_ago(s, spec.sat_slices)) + "m]");
  if (spec.assim) {
    static const char* kAssim[] = {"wind_u", "wind_v", "latent_a", "latent_b"};
    for (int s = 0; s < spec.assim_slices; ++s)
      for (int c = 0; c < spec.assim_channels; ++c) {
        std::string base = c < 4 ? kAssim[c] : "assim" + std::to_string(c);
        names.push_back(base + "[-" + std::to_string(minutes_ago(s, spec.assim_slices)) + "m]");
      }
  }
  if (spec.geo) {
    names.push_back("geo_x");
    names.push_back("geo_y");
    names.push_back("geo_elev");
  }
  if (spec.time) {
    names.push_back("time_sin");
    names.push_back("time_cos");
    names.push_back("time_day");
  }
  if (spec.nwp) {
    names.push_back("nwp_inst");
    names.push_back("nwp_cum");
  }
  return names;
}

int Params::add(std::string name, Tensor t) {
  NIMBUS_CHECK(index_of(name) < 0, "duplicate parameter " + name);
  names_.push_back(std::move(name));
  tensors_.push_back(std::move(t));
  return static_cast<int>(names_.size()) - 1;
}

int Params::index_of(const std::string& name) const {
  for (std::size_t i = 0; i < names_.size(); ++i)
    if (names_[i] == name) return static_cast<int>(i);
  return -1;
}

Tensor& Params::at(const std::string& name) {
  const int i = index_of(name);
  NIMBUS_CHECK(i >= 0, "unknown parameter " + name);
  return tensors_[static_cast<std::size_t>(i)];
}

const Tensor& Params::at(const std::string& name) const {
  const int i = index_of(name);
  NIMBUS_CHECK(i >= 0, "unknown parameter " + name);
  return tensors_[static_cast<std::size_t>(i)];
}

std::int64_t Params::total_size() const {
  std::int64_t n = 0;
  for (const Tensor& t : tensors_) n += t.size();
  return n;
}

namespace {

thread_local double g_min_relu_gap = 1e300;

Tape::NodeId tracked_relu(Tape& tape, Tape::NodeId x) {
  const Tensor& v = tape.value(x);
  for (std::int64_t i = 0; i < v.size(); ++i)
    g_min_relu_gap = std::min(g_min_relu_gap, std::abs(v[i]));
  return tape.relu(x);
}

Tensor he_kernel(int k, int cin, int cout, const CounterRng& rng, std::uint64_t stream) {
  const double stddev = std::sqrt(2.0 / (static_cast<double>(k) * k * cin));
  return random_normal(Shape{k, k, cin, cout}, rng, stream, stddev);
}

Tensor xavier_dense(int fin, int fout, const CounterRng& rng, std::uint64_t stream) {
  const double stddev = std::sqrt(2.0 / (fin + fout));
  return random_normal(Shape{fin, fout}, rng, stream, stddev);
}

}  // namespace

double MetNet2::last_min_relu_gap() { return g_min_relu_gap; }

MetNet2::MetNet2(ModelConfig config, InputSpec spec, std::uint64_t seed)
    : config_(std::move(config)), spec_(spec) {
  config_.validate();
  CounterRng rng(hash_combine(seed, 0x6d6f64656cULL));
  std::uint64_t stream = 0;
  auto next = [&stream]() { return ++stream; };

  const int emb = config_.leadtime_net_features;
  // lead-time network: one-hot(lead_count) -> emb, then emb -> emb per layer
  for (int l = 0; l < config_.leadtime_net_layers; ++l) {
    const int fin = l == 0 ? config_.lead_count : emb;
    params_.add("leadnet.l" + std::to_string(l) + ".w", xavier_dense(fin, emb, rng, next()));
    params_.add("leadnet.l" + std::to_string(l) + ".b", Tensor(Shape{emb}));
  }

  int step_channels = spec_.step_channels();
  if (config_.conditioning == Conditioning::ConcatInput) step_channels += emb;
  const int ch = config_.lstm_channels;
  params_.add("lstm.w", he_kernel(3, step_channels + ch, 4 * ch, rng, next()));
  {
    Tensor b(Shape{4 * ch});
    for (int j = ch; j < 2 * ch; ++j) b[j] = 1.0;  // forget-gate bias
    params_.add("lstm.b", std::move(b));
  }

  const int ec = config_.encoder_channels;
  params_.add("enc.proj.w", he_kernel(1, ch, ec, rng, next()));
  params_.add("enc.proj.b", Tensor(Shape{ec}));

  // film/bias projections start near the identity: zero weight, scale bias 1
  auto add_conditioning = [&](const std::string& prefix, int c) {
    if (config_.conditioning == Conditioning::ConcatInput) return;
    params_.add(prefix + ".bias.w",
                random_normal(Shape{emb, c}, rng, next(), 0.1 / std::sqrt(double(emb))));
    params_.add(prefix + ".bias.b", Tensor(Shape{c}));
    if (config_.conditioning == Conditioning::Film) {
      params_.add(prefix + ".scale.w",
                  random_normal(Shape{emb, c}, rng, next(), 0.1 / std::sqrt(double(emb))));
      params_.add(prefix + ".scale.b", Tensor(Shape{c}, 1.0));
    }
  };

  auto add_block = [&](const std::string& prefix, int c) {
    params_.add(prefix + ".conv1.w", he_kernel(3, c, c, rng, next()));
    add_conditioning(prefix + ".film1", c);
    params_.add(prefix + ".conv2.w", Tensor(Shape{3, 3, c, c}));  // zero: block starts as identity
    add_conditioning(prefix + ".film2", c);
  };

  for (int s = 0; s < config_.stack_count; ++s)
    for (int b = 0; b < config_.blocks_per_stack; ++b)
      add_block("enc.s" + std::to_string(s) + ".b" + std::to_string(b), ec);

  const int uc = config_.upsampler_channels;
  params_.add("ups.proj.w", he_kernel(1, ec, uc, rng, next()));
  params_.add("ups.proj.b", Tensor(Shape{uc}));
  for (int b = 0; b < config_.upsampler_blocks; ++b)
    add_block("ups.b" + std::to_string(b), uc);

  params_.add("head.w", xavier_dense(uc, config_.bin_count, rng, next()));
  params_.add("head.b", Tensor(Shape{config_.bin_count}));
}

Tape::NodeId MetNet2::embed_lead(Tape& tape, const LeadTime& lead, TargetKind kind) const {
  const int idx = lead.index();
  NIMBUS_CHECK(idx >= 0 && idx < config_.lead_count,
               "lead index " + std::to_string(idx) + " outside model range [0," +
                   std::to_string(config_.lead_count) + ")");
  Tensor onehot(Shape{config_.lead_count});
  if (kind == TargetKind::Instantaneous) {
    onehot[idx] = 1.0;
  } else {
    // the 30 two-minute indices covering the hour that ends at the lead time
    NIMBUS_CHECK(lead.minutes >= 60, "cumulative target needs lead >= 60 minutes");
    for (int j = idx - 29; j <= idx; ++j) onehot[j] = 1.0;
  }
  Tape::NodeId x = tape.leaf(std::move(onehot), false);
  for (int l = 0; l < config_.leadtime_net_layers; ++l) {
    const std::string p = "leadnet.l" + std::to_string(l);
    Tape::NodeId w = tape.leaf(params_.at(p + ".w"), true);
    Tape::NodeId b = tape.leaf(params_.at(p + ".b"), true);
    x = tape.dense(x, w, b);
    if (l + 1 < config_.leadtime_net_layers) x = tracked_relu(tape, x);
  }
  return x;
}

Tape::NodeId MetNet2::condition(Tape& tape, Tape::NodeId x, Tape::NodeId emb,
                                const std::string& prefix,
                                const std::vector<Tape::NodeId>& param_nodes) const {
  if (config_.conditioning == Conditioning::ConcatInput) return x;
  auto node = [&](const std::string& name) {
    return param_nodes[static_cast<std::size_t>(params_.index_of(name))];
  };
  Tape::NodeId bias =
      tape.dense(emb, node(prefix + ".bias.w"), node(prefix + ".bias.b"));
  if (config_.conditioning == Conditioning::AddOnly) return tape.bias_channels(x, bias);
  Tape::NodeId scl =
      tape.dense(emb, node(prefix + ".scale.w"), node(prefix + ".scale.b"));
  return tape.film(x, bias, scl);
}

MetNet2::ForwardNodes MetNet2::build_forward(Tape& tape, const ModelInputs& in,
                                             const LeadTime& lead, TargetKind kind,
                                             bool inputs_require_grad) const {
  g_min_relu_gap = 1e300;
  ForwardNodes out;

  out.param_nodes.reserve(static_cast<std::size_t>(params_.count()));
  for (int i = 0; i < params_.count(); ++i) out.param_nodes.push_back(tape.leaf(params_.at(i)));
  auto node = [&](const std::string& name) {
    return out.param_nodes[static_cast<std::size_t>(params_.index_of(name))];
  };

  // embedding of the lead index; with concat conditioning it instead becomes
  // extra input planes at every time step
  Tape::NodeId emb = -1;
  {
    // reuse the leaf-backed params already on the tape
    const int idx = lead.index();
    NIMBUS_CHECK(idx >= 0 && idx < config_.lead_count,
                 "lead index " + std::to_string(idx) + " outside model range");
    Tensor onehot(Shape{config_.lead_count});
    if (kind == TargetKind::Instantaneous) {
      onehot[idx] = 1.0;
    } else {
      NIMBUS_CHECK(lead.minutes >= 60, "cumulative target needs lead >= 60 minutes");
      for (int j = idx - 29; j <= idx; ++j) onehot[j] = 1.0;
    }
    Tape::NodeId x = tape.leaf(std::move(onehot), false);
    for (int l = 0; l < config_.leadtime_net_layers; ++l) {
      const std::string p = "leadnet.l" + std::to_string(l);
      x = tape.dense(x, node(p + ".w"), node(p + ".b"));
      if (l + 1 < config_.leadtime_net_layers) x = tracked_relu(tape, x);
    }
    emb = x;
  }

  const int hext = spec_.radar ? in.radar.dim(1)
                   : spec_.nwp ? in.nwp.dim(1)
                               : in.geo.dim(1);
  NIMBUS_CHECK(hext == config_.context_extent,
               "input spatial extent " + std::to_string(hext) + " != context_extent " +
                   std::to_string(config_.context_extent));

  struct SetRef {
    const char* name;
    const Tensor* tensor;
    int slices;
    int channels;
  };
  std::vector<SetRef> sets;
  if (spec_.radar) sets.push_back({"radar", &in.radar, spec_.radar_slices, 1});
  if (spec_.satellite)
    sets.push_back({"satellite", &in.satellite, spec_.sat_slices, spec_.sat_channels});
  if (spec_.assim) sets.push_back({"assim", &in.assim, spec_.assim_slices, spec_.assim_channels});
  if (spec_.geo) sets.push_back({"geo", &in.geo, 1, spec_.geo_channels});
  if (spec_.time) sets.push_back({"time", &in.time_feats, 1, spec_.time_channels});
  if (spec_.nwp) sets.push_back({"nwp", &in.nwp, 1, spec_.nwp_channels});

  std::vector<Tape::NodeId> set_leaves;
  for (const SetRef& s : sets) {
    NIMBUS_CHECK(s.tensor->rank() == 4 && s.tensor->dim(0) == s.slices &&
                     s.tensor->dim(3) == s.channels,
                 std::string("input set '") + s.name + "' has shape " +
                     shape_str(s.tensor->shape()));
    Tape::NodeId leaf = tape.leaf(*s.tensor, inputs_require_grad);
    set_leaves.push_back(leaf);
    out.input_leaves.push_back(leaf);
    out.input_leaf_sets.push_back(s.name);
  }

  const int steps = spec_.time_steps();
  const int h = config_.context_extent, w = config_.context_extent;

  Tape::NodeId emb_planes = -1;
  if (config_.conditioning == Conditioning::ConcatInput)
    emb_planes = tape.broadcast_hw(emb, h, w);

  // conv-LSTM over assembled steps, oldest first; sparse sets align to the
  // most recent steps and read zero before their first slice, static sets
  // repeat at every step
  const int ch = config_.lstm_channels;
  Tape::NodeId hidden = tape.leaf(Tensor(Shape{h, w, ch}), false);
  Tape::NodeId cell = hidden;
  std::map<int, Tape::NodeId> zero_by_channels;
  for (int t = 0; t < steps; ++t) {
    Tape::NodeId x = -1;
    for (std::size_t si = 0; si < sets.size(); ++si) {
      const SetRef& s = sets[si];
      Tape::NodeId part;
      if (s.slices == 1) {
        part = tape.slice_first(set_leaves[si], 0);
      } else {
        const int slice = t - (steps - s.slices);
        if (slice < 0) {
          auto [it, inserted] = zero_by_channels.try_emplace(s.channels, -1);
          if (inserted) it->second = tape.leaf(Tensor(Shape{h, w, s.channels}), false);
          part = it->second;
        } else {
          part = tape.slice_first(set_leaves[si], slice);
        }
      }
      x = x < 0 ? part : tape.concat_last(x, part);
    }
    if (emb_planes >= 0) x = tape.concat_last(x, emb_planes);

    Tape::NodeId xh = tape.concat_last(x, hidden);
    Tape::NodeId gates = tape.conv2d(xh, node("lstm.w"), 1);
    gates = tape.bias_channels(gates, node("lstm.b"));
    Tape::NodeId ig = tape.sigmoid(tape.slice_last(gates, 0, ch));
    Tape::NodeId fg = tape.sigmoid(tape.slice_last(gates, ch, 2 * ch));
    Tape::NodeId gg = tape.tanh_op(tape.slice_last(gates, 2 * ch, 3 * ch));
    Tape::NodeId og = tape.sigmoid(tape.slice_last(gates, 3 * ch, 4 * ch));
    cell = tape.add(tape.mul(fg, cell), tape.mul(ig, gg));
    hidden = tape.mul(og, tape.tanh_op(cell));
  }

  // context aggregation: projection then the dilated residual stacks
  Tape::NodeId x = tape.conv2d(hidden, node("enc.proj.w"), 1);
  x = tape.bias_channels(x, node("enc.proj.b"));
  x = tracked_relu(tape, x);

  auto res_block = [&](Tape::NodeId bx, const std::string& prefix, int dilation) {
    Tape::NodeId t1 = tape.conv2d(bx, node(prefix + ".conv1.w"), dilation);
    t1 = condition(tape, t1, emb, prefix + ".film1", out.param_nodes);
    t1 = tracked_relu(tape, t1);
    t1 = tape.conv2d(t1, node(prefix + ".conv2.w"), dilation);
    t1 = condition(tape, t1, emb, prefix + ".film2", out.param_nodes);
    return tracked_relu(tape, tape.add(bx, t1));
  };

  for (int s = 0; s < config_.stack_count; ++s)
    for (int b = 0; b < config_.blocks_per_stack; ++b)
      x = res_block(x, "enc.s" + std::to_string(s) + ".b" + std::to_string(b),
                    config_.dilation_schedule[static_cast<std::size_t>(b)]);

  // center crop to the target area, nearest-neighbor 4x tiling, refinement
  x = tape.crop_center(x, config_.crop_extent);
  x = tape.tile4(x);
  x = tape.conv2d(x, node("ups.proj.w"), 1);
  x = tape.bias_channels(x, node("ups.proj.b"));
  x = tracked_relu(tape, x);
  for (int b = 0; b < config_.upsampler_blocks; ++b)
    x = res_block(x, "ups.b" + std::to_string(b), 1);

  out.logits = tape.dense(x, node("head.w"), node("head.b"));
  out.probs = tape.softmax_last(out.logits);
  return out;
}

ForecastDistribution MetNet2::forward(const ModelInputs& in, const LeadTime& lead,
                                      TargetKind kind) const {
  Tape tape;
  ForwardNodes nodes = build_forward(tape, in, lead, kind, false);
  return ForecastDistribution{tape.value(nodes.probs), lead, config_.binning()};
}

void save_checkpoint(const std::string& dir, const Params& params,
                     const std::map<std::string, std::string>& manifest) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  for (int i = 0; i < params.count(); ++i)
    save_tnsr(dir + "/" + params.name(i) + ".tnsr", params.at(i));
  std::ofstream mf(dir + "/manifest.txt");
  if (!mf) throw IoError("cannot write checkpoint manifest in " + dir);
  mf << "param_count=" << params.count() << "\n";
  for (int i = 0; i < params.count(); ++i)
    mf << "param." << i << "=" << params.name(i) << "\n";
  for (const auto& [k, v] : manifest) mf << k << "=" << v << "\n";
}

std::map<std::string, std::string> load_checkpoint(const std::string& dir, Params* params) {
  std::ifstream mf(dir + "/manifest.txt");
  if (!mf) throw IoError("missing checkpoint manifest in " + dir);
  std::map<std::string, std::string> kv;
  std::vector<std::string> names;
  std::string line;
  while (std::getline(mf, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = line.substr(0, eq), val = line.substr(eq + 1);
    if (key.rfind("param.", 0) == 0 && key != "param_count") {
      const std::size_t idx = std::stoul(key.substr(6));
      if (names.size() <= idx) names.resize(idx + 1);
      names[idx] = val;
    } else {
      kv[key] = val;
    }
  }
  *params = Params();
  for (const std::string& name : names)
    params->add(name, load_tnsr(dir + "/" + name + ".tnsr"));
  return kv;
}

std::map<std::string, std::string> model_config_manifest(const ModelConfig& cfg,
                                                         const InputSpec& spec) {
  std::map<std::string, std::string> kv;
  kv["model.context_extent"] = std::to_string(cfg.context_extent);
  kv["model.target_extent"] = std::to_string(cfg.target_extent);
  kv["model.crop_extent"] = std::to_string(cfg.crop_extent);
  kv["model.lstm_channels"] = std::to_string(cfg.lstm_channels);
  kv["model.encoder_channels"] = std::to_string(cfg.encoder_channels);
  kv["model.stack_count"] = std::to_string(cfg.stack_count);
  kv["model.blocks_per_stack"] = std::to_string(cfg.blocks_per_stack);
  std::string sched;
  for (std::size_t i = 0; i < cfg.dilation_schedule.size(); ++i) {
    if (i) sched += ",";
    sched += std::to_string(cfg.dilation_schedule[i]);
  }
  kv["model.dilation_schedule"] = sched;
  kv["model.upsampler_blocks"] = std::to_string(cfg.upsampler_blocks);
  kv["model.upsampler_channels"] = std::to_string(cfg.upsampler_channels);
  kv["model.leadtime_net_layers"] = std::to_string(cfg.leadtime_net_layers);
  kv["model.leadtime_net_features"] = std::to_string(cfg.leadtime_net_features);
  kv["model.bin_count"] = std::to_string(cfg.bin_count);
  kv["model.bin_width"] = format_double(cfg.bin_width);
  kv["model.lead_count"] = std::to_string(cfg.lead_count);
  kv["model.conditioning"] = to_string(cfg.conditioning);
  kv["input.radar"] = spec.radar ? "1" : "0";
  kv["input.satellite"] = spec.satellite ? "1" : "0";
  kv["input.assim"] = spec.assim ? "1" : "0";
  kv["input.geo"] = spec.geo ? "1" : "0";
  kv["input.time"] = spec.time ? "1" : "0";
  kv["input.nwp"] = spec.nwp ? "1" : "0";
  kv["input.radar_slices"] = std::to_string(spec.radar_slices);
  kv["input.sat_slices"] = std::to_string(spec.sat_slices);
  kv["input.assim_slices"] = std::to_string(spec.assim_slices);
  kv["input.sat_channels"] = std::to_string(spec.sat_channels);
  kv["input.assim_channels"] = std::to_string(spec.assim_channels);
  return kv;
}

namespace {

int kv_int(const std::map<std::string, std::string>& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stoi(it->second);
}

}  // namespace

ModelConfig model_config_from_manifest(const std::map<std::string, std::string>& kv) {
  ModelConfig cfg;
  cfg.context_extent = kv_int(kv, "model.context_extent", cfg.context_extent);
  cfg.target_extent = kv_int(kv, "model.target_extent", cfg.target_extent);
  cfg.crop_extent = kv_int(kv, "model.crop_extent", cfg.crop_extent);
  cfg.lstm_channels = kv_int(kv, "model.lstm_channels", cfg.lstm_channels);
  cfg.encoder_channels = kv_int(kv, "model.encoder_channels", cfg.encoder_channels);
  cfg.stack_count = kv_int(kv, "model.stack_count", cfg.stack_count);
  cfg.blocks_per_stack = kv_int(kv, "model.blocks_per_stack", cfg.blocks_per_stack);
  if (auto it = kv.find("model.dilation_schedule"); it != kv.end()) {
    cfg.dilation_schedule.clear();
    std::string s = it->second;
    std::size_t pos = 0;
    while (pos < s.size()) {
      std::size_t comma = s.find(',', pos);
      if (comma == std::string::npos) comma = s.size();
      cfg.dilation_schedule.push_back(std::stoi(s.substr(pos, comma - pos)));
      pos = comma + 1;
    }
  }
  cfg.upsampler_blocks = kv_int(kv, "model.upsampler_blocks", cfg.upsampler_blocks);
  cfg.upsampler_channels = kv_int(kv, "model.upsampler_channels", cfg.upsampler_channels);
  cfg.leadtime_net_layers = kv_int(kv, "model.leadtime_net_layers", cfg.leadtime_net_layers);
  cfg.leadtime_net_features =
      kv_int(kv, "model.leadtime_net_features", cfg.leadtime_net_features);
  cfg.bin_count = kv_int(kv, "model.bin_count", cfg.bin_count);
  if (auto it = kv.find("model.bin_width"); it != kv.end()) cfg.bin_width = std::stod(it->second);
  cfg.lead_count = kv_int(kv, "model.lead_count", cfg.lead_count);
  if (auto it = kv.find("model.conditioning"); it != kv.end())
    cfg.conditioning = conditioning_from_string(it->second);
  return cfg;
}

InputSpec input_spec_from_manifest(const std::map<std::string, std::string>& kv) {
  InputSpec spec;
  spec.radar = kv_int(kv, "input.radar", 1) != 0;
  spec.satellite = kv_int(kv, "input.satellite", 1) != 0;
  spec.assim = kv_int(kv, "input.assim", 1) != 0;
  spec.geo = kv_int(kv, "input.geo", 1) != 0;
  spec.time = kv_int(kv, "input.time", 1) != 0;
  spec.nwp = kv_int(kv, "input.nwp", 0) != 0;
  spec.radar_slices = kv_int(kv, "input.radar_slices", spec.radar_slices);
  spec.sat_slices = kv_int(kv, "input.sat_slices", spec.sat_slices);
  spec.assim_slices = kv_int(kv, "input.assim_slices", spec.assim_slices);
  spec.sat_channels = kv_int(kv, "input.sat_channels", spec.sat_channels);
  spec.assim_channels = kv_int(kv, "input.assim_channels", spec.assim_channels);
  return spec;
}

}  // namespace nimbus
