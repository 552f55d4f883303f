#include "nimbus/config.hpp"

#include <fstream>
#include <sstream>

namespace nimbus {

KeyValues parse_config_text(const std::string& text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::size_t hash = line.find('#');
    if (hash != std::string::npos) line = line.substr(0, hash);
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    line = line.substr(first, last - first + 1);
    const std::size_t eq = line.find('=');
    NIMBUS_USAGE_CHECK(eq != std::string::npos && eq > 0,
                       "config line " + std::to_string(lineno) + " is not key=value: " + line);
    std::string key = line.substr(0, eq);
    std::string val = line.substr(eq + 1);
    while (!key.empty() && (key.back() == ' ' || key.back() == '\t')) key.pop_back();
    while (!val.empty() && (val.front() == ' ' || val.front() == '\t')) val.erase(val.begin());
    kv[key] = val;
  }
  return kv;
}

KeyValues load_config_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("cannot open config file: " + path);
  std::ostringstream ss;
  ss << f.rdbuf();
  return parse_config_text(ss.str());
}

std::string config_text(const KeyValues& kv) {
  std::ostringstream out;
  for (const auto& [k, v] : kv) out << k << '=' << v << "\n";
  return out.str();
}

int kv_int(const KeyValues& kv, const std::string& key, int fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stoi(it->second);
}

double kv_double(const KeyValues& kv, const std::string& key, double fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : std::stod(it->second);
}

bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  if (it->second == "1" || it->second == "true" || it->second == "yes") return true;
  if (it->second == "0" || it->second == "false" || it->second == "no") return false;
  throw UsageError("bad boolean for " + key + ": " + it->second);
}

std::string kv_str(const KeyValues& kv, const std::string& key, const std::string& fallback) {
  auto it = kv.find(key);
  return it == kv.end() ? fallback : it->second;
}

namespace {

std::vector<std::string> split_commas(const std::string& s) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= s.size()) {
    std::size_t comma = s.find(',', pos);
    if (comma == std::string::npos) comma = s.size();
    if (comma > pos) out.push_back(s.substr(pos, comma - pos));
    pos = comma + 1;
  }
  return out;
}

}  // namespace

std::vector<int> kv_int_list(const KeyValues& kv, const std::string& key,
                             const std::vector<int>& fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<int> out;
  for (const std::string& tok : split_commas(it->second)) out.push_back(std::stoi(tok));
  return out;
}

std::vector<double> kv_double_list(const KeyValues& kv, const std::string& key,
                                   const std::vector<double>& fallback) {
  auto it = kv.find(key);
  if (it == kv.end()) return fallback;
  std::vector<double> out;
  for (const std::string& tok : split_commas(it->second)) out.push_back(std::stod(tok));
  return out;
}

WorldConfig world_config_from_kv(const KeyValues& kv) {
  WorldConfig c;
  c.extent = kv_int(kv, "world.extent", c.extent);
  c.step_minutes = kv_double(kv, "world.step_minutes", c.step_minutes);
  c.wind_cap = kv_double(kv, "world.wind_cap", c.wind_cap);
  c.wind_amp = kv_double(kv, "world.wind_amp", c.wind_amp);
  c.wind_noise = kv_double(kv, "world.wind_noise", c.wind_noise);
  c.wind_fixed = kv_bool(kv, "world.wind_fixed", c.wind_fixed);
  c.wind_fixed_u = kv_double(kv, "world.wind_fixed_u", c.wind_fixed_u);
  c.wind_fixed_v = kv_double(kv, "world.wind_fixed_v", c.wind_fixed_v);
  c.diffusion = kv_double(kv, "world.diffusion", c.diffusion);
  c.source_gain = kv_double(kv, "world.source_gain", c.source_gain);
  c.source_threshold = kv_double(kv, "world.source_threshold", c.source_threshold);
  c.growth_gain = kv_double(kv, "world.growth_gain", c.growth_gain);
  c.decay = kv_double(kv, "world.decay", c.decay);
  c.rate_cap = kv_double(kv, "world.rate_cap", c.rate_cap);
  c.init_amp = kv_double(kv, "world.init_amp", c.init_amp);
  c.init_threshold = kv_double(kv, "world.init_threshold", c.init_threshold);
  c.noise_cells = kv_int(kv, "world.noise_cells", c.noise_cells);
  c.wind_period = kv_int(kv, "world.wind_period", c.wind_period);
  c.latent_period = kv_int(kv, "world.latent_period", c.latent_period);
  c.eval_mask_coverage = kv_double(kv, "world.eval_mask_coverage", c.eval_mask_coverage);
  c.train_mask_dilation = kv_int(kv, "world.train_mask_dilation", c.train_mask_dilation);
  return c;
}

KeyValues world_config_to_kv(const WorldConfig& c) {
  KeyValues kv;
  kv["world.extent"] = std::to_string(c.extent);
  kv["world.step_minutes"] = format_double(c.step_minutes);
  kv["world.wind_cap"] = format_double(c.wind_cap);
  kv["world.wind_amp"] = format_double(c.wind_amp);
  kv["world.wind_noise"] = format_double(c.wind_noise);
  kv["world.wind_fixed"] = c.wind_fixed ? "1" : "0";
  kv["world.wind_fixed_u"] = format_double(c.wind_fixed_u);
  kv["world.wind_fixed_v"] = format_double(c.wind_fixed_v);
  kv["world.diffusion"] = format_double(c.diffusion);
  kv["world.source_gain"] = format_double(c.source_gain);
  kv["world.source_threshold"] = format_double(c.source_threshold);
  kv["world.growth_gain"] = format_double(c.growth_gain);
  kv["world.decay"] = format_double(c.decay);
  kv["world.rate_cap"] = format_double(c.rate_cap);
  kv["world.init_amp"] = format_double(c.init_amp);
  kv["world.init_threshold"] = format_double(c.init_threshold);
  kv["world.noise_cells"] = std::to_string(c.noise_cells);
  kv["world.wind_period"] = std::to_string(c.wind_period);
  kv["world.latent_period"] = std::to_string(c.latent_period);
  kv["world.eval_mask_coverage"] = format_double(c.eval_mask_coverage);
  kv["world.train_mask_dilation"] = std::to_string(c.train_mask_dilation);
  return kv;
}

GenConfig gen_config_from_kv(const KeyValues& kv) {
  GenConfig c;
  c.world = world_config_from_kv(kv);
  c.geometry.context_extent = kv_int(kv, "gen.context_extent", c.geometry.context_extent);
  c.geometry.target_extent = kv_int(kv, "gen.target_extent", c.geometry.target_extent);
  c.geometry.radar_slices = kv_int(kv, "gen.radar_slices", c.geometry.radar_slices);
  c.geometry.sat_slices = kv_int(kv, "gen.sat_slices", c.geometry.sat_slices);
  c.geometry.assim_slices = kv_int(kv, "gen.assim_slices", c.geometry.assim_slices);
  c.seed = static_cast<std::uint64_t>(kv_int(kv, "gen.seed", static_cast<int>(c.seed)));
  c.warmup_steps = kv_int(kv, "gen.warmup_steps", c.warmup_steps);
  c.trajectories = kv_int(kv, "gen.trajectories", c.trajectories);
  c.train_samples = kv_int(kv, "gen.train_samples", c.train_samples);
  c.val_samples = kv_int(kv, "gen.val_samples", c.val_samples);
  c.test_samples = kv_int(kv, "gen.test_samples", c.test_samples);
  c.min_lead_minutes = kv_int(kv, "gen.min_lead_minutes", c.min_lead_minutes);
  c.max_lead_minutes = kv_int(kv, "gen.max_lead_minutes", c.max_lead_minutes);
  c.with_nwp = kv_bool(kv, "gen.with_nwp", c.with_nwp);
  c.cumulative = kv_bool(kv, "gen.cumulative", c.cumulative);
  c.nwp_degradation.wind_sigma = kv_double(kv, "gen.nwp_wind_sigma", 0.0);
  c.nwp_degradation.blur_sigma = kv_double(kv, "gen.nwp_blur_sigma", 0.0);
  c.nwp_degradation.bias = kv_double(kv, "gen.nwp_bias", 1.0);
  c.nwp_degradation.init_delay = kv_int(kv, "gen.nwp_init_delay", 0);
  c.dtype = kv_str(kv, "gen.dtype", "f32") == "f64" ? Dtype::F64 : Dtype::F32;
  return c;
}

KeyValues gen_config_to_kv(const GenConfig& c) {
  KeyValues kv = world_config_to_kv(c.world);
  kv["gen.context_extent"] = std::to_string(c.geometry.context_extent);
  kv["gen.target_extent"] = std::to_string(c.geometry.target_extent);
  kv["gen.radar_slices"] = std::to_string(c.geometry.radar_slices);
  kv["gen.sat_slices"] = std::to_string(c.geometry.sat_slices);
  kv["gen.assim_slices"] = std::to_string(c.geometry.assim_slices);
  kv["gen.seed"] = std::to_string(c.seed);
  kv["gen.warmup_steps"] = std::to_string(c.warmup_steps);
  kv["gen.trajectories"] = std::to_string(c.trajectories);
  kv["gen.train_samples"] = std::to_string(c.train_samples);
  kv["gen.val_samples"] = std::to_string(c.val_samples);
  kv["gen.test_samples"] = std::to_string(c.test_samples);
  kv["gen.min_lead_minutes"] = std::to_string(c.min_lead_minutes);
  kv["gen.max_lead_minutes"] = std::to_string(c.max_lead_minutes);
  kv["gen.with_nwp"] = c.with_nwp ? "1" : "0";
  kv["gen.cumulative"] = c.cumulative ? "1" : "0";
  kv["gen.nwp_wind_sigma"] = format_double(c.nwp_degradation.wind_sigma);
  kv["gen.nwp_blur_sigma"] = format_double(c.nwp_degradation.blur_sigma);
  kv["gen.nwp_bias"] = format_double(c.nwp_degradation.bias);
  kv["gen.nwp_init_delay"] = std::to_string(c.nwp_degradation.init_delay);
  kv["gen.dtype"] = c.dtype == Dtype::F64 ? "f64" : "f32";
  return kv;
}

TrainConfig train_config_from_kv(const KeyValues& kv) {
  TrainConfig c;
  if (kv_bool(kv, "train.paper_preset", false)) c = TrainConfig::paper_preset();
  c.learning_rate = kv_double(kv, "train.learning_rate", c.learning_rate);
  c.batch_size = kv_int(kv, "train.batch_size", c.batch_size);
  c.weight_decay = kv_double(kv, "train.weight_decay", c.weight_decay);
  c.adam_beta1 = kv_double(kv, "train.adam_beta1", c.adam_beta1);
  c.adam_beta2 = kv_double(kv, "train.adam_beta2", c.adam_beta2);
  c.adam_eps = kv_double(kv, "train.adam_eps", c.adam_eps);
  c.polyak_decay = kv_double(kv, "train.polyak_decay", c.polyak_decay);
  c.steps = kv_int(kv, "train.steps", c.steps);
  c.val_every = kv_int(kv, "train.val_every", c.val_every);
  c.mode = input_mode_from_string(kv_str(kv, "train.mode", to_string(c.mode)));
  c.resample_weights = kv_double_list(kv, "train.resample_weights", c.resample_weights);
  c.seed = static_cast<std::uint64_t>(kv_int(kv, "train.seed", static_cast<int>(c.seed)));
  return c;
}

KeyValues train_config_to_kv(const TrainConfig& c) {
  KeyValues kv;
  kv["train.learning_rate"] = format_double(c.learning_rate);
  kv["train.batch_size"] = std::to_string(c.batch_size);
  kv["train.weight_decay"] = format_double(c.weight_decay);
  kv["train.adam_beta1"] = format_double(c.adam_beta1);
  kv["train.adam_beta2"] = format_double(c.adam_beta2);
  kv["train.adam_eps"] = format_double(c.adam_eps);
  kv["train.polyak_decay"] = format_double(c.polyak_decay);
  kv["train.steps"] = std::to_string(c.steps);
  kv["train.val_every"] = std::to_string(c.val_every);
  kv["train.mode"] = to_string(c.mode);
  if (!c.resample_weights.empty()) {
    std::string w;
    for (std::size_t i = 0; i < c.resample_weights.size(); ++i) {
      if (i) w += ",";
      w += format_double(c.resample_weights[i]);
    }
    kv["train.resample_weights"] = w;
  }
  kv["train.seed"] = std::to_string(c.seed);
  return kv;
}

ModelConfig model_config_from_kv(const KeyValues& kv) { return model_config_from_manifest(kv); }

KeyValues model_config_to_kv(const ModelConfig& cfg) {
  return model_config_manifest(cfg, InputSpec{});
}

ExperimentSpec ExperimentSpec::from_kv(const KeyValues& kv) {
  ExperimentSpec s;
  s.gen = gen_config_from_kv(kv);
  s.model = model_config_from_kv(kv);
  s.train = train_config_from_kv(kv);
  s.eval_rates = kv_double_list(kv, "eval.rates", s.eval_rates);
  s.ig_steps = kv_int(kv, "eval.ig_steps", s.ig_steps);
  if (auto it = kv.find("seeds"); it != kv.end()) {
    s.seeds.clear();
    for (int v : kv_int_list(kv, "seeds", {}))
      s.seeds.push_back(static_cast<std::uint64_t>(v));
  }
  s.ablate_axis = kv_str(kv, "ablate.axis", "");
  if (auto it = kv.find("ablate.arms"); it != kv.end()) {
    s.ablate_arms.clear();
    std::size_t pos = 0;
    const std::string& v = it->second;
    while (pos <= v.size()) {
      std::size_t comma = v.find(',', pos);
      if (comma == std::string::npos) comma = v.size();
      if (comma > pos) s.ablate_arms.push_back(v.substr(pos, comma - pos));
      pos = comma + 1;
    }
  }
  return s;
}

KeyValues ExperimentSpec::to_kv() const {
  KeyValues kv = gen_config_to_kv(gen);
  KeyValues mk = model_config_manifest(model, InputSpec{});
  kv.insert(mk.begin(), mk.end());
  KeyValues tk = train_config_to_kv(train);
  kv.insert(tk.begin(), tk.end());
  std::string rates;
  for (std::size_t i = 0; i < eval_rates.size(); ++i) {
    if (i) rates += ",";
    rates += format_double(eval_rates[i]);
  }
  kv["eval.rates"] = rates;
  kv["eval.ig_steps"] = std::to_string(ig_steps);
  std::string seed_list;
  for (std::size_t i = 0; i < seeds.size(); ++i) {
    if (i) seed_list += ",";
    seed_list += std::to_string(seeds[i]);
  }
  kv["seeds"] = seed_list;
  if (!ablate_axis.empty()) kv["ablate.axis"] = ablate_axis;
  if (!ablate_arms.empty()) {
    std::string arms;
    for (std::size_t i = 0; i < ablate_arms.size(); ++i) {
      if (i) arms += ",";
      arms += ablate_arms[i];
    }
    kv["ablate.arms"] = arms;
  }
  return kv;
}

}  // namespace nimbus
