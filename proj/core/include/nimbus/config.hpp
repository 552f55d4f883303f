#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "nimbus/dataset.hpp"
#include "nimbus/train.hpp"

namespace nimbus {

/// Plain-text key=value configuration. '#' starts a comment, blank lines
/// are ignored, later keys win.
using KeyValues = std::map<std::string, std::string>;

KeyValues parse_config_text(const std::string& text);
KeyValues load_config_file(const std::string& path);
std::string config_text(const KeyValues& kv);

int kv_int(const KeyValues& kv, const std::string& key, int fallback);
double kv_double(const KeyValues& kv, const std::string& key, double fallback);
bool kv_bool(const KeyValues& kv, const std::string& key, bool fallback);
std::string kv_str(const KeyValues& kv, const std::string& key, const std::string& fallback);
std::vector<int> kv_int_list(const KeyValues& kv, const std::string& key,
                             const std::vector<int>& fallback);
std::vector<double> kv_double_list(const KeyValues& kv, const std::string& key,
                                   const std::vector<double>& fallback);

WorldConfig world_config_from_kv(const KeyValues& kv);
KeyValues world_config_to_kv(const WorldConfig& cfg);

GenConfig gen_config_from_kv(const KeyValues& kv);
KeyValues gen_config_to_kv(const GenConfig& cfg);

TrainConfig train_config_from_kv(const KeyValues& kv);
KeyValues train_config_to_kv(const TrainConfig& cfg);

ModelConfig model_config_from_kv(const KeyValues& kv);
KeyValues model_config_to_kv(const ModelConfig& cfg);

/// Everything one run needs: world/generation, model, training, evaluation
/// and the seed list. Fully serializable; rerunning a spec reproduces every
/// artifact byte for byte in single-threaded mode.
struct ExperimentSpec {
  GenConfig gen;
  ModelConfig model;
  TrainConfig train;
  std::vector<double> eval_rates{0.2, 1.0, 2.0};
  int ig_steps = 64;
  std::vector<std::uint64_t> seeds{1};
  std::string ablate_axis;           // context_size | max_dilation | conditioning_form |
                                     // assimilation_channels
  std::vector<std::string> ablate_arms;

  static ExperimentSpec from_kv(const KeyValues& kv);
  KeyValues to_kv() const;
};

}  // namespace nimbus
