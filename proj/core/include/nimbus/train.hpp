#pragma once

#include <map>
#include <vector>

#include "nimbus/dataset.hpp"
#include "nimbus/metrics.hpp"
#include "nimbus/model.hpp"

namespace nimbus {

struct TrainConfig {
  double learning_rate = 3e-4;  // desk default; the full-scale preset uses 2e-5
  int batch_size = 4;
  double weight_decay = 0.1;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  double polyak_decay = 0.99;  // full-scale preset: 0.9999
  int steps = 500;
  int val_every = 100;
  InputMode mode = InputMode::Default;
  std::vector<double> resample_weights;  // per reporting bucket; empty = natural
  std::uint64_t seed = 1;

  /// Hyperparameters at full scale: lr 2e-5, batch 16, polyak 0.9999.
  static TrainConfig paper_preset();
  void validate() const;
};

/// Adam with decoupled weight decay. Weight decay multiplies parameters by
/// (1 - lr*wd) before the bias-corrected Adam delta is applied.
struct AdamState {
  std::vector<Tensor> m, v;
  long long step = 0;

  void init(const Params& params);
};
void adamw_step(Params& params, const std::vector<Tensor>& grads, AdamState& state,
                const TrainConfig& cfg);

/// ema <- decay*ema + (1-decay)*params
void polyak_update(Params& ema, const Params& params, double decay);

/// Masked mean of -log p(bucket(target)); the scoring-side counterpart of
/// the training loss.
double forecast_loss(const ForecastDistribution& dist, const Tensor& target, const Tensor& mask);

/// Best Polyak-averaged weights per lead hour, keyed by validation loss.
struct CheckpointSet {
  struct Entry {
    int lead_hour = 0;
    double val_loss = 0.0;
    int step = -1;
    Params params;
  };
  std::vector<Entry> entries;

  Entry* find(int lead_hour);
  const Entry* find(int lead_hour) const;
  /// Checkpoint for the hour, falling back to the nearest recorded one.
  const Entry& for_hour(int lead_hour) const;
};

struct TrainLogRow {
  int step = 0;
  double lr = 0.0;
  double train_loss = 0.0;
  std::map<int, double> val_loss;  // lead hour -> loss; empty off-cadence
};

struct TrainResult {
  CheckpointSet checkpoints;
  std::vector<TrainLogRow> log;
  Params polyak;  // final averaged weights
};

/// The optimization loop: resampled batches, cross-entropy over buckets,
/// AdamW, Polyak averaging, per-lead-hour best checkpointing.
TrainResult train(const TrainConfig& cfg, MetNet2& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set);

std::string train_log_csv(const std::vector<TrainLogRow>& log);

/// Target bucket indices for a sample's target field.
std::vector<int> target_bins(const Tensor& target, const RateBinning& binning);

/// Mean validation loss of the model's current weights per lead hour.
std::map<int, double> validation_loss(const MetNet2& model, const std::vector<Sample>& samples);

}  // namespace nimbus
