#pragma once

#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "nimbus/config.hpp"
#include "nimbus/metrics.hpp"
#include "nimbus/train.hpp"

namespace nimbus {

using Forecaster = std::function<ForecastDistribution(const Sample&)>;

/// Model forecaster that swaps in the best per-lead-hour checkpoint when a
/// CheckpointSet is supplied (falls back to current weights otherwise).
Forecaster model_forecaster(MetNet2& model, const CheckpointSet* ckpts);
Forecaster persistence_forecaster(const RateBinning& binning);
Forecaster nwp_forecaster(const RateBinning& binning);

/// Pooled scores per (rate, lead): CSI under thresholds calibrated on the
/// calibration split per (rate, lead-hour), Brier per (rate, lead) and CRPS
/// per lead. Metric names are "<family>.<name>".
ScoreReport score_forecaster(const std::string& name, const Forecaster& forecast,
                             const std::vector<Sample>& calibration,
                             const std::vector<Sample>& test,
                             const std::vector<double>& rates,
                             ThresholdTable* thresholds_out = nullptr);

/// BSS/CRPSS rows of `model_name` relative to `baseline_name`, appended to
/// the report that already holds both sides' brier/crps rows.
void add_skill_rows(ScoreReport& report, const std::string& model_name,
                    const std::string& baseline_name);

struct TrainedArm {
  std::unique_ptr<MetNet2> model;
  TrainResult result;
  std::vector<Sample> val;
  std::vector<Sample> test;
};

/// Generates data, builds and trains one model per the spec. The `adjust`
/// hook lets ablation arms rewrite configs before anything runs.
TrainedArm train_arm(const ExperimentSpec& spec, std::uint64_t seed,
                     const std::function<void(GenConfig&, ModelConfig&, TrainConfig&)>& adjust =
                         nullptr);

struct AblationArm {
  std::string arm;
  long long param_count = 0;
  int depth = 0;  // encoder conv layers
  std::vector<int> lead_minutes;
  std::vector<double> csi_by_lead;       // seed-averaged, first eval rate
  std::vector<double> csi_diff_by_lead;  // arm minus baseline
};

struct AblationResult {
  std::string axis;
  std::string baseline_arm;
  std::vector<AblationArm> arms;
  ScoreReport report;
};

/// Trains one model per (arm, seed) with shared worlds across arms and
/// reports seed-averaged per-lead CSI plus differences from the baseline arm
/// (the last arm — the full-strength configuration).
AblationResult run_ablation(const ExperimentSpec& spec, const std::string& axis,
                            const std::vector<std::string>& arms);

/// Parameter count of the model an (axis, arm)-adjusted spec would build.
long long arm_param_count(const ExperimentSpec& spec, const std::string& axis,
                          const std::string& arm);

/// One CSV per metric family plus a line plot per family; returns the
/// relative paths written. Families with no rows are omitted and listed in
/// the manifest as such.
std::vector<std::string> emit_report(const ScoreReport& report, const std::string& dir);

/// manifest.txt: one "path\tfnv1a" line per artifact (relative paths).
void write_manifest(const std::string& dir, const std::vector<std::string>& files,
                    const std::vector<std::string>& notes = {});

/// Refuses to reuse a non-empty directory unless overwrite is set.
void prepare_out_dir(const std::string& dir, bool overwrite);

}  // namespace nimbus
