#pragma once

#include <string>
#include <vector>

#include "nimbus/binning.hpp"
#include "nimbus/model.hpp"

namespace nimbus {

/// Per-pixel P(rate >= r): total probability of buckets whose lower edge is
/// at or above r. r is snapped up to the next bucket edge when off-grid.
Tensor exceedance_prob(const ForecastDistribution& dist, double rate);

struct Confusion {
  long long tp = 0, fp = 0, fn = 0, tn = 0;
};

/// Prediction positive iff P >= threshold, truth positive iff y >= rate;
/// counted over unmasked pixels only.
Confusion confusion(const Tensor& exceed_probs, const Tensor& truth, double rate,
                    double threshold, const Tensor& mask);

/// TP / (TP + FN + FP); 0 when the denominator is empty (flagged upstream).
double csi(const Confusion& c);
bool csi_defined(const Confusion& c);

struct CalibrationResult {
  double threshold = 1.0;
  double csi = 0.0;
  bool degenerate = false;  // no positive truths at this rate
};

/// Scans the distinct predicted probabilities (plus 0 and 1) and returns the
/// CSI-maximizing threshold; ties resolve to the lowest candidate.
CalibrationResult calibrate_threshold(const std::vector<double>& probs,
                                      const std::vector<bool>& truth_positive);
CalibrationResult calibrate_threshold(const Tensor& exceed_probs, const Tensor& truth,
                                      double rate, const Tensor& mask);

/// Masked mean of (P - 1[y >= rate])^2.
double brier(const Tensor& exceed_probs, const Tensor& truth, double rate, const Tensor& mask);

/// CRPS as the squared CDF distance accumulated over bucket edges, scaled by
/// the bucket width. Independent of brier(); the two are cross-checked in
/// tests via CRPS == sum_r BS_r * width.
double crps(const ForecastDistribution& dist, const Tensor& truth, const Tensor& mask);

/// 1 - score/baseline (BSS, CRPSS). Baseline must be positive.
double skill(double score, double baseline_score);

/// Point-mass distribution at each pixel's bucket.
ForecastDistribution deterministic_to_prob(const Tensor& field, const RateBinning& binning,
                                           const LeadTime& lead);

/// Calibrated probability threshold per (rate, lead-hour).
struct ThresholdTable {
  struct Entry {
    double rate = 0.0;
    int lead_hour = 0;
    double threshold = 1.0;
    bool degenerate = false;
  };
  std::vector<Entry> entries;

  double lookup(double rate, int lead_hour) const;  // throws if absent
  void add(double rate, int lead_hour, double threshold, bool degenerate);
};

struct ScoreRow {
  std::string metric;  // csi | brier | crps | bss | crpss
  double rate = 0.0;   // 0 for rate-independent metrics
  int lead_minutes = 0;
  double value = 0.0;
  long long tp = 0, fp = 0, fn = 0, tn = 0;
  long long n_pixels = 0;
  std::string flags;
};

struct ScoreReport {
  std::vector<ScoreRow> rows;

  void add(ScoreRow row) { rows.push_back(std::move(row)); }
  const ScoreRow* find(const std::string& metric, double rate, int lead_minutes) const;
};

std::string score_report_csv(const ScoreReport& report);
ScoreReport score_report_from_csv(const std::string& csv);

}  // namespace nimbus
