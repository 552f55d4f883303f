#include "nimbus/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace nimbus {

namespace {

// first bucket whose lower edge is at or above the rate
int first_bucket_at_or_above(const RateBinning& b, double rate) {
  NIMBUS_CHECK(rate <= b.max_rate() + 1e-12,
               "rate " + std::to_string(rate) + " above max " + std::to_string(b.max_rate()));
  const int k = static_cast<int>(std::ceil(rate / b.bin_width - 1e-9));
  return std::max(k, 0);
}

}  // namespace

Tensor exceedance_prob(const ForecastDistribution& dist, double rate) {
  const Tensor& p = dist.probs;
  const int bins = p.dim(p.rank() - 1);
  const int k = first_bucket_at_or_above(dist.binning, rate);
  Shape oshape(p.shape().begin(), p.shape().end() - 1);
  Tensor out(oshape);
  const std::int64_t rows = p.size() / bins;
  for (std::int64_t r = 0; r < rows; ++r) {
    double s = 0.0;
    for (int j = k; j < bins; ++j) s += p[r * bins + j];
    out[r] = s;
  }
  return out;
}

Confusion confusion(const Tensor& exceed_probs, const Tensor& truth, double rate,
                    double threshold, const Tensor& mask) {
  NIMBUS_CHECK(exceed_probs.same_shape(truth) && truth.same_shape(mask),
               "confusion: shape mismatch");
  NIMBUS_CHECK(threshold >= 0.0 && threshold <= 1.0, "threshold must be in [0,1]");
  Confusion c;
  bool any = false;
  for (std::int64_t i = 0; i < truth.size(); ++i) {
    if (mask[i] == 0.0) continue;
    any = true;
    const bool pred = exceed_probs[i] >= threshold;
    const bool pos = truth[i] >= rate;
    if (pred && pos)
      ++c.tp;
    else if (pred && !pos)
      ++c.fp;
    else if (!pred && pos)
      ++c.fn;
    else
      ++c.tn;
  }
  NIMBUS_CHECK(any, "confusion: mask selects no pixels");
  return c;
}

bool csi_defined(const Confusion& c) { return c.tp + c.fn + c.fp > 0; }

double csi(const Confusion& c) {
  const long long denom = c.tp + c.fn + c.fp;
  return denom == 0 ? 0.0 : static_cast<double>(c.tp) / static_cast<double>(denom);
}

CalibrationResult calibrate_threshold(const std::vector<double>& probs,
                                      const std::vector<bool>& truth_positive) {
  NIMBUS_CHECK(!probs.empty() && probs.size() == truth_positive.size(),
               "calibration needs matching, nonempty prob/truth vectors");
  long long positives = 0;
  for (bool t : truth_positive) positives += t ? 1 : 0;
  if (positives == 0) return CalibrationResult{1.0, 0.0, true};

  // sweep candidate thresholds descending: the distinct predicted
  // probabilities plus the endpoints. At threshold t the entries with
  // prob >= t are predicted positive, so counts accumulate monotonically.
  std::vector<std::size_t> order(probs.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return probs[a] > probs[b];
  });

  long long tp = 0, fp = 0;
  CalibrationResult best{2.0, -1.0, false};
  auto consider = [&](double thr) {
    const long long fn = positives - tp;
    const long long denom = tp + fn + fp;
    const double score = denom == 0 ? 0.0 : static_cast<double>(tp) / denom;
    // candidates arrive in descending order, so >= keeps the lowest tie
    if (score >= best.csi) {
      best.threshold = thr;
      best.csi = score;
    }
  };
  std::size_t i = 0;
  while (i < order.size() && probs[order[i]] >= 1.0) {
    (truth_positive[order[i]] ? tp : fp) += 1;
    ++i;
  }
  consider(1.0);
  while (i < order.size()) {
    const double thr = probs[order[i]];
    while (i < order.size() && probs[order[i]] == thr) {
      (truth_positive[order[i]] ? tp : fp) += 1;
      ++i;
    }
    consider(thr);
  }
  consider(0.0);
  return best;
}

CalibrationResult calibrate_threshold(const Tensor& exceed_probs, const Tensor& truth,
                                      double rate, const Tensor& mask) {
  std::vector<double> p;
  std::vector<bool> t;
  for (std::int64_t i = 0; i < truth.size(); ++i) {
    if (mask[i] == 0.0) continue;
    p.push_back(exceed_probs[i]);
    t.push_back(truth[i] >= rate);
  }
  NIMBUS_CHECK(!p.empty(), "calibration split selects no pixels");
  return calibrate_threshold(p, t);
}

double brier(const Tensor& exceed_probs, const Tensor& truth, double rate, const Tensor& mask) {
  NIMBUS_CHECK(exceed_probs.same_shape(truth) && truth.same_shape(mask),
               "brier: shape mismatch");
  double s = 0.0, n = 0.0;
  for (std::int64_t i = 0; i < truth.size(); ++i) {
    if (mask[i] == 0.0) continue;
    NIMBUS_CHECK(exceed_probs[i] >= -1e-9 && exceed_probs[i] <= 1.0 + 1e-9,
                 "brier: probability outside [0,1]");
    const double d = exceed_probs[i] - (truth[i] >= rate ? 1.0 : 0.0);
    s += d * d;
    n += 1.0;
  }
  NIMBUS_CHECK(n > 0.0, "brier: mask selects no pixels");
  return s / n;
}

double crps(const ForecastDistribution& dist, const Tensor& truth, const Tensor& mask) {
  const Tensor& p = dist.probs;
  const int bins = p.dim(p.rank() - 1);
  const std::int64_t rows = p.size() / bins;
  NIMBUS_CHECK(truth.size() == rows && mask.size() == rows, "crps: shape mismatch");
  const double w = dist.binning.bin_width;
  double total = 0.0, n = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (mask[r] == 0.0) continue;
    // squared distance between forecast and observed CDFs, one term per
    // bucket edge; the observed CDF steps where the raw rate crosses the edge
    double cdf = 0.0, acc = 0.0;
    for (int j = 0; j < bins; ++j) {
      cdf += p[r * bins + j];
      const double edge = (j + 1) * w;
      const double truth_cdf = truth[r] < edge ? 1.0 : 0.0;
      const double d = cdf - truth_cdf;
      acc += d * d * w;
    }
    total += acc;
    n += 1.0;
  }
  NIMBUS_CHECK(n > 0.0, "crps: mask selects no pixels");
  return total / n;
}

double skill(double score, double baseline_score) {
  NIMBUS_CHECK(baseline_score > 0.0, "skill: baseline must be positive");
  return 1.0 - score / baseline_score;
}

ForecastDistribution deterministic_to_prob(const Tensor& field, const RateBinning& binning,
                                           const LeadTime& lead) {
  Shape oshape = field.shape();
  oshape.push_back(binning.bin_count);
  ForecastDistribution out{Tensor(oshape), lead, binning};
  for (std::int64_t i = 0; i < field.size(); ++i)
    out.probs[i * binning.bin_count + binning.bin_of(field[i])] = 1.0;
  return out;
}

double ThresholdTable::lookup(double rate, int lead_hour) const {
  for (const Entry& e : entries)
    if (e.rate == rate && e.lead_hour == lead_hour) return e.threshold;
  throw DataError("no calibrated threshold for rate " + std::to_string(rate) + " hour " +
                  std::to_string(lead_hour));
}

void ThresholdTable::add(double rate, int lead_hour, double threshold, bool degenerate) {
  entries.push_back(Entry{rate, lead_hour, threshold, degenerate});
}

const ScoreRow* ScoreReport::find(const std::string& metric, double rate,
                                  int lead_minutes) const {
  for (const ScoreRow& r : rows)
    if (r.metric == metric && r.rate == rate && r.lead_minutes == lead_minutes) return &r;
  return nullptr;
}

std::string score_report_csv(const ScoreReport& report) {
  std::ostringstream out;
  out << "metric,rate_mm_hr,lead_minutes,value,TP,FP,FN,TN,n_pixels,flags\n";
  for (const ScoreRow& r : report.rows)
    out << r.metric << ',' << format_double(r.rate) << ',' << r.lead_minutes << ','
        << format_double(r.value) << ',' << r.tp << ',' << r.fp << ',' << r.fn << ',' << r.tn
        << ',' << r.n_pixels << ',' << r.flags << "\n";
  return out.str();
}

ScoreReport score_report_from_csv(const std::string& csv) {
  ScoreReport report;
  std::istringstream in(csv);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::vector<std::string> cols;
    std::size_t pos = 0;
    while (pos <= line.size()) {
      std::size_t comma = line.find(',', pos);
      if (comma == std::string::npos) comma = line.size();
      cols.push_back(line.substr(pos, comma - pos));
      pos = comma + 1;
    }
    NIMBUS_CHECK(cols.size() == 10, "malformed score row: " + line);
    ScoreRow r;
    r.metric = cols[0];
    r.rate = std::stod(cols[1]);
    r.lead_minutes = std::stoi(cols[2]);
    r.value = std::stod(cols[3]);
    r.tp = std::stoll(cols[4]);
    r.fp = std::stoll(cols[5]);
    r.fn = std::stoll(cols[6]);
    r.tn = std::stoll(cols[7]);
    r.n_pixels = std::stoll(cols[8]);
    r.flags = cols[9];
    report.rows.push_back(std::move(r));
  }
  return report;
}

}  // namespace nimbus
