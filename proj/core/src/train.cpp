#include "nimbus/train.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

namespace nimbus {

TrainConfig TrainConfig::paper_preset() {
  TrainConfig c;
  c.learning_rate = 2e-5;
  c.batch_size = 16;
  c.polyak_decay = 0.9999;
  c.steps = 500000;
  return c;
}

void TrainConfig::validate() const {
  NIMBUS_CHECK(learning_rate >= 0.0 && learning_rate <= 1.0, "learning rate outside [0,1]");
  NIMBUS_CHECK(weight_decay >= 0.0 && weight_decay <= 1.0, "weight decay outside [0,1]");
  NIMBUS_CHECK(adam_beta1 > 0.0 && adam_beta1 < 1.0, "beta1 outside (0,1)");
  NIMBUS_CHECK(adam_beta2 > 0.0 && adam_beta2 < 1.0, "beta2 outside (0,1)");
  NIMBUS_CHECK(polyak_decay > 0.0 && polyak_decay <= 1.0, "polyak decay outside (0,1]");
  NIMBUS_CHECK(steps > 0, "steps must be positive");
  NIMBUS_CHECK(batch_size > 0, "batch size must be positive");
  NIMBUS_CHECK(val_every > 0, "val_every must be positive");
}

void AdamState::init(const Params& params) {
  m.clear();
  v.clear();
  for (int i = 0; i < params.count(); ++i) {
    m.emplace_back(params.at(i).shape());
    v.emplace_back(params.at(i).shape());
  }
  step = 0;
}

void adamw_step(Params& params, const std::vector<Tensor>& grads, AdamState& state,
                const TrainConfig& cfg) {
  NIMBUS_CHECK(static_cast<int>(grads.size()) == params.count(), "gradient count mismatch");
  NIMBUS_CHECK(static_cast<int>(state.m.size()) == params.count(), "optimizer state mismatch");
  for (const Tensor& g : grads)
    if (!g.all_finite()) throw NumericError("non-finite gradient; training step aborted");

  state.step += 1;
  const double b1 = cfg.adam_beta1, b2 = cfg.adam_beta2;
  const double bc1 = 1.0 - std::pow(b1, static_cast<double>(state.step));
  const double bc2 = 1.0 - std::pow(b2, static_cast<double>(state.step));
  const double shrink = 1.0 - cfg.learning_rate * cfg.weight_decay;
  for (int i = 0; i < params.count(); ++i) {
    Tensor& p = params.at(i);
    Tensor& m = state.m[static_cast<std::size_t>(i)];
    Tensor& v = state.v[static_cast<std::size_t>(i)];
    const Tensor& g = grads[static_cast<std::size_t>(i)];
    for (std::int64_t j = 0; j < p.size(); ++j) {
      m[j] = b1 * m[j] + (1.0 - b1) * g[j];
      v[j] = b2 * v[j] + (1.0 - b2) * g[j] * g[j];
      const double mhat = m[j] / bc1;
      const double vhat = v[j] / bc2;
      p[j] = shrink * p[j] - cfg.learning_rate * mhat / (std::sqrt(vhat) + cfg.adam_eps);
    }
  }
}

void polyak_update(Params& ema, const Params& params, double decay) {
  NIMBUS_CHECK(ema.count() == params.count(), "polyak: parameter count mismatch");
  for (int i = 0; i < params.count(); ++i) {
    Tensor& e = ema.at(i);
    const Tensor& p = params.at(i);
    NIMBUS_CHECK(e.same_shape(p), "polyak: shape mismatch at " + params.name(i));
    for (std::int64_t j = 0; j < e.size(); ++j) e[j] = decay * e[j] + (1.0 - decay) * p[j];
  }
}

std::vector<int> target_bins(const Tensor& target, const RateBinning& binning) {
  std::vector<int> bins(static_cast<std::size_t>(target.size()));
  for (std::int64_t i = 0; i < target.size(); ++i)
    bins[static_cast<std::size_t>(i)] = binning.bin_of(target[i]);
  return bins;
}

double forecast_loss(const ForecastDistribution& dist, const Tensor& target, const Tensor& mask) {
  const int bins = dist.probs.dim(dist.probs.rank() - 1);
  const std::int64_t rows = dist.probs.size() / bins;
  NIMBUS_CHECK(target.size() == rows && mask.size() == rows, "forecast_loss: shape mismatch");
  double s = 0.0, n = 0.0;
  for (std::int64_t r = 0; r < rows; ++r) {
    if (mask[r] == 0.0) continue;
    const int b = dist.binning.bin_of(target[r]);
    const double p = std::max(dist.probs[r * bins + b], std::numeric_limits<double>::min());
    s += -std::log(p);
    n += 1.0;
  }
  NIMBUS_CHECK(n > 0.0, "forecast_loss: mask selects no pixels");
  return s / n;
}

CheckpointSet::Entry* CheckpointSet::find(int lead_hour) {
  for (Entry& e : entries)
    if (e.lead_hour == lead_hour) return &e;
  return nullptr;
}

const CheckpointSet::Entry* CheckpointSet::find(int lead_hour) const {
  for (const Entry& e : entries)
    if (e.lead_hour == lead_hour) return &e;
  return nullptr;
}

const CheckpointSet::Entry& CheckpointSet::for_hour(int lead_hour) const {
  NIMBUS_CHECK(!entries.empty(), "empty checkpoint set");
  const Entry* best = nullptr;
  int best_gap = std::numeric_limits<int>::max();
  for (const Entry& e : entries) {
    const int gap = std::abs(e.lead_hour - lead_hour);
    if (gap < best_gap) {
      best_gap = gap;
      best = &e;
    }
  }
  return *best;
}

namespace {

// evaluate with different weights without rebuilding the model
class ParamSwap {
 public:
  ParamSwap(MetNet2& model, const Params& other) : model_(model), saved_(model.params()) {
    model_.params() = other;
  }
  ~ParamSwap() { model_.params() = saved_; }

 private:
  MetNet2& model_;
  Params saved_;
};

}  // namespace

std::map<int, double> validation_loss(const MetNet2& model, const std::vector<Sample>& samples) {
  std::map<int, double> total, count;
  const RateBinning binning = model.config().binning();
  for (const Sample& s : samples) {
    ForecastDistribution dist = model.forward(s.inputs, s.lead, s.kind);
    const double l = forecast_loss(dist, s.target, s.mask);
    (void)binning;
    total[s.lead.hour_bucket()] += l;
    count[s.lead.hour_bucket()] += 1.0;
  }
  std::map<int, double> out;
  for (const auto& [hour, t] : total) out[hour] = t / count[hour];
  return out;
}

TrainResult train(const TrainConfig& cfg, MetNet2& model, const std::vector<Sample>& train_set,
                  const std::vector<Sample>& val_set) {
  cfg.validate();
  NIMBUS_CHECK(!train_set.empty(), "empty training set");
  const RateBinning binning = model.config().binning();

  // draw order for the whole run up front
  std::vector<double> weights = cfg.resample_weights;
  if (weights.empty()) weights.assign(kReportingBucketEdges.size() + 1, 1.0);
  ResampleSchedule schedule =
      resample(train_set, weights, cfg.steps * cfg.batch_size, cfg.seed);

  TrainResult result;
  result.polyak = model.params();
  AdamState adam;
  adam.init(model.params());

  std::vector<Tensor> grads;
  for (int i = 0; i < model.params().count(); ++i)
    grads.emplace_back(model.params().at(i).shape());

  for (int step = 0; step < cfg.steps; ++step) {
    for (Tensor& g : grads) g.fill(0.0);
    double batch_loss = 0.0;
    for (int b = 0; b < cfg.batch_size; ++b) {
      const Sample& s = train_set[static_cast<std::size_t>(
          schedule.order[static_cast<std::size_t>(step * cfg.batch_size + b)])];
      Tape tape;
      MetNet2::ForwardNodes nodes = model.build_forward(tape, s.inputs, s.lead, s.kind);
      Tape::NodeId loss =
          tape.cross_entropy_bins(nodes.logits, target_bins(s.target, binning), &s.mask);
      batch_loss += tape.value(loss)[0];
      tape.backward(loss);
      const double inv = 1.0 / cfg.batch_size;
      for (int i = 0; i < model.params().count(); ++i) {
        const Tensor& g = tape.grad(nodes.param_nodes[static_cast<std::size_t>(i)]);
        Tensor& acc = grads[static_cast<std::size_t>(i)];
        for (std::int64_t j = 0; j < acc.size(); ++j) acc[j] += inv * g[j];
      }
    }
    batch_loss /= cfg.batch_size;

    adamw_step(model.params(), grads, adam, cfg);
    polyak_update(result.polyak, model.params(), cfg.polyak_decay);

    TrainLogRow row;
    row.step = step + 1;
    row.lr = cfg.learning_rate;
    row.train_loss = batch_loss;
    const bool validate_now =
        !val_set.empty() && ((step + 1) % cfg.val_every == 0 || step + 1 == cfg.steps);
    if (validate_now) {
      ParamSwap swap(model, result.polyak);
      row.val_loss = validation_loss(model, val_set);
      for (const auto& [hour, loss] : row.val_loss) {
        CheckpointSet::Entry* e = result.checkpoints.find(hour);
        if (e == nullptr) {
          result.checkpoints.entries.push_back(
              CheckpointSet::Entry{hour, loss, step + 1, result.polyak});
        } else if (loss < e->val_loss) {
          e->val_loss = loss;
          e->step = step + 1;
          e->params = result.polyak;
        }
      }
    }
    result.log.push_back(std::move(row));
  }
  return result;
}

std::string train_log_csv(const std::vector<TrainLogRow>& log) {
  // union of lead hours seen across the run forms the column set
  std::vector<int> hours;
  for (const TrainLogRow& r : log)
    for (const auto& [hour, loss] : r.val_loss)
      if (std::find(hours.begin(), hours.end(), hour) == hours.end()) hours.push_back(hour);
  std::sort(hours.begin(), hours.end());

  std::ostringstream out;
  out << "step,lr,train_loss";
  for (int h : hours) out << ",val_loss_h" << h;
  out << "\n";
  for (const TrainLogRow& r : log) {
    out << r.step << ',' << format_double(r.lr) << ',' << format_double(r.train_loss);
    for (int h : hours) {
      out << ',';
      auto it = r.val_loss.find(h);
      if (it != r.val_loss.end()) out << format_double(it->second);
    }
    out << "\n";
  }
  return out.str();
}

}  // namespace nimbus
