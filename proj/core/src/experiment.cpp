#include "nimbus/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>

#include "nimbus/svg.hpp"

namespace nimbus {

namespace fs = std::filesystem;

Forecaster model_forecaster(MetNet2& model, const CheckpointSet* ckpts) {
  return [&model, ckpts](const Sample& s) {
    if (ckpts != nullptr && !ckpts->entries.empty()) {
      const CheckpointSet::Entry& e = ckpts->for_hour(s.lead.hour_bucket());
      Params saved = model.params();
      model.params() = e.params;
      ForecastDistribution d = model.forward(s.inputs, s.lead, s.kind);
      model.params() = saved;
      return d;
    }
    return model.forward(s.inputs, s.lead, s.kind);
  };
}

Forecaster persistence_forecaster(const RateBinning& binning) {
  return [binning](const Sample& s) {
    return deterministic_to_prob(s.persistence, binning, s.lead);
  };
}

Forecaster nwp_forecaster(const RateBinning& binning) {
  return [binning](const Sample& s) {
    NIMBUS_CHECK(!s.nwp_target.empty(), "sample has no nwp forecast field");
    return deterministic_to_prob(s.nwp_target, binning, s.lead);
  };
}

namespace {

struct PixelPool {
  std::vector<double> probs;
  std::vector<double> truth;
  std::vector<double> mask;  // all ones (pool holds unmasked pixels only)
};

}  // namespace

ScoreReport score_forecaster(const std::string& name, const Forecaster& forecast,
                             const std::vector<Sample>& calibration,
                             const std::vector<Sample>& test,
                             const std::vector<double>& rates, ThresholdTable* thresholds_out) {
  NIMBUS_CHECK(!test.empty(), "scoring needs test samples");
  NIMBUS_CHECK(!calibration.empty(), "scoring needs a calibration split");

  // calibrate one threshold per (rate, lead-hour) on the calibration split
  ThresholdTable table;
  {
    std::map<std::pair<int, std::size_t>, PixelPool> pools;  // (hour, rate idx)
    for (const Sample& s : calibration) {
      ForecastDistribution d = forecast(s);
      for (std::size_t ri = 0; ri < rates.size(); ++ri) {
        Tensor ex = exceedance_prob(d, rates[ri]);
        PixelPool& pool = pools[{s.lead.hour_bucket(), ri}];
        for (std::int64_t i = 0; i < ex.size(); ++i) {
          if (s.mask[i] == 0.0) continue;
          pool.probs.push_back(ex[i]);
          pool.truth.push_back(s.target[i]);
        }
      }
    }
    for (auto& [key, pool] : pools) {
      std::vector<bool> pos(pool.probs.size());
      for (std::size_t i = 0; i < pos.size(); ++i) pos[i] = pool.truth[i] >= rates[key.second];
      CalibrationResult cal = calibrate_threshold(pool.probs, pos);
      table.add(rates[key.second], key.first, cal.threshold, cal.degenerate);
    }
  }

  // pool test pixels per (rate, lead)
  struct LeadAgg {
    std::map<std::size_t, Confusion> confusion;          // rate idx -> counts
    std::map<std::size_t, double> brier_sum;             // rate idx -> sum of sq err
    double crps_sum = 0.0;
    double pixels = 0.0;
    bool degenerate = false;
  };
  std::map<int, LeadAgg> by_lead;

  for (const Sample& s : test) {
    ForecastDistribution d = forecast(s);
    LeadAgg& agg = by_lead[s.lead.minutes];
    const double npix = s.mask.sum();
    if (npix == 0.0) continue;
    agg.crps_sum += crps(d, s.target, s.mask) * npix;
    agg.pixels += npix;
    for (std::size_t ri = 0; ri < rates.size(); ++ri) {
      Tensor ex = exceedance_prob(d, rates[ri]);
      double thr = 1.0;
      bool degenerate = true;
      for (const ThresholdTable::Entry& e : table.entries)
        if (e.rate == rates[ri] && e.lead_hour == s.lead.hour_bucket()) {
          thr = e.threshold;
          degenerate = e.degenerate;
        }
      Confusion c = confusion(ex, s.target, rates[ri], thr, s.mask);
      Confusion& acc = agg.confusion[ri];
      acc.tp += c.tp;
      acc.fp += c.fp;
      acc.fn += c.fn;
      acc.tn += c.tn;
      agg.brier_sum[ri] += brier(ex, s.target, rates[ri], s.mask) * npix;
      agg.degenerate = agg.degenerate || degenerate;
    }
  }

  ScoreReport report;
  for (const auto& [lead, agg] : by_lead) {
    for (std::size_t ri = 0; ri < rates.size(); ++ri) {
      const Confusion& c = agg.confusion.at(ri);
      ScoreRow row;
      row.metric = "csi." + name;
      row.rate = rates[ri];
      row.lead_minutes = lead;
      row.value = csi(c);
      row.tp = c.tp;
      row.fp = c.fp;
      row.fn = c.fn;
      row.tn = c.tn;
      row.n_pixels = static_cast<long long>(agg.pixels);
      if (!csi_defined(c)) row.flags = "undefined";
      report.add(row);

      ScoreRow brow;
      brow.metric = "brier." + name;
      brow.rate = rates[ri];
      brow.lead_minutes = lead;
      brow.value = agg.brier_sum.at(ri) / agg.pixels;
      brow.n_pixels = static_cast<long long>(agg.pixels);
      report.add(brow);
    }
    ScoreRow crow;
    crow.metric = "crps." + name;
    crow.lead_minutes = lead;
    crow.value = agg.crps_sum / agg.pixels;
    crow.n_pixels = static_cast<long long>(agg.pixels);
    report.add(crow);
  }
  if (thresholds_out != nullptr) *thresholds_out = table;
  return report;
}

void add_skill_rows(ScoreReport& report, const std::string& model_name,
                    const std::string& baseline_name) {
  std::vector<ScoreRow> added;
  for (const ScoreRow& row : report.rows) {
    if (row.metric == "brier." + model_name) {
      const ScoreRow* base = report.find("brier." + baseline_name, row.rate, row.lead_minutes);
      if (base != nullptr && base->value > 0.0) {
        ScoreRow s;
        s.metric = "bss." + model_name + "_vs_" + baseline_name;
        s.rate = row.rate;
        s.lead_minutes = row.lead_minutes;
        s.value = skill(row.value, base->value);
        s.n_pixels = row.n_pixels;
        added.push_back(std::move(s));
      }
    } else if (row.metric == "crps." + model_name) {
      const ScoreRow* base = report.find("crps." + baseline_name, row.rate, row.lead_minutes);
      if (base != nullptr && base->value > 0.0) {
        ScoreRow s;
        s.metric = "crpss." + model_name + "_vs_" + baseline_name;
        s.lead_minutes = row.lead_minutes;
        s.value = skill(row.value, base->value);
        s.n_pixels = row.n_pixels;
        added.push_back(std::move(s));
      }
    }
  }
  for (ScoreRow& r : added) report.add(std::move(r));
}

TrainedArm train_arm(const ExperimentSpec& spec, std::uint64_t seed,
                     const std::function<void(GenConfig&, ModelConfig&, TrainConfig&)>& adjust) {
  GenConfig gen = spec.gen;
  ModelConfig model_cfg = spec.model;
  TrainConfig train_cfg = spec.train;
  gen.seed = seed;
  train_cfg.seed = hash_combine(seed, 0x747261696eULL);
  if (adjust) adjust(gen, model_cfg, train_cfg);
  gen.geometry.context_extent = model_cfg.context_extent;
  gen.geometry.target_extent = model_cfg.target_extent;
  if (train_cfg.mode != InputMode::Default) gen.with_nwp = true;

  TrainedArm arm;
  std::vector<Sample> train_set = cut_samples(gen, "train", gen.train_samples);
  arm.val = cut_samples(gen, "val", gen.val_samples);
  arm.test = cut_samples(gen, "test", gen.test_samples);

  InputSpec ispec = InputSpec::for_mode(train_cfg.mode);
  ispec.radar_slices = gen.geometry.radar_slices;
  ispec.sat_slices = gen.geometry.sat_slices;
  ispec.assim_slices = gen.geometry.assim_slices;
  arm.model = std::make_unique<MetNet2>(model_cfg, ispec, seed);
  arm.result = train(train_cfg, *arm.model, train_set, arm.val);
  return arm;
}

namespace {

std::function<void(GenConfig&, ModelConfig&, TrainConfig&)> arm_adjuster(
    const std::string& axis, const std::string& arm) {
  if (axis == "context_size") {
    const int ce = std::stoi(arm);
    return [ce](GenConfig&, ModelConfig& m, TrainConfig&) { m.context_extent = ce; };
  }
  if (axis == "max_dilation") {
    const int cap = std::stoi(arm);
    NIMBUS_USAGE_CHECK(cap >= 1, "max_dilation arm must be >= 1");
    return [cap](GenConfig&, ModelConfig& m, TrainConfig&) {
      for (int& d : m.dilation_schedule) d = std::min(d, cap);
    };
  }
  if (axis == "conditioning_form") {
    const Conditioning c = conditioning_from_string(arm);
    return [c](GenConfig&, ModelConfig& m, TrainConfig&) { m.conditioning = c; };
  }
  if (axis == "assimilation_channels") {
    NIMBUS_USAGE_CHECK(arm == "all" || arm == "winds" || arm == "latents" || arm == "none",
                       "assimilation arm must be all|winds|latents|none");
    return [](GenConfig&, ModelConfig&, TrainConfig&) {};
  }
  throw UsageError("unknown ablation axis '" + axis + "'");
}

// sample postprocessing for arms that restrict input channels
std::vector<Sample> restrict_for_arm(const std::string& axis, const std::string& arm,
                                     std::vector<Sample> samples) {
  if (axis != "assimilation_channels" || arm == "all") return samples;
  std::vector<int> keep;
  if (arm == "winds") keep = {0, 1};
  if (arm == "latents") keep = {2, 3};
  if (arm == "none") keep = {};
  if (keep.empty()) return samples;  // handled via InputSpec.assim = false
  for (Sample& s : samples) s = restrict_assim_channels(s, keep);
  return samples;
}

}  // namespace

long long arm_param_count(const ExperimentSpec& spec, const std::string& axis,
                          const std::string& arm) {
  GenConfig gen = spec.gen;
  ModelConfig model_cfg = spec.model;
  TrainConfig train_cfg = spec.train;
  arm_adjuster(axis, arm)(gen, model_cfg, train_cfg);
  InputSpec ispec = InputSpec::for_mode(train_cfg.mode);
  ispec.radar_slices = gen.geometry.radar_slices;
  ispec.sat_slices = gen.geometry.sat_slices;
  ispec.assim_slices = gen.geometry.assim_slices;
  if (axis == "assimilation_channels") {
    if (arm == "winds" || arm == "latents") ispec.assim_channels = 2;
    if (arm == "none") ispec.assim = false;
  }
  MetNet2 probe(model_cfg, ispec, 0);
  return probe.params().total_size();
}

AblationResult run_ablation(const ExperimentSpec& spec, const std::string& axis,
                            const std::vector<std::string>& arms) {
  NIMBUS_USAGE_CHECK(arms.size() >= 2, "an ablation needs at least two arms");
  AblationResult result;
  result.axis = axis;
  result.baseline_arm = arms.back();

  if (axis == "max_dilation") {
    // equal depth and parameter count across arms is part of the contract
    const long long base = arm_param_count(spec, axis, arms.front());
    for (const std::string& arm : arms)
      NIMBUS_CHECK(arm_param_count(spec, axis, arm) == base,
                   "max_dilation arms differ in parameter count");
  }

  std::set<int> lead_set;
  std::map<std::string, std::map<int, std::vector<double>>> csi_acc;  // arm -> lead -> seeds

  for (const std::string& arm : arms) {
    for (std::uint64_t seed : spec.seeds) {
      auto adjust_base = arm_adjuster(axis, arm);
      auto adjust = [&](GenConfig& g, ModelConfig& m, TrainConfig& t) {
        adjust_base(g, m, t);
        if (axis == "assimilation_channels") {
          // channel-restricted arms are wired through the input spec below
        }
      };
      ExperimentSpec arm_spec = spec;
      TrainedArm trained;
      if (axis == "assimilation_channels" && arm != "all") {
        // cut once, then restrict channels before training
        GenConfig gen = spec.gen;
        ModelConfig model_cfg = spec.model;
        TrainConfig train_cfg = spec.train;
        gen.seed = seed;
        train_cfg.seed = hash_combine(seed, 0x747261696eULL);
        gen.geometry.context_extent = model_cfg.context_extent;
        gen.geometry.target_extent = model_cfg.target_extent;
        std::vector<Sample> train_set =
            restrict_for_arm(axis, arm, cut_samples(gen, "train", gen.train_samples));
        trained.val = restrict_for_arm(axis, arm, cut_samples(gen, "val", gen.val_samples));
        trained.test = restrict_for_arm(axis, arm, cut_samples(gen, "test", gen.test_samples));
        InputSpec ispec = InputSpec::for_mode(train_cfg.mode);
        ispec.radar_slices = gen.geometry.radar_slices;
        ispec.sat_slices = gen.geometry.sat_slices;
        ispec.assim_slices = gen.geometry.assim_slices;
        if (arm == "winds" || arm == "latents") ispec.assim_channels = 2;
        if (arm == "none") ispec.assim = false;
        trained.model = std::make_unique<MetNet2>(model_cfg, ispec, seed);
        trained.result = train(train_cfg, *trained.model, train_set, trained.val);
      } else {
        trained = train_arm(arm_spec, seed, adjust);
      }

      Forecaster fc = model_forecaster(*trained.model, &trained.result.checkpoints);
      ScoreReport r = score_forecaster("model", fc, trained.val, trained.test,
                                       {spec.eval_rates.front()});
      for (const ScoreRow& row : r.rows)
        if (row.metric == "csi.model") {
          lead_set.insert(row.lead_minutes);
          csi_acc[arm][row.lead_minutes].push_back(row.value);
        }
    }
  }

  const std::vector<int> leads(lead_set.begin(), lead_set.end());
  std::map<std::string, std::vector<double>> mean_csi;
  for (const std::string& arm : arms) {
    std::vector<double> means;
    for (int lead : leads) {
      const auto& v = csi_acc[arm][lead];
      double m = 0.0;
      for (double x : v) m += x;
      means.push_back(v.empty() ? 0.0 : m / static_cast<double>(v.size()));
    }
    mean_csi[arm] = std::move(means);
  }

  for (const std::string& arm : arms) {
    AblationArm a;
    a.arm = arm;
    a.param_count = arm_param_count(spec, axis, arm);
    ModelConfig m = spec.model;
    GenConfig g = spec.gen;
    TrainConfig t = spec.train;
    arm_adjuster(axis, arm)(g, m, t);
    a.depth = m.stack_count * m.blocks_per_stack * 2;
    a.lead_minutes = leads;
    a.csi_by_lead = mean_csi[arm];
    for (std::size_t i = 0; i < leads.size(); ++i)
      a.csi_diff_by_lead.push_back(mean_csi[arm][i] - mean_csi[result.baseline_arm][i]);
    for (std::size_t i = 0; i < leads.size(); ++i) {
      ScoreRow row;
      row.metric = "csi.arm_" + arm;
      row.rate = spec.eval_rates.front();
      row.lead_minutes = leads[i];
      row.value = a.csi_by_lead[i];
      result.report.add(row);
      ScoreRow diff;
      diff.metric = "csidiff.arm_" + arm;
      diff.rate = spec.eval_rates.front();
      diff.lead_minutes = leads[i];
      diff.value = a.csi_diff_by_lead[i];
      result.report.add(diff);
    }
    result.arms.push_back(std::move(a));
  }
  return result;
}

std::vector<std::string> emit_report(const ScoreReport& report, const std::string& dir) {
  fs::create_directories(dir);
  // group rows into families by the metric-name prefix
  std::map<std::string, ScoreReport> families;
  for (const ScoreRow& row : report.rows) {
    const std::size_t dot = row.metric.find('.');
    const std::string family = dot == std::string::npos ? row.metric : row.metric.substr(0, dot);
    families[family].add(row);
  }

  std::vector<std::string> written;
  for (const auto& [family, rows] : families) {
    const std::string csv_path = family + ".csv";
    std::ofstream f(fs::path(dir) / csv_path);
    if (!f) throw IoError("cannot write " + csv_path);
    f << score_report_csv(rows);
    written.push_back(csv_path);

    // one plot per family: value vs lead, one series per (metric, rate)
    std::map<std::pair<std::string, double>, PlotSeries> series;
    for (const ScoreRow& row : rows.rows) {
      PlotSeries& s = series[{row.metric, row.rate}];
      if (s.label.empty()) {
        s.label = row.metric;
        if (row.rate > 0.0) s.label += " r>=" + format_double(row.rate);
      }
      s.x.push_back(row.lead_minutes);
      s.y.push_back(row.value);
    }
    std::vector<PlotSeries> list;
    for (auto& [key, s] : series) {
      // keep series sorted by lead for sane polylines
      std::vector<std::size_t> idx(s.x.size());
      for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
      std::sort(idx.begin(), idx.end(),
                [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
      PlotSeries sorted;
      sorted.label = s.label;
      for (std::size_t i : idx) {
        sorted.x.push_back(s.x[i]);
        sorted.y.push_back(s.y[i]);
      }
      list.push_back(std::move(sorted));
    }
    const std::string svg_path = family + ".svg";
    std::ofstream sf(fs::path(dir) / svg_path);
    sf << svg_line_plot(list, family, "lead minutes", family);
    written.push_back(svg_path);
  }
  return written;
}

void write_manifest(const std::string& dir, const std::vector<std::string>& files,
                    const std::vector<std::string>& notes) {
  std::ofstream mf(fs::path(dir) / "manifest.txt");
  if (!mf) throw IoError("cannot write manifest in " + dir);
  for (const std::string& rel : files) {
    std::ifstream f(fs::path(dir) / rel, std::ios::binary);
    if (!f) throw IoError("manifest refers to missing file " + rel);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    char hash[24];
    std::snprintf(hash, sizeof(hash), "%016llx",
                  static_cast<unsigned long long>(fnv1a(content.data(), content.size())));
    mf << rel << "\t" << hash << "\n";
  }
  for (const std::string& note : notes) mf << "# " << note << "\n";
}

void prepare_out_dir(const std::string& dir, bool overwrite) {
  if (fs::exists(dir) && !fs::is_empty(dir)) {
    NIMBUS_USAGE_CHECK(overwrite,
                       "output directory " + dir + " is not empty (use --overwrite)");
    fs::remove_all(dir);
  }
  fs::create_directories(dir);
}

}  // namespace nimbus
