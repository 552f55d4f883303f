#include "nimbus/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <filesystem>
#include <fstream>
#include <sstream>

namespace nimbus {

namespace fs = std::filesystem;

double norm_rate(double rate) { return std::log1p(rate); }

const std::vector<double> kReportingBucketEdges = {0.2, 1.0, 2.0, 4.0, 8.0, 20.0};

int reporting_bucket(double rate) {
  int b = 0;
  for (double edge : kReportingBucketEdges)
    if (rate >= edge) ++b;
  return b;
}

std::vector<std::string> reporting_bucket_labels() {
  return {"0", "0.2", "1", "2", "4", "8", ">=20"};
}

PrecipSource trajectory_source(const Trajectory& traj) {
  return [&traj](int step) -> const Tensor& {
    NIMBUS_CHECK(step >= 0 && step < traj.steps(),
                 "step " + std::to_string(step) + " outside trajectory");
    return traj.precip[static_cast<std::size_t>(step)];
  };
}

namespace {

// mean-pool a native window down 4x; used for every rate-like field
Tensor pool4(const Tensor& native, int y0, int x0, int out_extent) {
  Tensor out(Shape{out_extent, out_extent});
  for (int y = 0; y < out_extent; ++y)
    for (int x = 0; x < out_extent; ++x) {
      double s = 0.0;
      for (int dy = 0; dy < 4; ++dy)
        for (int dx = 0; dx < 4; ++dx) s += native.at2(y0 + 4 * y + dy, x0 + 4 * x + dx);
      out.at2(y, x) = s * 0.0625;
    }
  return out;
}

Tensor subsample4(const Tensor& native, int y0, int x0, int out_extent) {
  Tensor out(Shape{out_extent, out_extent});
  for (int y = 0; y < out_extent; ++y)
    for (int x = 0; x < out_extent; ++x) out.at2(y, x) = native.at2(y0 + 4 * y, x0 + 4 * x);
  return out;
}

Tensor cut_window(const Tensor& field, int y0, int x0, int extent) {
  Tensor out(Shape{extent, extent});
  for (int y = 0; y < extent; ++y)
    for (int x = 0; x < extent; ++x) out.at2(y, x) = field.at2(y0 + y, x0 + x);
  return out;
}

void apply_log1p(Tensor& t) {
  for (std::int64_t i = 0; i < t.size(); ++i) t[i] = norm_rate(t[i]);
}

}  // namespace

NwpForecast synth_nwp(const World& world, const PrecipSource& precip, int t0,
                      const LeadTime& lead, const NwpDegradation& deg) {
  NIMBUS_CHECK(deg.init_delay >= 0, "negative init delay");
  NIMBUS_CHECK(deg.wind_sigma >= 0.0 && deg.blur_sigma >= 0.0 && deg.bias > 0.0,
               "bad degradation profile");
  const int lead_steps =
      lead.minutes / static_cast<int>(world.config().step_minutes + 0.5);
  const int start = t0 - deg.init_delay;
  NIMBUS_CHECK(start >= 0, "nwp init time before trajectory start");
  CounterRng noise(hash_combine(world.seed(), 0x6e7770ULL));

  // rerun the dynamics from the stale initial state with perturbed winds;
  // with zero degradation this reproduces the true evolution bit for bit
  Tensor p = precip(start);
  const int hour_steps = static_cast<int>(60.0 / world.config().step_minutes + 0.5);
  std::deque<Tensor> tail;  // forecast fields over the final hour
  tail.push_back(p);
  for (int s = start; s < t0 + lead_steps; ++s) {
    Tensor wu, wv;
    world.winds(s, &wu, &wv);
    if (deg.wind_sigma > 0.0) {
      const double du = deg.wind_sigma * noise.normal(0x7775ULL, static_cast<std::uint64_t>(s));
      const double dv = deg.wind_sigma * noise.normal(0x7776ULL, static_cast<std::uint64_t>(s));
      for (std::int64_t i = 0; i < wu.size(); ++i) {
        wu[i] += du;
        wv[i] += dv;
      }
    }
    p = world.advance(p, s, wu, wv);
    tail.push_back(p);
    if (static_cast<int>(tail.size()) > hour_steps) tail.pop_front();
  }

  NwpForecast out;
  out.instantaneous = deg.blur_sigma > 0.0 ? gaussian_blur(p, deg.blur_sigma) : p;
  Tensor cum(p.shape());
  const double frac = world.config().step_minutes / 60.0;
  for (const Tensor& f : tail)
    for (std::int64_t i = 0; i < cum.size(); ++i) cum[i] += frac * f[i];
  out.cumulative = deg.blur_sigma > 0.0 ? gaussian_blur(cum, deg.blur_sigma) : std::move(cum);
  if (deg.bias != 1.0) {
    out.instantaneous *= deg.bias;
    out.cumulative *= deg.bias;
  }
  return out;
}

Sample make_sample(const World& world, const PrecipSource& precip, int t0, const LeadTime& lead,
                   TargetKind kind, const SampleGeometry& geom, const Tensor& quality_mask,
                   const NwpDegradation* nwp, int center_y, int center_x) {
  const WorldConfig& wc = world.config();
  const int n = wc.extent;
  const int nat = geom.native_context();
  NIMBUS_CHECK(nat <= n, "native context " + std::to_string(nat) + " exceeds world extent " +
                             std::to_string(n));
  NIMBUS_CHECK(geom.target_extent <= nat, "target window larger than context");
  if (center_y < 0) center_y = n / 2;
  if (center_x < 0) center_x = n / 2;
  const int step_per_lead = static_cast<int>(wc.step_minutes + 0.5);
  const int lead_steps = lead.minutes / step_per_lead;
  NIMBUS_CHECK(t0 - geom.history_steps() >= 0, "sample history reaches before step 0");
  const int cy0 = center_y - nat / 2, cx0 = center_x - nat / 2;  // native context origin
  NIMBUS_CHECK(cy0 >= 0 && cx0 >= 0 && cy0 + nat <= n && cx0 + nat <= n,
               "context window at the requested center leaves the world");
  const int ty0 = center_y - geom.target_extent / 2;             // native target origin
  const int tx0 = center_x - geom.target_extent / 2;
  const int ce = geom.context_extent;

  Sample s;
  s.t0 = t0;
  s.lead = lead;
  s.kind = kind;
  s.center_y = center_y;
  s.center_x = center_x;

  // radar: the most recent `radar_slices` steps, oldest first
  s.inputs.radar = Tensor(Shape{geom.radar_slices, ce, ce, 1});
  for (int j = 0; j < geom.radar_slices; ++j) {
    const int t = t0 - (geom.radar_slices - 1 - j);
    Tensor d = pool4(precip(t), cy0, cx0, ce);
    apply_log1p(d);
    for (int y = 0; y < ce; ++y)
      for (int x = 0; x < ce; ++x) s.inputs.radar.at4(j, y, x, 0) = d.at2(y, x);
  }

  // satellite proxy: blurred precip plus an independent cloud field
  s.inputs.satellite = Tensor(Shape{geom.sat_slices, ce, ce, 2});
  for (int j = 0; j < geom.sat_slices; ++j) {
    const int t = t0 - (geom.sat_slices - 1 - j);
    Tensor blurred = pool4(gaussian_blur(precip(t), 2.0), cy0, cx0, ce);
    apply_log1p(blurred);
    Tensor cl = pool4(world.cloud(t), cy0, cx0, ce);
    for (int y = 0; y < ce; ++y)
      for (int x = 0; x < ce; ++x) {
        s.inputs.satellite.at4(j, y, x, 0) = blurred.at2(y, x);
        s.inputs.satellite.at4(j, y, x, 1) = cl.at2(y, x);
      }
  }

  // assimilation: winds plus the latent drivers
  s.inputs.assim = Tensor(Shape{geom.assim_slices, ce, ce, 4});
  for (int j = 0; j < geom.assim_slices; ++j) {
    const int t = t0 - (geom.assim_slices - 1 - j);
    Tensor wu_full, wv_full;
    world.winds(t, &wu_full, &wv_full);
    Tensor wu = pool4(wu_full, cy0, cx0, ce);
    Tensor wv = pool4(wv_full, cy0, cx0, ce);
    Tensor l0 = pool4(world.latent(t, 0), cy0, cx0, ce);
    Tensor l1 = pool4(world.latent(t, 1), cy0, cx0, ce);
    for (int y = 0; y < ce; ++y)
      for (int x = 0; x < ce; ++x) {
        s.inputs.assim.at4(j, y, x, 0) = wu.at2(y, x);
        s.inputs.assim.at4(j, y, x, 1) = wv.at2(y, x);
        s.inputs.assim.at4(j, y, x, 2) = l0.at2(y, x);
        s.inputs.assim.at4(j, y, x, 3) = l1.at2(y, x);
      }
  }

  // geo: absolute coordinates and terrain, subsampled
  s.inputs.geo = Tensor(Shape{1, ce, ce, 3});
  Tensor elev = subsample4(world.elevation(), cy0, cx0, ce);
  for (int y = 0; y < ce; ++y)
    for (int x = 0; x < ce; ++x) {
      s.inputs.geo.at4(0, y, x, 0) = 2.0 * (cx0 + 4 * x) / (n - 1) - 1.0;
      s.inputs.geo.at4(0, y, x, 1) = 2.0 * (cy0 + 4 * y) / (n - 1) - 1.0;
      s.inputs.geo.at4(0, y, x, 2) = elev.at2(y, x);
    }

  // forecast-time features on a diurnal cycle
  s.inputs.time_feats = Tensor(Shape{1, ce, ce, 3});
  {
    const double day_minutes = 1440.0;
    const double phase = std::fmod(t0 * wc.step_minutes, day_minutes) / day_minutes;
    for (int y = 0; y < ce; ++y)
      for (int x = 0; x < ce; ++x) {
        s.inputs.time_feats.at4(0, y, x, 0) = std::sin(2.0 * M_PI * phase);
        s.inputs.time_feats.at4(0, y, x, 1) = std::cos(2.0 * M_PI * phase);
        s.inputs.time_feats.at4(0, y, x, 2) = phase;
      }
  }

  // target at native resolution
  if (kind == TargetKind::Instantaneous) {
    s.target = cut_window(precip(t0 + lead_steps), ty0, tx0, geom.target_extent);
  } else {
    NIMBUS_CHECK(lead.minutes >= 60, "cumulative target needs lead >= 60 minutes");
    const int hour_steps = static_cast<int>(60.0 / wc.step_minutes + 0.5);
    Tensor acc(Shape{geom.target_extent, geom.target_extent});
    const double frac = wc.step_minutes / 60.0;
    for (int k = 0; k < hour_steps; ++k) {
      Tensor w = cut_window(precip(t0 + lead_steps - k), ty0, tx0, geom.target_extent);
      for (std::int64_t i = 0; i < acc.size(); ++i) acc[i] += frac * w[i];
    }
    s.target = std::move(acc);
  }

  s.mask = cut_window(quality_mask, ty0, tx0, geom.target_extent);
  s.persistence = cut_window(precip(t0), ty0, tx0, geom.target_extent);

  if (nwp != nullptr) {
    NwpForecast fc = synth_nwp(world, precip, t0, lead, *nwp);
    Tensor inst = pool4(fc.instantaneous, cy0, cx0, ce);
    Tensor cum = pool4(fc.cumulative, cy0, cx0, ce);
    apply_log1p(inst);
    apply_log1p(cum);
    s.inputs.nwp = Tensor(Shape{1, ce, ce, 2});
    for (int y = 0; y < ce; ++y)
      for (int x = 0; x < ce; ++x) {
        s.inputs.nwp.at4(0, y, x, 0) = inst.at2(y, x);
        s.inputs.nwp.at4(0, y, x, 1) = cum.at2(y, x);
      }
    const Tensor& native = kind == TargetKind::Instantaneous ? fc.instantaneous : fc.cumulative;
    s.nwp_target = cut_window(native, ty0, tx0, geom.target_extent);
  }
  return s;
}

Sample restrict_assim_channels(const Sample& s, const std::vector<int>& channels) {
  Sample out = s;
  const int slices = s.inputs.assim.dim(0), h = s.inputs.assim.dim(1), w = s.inputs.assim.dim(2);
  const int cin = s.inputs.assim.dim(3);
  out.inputs.assim = Tensor(Shape{slices, h, w, static_cast<int>(channels.size())});
  for (int j = 0; j < slices; ++j)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (std::size_t c = 0; c < channels.size(); ++c) {
          NIMBUS_CHECK(channels[c] >= 0 && channels[c] < cin, "assim channel out of range");
          out.inputs.assim.at4(j, y, x, static_cast<int>(c)) =
              s.inputs.assim.at4(j, y, x, channels[c]);
        }
  return out;
}

std::vector<double> event_frequency(const std::vector<Sample>& samples) {
  NIMBUS_CHECK(!samples.empty(), "event_frequency of an empty dataset");
  std::vector<double> counts(kReportingBucketEdges.size() + 1, 0.0);
  double total = 0.0;
  for (const Sample& s : samples)
    for (std::int64_t i = 0; i < s.target.size(); ++i) {
      counts[static_cast<std::size_t>(reporting_bucket(s.target[i]))] += 1.0;
      total += 1.0;
    }
  for (double& c : counts) c /= total;
  return counts;
}

ResampleSchedule resample(const std::vector<int>& sample_buckets,
                          const std::vector<double>& bucket_weights, int draws,
                          std::uint64_t seed) {
  const std::size_t nb = kReportingBucketEdges.size() + 1;
  NIMBUS_CHECK(bucket_weights.size() == nb,
               "expected " + std::to_string(nb) + " bucket weights");
  double wsum = 0.0;
  for (double w : bucket_weights) {
    NIMBUS_CHECK(w >= 0.0, "bucket weights must be non-negative");
    wsum += w;
  }
  NIMBUS_CHECK(wsum > 0.0, "bucket weights must not all be zero");

  std::vector<std::vector<int>> by_bucket(nb);
  for (std::size_t i = 0; i < sample_buckets.size(); ++i)
    by_bucket[static_cast<std::size_t>(sample_buckets[i])].push_back(static_cast<int>(i));

  ResampleSchedule out;
  // weights multiply the natural frequency: P(sample) proportional to
  // w[bucket(sample)], so uniform weights reduce to a uniform shuffle
  std::vector<double> mass(nb, 0.0);
  double mass_sum = 0.0;
  for (std::size_t b = 0; b < nb; ++b) {
    if (bucket_weights[b] > 0.0 && by_bucket[b].empty()) {
      out.dropped_buckets.push_back(static_cast<int>(b));
      continue;
    }
    mass[b] = bucket_weights[b] * static_cast<double>(by_bucket[b].size());
    mass_sum += mass[b];
  }
  NIMBUS_CHECK(mass_sum > 0.0, "no samples fall in any positively weighted bucket");

  CounterRng rng(hash_combine(seed, 0x72657361ULL));
  out.order.reserve(static_cast<std::size_t>(draws));
  for (int d = 0; d < draws; ++d) {
    double u = rng.uniform(0x6472ULL, static_cast<std::uint64_t>(d)) * mass_sum;
    std::size_t b = 0;
    while (b + 1 < nb && u >= mass[b]) {
      u -= mass[b];
      ++b;
    }
    while (by_bucket[b].empty()) ++b;  // numeric edge: walk to a populated bucket
    const auto& pool = by_bucket[b];
    const std::size_t pick = std::min<std::size_t>(
        pool.size() - 1,
        static_cast<std::size_t>(rng.uniform(0x706bULL, static_cast<std::uint64_t>(d)) *
                                 static_cast<double>(pool.size())));
    out.order.push_back(pool[pick]);
  }
  return out;
}

ResampleSchedule resample(const std::vector<Sample>& samples,
                          const std::vector<double>& bucket_weights, int draws,
                          std::uint64_t seed) {
  std::vector<int> buckets;
  buckets.reserve(samples.size());
  for (const Sample& s : samples) buckets.push_back(reporting_bucket(s.target.max()));
  return resample(buckets, bucket_weights, draws, seed);
}

SplitPlan SplitPlan::layout(int history, int max_lead_steps, int train_span, int val_span,
                            int test_span, int blackout_steps, int warmup_steps) {
  SplitPlan p;
  p.history = history;
  p.max_lead_steps = max_lead_steps;
  p.blackout_steps = blackout_steps;
  const int gap = max_lead_steps + blackout_steps + history;
  p.train_begin = history + warmup_steps;
  p.train_end = p.train_begin + train_span;
  p.val_begin = p.train_end + gap;
  p.val_end = p.val_begin + val_span;
  p.test_begin = p.val_end + gap;
  p.test_end = p.test_begin + test_span;
  p.validate();
  return p;
}

void SplitPlan::validate() const {
  NIMBUS_CHECK(train_begin >= history, "train range reaches before step 0");
  NIMBUS_CHECK(train_begin < train_end && val_begin < val_end && test_begin < test_end,
               "empty split range");
  // a sample at t0 touches [t0-history, t0+max_lead]; spans of different
  // splits must clear each other by at least the blackout
  const int gap_tv = (val_begin - history) - (train_end - 1 + max_lead_steps);
  const int gap_vt = (test_begin - history) - (val_end - 1 + max_lead_steps);
  NIMBUS_CHECK(gap_tv > blackout_steps, "train/val spans violate the blackout");
  NIMBUS_CHECK(gap_vt > blackout_steps, "val/test spans violate the blackout");
}

const char* SplitPlan::split_of(int t0) const {
  if (t0 >= train_begin && t0 < train_end) return "train";
  if (t0 >= val_begin && t0 < val_end) return "val";
  if (t0 >= test_begin && t0 < test_end) return "test";
  return "";
}

namespace {

struct PlannedSample {
  int trajectory = 0;
  int t0 = 0;
  LeadTime lead;
  TargetKind kind = TargetKind::Instantaneous;
  std::string split;
  int center_y = -1, center_x = -1;
};

struct GenPlan {
  SplitPlan split;
  std::vector<PlannedSample> samples;  // sorted by (trajectory, cut step)
};

GenPlan plan_samples(const GenConfig& cfg) {
  NIMBUS_CHECK(cfg.trajectories >= 1, "need at least one trajectory");
  NIMBUS_CHECK(cfg.min_lead_minutes >= 2 && cfg.min_lead_minutes <= cfg.max_lead_minutes,
               "bad lead range");
  const int step_min = static_cast<int>(cfg.world.step_minutes + 0.5);
  NIMBUS_CHECK(step_min == 2, "sampling assumes 2-minute steps");
  const int max_lead_steps = cfg.max_lead_minutes / step_min;
  const int hist = cfg.geometry.history_steps();

  auto per_traj = [&](int total, int k) {
    return total / cfg.trajectories + (k < total % cfg.trajectories ? 1 : 0);
  };

  CounterRng rng(hash_combine(cfg.seed, 0x706c616eULL));
  GenPlan plan;
  int id = 0;
  for (int k = 0; k < cfg.trajectories; ++k) {
    const int n_train = per_traj(cfg.train_samples, k);
    const int n_val = per_traj(cfg.val_samples, k);
    const int n_test = per_traj(cfg.test_samples, k);
    const int span_train = std::max(48, n_train / 2);
    const int span_val = std::max(24, n_val / 2);
    const int span_test = std::max(24, n_test / 2);
    SplitPlan split = SplitPlan::layout(hist, max_lead_steps, span_train, span_val, span_test,
                                        360, cfg.warmup_steps);
    if (k == 0) plan.split = split;

    struct Want {
      const char* name;
      int count, begin, end;
    };
    const Want wants[] = {{"train", n_train, split.train_begin, split.train_end},
                          {"val", n_val, split.val_begin, split.val_end},
                          {"test", n_test, split.test_begin, split.test_end}};
    for (const Want& w : wants) {
      for (int i = 0; i < w.count; ++i, ++id) {
        PlannedSample ps;
        ps.trajectory = k;
        ps.split = w.name;
        ps.t0 = w.begin + static_cast<int>(rng.uniform(1, static_cast<std::uint64_t>(id)) *
                                           (w.end - w.begin));
        const bool cumulative = cfg.cumulative && (id % 2 == 1);
        const int lo = cumulative ? std::max(60, cfg.min_lead_minutes) : cfg.min_lead_minutes;
        NIMBUS_CHECK(lo <= cfg.max_lead_minutes,
                     "cumulative samples need max_lead_minutes >= 60");
        const int nsteps = (cfg.max_lead_minutes - lo) / step_min + 1;
        const int pick = static_cast<int>(rng.uniform(2, static_cast<std::uint64_t>(id)) * nsteps);
        ps.lead = LeadTime::from_minutes(lo + step_min * std::min(pick, nsteps - 1),
                                         cfg.max_lead_minutes);
        ps.kind = cumulative ? TargetKind::Cumulative : TargetKind::Instantaneous;
        {
          // any center whose context window stays inside the world
          const int nat = cfg.geometry.native_context();
          const int lo_c = nat / 2, hi_c = cfg.world.extent - (nat + 1) / 2;
          NIMBUS_CHECK(hi_c >= lo_c, "world too small for the context window");
          ps.center_y = lo_c + static_cast<int>(
              rng.uniform(3, static_cast<std::uint64_t>(id)) * (hi_c - lo_c + 1));
          ps.center_x = lo_c + static_cast<int>(
              rng.uniform(4, static_cast<std::uint64_t>(id)) * (hi_c - lo_c + 1));
          ps.center_y = std::min(ps.center_y, hi_c);
          ps.center_x = std::min(ps.center_x, hi_c);
        }
        plan.samples.push_back(ps);
      }
    }
  }
  std::stable_sort(plan.samples.begin(), plan.samples.end(),
                   [step_min](const PlannedSample& a, const PlannedSample& b) {
                     const int ca = a.t0 + a.lead.minutes / step_min;
                     const int cb = b.t0 + b.lead.minutes / step_min;
                     if (a.trajectory != b.trajectory) return a.trajectory < b.trajectory;
                     return ca < cb;
                   });
  return plan;
}

const char* kind_str(TargetKind k) {
  return k == TargetKind::Instantaneous ? "inst" : "cum";
}

TargetKind kind_from(const std::string& s) {
  if (s == "inst") return TargetKind::Instantaneous;
  if (s == "cum") return TargetKind::Cumulative;
  throw DataError("unknown target kind '" + s + "'");
}

// walks one trajectory with a sliding window wide enough for every cut
template <typename OnSample>
void walk_trajectory(const GenConfig& cfg, int traj_index, const std::vector<PlannedSample>& plan,
                     const OnSample& on_sample) {
  const int step_min = static_cast<int>(cfg.world.step_minutes + 0.5);
  World world(cfg.world, hash_combine(cfg.seed, static_cast<std::uint64_t>(traj_index)));
  const int hist = cfg.geometry.history_steps();
  const int window = hist + cfg.max_lead_minutes / step_min + 1;

  int last_cut = 0;
  for (const PlannedSample& ps : plan)
    last_cut = std::max(last_cut, ps.t0 + ps.lead.minutes / step_min);

  std::deque<Tensor> buf;
  int newest = -1;
  Tensor current = world.initial_precip();
  buf.push_back(current);
  newest = 0;
  auto source = [&](int step) -> const Tensor& {
    const int oldest = newest - static_cast<int>(buf.size()) + 1;
    NIMBUS_CHECK(step >= oldest && step <= newest,
                 "step " + std::to_string(step) + " outside the streaming window");
    return buf[static_cast<std::size_t>(step - oldest)];
  };

  std::size_t next = 0;
  for (int t = 0; t <= last_cut; ++t) {
    if (t > newest) {
      Tensor wu, wv;
      world.winds(t - 1, &wu, &wv);
      buf.push_back(world.advance(buf.back(), t - 1, wu, wv));
      if (static_cast<int>(buf.size()) > window) buf.pop_front();
      newest = t;
    }
    while (next < plan.size() &&
           plan[next].t0 + plan[next].lead.minutes / step_min == t) {
      const PlannedSample& ps = plan[next];
      const Tensor& mask = ps.split == "train" ? world.train_mask() : world.eval_mask();
      Sample s = make_sample(world, source, ps.t0, ps.lead, ps.kind, cfg.geometry, mask,
                             cfg.with_nwp ? &cfg.nwp_degradation : nullptr, ps.center_y,
                             ps.center_x);
      on_sample(ps, std::move(s));
      ++next;
    }
  }
}

}  // namespace

DatasetIndex generate_dataset(const GenConfig& cfg, const std::string& dir) {
  cfg.world.validate();
  if (cfg.with_nwp)
    NIMBUS_CHECK(cfg.nwp_degradation.init_delay <= cfg.geometry.history_steps(),
                 "nwp init delay exceeds the stored history");
  GenPlan plan = plan_samples(cfg);

  fs::create_directories(fs::path(dir) / "samples");
  DatasetIndex index;
  index.dir = dir;

  int id = 0;
  for (int k = 0; k < cfg.trajectories; ++k) {
    std::vector<PlannedSample> traj_plan;
    for (const PlannedSample& ps : plan.samples)
      if (ps.trajectory == k) traj_plan.push_back(ps);
    walk_trajectory(cfg, k, traj_plan, [&](const PlannedSample& ps, Sample s) {
      SampleMeta meta;
      meta.id = id++;
      meta.trajectory = k;
      meta.t0 = ps.t0;
      meta.lead_minutes = ps.lead.minutes;
      meta.kind = ps.kind;
      meta.split = ps.split;
      meta.bucket_max = reporting_bucket(s.target.max());
      meta.has_nwp = cfg.with_nwp;
      char name[64];
      std::snprintf(name, sizeof(name), "sample_%06d.tnsr", meta.id);
      std::vector<Tensor> records = {s.inputs.radar, s.inputs.satellite, s.inputs.assim,
                                     s.inputs.geo,   s.inputs.time_feats, s.target,
                                     s.mask,         s.persistence};
      if (cfg.with_nwp) {
        records.push_back(s.inputs.nwp);
        records.push_back(s.nwp_target);
      }
      save_tnsr_records((fs::path(dir) / "samples" / name).string(), records, cfg.dtype);
      index.entries.push_back(meta);
    });
  }

  std::ofstream idx(fs::path(dir) / "index.txt");
  if (!idx) throw IoError("cannot write dataset index in " + dir);
  idx << "# id trajectory t0 lead_minutes kind split bucket_max has_nwp\n";
  for (const SampleMeta& m : index.entries)
    idx << m.id << ' ' << m.trajectory << ' ' << m.t0 << ' ' << m.lead_minutes << ' '
        << kind_str(m.kind) << ' ' << m.split << ' ' << m.bucket_max << ' '
        << (m.has_nwp ? 1 : 0) << "\n";
  return index;
}

DatasetIndex load_dataset_index(const std::string& dir) {
  std::ifstream idx(fs::path(dir) / "index.txt");
  if (!idx) throw IoError("no dataset index in " + dir);
  DatasetIndex index;
  index.dir = dir;
  std::string line;
  while (std::getline(idx, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    SampleMeta m;
    std::string kind;
    int has_nwp = 0;
    ss >> m.id >> m.trajectory >> m.t0 >> m.lead_minutes >> kind >> m.split >> m.bucket_max >>
        has_nwp;
    if (!ss) throw DataError("malformed index line: " + line);
    m.kind = kind_from(kind);
    m.has_nwp = has_nwp != 0;
    index.entries.push_back(m);
  }
  return index;
}

Sample load_sample(const DatasetIndex& index, int id) {
  const SampleMeta* meta = nullptr;
  for (const SampleMeta& m : index.entries)
    if (m.id == id) meta = &m;
  NIMBUS_CHECK(meta != nullptr, "sample id " + std::to_string(id) + " not in index");
  char name[64];
  std::snprintf(name, sizeof(name), "sample_%06d.tnsr", id);
  std::vector<Tensor> rec =
      load_tnsr_records((fs::path(index.dir) / "samples" / name).string());
  NIMBUS_CHECK(rec.size() == (meta->has_nwp ? 10u : 8u), "unexpected record count in sample file");
  Sample s;
  s.inputs.radar = std::move(rec[0]);
  s.inputs.satellite = std::move(rec[1]);
  s.inputs.assim = std::move(rec[2]);
  s.inputs.geo = std::move(rec[3]);
  s.inputs.time_feats = std::move(rec[4]);
  s.target = std::move(rec[5]);
  s.mask = std::move(rec[6]);
  s.persistence = std::move(rec[7]);
  if (meta->has_nwp) {
    s.inputs.nwp = std::move(rec[8]);
    s.nwp_target = std::move(rec[9]);
  }
  s.lead = LeadTime::from_minutes(meta->lead_minutes);
  s.kind = meta->kind;
  s.t0 = meta->t0;
  return s;
}

std::vector<Sample> cut_samples(const GenConfig& cfg, const std::string& split, int count) {
  cfg.world.validate();
  GenPlan plan = plan_samples(cfg);
  std::vector<Sample> out;
  for (int k = 0; k < cfg.trajectories && static_cast<int>(out.size()) < count; ++k) {
    std::vector<PlannedSample> traj_plan;
    for (const PlannedSample& ps : plan.samples)
      if (ps.trajectory == k && ps.split == split) traj_plan.push_back(ps);
    walk_trajectory(cfg, k, traj_plan, [&](const PlannedSample&, Sample s) {
      if (static_cast<int>(out.size()) < count) out.push_back(std::move(s));
    });
  }
  NIMBUS_CHECK(static_cast<int>(out.size()) == count,
               "planned dataset too small for " + std::to_string(count) + " " + split +
                   " samples");
  return out;
}

}  // namespace nimbus
