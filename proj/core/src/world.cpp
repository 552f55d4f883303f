#include "nimbus/world.hpp"

#include <algorithm>
#include <cmath>

namespace nimbus {

void WorldConfig::validate() const {
  NIMBUS_CHECK(extent >= 16, "world extent too small");
  NIMBUS_CHECK(wind_cap >= 0.0 && wind_amp >= 0.0, "negative wind settings");
  NIMBUS_CHECK(diffusion >= 0.0 && diffusion <= 1.0, "diffusion must be in [0,1]");
  NIMBUS_CHECK(decay >= 0.0 && decay < 1.0, "decay must be in [0,1)");
  NIMBUS_CHECK(rate_cap > 0.0, "rate cap must be positive");
  NIMBUS_CHECK(noise_cells >= 2, "noise lattice too fine");
  NIMBUS_CHECK(wind_period >= 1 && latent_period >= 1, "field periods must be positive");
  NIMBUS_CHECK(eval_mask_coverage > 0.0 && eval_mask_coverage <= 1.0, "bad mask coverage");
}

namespace {

double smoothstep(double x) { return x * x * (3.0 - 2.0 * x); }

double clampd(double v, double lo, double hi) { return std::min(std::max(v, lo), hi); }

}  // namespace

World::World(WorldConfig config, std::uint64_t seed)
    : cfg_(std::move(config)), seed_(seed), rng_(hash_combine(seed, 0x776f726c64ULL)) {
  cfg_.validate();
  // static terrain: two octaves of value noise squashed to [0,1]
  Tensor base = smooth_noise(0x656c6576ULL, 0);
  const int n = cfg_.extent;
  elevation_ = Tensor(Shape{n, n});
  for (int i = 0; i < n * n; ++i)
    elevation_[i] = 1.0 / (1.0 + std::exp(-1.2 * base[i]));

  // quality mask: union of seeded disks grown until coverage is reached,
  // mimicking overlapping radar ranges
  eval_mask_ = Tensor(Shape{n, n});
  const auto target = static_cast<std::int64_t>(cfg_.eval_mask_coverage * n * n);
  std::int64_t covered = 0;
  for (int disk = 0; covered < target && disk < 4096; ++disk) {
    const double cy = rng_.uniform(0x6d61736bULL, disk, 0) * n;
    const double cx = rng_.uniform(0x6d61736bULL, disk, 1) * n;
    const double r = (0.08 + 0.10 * rng_.uniform(0x6d61736bULL, disk, 2)) * n;
    const int y0 = std::max(0, static_cast<int>(cy - r)), y1 = std::min(n - 1, static_cast<int>(cy + r));
    const int x0 = std::max(0, static_cast<int>(cx - r)), x1 = std::min(n - 1, static_cast<int>(cx + r));
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x) {
        const double dy = y - cy, dx = x - cx;
        if (dy * dy + dx * dx <= r * r && eval_mask_.at2(y, x) == 0.0) {
          eval_mask_.at2(y, x) = 1.0;
          ++covered;
        }
      }
  }
  train_mask_ = dilate_mask(eval_mask_, cfg_.train_mask_dilation);
}

Tensor World::smooth_noise(std::uint64_t field, int block) const {
  const int n = cfg_.extent;
  const int cell = cfg_.noise_cells;
  Tensor out(Shape{n, n});
  // two octaves of bilinear value noise; the lattice is materialized once
  // per octave so each draw is hashed exactly once
  for (int octave = 0; octave < 2; ++octave) {
    const int c = octave == 0 ? cell : std::max(2, cell / 2);
    const double amp = octave == 0 ? 1.0 : 0.45;
    const int l = n / c + 3;
    std::vector<double> lattice(static_cast<std::size_t>(l) * l);
    for (int ly = 0; ly < l; ++ly)
      for (int lx = 0; lx < l; ++lx)
        lattice[static_cast<std::size_t>(ly) * l + lx] =
            rng_.normal(field, static_cast<std::uint64_t>(block),
                        static_cast<std::uint64_t>(octave),
                        static_cast<std::uint64_t>(ly) * static_cast<std::uint64_t>(l) + lx);
    for (int y = 0; y < n; ++y) {
      const double fy = static_cast<double>(y) / c;
      const int iy = static_cast<int>(fy);
      const double ty = smoothstep(fy - iy);
      for (int x = 0; x < n; ++x) {
        const double fx = static_cast<double>(x) / c;
        const int ix = static_cast<int>(fx);
        const double tx = smoothstep(fx - ix);
        const double* row0 = lattice.data() + static_cast<std::size_t>(iy) * l + ix;
        const double* row1 = row0 + l;
        out.at2(y, x) += amp * ((1 - ty) * ((1 - tx) * row0[0] + tx * row0[1]) +
                                ty * ((1 - tx) * row1[0] + tx * row1[1]));
      }
    }
  }
  return out;
}

Tensor World::blended_field(std::uint64_t field, int step, int period) const {
  const int block = step / period;
  const double t = smoothstep(static_cast<double>(step - block * period) / period);
  Tensor a = smooth_noise(field, block);
  Tensor b = smooth_noise(field, block + 1);
  for (std::int64_t i = 0; i < a.size(); ++i) a[i] = (1.0 - t) * a[i] + t * b[i];
  return a;
}

void World::winds_at(int step, Tensor* out_u, Tensor* out_v) const {
  if (cfg_.wind_fixed) {
    double u = cfg_.wind_fixed_u, v = cfg_.wind_fixed_v;
    const double m = std::hypot(u, v);
    if (m > cfg_.wind_cap) {
      u *= cfg_.wind_cap / m;
      v *= cfg_.wind_cap / m;
    }
    if (out_u) *out_u = Tensor(Shape{cfg_.extent, cfg_.extent}, u);
    if (out_v) *out_v = Tensor(Shape{cfg_.extent, cfg_.extent}, v);
    return;
  }
  // per-seed drift plus slowly blending spatial variation, magnitude-clamped
  const double angle = 2.0 * M_PI * rng_.uniform(0x64726966ULL, 0);
  const double mag = cfg_.wind_amp * (0.55 + 0.45 * rng_.uniform(0x64726966ULL, 1));
  Tensor u = blended_field(0x77696e6475ULL, step, cfg_.wind_period);
  Tensor v = blended_field(0x77696e6476ULL, step, cfg_.wind_period);
  for (std::int64_t i = 0; i < u.size(); ++i) {
    double uu = mag * std::cos(angle) + cfg_.wind_noise * u[i];
    double vv = mag * std::sin(angle) + cfg_.wind_noise * v[i];
    const double m = std::hypot(uu, vv);
    if (m > cfg_.wind_cap) {
      uu *= cfg_.wind_cap / m;
      vv *= cfg_.wind_cap / m;
    }
    u[i] = uu;
    v[i] = vv;
  }
  if (out_u) *out_u = std::move(u);
  if (out_v) *out_v = std::move(v);
}

void World::winds(int step, Tensor* out_u, Tensor* out_v) const {
  winds_at(step, out_u, out_v);
}

Tensor World::wind_u(int step) const {
  Tensor u;
  winds_at(step, &u, nullptr);
  return u;
}

Tensor World::wind_v(int step) const {
  Tensor v;
  winds_at(step, nullptr, &v);
  return v;
}

Tensor World::latent(int step, int which) const {
  Tensor f = blended_field(which == 0 ? 0x6c617430ULL : 0x6c617431ULL, step, cfg_.latent_period);
  for (std::int64_t i = 0; i < f.size(); ++i) f[i] = 1.0 / (1.0 + std::exp(-1.5 * f[i]));
  return f;
}

Tensor World::cloud(int step) const {
  Tensor f = blended_field(0x636c6f75ULL, step, cfg_.latent_period);
  for (std::int64_t i = 0; i < f.size(); ++i) f[i] = 1.0 / (1.0 + std::exp(-f[i]));
  return f;
}

Tensor World::initial_precip() const {
  Tensor noise = smooth_noise(0x696e6974ULL, 0);
  Tensor p(noise.shape());
  for (std::int64_t i = 0; i < p.size(); ++i) {
    const double v = noise[i] - cfg_.init_threshold;
    p[i] = v > 0.0 ? clampd(cfg_.init_amp * v * v, 0.0, cfg_.rate_cap) : 0.0;
  }
  return p;
}

Tensor advect_semilagrangian(const Tensor& field, const Tensor& wu, const Tensor& wv) {
  const int h = field.dim(0), w = field.dim(1);
  Tensor out(field.shape());
  // periodic domain: mass leaving one edge re-enters opposite, which keeps
  // the long-run rain statistics stationary
  auto wrap = [](int v, int n) {
    v %= n;
    return v < 0 ? v + n : v;
  };
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double sy = y - wv.at2(y, x);
      const double sx = x - wu.at2(y, x);
      const int iy = static_cast<int>(std::floor(sy));
      const int ix = static_cast<int>(std::floor(sx));
      const double ty = sy - iy, tx = sx - ix;
      const int y0 = wrap(iy, h), y1 = wrap(iy + 1, h);
      const int x0 = wrap(ix, w), x1 = wrap(ix + 1, w);
      out.at2(y, x) = (1 - ty) * ((1 - tx) * field.at2(y0, x0) + tx * field.at2(y0, x1)) +
                      ty * ((1 - tx) * field.at2(y1, x0) + tx * field.at2(y1, x1));
    }
  }
  return out;
}

Tensor gaussian_blur(const Tensor& field, double sigma) {
  if (sigma <= 0.0) return field;
  const int h = field.dim(0), w = field.dim(1);
  const int r = std::max(1, static_cast<int>(std::ceil(3.0 * sigma)));
  std::vector<double> k(static_cast<std::size_t>(2 * r + 1));
  double ksum = 0.0;
  for (int i = -r; i <= r; ++i) {
    k[static_cast<std::size_t>(i + r)] = std::exp(-0.5 * i * i / (sigma * sigma));
    ksum += k[static_cast<std::size_t>(i + r)];
  }
  for (double& v : k) v /= ksum;
  Tensor tmp(field.shape()), out(field.shape());
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int xx = x + i;
        if (xx >= 0 && xx < w) s += k[static_cast<std::size_t>(i + r)] * field.at2(y, xx);
      }
      tmp.at2(y, x) = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0.0;
      for (int i = -r; i <= r; ++i) {
        const int yy = y + i;
        if (yy >= 0 && yy < h) s += k[static_cast<std::size_t>(i + r)] * tmp.at2(yy, x);
      }
      out.at2(y, x) = s;
    }
  return out;
}

Tensor dilate_mask(const Tensor& mask, int radius) {
  const int h = mask.dim(0), w = mask.dim(1);
  Tensor out = mask;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (mask.at2(y, x) == 0.0) continue;
      const int y0 = std::max(0, y - radius), y1 = std::min(h - 1, y + radius);
      const int x0 = std::max(0, x - radius), x1 = std::min(w - 1, x + radius);
      for (int yy = y0; yy <= y1; ++yy)
        for (int xx = x0; xx <= x1; ++xx)
          if ((yy - y) * (yy - y) + (xx - x) * (xx - x) <= radius * radius)
            out.at2(yy, xx) = 1.0;
    }
  return out;
}

Tensor World::advance(const Tensor& precip, int step, const Tensor& wu, const Tensor& wv) const {
  const int h = precip.dim(0), w = precip.dim(1);
  Tensor p = advect_semilagrangian(precip, wu, wv);

  if (cfg_.diffusion > 0.0) {
    Tensor d(p.shape());
    const double kappa = cfg_.diffusion;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int ym = y == 0 ? h - 1 : y - 1, yp = y == h - 1 ? 0 : y + 1;
        const int xm = x == 0 ? w - 1 : x - 1, xp = x == w - 1 ? 0 : x + 1;
        const double nb = 0.25 * (p.at2(ym, x) + p.at2(yp, x) + p.at2(y, xm) + p.at2(y, xp));
        d.at2(y, x) = (1.0 - kappa) * p.at2(y, x) + kappa * nb;
      }
    p = std::move(d);
  }

  // injection driven by the latent fields of the destination step
  Tensor l0 = latent(step + 1, 0);
  Tensor l1 = latent(step + 1, 1);
  const double keep = 1.0 - cfg_.decay;
  for (std::int64_t i = 0; i < p.size(); ++i) {
    const double excess = l0[i] - cfg_.source_threshold;
    double v = keep * p[i];
    if (excess > 0.0) {
      // saturated regions both seed new rain and amplify existing rain,
      // which is what gives the rate distribution its heavy tail
      v *= 1.0 + cfg_.growth_gain * excess;
      v += cfg_.source_gain * excess * (0.4 + 0.6 * l1[i]);
    }
    p[i] = clampd(v, 0.0, cfg_.rate_cap);
  }
  if (!p.all_finite()) throw NumericError("world state went non-finite at step " +
                                          std::to_string(step + 1));
  return p;
}

Trajectory World::simulate(int steps) const {
  NIMBUS_CHECK(steps >= 1, "simulate needs at least one step");
  Trajectory traj;
  traj.precip.reserve(static_cast<std::size_t>(steps));
  traj.precip.push_back(initial_precip());
  for (int t = 1; t < steps; ++t) {
    Tensor wu, wv;
    winds_at(t - 1, &wu, &wv);
    traj.precip.push_back(advance(traj.precip.back(), t - 1, wu, wv));
  }
  return traj;
}

WorldState World::state_at(const Trajectory& traj, int step) const {
  NIMBUS_CHECK(step >= 0 && step < traj.steps(), "step outside trajectory");
  WorldState s;
  s.precip = traj.precip[static_cast<std::size_t>(step)];
  s.wind_u = wind_u(step);
  s.wind_v = wind_v(step);
  Tensor l0 = latent(step, 0), l1 = latent(step, 1);
  const int n = cfg_.extent;
  s.aux = Tensor(Shape{n, n, 2});
  for (int y = 0; y < n; ++y)
    for (int x = 0; x < n; ++x) {
      s.aux.at3(y, x, 0) = l0.at2(y, x);
      s.aux.at3(y, x, 1) = l1.at2(y, x);
    }
  s.step = step;
  s.seed = seed_;
  return s;
}

}  // namespace nimbus
