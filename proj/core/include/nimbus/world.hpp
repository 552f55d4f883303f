#pragma once

#include <vector>

#include "nimbus/tensor.hpp"

namespace nimbus {

/// Parameters of the synthetic advection-diffusion atmosphere.
struct WorldConfig {
  int extent = 192;            // square grid of native cells
  double step_minutes = 2.0;
  double wind_cap = 1.5;       // cells/step magnitude clamp
  double wind_amp = 1.0;       // mean drift magnitude scale
  double wind_noise = 0.35;    // spatial variation around the drift
  bool wind_fixed = false;     // override: spatially uniform constant wind
  double wind_fixed_u = 1.0;
  double wind_fixed_v = 0.0;
  double diffusion = 0.12;     // convex 3x3 smoothing weight in [0,1]
  double source_gain = 1.6;    // injection where the humidity latent is high
  double source_threshold = 0.78;
  double growth_gain = 0.55;   // multiplicative amplification in saturated regions
  double decay = 0.05;         // exponential removal per step
  double rate_cap = 102.4;     // mm/hr
  double init_amp = 14.0;
  double init_threshold = 0.58;
  int noise_cells = 20;        // value-noise lattice spacing
  int wind_period = 120;       // steps between wind target refreshes
  int latent_period = 60;
  double eval_mask_coverage = 0.70;
  int train_mask_dilation = 8;  // cells; train mask = eval mask dilated

  void validate() const;
};

/// A view of the atmosphere at one step. precip is stored per step by the
/// trajectory; winds and latent fields are recomputed on demand (they are
/// pure functions of (seed, step)).
struct WorldState {
  Tensor precip;   // [H,W] mm/hr
  Tensor wind_u;   // [H,W] cells/step
  Tensor wind_v;   // [H,W]
  Tensor aux;      // [H,W,2] latent source drivers (humidity-like, pressure-like)
  int step = 0;
  std::uint64_t seed = 0;
};

class World;

struct Trajectory {
  std::vector<Tensor> precip;  // [steps][H,W]
  int steps() const { return static_cast<int>(precip.size()); }
};

class World {
 public:
  World(WorldConfig config, std::uint64_t seed);

  const WorldConfig& config() const { return cfg_; }
  std::uint64_t seed() const { return seed_; }

  // deterministic per-step fields
  Tensor wind_u(int step) const;
  Tensor wind_v(int step) const;
  void winds(int step, Tensor* out_u, Tensor* out_v) const;  // both at once
  Tensor latent(int step, int which) const;  // which in {0,1}, values in [0,1]
  Tensor cloud(int step) const;
  const Tensor& elevation() const { return elevation_; }

  Tensor initial_precip() const;

  /// One step of dynamics: semi-Lagrangian advection by the given winds,
  /// diffusion, seeded source injection for `step + 1`, decay, clamp.
  /// Aborts (NumericError) if the state goes non-finite.
  Tensor advance(const Tensor& precip, int step, const Tensor& wu, const Tensor& wv) const;

  Trajectory simulate(int steps) const;
  WorldState state_at(const Trajectory& traj, int step) const;

  const Tensor& eval_mask() const { return eval_mask_; }
  const Tensor& train_mask() const { return train_mask_; }

 private:
  Tensor smooth_noise(std::uint64_t field, int block) const;
  Tensor blended_field(std::uint64_t field, int step, int period) const;
  void winds_at(int step, Tensor* out_u, Tensor* out_v) const;

  WorldConfig cfg_;
  std::uint64_t seed_;
  CounterRng rng_;
  Tensor elevation_;
  Tensor eval_mask_;
  Tensor train_mask_;
};

// grid utilities shared with the sampling pipeline
Tensor gaussian_blur(const Tensor& field, double sigma);   // [H,W], zero-padded
Tensor advect_semilagrangian(const Tensor& field, const Tensor& wu, const Tensor& wv);
Tensor dilate_mask(const Tensor& mask, int radius);

}  // namespace nimbus
