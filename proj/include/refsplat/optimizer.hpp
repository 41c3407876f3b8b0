#pragma once

#include <cstdint>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "refsplat/dataset.hpp"
#include "refsplat/gaussians.hpp"
#include "refsplat/losses.hpp"

namespace refsplat {

struct TrainConfig {
  int total_iters = 30000;

  double lr_mean_init = 1.6e-4;
  double lr_mean_final = 1.6e-6;
  double lr_sh = 2.5e-3;
  double lr_opacity = 5e-2;
  double lr_beta = 5e-2;
  double lr_scale = 5e-3;
  double lr_rotation = 1e-3;

  int densify_interval = 100;
  int densify_start = 500;
  int densify_end = 15000;
  double grad_threshold = 2e-4;
  double prune_opacity = 5e-3;
  int opacity_reset_interval = 3000;
  double percent_dense = 0.01;       // clone/split scale threshold, x scene extent
  double split_scale_shrink = 1.6;
  int sh_degree_interval = 1000;

  LossConfig loss;
  AccumulationMode mode = AccumulationMode::Beta;
  bool freeze_reflection = false;  // ablation baseline: plain single-branch splatting
  uint64_t seed = 0;
  double scene_extent = 0;  // 0 = derive from camera positions
  int log_interval = 100;
  int checkpoint_interval = 0;  // 0 = final only
  std::string checkpoint_dir;

  void validate() const;
};

struct OptimizerState {
  ParamGradients exp_avg;
  ParamGradients exp_avg_sq;
  int64_t step = 0;
  int64_t nonfinite_skips = 0;
  // densification statistics, reset at every densify event
  std::vector<double> screen_grad_accum;
  std::vector<int> screen_grad_count;

  void resize(size_t n);
};

struct TrainLogRecord {
  int iter = 0;
  LossBundle loss;
  size_t gaussian_count = 0;
  double train_psnr = 0;
};

struct TrainResult {
  GaussianCloud cloud;
  OptimizerState state;
  std::vector<TrainLogRecord> log;
};

constexpr double kAdamBeta1 = 0.9;
constexpr double kAdamBeta2 = 0.999;
constexpr double kAdamEps = 1e-15;

// Exponentially decayed position learning rate.
double mean_lr_at(const TrainConfig& cfg, int iter);

// One Adam update over every parameter group; non-finite gradients skip that
// parameter and bump the warning counter.
void adam_step(GaussianCloud& cloud, const ParamGradients& grads, OptimizerState& state,
               const TrainConfig& cfg, int iter);

// 3D-GS style clone/split/prune, keeping optimizer moments shape-synchronized.
void densify_and_prune(GaussianCloud& cloud, OptimizerState& state, const TrainConfig& cfg,
                       std::mt19937_64& rng);

TrainResult train(const Dataset& dataset, GaussianCloud cloud, const TrainConfig& cfg);

}  // namespace refsplat
