#include "refsplat/optimizer.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "refsplat/evalkit.hpp"
#include "refsplat/rasterizer.hpp"

namespace refsplat {

void TrainConfig::validate() const {
  if (total_iters < 0) throw std::invalid_argument("train config: negative total_iters");
  if (densify_start >= densify_end)
    throw std::invalid_argument("train config: require densify_start < densify_end");
  if (densify_interval < 1 || opacity_reset_interval < 1 || sh_degree_interval < 1)
    throw std::invalid_argument("train config: schedule intervals must be >= 1");
}

void OptimizerState::resize(size_t n) {
  exp_avg.resize_zero(n);
  exp_avg_sq.resize_zero(n);
  screen_grad_accum.assign(n, 0.0);
  screen_grad_count.assign(n, 0);
}

double mean_lr_at(const TrainConfig& cfg, int iter) {
  if (cfg.total_iters <= 0) return cfg.lr_mean_init;
  double t = std::clamp(static_cast<double>(iter) / cfg.total_iters, 0.0, 1.0);
  return cfg.lr_mean_init * std::pow(cfg.lr_mean_final / cfg.lr_mean_init, t);
}

namespace {

struct AdamCtx {
  double beta1_corr, beta2_corr;
  int64_t* skips;
};

inline void adam_scalar(double& p, double g, double& m, double& v, double lr,
                        const AdamCtx& ctx) {
  if (!std::isfinite(g)) {
    ++(*ctx.skips);
    return;
  }
  m = kAdamBeta1 * m + (1.0 - kAdamBeta1) * g;
  v = kAdamBeta2 * v + (1.0 - kAdamBeta2) * g * g;
  double mhat = m / ctx.beta1_corr;
  double vhat = v / ctx.beta2_corr;
  p -= lr * mhat / (std::sqrt(vhat) + kAdamEps);
}

}  // namespace

void adam_step(GaussianCloud& cloud, const ParamGradients& grads, OptimizerState& state,
               const TrainConfig& cfg, int iter) {
  const size_t n = cloud.size();
  if (grads.size() != n || state.exp_avg.size() != n)
    throw std::invalid_argument("adam_step: shape mismatch");
  state.step += 1;
  AdamCtx ctx{1.0 - std::pow(kAdamBeta1, static_cast<double>(state.step)),
              1.0 - std::pow(kAdamBeta2, static_cast<double>(state.step)),
              &state.nonfinite_skips};
  const double lr_mean = mean_lr_at(cfg, iter);

  for (size_t i = 0; i < n; ++i) {
    for (int k = 0; k < 3; ++k) {
      adam_scalar(cloud.means[i][k], grads.means[i][k], state.exp_avg.means[i][k],
                  state.exp_avg_sq.means[i][k], lr_mean, ctx);
      adam_scalar(cloud.log_scales[i][k], grads.log_scales[i][k],
                  state.exp_avg.log_scales[i][k], state.exp_avg_sq.log_scales[i][k],
                  cfg.lr_scale, ctx);
    }
    for (int k = 0; k < 4; ++k)
      adam_scalar(cloud.rotations[i][k], grads.rotations[i][k], state.exp_avg.rotations[i][k],
                  state.exp_avg_sq.rotations[i][k], cfg.lr_rotation, ctx);
    adam_scalar(cloud.opacity_logits[i], grads.opacity_logits[i],
                state.exp_avg.opacity_logits[i], state.exp_avg_sq.opacity_logits[i],
                cfg.lr_opacity, ctx);
    for (int k = 0; k < kShValues; ++k)
      adam_scalar(cloud.sh_trans(i, k), grads.sh_trans(i, k), state.exp_avg.sh_trans(i, k),
                  state.exp_avg_sq.sh_trans(i, k), cfg.lr_sh, ctx);
    if (!cfg.freeze_reflection) {
      adam_scalar(cloud.ref_opacity_logits[i], grads.ref_opacity_logits[i],
                  state.exp_avg.ref_opacity_logits[i], state.exp_avg_sq.ref_opacity_logits[i],
                  cfg.lr_opacity, ctx);
      adam_scalar(cloud.beta_logits[i], grads.beta_logits[i], state.exp_avg.beta_logits[i],
                  state.exp_avg_sq.beta_logits[i], cfg.lr_beta, ctx);
      for (int k = 0; k < kShValues; ++k)
        adam_scalar(cloud.sh_ref(i, k), grads.sh_ref(i, k), state.exp_avg.sh_ref(i, k),
                    state.exp_avg_sq.sh_ref(i, k), cfg.lr_sh, ctx);
    }
  }
}

namespace {

// Keeps moment arrays and densify statistics aligned with a cloud edit that
// keeps `keep` rows and appends `added` fresh rows.
void sync_state(OptimizerState& state, const std::vector<uint8_t>& keep, size_t added) {
  auto filter_tangent = [&](ParamGradients& t) {
    size_t w = 0;
    for (size_t i = 0; i < keep.size(); ++i) {
      if (!keep[i]) continue;
      if (w != i) {
        t.means[w] = t.means[i];
        t.rotations[w] = t.rotations[i];
        t.log_scales[w] = t.log_scales[i];
        t.opacity_logits[w] = t.opacity_logits[i];
        t.ref_opacity_logits[w] = t.ref_opacity_logits[i];
        t.beta_logits[w] = t.beta_logits[i];
        t.sh_trans.row(w) = t.sh_trans.row(i);
        t.sh_ref.row(w) = t.sh_ref.row(i);
      }
      ++w;
    }
    size_t n = w + added;
    t.means.resize(n, Vec3::Zero());
    t.rotations.resize(n, Vec4::Zero());
    t.log_scales.resize(n, Vec3::Zero());
    t.opacity_logits.resize(n, 0.0);
    t.ref_opacity_logits.resize(n, 0.0);
    t.beta_logits.resize(n, 0.0);
    t.sh_trans.conservativeResize(n, kShValues);
    t.sh_ref.conservativeResize(n, kShValues);
    t.sh_trans.bottomRows(added).setZero();
    t.sh_ref.bottomRows(added).setZero();
  };
  filter_tangent(state.exp_avg);
  filter_tangent(state.exp_avg_sq);
  size_t n = state.exp_avg.size();
  state.screen_grad_accum.assign(n, 0.0);
  state.screen_grad_count.assign(n, 0);
}

}  // namespace

void densify_and_prune(GaussianCloud& cloud, OptimizerState& state, const TrainConfig& cfg,
                       std::mt19937_64& rng) {
  const size_t n = cloud.size();
  double extent = cfg.scene_extent > 0 ? cfg.scene_extent : 1.0;

  std::vector<RawGaussianParams> added;
  std::vector<uint8_t> keep(n, 1);

  std::normal_distribution<double> gauss(0.0, 1.0);
  for (size_t i = 0; i < n; ++i) {
    double avg_grad = state.screen_grad_count[i] > 0
                          ? state.screen_grad_accum[i] / state.screen_grad_count[i]
                          : 0.0;
    if (avg_grad <= cfg.grad_threshold) continue;
    Vec3 scale = cloud.log_scales[i].array().exp();
    RawGaussianParams g = cloud.get(i);
    if (scale.maxCoeff() <= cfg.percent_dense * extent) {
      added.push_back(g);  // clone
    } else {
      // split: two samples from the Gaussian, shrunken scale, parent removed
      Mat3 r = quaternion_to_matrix(cloud.rotations[i]);
      RawGaussianParams child = g;
      child.log_scale = g.log_scale.array() - std::log(cfg.split_scale_shrink);
      for (int k = 0; k < 2; ++k) {
        Vec3 local(gauss(rng) * scale[0], gauss(rng) * scale[1], gauss(rng) * scale[2]);
        child.mean = g.mean + r * local;
        added.push_back(child);
      }
      keep[i] = 0;
    }
  }

  for (size_t i = 0; i < n; ++i)
    if (keep[i] && sigmoid(cloud.opacity_logits[i]) < cfg.prune_opacity) keep[i] = 0;

  size_t kept = static_cast<size_t>(std::count(keep.begin(), keep.end(), 1));
  if (kept + added.size() == 0)
    throw std::runtime_error("densify_and_prune: pruning removed every Gaussian");

  cloud.filter(keep);
  for (const auto& g : added) cloud.append(g);
  sync_state(state, keep, added.size());
}

TrainResult train(const Dataset& dataset, GaussianCloud cloud, const TrainConfig& cfg) {
  cfg.validate();
  auto train_idx = dataset.is_test.empty() ? [&] {
    std::vector<size_t> all(dataset.images.size());
    std::iota(all.begin(), all.end(), 0);
    return all;
  }() : dataset.train_indices();
  if (train_idx.empty()) throw std::invalid_argument("train: no training images");
  if (cloud.size() == 0) throw std::invalid_argument("train: empty cloud");

  TrainConfig run_cfg = cfg;
  if (run_cfg.scene_extent <= 0) {
    Vec3 center = Vec3::Zero();
    for (size_t i : train_idx) center += dataset.cameras[i].position();
    center /= static_cast<double>(train_idx.size());
    double radius = 0;
    for (size_t i : train_idx)
      radius = std::max(radius, (dataset.cameras[i].position() - center).norm());
    run_cfg.scene_extent = std::max(radius * 1.1, 1.0);
  }

  if (run_cfg.freeze_reflection) {
    for (size_t i = 0; i < cloud.size(); ++i) cloud.beta_logits[i] = -30.0;
    cloud.sh_ref.setZero();
  }

  TrainResult result;
  OptimizerState state;
  state.resize(cloud.size());

  RenderOptions ropt;
  ropt.mode = run_cfg.mode;
  ropt.keep_records = true;

  std::mt19937_64 rng(run_cfg.seed);
  std::vector<size_t> order;
  size_t order_pos = 0;

  for (int iter = 1; iter <= run_cfg.total_iters; ++iter) {
    if (order_pos >= order.size()) {
      order = train_idx;
      std::shuffle(order.begin(), order.end(), rng);
      order_pos = 0;
    }
    size_t view = order[order_pos++];
    const Camera& cam = dataset.cameras[view];
    const Image& gt = dataset.images[view];

    RenderOutputs outputs = render(cloud, cam, ropt);
    LossGradients lgrads;
    LossBundle loss = overall_loss_backward(gt, outputs, run_cfg.loss, iter, lgrads);
    if (!std::isfinite(loss.total)) {
      std::ostringstream os;
      os << "non-finite loss at iteration " << iter << " (l_rgb=" << loss.l_rgb
         << " l_init=" << loss.l_init << " l_bi=" << loss.l_bi << " l_ref=" << loss.l_ref
         << ")";
      throw std::runtime_error(os.str());
    }

    BackwardOutputs back = render_backward(cloud, *outputs.records, lgrads.d_composed,
                                           lgrads.d_transmitted, lgrads.d_reflection_map,
                                           lgrads.d_depth);
    adam_step(cloud, back.grads, state, run_cfg, iter);

    // densification statistics over visible Gaussians
    for (const SplatCache& sc : outputs.records->splats) {
      state.screen_grad_accum[sc.gaussian_index] += back.screen_grads[sc.gaussian_index].norm();
      state.screen_grad_count[sc.gaussian_index] += 1;
    }

    if (iter >= run_cfg.densify_start && iter <= run_cfg.densify_end &&
        iter % run_cfg.densify_interval == 0)
      densify_and_prune(cloud, state, run_cfg, rng);

    if (run_cfg.opacity_reset_interval > 0 && iter % run_cfg.opacity_reset_interval == 0) {
      double cap = logit(0.01);
      for (size_t i = 0; i < cloud.size(); ++i) {
        cloud.opacity_logits[i] = std::min(cloud.opacity_logits[i], cap);
        if (!run_cfg.freeze_reflection)
          cloud.ref_opacity_logits[i] = std::min(cloud.ref_opacity_logits[i], cap);
      }
    }

    if (run_cfg.sh_degree_interval > 0 && iter % run_cfg.sh_degree_interval == 0 &&
        cloud.active_sh_degree < cloud.max_sh_degree)
      cloud.active_sh_degree += 1;

    if (iter % run_cfg.log_interval == 0 || iter == run_cfg.total_iters) {
      TrainLogRecord rec;
      rec.iter = iter;
      rec.loss = loss;
      rec.gaussian_count = cloud.size();
      rec.train_psnr = psnr(clamp01(outputs.composed), gt);
      result.log.push_back(rec);
    }
  }

  result.cloud = std::move(cloud);
  result.state = std::move(state);
  return result;
}

}  // namespace refsplat
