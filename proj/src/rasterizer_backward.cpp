#include <cmath>
#include <stdexcept>
#include <vector>

#include "refsplat/rasterizer.hpp"
#include "refsplat/sh.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refsplat {

namespace {

// Per-view-splat gradient accumulator (screen-space quantities).
struct SplatGrad {
  Vec2 mean2d = Vec2::Zero();
  Mat2 conic = Mat2::Zero();
  Vec3 color_trans = Vec3::Zero();
  Vec3 color_ref = Vec3::Zero();
  double depth = 0;
  double opacity = 0;      // wrt activated opacity
  double ref_opacity = 0;  // wrt activated ref opacity
  double beta = 0;         // wrt activated beta

  void add(const SplatGrad& o) {
    mean2d += o.mean2d;
    conic += o.conic;
    color_trans += o.color_trans;
    color_ref += o.color_ref;
    depth += o.depth;
    opacity += o.opacity;
    ref_opacity += o.ref_opacity;
    beta += o.beta;
  }
};

struct Entry {
  int splat;
  double g2d, alpha, alpha_ref;
  double T, T_ref, B;  // transmittance / products *before* this contribution
};

}  // namespace

BackwardOutputs render_backward(const GaussianCloud& cloud, const RenderRecords& records,
                                const Image& d_composed, const Image& d_transmitted,
                                const Image& d_reflection_map, const Image& d_depth) {
  const Camera& cam = records.camera;
  const int W = cam.width, H = cam.height;
  if (d_composed.height() != H || d_composed.width() != W || d_composed.channels() != 3 ||
      !d_composed.same_shape(d_transmitted) || d_reflection_map.height() != H ||
      d_reflection_map.width() != W || d_reflection_map.channels() != 1 ||
      !d_reflection_map.same_shape(d_depth))
    throw std::invalid_argument("render_backward: gradient shapes do not match records");
  if (records.pixel_offsets.size() != static_cast<size_t>(H) * W + 1)
    throw std::invalid_argument("render_backward: records missing per-pixel replay data");

  const RenderOptions& opt = records.options;
  const bool beta_mode = opt.mode == AccumulationMode::Beta;
  const size_t nsplat = records.splats.size();

  int nthreads = 1;
#ifdef _OPENMP
  nthreads = omp_get_max_threads();
#endif
  std::vector<std::vector<SplatGrad>> partials(nthreads, std::vector<SplatGrad>(nsplat));

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long long pidx = 0; pidx < static_cast<long long>(H) * W; ++pidx) {
    int tid = 0;
#ifdef _OPENMP
    tid = omp_get_thread_num();
#endif
    std::vector<SplatGrad>& sg = partials[tid];
    const int px = static_cast<int>(pidx % W), py = static_cast<int>(pidx / W);
    const uint32_t begin = records.pixel_offsets[pidx], end = records.pixel_offsets[pidx + 1];
    if (begin == end) continue;
    const Vec2 pix(px + 0.5, py + 0.5);

    // Forward replay to rebuild the per-entry transmittance states.
    std::vector<Entry> entries;
    entries.reserve(end - begin);
    double T = 1.0, T_ref = 1.0, B = 1.0;
    Vec3 trans = Vec3::Zero(), refl = Vec3::Zero();
    double w_acc = 0.0, a_acc = 0.0, d_acc = 0.0;
    for (uint32_t k = begin; k < end; ++k) {
      const SplatCache& sc = records.splats[records.pixel_splats[k]];
      Vec2 d = pix - sc.mean2d;
      double power = -0.5 * d.dot(sc.conic * d);
      if (power > 0.0) power = 0.0;
      double g2d = std::exp(power);
      double alpha = std::min(kAlphaClamp, sc.opacity * g2d);
      if (alpha < opt.min_alpha) alpha = 0.0;
      double alpha_ref = 0.0;
      if (opt.dual) {
        alpha_ref = std::min(kAlphaClamp, sc.ref_opacity * g2d);
        if (alpha_ref < opt.min_alpha) alpha_ref = 0.0;
      }
      Entry e{static_cast<int>(records.pixel_splats[k]), g2d, alpha, alpha_ref, T, T_ref, B};
      entries.push_back(e);
      if (alpha > 0.0) {
        trans += sc.color_trans * (alpha * T);
        a_acc += alpha * T;
        d_acc += sc.depth * alpha * T;
        if (beta_mode) {
          w_acc += sc.beta * alpha * B;
          B *= (1.0 - sc.beta);
        } else {
          w_acc += sc.beta * alpha * T;
        }
        T *= (1.0 - alpha);
      }
      if (alpha_ref > 0.0) {
        refl += sc.color_ref * (alpha_ref * T_ref);
        T_ref *= (1.0 - alpha_ref);
      }
    }

    // Upstream gradients for this pixel.
    Vec3 gC(d_composed.at(py, px, 0), d_composed.at(py, px, 1), d_composed.at(py, px, 2));
    Vec3 gT(d_transmitted.at(py, px, 0), d_transmitted.at(py, px, 1),
            d_transmitted.at(py, px, 2));
    double gW = d_reflection_map.at(py, px);
    double gD = d_depth.at(py, px);

    // composed = trans + W * ref
    Vec3 g_trans = gT + gC;
    Vec3 g_ref = gC * w_acc;
    double g_w = gW + gC.dot(refl);

    // depth = d_acc / max(a_acc, eps)
    double denom = std::max(a_acc, kDepthEps);
    double g_sum_depth = gD / denom;
    double g_alpha_accum = (a_acc > kDepthEps) ? -gD * d_acc / (denom * denom) : 0.0;

    // Reverse traversal with suffix accumulators.
    Vec3 accC = Vec3::Zero(), accCr = Vec3::Zero();
    double accA = 0.0, accS = 0.0, accWa = 0.0, accWp = 0.0;
    for (int k = static_cast<int>(entries.size()) - 1; k >= 0; --k) {
      const Entry& e = entries[k];
      const SplatCache& sc = records.splats[e.splat];
      SplatGrad& g = sg[e.splat];
      double d_alpha = 0.0, d_alpha_ref = 0.0;

      if (e.alpha > 0.0) {
        d_alpha += g_trans.dot(sc.color_trans) * e.T + g_alpha_accum * e.T +
                   g_sum_depth * sc.depth * e.T;
        d_alpha -= (g_trans.dot(accC) + g_alpha_accum * accA + g_sum_depth * accS) /
                   (1.0 - e.alpha);
        g.color_trans += g_trans * (e.alpha * e.T);
        g.depth += g_sum_depth * e.alpha * e.T;
        if (beta_mode) {
          g.beta += g_w * (e.alpha * e.B - accWp / (1.0 - sc.beta));
          d_alpha += g_w * sc.beta * e.B;
          accWp += sc.beta * e.alpha * e.B;
        } else {
          g.beta += g_w * e.alpha * e.T;
          d_alpha += g_w * sc.beta * e.T;
          d_alpha -= g_w * accWa / (1.0 - e.alpha);
          accWa += sc.beta * e.alpha * e.T;
        }
        accC += sc.color_trans * (e.alpha * e.T);
        accA += e.alpha * e.T;
        accS += sc.depth * e.alpha * e.T;
      }
      if (e.alpha_ref > 0.0) {
        d_alpha_ref += g_ref.dot(sc.color_ref) * e.T_ref -
                       g_ref.dot(accCr) / (1.0 - e.alpha_ref);
        g.color_ref += g_ref * (e.alpha_ref * e.T_ref);
        accCr += sc.color_ref * (e.alpha_ref * e.T_ref);
      }

      // alpha = clamp(opacity * g2d); gradient stops at the 0.99 clamp.
      double d_g2d = 0.0;
      if (e.alpha > 0.0 && sc.opacity * e.g2d < kAlphaClamp) {
        g.opacity += d_alpha * e.g2d;
        d_g2d += d_alpha * sc.opacity;
      }
      if (e.alpha_ref > 0.0 && sc.ref_opacity * e.g2d < kAlphaClamp) {
        g.ref_opacity += d_alpha_ref * e.g2d;
        d_g2d += d_alpha_ref * sc.ref_opacity;
      }
      if (d_g2d != 0.0) {
        Vec2 d = pix - sc.mean2d;
        double d_power = d_g2d * e.g2d;
        g.mean2d += d_power * (sc.conic * d);
        g.conic += d_power * (-0.5) * (d * d.transpose());
      }
    }
  }

  // Deterministic reduction: fixed thread order.
  std::vector<SplatGrad>& total = partials[0];
  for (int t = 1; t < nthreads; ++t)
    for (size_t s = 0; s < nsplat; ++s) total[s].add(partials[t][s]);

  BackwardOutputs out;
  out.grads.resize_zero(cloud.size());
  out.screen_grads.assign(cloud.size(), Vec2::Zero());

  // Pull screen-space gradients back through projection, covariance,
  // spherical harmonics and the sigmoid activations.
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (long long ss = 0; ss < static_cast<long long>(nsplat); ++ss) {
    const SplatCache& sc = records.splats[ss];
    const SplatGrad& g = total[ss];
    const size_t i = static_cast<size_t>(sc.gaussian_index);

    // conic = cov2d^-1
    Mat2 g_conic = 0.5 * (g.conic + g.conic.transpose());
    Mat2 d_cov2d = -sc.conic * g_conic * sc.conic;

    Vec3 d_mean = Vec3::Zero();
    Mat3 d_cov3d = Mat3::Zero();
    project_gaussian_backward(cam, cloud.means[i], sc.cov3d, g.mean2d, d_cov2d, g.depth,
                              d_mean, d_cov3d);

    Vec4 d_rot = Vec4::Zero();
    Vec3 d_log_scale = Vec3::Zero();
    build_covariance_backward(cloud.rotations[i], cloud.log_scales[i], d_cov3d, d_rot,
                              d_log_scale);

    // SH color gradients, including the view-direction dependence on the mean.
    Vec3 d_dir = Vec3::Zero();
    ParamGradients& grads = out.grads;
    eval_sh_backward(cloud.sh_trans.row(i).data(), sc.view_dir, records.sh_degree,
                     g.color_trans, sc.clamp_trans,
                     grads.sh_trans.row(i).data(), d_dir);
    if (opt.dual)
      eval_sh_backward(cloud.sh_ref.row(i).data(), sc.view_dir, records.sh_degree,
                       g.color_ref, sc.clamp_ref,
                       grads.sh_ref.row(i).data(), d_dir);
    // dir = rel / |rel|
    d_mean += (d_dir - sc.view_dir * sc.view_dir.dot(d_dir)) / sc.view_dist;

    grads.means[i] += d_mean;
    grads.rotations[i] += d_rot;
    grads.log_scales[i] += d_log_scale;
    grads.opacity_logits[i] += g.opacity * sc.opacity * (1.0 - sc.opacity);
    grads.ref_opacity_logits[i] += g.ref_opacity * sc.ref_opacity * (1.0 - sc.ref_opacity);
    grads.beta_logits[i] += g.beta * sc.beta * (1.0 - sc.beta);
    out.screen_grads[i] = g.mean2d;
  }
  return out;
}

}  // namespace refsplat
