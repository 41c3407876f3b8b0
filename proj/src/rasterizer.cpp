#include "refsplat/rasterizer.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "refsplat/sh.hpp"

#ifdef _OPENMP
#include <omp.h>
#endif

namespace refsplat {

namespace {

Mat2 invert2x2(const Mat2& m) {
  double det = m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
  if (std::abs(det) < 1e-300) throw std::runtime_error("singular 2x2 covariance");
  Mat2 inv;
  inv << m(1, 1), -m(0, 1), -m(1, 0), m(0, 0);
  return inv / det;
}

double binning_radius(const Mat2& cov2d, double extent_sigmas) {
  double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
  double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
  double lambda_max = mid + std::sqrt(std::max(0.0, mid * mid - det));
  return std::ceil(extent_sigmas * std::sqrt(std::max(0.0, lambda_max)));
}

}  // namespace

PixelComposite composite_pixel(std::span<const PixelContribution> contribs,
                               AccumulationMode mode, double early_stop_transmittance) {
  PixelComposite out;
  double T = 1.0, T_ref = 1.0, B = 1.0, sum_depth = 0.0;
  for (const PixelContribution& c : contribs) {
    if (c.alpha > 0.0) {
      out.trans += c.color_trans * (c.alpha * T);
      out.alpha += c.alpha * T;
      sum_depth += c.depth * c.alpha * T;
      if (mode == AccumulationMode::Beta) {
        out.reflection_map += c.beta * c.alpha * B;
        B *= (1.0 - c.beta);
      } else {
        out.reflection_map += c.beta * c.alpha * T;
      }
    }
    if (c.alpha_ref > 0.0) {
      out.ref += c.color_ref * (c.alpha_ref * T_ref);
      T_ref *= (1.0 - c.alpha_ref);
    }
    if (c.alpha > 0.0) {
      T *= (1.0 - c.alpha);
      if (early_stop_transmittance > 0.0 && T < early_stop_transmittance) break;
    }
  }
  out.depth = sum_depth / std::max(out.alpha, kDepthEps);
  return out;
}

std::vector<std::vector<int>> bin_and_sort(const std::vector<Splat2D>& splats,
                                           int width, int height, double extent_sigmas) {
  int tiles_x = (width + kTileSize - 1) / kTileSize;
  int tiles_y = (height + kTileSize - 1) / kTileSize;
  std::vector<std::vector<int>> tiles(static_cast<size_t>(tiles_x) * tiles_y);

  for (size_t s = 0; s < splats.size(); ++s) {
    const Splat2D& sp = splats[s];
    int x0 = 0, x1 = tiles_x - 1, y0 = 0, y1 = tiles_y - 1;
    if (extent_sigmas > 0.0) {
      double r = binning_radius(sp.cov2d, extent_sigmas);
      x0 = std::max(0, static_cast<int>(std::floor((sp.mean2d.x() - r) / kTileSize)));
      x1 = std::min(tiles_x - 1, static_cast<int>(std::floor((sp.mean2d.x() + r) / kTileSize)));
      y0 = std::max(0, static_cast<int>(std::floor((sp.mean2d.y() - r) / kTileSize)));
      y1 = std::min(tiles_y - 1, static_cast<int>(std::floor((sp.mean2d.y() + r) / kTileSize)));
    }
    for (int ty = y0; ty <= y1; ++ty)
      for (int tx = x0; tx <= x1; ++tx)
        tiles[static_cast<size_t>(ty) * tiles_x + tx].push_back(static_cast<int>(s));
  }
  for (auto& list : tiles) {
    std::sort(list.begin(), list.end(), [&](int a, int b) {
      if (splats[a].depth != splats[b].depth) return splats[a].depth < splats[b].depth;
      return splats[a].gaussian_index < splats[b].gaussian_index;
    });
  }
  return tiles;
}

RenderOutputs render(const GaussianCloud& cloud, const Camera& cam,
                     const RenderOptions& options) {
  cam.validate();
  const int W = cam.width, H = cam.height;
  const size_t n = cloud.size();
  const Vec3 campos = cam.position();
  const int degree = std::min(cloud.active_sh_degree, cloud.max_sh_degree);

  // Project + activate + per-view color; culled Gaussians drop out here.
  std::vector<SplatCache> splats;
  splats.reserve(n);
  {
    std::vector<SplatCache> local(n);
    std::vector<uint8_t> visible(n, 0);
#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
    for (long long ii = 0; ii < static_cast<long long>(n); ++ii) {
      size_t i = static_cast<size_t>(ii);
      Mat3 cov3d = build_covariance(cloud.rotations[i], cloud.log_scales[i]);
      auto proj = project_gaussian(cam, cloud.means[i], cov3d, static_cast<int>(i));
      if (!proj) continue;
      SplatCache& sc = local[i];
      sc.gaussian_index = static_cast<int>(i);
      sc.mean2d = proj->mean2d;
      sc.cov2d = proj->cov2d;
      sc.conic = invert2x2(proj->cov2d);
      sc.depth = proj->depth;
      sc.cov3d = cov3d;
      sc.opacity = sigmoid(cloud.opacity_logits[i]);
      sc.ref_opacity = sigmoid(cloud.ref_opacity_logits[i]);
      sc.beta = sigmoid(cloud.beta_logits[i]);
      Vec3 rel = cloud.means[i] - campos;
      sc.view_dist = rel.norm();
      sc.view_dir = rel / sc.view_dist;
      sc.color_trans = eval_sh_with_clamp(cloud.sh_trans.row(i).data(), sc.view_dir, degree,
                                          sc.clamp_trans);
      if (options.dual)
        sc.color_ref = eval_sh_with_clamp(cloud.sh_ref.row(i).data(), sc.view_dir, degree,
                                          sc.clamp_ref);
      else
        sc.color_ref.setZero();
      visible[i] = 1;
    }
    for (size_t i = 0; i < n; ++i)
      if (visible[i]) splats.push_back(local[i]);
  }

  std::vector<Splat2D> splats2d(splats.size());
  for (size_t s = 0; s < splats.size(); ++s) {
    splats2d[s].mean2d = splats[s].mean2d;
    splats2d[s].cov2d = splats[s].cov2d;
    splats2d[s].depth = splats[s].depth;
    splats2d[s].gaussian_index = splats[s].gaussian_index;
  }
  auto tiles = bin_and_sort(splats2d, W, H, options.extent_sigmas);
  int tiles_x = (W + kTileSize - 1) / kTileSize;
  int tiles_y = (H + kTileSize - 1) / kTileSize;

  RenderOutputs out;
  out.composed = Image(H, W, 3);
  out.transmitted = Image(H, W, 3);
  out.reflected = Image(H, W, 3);
  out.reflection_map = Image(H, W, 1);
  out.depth = Image(H, W, 1);
  out.alpha_accum = Image(H, W, 1);

  std::vector<std::vector<uint32_t>> pixel_lists;
  if (options.keep_records) pixel_lists.resize(static_cast<size_t>(H) * W);

#ifdef _OPENMP
#pragma omp parallel for schedule(static)
#endif
  for (int tile = 0; tile < tiles_x * tiles_y; ++tile) {
    const std::vector<int>& list = tiles[tile];
    int tx = tile % tiles_x, ty = tile / tiles_x;
    int px0 = tx * kTileSize, py0 = ty * kTileSize;
    int px1 = std::min(W, px0 + kTileSize), py1 = std::min(H, py0 + kTileSize);
    for (int py = py0; py < py1; ++py) {
      for (int px = px0; px < px1; ++px) {
        Vec2 pix(px + 0.5, py + 0.5);
        double T = 1.0, T_ref = 1.0, B = 1.0;
        Vec3 ct = Vec3::Zero(), cr = Vec3::Zero();
        double w_acc = 0.0, a_acc = 0.0, d_acc = 0.0;
        std::vector<uint32_t>* rec =
            options.keep_records ? &pixel_lists[static_cast<size_t>(py) * W + px] : nullptr;
        for (int s : list) {
          const SplatCache& sc = splats[s];
          Vec2 d = pix - sc.mean2d;
          double power = -0.5 * d.dot(sc.conic * d);
          if (power > 0.0) power = 0.0;
          double g2d = std::exp(power);
          double alpha = std::min(kAlphaClamp, sc.opacity * g2d);
          if (alpha < options.min_alpha) alpha = 0.0;
          double alpha_ref = 0.0;
          if (options.dual) {
            alpha_ref = std::min(kAlphaClamp, sc.ref_opacity * g2d);
            if (alpha_ref < options.min_alpha) alpha_ref = 0.0;
          }
          if (alpha == 0.0 && alpha_ref == 0.0) continue;
          if (rec) rec->push_back(static_cast<uint32_t>(s));
          if (alpha > 0.0) {
            ct += sc.color_trans * (alpha * T);
            a_acc += alpha * T;
            d_acc += sc.depth * alpha * T;
            if (options.mode == AccumulationMode::Beta) {
              w_acc += sc.beta * alpha * B;
              B *= (1.0 - sc.beta);
            } else {
              w_acc += sc.beta * alpha * T;
            }
          }
          if (alpha_ref > 0.0) {
            cr += sc.color_ref * (alpha_ref * T_ref);
            T_ref *= (1.0 - alpha_ref);
          }
          if (alpha > 0.0) {
            T *= (1.0 - alpha);
            if (options.early_stop_transmittance > 0.0 && T < options.early_stop_transmittance)
              break;
          }
        }
        for (int c = 0; c < 3; ++c) {
          out.transmitted.at(py, px, c) = ct[c];
          out.reflected.at(py, px, c) = cr[c];
          out.composed.at(py, px, c) = ct[c] + w_acc * cr[c];
        }
        out.reflection_map.at(py, px) = w_acc;
        out.alpha_accum.at(py, px) = a_acc;
        out.depth.at(py, px) = d_acc / std::max(a_acc, kDepthEps);
      }
    }
  }

  if (options.keep_records) {
    auto rec = std::make_shared<RenderRecords>();
    rec->camera = cam;
    rec->options = options;
    rec->sh_degree = degree;
    rec->splats = std::move(splats);
    rec->pixel_offsets.resize(static_cast<size_t>(H) * W + 1, 0);
    size_t total = 0;
    for (size_t p = 0; p < pixel_lists.size(); ++p) {
      rec->pixel_offsets[p] = static_cast<uint32_t>(total);
      total += pixel_lists[p].size();
    }
    rec->pixel_offsets.back() = static_cast<uint32_t>(total);
    rec->pixel_splats.resize(total);
    for (size_t p = 0; p < pixel_lists.size(); ++p)
      std::copy(pixel_lists[p].begin(), pixel_lists[p].end(),
                rec->pixel_splats.begin() + rec->pixel_offsets[p]);
    out.records = std::move(rec);
  }
  return out;
}

Image render_relit(const GaussianCloud& cloud, const Camera& cam, double kappa,
                   const RenderOptions& options) {
  if (!(kappa >= 0.0) || !std::isfinite(kappa))
    throw std::invalid_argument("relighting coefficient must be finite and >= 0");
  RenderOutputs out = render(cloud, cam, options);
  Image img(cam.height, cam.width, 3);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x)
      for (int c = 0; c < 3; ++c)
        img.at(y, x, c) = out.transmitted.at(y, x, c) +
                          kappa * (out.reflection_map.at(y, x) * out.reflected.at(y, x, c));
  return clamp01(img);
}

}  // namespace refsplat
