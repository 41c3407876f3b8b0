#pragma once

#include <memory>
#include <span>
#include <vector>

#include "refsplat/camera.hpp"
#include "refsplat/gaussians.hpp"
#include "refsplat/image.hpp"
#include "refsplat/projection.hpp"

namespace refsplat {

constexpr int kTileSize = 16;
constexpr double kAlphaClamp = 0.99;
constexpr double kDepthEps = 1e-8;

// Two ways to attenuate the reflection-map accumulation W = sum beta_i *
// alpha_i * <product>: Beta runs its own product over (1 - beta_j), Alpha
// reuses the color transmittance product over (1 - alpha_j).
enum class AccumulationMode { Beta, Alpha };

struct RenderOptions {
  AccumulationMode mode = AccumulationMode::Beta;
  double early_stop_transmittance = 1e-4;  // 0 disables early termination
  double min_alpha = 1.0 / 255.0;          // contributions below this are dropped
  double extent_sigmas = kExtentSigmas;    // binning radius; <= 0 bins everywhere
  bool keep_records = false;               // retain replay data for backward
  bool dual = true;                        // false renders the transmitted branch only
};

// Per-view cache of everything the backward pass replays.
struct SplatCache {
  int gaussian_index = -1;
  Vec2 mean2d;
  Mat2 cov2d;
  Mat2 conic;  // cov2d^-1
  double depth = 0;
  double opacity = 0, ref_opacity = 0, beta = 0;
  Vec3 color_trans, color_ref;
  bool clamp_trans[3] = {}, clamp_ref[3] = {};
  Vec3 view_dir;
  double view_dist = 0;
  Mat3 cov3d;
};

struct RenderRecords {
  Camera camera;
  RenderOptions options;
  int sh_degree = 0;
  std::vector<SplatCache> splats;
  std::vector<uint32_t> pixel_offsets;  // H*W + 1
  std::vector<uint32_t> pixel_splats;   // indices into `splats`, front-to-back
};

struct RenderOutputs {
  Image composed;        // H x W x 3, pre-clamp
  Image transmitted;     // H x W x 3
  Image reflected;       // H x W x 3
  Image reflection_map;  // H x W
  Image depth;           // H x W, alpha-normalized expected depth
  Image alpha_accum;     // H x W
  std::shared_ptr<RenderRecords> records;
};

// One ordered front-to-back contribution at a pixel; alphas are already the
// clamped products opacity * G2D.
struct PixelContribution {
  Vec3 color_trans;
  Vec3 color_ref;
  double alpha = 0;
  double alpha_ref = 0;
  double beta = 0;
  double depth = 0;
};

struct PixelComposite {
  Vec3 trans = Vec3::Zero();
  Vec3 ref = Vec3::Zero();
  double reflection_map = 0;
  double depth = 0;
  double alpha = 0;
};

// Dual front-to-back compositing of an ordered contribution list.
PixelComposite composite_pixel(std::span<const PixelContribution> contribs,
                               AccumulationMode mode, double early_stop_transmittance);

// Per-tile binning: splats sorted ascending by depth, ties by gaussian_index.
std::vector<std::vector<int>> bin_and_sort(const std::vector<Splat2D>& splats,
                                           int width, int height,
                                           double extent_sigmas = kExtentSigmas);

RenderOutputs render(const GaussianCloud& cloud, const Camera& cam,
                     const RenderOptions& options = {});

// transmitted + kappa * W .* reflected, clamped to [0,1].
Image render_relit(const GaussianCloud& cloud, const Camera& cam, double kappa,
                   const RenderOptions& options = {});

struct BackwardOutputs {
  ParamGradients grads;
  // Screen-space positional gradient per Gaussian (densification statistic).
  std::vector<Vec2> screen_grads;
};

// Pulls per-pixel gradients on the rendered fields back onto every raw
// parameter of the cloud that produced `records`.
BackwardOutputs render_backward(const GaussianCloud& cloud, const RenderRecords& records,
                                const Image& d_composed, const Image& d_transmitted,
                                const Image& d_reflection_map, const Image& d_depth);

}  // namespace refsplat
