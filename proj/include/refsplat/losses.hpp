#pragma once

#include "refsplat/image.hpp"
#include "refsplat/rasterizer.hpp"

namespace refsplat {

struct LossConfig {
  double lambda_balance = 0.8;  // L1 weight inside the photometric loss
  double lambda_init = 0.1;
  double lambda_bi = 1e-4;
  double lambda_ref = 1e-4;
  double gamma = 0.1;  // color scale of the bilateral weight
  int init_cutoff_iter = 3000;
  int ssim_window = 11;
  double ssim_sigma = 1.5;
};

struct LossBundle {
  double l_rgb = 0, l_init = 0, l_bi = 0, l_ref = 0;
  double w_balance = 0.8, w_init = 0, w_bi = 0, w_ref = 0;  // effective weights
  double total = 0;
};

double l1_loss(const Image& a, const Image& b);
// d(l1)/da accumulated into grad_a (must match a's shape).
double l1_loss_backward(const Image& a, const Image& b, Image& grad_a);

// Mean SSIM over channels, 11x11 Gaussian window sigma 1.5 (configurable).
double ssim(const Image& a, const Image& b, int window = 11, double sigma = 1.5);
double dssim_loss(const Image& a, const Image& b, int window = 11, double sigma = 1.5);
// d(dssim)/da accumulated into grad_a.
double dssim_loss_backward(const Image& a, const Image& b, Image& grad_a,
                           int window = 11, double sigma = 1.5);

double photometric_loss(const Image& gt, const Image& composed, double lambda_balance,
                        int window = 11, double sigma = 1.5);
double photometric_loss_backward(const Image& gt, const Image& composed,
                                 double lambda_balance, Image& grad_composed,
                                 int window = 11, double sigma = 1.5);

double init_alignment_loss(const Image& gt, const Image& transmitted);

constexpr double kForegroundAlpha = 1e-4;

// Edge-aware depth smoothness over the 8-neighborhood, color-weighted,
// normalized by the number of valid foreground pairs.
double bilateral_smoothness(const Image& depth, const Image& composed, double gamma,
                            const Image& alpha_accum);
double bilateral_smoothness_backward(const Image& depth, const Image& composed, double gamma,
                                     const Image& alpha_accum, Image& grad_depth,
                                     Image& grad_composed);

double reflection_map_smoothness(const Image& w);
double reflection_map_smoothness_backward(const Image& w, Image& grad_w);

LossBundle overall_loss(const Image& gt, const RenderOutputs& outputs, const LossConfig& cfg,
                        int iter);

struct LossGradients {
  Image d_composed, d_transmitted, d_reflection_map, d_depth;
};

LossBundle overall_loss_backward(const Image& gt, const RenderOutputs& outputs,
                                 const LossConfig& cfg, int iter, LossGradients& grads);

}  // namespace refsplat
