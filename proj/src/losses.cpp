#include "refsplat/losses.hpp"

#include <cmath>
#include <stdexcept>

namespace refsplat {

namespace {
inline double sgn(double x) { return x > 0 ? 1.0 : (x < 0 ? -1.0 : 0.0); }

// 8-neighborhood offsets
constexpr int kNbr[8][2] = {{-1, -1}, {-1, 0}, {-1, 1}, {0, -1},
                            {0, 1},   {1, -1}, {1, 0},  {1, 1}};
}  // namespace

double l1_loss(const Image& a, const Image& b) {
  Image::check_same_shape(a, b);
  double s = 0;
  for (size_t i = 0; i < a.size(); ++i) s += std::abs(a.data()[i] - b.data()[i]);
  return s / static_cast<double>(a.size());
}

double l1_loss_backward(const Image& a, const Image& b, Image& grad_a) {
  Image::check_same_shape(a, b);
  Image::check_same_shape(a, grad_a);
  double s = 0;
  const double inv = 1.0 / static_cast<double>(a.size());
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a.data()[i] - b.data()[i];
    s += std::abs(d);
    grad_a.data()[i] += sgn(d) * inv;
  }
  return s * inv;
}

double photometric_loss(const Image& gt, const Image& composed, double lambda_balance,
                        int window, double sigma) {
  return lambda_balance * l1_loss(composed, gt) +
         (1.0 - lambda_balance) * dssim_loss(composed, gt, window, sigma);
}

double photometric_loss_backward(const Image& gt, const Image& composed,
                                 double lambda_balance, Image& grad_composed,
                                 int window, double sigma) {
  Image g_l1(composed.height(), composed.width(), composed.channels());
  Image g_ds(composed.height(), composed.width(), composed.channels());
  double l1 = l1_loss_backward(composed, gt, g_l1);
  double ds = dssim_loss_backward(composed, gt, g_ds, window, sigma);
  for (size_t i = 0; i < grad_composed.size(); ++i)
    grad_composed.data()[i] +=
        lambda_balance * g_l1.data()[i] + (1.0 - lambda_balance) * g_ds.data()[i];
  return lambda_balance * l1 + (1.0 - lambda_balance) * ds;
}

double init_alignment_loss(const Image& gt, const Image& transmitted) {
  return l1_loss(transmitted, gt);
}

namespace {

template <bool WithGrad>
double bilateral_impl(const Image& depth, const Image& composed, double gamma,
                      const Image& alpha_accum, Image* grad_depth, Image* grad_composed) {
  if (gamma <= 0) throw std::invalid_argument("bilateral_smoothness: gamma must be > 0");
  const int h = depth.height(), w = depth.width();
  double sum = 0;
  long long count = 0;

  auto foreground = [&](int y, int x) { return alpha_accum.at(y, x) >= kForegroundAlpha; };

  // First pass to count valid pairs (the normalizer feeds the gradients).
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!foreground(y, x)) continue;
      for (auto& nb : kNbr) {
        int yy = y + nb[0], xx = x + nb[1];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w || !foreground(yy, xx)) continue;
        ++count;
      }
    }
  if (count == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(count);

  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!foreground(y, x)) continue;
      for (auto& nb : kNbr) {
        int yy = y + nb[0], xx = x + nb[1];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w || !foreground(yy, xx)) continue;
        double cdiff = 0;
        for (int c = 0; c < 3; ++c) cdiff += std::abs(composed.at(y, x, c) - composed.at(yy, xx, c));
        double f = std::exp(-cdiff / gamma);
        double dd = depth.at(y, x) - depth.at(yy, xx);
        sum += f * std::abs(dd);
        if constexpr (WithGrad) {
          double gd = f * sgn(dd) * inv;
          grad_depth->at(y, x) += gd;
          grad_depth->at(yy, xx) -= gd;
          double gf = std::abs(dd) * inv;  // dL/df
          double dcd = -gf * f / gamma;    // dL/dcdiff
          for (int c = 0; c < 3; ++c) {
            double s = sgn(composed.at(y, x, c) - composed.at(yy, xx, c));
            grad_composed->at(y, x, c) += dcd * s;
            grad_composed->at(yy, xx, c) -= dcd * s;
          }
        }
      }
    }
  return sum * inv;
}

}  // namespace

double bilateral_smoothness(const Image& depth, const Image& composed, double gamma,
                            const Image& alpha_accum) {
  return bilateral_impl<false>(depth, composed, gamma, alpha_accum, nullptr, nullptr);
}

double bilateral_smoothness_backward(const Image& depth, const Image& composed, double gamma,
                                     const Image& alpha_accum, Image& grad_depth,
                                     Image& grad_composed) {
  return bilateral_impl<true>(depth, composed, gamma, alpha_accum, &grad_depth,
                              &grad_composed);
}

double reflection_map_smoothness(const Image& wmap) {
  const int h = wmap.height(), w = wmap.width();
  double sum = 0;
  long long count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (auto& nb : kNbr) {
        int yy = y + nb[0], xx = x + nb[1];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        sum += std::abs(wmap.at(y, x) - wmap.at(yy, xx));
        ++count;
      }
  return count ? sum / static_cast<double>(count) : 0.0;
}

double reflection_map_smoothness_backward(const Image& wmap, Image& grad_w) {
  const int h = wmap.height(), w = wmap.width();
  long long count = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (auto& nb : kNbr) {
        int yy = y + nb[0], xx = x + nb[1];
        if (yy >= 0 && yy < h && xx >= 0 && xx < w) ++count;
      }
  if (count == 0) return 0.0;
  const double inv = 1.0 / static_cast<double>(count);
  double sum = 0;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      for (auto& nb : kNbr) {
        int yy = y + nb[0], xx = x + nb[1];
        if (yy < 0 || yy >= h || xx < 0 || xx >= w) continue;
        double d = wmap.at(y, x) - wmap.at(yy, xx);
        sum += std::abs(d);
        double g = sgn(d) * inv;
        grad_w.at(y, x) += g;
        grad_w.at(yy, xx) -= g;
      }
  return sum * inv;
}

namespace {
LossBundle assemble(const Image& gt, const RenderOutputs& outputs, const LossConfig& cfg,
                    int iter, LossGradients* grads) {
  LossBundle b;
  b.w_balance = cfg.lambda_balance;
  b.w_init = iter < cfg.init_cutoff_iter ? cfg.lambda_init : 0.0;
  b.w_bi = cfg.lambda_bi;
  b.w_ref = cfg.lambda_ref;

  if (grads) {
    const int h = gt.height(), w = gt.width();
    grads->d_composed = Image(h, w, 3);
    grads->d_transmitted = Image(h, w, 3);
    grads->d_reflection_map = Image(h, w, 1);
    grads->d_depth = Image(h, w, 1);

    b.l_rgb = photometric_loss_backward(gt, outputs.composed, cfg.lambda_balance,
                                        grads->d_composed, cfg.ssim_window, cfg.ssim_sigma);
    if (b.w_init > 0) {
      Image g_init(h, w, 3);
      b.l_init = l1_loss_backward(outputs.transmitted, gt, g_init);
      for (size_t i = 0; i < g_init.size(); ++i)
        grads->d_transmitted.data()[i] += b.w_init * g_init.data()[i];
    } else {
      b.l_init = init_alignment_loss(gt, outputs.transmitted);
    }
    Image g_depth(h, w, 1), g_comp_bi(h, w, 3);
    b.l_bi = bilateral_smoothness_backward(outputs.depth, outputs.composed, cfg.gamma,
                                           outputs.alpha_accum, g_depth, g_comp_bi);
    Image g_w(h, w, 1);
    b.l_ref = reflection_map_smoothness_backward(outputs.reflection_map, g_w);

    for (size_t i = 0; i < g_depth.size(); ++i) {
      grads->d_depth.data()[i] = b.w_bi * g_depth.data()[i];
      grads->d_reflection_map.data()[i] = b.w_ref * g_w.data()[i];
    }
    for (size_t i = 0; i < g_comp_bi.size(); ++i)
      grads->d_composed.data()[i] += b.w_bi * g_comp_bi.data()[i];
  } else {
    b.l_rgb = photometric_loss(gt, outputs.composed, cfg.lambda_balance, cfg.ssim_window,
                               cfg.ssim_sigma);
    b.l_init = init_alignment_loss(gt, outputs.transmitted);
    b.l_bi = bilateral_smoothness(outputs.depth, outputs.composed, cfg.gamma,
                                  outputs.alpha_accum);
    b.l_ref = reflection_map_smoothness(outputs.reflection_map);
  }
  b.total = b.l_rgb + b.w_init * b.l_init + b.w_bi * b.l_bi + b.w_ref * b.l_ref;
  return b;
}
}  // namespace

LossBundle overall_loss(const Image& gt, const RenderOutputs& outputs, const LossConfig& cfg,
                        int iter) {
  return assemble(gt, outputs, cfg, iter, nullptr);
}

LossBundle overall_loss_backward(const Image& gt, const RenderOutputs& outputs,
                                 const LossConfig& cfg, int iter, LossGradients& grads) {
  return assemble(gt, outputs, cfg, iter, &grads);
}

}  // namespace refsplat
