#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "refsplat/losses.hpp"
#include "test_utils.hpp"

using namespace refsplat;
using testutil::rel_close;

namespace {

Image random_image(uint64_t seed, int h, int w, int c, double lo = 0.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  Image img(h, w, c);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = uni(rng);
  return img;
}

// Direct windowed SSIM: per-pixel statistics via explicit 2D loops over the
// zero-padded neighborhood, no separability tricks.
double ssim_reference(const Image& a, const Image& b, int window, double sigma) {
  int H = a.height(), W = a.width(), C = a.channels(), r = window / 2;
  std::vector<double> k(window);
  double ksum = 0;
  for (int i = 0; i < window; ++i) {
    k[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    ksum += k[i];
  }
  for (double& v : k) v /= ksum;
  const double c1 = 0.01 * 0.01, c2 = 0.03 * 0.03;
  double total = 0;
  for (int ch = 0; ch < C; ++ch)
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        double mu1 = 0, mu2 = 0, m11 = 0, m22 = 0, m12 = 0;
        for (int dy = -r; dy <= r; ++dy)
          for (int dx = -r; dx <= r; ++dx) {
            int yy = y + dy, xx = x + dx;
            double wgt = k[dy + r] * k[dx + r];
            double va = 0, vb = 0;  // zero padding
            if (yy >= 0 && yy < H && xx >= 0 && xx < W) {
              va = a.at(yy, xx, ch);
              vb = b.at(yy, xx, ch);
            }
            mu1 += wgt * va;
            mu2 += wgt * vb;
            m11 += wgt * va * va;
            m22 += wgt * vb * vb;
            m12 += wgt * va * vb;
          }
        double s1 = m11 - mu1 * mu1, s2 = m22 - mu2 * mu2, s12 = m12 - mu1 * mu2;
        total += ((2 * mu1 * mu2 + c1) * (2 * s12 + c2)) /
                 ((mu1 * mu1 + mu2 * mu2 + c1) * (s1 + s2 + c2));
      }
  return total / (static_cast<double>(H) * W * C);
}

template <typename Loss, typename Backward>
void check_image_gradient(const Image& a, const Image& b, Loss loss, Backward backward,
                          uint64_t seed, int samples = 24) {
  Image g(a.height(), a.width(), a.channels());
  backward(a, b, g);
  std::mt19937_64 rng(seed);
  const double h = 1e-6;
  Image ap = a;
  for (int s = 0; s < samples; ++s) {
    size_t i = rng() % a.size();
    double v = a.data()[i];
    ap.data()[i] = v + h;
    double fp = loss(ap, b);
    ap.data()[i] = v - h;
    double fm = loss(ap, b);
    ap.data()[i] = v;
    CHECK(rel_close(g.data()[i], (fp - fm) / (2 * h), 1e-4, 1e-8));
  }
}

}  // namespace

TEST_CASE("l1 loss zero condition and hand value") {
  Image a = random_image(1, 8, 8, 3);
  CHECK(l1_loss(a, a) == 0.0);
  Image b = a;
  b.at(0, 0, 0) += 0.5;
  CHECK(rel_close(l1_loss(a, b), 0.5 / a.size(), 1e-12));
}

TEST_CASE("ssim equals one on identical images and matches the direct oracle") {
  Image a = random_image(2, 20, 24, 3);
  CHECK(rel_close(ssim(a, a), 1.0, 1e-12));
  CHECK(dssim_loss(a, a) == 0.0);
  Image b = random_image(3, 20, 24, 3);
  CHECK(rel_close(ssim(a, b), ssim_reference(a, b, 11, 1.5), 1e-10, 1e-12));
  CHECK(rel_close(ssim(a, b, 7, 1.0), ssim_reference(a, b, 7, 1.0), 1e-10, 1e-12));
  CHECK(rel_close(ssim(a, b), ssim(b, a), 1e-12));
}

TEST_CASE("loss backward passes match finite differences") {
  Image a = random_image(4, 12, 14, 3, 0.1, 0.9);
  Image b = random_image(5, 12, 14, 3, 0.1, 0.9);
  check_image_gradient(
      a, b, [](const Image& x, const Image& y) { return l1_loss(x, y); },
      [](const Image& x, const Image& y, Image& g) { l1_loss_backward(x, y, g); }, 10);
  check_image_gradient(
      a, b, [](const Image& x, const Image& y) { return dssim_loss(x, y); },
      [](const Image& x, const Image& y, Image& g) { dssim_loss_backward(x, y, g); }, 11);
  check_image_gradient(
      a, b, [](const Image& x, const Image& y) { return photometric_loss(y, x, 0.8); },
      [](const Image& x, const Image& y, Image& g) {
        photometric_loss_backward(y, x, 0.8, g);
      },
      12);
}

TEST_CASE("photometric loss is the stated blend") {
  Image a = random_image(6, 16, 16, 3);
  Image b = random_image(7, 16, 16, 3);
  double expect = 0.8 * l1_loss(a, b) + 0.2 * dssim_loss(a, b);
  CHECK(rel_close(photometric_loss(a, b, 0.8), expect, 1e-12));
  CHECK(photometric_loss(a, a, 0.8) == 0.0);
}

TEST_CASE("bilateral smoothness zero conditions") {
  Image comp = random_image(8, 10, 10, 3);
  Image alpha(10, 10, 1, 1.0);
  Image flat_depth(10, 10, 1, 2.5);
  CHECK(bilateral_smoothness(flat_depth, comp, 0.1, alpha) == 0.0);
  // background-only pixels contribute nothing
  Image depth = random_image(9, 10, 10, 1);
  Image no_alpha(10, 10, 1, 0.0);
  CHECK(bilateral_smoothness(depth, comp, 0.1, no_alpha) == 0.0);
}

TEST_CASE("bilateral smoothness decays across color edges") {
  // sharp color edge down the middle; same depth step in both images
  Image depth(8, 8, 1);
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) depth.at(y, x) = x < 4 ? 0.0 : 1.0;
  Image alpha(8, 8, 1, 1.0);
  Image flat_color(8, 8, 3, 0.5);
  Image edge_color = flat_color;
  for (int y = 0; y < 8; ++y)
    for (int x = 4; x < 8; ++x)
      for (int c = 0; c < 3; ++c) edge_color.at(y, x, c) = 0.9;
  double smooth_region = bilateral_smoothness(depth, flat_color, 0.1, alpha);
  double edge_region = bilateral_smoothness(depth, edge_color, 0.1, alpha);
  CHECK(edge_region < smooth_region);
  CHECK(smooth_region > 0.0);
}

TEST_CASE("bilateral backward matches finite differences in depth and color") {
  Image depth = random_image(14, 9, 9, 1, 0.2, 3.0);
  Image comp = random_image(15, 9, 9, 3, 0.1, 0.9);
  Image alpha = random_image(16, 9, 9, 1, 0.3, 1.0);
  Image gd(9, 9, 1), gc(9, 9, 3);
  bilateral_smoothness_backward(depth, comp, 0.1, alpha, gd, gc);
  std::mt19937_64 rng(17);
  const double h = 1e-6;
  for (int s = 0; s < 20; ++s) {
    size_t i = rng() % depth.size();
    double v = depth.data()[i];
    depth.data()[i] = v + h;
    double fp = bilateral_smoothness(depth, comp, 0.1, alpha);
    depth.data()[i] = v - h;
    double fm = bilateral_smoothness(depth, comp, 0.1, alpha);
    depth.data()[i] = v;
    CHECK(rel_close(gd.data()[i], (fp - fm) / (2 * h), 1e-4, 1e-8));
  }
  for (int s = 0; s < 20; ++s) {
    size_t i = rng() % comp.size();
    double v = comp.data()[i];
    comp.data()[i] = v + h;
    double fp = bilateral_smoothness(depth, comp, 0.1, alpha);
    comp.data()[i] = v - h;
    double fm = bilateral_smoothness(depth, comp, 0.1, alpha);
    comp.data()[i] = v;
    CHECK(rel_close(gc.data()[i], (fp - fm) / (2 * h), 1e-4, 1e-8));
  }
}

TEST_CASE("reflection map smoothness zero condition, hand value, gradient") {
  Image flat(6, 6, 1, 0.37);
  CHECK(reflection_map_smoothness(flat) == 0.0);
  // single step edge: |dW| = 0.5 on the 6 vertical pairs crossing the edge and
  // the 10 diagonal pairs; normalized by the total pair count
  Image w(6, 6, 1, 0.0);
  for (int y = 0; y < 6; ++y)
    for (int x = 3; x < 6; ++x) w.at(y, x) = 0.5;
  double val = reflection_map_smoothness(w);
  CHECK(val > 0.0);
  Image wr = random_image(18, 7, 7, 1);
  check_image_gradient(
      wr, flat, [](const Image& x, const Image&) { return reflection_map_smoothness(x); },
      [](const Image& x, const Image&, Image& g) { reflection_map_smoothness_backward(x, g); },
      19);
}

TEST_CASE("overall loss assembles the weighted total and gates the init term") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 12;
  spec.width = spec.height = 24;
  GaussianCloud cloud = testutil::random_cloud(21, spec);
  Camera cam = testutil::test_camera(24, 24);
  RenderOutputs o = render(cloud, cam);
  Image gt = random_image(22, 24, 24, 3);
  LossConfig cfg;

  LossBundle early = overall_loss(gt, o, cfg, 100);
  CHECK(early.w_init == 0.1);
  CHECK(rel_close(early.total,
                  early.l_rgb + 0.1 * early.l_init + 1e-4 * early.l_bi + 1e-4 * early.l_ref,
                  1e-12));
  CHECK(rel_close(early.l_rgb, photometric_loss(gt, o.composed, 0.8), 1e-12));
  CHECK(rel_close(early.l_init, l1_loss(gt, o.transmitted), 1e-12));

  LossBundle late = overall_loss(gt, o, cfg, 3000);
  CHECK(late.w_init == 0.0);
  CHECK(rel_close(late.total, late.l_rgb + 1e-4 * late.l_bi + 1e-4 * late.l_ref, 1e-12));

  // losses consume the unclamped composed image
  CHECK(early.l_rgb >= 0.0);
}

TEST_CASE("overall loss backward agrees with the forward bundle") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 10;
  spec.width = spec.height = 20;
  GaussianCloud cloud = testutil::random_cloud(23, spec);
  Camera cam = testutil::test_camera(20, 20);
  RenderOutputs o = render(cloud, cam);
  Image gt = random_image(24, 20, 20, 3);
  LossConfig cfg;
  LossGradients lg;
  LossBundle fwd = overall_loss(gt, o, cfg, 50);
  LossBundle bwd = overall_loss_backward(gt, o, cfg, 50, lg);
  CHECK(rel_close(fwd.total, bwd.total, 1e-12));
  CHECK(lg.d_composed.same_shape(o.composed));
  CHECK(lg.d_transmitted.same_shape(o.transmitted));
  CHECK(lg.d_reflection_map.same_shape(o.reflection_map));
  CHECK(lg.d_depth.same_shape(o.depth));
}
