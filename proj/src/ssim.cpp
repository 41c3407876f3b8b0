#include <cmath>
#include <stdexcept>
#include <vector>

#include "refsplat/losses.hpp"

namespace refsplat {

namespace {

constexpr double kSsimC1 = 0.01 * 0.01;
constexpr double kSsimC2 = 0.03 * 0.03;

std::vector<double> gaussian_kernel(int window, double sigma) {
  std::vector<double> k(window);
  double sum = 0;
  for (int i = 0; i < window; ++i) {
    double x = i - (window - 1) * 0.5;
    k[i] = std::exp(-x * x / (2 * sigma * sigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable 'same' convolution with zero padding on a single channel plane.
// The kernel is symmetric, so this is its own adjoint.
void conv_same(const std::vector<double>& in, int h, int w, const std::vector<double>& k,
               std::vector<double>& tmp, std::vector<double>& out) {
  int r = static_cast<int>(k.size()) / 2;
  tmp.assign(in.size(), 0.0);
  out.assign(in.size(), 0.0);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int t = -r; t <= r; ++t) {
        int xx = x + t;
        if (xx >= 0 && xx < w) s += k[t + r] * in[static_cast<size_t>(y) * w + xx];
      }
      tmp[static_cast<size_t>(y) * w + x] = s;
    }
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      double s = 0;
      for (int t = -r; t <= r; ++t) {
        int yy = y + t;
        if (yy >= 0 && yy < h) s += k[t + r] * tmp[static_cast<size_t>(yy) * w + x];
      }
      out[static_cast<size_t>(y) * w + x] = s;
    }
}

struct Plane {
  std::vector<double> v;
  Plane(size_t n = 0) : v(n, 0.0) {}
};

}  // namespace

double ssim(const Image& a, const Image& b, int window, double sigma) {
  Image::check_same_shape(a, b);
  if (a.height() < window || a.width() < window)
    throw std::invalid_argument("ssim: image smaller than window");
  const int h = a.height(), w = a.width(), ch = a.channels();
  const size_t n = static_cast<size_t>(h) * w;
  auto k = gaussian_kernel(window, sigma);
  std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
  std::vector<double> u1, u2, v1, v2, v12, tmp;
  double total = 0;
  for (int c = 0; c < ch; ++c) {
    for (size_t p = 0; p < n; ++p) {
      double av = a.data()[p * ch + c], bv = b.data()[p * ch + c];
      pa[p] = av;
      pb[p] = bv;
      paa[p] = av * av;
      pbb[p] = bv * bv;
      pab[p] = av * bv;
    }
    conv_same(pa, h, w, k, tmp, u1);
    conv_same(pb, h, w, k, tmp, u2);
    conv_same(paa, h, w, k, tmp, v1);
    conv_same(pbb, h, w, k, tmp, v2);
    conv_same(pab, h, w, k, tmp, v12);
    for (size_t p = 0; p < n; ++p) {
      double s1 = v1[p] - u1[p] * u1[p];
      double s2 = v2[p] - u2[p] * u2[p];
      double s12 = v12[p] - u1[p] * u2[p];
      double num = (2 * u1[p] * u2[p] + kSsimC1) * (2 * s12 + kSsimC2);
      double den = (u1[p] * u1[p] + u2[p] * u2[p] + kSsimC1) * (s1 + s2 + kSsimC2);
      total += num / den;
    }
  }
  return total / (static_cast<double>(n) * ch);
}

double dssim_loss(const Image& a, const Image& b, int window, double sigma) {
  return (1.0 - ssim(a, b, window, sigma)) * 0.5;
}

double dssim_loss_backward(const Image& a, const Image& b, Image& grad_a,
                           int window, double sigma) {
  Image::check_same_shape(a, b);
  Image::check_same_shape(a, grad_a);
  if (a.height() < window || a.width() < window)
    throw std::invalid_argument("ssim: image smaller than window");
  const int h = a.height(), w = a.width(), ch = a.channels();
  const size_t n = static_cast<size_t>(h) * w;
  auto k = gaussian_kernel(window, sigma);
  std::vector<double> pa(n), pb(n), paa(n), pbb(n), pab(n);
  std::vector<double> u1, u2, v1, v2, v12, tmp;
  std::vector<double> du1(n), dv1(n), dv12(n), g1, g2, g3;
  const double gmap = -1.0 / (2.0 * static_cast<double>(n) * ch);
  double total = 0;
  for (int c = 0; c < ch; ++c) {
    for (size_t p = 0; p < n; ++p) {
      double av = a.data()[p * ch + c], bv = b.data()[p * ch + c];
      pa[p] = av;
      pb[p] = bv;
      paa[p] = av * av;
      pbb[p] = bv * bv;
      pab[p] = av * bv;
    }
    conv_same(pa, h, w, k, tmp, u1);
    conv_same(pb, h, w, k, tmp, u2);
    conv_same(paa, h, w, k, tmp, v1);
    conv_same(pbb, h, w, k, tmp, v2);
    conv_same(pab, h, w, k, tmp, v12);
    for (size_t p = 0; p < n; ++p) {
      double s1 = v1[p] - u1[p] * u1[p];
      double s2 = v2[p] - u2[p] * u2[p];
      double s12 = v12[p] - u1[p] * u2[p];
      double a1 = 2 * u1[p] * u2[p] + kSsimC1;
      double a2 = 2 * s12 + kSsimC2;
      double b1 = u1[p] * u1[p] + u2[p] * u2[p] + kSsimC1;
      double b2 = s1 + s2 + kSsimC2;
      double den = b1 * b2;
      double num = a1 * a2;
      total += num / den;
      double d_num = gmap / den;
      double d_den = -gmap * num / (den * den);
      double d_a1 = d_num * a2, d_a2 = d_num * a1;
      double d_b1 = d_den * b2, d_b2 = d_den * b1;
      double d_s1 = d_b2, d_s12 = 2 * d_a2;
      du1[p] = d_a1 * 2 * u2[p] + d_b1 * 2 * u1[p] - 2 * u1[p] * d_s1 - u2[p] * d_s12;
      dv1[p] = d_s1;
      dv12[p] = d_s12;
    }
    conv_same(du1, h, w, k, tmp, g1);
    conv_same(dv1, h, w, k, tmp, g2);
    conv_same(dv12, h, w, k, tmp, g3);
    for (size_t p = 0; p < n; ++p)
      grad_a.data()[p * ch + c] += g1[p] + 2 * pa[p] * g2[p] + pb[p] * g3[p];
  }
  return (1.0 - total / (static_cast<double>(n) * ch)) * 0.5;
}

}  // namespace refsplat
