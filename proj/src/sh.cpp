#include "refsplat/sh.hpp"

#include <cstring>
#include <stdexcept>

namespace refsplat {

namespace {
constexpr double kC0 = 0.28209479177387814;
constexpr double kC1 = 0.4886025119029199;
constexpr double kC2[5] = {1.0925484305920792, -1.0925484305920792, 0.31539156525252005,
                           -1.0925484305920792, 0.5462742152960396};
constexpr double kC3[7] = {-0.5900435899266435, 2.890611442640554, -0.4570457994644658,
                           0.3731763325901154, -0.4570457994644658, 1.445305721320277,
                           -0.5900435899266435};

// Basis values plus their direction gradients.
void sh_basis_grad(const Vec3& dir, int degree, double* b, Vec3* db) {
  double x = dir[0], y = dir[1], z = dir[2];
  b[0] = kC0;
  if (db) db[0].setZero();
  if (degree < 1) return;
  b[1] = -kC1 * y;
  b[2] = kC1 * z;
  b[3] = -kC1 * x;
  if (db) {
    db[1] = Vec3(0, -kC1, 0);
    db[2] = Vec3(0, 0, kC1);
    db[3] = Vec3(-kC1, 0, 0);
  }
  if (degree < 2) return;
  double xx = x * x, yy = y * y, zz = z * z;
  b[4] = kC2[0] * x * y;
  b[5] = kC2[1] * y * z;
  b[6] = kC2[2] * (2 * zz - xx - yy);
  b[7] = kC2[3] * x * z;
  b[8] = kC2[4] * (xx - yy);
  if (db) {
    db[4] = Vec3(kC2[0] * y, kC2[0] * x, 0);
    db[5] = Vec3(0, kC2[1] * z, kC2[1] * y);
    db[6] = Vec3(-2 * kC2[2] * x, -2 * kC2[2] * y, 4 * kC2[2] * z);
    db[7] = Vec3(kC2[3] * z, 0, kC2[3] * x);
    db[8] = Vec3(2 * kC2[4] * x, -2 * kC2[4] * y, 0);
  }
  if (degree < 3) return;
  b[9] = kC3[0] * y * (3 * xx - yy);
  b[10] = kC3[1] * x * y * z;
  b[11] = kC3[2] * y * (4 * zz - xx - yy);
  b[12] = kC3[3] * z * (2 * zz - 3 * xx - 3 * yy);
  b[13] = kC3[4] * x * (4 * zz - xx - yy);
  b[14] = kC3[5] * z * (xx - yy);
  b[15] = kC3[6] * x * (xx - 3 * yy);
  if (db) {
    db[9] = Vec3(kC3[0] * 6 * x * y, kC3[0] * (3 * xx - 3 * yy), 0);
    db[10] = Vec3(kC3[1] * y * z, kC3[1] * x * z, kC3[1] * x * y);
    db[11] = Vec3(-2 * kC3[2] * x * y, kC3[2] * (4 * zz - xx - 3 * yy), 8 * kC3[2] * y * z);
    db[12] = Vec3(-6 * kC3[3] * x * z, -6 * kC3[3] * y * z, kC3[3] * (6 * zz - 3 * xx - 3 * yy));
    db[13] = Vec3(kC3[4] * (4 * zz - 3 * xx - yy), -2 * kC3[4] * x * y, 8 * kC3[4] * x * z);
    db[14] = Vec3(2 * kC3[5] * x * z, -2 * kC3[5] * y * z, kC3[5] * (xx - yy));
    db[15] = Vec3(kC3[6] * (3 * xx - 3 * yy), -6 * kC3[6] * x * y, 0);
  }
}
}  // namespace

void sh_basis(const Vec3& dir, int degree, double* out16) {
  if (degree < 0 || degree > kMaxShDegree) throw std::invalid_argument("sh degree out of range");
  sh_basis_grad(dir, degree, out16, nullptr);
}

Vec3 eval_sh_with_clamp(const double* coeffs, const Vec3& view_dir, int degree, bool* clamped) {
  double b[kShCoeffs];
  sh_basis(view_dir, degree, b);
  int nc = (degree + 1) * (degree + 1);
  Vec3 color = Vec3::Zero();
  for (int c = 0; c < nc; ++c)
    for (int ch = 0; ch < 3; ++ch) color[ch] += b[c] * coeffs[c * 3 + ch];
  color.array() += 0.5;
  for (int ch = 0; ch < 3; ++ch) {
    bool cl = color[ch] < 0.0;
    if (clamped) clamped[ch] = cl;
    if (cl) color[ch] = 0.0;
  }
  return color;
}

Vec3 eval_sh(const double* coeffs, const Vec3& view_dir, int degree) {
  return eval_sh_with_clamp(coeffs, view_dir, degree, nullptr);
}

void eval_sh_backward(const double* coeffs, const Vec3& view_dir, int degree,
                      const Vec3& d_color, const bool* clamped,
                      double* d_coeffs, Vec3& d_dir) {
  double b[kShCoeffs];
  Vec3 db[kShCoeffs];
  sh_basis_grad(view_dir, degree, b, db);
  int nc = (degree + 1) * (degree + 1);
  for (int ch = 0; ch < 3; ++ch) {
    double g = (clamped && clamped[ch]) ? 0.0 : d_color[ch];
    if (g == 0.0) continue;
    for (int c = 0; c < nc; ++c) {
      d_coeffs[c * 3 + ch] += g * b[c];
      d_dir += g * coeffs[c * 3 + ch] * db[c];
    }
  }
}

}  // namespace refsplat
