#include "refsplat/projection.hpp"

#include <cmath>

namespace refsplat {

namespace {
// Perspective Jacobian (rows du/dt, dv/dt) at camera-space point t.
Eigen::Matrix<double, 2, 3> perspective_jacobian(const Camera& cam, const Vec3& t) {
  Eigen::Matrix<double, 2, 3> j;
  double inv_z = 1.0 / t.z();
  j << cam.fx * inv_z, 0, -cam.fx * t.x() * inv_z * inv_z,
       0, cam.fy * inv_z, -cam.fy * t.y() * inv_z * inv_z;
  return j;
}
}  // namespace

std::optional<Splat2D> project_gaussian(const Camera& cam, const Vec3& mean, const Mat3& cov3d,
                                        int gaussian_index) {
  Vec3 t = cam.to_camera(mean);
  if (t.z() <= kNearPlane) return std::nullopt;

  double u = cam.fx * t.x() / t.z() + cam.cx;
  double v = cam.fy * t.y() / t.z() + cam.cy;
  double mx = (kCullMargin - 1.0) * 0.5;
  if (u < -mx * cam.width || u > (1.0 + mx) * cam.width ||
      v < -mx * cam.height || v > (1.0 + mx) * cam.height)
    return std::nullopt;

  Eigen::Matrix<double, 2, 3> m = perspective_jacobian(cam, t) * cam.rotation;
  Mat2 cov2d = m * cov3d * m.transpose();
  cov2d += kCovDilation * Mat2::Identity();

  Splat2D s;
  s.mean2d = Vec2(u, v);
  s.cov2d = 0.5 * (cov2d + cov2d.transpose());
  s.depth = t.z();
  s.gaussian_index = gaussian_index;
  return s;
}

double splat_extent(const Mat2& cov2d) {
  double mid = 0.5 * (cov2d(0, 0) + cov2d(1, 1));
  double det = cov2d(0, 0) * cov2d(1, 1) - cov2d(0, 1) * cov2d(1, 0);
  double disc = std::sqrt(std::max(0.0, mid * mid - det));
  double lambda_max = mid + disc;
  return std::ceil(kExtentSigmas * std::sqrt(std::max(0.0, lambda_max)));
}

void project_gaussian_backward(const Camera& cam, const Vec3& mean, const Mat3& cov3d,
                               const Vec2& d_mean2d, const Mat2& d_cov2d, double d_depth,
                               Vec3& d_mean, Mat3& d_cov3d) {
  Vec3 t = cam.to_camera(mean);
  double inv_z = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> j = perspective_jacobian(cam, t);
  Eigen::Matrix<double, 2, 3> m = j * cam.rotation;

  Mat2 g = 0.5 * (d_cov2d + d_cov2d.transpose());

  // cov2d = M cov3d M^T
  d_cov3d += m.transpose() * g * m;
  Eigen::Matrix<double, 2, 3> d_m = 2.0 * g * m * cov3d;
  Eigen::Matrix<double, 2, 3> d_j = d_m * cam.rotation.transpose();

  // J depends on t
  Vec3 d_t = Vec3::Zero();
  double iz2 = inv_z * inv_z, iz3 = iz2 * inv_z;
  d_t.x() += d_j(0, 2) * (-cam.fx * iz2);
  d_t.y() += d_j(1, 2) * (-cam.fy * iz2);
  d_t.z() += d_j(0, 0) * (-cam.fx * iz2) + d_j(0, 2) * (2.0 * cam.fx * t.x() * iz3) +
             d_j(1, 1) * (-cam.fy * iz2) + d_j(1, 2) * (2.0 * cam.fy * t.y() * iz3);

  // mean2d = (fx tx/tz + cx, fy ty/tz + cy)
  d_t.x() += d_mean2d.x() * cam.fx * inv_z;
  d_t.y() += d_mean2d.y() * cam.fy * inv_z;
  d_t.z() += -d_mean2d.x() * cam.fx * t.x() * iz2 - d_mean2d.y() * cam.fy * t.y() * iz2;

  // depth = tz
  d_t.z() += d_depth;

  d_mean += cam.rotation.transpose() * d_t;
}

}  // namespace refsplat
