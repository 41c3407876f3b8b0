#pragma once

#include <optional>

#include "refsplat/camera.hpp"
#include "refsplat/gaussians.hpp"

namespace refsplat {

constexpr double kNearPlane = 0.2;
constexpr double kCullMargin = 1.3;     // times the image half-extent
constexpr double kCovDilation = 0.3;    // screen-space low-pass, pixels^2
constexpr double kExtentSigmas = 3.0;   // footprint radius in std deviations

struct Splat2D {
  Vec2 mean2d = Vec2::Zero();      // pixels
  Mat2 cov2d = Mat2::Zero();       // pixels^2, after dilation
  double depth = 0;                // camera-space z
  int gaussian_index = -1;
};

// EWA projection of one Gaussian; empty when culled (behind the near plane or
// projecting outside kCullMargin times the image bounds).
std::optional<Splat2D> project_gaussian(const Camera& cam, const Vec3& mean, const Mat3& cov3d,
                                        int gaussian_index = -1);

// 3-sigma footprint radius in pixels, rounded up.
double splat_extent(const Mat2& cov2d);

// Adjoint of project_gaussian: upstream gradients on mean2d / cov2d / depth
// are pulled back onto the world-space mean and 3D covariance.
void project_gaussian_backward(const Camera& cam, const Vec3& mean, const Mat3& cov3d,
                               const Vec2& d_mean2d, const Mat2& d_cov2d, double d_depth,
                               Vec3& d_mean, Mat3& d_cov3d);

}  // namespace refsplat
