#pragma once

#include <Eigen/Dense>
#include <stdexcept>
#include <string>

namespace refsplat {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;

// Pinhole camera with a world-to-camera rigid transform. Camera looks down
// +z in its own frame; a point is in front of the lens when (R*p + t).z > 0.
struct Camera {
  double fx = 0, fy = 0;
  double cx = 0, cy = 0;
  int width = 0, height = 0;
  Mat3 rotation = Mat3::Identity();  // world -> camera
  Vec3 translation = Vec3::Zero();
  std::string name;

  Vec3 to_camera(const Vec3& p) const { return rotation * p + translation; }
  Vec3 position() const { return -rotation.transpose() * translation; }

  void validate() const {
    if (fx <= 0 || fy <= 0) throw std::invalid_argument("camera focal lengths must be positive");
    if (width < 16 || height < 16) throw std::invalid_argument("camera image size must be >= 16");
  }

  static Camera look_at(const Vec3& eye, const Vec3& target, const Vec3& up,
                        double focal, int width, int height) {
    Camera cam;
    Vec3 fwd = (target - eye).normalized();
    Vec3 right = fwd.cross(up).normalized();
    Vec3 down = fwd.cross(right).normalized();
    cam.rotation.row(0) = right.transpose();
    cam.rotation.row(1) = down.transpose();
    cam.rotation.row(2) = fwd.transpose();
    cam.translation = -cam.rotation * eye;
    cam.fx = cam.fy = focal;
    cam.cx = width * 0.5;
    cam.cy = height * 0.5;
    cam.width = width;
    cam.height = height;
    return cam;
  }
};

}  // namespace refsplat
