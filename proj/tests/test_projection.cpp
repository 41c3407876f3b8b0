#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_utils.hpp"

using namespace refsplat;
using testutil::rel_close;

namespace {

Camera centered_camera() {
  Camera cam;
  cam.fx = 100;
  cam.fy = 120;
  cam.cx = 32;
  cam.cy = 24;
  cam.width = 64;
  cam.height = 48;
  cam.rotation = Mat3::Identity();
  cam.translation = Vec3::Zero();
  return cam;
}

}  // namespace

TEST_CASE("on-axis point projects to the principal point") {
  Camera cam = centered_camera();
  Mat3 cov = 0.01 * Mat3::Identity();
  auto s = project_gaussian(cam, Vec3(0, 0, 2), cov);
  REQUIRE(s.has_value());
  CHECK(rel_close(s->mean2d.x(), cam.cx, 1e-12));
  CHECK(rel_close(s->mean2d.y(), cam.cy, 1e-12));
  CHECK(s->depth == 2.0);
}

TEST_CASE("projected covariance includes the screen-space dilation") {
  Camera cam = centered_camera();
  // isotropic world covariance on axis: cov2d = diag((fx*s/z)^2, (fy*s/z)^2) + 0.3 I
  double s2 = 0.04, z = 2.0;
  auto s = project_gaussian(cam, Vec3(0, 0, z), s2 * Mat3::Identity());
  REQUIRE(s.has_value());
  CHECK(rel_close(s->cov2d(0, 0), s2 * cam.fx * cam.fx / (z * z) + 0.3, 1e-10));
  CHECK(rel_close(s->cov2d(1, 1), s2 * cam.fy * cam.fy / (z * z) + 0.3, 1e-10));
  CHECK(std::abs(s->cov2d(0, 1)) < 1e-12);
}

TEST_CASE("near-plane culling") {
  Camera cam = centered_camera();
  Mat3 cov = 0.01 * Mat3::Identity();
  CHECK(!project_gaussian(cam, Vec3(0, 0, 0.19), cov).has_value());
  CHECK(project_gaussian(cam, Vec3(0, 0, 0.21), cov).has_value());
  CHECK(!project_gaussian(cam, Vec3(0, 0, -1.0), cov).has_value());
}

TEST_CASE("frustum culling with the 1.3x margin") {
  Camera cam = centered_camera();
  Mat3 cov = 0.01 * Mat3::Identity();
  // u = fx*x/z + cx; margin lets u run in [-0.15*W, 1.15*W) = [-9.6, 73.6)
  auto at_u = [&](double u) { return Vec3((u - cam.cx) / cam.fx * 2.0, 0, 2.0); };
  CHECK(project_gaussian(cam, at_u(-9.0), cov).has_value());
  CHECK(!project_gaussian(cam, at_u(-10.5), cov).has_value());
  CHECK(project_gaussian(cam, at_u(73.0), cov).has_value());
  CHECK(!project_gaussian(cam, at_u(74.5), cov).has_value());
}

TEST_CASE("splat extent is the ceil of 3 sigma along the major axis") {
  Mat2 iso;
  iso << 4.0, 0.0, 0.0, 1.0;  // lambda_max 4 -> 3*2 = 6
  CHECK(splat_extent(iso) == 6.0);
  Mat2 rot;
  rot << 2.5, 1.5, 1.5, 2.5;  // eigenvalues 4 and 1
  CHECK(splat_extent(rot) == 6.0);
  Mat2 small;
  small << 0.5, 0, 0, 0.5;  // 3*sqrt(0.5) = 2.1213 -> 3
  CHECK(splat_extent(small) == 3.0);
}

TEST_CASE("projected covariance stays positive definite") {
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> uni(-1, 1);
  Camera cam = testutil::test_camera(64, 64);
  for (int t = 0; t < 200; ++t) {
    Vec4 q(1 + uni(rng), uni(rng), uni(rng), uni(rng));
    Vec3 ls(uni(rng) - 1.5, uni(rng) - 1.5, uni(rng) - 1.5);
    Vec3 mean(1.5 * uni(rng), 1.5 * uni(rng), uni(rng));
    auto s = project_gaussian(cam, mean, build_covariance(q, ls));
    if (!s) continue;
    CHECK(s->cov2d(0, 1) == s->cov2d(1, 0));
    CHECK(s->cov2d.determinant() > 0.0);
    CHECK(s->cov2d(0, 0) >= 0.3);  // dilation floor
    CHECK(s->cov2d(1, 1) >= 0.3);
  }
}

TEST_CASE("projection backward matches finite differences") {
  std::mt19937_64 rng(37);
  std::uniform_real_distribution<double> uni(-1, 1);
  Camera cam = testutil::test_camera(64, 64);
  const double h = 1e-6;
  int tested = 0;
  for (int t = 0; t < 40 && tested < 20; ++t) {
    Vec4 q(1 + 0.4 * uni(rng), 0.4 * uni(rng), 0.4 * uni(rng), 0.4 * uni(rng));
    Vec3 ls(uni(rng) - 1.5, uni(rng) - 1.5, uni(rng) - 1.5);
    Vec3 mean(uni(rng), uni(rng), 0.5 * uni(rng));
    Mat3 cov3d = build_covariance(q, ls);
    if (!project_gaussian(cam, mean, cov3d)) continue;
    ++tested;

    Vec2 d_mean2d(uni(rng), uni(rng));
    Mat2 d_cov2d;
    d_cov2d << uni(rng), uni(rng), 0, uni(rng);
    d_cov2d(1, 0) = d_cov2d(0, 1);  // symmetric upstream, like the conic chain
    double d_depth = uni(rng);

    Vec3 d_mean = Vec3::Zero();
    Mat3 d_cov3d = Mat3::Zero();
    project_gaussian_backward(cam, mean, cov3d, d_mean2d, d_cov2d, d_depth, d_mean, d_cov3d);

    auto f = [&](const Vec3& m, const Mat3& c) {
      auto s = project_gaussian(cam, m, c);
      REQUIRE(s.has_value());
      return d_mean2d.dot(s->mean2d) + (d_cov2d.array() * s->cov2d.array()).sum() +
             d_depth * s->depth;
    };
    for (int i = 0; i < 3; ++i) {
      Vec3 mp = mean, mm = mean;
      mp[i] += h;
      mm[i] -= h;
      CHECK(rel_close(d_mean[i], (f(mp, cov3d) - f(mm, cov3d)) / (2 * h), 2e-5, 1e-6));
    }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j) {
        Mat3 cp = cov3d, cm = cov3d;
        cp(i, j) += h;
        cm(i, j) -= h;
        CHECK(rel_close(d_cov3d(i, j), (f(mean, cp) - f(mean, cm)) / (2 * h), 2e-5, 1e-6));
      }
  }
  CHECK(tested == 20);
}
