#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <vector>

#include "refsplat/camera.hpp"

namespace refsplat {

constexpr int kMaxShDegree = 3;
constexpr int kShCoeffs = (kMaxShDegree + 1) * (kMaxShDegree + 1);  // 16
constexpr int kShValues = kShCoeffs * 3;                            // 48 per set

// Row-major so one Gaussian's 48 coefficients are a contiguous row.
using ShMatrix = Eigen::Matrix<double, Eigen::Dynamic, kShValues, Eigen::RowMajor>;

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double logit(double p) { return std::log(p / (1.0 - p)); }

// Raw (unconstrained) parameters of one extended Gaussian: geometry plus a
// transmitted and a reflected appearance branch and a reflection confidence.
struct RawGaussianParams {
  Vec3 mean = Vec3::Zero();
  Vec4 rotation = Vec4(1, 0, 0, 0);  // quaternion (w,x,y,z), unnormalized storage
  Vec3 log_scale = Vec3::Zero();
  double opacity_logit = 0.0;
  double ref_opacity_logit = 0.0;
  double beta_logit = 0.0;
  Eigen::Matrix<double, kShCoeffs, 3> sh_trans = Eigen::Matrix<double, kShCoeffs, 3>::Zero();
  Eigen::Matrix<double, kShCoeffs, 3> sh_ref = Eigen::Matrix<double, kShCoeffs, 3>::Zero();
};

struct ActivatedGaussian {
  Vec3 mean;
  Mat3 cov3d;
  double opacity;      // in [0,1]
  double ref_opacity;  // in [0,1]
  double beta;         // in [0,1]
};

// Structure-of-arrays cloud; all arrays stay length-synchronized.
struct GaussianCloud {
  std::vector<Vec3> means;
  std::vector<Vec4> rotations;
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<double> ref_opacity_logits;
  std::vector<double> beta_logits;
  ShMatrix sh_trans;  // N x 48, coeff-major rows: [c0.r c0.g c0.b c1.r ...]
  ShMatrix sh_ref;    // N x 48
  int active_sh_degree = 0;
  int max_sh_degree = kMaxShDegree;

  size_t size() const { return means.size(); }
  void resize(size_t n);
  void append(const RawGaussianParams& g);
  RawGaussianParams get(size_t i) const;
  void set(size_t i, const RawGaussianParams& g);
  // Removes the rows where keep[i] is false.
  void filter(const std::vector<uint8_t>& keep);
};

// Per-parameter gradients (or any tangent-space quantity) shaped like a cloud.
struct ParamGradients {
  std::vector<Vec3> means;
  std::vector<Vec4> rotations;
  std::vector<Vec3> log_scales;
  std::vector<double> opacity_logits;
  std::vector<double> ref_opacity_logits;
  std::vector<double> beta_logits;
  ShMatrix sh_trans;
  ShMatrix sh_ref;

  void resize_zero(size_t n);
  void add(const ParamGradients& o);
  size_t size() const { return means.size(); }
};

// Eq.-style covariance factorization: R * S * S^T * R^T with S = diag(exp(log_scale)).
Mat3 build_covariance(const Vec4& rotation, const Vec3& log_scale);

// Rotation matrix of the normalized quaternion (w,x,y,z). Throws on zero norm.
Mat3 quaternion_to_matrix(const Vec4& q);

// exp(-1/2 offset^T cov^{-1} offset), with a tiny diagonal regularizer.
double eval_gaussian_density(const Vec3& offset, const Mat3& cov3d);

ActivatedGaussian activate(const RawGaussianParams& raw);
ActivatedGaussian activate(const GaussianCloud& cloud, size_t i);

// One primitive per point; transmitted DC from the color, reflected branch
// dark, isotropic scale from mean distance to the 3 nearest neighbors.
GaussianCloud init_from_points(const std::vector<Vec3>& points,
                               const std::vector<Vec3>& colors);

// d(cov3d)/d(rotation, log_scale) contracted against an upstream gradient.
void build_covariance_backward(const Vec4& rotation, const Vec3& log_scale,
                               const Mat3& d_cov3d, Vec4& d_rotation, Vec3& d_log_scale);

}  // namespace refsplat
