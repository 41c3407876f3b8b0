#include "refsplat/gaussians.hpp"

#include <algorithm>
#include <limits>
#include <stdexcept>

namespace refsplat {

void GaussianCloud::resize(size_t n) {
  means.resize(n, Vec3::Zero());
  rotations.resize(n, Vec4(1, 0, 0, 0));
  log_scales.resize(n, Vec3::Zero());
  opacity_logits.resize(n, 0.0);
  ref_opacity_logits.resize(n, 0.0);
  beta_logits.resize(n, 0.0);
  sh_trans.conservativeResize(n, kShValues);
  sh_ref.conservativeResize(n, kShValues);
}

void GaussianCloud::append(const RawGaussianParams& g) {
  size_t n = size();
  resize(n + 1);
  set(n, g);
}

RawGaussianParams GaussianCloud::get(size_t i) const {
  RawGaussianParams g;
  g.mean = means[i];
  g.rotation = rotations[i];
  g.log_scale = log_scales[i];
  g.opacity_logit = opacity_logits[i];
  g.ref_opacity_logit = ref_opacity_logits[i];
  g.beta_logit = beta_logits[i];
  for (int c = 0; c < kShCoeffs; ++c)
    for (int ch = 0; ch < 3; ++ch) {
      g.sh_trans(c, ch) = sh_trans(i, c * 3 + ch);
      g.sh_ref(c, ch) = sh_ref(i, c * 3 + ch);
    }
  return g;
}

void GaussianCloud::set(size_t i, const RawGaussianParams& g) {
  means[i] = g.mean;
  rotations[i] = g.rotation;
  log_scales[i] = g.log_scale;
  opacity_logits[i] = g.opacity_logit;
  ref_opacity_logits[i] = g.ref_opacity_logit;
  beta_logits[i] = g.beta_logit;
  for (int c = 0; c < kShCoeffs; ++c)
    for (int ch = 0; ch < 3; ++ch) {
      sh_trans(i, c * 3 + ch) = g.sh_trans(c, ch);
      sh_ref(i, c * 3 + ch) = g.sh_ref(c, ch);
    }
}

void GaussianCloud::filter(const std::vector<uint8_t>& keep) {
  size_t n = size(), w = 0;
  for (size_t i = 0; i < n; ++i) {
    if (!keep[i]) continue;
    if (w != i) {
      means[w] = means[i];
      rotations[w] = rotations[i];
      log_scales[w] = log_scales[i];
      opacity_logits[w] = opacity_logits[i];
      ref_opacity_logits[w] = ref_opacity_logits[i];
      beta_logits[w] = beta_logits[i];
      sh_trans.row(w) = sh_trans.row(i);
      sh_ref.row(w) = sh_ref.row(i);
    }
    ++w;
  }
  resize(w);
}

void ParamGradients::resize_zero(size_t n) {
  means.assign(n, Vec3::Zero());
  rotations.assign(n, Vec4::Zero());
  log_scales.assign(n, Vec3::Zero());
  opacity_logits.assign(n, 0.0);
  ref_opacity_logits.assign(n, 0.0);
  beta_logits.assign(n, 0.0);
  sh_trans = ShMatrix::Zero(n, kShValues);
  sh_ref = ShMatrix::Zero(n, kShValues);
}

void ParamGradients::add(const ParamGradients& o) {
  size_t n = size();
  for (size_t i = 0; i < n; ++i) {
    means[i] += o.means[i];
    rotations[i] += o.rotations[i];
    log_scales[i] += o.log_scales[i];
    opacity_logits[i] += o.opacity_logits[i];
    ref_opacity_logits[i] += o.ref_opacity_logits[i];
    beta_logits[i] += o.beta_logits[i];
  }
  sh_trans += o.sh_trans;
  sh_ref += o.sh_ref;
}

Mat3 quaternion_to_matrix(const Vec4& q) {
  double n = q.norm();
  if (n < 1e-300) throw std::invalid_argument("degenerate rotation: zero-norm quaternion");
  double w = q[0] / n, x = q[1] / n, y = q[2] / n, z = q[3] / n;
  Mat3 r;
  r << 1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y),
       2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x),
       2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y);
  return r;
}

Mat3 build_covariance(const Vec4& rotation, const Vec3& log_scale) {
  Mat3 r = quaternion_to_matrix(rotation);
  Vec3 s = log_scale.array().exp();
  Mat3 m = r * s.asDiagonal();
  Mat3 cov = m * m.transpose();
  // exact symmetry
  return 0.5 * (cov + cov.transpose());
}

double eval_gaussian_density(const Vec3& offset, const Mat3& cov3d) {
  Mat3 reg = cov3d + 1e-10 * Mat3::Identity();
  Eigen::LDLT<Mat3> ldlt(reg);
  if (ldlt.info() != Eigen::Success)
    throw std::runtime_error("singular covariance in density evaluation");
  double mahal = offset.dot(ldlt.solve(offset));
  return std::exp(-0.5 * mahal);
}

ActivatedGaussian activate(const RawGaussianParams& raw) {
  ActivatedGaussian a;
  a.mean = raw.mean;
  a.cov3d = build_covariance(raw.rotation, raw.log_scale);
  a.opacity = sigmoid(raw.opacity_logit);
  a.ref_opacity = sigmoid(raw.ref_opacity_logit);
  a.beta = sigmoid(raw.beta_logit);
  return a;
}

ActivatedGaussian activate(const GaussianCloud& cloud, size_t i) {
  ActivatedGaussian a;
  a.mean = cloud.means[i];
  a.cov3d = build_covariance(cloud.rotations[i], cloud.log_scales[i]);
  a.opacity = sigmoid(cloud.opacity_logits[i]);
  a.ref_opacity = sigmoid(cloud.ref_opacity_logits[i]);
  a.beta = sigmoid(cloud.beta_logits[i]);
  return a;
}

GaussianCloud init_from_points(const std::vector<Vec3>& points,
                               const std::vector<Vec3>& colors) {
  if (points.empty()) throw std::invalid_argument("init_from_points: empty point set");
  if (points.size() != colors.size())
    throw std::invalid_argument("init_from_points: point/color count mismatch");
  size_t n = points.size();
  GaussianCloud cloud;
  cloud.resize(n);
  cloud.sh_trans.setZero();
  cloud.sh_ref.setZero();

  const double dc_basis = 0.28209479177387814;
  const double init_logit = logit(0.1);

  for (size_t i = 0; i < n; ++i) {
    // mean distance to the 3 nearest neighbors (fewer if the cloud is tiny)
    std::vector<double> d2;
    d2.reserve(n - 1);
    for (size_t j = 0; j < n; ++j)
      if (j != i) d2.push_back((points[j] - points[i]).squaredNorm());
    double mean_dist = 1.0;
    if (!d2.empty()) {
      size_t k = std::min<size_t>(3, d2.size());
      std::partial_sort(d2.begin(), d2.begin() + k, d2.end());
      double s = 0;
      for (size_t j = 0; j < k; ++j) s += std::sqrt(d2[j]);
      mean_dist = std::max(s / k, 1e-7);
    }
    cloud.means[i] = points[i];
    cloud.log_scales[i] = Vec3::Constant(std::log(mean_dist));
    cloud.opacity_logits[i] = init_logit;
    cloud.ref_opacity_logits[i] = init_logit;
    cloud.beta_logits[i] = init_logit;
    for (int ch = 0; ch < 3; ++ch)
      cloud.sh_trans(i, ch) = (colors[i][ch] - 0.5) / dc_basis;
  }
  return cloud;
}

void build_covariance_backward(const Vec4& rotation, const Vec3& log_scale,
                               const Mat3& d_cov3d, Vec4& d_rotation, Vec3& d_log_scale) {
  double n = rotation.norm();
  if (n < 1e-300) throw std::invalid_argument("degenerate rotation: zero-norm quaternion");
  Vec4 qn = rotation / n;
  double w = qn[0], x = qn[1], y = qn[2], z = qn[3];
  Mat3 r = quaternion_to_matrix(rotation);
  Vec3 s = log_scale.array().exp();
  Mat3 m = r * s.asDiagonal();  // M, cov = M M^T

  // symmetrize upstream (cov is used symmetrically)
  Mat3 g = 0.5 * (d_cov3d + d_cov3d.transpose());
  Mat3 d_m = 2.0 * g * m;

  // d wrt log_scale: M = R diag(s), dM/ds_k = R e_k e_k^T; ds/dls = s
  for (int k = 0; k < 3; ++k)
    d_log_scale[k] += d_m.col(k).dot(r.col(k)) * s[k];

  // d wrt R
  Mat3 d_r = d_m * s.asDiagonal();

  // dR/d(normalized quaternion components)
  Mat3 dr_dw, dr_dx, dr_dy, dr_dz;
  dr_dw << 0, -2 * z, 2 * y,
           2 * z, 0, -2 * x,
           -2 * y, 2 * x, 0;
  dr_dx << 0, 2 * y, 2 * z,
           2 * y, -4 * x, -2 * w,
           2 * z, 2 * w, -4 * x;
  dr_dy << -4 * y, 2 * x, 2 * w,
           2 * x, 0, 2 * z,
           -2 * w, 2 * z, -4 * y;
  dr_dz << -4 * z, -2 * w, 2 * x,
           2 * w, -4 * z, 2 * y,
           2 * x, 2 * y, 0;
  Vec4 d_qn(d_r.cwiseProduct(dr_dw).sum(), d_r.cwiseProduct(dr_dx).sum(),
            d_r.cwiseProduct(dr_dy).sum(), d_r.cwiseProduct(dr_dz).sum());

  // through the normalization q_n = q / |q|
  d_rotation += (d_qn - qn * qn.dot(d_qn)) / n;
}

}  // namespace refsplat
