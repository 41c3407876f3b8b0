#pragma once

#include <Eigen/Dense>

#include "refsplat/camera.hpp"
#include "refsplat/gaussians.hpp"

namespace refsplat {

// Real SH basis values (16 entries, degrees 0..3) at a unit direction.
void sh_basis(const Vec3& dir, int degree, double* out16);

// View-dependent color: basis · coeffs + 0.5, clamped below at 0 per channel.
// `coeffs` is a 48-vector in coeff-major layout (see GaussianCloud).
Vec3 eval_sh(const double* coeffs, const Vec3& view_dir, int degree);

// Backward of eval_sh; d_color must already be zeroed on clamped channels by
// the caller passing `clamped`. Accumulates into d_coeffs (48) and d_dir.
void eval_sh_backward(const double* coeffs, const Vec3& view_dir, int degree,
                      const Vec3& d_color, const bool* clamped,
                      double* d_coeffs, Vec3& d_dir);

// Forward that also reports which channels were clamped (pre-clamp value < 0).
Vec3 eval_sh_with_clamp(const double* coeffs, const Vec3& view_dir, int degree,
                        bool* clamped);

}  // namespace refsplat
