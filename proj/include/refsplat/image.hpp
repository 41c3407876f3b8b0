#pragma once

#include <cassert>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace refsplat {

// Dense row-major float image, C channels interleaved. Values are doubles
// so the renderer/loss stack and the finite-difference harness agree.
class Image {
 public:
  Image() = default;
  Image(int height, int width, int channels, double fill = 0.0)
      : height_(height), width_(width), channels_(channels),
        data_(static_cast<size_t>(height) * width * channels, fill) {}

  int height() const { return height_; }
  int width() const { return width_; }
  int channels() const { return channels_; }
  size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  double& at(int y, int x, int c = 0) {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }
  double at(int y, int x, int c = 0) const {
    return data_[(static_cast<size_t>(y) * width_ + x) * channels_ + c];
  }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }

  bool same_shape(const Image& o) const {
    return height_ == o.height_ && width_ == o.width_ && channels_ == o.channels_;
  }

  static void check_same_shape(const Image& a, const Image& b) {
    if (!a.same_shape(b)) throw std::invalid_argument("image shape mismatch");
  }

 private:
  int height_ = 0, width_ = 0, channels_ = 0;
  std::vector<double> data_;
};

inline Image clamp01(const Image& in) {
  Image out = in;
  for (size_t i = 0; i < out.size(); ++i) {
    double v = out.data()[i];
    out.data()[i] = v < 0.0 ? 0.0 : (v > 1.0 ? 1.0 : v);
  }
  return out;
}

}  // namespace refsplat
