#include <opencv2/imgcodecs.hpp>
#include <opencv2/imgproc.hpp>
#include <stdexcept>

#include "refsplat/dataset.hpp"

namespace refsplat {

Image read_image(const std::filesystem::path& path) {
  cv::Mat bgr = cv::imread(path.string(), cv::IMREAD_COLOR);
  if (bgr.empty()) throw std::runtime_error("cannot read image: " + path.string());
  Image img(bgr.rows, bgr.cols, 3);
  for (int y = 0; y < bgr.rows; ++y) {
    const cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < bgr.cols; ++x) {
      img.at(y, x, 0) = row[x][2] / 255.0;
      img.at(y, x, 1) = row[x][1] / 255.0;
      img.at(y, x, 2) = row[x][0] / 255.0;
    }
  }
  return img;
}

void write_image(const Image& img, const std::filesystem::path& path) {
  if (img.channels() != 3 && img.channels() != 1)
    throw std::invalid_argument("write_image: expected 1 or 3 channels");
  cv::Mat bgr(img.height(), img.width(), CV_8UC3);
  for (int y = 0; y < img.height(); ++y) {
    cv::Vec3b* row = bgr.ptr<cv::Vec3b>(y);
    for (int x = 0; x < img.width(); ++x) {
      auto q = [&](int c) {
        double v = img.at(y, x, img.channels() == 1 ? 0 : c);
        v = v < 0 ? 0 : (v > 1 ? 1 : v);
        return static_cast<uint8_t>(std::lround(v * 255.0));
      };
      row[x] = cv::Vec3b(q(2), q(1), q(0));
    }
  }
  if (!cv::imwrite(path.string(), bgr))
    throw std::runtime_error("cannot write image: " + path.string());
}

Image resize_area(const Image& in, int out_width, int out_height) {
  if (in.width() == out_width && in.height() == out_height) return in;
  cv::Mat src(in.height(), in.width(), CV_64FC(in.channels()),
              const_cast<double*>(in.data()));
  cv::Mat dst;
  cv::resize(src, dst, cv::Size(out_width, out_height), 0, 0, cv::INTER_AREA);
  Image out(out_height, out_width, in.channels());
  std::memcpy(out.data(), dst.ptr<double>(), out.size() * sizeof(double));
  return out;
}

void preprocess(Dataset& ds, int target_width, int target_height) {
  for (size_t i = 0; i < ds.images.size(); ++i) {
    Camera& cam = ds.cameras[i];
    double sx = static_cast<double>(target_width) / cam.width;
    double sy = static_cast<double>(target_height) / cam.height;
    ds.images[i] = resize_area(ds.images[i], target_width, target_height);
    cam.fx *= sx;
    cam.fy *= sy;
    cam.cx *= sx;
    cam.cy *= sy;
    cam.width = target_width;
    cam.height = target_height;
    if (i < ds.masks.size() && !ds.masks[i].empty())
      ds.masks[i] = resize_area(ds.masks[i], target_width, target_height);
  }
}

}  // namespace refsplat
