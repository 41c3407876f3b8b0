#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "refsplat/camera.hpp"
#include "refsplat/gaussians.hpp"
#include "refsplat/image.hpp"
#include "refsplat/rasterizer.hpp"

namespace refsplat {

constexpr double kPsnrCap = 100.0;  // reported for identical images

struct MetricsReport {
  std::string scene;
  std::string config_hash;
  std::vector<std::string> view_names;
  std::vector<double> view_psnr;
  std::vector<double> view_ssim;
  double mean_psnr = 0;
  double mean_ssim = 0;
  double fps = 0;

  void finalize();  // recomputes the means from the rows
};

// 10*log10(1/MSE), capped at 100 dB for identical images. Inputs in [0,1].
double psnr(const Image& a, const Image& b);

double ssim_metric(const Image& a, const Image& b);

// Wall-clock forward-render throughput after warmup.
double measure_fps(const GaussianCloud& cloud, const std::vector<Camera>& cameras,
                   int warmup, int reps, const RenderOptions& options = {});

// Writes composed/transmitted/reflected/reflection_map/depth PNGs for one view.
void export_decomposition(const GaussianCloud& cloud, const Camera& cam,
                          const std::filesystem::path& out_dir,
                          const RenderOptions& options = {},
                          const std::string& prefix = "");

inline const std::vector<double> kDefaultRelitCoefficients = {0.8, 0.9, 1.0, 1.1, 1.2};

std::vector<Image> export_relit_sequence(const GaussianCloud& cloud, const Camera& cam,
                                         const std::vector<double>& coefficients,
                                         const std::filesystem::path& out_dir,
                                         const RenderOptions& options = {});

// Tab-separated table plus a JSON twin next to it.
void write_report(const MetricsReport& report, const std::filesystem::path& path);

}  // namespace refsplat
