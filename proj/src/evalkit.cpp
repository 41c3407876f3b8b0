#include "refsplat/evalkit.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <nlohmann/json.hpp>

#include "refsplat/dataset.hpp"
#include "refsplat/losses.hpp"

namespace refsplat {

void MetricsReport::finalize() {
  mean_psnr = 0;
  mean_ssim = 0;
  if (view_psnr.empty()) return;
  for (double v : view_psnr) mean_psnr += v;
  for (double v : view_ssim) mean_ssim += v;
  mean_psnr /= static_cast<double>(view_psnr.size());
  mean_ssim /= static_cast<double>(view_ssim.size());
}

double psnr(const Image& a, const Image& b) {
  Image::check_same_shape(a, b);
  double mse = 0;
  for (size_t i = 0; i < a.size(); ++i) {
    double d = a.data()[i] - b.data()[i];
    mse += d * d;
  }
  mse /= static_cast<double>(a.size());
  if (mse <= 0) return kPsnrCap;
  return std::min(kPsnrCap, 10.0 * std::log10(1.0 / mse));
}

double ssim_metric(const Image& a, const Image& b) { return ssim(a, b); }

double measure_fps(const GaussianCloud& cloud, const std::vector<Camera>& cameras,
                   int warmup, int reps, const RenderOptions& options) {
  if (reps < 1) throw std::invalid_argument("measure_fps: reps must be >= 1");
  auto one_pass = [&] {
    for (const Camera& cam : cameras) (void)render(cloud, cam, options);
  };
  for (int i = 0; i < warmup; ++i) one_pass();
  auto t0 = std::chrono::steady_clock::now();
  for (int i = 0; i < reps; ++i) one_pass();
  auto t1 = std::chrono::steady_clock::now();
  double seconds = std::chrono::duration<double>(t1 - t0).count();
  double frames = static_cast<double>(reps) * cameras.size();
  return frames / std::max(seconds, 1e-12);
}

namespace {
Image to_grayscale_rgb(const Image& mono) {
  Image out(mono.height(), mono.width(), 3);
  for (int y = 0; y < mono.height(); ++y)
    for (int x = 0; x < mono.width(); ++x)
      for (int c = 0; c < 3; ++c) out.at(y, x, c) = mono.at(y, x);
  return out;
}
}  // namespace

void export_decomposition(const GaussianCloud& cloud, const Camera& cam,
                          const std::filesystem::path& out_dir, const RenderOptions& options,
                          const std::string& prefix) {
  std::filesystem::create_directories(out_dir);
  RenderOutputs out = render(cloud, cam, options);
  write_image(clamp01(out.composed), out_dir / (prefix + "composed.png"));
  write_image(clamp01(out.transmitted), out_dir / (prefix + "transmitted.png"));
  write_image(clamp01(out.reflected), out_dir / (prefix + "reflected.png"));
  write_image(to_grayscale_rgb(clamp01(out.reflection_map)),
              out_dir / (prefix + "reflection_map.png"));

  // min/max normalized depth
  double dmin = 1e300, dmax = -1e300;
  for (size_t i = 0; i < out.depth.size(); ++i) {
    dmin = std::min(dmin, out.depth.data()[i]);
    dmax = std::max(dmax, out.depth.data()[i]);
  }
  Image depth_vis = out.depth;
  double range = dmax - dmin;
  for (size_t i = 0; i < depth_vis.size(); ++i)
    depth_vis.data()[i] = range > 0 ? (depth_vis.data()[i] - dmin) / range : 0.0;
  write_image(to_grayscale_rgb(depth_vis), out_dir / (prefix + "depth.png"));
}

std::vector<Image> export_relit_sequence(const GaussianCloud& cloud, const Camera& cam,
                                         const std::vector<double>& coefficients,
                                         const std::filesystem::path& out_dir,
                                         const RenderOptions& options) {
  std::filesystem::create_directories(out_dir);
  std::vector<Image> frames;
  for (size_t i = 0; i < coefficients.size(); ++i) {
    Image frame = render_relit(cloud, cam, coefficients[i], options);
    char name[64];
    std::snprintf(name, sizeof(name), "relit_%.3f.png", coefficients[i]);
    write_image(frame, out_dir / name);
    frames.push_back(std::move(frame));
  }
  return frames;
}

void write_report(const MetricsReport& report, const std::filesystem::path& path) {
  std::ofstream tsv(path);
  if (!tsv) throw std::runtime_error("cannot write report: " + path.string());
  tsv << "view\tpsnr\tssim\n";
  for (size_t i = 0; i < report.view_psnr.size(); ++i)
    tsv << (i < report.view_names.size() ? report.view_names[i] : std::to_string(i)) << "\t"
        << report.view_psnr[i] << "\t" << report.view_ssim[i] << "\n";
  tsv << "mean\t" << report.mean_psnr << "\t" << report.mean_ssim << "\n";

  nlohmann::json j;
  j["scene"] = report.scene;
  j["config_hash"] = report.config_hash;
  j["views"] = nlohmann::json::array();
  for (size_t i = 0; i < report.view_psnr.size(); ++i)
    j["views"].push_back({{"name", i < report.view_names.size() ? report.view_names[i]
                                                                : std::to_string(i)},
                          {"psnr", report.view_psnr[i]},
                          {"ssim", report.view_ssim[i]}});
  j["mean_psnr"] = report.mean_psnr;
  j["mean_ssim"] = report.mean_ssim;
  j["fps"] = report.fps;
  std::filesystem::path jpath = path;
  jpath.replace_extension(".json");
  std::ofstream js(jpath);
  js << j.dump(2) << "\n";
}

}  // namespace refsplat
