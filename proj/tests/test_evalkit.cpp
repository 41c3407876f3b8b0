#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "refsplat/dataset.hpp"
#include "refsplat/evalkit.hpp"
#include "test_utils.hpp"

using namespace refsplat;
using testutil::rel_close;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("refsplat_eval_" + tag);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

Image noise_image(int h, int w, uint64_t seed, double lo = 0.0, double hi = 1.0) {
  Image img(h, w, 3);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> uni(lo, hi);
  for (size_t i = 0; i < img.size(); ++i) img.data()[i] = uni(rng);
  return img;
}

}  // namespace

TEST_CASE("psnr matches the closed form and caps at identity") {
  Image a(8, 8, 3, 0.25);
  Image b(8, 8, 3, 0.35);  // mse = 0.01 everywhere
  CHECK(rel_close(psnr(a, b), 20.0, 1e-12));
  CHECK(psnr(a, b) == psnr(b, a));
  CHECK(psnr(a, a) == kPsnrCap);
  Image c = noise_image(8, 8, 3);
  CHECK(psnr(a, c) == psnr(c, a));
  CHECK_THROWS_AS(psnr(a, Image(4, 4, 3)), std::invalid_argument);
}

TEST_CASE("ssim metric is symmetric, one at identity, and below one otherwise") {
  Image a = noise_image(24, 24, 11);
  Image b = noise_image(24, 24, 12);
  CHECK(rel_close(ssim_metric(a, b), ssim_metric(b, a), 1e-12));
  CHECK(ssim_metric(a, a) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(ssim_metric(a, b) < 1.0);
  CHECK(ssim_metric(a, b) > -1.0);
}

TEST_CASE("report means are the plain averages of the rows") {
  MetricsReport r;
  r.scene = "s";
  r.view_names = {"a", "b", "c"};
  r.view_psnr = {30.0, 34.0, 38.0};
  r.view_ssim = {0.9, 0.8, 0.7};
  r.finalize();
  CHECK(rel_close(r.mean_psnr, 34.0, 1e-12));
  CHECK(rel_close(r.mean_ssim, 0.8, 1e-12));
}

TEST_CASE("write_report emits the TSV and its JSON twin") {
  MetricsReport r;
  r.scene = "toy";
  r.config_hash = "deadbeefdeadbeef";
  r.view_names = {"v0", "v1"};
  r.view_psnr = {31.5, 29.5};
  r.view_ssim = {0.91, 0.89};
  r.fps = 12.5;
  r.finalize();
  fs::path d = temp_dir("report");
  write_report(r, d / "metrics.tsv");
  REQUIRE(fs::exists(d / "metrics.tsv"));
  REQUIRE(fs::exists(d / "metrics.json"));
  std::ifstream f(d / "metrics.tsv");
  std::string tsv((std::istreambuf_iterator<char>(f)), {});
  CHECK(tsv.find("v0\t") != std::string::npos);
  CHECK(tsv.find("mean") != std::string::npos);
  std::ifstream jf(d / "metrics.json");
  std::string js((std::istreambuf_iterator<char>(jf)), {});
  CHECK(js.find("\"fps\"") != std::string::npos);
  CHECK(js.find("deadbeefdeadbeef") != std::string::npos);
}

TEST_CASE("decomposition export writes the five layers") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 12;
  GaussianCloud cloud = testutil::random_cloud(5, spec);
  Camera cam = testutil::test_camera(spec.width, spec.height);
  fs::path d = temp_dir("decomp");
  export_decomposition(cloud, cam, d, {}, "v3_");
  std::vector<std::string> names = {"composed", "transmitted", "reflected",
                                    "reflection_map", "depth"};
  int count = 0;
  for (const auto& e : fs::directory_iterator(d)) ++count;
  CHECK(count == 5);
  for (const std::string& n : names) CHECK(fs::exists(d / ("v3_" + n + ".png")));
  // files decode back to the view size
  Image back = read_image(d / "v3_composed.png");
  CHECK(back.width() == spec.width);
  CHECK(back.height() == spec.height);
}

TEST_CASE("relit sequence writes one frame per coefficient") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 10;
  GaussianCloud cloud = testutil::random_cloud(6, spec);
  Camera cam = testutil::test_camera(spec.width, spec.height);
  fs::path d = temp_dir("relit");
  std::vector<double> coeffs = {0.5, 1.0, 1.5};
  std::vector<Image> frames = export_relit_sequence(cloud, cam, coeffs, d);
  REQUIRE(frames.size() == 3);
  int count = 0;
  for (const auto& e : fs::directory_iterator(d)) ++count;
  CHECK(count == 3);
  // the unit coefficient reproduces the plain render
  RenderOutputs out = render(cloud, cam, {});
  CHECK(testutil::max_abs_diff(frames[1], clamp01(out.composed)) == 0.0);
  // frames differ across coefficients wherever the reflection contributes
  CHECK(testutil::max_abs_diff(frames[0], frames[2]) > 0.0);
}

TEST_CASE("fps measurement is positive and scales with work") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 30;
  GaussianCloud cloud = testutil::random_cloud(7, spec);
  std::vector<Camera> cams = {testutil::test_camera(spec.width, spec.height)};
  double fps = measure_fps(cloud, cams, 1, 2);
  CHECK(fps > 0.0);
}

TEST_CASE("metrics are stable under re-evaluation") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 15;
  GaussianCloud cloud = testutil::random_cloud(8, spec);
  Camera cam = testutil::test_camera(spec.width, spec.height);
  Image gt = noise_image(spec.height, spec.width, 9);
  Image r1 = clamp01(render(cloud, cam, {}).composed);
  Image r2 = clamp01(render(cloud, cam, {}).composed);
  CHECK(testutil::max_abs_diff(r1, r2) == 0.0);
  CHECK(psnr(gt, r1) == psnr(gt, r2));
  CHECK(ssim_metric(gt, r1) == ssim_metric(gt, r2));
}
