#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "refsplat/losses.hpp"
#include "test_utils.hpp"

using namespace refsplat;

TEST_CASE("every parameter group matches finite differences, beta mode") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<std::string> bad = testutil::gradient_check_scene(
        1000 + seed, AccumulationMode::Beta, 8 + seed % 12, seed % 4,
        seed % 2 ? 100 : 5000);
    for (const std::string& f : bad) MESSAGE(f);
    CHECK(bad.empty());
  }
}

TEST_CASE("every parameter group matches finite differences, alpha mode") {
  for (uint64_t seed = 0; seed < 10; ++seed) {
    std::vector<std::string> bad = testutil::gradient_check_scene(
        2000 + seed, AccumulationMode::Alpha, 8 + seed % 12, seed % 4,
        seed % 2 ? 100 : 5000);
    for (const std::string& f : bad) MESSAGE(f);
    CHECK(bad.empty());
  }
}

TEST_CASE("gradients vanish when the render already matches the target") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 6;
  spec.width = spec.height = 16;
  spec.smooth = true;
  GaussianCloud cloud = testutil::random_cloud(77, spec);
  testutil::GradientHarness h;
  h.cam = testutil::test_camera(16, 16);
  h.opt = testutil::smooth_options();
  h.cfg.lambda_bi = 0;   // depth/reflection regularizers do not vanish at the
  h.cfg.lambda_ref = 0;  // photometric optimum, so isolate the data terms
  h.iter = 100000;       // init alignment off
  RenderOutputs o = render(cloud, h.cam, h.opt);
  h.gt = o.composed;
  ParamGradients g = h.grads(cloud);
  for (size_t i = 0; i < cloud.size(); ++i) {
    CHECK(g.means[i].cwiseAbs().maxCoeff() < 1e-10);
    CHECK(std::abs(g.opacity_logits[i]) < 1e-10);
    CHECK(g.sh_trans.row(i).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("screen-space gradients are reported for visible splats") {
  testutil::SceneSpec spec;
  spec.n_gaussians = 10;
  spec.width = spec.height = 24;
  spec.smooth = true;
  GaussianCloud cloud = testutil::random_cloud(55, spec);
  testutil::GradientHarness h = testutil::make_gradient_harness(55, AccumulationMode::Beta);
  RenderOptions ro = h.opt;
  ro.keep_records = true;
  RenderOutputs o = render(cloud, h.cam, ro);
  LossGradients lg;
  overall_loss_backward(h.gt, o, h.cfg, 0, lg);
  BackwardOutputs b = render_backward(cloud, *o.records, lg.d_composed, lg.d_transmitted,
                                      lg.d_reflection_map, lg.d_depth);
  REQUIRE(b.screen_grads.size() == cloud.size());
  int nonzero = 0;
  for (const Vec2& sg : b.screen_grads)
    if (sg.norm() > 0) ++nonzero;
  CHECK(nonzero > 0);
}
