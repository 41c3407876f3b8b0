#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "test_utils.hpp"

using namespace refsplat;
using testutil::max_abs_diff;
using testutil::rel_close;

namespace {

PixelContribution contrib(double alpha, double beta, Vec3 ct = Vec3(1, 1, 1),
                          Vec3 cr = Vec3(1, 1, 1), double alpha_ref = -1, double depth = 1) {
  PixelContribution c;
  c.alpha = alpha;
  c.alpha_ref = alpha_ref < 0 ? alpha : alpha_ref;
  c.beta = beta;
  c.color_trans = ct;
  c.color_ref = cr;
  c.depth = depth;
  return c;
}

void check_invariants(const RenderOutputs& o) {
  for (int y = 0; y < o.reflection_map.height(); ++y)
    for (int x = 0; x < o.reflection_map.width(); ++x) {
      double w = o.reflection_map.at(y, x);
      CHECK(w >= 0.0);
      CHECK(w <= 1.0 + 1e-12);
      CHECK(o.alpha_accum.at(y, x) <= 1.0 + 1e-12);
      // composition identity per channel
      for (int c = 0; c < 3; ++c)
        CHECK(std::abs(o.composed.at(y, x, c) -
                       (o.transmitted.at(y, x, c) + w * o.reflected.at(y, x, c))) < 1e-6);
    }
}

}  // namespace

TEST_CASE("two equal splats compose to the hand value") {
  // alpha 0.5, color 1: C = 0.5 + 0.5*0.5 = 0.75; W_beta = 0.25 + 0.25*0.5 = 0.375
  std::vector<PixelContribution> cs = {contrib(0.5, 0.5), contrib(0.5, 0.5)};
  PixelComposite p = composite_pixel(cs, AccumulationMode::Beta, 0);
  CHECK(rel_close(p.trans[0], 0.75, 1e-15));
  CHECK(rel_close(p.reflection_map, 0.375, 1e-15));
  CHECK(rel_close(p.alpha, 0.75, 1e-15));
}

TEST_CASE("accumulation modes diverge on low-beta opaque splats") {
  // alpha 0.9, beta 0.1 twice:
  //   beta:  0.09 + 0.09*0.9         = 0.171
  //   alpha: 0.09 + 0.09*(1-0.9)     = 0.099
  std::vector<PixelContribution> cs = {contrib(0.9, 0.1), contrib(0.9, 0.1)};
  CHECK(rel_close(composite_pixel(cs, AccumulationMode::Beta, 0).reflection_map, 0.171,
                  1e-15));
  CHECK(rel_close(composite_pixel(cs, AccumulationMode::Alpha, 0).reflection_map, 0.099,
                  1e-15));
}

TEST_CASE("modes agree when every beta is zero or there is one splat") {
  std::vector<PixelContribution> one = {contrib(0.7, 0.4)};
  CHECK(composite_pixel(one, AccumulationMode::Beta, 0).reflection_map ==
        composite_pixel(one, AccumulationMode::Alpha, 0).reflection_map);
  std::vector<PixelContribution> nz = {contrib(0.5, 0.0), contrib(0.8, 0.0)};
  CHECK(composite_pixel(nz, AccumulationMode::Beta, 0).reflection_map == 0.0);
  CHECK(composite_pixel(nz, AccumulationMode::Alpha, 0).reflection_map == 0.0);
}

TEST_CASE("reflected branch composes against its own transmittance") {
  // alpha_ref 0.6 then 0.5, colors 1 and 0.5: 0.6 + 0.5*0.4*0.5 = 0.7
  std::vector<PixelContribution> cs = {contrib(0.2, 0.3, Vec3(1, 1, 1), Vec3(1, 1, 1), 0.6),
                                       contrib(0.2, 0.3, Vec3(1, 1, 1), Vec3(0.5, 0.5, 0.5),
                                               0.5)};
  PixelComposite p = composite_pixel(cs, AccumulationMode::Beta, 0);
  CHECK(rel_close(p.ref[0], 0.7, 1e-15));
}

TEST_CASE("early stop halts accumulation once T drops below the threshold") {
  std::vector<PixelContribution> cs(20, contrib(0.5, 0.2, Vec3(0.1, 0.1, 0.1)));
  PixelComposite full = composite_pixel(cs, AccumulationMode::Beta, 0);
  PixelComposite stopped = composite_pixel(cs, AccumulationMode::Beta, 1e-1);
  CHECK(stopped.trans[0] < full.trans[0]);
  // T after k splats is 0.5^k; threshold 0.1 stops after the 4th
  double expect = 0;
  double T = 1;
  for (int k = 0; k < 4; ++k) {
    expect += 0.1 * 0.5 * T;
    T *= 0.5;
  }
  CHECK(rel_close(stopped.trans[0], expect, 1e-12));
}

TEST_CASE("reflection map is bounded by one for any contribution list") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> uni(0, 1);
  for (int t = 0; t < 200; ++t) {
    std::vector<PixelContribution> cs;
    int n = 1 + static_cast<int>(uni(rng) * 30);
    for (int i = 0; i < n; ++i)
      cs.push_back(contrib(0.99 * uni(rng), uni(rng), Vec3(uni(rng), uni(rng), uni(rng))));
    for (AccumulationMode m : {AccumulationMode::Beta, AccumulationMode::Alpha}) {
      PixelComposite p = composite_pixel(cs, m, 0);
      CHECK(p.reflection_map >= 0.0);
      CHECK(p.reflection_map <= 1.0 + 1e-12);
      CHECK(p.alpha <= 1.0 + 1e-12);
    }
  }
}

TEST_CASE("bin_and_sort orders by depth then index") {
  std::vector<Splat2D> splats(3);
  for (int i = 0; i < 3; ++i) {
    splats[i].mean2d = Vec2(8, 8);
    splats[i].cov2d = Mat2::Identity();
    splats[i].gaussian_index = i;
  }
  splats[0].depth = 2.0;
  splats[1].depth = 1.0;
  splats[2].depth = 1.0;
  auto tiles = bin_and_sort(splats, 16, 16, 3.0);
  REQUIRE(tiles.size() == 1);
  REQUIRE(tiles[0].size() == 3);
  CHECK(tiles[0][0] == 1);
  CHECK(tiles[0][1] == 2);  // depth tie broken by gaussian index
  CHECK(tiles[0][2] == 0);
}

TEST_CASE("bin_and_sort only covers tiles within the footprint") {
  std::vector<Splat2D> splats(1);
  splats[0].mean2d = Vec2(8, 8);
  splats[0].cov2d = Mat2::Identity();  // radius 3 -> only the first tile
  splats[0].depth = 1.0;
  auto tiles = bin_and_sort(splats, 64, 64, 3.0);
  REQUIRE(tiles.size() == 16);
  CHECK(tiles[0].size() == 1);
  for (size_t i = 1; i < tiles.size(); ++i) CHECK(tiles[i].empty());
  // <= 0 bins everywhere
  auto all = bin_and_sort(splats, 64, 64, 0.0);
  for (const auto& t : all) CHECK(t.size() == 1);
}

TEST_CASE("tiled renderer matches the brute-force oracle") {
  std::mt19937_64 seeds(101);
  for (int t = 0; t < 12; ++t) {
    testutil::SceneSpec spec;
    spec.n_gaussians = 40;
    spec.width = 64;
    spec.height = 48;
    spec.sh_degree = t % 4;
    GaussianCloud cloud = testutil::random_cloud(seeds(), spec);
    Camera cam = testutil::test_camera(spec.width, spec.height);
    for (AccumulationMode m : {AccumulationMode::Beta, AccumulationMode::Alpha}) {
      RenderOptions opt;
      opt.mode = m;
      RenderOutputs got = render(cloud, cam, opt);
      testutil::OracleOutputs want = testutil::oracle_render(cloud, cam, opt);
      CHECK(max_abs_diff(got.composed, want.composed) < 1e-5);
      CHECK(max_abs_diff(got.transmitted, want.transmitted) < 1e-5);
      CHECK(max_abs_diff(got.reflected, want.reflected) < 1e-5);
      CHECK(max_abs_diff(got.reflection_map, want.reflection_map) < 1e-5);
      CHECK(max_abs_diff(got.depth, want.depth) < 1e-5);
      check_invariants(got);
    }
  }
}

TEST_CASE("non-dual render leaves the reflected branch empty") {
  GaussianCloud cloud = testutil::random_cloud(5, {});
  Camera cam = testutil::test_camera(64, 64);
  RenderOptions opt;
  opt.dual = false;
  RenderOutputs o = render(cloud, cam, opt);
  CHECK(max_abs_diff(o.reflected, Image(64, 64, 3)) == 0.0);
  CHECK(max_abs_diff(o.composed, o.transmitted) == 0.0);
}

TEST_CASE("render_relit(1) bit-equals the clamped composed image") {
  GaussianCloud cloud = testutil::random_cloud(9, {});
  Camera cam = testutil::test_camera(48, 48);
  RenderOutputs o = render(cloud, cam);
  Image relit = render_relit(cloud, cam, 1.0);
  Image expect = clamp01(o.composed);
  CHECK(max_abs_diff(relit, expect) == 0.0);
}

TEST_CASE("render_relit scales only the reflected term") {
  GaussianCloud cloud = testutil::random_cloud(13, {});
  Camera cam = testutil::test_camera(48, 48);
  RenderOutputs o = render(cloud, cam);
  for (double kappa : {0.0, 0.5, 1.7}) {
    Image relit = render_relit(cloud, cam, kappa);
    for (int y = 0; y < 48; ++y)
      for (int x = 0; x < 48; ++x)
        for (int c = 0; c < 3; ++c) {
          double expect = o.transmitted.at(y, x, c) +
                          kappa * o.reflection_map.at(y, x) * o.reflected.at(y, x, c);
          expect = std::clamp(expect, 0.0, 1.0);
          CHECK(std::abs(relit.at(y, x, c) - expect) < 1e-12);
        }
  }
  CHECK_THROWS_AS(render_relit(cloud, cam, std::nan("")), std::invalid_argument);
}

TEST_CASE("records replay the forward pass") {
  GaussianCloud cloud = testutil::random_cloud(17, {});
  Camera cam = testutil::test_camera(32, 32);
  RenderOptions opt;
  opt.keep_records = true;
  RenderOutputs o = render(cloud, cam, opt);
  REQUIRE(o.records != nullptr);
  const RenderRecords& r = *o.records;
  CHECK(r.pixel_offsets.size() == 32 * 32 + 1);
  CHECK(r.pixel_offsets.back() == r.pixel_splats.size());
  // per-pixel lists are front-to-back
  for (size_t p = 0; p < 32 * 32; ++p) {
    double prev = -1e300;
    for (uint32_t k = r.pixel_offsets[p]; k < r.pixel_offsets[p + 1]; ++k) {
      double d = r.splats[r.pixel_splats[k]].depth;
      CHECK(d >= prev);
      prev = d;
    }
  }
}

TEST_CASE("empty cloud renders black") {
  GaussianCloud cloud;
  cloud.resize(0);
  Camera cam = testutil::test_camera(16, 16);
  RenderOutputs o = render(cloud, cam);
  CHECK(max_abs_diff(o.composed, Image(16, 16, 3)) == 0.0);
  CHECK(max_abs_diff(o.alpha_accum, Image(16, 16, 1)) == 0.0);
}
