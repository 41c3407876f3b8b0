#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "refsplat/camera.hpp"
#include "refsplat/gaussians.hpp"
#include "refsplat/image.hpp"

namespace refsplat {

struct Dataset {
  std::vector<Camera> cameras;
  std::vector<Image> images;       // H x W x 3 in [0,1]
  std::vector<uint8_t> is_test;    // empty until split
  std::vector<Vec3> sparse_points;
  std::vector<Vec3> sparse_colors;
  std::vector<Image> masks;  // synthetic ground-truth reflection masks (may be empty)

  std::vector<size_t> train_indices() const;
  std::vector<size_t> test_indices() const;
};

// SfM model directory (text cameras.txt/images.txt/points3D.txt or the
// binary .bin variants) plus an images/ folder.
Dataset load_colmap(const std::filesystem::path& dir);

// Area-averaged resampling (box filter); exact for integer reductions.
Image resize_area(const Image& in, int out_width, int out_height);

// Resamples every image (and rescales intrinsics) to the target size.
void preprocess(Dataset& ds, int target_width = 1296, int target_height = 864);

// Shuffles by seed, tags every 8th image as test; warns (all-train) under 8 images.
void split_train_test(Dataset& ds, uint64_t seed);

// Extended 3D-GS PLY interchange with the reflected-branch attributes.
void export_ply(const GaussianCloud& cloud, const std::filesystem::path& path);
GaussianCloud import_ply(const std::filesystem::path& path);

struct SyntheticSceneSpec {
  Vec2 mirror_center = Vec2(0.35, 0.0);   // on the wall plane z = 0
  Vec2 mirror_half_extent = Vec2(0.55, 0.45);
  uint64_t wall_seed = 1;
  uint64_t object_seed = 2;
  int n_views = 24;
  int width = 128, height = 128;
  double reflection_strength = 0.5;
  int n_points = 400;
  double camera_distance = 4.0;
  double camera_spread = 0.6;
  double object_plane_z = 6.0;  // virtual reflected content: plane behind the cameras
};

// Analytic mirror-on-a-wall scene: images = diffuse + mask * strength * mirrored
// view, with exact per-view masks and a sparse init point cloud.
Dataset generate_synthetic_mirror_scene(const SyntheticSceneSpec& spec);

// Ground-truth mirror-free render of one view (strength = 0), for tests.
Image synthetic_diffuse_view(const SyntheticSceneSpec& spec, const Camera& cam);

// Projected image-space polygon area fraction of the mirror rectangle.
double synthetic_mirror_coverage(const SyntheticSceneSpec& spec, const Camera& cam);

// Image file IO (8-bit PNG/JPEG via OpenCV).
Image read_image(const std::filesystem::path& path);
void write_image(const Image& img, const std::filesystem::path& path);

// Writes the synthetic dataset to disk as an SfM text model + images + masks,
// loadable again through load_colmap.
void write_synthetic_dataset(const Dataset& ds, const std::filesystem::path& dir);

}  // namespace refsplat
