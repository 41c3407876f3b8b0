#include <algorithm>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>

#include "refsplat/dataset.hpp"

namespace refsplat {

namespace fs = std::filesystem;

std::vector<size_t> Dataset::train_indices() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < images.size(); ++i)
    if (is_test.empty() || !is_test[i]) out.push_back(i);
  return out;
}

std::vector<size_t> Dataset::test_indices() const {
  std::vector<size_t> out;
  for (size_t i = 0; i < images.size(); ++i)
    if (!is_test.empty() && is_test[i]) out.push_back(i);
  return out;
}

void split_train_test(Dataset& ds, uint64_t seed) {
  size_t n = ds.images.size();
  ds.is_test.assign(n, 0);
  if (n < 8) {
    std::cerr << "warning: fewer than 8 images; keeping everything in the train set\n";
    return;
  }
  std::vector<size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  for (size_t i = 0; i < n; i += 8) ds.is_test[order[i]] = 1;
}

namespace {

struct ColmapCamera {
  std::string model;
  int width = 0, height = 0;
  std::vector<double> params;
};

Camera convert_intrinsics(const ColmapCamera& cc) {
  Camera cam;
  cam.width = cc.width;
  cam.height = cc.height;
  if (cc.model == "SIMPLE_PINHOLE") {
    cam.fx = cam.fy = cc.params.at(0);
    cam.cx = cc.params.at(1);
    cam.cy = cc.params.at(2);
  } else if (cc.model == "PINHOLE") {
    cam.fx = cc.params.at(0);
    cam.fy = cc.params.at(1);
    cam.cx = cc.params.at(2);
    cam.cy = cc.params.at(3);
  } else if (cc.model == "SIMPLE_RADIAL") {
    std::cerr << "warning: SIMPLE_RADIAL camera; ignoring distortion k=" << cc.params.at(3)
              << "\n";
    cam.fx = cam.fy = cc.params.at(0);
    cam.cx = cc.params.at(1);
    cam.cy = cc.params.at(2);
  } else {
    throw std::runtime_error("unsupported camera model: " + cc.model);
  }
  return cam;
}

struct ImagePose {
  Vec4 quat;  // w,x,y,z, world->camera
  Vec3 trans;
  int camera_id = 0;
  std::string name;
};

std::map<int, ColmapCamera> read_cameras_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  std::map<int, ColmapCamera> cams;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    int id;
    ColmapCamera cc;
    ss >> id >> cc.model >> cc.width >> cc.height;
    double v;
    while (ss >> v) cc.params.push_back(v);
    cams[id] = cc;
  }
  return cams;
}

std::vector<ImagePose> read_images_text(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  std::vector<ImagePose> images;
  std::string line;
  bool expect_points = false;
  while (std::getline(in, line)) {
    if (!expect_points && (line.empty() || line[0] == '#')) continue;
    if (expect_points) {  // 2D feature line (may be empty), ignored
      expect_points = false;
      continue;
    }
    std::istringstream ss(line);
    int id;
    ImagePose ip;
    ss >> id >> ip.quat[0] >> ip.quat[1] >> ip.quat[2] >> ip.quat[3] >> ip.trans[0] >>
        ip.trans[1] >> ip.trans[2] >> ip.camera_id >> ip.name;
    images.push_back(ip);
    expect_points = true;
  }
  return images;
}

void read_points_text(const fs::path& path, std::vector<Vec3>& pts, std::vector<Vec3>& cols) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ss(line);
    long long id;
    Vec3 p;
    int r, g, b;
    ss >> id >> p[0] >> p[1] >> p[2] >> r >> g >> b;
    pts.push_back(p);
    cols.push_back(Vec3(r / 255.0, g / 255.0, b / 255.0));
  }
}

template <typename T>
T read_bin(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  return v;
}

std::map<int, ColmapCamera> read_cameras_bin(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  static const std::map<int, std::pair<std::string, int>> kModels = {
      {0, {"SIMPLE_PINHOLE", 3}}, {1, {"PINHOLE", 4}}, {2, {"SIMPLE_RADIAL", 4}},
      {3, {"RADIAL", 5}},         {4, {"OPENCV", 8}},  {5, {"OPENCV_FISHEYE", 8}}};
  uint64_t n = read_bin<uint64_t>(in);
  std::map<int, ColmapCamera> cams;
  for (uint64_t i = 0; i < n; ++i) {
    int id = static_cast<int>(read_bin<uint32_t>(in));
    int model_id = read_bin<int32_t>(in);
    ColmapCamera cc;
    cc.width = static_cast<int>(read_bin<uint64_t>(in));
    cc.height = static_cast<int>(read_bin<uint64_t>(in));
    auto it = kModels.find(model_id);
    if (it == kModels.end())
      throw std::runtime_error("unsupported camera model id: " + std::to_string(model_id));
    cc.model = it->second.first;
    for (int p = 0; p < it->second.second; ++p) cc.params.push_back(read_bin<double>(in));
    cams[id] = cc;
  }
  return cams;
}

std::vector<ImagePose> read_images_bin(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  uint64_t n = read_bin<uint64_t>(in);
  std::vector<ImagePose> images;
  for (uint64_t i = 0; i < n; ++i) {
    (void)read_bin<uint32_t>(in);  // image id
    ImagePose ip;
    for (int k = 0; k < 4; ++k) ip.quat[k] = read_bin<double>(in);
    for (int k = 0; k < 3; ++k) ip.trans[k] = read_bin<double>(in);
    ip.camera_id = static_cast<int>(read_bin<uint32_t>(in));
    char c;
    while (in.get(c) && c != '\0') ip.name.push_back(c);
    uint64_t npts = read_bin<uint64_t>(in);
    in.seekg(static_cast<std::streamoff>(npts) * 24, std::ios::cur);  // x,y,point3D_id
    images.push_back(ip);
  }
  return images;
}

void read_points_bin(const fs::path& path, std::vector<Vec3>& pts, std::vector<Vec3>& cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("missing file: " + path.string());
  uint64_t n = read_bin<uint64_t>(in);
  for (uint64_t i = 0; i < n; ++i) {
    (void)read_bin<uint64_t>(in);  // point id
    Vec3 p;
    for (int k = 0; k < 3; ++k) p[k] = read_bin<double>(in);
    uint8_t r = read_bin<uint8_t>(in), g = read_bin<uint8_t>(in), b = read_bin<uint8_t>(in);
    (void)read_bin<double>(in);  // reprojection error
    uint64_t track = read_bin<uint64_t>(in);
    in.seekg(static_cast<std::streamoff>(track) * 8, std::ios::cur);
    pts.push_back(p);
    cols.push_back(Vec3(r / 255.0, g / 255.0, b / 255.0));
  }
}

fs::path find_model_dir(const fs::path& dir) {
  for (const fs::path& cand : {dir / "sparse" / "0", dir / "sparse", dir}) {
    if (fs::exists(cand / "cameras.txt") || fs::exists(cand / "cameras.bin")) return cand;
  }
  throw std::runtime_error("no SfM model (cameras.txt/bin) under " + dir.string());
}

}  // namespace

Dataset load_colmap(const fs::path& dir) {
  fs::path model = find_model_dir(dir);
  bool binary = fs::exists(model / "cameras.bin") && !fs::exists(model / "cameras.txt");

  std::map<int, ColmapCamera> cams;
  std::vector<ImagePose> poses;
  Dataset ds;
  if (binary) {
    cams = read_cameras_bin(model / "cameras.bin");
    poses = read_images_bin(model / "images.bin");
    read_points_bin(model / "points3D.bin", ds.sparse_points, ds.sparse_colors);
  } else {
    cams = read_cameras_text(model / "cameras.txt");
    poses = read_images_text(model / "images.txt");
    read_points_text(model / "points3D.txt", ds.sparse_points, ds.sparse_colors);
  }
  if (ds.sparse_points.empty())
    throw std::runtime_error("SfM model has no 3D points: " + model.string());

  std::sort(poses.begin(), poses.end(),
            [](const ImagePose& a, const ImagePose& b) { return a.name < b.name; });

  fs::path images_dir = dir / "images";
  fs::path masks_dir = dir / "masks";
  bool has_images = fs::exists(images_dir);
  for (const ImagePose& ip : poses) {
    auto it = cams.find(ip.camera_id);
    if (it == cams.end())
      throw std::runtime_error("image references unknown camera id " +
                               std::to_string(ip.camera_id));
    Camera cam = convert_intrinsics(it->second);
    cam.rotation = quaternion_to_matrix(ip.quat);
    cam.translation = ip.trans;
    cam.name = ip.name;
    ds.cameras.push_back(cam);
    if (has_images) {
      ds.images.push_back(read_image(images_dir / ip.name));
      if (fs::exists(masks_dir)) {
        fs::path mask_path = masks_dir / ip.name;
        if (fs::exists(mask_path)) {
          Image m = read_image(mask_path);
          Image mono(m.height(), m.width(), 1);
          for (int y = 0; y < m.height(); ++y)
            for (int x = 0; x < m.width(); ++x)
              mono.at(y, x) = (m.at(y, x, 0) + m.at(y, x, 1) + m.at(y, x, 2)) / 3.0;
          ds.masks.push_back(std::move(mono));
        } else {
          ds.masks.push_back(Image());
        }
      }
    }
  }
  return ds;
}

}  // namespace refsplat
