#include <cmath>
#include <fstream>
#include <random>
#include <stdexcept>

#include "refsplat/dataset.hpp"

namespace refsplat {

namespace {

// Smooth seeded texture: a small bank of sinusoids per channel.
struct Texture {
  struct Wave {
    double fx, fy, phase, amp;
    Vec3 color;
  };
  std::vector<Wave> waves;
  Vec3 base;

  static Texture make(uint64_t seed, double base_level, double amplitude, double max_freq) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> freq(0.4, max_freq);
    std::uniform_real_distribution<double> uni(0.0, 1.0);
    Texture t;
    t.base = Vec3::Constant(base_level);
    for (int i = 0; i < 6; ++i) {
      Wave w;
      w.fx = freq(rng) * (uni(rng) < 0.5 ? -1 : 1);
      w.fy = freq(rng) * (uni(rng) < 0.5 ? -1 : 1);
      w.phase = uni(rng) * 2.0 * M_PI;
      w.amp = amplitude / 6.0 * (0.5 + uni(rng));
      w.color = Vec3(uni(rng), uni(rng), uni(rng));
      t.waves.push_back(w);
    }
    return t;
  }

  Vec3 sample(double x, double y) const {
    Vec3 c = base;
    for (const Wave& w : waves)
      c += w.color * (w.amp * std::sin(w.fx * x + w.fy * y + w.phase));
    return c.cwiseMax(0.0).cwiseMin(1.0);
  }
};

bool inside_mirror(const SyntheticSceneSpec& spec, double x, double y) {
  return std::abs(x - spec.mirror_center.x()) <= spec.mirror_half_extent.x() &&
         std::abs(y - spec.mirror_center.y()) <= spec.mirror_half_extent.y();
}

std::vector<Camera> make_cameras(const SyntheticSceneSpec& spec) {
  std::vector<Camera> cams;
  int grid = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(spec.n_views))));
  std::mt19937_64 rng(spec.wall_seed ^ 0x9e3779b97f4a7c15ULL);
  std::uniform_real_distribution<double> jitter(-0.05, 0.05);
  double focal = 1.1 * spec.width;
  for (int v = 0; v < spec.n_views; ++v) {
    int gy = v / grid, gx = v % grid;
    double fx = grid > 1 ? (2.0 * gx / (grid - 1) - 1.0) : 0.0;
    double fy = grid > 1 ? (2.0 * gy / (grid - 1) - 1.0) : 0.0;
    Vec3 eye(fx * spec.camera_spread + jitter(rng), fy * spec.camera_spread + jitter(rng),
             spec.camera_distance + jitter(rng));
    Camera cam = Camera::look_at(eye, Vec3(0, 0, 0), Vec3(0, 1, 0), focal, spec.width,
                                 spec.height);
    cam.name = "view_" + std::to_string(v) + ".png";
    cams.push_back(cam);
  }
  return cams;
}

// Intersects the pixel ray with the wall plane z = 0; false when parallel or
// hitting behind the camera.
bool wall_hit(const Camera& cam, double px, double py, Vec3& hit) {
  Vec3 dir_cam((px - cam.cx) / cam.fx, (py - cam.cy) / cam.fy, 1.0);
  Vec3 dir = cam.rotation.transpose() * dir_cam;
  Vec3 origin = cam.position();
  if (std::abs(dir.z()) < 1e-12) return false;
  double t = -origin.z() / dir.z();
  if (t <= 0) return false;
  hit = origin + t * dir;
  return true;
}

}  // namespace

Image synthetic_diffuse_view(const SyntheticSceneSpec& spec, const Camera& cam) {
  Texture wall = Texture::make(spec.wall_seed, 0.35, 0.3, 3.0);
  Image img(cam.height, cam.width, 3);
  for (int y = 0; y < cam.height; ++y)
    for (int x = 0; x < cam.width; ++x) {
      Vec3 hit;
      Vec3 c = Vec3::Zero();
      if (wall_hit(cam, x + 0.5, y + 0.5, hit)) c = wall.sample(hit.x(), hit.y());
      for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = c[ch];
    }
  return img;
}

Dataset generate_synthetic_mirror_scene(const SyntheticSceneSpec& spec) {
  if (spec.n_views < 1) throw std::invalid_argument("synthetic scene: need >= 1 view");
  Texture wall = Texture::make(spec.wall_seed, 0.35, 0.3, 3.0);
  Texture object = Texture::make(spec.object_seed, 0.4, 0.5, 1.2);

  Dataset ds;
  ds.cameras = make_cameras(spec);

  int in_front = 0;
  for (const Camera& cam : ds.cameras)
    if (cam.to_camera(Vec3(spec.mirror_center.x(), spec.mirror_center.y(), 0)).z() > 0)
      ++in_front;
  if (in_front == 0)
    throw std::invalid_argument("synthetic scene: mirror behind every camera");

  for (const Camera& cam : ds.cameras) {
    Image img(cam.height, cam.width, 3);
    Image mask(cam.height, cam.width, 1);
    for (int y = 0; y < cam.height; ++y)
      for (int x = 0; x < cam.width; ++x) {
        Vec3 hit;
        if (!wall_hit(cam, x + 0.5, y + 0.5, hit)) continue;
        Vec3 c = wall.sample(hit.x(), hit.y());
        if (inside_mirror(spec, hit.x(), hit.y())) {
          mask.at(y, x) = 1.0;
          // reflect the ray across the wall plane and sample the virtual
          // object plane at z = object_plane_z
          Vec3 dir = (hit - cam.position()).normalized();
          Vec3 refl(dir.x(), dir.y(), -dir.z());
          if (refl.z() > 1e-12) {
            double t = spec.object_plane_z / refl.z();
            Vec3 obj_hit = hit + t * refl;
            Vec3 rc = object.sample(obj_hit.x(), obj_hit.y());
            c += spec.reflection_strength * rc;
          }
        }
        for (int ch = 0; ch < 3; ++ch) img.at(y, x, ch) = std::min(1.0, c[ch]);
      }
    ds.images.push_back(std::move(img));
    ds.masks.push_back(std::move(mask));
  }

  // sparse init points on the wall, colored by the diffuse texture
  std::mt19937_64 rng(spec.wall_seed * 7919 + spec.object_seed);
  std::uniform_real_distribution<double> ux(-1.8, 1.8), uy(-1.8, 1.8);
  for (int i = 0; i < spec.n_points; ++i) {
    double x = ux(rng), y = uy(rng);
    ds.sparse_points.push_back(Vec3(x, y, 0.0));
    ds.sparse_colors.push_back(wall.sample(x, y));
  }
  return ds;
}

double synthetic_mirror_coverage(const SyntheticSceneSpec& spec, const Camera& cam) {
  // The mirror is planar, so its image is the quadrilateral spanned by the
  // projected corners; shoelace area over the image area.
  Vec2 c = spec.mirror_center, h = spec.mirror_half_extent;
  Vec3 corners[4] = {Vec3(c.x() - h.x(), c.y() - h.y(), 0), Vec3(c.x() + h.x(), c.y() - h.y(), 0),
                     Vec3(c.x() + h.x(), c.y() + h.y(), 0), Vec3(c.x() - h.x(), c.y() + h.y(), 0)};
  Vec2 proj[4];
  for (int i = 0; i < 4; ++i) {
    Vec3 t = cam.to_camera(corners[i]);
    if (t.z() <= 0) return 0.0;
    proj[i] = Vec2(cam.fx * t.x() / t.z() + cam.cx, cam.fy * t.y() / t.z() + cam.cy);
  }
  double area = 0;
  for (int i = 0; i < 4; ++i) {
    const Vec2& a = proj[i];
    const Vec2& b = proj[(i + 1) % 4];
    area += a.x() * b.y() - b.x() * a.y();
  }
  area = std::abs(area) * 0.5;
  return area / (static_cast<double>(cam.width) * cam.height);
}

void write_synthetic_dataset(const Dataset& ds, const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "sparse" / "0");
  fs::create_directories(dir / "images");
  fs::create_directories(dir / "masks");

  std::ofstream cams(dir / "sparse" / "0" / "cameras.txt");
  std::ofstream imgs(dir / "sparse" / "0" / "images.txt");
  std::ofstream pts(dir / "sparse" / "0" / "points3D.txt");
  cams << "# Camera list: CAMERA_ID MODEL WIDTH HEIGHT PARAMS[]\n";
  imgs << "# Image list: IMAGE_ID QW QX QY QZ TX TY TZ CAMERA_ID NAME\n";
  pts << "# 3D point list: POINT3D_ID X Y Z R G B ERROR\n";
  cams.precision(17);
  imgs.precision(17);
  pts.precision(17);

  for (size_t i = 0; i < ds.cameras.size(); ++i) {
    const Camera& cam = ds.cameras[i];
    cams << (i + 1) << " PINHOLE " << cam.width << " " << cam.height << " " << cam.fx << " "
         << cam.fy << " " << cam.cx << " " << cam.cy << "\n";
    // rotation matrix -> quaternion (w,x,y,z)
    Eigen::Quaterniond q(cam.rotation);
    imgs << (i + 1) << " " << q.w() << " " << q.x() << " " << q.y() << " " << q.z() << " "
         << cam.translation.x() << " " << cam.translation.y() << " " << cam.translation.z()
         << " " << (i + 1) << " " << cam.name << "\n\n";
    write_image(ds.images[i], dir / "images" / cam.name);
    if (i < ds.masks.size() && !ds.masks[i].empty())
      write_image(ds.masks[i], dir / "masks" / cam.name);
  }
  for (size_t i = 0; i < ds.sparse_points.size(); ++i) {
    const Vec3& p = ds.sparse_points[i];
    const Vec3& c = ds.sparse_colors[i];
    pts << (i + 1) << " " << p.x() << " " << p.y() << " " << p.z() << " "
        << static_cast<int>(std::lround(c.x() * 255)) << " "
        << static_cast<int>(std::lround(c.y() * 255)) << " "
        << static_cast<int>(std::lround(c.z() * 255)) << " 0\n";
  }
}

}  // namespace refsplat
