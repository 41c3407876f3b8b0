#include <pybind11/eigen.h>
#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "refsplat/evalkit.hpp"
#include "refsplat/losses.hpp"
#include "refsplat/optimizer.hpp"
#include "refsplat/run_config.hpp"

namespace py = pybind11;
using namespace refsplat;

namespace {

py::array_t<double> to_array(const Image& img) {
  py::array_t<double> out({img.height(), img.width(), img.channels()});
  std::copy(img.data(), img.data() + img.size(), out.mutable_data());
  return out;
}

Image from_array(py::array_t<double, py::array::c_style | py::array::forcecast> arr) {
  if (arr.ndim() == 2) {
    Image img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)), 1);
    std::copy(arr.data(), arr.data() + arr.size(), img.data());
    return img;
  }
  if (arr.ndim() != 3) throw std::invalid_argument("expected an HxWxC array");
  Image img(static_cast<int>(arr.shape(0)), static_cast<int>(arr.shape(1)),
            static_cast<int>(arr.shape(2)));
  std::copy(arr.data(), arr.data() + arr.size(), img.data());
  return img;
}

AccumulationMode parse_mode(const std::string& s) {
  if (s == "beta") return AccumulationMode::Beta;
  if (s == "alpha") return AccumulationMode::Alpha;
  throw std::invalid_argument("mode must be 'beta' or 'alpha'");
}

RenderOptions make_options(const std::string& mode, bool dual) {
  RenderOptions opt;
  opt.mode = parse_mode(mode);
  opt.dual = dual;
  return opt;
}

py::dict outputs_to_dict(const RenderOutputs& o) {
  py::dict d;
  d["composed"] = to_array(o.composed);
  d["transmitted"] = to_array(o.transmitted);
  d["reflected"] = to_array(o.reflected);
  d["reflection_map"] = to_array(o.reflection_map);
  d["depth"] = to_array(o.depth);
  d["alpha_accum"] = to_array(o.alpha_accum);
  return d;
}

}  // namespace

PYBIND11_MODULE(_refsplat, m) {
  m.doc() = "reflection-aware gaussian splatting core";

  py::class_<Camera>(m, "Camera")
      .def(py::init<>())
      .def_readwrite("fx", &Camera::fx)
      .def_readwrite("fy", &Camera::fy)
      .def_readwrite("cx", &Camera::cx)
      .def_readwrite("cy", &Camera::cy)
      .def_readwrite("width", &Camera::width)
      .def_readwrite("height", &Camera::height)
      .def_readwrite("rotation", &Camera::rotation)
      .def_readwrite("translation", &Camera::translation)
      .def_readwrite("name", &Camera::name)
      .def("position", &Camera::position)
      .def_static("look_at", &Camera::look_at, py::arg("eye"), py::arg("target"),
                  py::arg("up"), py::arg("focal"), py::arg("width"), py::arg("height"));

  py::class_<GaussianCloud>(m, "GaussianCloud")
      .def(py::init<>())
      .def_property_readonly("size", &GaussianCloud::size)
      .def_readwrite("active_sh_degree", &GaussianCloud::active_sh_degree)
      .def_property_readonly("means", [](const GaussianCloud& c) {
        py::array_t<double> out({c.size(), size_t(3)});
        for (size_t i = 0; i < c.size(); ++i)
          for (int k = 0; k < 3; ++k) out.mutable_at(i, k) = c.means[i][k];
        return out;
      });

  m.def("init_from_points",
        [](const std::vector<Vec3>& pts, const std::vector<Vec3>& cols) {
          return init_from_points(pts, cols);
        },
        py::arg("points"), py::arg("colors"));

  m.def("import_ply", &import_ply, py::arg("path"));
  m.def("export_ply", &export_ply, py::arg("cloud"), py::arg("path"));

  m.def("render",
        [](const GaussianCloud& cloud, const Camera& cam, const std::string& mode,
           bool dual) { return outputs_to_dict(render(cloud, cam, make_options(mode, dual))); },
        py::arg("cloud"), py::arg("camera"), py::arg("mode") = "beta",
        py::arg("dual") = true);

  m.def("render_relit",
        [](const GaussianCloud& cloud, const Camera& cam, double kappa,
           const std::string& mode) {
          return to_array(render_relit(cloud, cam, kappa, make_options(mode, true)));
        },
        py::arg("cloud"), py::arg("camera"), py::arg("kappa"), py::arg("mode") = "beta");

  m.def("psnr", [](py::array_t<double> a, py::array_t<double> b) {
    return psnr(from_array(a), from_array(b));
  });
  m.def("ssim", [](py::array_t<double> a, py::array_t<double> b) {
    return ssim_metric(from_array(a), from_array(b));
  });
  m.def("photometric_loss",
        [](py::array_t<double> gt, py::array_t<double> pred, double lambda_balance) {
          return photometric_loss(from_array(gt), from_array(pred), lambda_balance);
        },
        py::arg("gt"), py::arg("pred"), py::arg("lambda_balance") = 0.8);

  m.def("generate_synthetic_dataset",
        [](const std::filesystem::path& out_dir, uint64_t seed) {
          SyntheticSceneSpec spec;
          spec.wall_seed = seed * 2 + 1;
          spec.object_seed = seed * 2 + 2;
          write_synthetic_dataset(generate_synthetic_mirror_scene(spec), out_dir);
        },
        py::arg("out_dir"), py::arg("seed") = 0);

  m.def("train_scene",
        [](const std::filesystem::path& data_dir, int iters, uint64_t seed, int width,
           int height, const std::string& mode, bool freeze_reflection) {
          Dataset ds = load_colmap(data_dir);
          preprocess(ds, width, height);
          split_train_test(ds, seed);
          TrainConfig cfg;
          cfg.total_iters = iters;
          cfg.seed = seed;
          cfg.mode = parse_mode(mode);
          cfg.freeze_reflection = freeze_reflection;
          GaussianCloud cloud = init_from_points(ds.sparse_points, ds.sparse_colors);
          TrainResult result = train(ds, std::move(cloud), cfg);
          py::dict out;
          out["cloud"] = result.cloud;
          out["final_loss"] = result.log.empty() ? 0.0 : result.log.back().loss.total;
          out["final_train_psnr"] = result.log.empty() ? 0.0 : result.log.back().train_psnr;
          return out;
        },
        py::arg("data_dir"), py::arg("iters") = 500, py::arg("seed") = 0,
        py::arg("width") = 64, py::arg("height") = 64, py::arg("mode") = "beta",
        py::arg("freeze_reflection") = false);

  m.def("load_cameras", [](const std::filesystem::path& data_dir, int width, int height,
                           uint64_t seed) {
    Dataset ds = load_colmap(data_dir);
    preprocess(ds, width, height);
    split_train_test(ds, seed);
    py::list cams, images, is_test;
    for (size_t i = 0; i < ds.cameras.size(); ++i) {
      cams.append(ds.cameras[i]);
      images.append(to_array(ds.images[i]));
      is_test.append(static_cast<bool>(ds.is_test[i]));
    }
    py::dict out;
    out["cameras"] = cams;
    out["images"] = images;
    out["is_test"] = is_test;
    return out;
  }, py::arg("data_dir"), py::arg("width") = 64, py::arg("height") = 64, py::arg("seed") = 0);
}
