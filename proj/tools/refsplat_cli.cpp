#include <CLI11.hpp>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <omp.h>

#include "refsplat/evalkit.hpp"
#include "refsplat/run_config.hpp"

namespace fs = std::filesystem;
using namespace refsplat;

namespace {

constexpr int kExitConfig = 2;
constexpr int kExitData = 3;
constexpr int kExitNumerical = 4;

struct Flags {
  std::string data, out, config, checkpoint, mode;
  uint64_t seed = 0;
  int iters = 0, threads = 0, view = -1;
  double lambda_bi = 0, lambda_ref = 0, lambda_init = 0, gamma = 0;
  std::string resolution;
  bool freeze_reflection = false;
};

void add_shared_flags(CLI::App* cmd, Flags& f) {
  cmd->add_option("--data", f.data, "dataset directory");
  cmd->add_option("--out", f.out, "output directory");
  cmd->add_option("--config", f.config, "JSON config file (defaults < file < flags)");
  cmd->add_option("--checkpoint", f.checkpoint, "checkpoint PLY path");
  cmd->add_option("--seed", f.seed, "global seed (split, init, shuffling)");
  cmd->add_option("--iters", f.iters, "training iterations");
  cmd->add_option("--mode", f.mode, "reflection-map accumulation: beta|alpha");
  cmd->add_option("--lambda-bi", f.lambda_bi, "bilateral smoothness weight");
  cmd->add_option("--lambda-ref", f.lambda_ref, "reflection-map smoothness weight");
  cmd->add_option("--lambda-init", f.lambda_init, "initial-alignment weight");
  cmd->add_option("--gamma", f.gamma, "bilateral color scale");
  cmd->add_option("--resolution", f.resolution, "target resolution WxH");
  cmd->add_option("--threads", f.threads, "OpenMP thread count (0 = default)");
  cmd->add_option("--view", f.view, "camera index for decompose/relight");
  cmd->add_flag("--freeze-reflection", f.freeze_reflection,
                "single-branch baseline: reflected branch held at zero");
}

RunConfig resolve(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg;
  if (cmd->count("--config")) cfg = load_run_config(f.config, cfg);
  if (cmd->count("--data")) cfg.data_dir = f.data;
  if (cmd->count("--out")) cfg.out_dir = f.out;
  if (cmd->count("--seed")) {
    cfg.seed = f.seed;
    cfg.train.seed = f.seed;
  }
  cfg.train.seed = cfg.seed;
  if (cmd->count("--iters")) cfg.train.total_iters = f.iters;
  if (cmd->count("--mode")) {
    if (f.mode == "beta")
      cfg.train.mode = AccumulationMode::Beta;
    else if (f.mode == "alpha")
      cfg.train.mode = AccumulationMode::Alpha;
    else
      throw std::invalid_argument("--mode must be beta or alpha");
  }
  if (cmd->count("--lambda-bi")) cfg.train.loss.lambda_bi = f.lambda_bi;
  if (cmd->count("--lambda-ref")) cfg.train.loss.lambda_ref = f.lambda_ref;
  if (cmd->count("--lambda-init")) cfg.train.loss.lambda_init = f.lambda_init;
  if (cmd->count("--gamma")) cfg.train.loss.gamma = f.gamma;
  if (cmd->count("--resolution")) {
    int w = 0, h = 0;
    if (std::sscanf(f.resolution.c_str(), "%dx%d", &w, &h) != 2)
      throw std::invalid_argument("--resolution expects WxH, e.g. 1296x864");
    cfg.target_width = w;
    cfg.target_height = h;
  }
  if (cmd->count("--threads")) cfg.threads = f.threads;
  if (cmd->count("--freeze-reflection")) cfg.train.freeze_reflection = true;
  cfg.validate();
  if (cfg.threads > 0) omp_set_num_threads(cfg.threads);
  return cfg;
}

Dataset load_dataset(const RunConfig& cfg) {
  if (cfg.data_dir.empty()) throw std::invalid_argument("--data is required");
  Dataset ds = load_colmap(cfg.data_dir);
  preprocess(ds, cfg.target_width, cfg.target_height);
  split_train_test(ds, cfg.seed);
  return ds;
}

fs::path prepare_out(const RunConfig& cfg) {
  if (cfg.out_dir.empty()) throw std::invalid_argument("--out is required");
  fs::path out(cfg.out_dir);
  fs::create_directories(out);
  save_run_config(cfg, out / "run_config.json");
  return out;
}

RenderOptions render_options(const RunConfig& cfg) {
  RenderOptions opt;
  opt.mode = cfg.train.mode;
  return opt;
}

int cmd_train(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = resolve(cmd, f);
  Dataset ds = load_dataset(cfg);
  fs::path out = prepare_out(cfg);
  cfg.train.checkpoint_dir = out.string();

  GaussianCloud cloud = init_from_points(ds.sparse_points, ds.sparse_colors);
  TrainResult result = train(ds, std::move(cloud), cfg.train);

  save_checkpoint(result.cloud, result.state, out / "final.ply");
  std::ofstream log(out / "loss_log.tsv");
  log << "iter\ttotal\tl_rgb\tl_init\tl_bi\tl_ref\tgaussians\ttrain_psnr\n";
  log.precision(10);
  for (const TrainLogRecord& r : result.log)
    log << r.iter << "\t" << r.loss.total << "\t" << r.loss.l_rgb << "\t" << r.loss.l_init
        << "\t" << r.loss.l_bi << "\t" << r.loss.l_ref << "\t" << r.gaussian_count << "\t"
        << r.train_psnr << "\n";
  std::cout << "trained " << cfg.train.total_iters << " iters, " << result.cloud.size()
            << " gaussians -> " << (out / "final.ply").string() << "\n";
  return 0;
}

GaussianCloud load_cloud(const Flags& f) {
  if (f.checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
  return import_ply(f.checkpoint);
}

int cmd_eval(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = resolve(cmd, f);
  Dataset ds = load_dataset(cfg);
  fs::path out = prepare_out(cfg);
  GaussianCloud cloud = load_cloud(f);

  std::vector<size_t> test = ds.test_indices();
  if (test.empty())
    throw std::runtime_error(
        "empty test split (dataset under 8 images); re-split a larger dataset with "
        "--seed " +
        std::to_string(cfg.seed));

  MetricsReport report;
  report.scene = fs::path(cfg.data_dir).filename().string();
  report.config_hash = run_config_hash(cfg);
  RenderOptions opt = render_options(cfg);
  std::vector<Camera> test_cams;
  for (size_t idx : test) {
    RenderOutputs outs = render(cloud, ds.cameras[idx], opt);
    Image pred = clamp01(outs.composed);
    report.view_names.push_back(ds.cameras[idx].name);
    report.view_psnr.push_back(psnr(pred, ds.images[idx]));
    report.view_ssim.push_back(ssim_metric(pred, ds.images[idx]));
    test_cams.push_back(ds.cameras[idx]);
  }
  report.fps = measure_fps(cloud, test_cams, 1, 2, opt);
  report.finalize();
  write_report(report, out / "metrics.tsv");
  std::cout << "mean PSNR " << report.mean_psnr << " dB, mean SSIM " << report.mean_ssim
            << ", " << report.fps << " fps over " << test.size() << " test views\n";
  return 0;
}

int cmd_decompose(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = resolve(cmd, f);
  Dataset ds = load_dataset(cfg);
  fs::path out = prepare_out(cfg);
  GaussianCloud cloud = load_cloud(f);
  RenderOptions opt = render_options(cfg);
  std::vector<size_t> views;
  if (f.view >= 0) {
    if (f.view >= static_cast<int>(ds.cameras.size()))
      throw std::invalid_argument("--view out of range");
    views.push_back(f.view);
  } else {
    views = ds.test_indices();
    if (views.empty()) views = ds.train_indices();
  }
  for (size_t idx : views) {
    std::string prefix = fs::path(ds.cameras[idx].name).stem().string() + "_";
    export_decomposition(cloud, ds.cameras[idx], out, opt, prefix);
  }
  std::cout << "wrote decompositions for " << views.size() << " views to " << out.string()
            << "\n";
  return 0;
}

int cmd_relight(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = resolve(cmd, f);
  Dataset ds = load_dataset(cfg);
  fs::path out = prepare_out(cfg);
  GaussianCloud cloud = load_cloud(f);
  size_t idx = 0;
  if (f.view >= 0) {
    if (f.view >= static_cast<int>(ds.cameras.size()))
      throw std::invalid_argument("--view out of range");
    idx = f.view;
  } else if (!ds.test_indices().empty()) {
    idx = ds.test_indices().front();
  }
  export_relit_sequence(cloud, ds.cameras[idx], kDefaultRelitCoefficients, out,
                        render_options(cfg));
  std::cout << "wrote " << kDefaultRelitCoefficients.size() << " relit frames for "
            << ds.cameras[idx].name << " to " << out.string() << "\n";
  return 0;
}

int cmd_synth(const CLI::App* cmd, const Flags& f) {
  RunConfig cfg = resolve(cmd, f);
  fs::path out = prepare_out(cfg);
  SyntheticSceneSpec spec;
  spec.wall_seed = cfg.seed * 2 + 1;
  spec.object_seed = cfg.seed * 2 + 2;
  Dataset ds = generate_synthetic_mirror_scene(spec);
  write_synthetic_dataset(ds, out);
  std::cout << "wrote synthetic mirror scene (" << ds.cameras.size() << " views) to "
            << out.string() << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"reflection-aware gaussian splatting"};
  app.require_subcommand(1);

  Flags f;
  CLI::App* train = app.add_subcommand("train", "optimize a scene");
  CLI::App* eval = app.add_subcommand("eval", "metrics on the test split");
  CLI::App* decompose = app.add_subcommand("decompose", "per-view component images");
  CLI::App* relight = app.add_subcommand("relight", "reflection-scaled frame sequence");
  CLI::App* synth = app.add_subcommand("synth", "generate the synthetic mirror dataset");
  for (CLI::App* c : {train, eval, decompose, relight, synth}) add_shared_flags(c, f);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitConfig;
  }

  try {
    if (train->parsed()) return cmd_train(train, f);
    if (eval->parsed()) return cmd_eval(eval, f);
    if (decompose->parsed()) return cmd_decompose(decompose, f);
    if (relight->parsed()) return cmd_relight(relight, f);
    if (synth->parsed()) return cmd_synth(synth, f);
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return kExitConfig;
  } catch (const std::ios_base::failure& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return kExitData;
  } catch (const std::runtime_error& e) {
    std::string msg = e.what();
    bool numerical = msg.find("non-finite") != std::string::npos;
    std::cerr << (numerical ? "numerical abort: " : "data error: ") << msg << "\n";
    return numerical ? kExitNumerical : kExitData;
  }
  return 0;
}
