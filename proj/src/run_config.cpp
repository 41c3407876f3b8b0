#include <cstdio>
#include <cstring>
#include <fstream>
#include <nlohmann/json.hpp>
#include <sstream>
#include <stdexcept>

#include "refsplat/dataset.hpp"
#include "refsplat/run_config.hpp"

namespace refsplat {

using nlohmann::json;

namespace {

const char* mode_name(AccumulationMode m) {
  return m == AccumulationMode::Beta ? "beta" : "alpha";
}

AccumulationMode mode_from_name(const std::string& s) {
  if (s == "beta") return AccumulationMode::Beta;
  if (s == "alpha") return AccumulationMode::Alpha;
  throw std::invalid_argument("unknown accumulation mode: " + s);
}

json to_json(const RunConfig& c) {
  const TrainConfig& t = c.train;
  const LossConfig& l = t.loss;
  json j;
  j["data_dir"] = c.data_dir;
  j["out_dir"] = c.out_dir;
  j["seed"] = c.seed;
  j["target_width"] = c.target_width;
  j["target_height"] = c.target_height;
  j["threads"] = c.threads;
  json jt;
  jt["total_iters"] = t.total_iters;
  jt["lr_mean_init"] = t.lr_mean_init;
  jt["lr_mean_final"] = t.lr_mean_final;
  jt["lr_sh"] = t.lr_sh;
  jt["lr_opacity"] = t.lr_opacity;
  jt["lr_beta"] = t.lr_beta;
  jt["lr_scale"] = t.lr_scale;
  jt["lr_rotation"] = t.lr_rotation;
  jt["densify_interval"] = t.densify_interval;
  jt["densify_start"] = t.densify_start;
  jt["densify_end"] = t.densify_end;
  jt["grad_threshold"] = t.grad_threshold;
  jt["prune_opacity"] = t.prune_opacity;
  jt["opacity_reset_interval"] = t.opacity_reset_interval;
  jt["percent_dense"] = t.percent_dense;
  jt["split_scale_shrink"] = t.split_scale_shrink;
  jt["sh_degree_interval"] = t.sh_degree_interval;
  jt["mode"] = mode_name(t.mode);
  jt["freeze_reflection"] = t.freeze_reflection;
  jt["scene_extent"] = t.scene_extent;
  jt["log_interval"] = t.log_interval;
  jt["checkpoint_interval"] = t.checkpoint_interval;
  json jl;
  jl["lambda_balance"] = l.lambda_balance;
  jl["lambda_init"] = l.lambda_init;
  jl["lambda_bi"] = l.lambda_bi;
  jl["lambda_ref"] = l.lambda_ref;
  jl["gamma"] = l.gamma;
  jl["init_cutoff_iter"] = l.init_cutoff_iter;
  jl["ssim_window"] = l.ssim_window;
  jl["ssim_sigma"] = l.ssim_sigma;
  jt["loss"] = jl;
  j["train"] = jt;
  return j;
}

// Overwrites only keys that are present, leaving `base` values elsewhere.
template <typename T>
void pick(const json& j, const char* key, T& out) {
  if (auto it = j.find(key); it != j.end()) out = it->get<T>();
}

RunConfig from_json(const json& j, const RunConfig& base) {
  RunConfig c = base;
  pick(j, "data_dir", c.data_dir);
  pick(j, "out_dir", c.out_dir);
  pick(j, "seed", c.seed);
  pick(j, "target_width", c.target_width);
  pick(j, "target_height", c.target_height);
  pick(j, "threads", c.threads);
  if (auto it = j.find("train"); it != j.end()) {
    const json& jt = *it;
    TrainConfig& t = c.train;
    pick(jt, "total_iters", t.total_iters);
    pick(jt, "lr_mean_init", t.lr_mean_init);
    pick(jt, "lr_mean_final", t.lr_mean_final);
    pick(jt, "lr_sh", t.lr_sh);
    pick(jt, "lr_opacity", t.lr_opacity);
    pick(jt, "lr_beta", t.lr_beta);
    pick(jt, "lr_scale", t.lr_scale);
    pick(jt, "lr_rotation", t.lr_rotation);
    pick(jt, "densify_interval", t.densify_interval);
    pick(jt, "densify_start", t.densify_start);
    pick(jt, "densify_end", t.densify_end);
    pick(jt, "grad_threshold", t.grad_threshold);
    pick(jt, "prune_opacity", t.prune_opacity);
    pick(jt, "opacity_reset_interval", t.opacity_reset_interval);
    pick(jt, "percent_dense", t.percent_dense);
    pick(jt, "split_scale_shrink", t.split_scale_shrink);
    pick(jt, "sh_degree_interval", t.sh_degree_interval);
    if (auto m = jt.find("mode"); m != jt.end())
      t.mode = mode_from_name(m->get<std::string>());
    pick(jt, "freeze_reflection", t.freeze_reflection);
    pick(jt, "scene_extent", t.scene_extent);
    pick(jt, "log_interval", t.log_interval);
    pick(jt, "checkpoint_interval", t.checkpoint_interval);
    if (auto lit = jt.find("loss"); lit != jt.end()) {
      const json& jl = *lit;
      LossConfig& l = t.loss;
      pick(jl, "lambda_balance", l.lambda_balance);
      pick(jl, "lambda_init", l.lambda_init);
      pick(jl, "lambda_bi", l.lambda_bi);
      pick(jl, "lambda_ref", l.lambda_ref);
      pick(jl, "gamma", l.gamma);
      pick(jl, "init_cutoff_iter", l.init_cutoff_iter);
      pick(jl, "ssim_window", l.ssim_window);
      pick(jl, "ssim_sigma", l.ssim_sigma);
    }
  }
  return c;
}

}  // namespace

void RunConfig::validate() const {
  if (target_width < 16 || target_height < 16)
    throw std::invalid_argument("run config: resolution below 16x16");
  if (threads < 0) throw std::invalid_argument("run config: negative thread count");
  train.validate();
}

std::string serialize_run_config(const RunConfig& cfg) { return to_json(cfg).dump(2) + "\n"; }

RunConfig parse_run_config(const std::string& json_text, const RunConfig& base) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::exception& e) {
    throw std::invalid_argument(std::string("config parse error: ") + e.what());
  }
  return from_json(j, base);
}

RunConfig load_run_config(const std::filesystem::path& path, const RunConfig& base) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("cannot open config file: " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_run_config(buf.str(), base);
}

void save_run_config(const RunConfig& cfg, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write config file: " + path.string());
  out << serialize_run_config(cfg);
}

std::string run_config_hash(const RunConfig& cfg) {
  // FNV-1a over the canonical serialization; plenty for report labeling.
  std::string s = serialize_run_config(cfg);
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char ch : s) {
    h ^= ch;
    h *= 1099511628211ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

constexpr char kStateMagic[8] = {'R', 'S', 'O', 'P', 'T', '0', '0', '1'};

void put_u64(std::ostream& out, uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof v);
}

uint64_t get_u64(std::istream& in) {
  uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof v);
  return v;
}

void put_doubles(std::ostream& out, const double* p, size_t n) {
  out.write(reinterpret_cast<const char*>(p), n * sizeof(double));
}

void get_doubles(std::istream& in, double* p, size_t n) {
  in.read(reinterpret_cast<char*>(p), n * sizeof(double));
}

void put_grads(std::ostream& out, const ParamGradients& g) {
  size_t n = g.size();
  for (size_t i = 0; i < n; ++i) put_doubles(out, g.means[i].data(), 3);
  for (size_t i = 0; i < n; ++i) put_doubles(out, g.rotations[i].data(), 4);
  for (size_t i = 0; i < n; ++i) put_doubles(out, g.log_scales[i].data(), 3);
  put_doubles(out, g.opacity_logits.data(), n);
  put_doubles(out, g.ref_opacity_logits.data(), n);
  put_doubles(out, g.beta_logits.data(), n);
  for (size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 1, kShValues> row = g.sh_trans.row(i);
    put_doubles(out, row.data(), kShValues);
  }
  for (size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 1, kShValues> row = g.sh_ref.row(i);
    put_doubles(out, row.data(), kShValues);
  }
}

void get_grads(std::istream& in, ParamGradients& g, size_t n) {
  g.resize_zero(n);
  for (size_t i = 0; i < n; ++i) get_doubles(in, g.means[i].data(), 3);
  for (size_t i = 0; i < n; ++i) get_doubles(in, g.rotations[i].data(), 4);
  for (size_t i = 0; i < n; ++i) get_doubles(in, g.log_scales[i].data(), 3);
  get_doubles(in, g.opacity_logits.data(), n);
  get_doubles(in, g.ref_opacity_logits.data(), n);
  get_doubles(in, g.beta_logits.data(), n);
  for (size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 1, kShValues> row;
    get_doubles(in, row.data(), kShValues);
    g.sh_trans.row(i) = row;
  }
  for (size_t i = 0; i < n; ++i) {
    Eigen::Matrix<double, 1, kShValues> row;
    get_doubles(in, row.data(), kShValues);
    g.sh_ref.row(i) = row;
  }
}

std::filesystem::path state_path(const std::filesystem::path& ply_path) {
  std::filesystem::path p = ply_path;
  p.replace_extension(".state");
  return p;
}

}  // namespace

void save_checkpoint(const GaussianCloud& cloud, const OptimizerState& state,
                     const std::filesystem::path& ply_path) {
  export_ply(cloud, ply_path);
  std::ofstream out(state_path(ply_path), std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + state_path(ply_path).string());
  out.write(kStateMagic, sizeof kStateMagic);
  put_u64(out, cloud.size());
  put_u64(out, static_cast<uint64_t>(state.step));
  put_u64(out, static_cast<uint64_t>(state.nonfinite_skips));
  put_u64(out, static_cast<uint64_t>(cloud.active_sh_degree));
  put_grads(out, state.exp_avg);
  put_grads(out, state.exp_avg_sq);
  put_doubles(out, state.screen_grad_accum.data(), cloud.size());
  std::vector<double> counts(state.screen_grad_count.begin(), state.screen_grad_count.end());
  put_doubles(out, counts.data(), counts.size());
  if (!out) throw std::runtime_error("write failed: " + state_path(ply_path).string());
}

void load_checkpoint(const std::filesystem::path& ply_path, GaussianCloud& cloud,
                     OptimizerState& state) {
  cloud = import_ply(ply_path);
  std::ifstream in(state_path(ply_path), std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + state_path(ply_path).string());
  char magic[8];
  in.read(magic, sizeof magic);
  if (!in || std::memcmp(magic, kStateMagic, sizeof magic) != 0)
    throw std::runtime_error("unrecognized optimizer state header in " +
                             state_path(ply_path).string());
  size_t n = get_u64(in);
  if (n != cloud.size())
    throw std::runtime_error("optimizer state size does not match the point cloud");
  state.step = static_cast<int64_t>(get_u64(in));
  state.nonfinite_skips = static_cast<int64_t>(get_u64(in));
  cloud.active_sh_degree = static_cast<int>(get_u64(in));
  get_grads(in, state.exp_avg, n);
  get_grads(in, state.exp_avg_sq, n);
  state.screen_grad_accum.resize(n);
  get_doubles(in, state.screen_grad_accum.data(), n);
  std::vector<double> counts(n);
  get_doubles(in, counts.data(), n);
  state.screen_grad_count.assign(n, 0);
  for (size_t i = 0; i < n; ++i) state.screen_grad_count[i] = static_cast<int>(counts[i]);
  if (!in) throw std::runtime_error("truncated optimizer state: " +
                                    state_path(ply_path).string());
}

}  // namespace refsplat
