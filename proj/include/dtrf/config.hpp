#pragma once

#include <cmath>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtrf/common.hpp"
#include "dtrf/dataset.hpp"
#include "dtrf/radiance_model.hpp"

namespace dtrf {

struct TrainConfig {
  Decomp kind = Decomp::MM;
  DecoderKind decoder = DecoderKind::MLP;
  int r_sigma = 4;
  int r_c = 0;  // 0: derived as 3 * r_sigma
  int initial_res = 64;
  int final_res = 150;
  std::vector<int> upsample_steps{2000, 3000, 4000, 5500, 7000};
  int mask_step = 2000;
  int total_steps = 10000;
  int batch_size = 4096;
  double lambda_smooth = 1e-2;
  double lambda_l1 = 1e-4;
  int smooth_window = 3;      // S: window size, odd
  double kernel_sigma = 0.5;  // sigma_k of the temporal Gaussian kernel
  bool smooth_include_center = false;
  double nt_factor = 0.25;  // N_t = round(nt_factor * train frames), min 2
  int n_t = 0;              // 0: apply the N_t rule
  double lr = 1e-3;
  double lr_decay_ratio = 0.1;  // lr(total) = lr * ratio
  double factor_lr_mult = 20.0;
  double init_scale = 0.3;
  double mask_threshold = 1e-3;
  double weight_threshold = 1e-4;  // skip color decode below this sample weight
  double step_size = 0;            // 0: ~2 samples per voxel diagonal rule
  int log_interval = 100;
  int val_interval = 500;
  uint64_t seed = 0;

  int resolved_r_c() const { return r_c > 0 ? r_c : 3 * r_sigma; }
  int resolved_n_t(int n_train_frames) const {
    if (n_t > 0) return n_t;
    return std::max(2, int(std::lround(nt_factor * n_train_frames)));
  }
};

inline void validate_config(const TrainConfig& c) {
  if (c.r_sigma < 1) throw ParseError("config: r_sigma must be >= 1");
  if (c.r_c < 0) throw ParseError("config: r_c must be >= 0");
  if (c.initial_res < 2 || c.final_res < c.initial_res)
    throw ParseError("config: need 2 <= initial_res <= final_res");
  for (size_t i = 0; i < c.upsample_steps.size(); ++i) {
    if (i && c.upsample_steps[i] <= c.upsample_steps[i - 1])
      throw ParseError("config: upsample_steps must be strictly ascending");
    if (c.upsample_steps[i] >= c.total_steps && c.total_steps > 0)
      throw ParseError("config: upsample_steps must be < total_steps");
  }
  if (c.total_steps < 0) throw ParseError("config: total_steps must be >= 0");
  if (c.batch_size < 1) throw ParseError("config: batch_size must be >= 1");
  if (c.lambda_smooth < 0 || c.lambda_l1 < 0)
    throw ParseError("config: regularizer weights must be >= 0");
  if (c.smooth_window < 1 || c.smooth_window % 2 == 0)
    throw ParseError("config: smooth_window must be odd and >= 1");
  if (!(c.kernel_sigma > 0)) throw ParseError("config: kernel_sigma must be > 0");
  if (!(c.nt_factor > 0)) throw ParseError("config: nt_factor must be > 0");
  if (!(c.lr > 0)) throw ParseError("config: lr must be > 0");
  if (!(c.lr_decay_ratio > 0)) throw ParseError("config: lr_decay_ratio must be > 0");
  if (!(c.init_scale >= 0)) throw ParseError("config: init_scale must be >= 0");
}

// Full run description: training settings plus data source and output paths.
struct RunConfig {
  TrainConfig train;
  std::string dataset;  // transforms_*.json directory; empty: use synth
  SynthSpec synth;
  std::string out_dir = "out";
  Vec3f background{1, 1, 1};
  AABB aabb{{-1.5f, -1.5f, -1.5f}, {1.5f, 1.5f, 1.5f}};
};

namespace detail {

inline Decomp parse_decomp(const std::string& s) {
  if (s == "cp") return Decomp::CP;
  if (s == "mm") return Decomp::MM;
  throw ParseError("config: decomposition must be \"cp\" or \"mm\", got \"" + s + "\"");
}

inline DecoderKind parse_decoder(const std::string& s) {
  if (s == "mlp") return DecoderKind::MLP;
  if (s == "sh") return DecoderKind::SH;
  throw ParseError("config: decoder must be \"mlp\" or \"sh\", got \"" + s + "\"");
}

inline bool train_config_key(TrainConfig& c, const std::string& key, const nlohmann::json& val) {
  if (key == "decomposition")
    c.kind = parse_decomp(val.get<std::string>());
  else if (key == "decoder")
    c.decoder = parse_decoder(val.get<std::string>());
  else if (key == "r_sigma")
    c.r_sigma = val.get<int>();
  else if (key == "r_c")
    c.r_c = val.get<int>();
  else if (key == "initial_res")
    c.initial_res = val.get<int>();
  else if (key == "final_res")
    c.final_res = val.get<int>();
  else if (key == "upsample_steps")
    c.upsample_steps = val.get<std::vector<int>>();
  else if (key == "mask_step")
    c.mask_step = val.get<int>();
  else if (key == "total_steps")
    c.total_steps = val.get<int>();
  else if (key == "batch_size")
    c.batch_size = val.get<int>();
  else if (key == "lambda_smooth")
    c.lambda_smooth = val.get<double>();
  else if (key == "lambda_l1")
    c.lambda_l1 = val.get<double>();
  else if (key == "smooth_window")
    c.smooth_window = val.get<int>();
  else if (key == "kernel_sigma")
    c.kernel_sigma = val.get<double>();
  else if (key == "smooth_include_center")
    c.smooth_include_center = val.get<bool>();
  else if (key == "nt_factor")
    c.nt_factor = val.get<double>();
  else if (key == "n_t")
    c.n_t = val.get<int>();
  else if (key == "lr")
    c.lr = val.get<double>();
  else if (key == "lr_decay_ratio")
    c.lr_decay_ratio = val.get<double>();
  else if (key == "factor_lr_mult")
    c.factor_lr_mult = val.get<double>();
  else if (key == "init_scale")
    c.init_scale = val.get<double>();
  else if (key == "mask_threshold")
    c.mask_threshold = val.get<double>();
  else if (key == "weight_threshold")
    c.weight_threshold = val.get<double>();
  else if (key == "step_size")
    c.step_size = val.get<double>();
  else if (key == "log_interval")
    c.log_interval = val.get<int>();
  else if (key == "val_interval")
    c.val_interval = val.get<int>();
  else if (key == "seed")
    c.seed = val.get<uint64_t>();
  else
    return false;
  return true;
}

inline SynthSpec parse_synth_json(const nlohmann::json& j, const std::string& where) {
  SynthSpec s;
  for (auto& [key, val] : j.items()) {
    if (key == "kind")
      s.kind = val.get<std::string>();
    else if (key == "n_train")
      s.n_train = val.get<int>();
    else if (key == "n_test")
      s.n_test = val.get<int>();
    else if (key == "resolution")
      s.resolution = val.get<int>();
    else if (key == "amplitude")
      s.amplitude = val.get<double>();
    else if (key == "seed")
      s.seed = val.get<uint64_t>();
    else
      throw ParseError(where + ": unknown synth key \"" + key + "\"");
  }
  return s;
}

}  // namespace detail

inline RunConfig parse_run_config_json(const nlohmann::json& j, const std::string& where) {
  RunConfig rc;
  for (auto& [key, val] : j.items()) {
    if (detail::train_config_key(rc.train, key, val)) continue;
    if (key == "dataset")
      rc.dataset = val.get<std::string>();
    else if (key == "synth")
      rc.synth = detail::parse_synth_json(val, where);
    else if (key == "out_dir")
      rc.out_dir = val.get<std::string>();
    else if (key == "background") {
      std::string b = val.get<std::string>();
      if (b == "white")
        rc.background = {1, 1, 1};
      else if (b == "black")
        rc.background = {0, 0, 0};
      else
        throw ParseError(where + ": background must be \"white\" or \"black\"");
    } else if (key == "aabb") {
      auto v = val.get<std::vector<float>>();
      if (v.size() != 6) throw ParseError(where + ": aabb needs 6 numbers [lo xyz, hi xyz]");
      rc.aabb = {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
    } else
      throw ParseError(where + ": unknown key \"" + key + "\"");
  }
  validate_config(rc.train);
  return rc;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open config: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(path + ": malformed JSON: " + e.what());
  }
  if (!j.is_object()) throw ParseError(path + ": config must be a JSON object");
  return parse_run_config_json(j, path);
}

inline nlohmann::json train_config_to_json(const TrainConfig& c) {
  nlohmann::json j;
  j["decomposition"] = to_string(c.kind);
  j["decoder"] = to_string(c.decoder);
  j["r_sigma"] = c.r_sigma;
  j["r_c"] = c.r_c;
  j["initial_res"] = c.initial_res;
  j["final_res"] = c.final_res;
  j["upsample_steps"] = c.upsample_steps;
  j["mask_step"] = c.mask_step;
  j["total_steps"] = c.total_steps;
  j["batch_size"] = c.batch_size;
  j["lambda_smooth"] = c.lambda_smooth;
  j["lambda_l1"] = c.lambda_l1;
  j["smooth_window"] = c.smooth_window;
  j["kernel_sigma"] = c.kernel_sigma;
  j["smooth_include_center"] = c.smooth_include_center;
  j["nt_factor"] = c.nt_factor;
  j["n_t"] = c.n_t;
  j["lr"] = c.lr;
  j["lr_decay_ratio"] = c.lr_decay_ratio;
  j["factor_lr_mult"] = c.factor_lr_mult;
  j["init_scale"] = c.init_scale;
  j["mask_threshold"] = c.mask_threshold;
  j["weight_threshold"] = c.weight_threshold;
  j["step_size"] = c.step_size;
  j["log_interval"] = c.log_interval;
  j["val_interval"] = c.val_interval;
  j["seed"] = c.seed;
  return j;
}

inline TrainConfig train_config_from_json(const nlohmann::json& j, const std::string& where) {
  TrainConfig c;
  for (auto& [key, val] : j.items())
    if (!detail::train_config_key(c, key, val))
      throw ParseError(where + ": unknown key \"" + key + "\"");
  return c;
}

}  // namespace dtrf
