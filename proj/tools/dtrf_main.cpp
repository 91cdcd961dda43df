#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "CLI11.hpp"
#include "dtrf/dtrf.hpp"

namespace fs = std::filesystem;
using namespace dtrf;

namespace {

Dataset load_any_dataset(const RunConfig& rc) {
  if (!rc.dataset.empty()) return load_dnerf(rc.dataset, rc.background, rc.aabb);
  Dataset ds = make_synthetic(rc.synth);
  ds.background = rc.background;
  ds.aabb = rc.aabb;
  return ds;
}

struct TrainArgs {
  std::string config, out, dataset;
  uint64_t seed = 0;
  int steps = 0, batch = 0;
  double lr = 0;
  std::string decomp, decoder;
  int threads = 0;
};

int cmd_train(const CLI::App& sub, TrainArgs& a) {
  RunConfig rc = load_run_config(a.config);
  if (sub.count("--out")) rc.out_dir = a.out;
  if (sub.count("--dataset")) rc.dataset = a.dataset;
  if (sub.count("--seed")) rc.train.seed = a.seed;
  if (sub.count("--steps")) rc.train.total_steps = a.steps;
  if (sub.count("--batch-size")) rc.train.batch_size = a.batch;
  if (sub.count("--lr")) rc.train.lr = a.lr;
  if (sub.count("--decomposition")) rc.train.kind = detail::parse_decomp(a.decomp);
  if (sub.count("--decoder")) rc.train.decoder = detail::parse_decoder(a.decoder);
  validate_config(rc.train);

  Dataset ds = load_any_dataset(rc);
  fs::create_directories(rc.out_dir);
  std::string ckpt_path = (fs::path(rc.out_dir) / "model.ckpt").string();
  std::string abort_path = (fs::path(rc.out_dir) / "abort.ckpt").string();

  std::ofstream log(fs::path(rc.out_dir) / "train_log.jsonl");
  TrainResult res = train(rc.train, ds, &log, abort_path);
  save_checkpoint(res.model, ckpt_path, &rc.train, res.has_mask ? &res.mask : nullptr);

  nlohmann::json report;
  report["seed"] = rc.train.seed;
  report["config"] = train_config_to_json(rc.train);
  report["dataset"] = rc.dataset.empty() ? std::string("<synthetic>") : rc.dataset;
  report["schedule"] = res.schedule;
  report["train_wall_seconds"] = res.wall_seconds;
  if (!res.loss_curve.empty()) report["loss_final"] = res.loss_curve.back();
  report["checkpoint"] = ckpt_path;
  if (!ds.test.empty()) {
    RenderOpts opts;
    opts.background = ds.background;
    opts.threads = resolve_threads(a.threads);
    EvalReport rep = evaluate(res.model, ds.test, opts,
                              res.has_mask && !res.mask.empty ? &res.mask : nullptr);
    report["eval"] = rep.to_json();
    std::cout << rep.table();
  }
  std::ofstream(fs::path(rc.out_dir) / "report.json") << report.dump(2) << "\n";
  std::cout << "checkpoint: " << ckpt_path << "\n";
  return 0;
}

struct RenderArgs {
  std::string checkpoint, out, dataset, pose_file;
  int pose = -1;
  double time = 0;
  int width = 800, height = 800;
  double fov = 0.6911112;
  double step_size = 0;
  int threads = 0;
};

Camera pose_from_file(const RenderArgs& a) {
  std::ifstream in(a.pose_file);
  if (!in) throw ParseError("cannot open pose file: " + a.pose_file);
  Camera cam;
  for (int i = 0; i < 16; ++i)
    if (!(in >> cam.c2w[i]))
      throw ParseError(a.pose_file + ": expected 16 numbers (row-major camera-to-world)");
  cam.width = a.width;
  cam.height = a.height;
  cam.fov_x = float(a.fov);
  validate_camera(cam);
  return cam;
}

int cmd_render(const CLI::App& sub, RenderArgs& a) {
  CheckpointData ck = load_checkpoint(a.checkpoint);
  Camera cam;
  if (sub.count("--pose-file")) {
    cam = pose_from_file(a);
  } else if (sub.count("--pose")) {
    if (a.dataset.empty())
      throw ParseError("--pose takes a test-frame index and needs --dataset");
    Dataset ds = load_dnerf(a.dataset);
    const auto& frames = ds.test.empty() ? ds.train : ds.test;
    if (a.pose < 0 || size_t(a.pose) >= frames.size())
      throw ParseError("--pose index " + std::to_string(a.pose) + " out of range (have " +
                       std::to_string(frames.size()) + " frames)");
    cam = frames[size_t(a.pose)].camera;
  } else {
    throw ParseError("render needs --pose <test index> with --dataset, or --pose-file");
  }

  double t = a.time;
  if (t < 0 || t > 1) {
    double c = clamp(t, 0.0, 1.0);
    std::fprintf(stderr, "warning: time %g outside [0,1]; clamped to %g\n", t, c);
    t = c;
  }
  RenderOpts opts;
  opts.step_size = float(a.step_size);
  opts.threads = resolve_threads(a.threads);
  Image img = render_model(ck.model, cam, float(t), opts,
                           ck.has_mask && !ck.mask.empty ? &ck.mask : nullptr);
  write_png(a.out, img);
  std::cout << "wrote " << a.out << " (" << img.width << "x" << img.height << ", t=" << t
            << ")\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, dataset, out;
  double step_size = 0;
  int threads = 0;
};

int cmd_eval(EvalArgs& a) {
  CheckpointData ck = load_checkpoint(a.checkpoint);
  Dataset ds = load_dnerf(a.dataset);
  const auto& frames = ds.test.empty() ? ds.train : ds.test;
  if (ds.test.empty())
    std::fprintf(stderr, "warning: dataset has no test split; evaluating train frames\n");
  RenderOpts opts;
  opts.step_size = float(a.step_size);
  opts.background = ds.background;
  opts.threads = resolve_threads(a.threads);
  EvalReport rep =
      evaluate(ck.model, frames, opts, ck.has_mask && !ck.mask.empty ? &ck.mask : nullptr);
  rep.config_echo = {{"checkpoint", a.checkpoint}, {"dataset", a.dataset}};
  std::cout << rep.table();
  if (!a.out.empty()) {
    std::ofstream(a.out) << rep.to_json().dump(2) << "\n";
    std::cout << "report: " << a.out << "\n";
  }
  return 0;
}

int cmd_make_synth(const std::string& spec_path, const std::string& out) {
  SynthSpec spec = parse_synth_spec(spec_path);
  Dataset ds = make_synthetic(spec);
  save_dataset(ds, out);
  std::cout << "wrote " << ds.train.size() << " train / " << ds.test.size() << " test frames ("
            << spec.resolution << "x" << spec.resolution << ") to " << out << "\n";
  return 0;
}

int cmd_inspect(const std::string& path) {
  CheckpointData ck = load_checkpoint(path);
  const auto& m = ck.model;
  std::printf("checkpoint: %s\n", path.c_str());
  std::printf("decomposition: %s   decoder: %s\n", to_string(m.kind),
              to_string(m.decoder));
  std::printf("grid: %d x %d x %d spatial, %d time\n", m.dims.i, m.dims.j, m.dims.k, m.dims.n_t);
  std::printf("ranks: R_sigma=%d  R_c=%d%s\n", m.r_sigma, m.r_c,
              m.kind == Decomp::MM ? " (per axis pairing)" : "");
  std::printf("aabb: [%g %g %g] .. [%g %g %g]\n", m.aabb.lo.x, m.aabb.lo.y, m.aabb.lo.z,
              m.aabb.hi.x, m.aabb.hi.y, m.aabb.hi.z);

  ParamStats geo = m.kind == Decomp::CP ? param_stats(m.geo_cp) : param_stats(m.geo_mm);
  ParamStats app = m.kind == Decomp::CP ? param_stats(m.app_cp) : param_stats(m.app_mm);
  size_t basis_n = m.basis.size();
  size_t mlp_n = m.decoder == DecoderKind::MLP ? m.mlp.param_count() : 0;
  std::printf("parameters:\n");
  std::printf("  geometry factors:   %10zu (%zu bytes)\n", geo.count, geo.bytes);
  std::printf("  appearance factors: %10zu (%zu bytes)\n", app.count, app.bytes);
  std::printf("  basis:              %10zu (%zu bytes)\n", basis_n, 4 * basis_n);
  if (mlp_n) std::printf("  decoder mlp:        %10zu (%zu bytes)\n", mlp_n, 4 * mlp_n);
  std::printf("  total:              %10zu (%zu bytes, %.2f MB)\n", m.param_count(),
              4 * m.param_count(), double(4 * m.param_count()) / (1 << 20));

  std::ifstream in(path, std::ios::binary);
  in.seekg(0, std::ios::end);
  size_t file_size = size_t(in.tellg());
  in.seekg(8);
  uint32_t hlen = 0;
  in.read(reinterpret_cast<char*>(&hlen), 4);
  size_t mask_bytes = ck.has_mask ? ck.mask.cells.size() : 0;
  size_t expect = 12 + hlen + 4 * m.param_count() + mask_bytes;
  std::printf("file: %zu bytes = 12 preamble + %u header + %zu payload%s%s\n", file_size, hlen,
              4 * m.param_count(),
              mask_bytes ? (" + " + std::to_string(mask_bytes) + " mask").c_str() : "",
              file_size == expect ? "  [accounting ok]" : "  [ACCOUNTING MISMATCH]");

  if (ck.has_config) {
    const auto& c = ck.config;
    std::printf("training provenance: %d steps, coarse %d -> fine %d, mask step %d, upsample at",
                c.total_steps, c.initial_res, c.final_res, c.mask_step);
    for (int s : c.upsample_steps) std::printf(" %d", s);
    std::printf("\n  lr %g (decay %g), batch %d, lambda_smooth %g, lambda_l1 %g, seed %llu\n",
                c.lr, c.lr_decay_ratio, c.batch_size, c.lambda_smooth, c.lambda_l1,
                (unsigned long long)c.seed);
  } else {
    std::printf("training provenance: none stored\n");
  }
  if (ck.has_mask) {
    size_t occ = 0;
    for (uint8_t v : ck.mask.cells) occ += v;
    std::printf("occupancy mask: %dx%dx%d cells, %.1f%% occupied%s\n", ck.mask.nx, ck.mask.ny,
                ck.mask.nz, ck.mask.cells.empty() ? 0.0 : 100.0 * double(occ) / double(ck.mask.cells.size()),
                ck.mask.empty ? " (empty)" : "");
  }
  return file_size == expect ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dynamic (x,y,z,t) radiance fields on factorized feature grids"};
  app.require_subcommand(1);

  TrainArgs ta;
  auto* train_cmd = app.add_subcommand("train", "optimize a model on a dataset");
  train_cmd->add_option("--config", ta.config, "run config JSON")->required();
  train_cmd->add_option("--out", ta.out, "output directory (overrides config)");
  train_cmd->add_option("--dataset", ta.dataset, "dataset directory (overrides config)");
  train_cmd->add_option("--seed", ta.seed, "RNG seed (overrides config)");
  train_cmd->add_option("--steps", ta.steps, "total optimization steps");
  train_cmd->add_option("--batch-size", ta.batch, "rays per step");
  train_cmd->add_option("--lr", ta.lr, "base learning rate");
  train_cmd->add_option("--decomposition", ta.decomp, "cp | mm");
  train_cmd->add_option("--decoder", ta.decoder, "mlp | sh");
  train_cmd->add_option("--threads", ta.threads, "render worker threads (0: DTRF_THREADS/auto)");

  RenderArgs ra;
  auto* render_cmd = app.add_subcommand("render", "render one frame from a checkpoint");
  render_cmd->add_option("--checkpoint", ra.checkpoint, "model checkpoint")->required();
  render_cmd->add_option("--time", ra.time, "normalized time in [0,1]");
  render_cmd->add_option("--pose", ra.pose, "test-frame index into --dataset");
  render_cmd->add_option("--dataset", ra.dataset, "dataset directory for --pose");
  render_cmd->add_option("--pose-file", ra.pose_file, "text file: 16 numbers, row-major c2w");
  render_cmd->add_option("--width", ra.width, "image width for --pose-file");
  render_cmd->add_option("--height", ra.height, "image height for --pose-file");
  render_cmd->add_option("--fov", ra.fov, "horizontal fov radians for --pose-file");
  render_cmd->add_option("--step-size", ra.step_size, "ray march step (0: auto)");
  render_cmd->add_option("--threads", ra.threads, "worker threads (0: DTRF_THREADS/auto)");
  render_cmd->add_option("--out", ra.out, "output PNG")->required();

  EvalArgs ea;
  auto* eval_cmd = app.add_subcommand("eval", "PSNR/SSIM over a dataset's test split");
  eval_cmd->add_option("--checkpoint", ea.checkpoint, "model checkpoint")->required();
  eval_cmd->add_option("--dataset", ea.dataset, "dataset directory")->required();
  eval_cmd->add_option("--out", ea.out, "write JSON report here");
  eval_cmd->add_option("--step-size", ea.step_size, "ray march step (0: auto)");
  eval_cmd->add_option("--threads", ea.threads, "worker threads (0: DTRF_THREADS/auto)");

  std::string ms_spec, ms_out;
  auto* synth_cmd = app.add_subcommand("make-synth", "generate a procedural dataset");
  synth_cmd->add_option("--spec", ms_spec, "synthetic scene spec JSON")->required();
  synth_cmd->add_option("--out", ms_out, "output dataset directory")->required();

  std::string in_ckpt;
  auto* inspect_cmd = app.add_subcommand("inspect", "print checkpoint structure and sizes");
  inspect_cmd->add_option("--checkpoint", in_ckpt, "model checkpoint")->required();

  try {
    app.parse(argc, argv);
    if (train_cmd->parsed()) return cmd_train(*train_cmd, ta);
    if (render_cmd->parsed()) return cmd_render(*render_cmd, ra);
    if (eval_cmd->parsed()) return cmd_eval(ea);
    if (synth_cmd->parsed()) return cmd_make_synth(ms_spec, ms_out);
    if (inspect_cmd->parsed()) return cmd_inspect(in_ckpt);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const ParseError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const NanAbort& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
