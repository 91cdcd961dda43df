#pragma once

#include <chrono>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtrf/checkpoint.hpp"
#include "dtrf/config.hpp"
#include "dtrf/dataset.hpp"
#include "dtrf/metrics.hpp"
#include "dtrf/occupancy.hpp"
#include "dtrf/optim.hpp"
#include "dtrf/radiance_model.hpp"
#include "dtrf/regularize.hpp"
#include "dtrf/volume_render.hpp"

namespace dtrf {

// ---- resolution schedule ----

// Per-axis node counts for a target voxel count, proportional to box extent so
// voxel size stays isotropic after the box shrinks.
inline GridDims dims_for_voxels(double n_target, const AABB& box, int n_t) {
  Vec3f e = box.extent();
  double s = std::cbrt(n_target / (double(e.x) * double(e.y) * double(e.z)));
  auto nodes = [&](float ext) { return std::max(2, int(std::lround(double(ext) * s))); };
  return {nodes(e.x), nodes(e.y), nodes(e.z), n_t};
}

// Voxel counts interpolated geometrically from initial_res^3 to final_res^3
// across the schedule entries; entry j of J lands on ratio^((j+1)/J).
inline std::vector<double> voxel_schedule(int initial_res, int final_res, int n_steps) {
  std::vector<double> out;
  double n0 = std::pow(double(initial_res), 3), nf = std::pow(double(final_res), 3);
  for (int j = 1; j <= n_steps; ++j) out.push_back(n0 * std::pow(nf / n0, double(j) / n_steps));
  return out;
}

// ---- model-level resolution changes ----

template <typename T>
void model_upsample(RadianceModel<T>& m, const GridDims& nd) {
  if (m.kind == Decomp::CP) {
    m.geo_cp = upsample(m.geo_cp, nd);
    m.app_cp = upsample(m.app_cp, nd);
  } else {
    m.geo_mm = upsample(m.geo_mm, nd);
    m.app_mm = upsample(m.app_mm, nd);
  }
  m.dims = nd;
}

// Crops to inclusive node ranges and moves the box to the node positions, so
// the represented field restricted to the new box is unchanged.
template <typename T>
void model_crop(RadianceModel<T>& m, const int lo[3], const int hi[3]) {
  const int old_nodes[3] = {m.dims.i, m.dims.j, m.dims.k};
  if (m.kind == Decomp::CP) {
    m.geo_cp = crop(m.geo_cp, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]);
    m.app_cp = crop(m.app_cp, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]);
    m.dims = m.geo_cp.dims;
  } else {
    m.geo_mm = crop(m.geo_mm, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]);
    m.app_mm = crop(m.app_mm, lo[0], hi[0], lo[1], hi[1], lo[2], hi[2]);
    m.dims = m.geo_mm.dims;
  }
  AABB nb = m.aabb;
  float* nlo = &nb.lo.x;
  float* nhi = &nb.hi.x;
  const float* blo = &m.aabb.lo.x;
  const float* bhi = &m.aabb.hi.x;
  for (int a = 0; a < 3; ++a) {
    float span = bhi[a] - blo[a];
    nlo[a] = blo[a] + float(lo[a]) / float(old_nodes[a] - 1) * span;
    nhi[a] = blo[a] + float(hi[a]) / float(old_nodes[a] - 1) * span;
  }
  m.aabb = nb;
}

// ---- the training loss on an explicit ray batch ----

struct RayEntry {
  int frame = 0;
  int px = 0, py = 0;
  double u = 0.5;  // jitter fraction within each sampling interval
};

struct StepLosses {
  double photo = 0, smooth = 0, l1 = 0;
  double total = 0;
};

// Photometric term: mean over rays of the squared L2 color error. Samples with
// compositing weight below weight_threshold keep the background color instead
// of decoding (their density still receives gradient); the backward pass
// differentiates exactly the forward computed here.
template <typename T>
double photo_loss(const RadianceModel<T>& m, const std::vector<Frame>& frames,
                  const std::vector<RayEntry>& rays, double step_size, double weight_threshold,
                  const Vec3f& background, const OccupancyMask* mask, ModelGrads<T>* grads) {
  const int w = m.app_width();
  const Vec3<T> bg{T(background.x), T(background.y), T(background.z)};
  const double photo_scale = rays.empty() ? 0.0 : 1.0 / double(rays.size());

  std::vector<Coord4<T>> coords;
  std::vector<T> raws, sigmas, deltas;
  std::vector<Vec3<T>> colors;
  std::vector<int> sig_index;
  std::vector<T> svecs;
  std::vector<DecodeCtx<T>> ctxs;
  std::vector<T> dscratch(density_scratch_size(m)), ascratch(appearance_scratch_size(m));
  std::vector<T> feat(kFeatureDim), dfeat(kFeatureDim);
  std::vector<T> dsig;
  std::vector<Vec3<T>> dcol;

  double loss = 0;
  for (const auto& re : rays) {
    const Frame& fr = frames.at(size_t(re.frame));
    Ray<T> ray = generate_ray<T>(fr.camera, re.px, re.py);
    auto batch = sample_points(ray, m.aabb, T(step_size), T(re.u), mask);

    coords.clear();
    raws.clear();
    sigmas.clear();
    deltas.clear();
    colors.clear();
    sig_index.clear();
    svecs.clear();
    ctxs.clear();
    for (size_t i = 0; i < batch.ts.size(); ++i) {
      if (!batch.active[i]) continue;
      Vec3<T> p = ray.origin + ray.dir * batch.ts[i];
      coords.push_back(m.world_to_grid(p, T(fr.time)));
      T raw = raw_density_at(m, coords.back(), dscratch.data());
      raws.push_back(raw);
      sigmas.push_back(raw > T(0) ? raw : T(0));
      deltas.push_back(batch.spacing);
    }

    // transmittance pass picks the samples worth decoding
    T trans = T(1);
    colors.assign(sigmas.size(), bg);
    for (size_t i = 0; i < sigmas.size(); ++i) {
      T alpha = T(1) - std::exp(-sigmas[i] * deltas[i]);
      T wgt = trans * alpha;
      trans *= T(1) - alpha;
      if (double(wgt) > weight_threshold) {
        size_t base = svecs.size();
        svecs.resize(base + size_t(w));
        appearance_feature_at(m, coords[i], svecs.data() + base, feat.data(), ascratch.data());
        ctxs.emplace_back();
        colors[i] = decode_color(m, feat.data(), ray.dir, &ctxs.back());
        sig_index.push_back(int(i));
      }
    }

    auto res = composite(sigmas, colors, deltas, bg);
    const float* gt = fr.image.px(re.px, re.py);
    Vec3<T> diff = res.pixel - Vec3<T>{T(gt[0]), T(gt[1]), T(gt[2])};
    loss += photo_scale * double(diff.dot(diff));

    if (grads) {
      Vec3<T> d_pixel = diff * T(2.0 * photo_scale);
      composite_backward(sigmas, colors, deltas, bg, res, d_pixel, dsig, dcol);
      for (size_t k = 0; k < sig_index.size(); ++k) {
        int i = sig_index[k];
        decode_backward(m, ctxs[k], dcol[size_t(i)], dfeat.data(), *grads);
        appearance_backward(m, coords[size_t(i)], svecs.data() + k * size_t(w), dfeat.data(),
                            *grads);
      }
      for (size_t i = 0; i < raws.size(); ++i)
        density_backward(m, coords[i], raws[i], dsig[i], *grads);
    }
  }
  return loss;
}

// Full loss: photometric + lambda_smooth * smoothing + lambda_l1 * L1 (mean
// |entry| over the union of both grids' factor arrays). Zeroes and fills
// grads when given.
template <typename T>
StepLosses total_loss(const RadianceModel<T>& m, const std::vector<Frame>& frames,
                      const std::vector<RayEntry>& rays, const TrainConfig& cfg,
                      double step_size, const Vec3f& background, const OccupancyMask* mask,
                      ModelGrads<T>* grads) {
  if (grads) grads->zero();
  StepLosses out;
  out.photo = photo_loss(m, frames, rays, step_size, cfg.weight_threshold, background, mask,
                         grads);

  SmoothingSpec spec{cfg.smooth_window, cfg.kernel_sigma, cfg.smooth_include_center};
  if (m.kind == Decomp::CP) {
    out.smooth = smoothing_loss(m.geo_cp, spec, grads ? &grads->geo_cp : nullptr,
                                cfg.lambda_smooth) +
                 smoothing_loss(m.app_cp, spec, grads ? &grads->app_cp : nullptr,
                                cfg.lambda_smooth);
    auto [sg, cg] = l1_sum_count(m.geo_cp);
    auto [sa, ca] = l1_sum_count(m.app_cp);
    out.l1 = (sg + sa) / (cg + ca);
    if (grads && cfg.lambda_l1 > 0) {
      l1_sign_grad(m.geo_cp, grads->geo_cp, cfg.lambda_l1 / (cg + ca));
      l1_sign_grad(m.app_cp, grads->app_cp, cfg.lambda_l1 / (cg + ca));
    }
  } else {
    out.smooth = smoothing_loss(m.geo_mm, spec, grads ? &grads->geo_mm : nullptr,
                                cfg.lambda_smooth) +
                 smoothing_loss(m.app_mm, spec, grads ? &grads->app_mm : nullptr,
                                cfg.lambda_smooth);
    auto [sg, cg] = l1_sum_count(m.geo_mm);
    auto [sa, ca] = l1_sum_count(m.app_mm);
    out.l1 = (sg + sa) / (cg + ca);
    if (grads && cfg.lambda_l1 > 0) {
      l1_sign_grad(m.geo_mm, grads->geo_mm, cfg.lambda_l1 / (cg + ca));
      l1_sign_grad(m.app_mm, grads->app_mm, cfg.lambda_l1 / (cg + ca));
    }
  }
  out.total = out.photo + cfg.lambda_smooth * out.smooth + cfg.lambda_l1 * out.l1;
  return out;
}

// ---- the full optimization ----

struct TrainResult {
  RadianceModel<float> model;
  OccupancyMask mask;
  bool has_mask = false;
  std::vector<std::string> log_lines;  // line-delimited JSON records
  std::vector<double> loss_curve;      // total loss per step
  nlohmann::json schedule;             // applied resolution/mask events
  double wall_seconds = 0;
};

namespace detail {

// Rebuild optimizer state after a factor-array resize: moments carry over for
// groups whose shape survived (basis, decoder, CP time vectors), reset
// elsewhere.
template <typename T>
void rebuild_adam(std::vector<ParamGroup<T>>& groups, AdamState<T>& state,
                  RadianceModel<T>& m, ModelGrads<T>& g, double factor_lr_mult) {
  auto old_groups = groups;
  AdamState<T> old_state = std::move(state);
  g.init_like(m);  // grad buffers must match the resized parameter arrays
  groups = model_param_groups(m, g, factor_lr_mult);
  state.init(groups);
  for (size_t i = 0; i < groups.size(); ++i)
    for (size_t j = 0; j < old_groups.size(); ++j)
      if (old_groups[j].name == groups[i].name &&
          old_state.groups[j].m.size() == groups[i].size) {
        state.groups[i] = std::move(old_state.groups[j]);
        break;
      }
}

inline std::string losses_record(int64_t step, const StepLosses& l, double lr,
                                 double val_psnr /* NaN: none */) {
  nlohmann::json j;
  j["step"] = step;
  j["l_photo"] = l.photo;
  j["l_smooth"] = l.smooth;
  j["l_l1"] = l.l1;
  j["lr"] = lr;
  if (std::isfinite(val_psnr)) j["val_psnr"] = val_psnr;
  return j.dump();
}

}  // namespace detail

inline RayEntry draw_ray(Rng& rng, const std::vector<Frame>& frames) {
  RayEntry e;
  e.frame = int(rng.uniform_idx(frames.size()));
  const Frame& fr = frames[size_t(e.frame)];
  e.px = int(rng.uniform_idx(size_t(fr.image.width)));
  e.py = int(rng.uniform_idx(size_t(fr.image.height)));
  e.u = rng.uniform();
  return e;
}

// Runs the optimization. On a non-finite loss or gradient the last good model
// is written to abort_checkpoint (when nonempty) and NanAbort propagates.
inline TrainResult train(const TrainConfig& cfg_in, const Dataset& ds,
                         std::ostream* log_stream = nullptr,
                         const std::string& abort_checkpoint = "") {
  TrainConfig cfg = cfg_in;
  validate_config(cfg);
  if (ds.train.empty()) throw std::invalid_argument("train: dataset has no training frames");

  const int n_t = cfg.resolved_n_t(int(ds.train.size()));
  auto t_start = std::chrono::steady_clock::now();

  TrainResult res;
  ModelSpec spec;
  spec.kind = cfg.kind;
  spec.decoder = cfg.decoder;
  spec.aabb = ds.aabb;
  spec.r_sigma = cfg.r_sigma;
  spec.r_c = cfg.resolved_r_c();
  spec.geo_scale = spec.app_scale = float(cfg.init_scale);
  spec.dims = dims_for_voxels(std::pow(double(cfg.initial_res), 3), ds.aabb, n_t);
  res.model = make_model<float>(spec, cfg.seed);
  res.schedule["initial_dims"] = {spec.dims.i, spec.dims.j, spec.dims.k, spec.dims.n_t};
  res.schedule["n_t_rule"] = n_t;
  res.schedule["events"] = nlohmann::json::array();

  auto& m = res.model;
  ModelGrads<float> grads;
  grads.init_like(m);
  auto groups = model_param_groups(m, grads, cfg.factor_lr_mult);
  AdamState<float> adam;
  adam.init(groups);
  Rng rng(cfg.seed + 0x5eedU);

  auto targets = voxel_schedule(cfg.initial_res, cfg.final_res, int(cfg.upsample_steps.size()));
  auto current_step_size = [&] {
    return cfg.step_size > 0
               ? cfg.step_size
               : double(default_step_size(m.aabb, m.dims.i, m.dims.j, m.dims.k));
  };

  RadianceModel<float> last_good = m;
  auto abort_save = [&](const char* why, int64_t step) {
    if (!abort_checkpoint.empty())
      save_checkpoint(last_good, abort_checkpoint, &cfg,
                      res.has_mask ? &res.mask : nullptr);
    throw NanAbort(std::string(why) + " at step " + std::to_string(step) +
                   (abort_checkpoint.empty() ? "" : "; last good model saved to " +
                                                        abort_checkpoint));
  };

  double val_psnr = std::numeric_limits<double>::quiet_NaN();
  for (int64_t step = 0; step < cfg.total_steps; ++step) {
    // schedule events happen before the step that carries their index
    if (step == cfg.mask_step && step > 0) {
      OccupancyMask mask =
          build_occupancy_mask(m, m.dims.i - 1, m.dims.j - 1, m.dims.k - 1, cfg.mask_threshold,
                               n_t);
      nlohmann::json ev{{"step", step}, {"event", "mask"}, {"empty", mask.empty}};
      if (!mask.empty) {
        // cells c0..c1 span nodes c0..c1+1; shrunk bounds are node-aligned
        const float lo_f[3] = {mask.shrunk.lo.x, mask.shrunk.lo.y, mask.shrunk.lo.z};
        const float hi_f[3] = {mask.shrunk.hi.x, mask.shrunk.hi.y, mask.shrunk.hi.z};
        const float blo[3] = {m.aabb.lo.x, m.aabb.lo.y, m.aabb.lo.z};
        const float ext[3] = {m.aabb.extent().x, m.aabb.extent().y, m.aabb.extent().z};
        const int cells[3] = {m.dims.i - 1, m.dims.j - 1, m.dims.k - 1};
        int lo[3], hi[3];
        bool whole = true;
        for (int a = 0; a < 3; ++a) {
          lo[a] = int(std::lround((lo_f[a] - blo[a]) / ext[a] * cells[a]));
          hi[a] = int(std::lround((hi_f[a] - blo[a]) / ext[a] * cells[a]));
          lo[a] = std::max(0, std::min(lo[a], cells[a] - 1));
          hi[a] = std::max(lo[a] + 1, std::min(hi[a], cells[a]));
          whole = whole && lo[a] == 0 && hi[a] == cells[a];
        }
        if (!whole) {
          model_crop(m, lo, hi);
          detail::rebuild_adam(groups, adam, m, grads, cfg.factor_lr_mult);
        }
        ev["cropped_dims"] = {m.dims.i, m.dims.j, m.dims.k, m.dims.n_t};
      } else {
        if (log_stream) *log_stream << "# occupancy mask empty, box kept\n";
      }
      res.mask = std::move(mask);
      res.has_mask = true;
      res.schedule["events"].push_back(ev);
      last_good = m;
    }
    for (size_t j = 0; j < cfg.upsample_steps.size(); ++j) {
      if (step != cfg.upsample_steps[j] || step == 0) continue;
      GridDims nd = dims_for_voxels(targets[j], m.aabb, n_t);
      // refinement only: never shrink below the current resolution
      nd.i = std::max(nd.i, m.dims.i);
      nd.j = std::max(nd.j, m.dims.j);
      nd.k = std::max(nd.k, m.dims.k);
      if (nd.i != m.dims.i || nd.j != m.dims.j || nd.k != m.dims.k) {
        model_upsample(m, nd);
        detail::rebuild_adam(groups, adam, m, grads, cfg.factor_lr_mult);
      }
      res.schedule["events"].push_back(
          {{"step", step}, {"event", "upsample"}, {"dims", {nd.i, nd.j, nd.k, nd.n_t}}});
      last_good = m;
    }

    std::vector<RayEntry> rays(size_t(cfg.batch_size));
    for (auto& r : rays) r = draw_ray(rng, ds.train);
    StepLosses losses = total_loss(m, ds.train, rays, cfg, current_step_size(), ds.background,
                                   res.has_mask && !res.mask.empty ? &res.mask : nullptr,
                                   &grads);
    if (!std::isfinite(losses.total)) abort_save("non-finite loss", step);

    double lr = lr_schedule(step, cfg.total_steps, cfg.lr, cfg.lr_decay_ratio);
    try {
      adam_step(groups, adam, lr);
    } catch (const NanAbort&) {
      abort_save("non-finite gradient", step);
    }
    res.loss_curve.push_back(losses.total);

    bool log_now = cfg.log_interval > 0 &&
                   (step % cfg.log_interval == 0 || step + 1 == cfg.total_steps);
    bool val_now = cfg.val_interval > 0 && !ds.test.empty() &&
                   (step % cfg.val_interval == 0 || step + 1 == cfg.total_steps);
    if (val_now) {
      RenderOpts opts;
      opts.step_size = float(current_step_size());
      opts.background = ds.background;
      const Frame& fr = ds.test.front();
      Image pred = render_model(m, fr.camera, float(fr.time), opts,
                                res.has_mask && !res.mask.empty ? &res.mask : nullptr);
      val_psnr = psnr(pred, fr.image);
    }
    if (log_now) {
      std::string line = detail::losses_record(step, losses, lr,
                                               val_now ? val_psnr
                                                       : std::numeric_limits<double>::quiet_NaN());
      res.log_lines.push_back(line);
      if (log_stream) *log_stream << line << "\n";
      last_good = m;
    }
  }

  res.wall_seconds =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t_start).count();
  return res;
}

}  // namespace dtrf
