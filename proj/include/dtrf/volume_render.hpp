#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "dtrf/common.hpp"
#include "dtrf/image.hpp"
#include "dtrf/occupancy.hpp"
#include "dtrf/parallel.hpp"
#include "dtrf/radiance_model.hpp"

namespace dtrf {

// Pinhole camera, Blender convention: camera-to-world transform, camera looks
// along -Z with +X right and +Y up in camera space.
struct Camera {
  std::array<float, 16> c2w{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};  // row-major
  float fov_x = 0.6911112f;  // horizontal field of view, radians
  int width = 0, height = 0;

  float focal() const { return 0.5f * width / std::tan(0.5f * fov_x); }
  Vec3f position() const { return {c2w[3], c2w[7], c2w[11]}; }
};

inline void validate_camera(const Camera& cam) {
  if (!(cam.fov_x > 0 && cam.fov_x < 3.14159265f))
    throw ParseError("camera: fov_x out of (0, pi)");
  if (cam.width <= 0 || cam.height <= 0) throw ParseError("camera: non-positive image dims");
  // rotation block orthonormality
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) {
      float dot = 0;
      for (int r = 0; r < 3; ++r) dot += cam.c2w[r * 4 + a] * cam.c2w[r * 4 + b];
      float want = a == b ? 1.f : 0.f;
      if (std::abs(dot - want) > 1e-4f)
        throw ParseError("camera: rotation block not orthonormal");
    }
}

template <typename T>
struct Ray {
  Vec3<T> origin;
  Vec3<T> dir;  // unit
};

// Ray through the center of pixel (px, py); pixel y grows downward.
template <typename T>
Ray<T> generate_ray(const Camera& cam, int px, int py) {
  T f = T(cam.focal());
  T dx = (T(px) + T(0.5) - T(cam.width) * T(0.5)) / f;
  T dy = -((T(py) + T(0.5) - T(cam.height) * T(0.5)) / f);
  T dz = T(-1);
  Vec3<T> d_world{T(cam.c2w[0]) * dx + T(cam.c2w[1]) * dy + T(cam.c2w[2]) * dz,
                  T(cam.c2w[4]) * dx + T(cam.c2w[5]) * dy + T(cam.c2w[6]) * dz,
                  T(cam.c2w[8]) * dx + T(cam.c2w[9]) * dy + T(cam.c2w[10]) * dz};
  return {{T(cam.c2w[3]), T(cam.c2w[7]), T(cam.c2w[11])}, d_world.normalized()};
}

template <typename T>
std::vector<Ray<T>> generate_rays(const Camera& cam, const std::vector<std::pair<int, int>>& px) {
  std::vector<Ray<T>> out;
  out.reserve(px.size());
  for (auto& [x, y] : px) {
    if (x < 0 || y < 0 || x >= cam.width || y >= cam.height)
      throw std::invalid_argument("generate_rays: pixel outside image");
    out.push_back(generate_ray<T>(cam, x, y));
  }
  return out;
}

// Default sampling density: ~2 samples per voxel along the grid diagonal.
inline float default_step_size(const AABB& box, int gi, int gj, int gk) {
  float grid_diag = std::sqrt(float(gi) * gi + float(gj) * gj + float(gk) * gk);
  return box.diag() / (2.f * grid_diag);
}

// Samples along one ray. The chord [t_n, t_f] is split into N = ceil(len/step)
// equal intervals and one sample is placed at fraction u in each, so the
// per-sample interval delta is exactly the spacing — the quadrature then
// telescopes exactly for homogeneous media.
template <typename T>
struct SampleBatch {
  T t_near = 0, spacing = 0;
  std::vector<T> ts;            // distance along the ray per sample
  std::vector<uint8_t> active;  // 0 = skipped by the occupancy mask
};

template <typename T>
SampleBatch<T> sample_points(const Ray<T>& ray, const AABB& box, T step_size, T u,
                             const OccupancyMask* mask = nullptr) {
  if (!(step_size > T(0))) throw std::invalid_argument("sample_points: step_size must be > 0");
  SampleBatch<T> out;
  T tn, tf;
  if (!intersect_aabb(ray.origin, ray.dir, box, tn, tf)) return out;
  tn = std::max(tn, T(0));  // camera inside the box
  T len = tf - tn;
  if (len <= T(1e-9)) return out;
  int n = int(std::ceil(double(len) / double(step_size)));
  if (n < 1) n = 1;
  T spacing = len / T(n);
  out.t_near = tn;
  out.spacing = spacing;
  out.ts.resize(n);
  out.active.assign(n, 1);
  for (int i = 0; i < n; ++i) {
    T t = tn + (T(i) + u) * spacing;
    out.ts[i] = t;
    if (mask) {
      Vec3<T> p = ray.origin + ray.dir * t;
      if (!mask->occupied(float(p.x), float(p.y), float(p.z))) out.active[i] = 0;
    }
  }
  return out;
}

// ---- quadrature compositing ----

template <typename T>
struct CompositeResult {
  Vec3<T> pixel;
  std::vector<T> weights;
  std::vector<T> transmittance;  // T_i before each sample
  T t_end = 1;                   // transmittance after the last sample
};

template <typename T>
CompositeResult<T> composite(const std::vector<T>& sigmas, const std::vector<Vec3<T>>& colors,
                             const std::vector<T>& deltas, const Vec3<T>& background) {
  size_t n = sigmas.size();
  CompositeResult<T> out;
  out.weights.resize(n);
  out.transmittance.resize(n);
  T trans = T(1);
  Vec3<T> acc{0, 0, 0};
  for (size_t i = 0; i < n; ++i) {
    out.transmittance[i] = trans;
    T alpha = T(1) - std::exp(-sigmas[i] * deltas[i]);
    T w = trans * alpha;
    out.weights[i] = w;
    acc += colors[i] * w;
    trans *= T(1) - alpha;
  }
  out.t_end = trans;
  out.pixel = acc + background * trans;
  return out;
}

// Backward of composite w.r.t. sigmas and colors.
// d pixel / d c_i = w_i; d pixel / d sigma_i = delta_i * (T_{i+1} g.c_i
//  - sum_{j>i} w_j g.c_j - T_end g.bg), accumulated with a suffix scan.
template <typename T>
void composite_backward(const std::vector<T>& sigmas, const std::vector<Vec3<T>>& colors,
                        const std::vector<T>& deltas, const Vec3<T>& background,
                        const CompositeResult<T>& fwd, const Vec3<T>& d_pixel,
                        std::vector<T>& d_sigmas, std::vector<Vec3<T>>& d_colors) {
  size_t n = sigmas.size();
  d_sigmas.assign(n, T(0));
  d_colors.assign(n, Vec3<T>{0, 0, 0});
  T suffix = fwd.t_end * d_pixel.dot(background);
  for (size_t ii = n; ii-- > 0;) {
    T g_dot_c = d_pixel.dot(colors[ii]);
    T alpha = T(1) - std::exp(-sigmas[ii] * deltas[ii]);
    T t_next = fwd.transmittance[ii] * (T(1) - alpha);  // T_{i+1}
    d_sigmas[ii] = deltas[ii] * (t_next * g_dot_c - suffix);
    d_colors[ii] = d_pixel * fwd.weights[ii];
    suffix += fwd.weights[ii] * g_dot_c;
  }
}

// ---- full-frame rendering ----

struct RenderOpts {
  float step_size = 0;  // <= 0: caller must fill from default_step_size
  bool jitter = false;
  uint64_t jitter_seed = 0;
  Vec3f background{1, 1, 1};
  int threads = 1;
};

// Deterministic per-pixel jitter offset (splitmix64 -> [0,1)).
inline double pixel_jitter(uint64_t seed, uint64_t pixel_index) {
  uint64_t z = seed + 0x9e3779b97f4a7c15ull * (pixel_index + 1);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
  z ^= z >> 31;
  return double(z >> 11) * 0x1.0p-53;
}

// Renders a full frame from any field: field(position, direction, time) must
// return FieldSample<T>.
template <typename T, typename Field>
Image render_image(Field&& field, const Camera& cam, T frame_time, const AABB& box,
                   const RenderOpts& opts, const OccupancyMask* mask = nullptr) {
  if (!(opts.step_size > 0))
    throw std::invalid_argument("render_image: step_size must be set");
  Image img(cam.width, cam.height);
  Vec3<T> bg{T(opts.background.x), T(opts.background.y), T(opts.background.z)};

  parallel_for(size_t(cam.height), opts.threads, [&](size_t y0, size_t y1, int) {
    std::vector<T> sigmas;
    std::vector<Vec3<T>> colors;
    std::vector<T> deltas;
    for (size_t y = y0; y < y1; ++y) {
      for (int x = 0; x < cam.width; ++x) {
        Ray<T> ray = generate_ray<T>(cam, x, int(y));
        T u = T(0.5);
        if (opts.jitter)
          u = T(pixel_jitter(opts.jitter_seed, size_t(y) * cam.width + x));
        auto batch = sample_points(ray, box, T(opts.step_size), u, mask);
        sigmas.clear();
        colors.clear();
        deltas.clear();
        for (size_t i = 0; i < batch.ts.size(); ++i) {
          if (!batch.active[i]) continue;
          Vec3<T> p = ray.origin + ray.dir * batch.ts[i];
          FieldSample<T> fsamp = field(p, ray.dir, frame_time);
          sigmas.push_back(fsamp.sigma);
          colors.push_back(fsamp.rgb);
          deltas.push_back(batch.spacing);
        }
        auto res = composite(sigmas, colors, deltas, bg);
        float* px = img.px(x, int(y));
        px[0] = float(res.pixel.x);
        px[1] = float(res.pixel.y);
        px[2] = float(res.pixel.z);
      }
    }
  });
  return img;
}

// Convenience: render a radiance model.
template <typename T>
Image render_model(const RadianceModel<T>& m, const Camera& cam, T frame_time,
                   const RenderOpts& opts_in, const OccupancyMask* mask = nullptr) {
  RenderOpts opts = opts_in;
  if (!(opts.step_size > 0))
    opts.step_size = default_step_size(m.aabb, m.dims.i, m.dims.j, m.dims.k);
  auto field = [&](const Vec3<T>& p, const Vec3<T>& d, T t) {
    return query_field_one(m, p, d, t);
  };
  const AABB& box = mask && !mask->empty ? mask->shrunk : m.aabb;
  return render_image<T>(field, cam, frame_time, box, opts, mask);
}

}  // namespace dtrf
