#pragma once

#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

#include "dtrf/common.hpp"
#include "dtrf/sh.hpp"
#include "dtrf/tensor_factors.hpp"

namespace dtrf {

enum class Decomp { CP, MM };
enum class DecoderKind { MLP, SH };

inline const char* to_string(Decomp d) { return d == Decomp::CP ? "cp" : "mm"; }
inline const char* to_string(DecoderKind d) { return d == DecoderKind::MLP ? "mlp" : "sh"; }

inline constexpr int kFeatureDim = 27;  // P: appearance feature width
inline constexpr int kDirEncDim = 12;   // sin/cos of 2^0 d and 2^1 d per axis
inline constexpr int kMlpHidden = 128;
inline constexpr int kMlpInDim = kFeatureDim + kDirEncDim;

template <typename T>
struct MlpParams {
  std::vector<T> w1, b1, w2, b2;  // w1: hidden x in, w2: 3 x hidden, row-major

  size_t param_count() const { return w1.size() + b1.size() + w2.size() + b2.size(); }

  void init(Rng& rng) {
    w1.resize(size_t(kMlpHidden) * kMlpInDim);
    b1.assign(kMlpHidden, T(0));
    w2.resize(size_t(3) * kMlpHidden);
    b2.assign(3, T(0));
    double s1 = std::sqrt(6.0 / (kMlpInDim + kMlpHidden));
    for (auto& w : w1) w = T(rng.uniform(-s1, s1));
    double s2 = std::sqrt(6.0 / (kMlpHidden + 3));
    for (auto& w : w2) w = T(rng.uniform(-s2, s2));
  }
  void resize_zero() {
    w1.assign(size_t(kMlpHidden) * kMlpInDim, T(0));
    b1.assign(kMlpHidden, T(0));
    w2.assign(size_t(3) * kMlpHidden, T(0));
    b2.assign(3, T(0));
  }
};

// Geometry grid + appearance grid + basis matrix + color decoder + scene box.
template <typename T>
struct RadianceModel {
  Decomp kind = Decomp::MM;
  DecoderKind decoder = DecoderKind::MLP;
  GridDims dims;
  int r_sigma = 0;  // per-pairing component count for MM, rank for CP
  int r_c = 0;
  CpFactors<T> geo_cp, app_cp;
  MmFactors<T> geo_mm, app_mm;
  std::vector<T> basis;  // kFeatureDim x app_width, row-major
  MlpParams<T> mlp;
  AABB aabb;

  int app_width() const { return kind == Decomp::MM ? 3 * r_c : r_c; }

  size_t factor_param_count() const {
    return kind == Decomp::CP ? geo_cp.param_count() + app_cp.param_count()
                              : geo_mm.param_count() + app_mm.param_count();
  }
  size_t param_count() const {
    size_t n = factor_param_count() + basis.size();
    if (decoder == DecoderKind::MLP) n += mlp.param_count();
    return n;
  }

  Coord4<T> world_to_grid(const Vec3<T>& p, T time01) const {
    Vec3<T> lo{T(aabb.lo.x), T(aabb.lo.y), T(aabb.lo.z)};
    Vec3<T> hi{T(aabb.hi.x), T(aabb.hi.y), T(aabb.hi.z)};
    auto axis = [](T v, T a, T b, int dim) {
      T u = clamp((v - a) / (b - a), T(0), T(1));
      return u * T(dim - 1);
    };
    Coord4<T> c;
    c.x = axis(p.x, lo.x, hi.x, dims.i);
    c.y = axis(p.y, lo.y, hi.y, dims.j);
    c.z = axis(p.z, lo.z, hi.z, dims.k);
    c.t = dims.n_t == 1 ? T(0) : clamp(time01, T(0), T(1)) * T(dims.n_t - 1);
    return c;
  }
};

struct ModelSpec {
  Decomp kind = Decomp::MM;
  DecoderKind decoder = DecoderKind::MLP;
  GridDims dims;
  int r_sigma = 4;
  int r_c = 12;          // defaults to 3 * r_sigma at the config layer
  double geo_scale = 0.3;
  double app_scale = 0.3;
  AABB aabb;
};

template <typename T>
RadianceModel<T> make_model(const ModelSpec& spec, uint64_t seed) {
  validate_dims(spec.dims);
  if (spec.r_sigma < 1 || spec.r_c < 1) throw std::invalid_argument("model: ranks must be >= 1");
  RadianceModel<T> m;
  m.kind = spec.kind;
  m.decoder = spec.decoder;
  m.dims = spec.dims;
  m.r_sigma = spec.r_sigma;
  m.r_c = spec.r_c;
  m.aabb = spec.aabb;
  Rng rng(seed);
  if (spec.kind == Decomp::CP) {
    m.geo_cp = init_cp<T>(spec.dims, spec.r_sigma, spec.geo_scale, rng.eng());
    m.app_cp = init_cp<T>(spec.dims, spec.r_c, spec.app_scale, rng.eng());
  } else {
    m.geo_mm = init_mm<T>(spec.dims, spec.r_sigma, spec.r_sigma, spec.r_sigma, spec.geo_scale,
                          rng.eng());
    m.app_mm = init_mm<T>(spec.dims, spec.r_c, spec.r_c, spec.r_c, spec.app_scale, rng.eng());
  }
  int w = m.app_width();
  m.basis.resize(size_t(kFeatureDim) * w);
  double bs = 1.0 / std::sqrt(double(w));
  for (auto& e : m.basis) e = T(rng.uniform(-bs, bs));
  if (spec.decoder == DecoderKind::MLP) m.mlp.init(rng);
  return m;
}

// Gradient buffers mirroring a model's parameter shapes.
template <typename T>
struct ModelGrads {
  CpFactors<T> geo_cp, app_cp;
  MmFactors<T> geo_mm, app_mm;
  std::vector<T> basis;
  MlpParams<T> mlp;

  void init_like(const RadianceModel<T>& m) {
    if (m.kind == Decomp::CP) {
      geo_cp.dims = m.dims;
      geo_cp.rank = m.geo_cp.rank;
      geo_cp.resize_zero();
      app_cp.dims = m.dims;
      app_cp.rank = m.app_cp.rank;
      app_cp.resize_zero();
    } else {
      geo_mm.dims = m.dims;
      geo_mm.r1 = m.geo_mm.r1;
      geo_mm.r2 = m.geo_mm.r2;
      geo_mm.r3 = m.geo_mm.r3;
      geo_mm.resize_zero();
      app_mm.dims = m.dims;
      app_mm.r1 = m.app_mm.r1;
      app_mm.r2 = m.app_mm.r2;
      app_mm.r3 = m.app_mm.r3;
      app_mm.resize_zero();
    }
    basis.assign(m.basis.size(), T(0));
    if (m.decoder == DecoderKind::MLP) mlp.resize_zero();
  }
  void zero() {
    auto z = [](auto& v) { std::fill(v.begin(), v.end(), typename std::decay_t<decltype(v)>::value_type(0)); };
    z(geo_cp.x); z(geo_cp.y); z(geo_cp.z); z(geo_cp.t);
    z(app_cp.x); z(app_cp.y); z(app_cp.z); z(app_cp.t);
    z(geo_mm.xy); z(geo_mm.zt); z(geo_mm.xz); z(geo_mm.yt); z(geo_mm.yz); z(geo_mm.xt);
    z(app_mm.xy); z(app_mm.zt); z(app_mm.xz); z(app_mm.yt); z(app_mm.yz); z(app_mm.xt);
    z(basis);
    z(mlp.w1); z(mlp.b1); z(mlp.w2); z(mlp.b2);
  }
};

// ---- density ----

// Raw (pre-activation) geometry sample at a grid coordinate.
template <typename T>
inline T raw_density_at(const RadianceModel<T>& m, const Coord4<T>& c, T* scratch) {
  if (m.kind == Decomp::CP) {
    int R = m.r_sigma;
    T* comp = scratch;          // R values
    T* tmp = scratch + R;       // 4R values
    component_scalars(m.geo_cp, c, comp, tmp);
    T s = 0;
    for (int r = 0; r < R; ++r) s += comp[r];
    return s;
  }
  int n = m.geo_mm.total_components();
  T* comp = scratch;
  T* tmp = scratch + n;
  component_scalars(m.geo_mm, c, comp, tmp);
  T s = 0;
  for (int r = 0; r < n; ++r) s += comp[r];
  return s;
}

template <typename T>
inline size_t density_scratch_size(const RadianceModel<T>& m) {
  int n = m.kind == Decomp::CP ? m.r_sigma : 3 * m.r_sigma;
  return size_t(5) * n + 8;
}

// sigma = max(0, raw); zero outside the box.
template <typename T>
T query_density_one(const RadianceModel<T>& m, const Vec3<T>& p, T time01) {
  if (!m.aabb.contains(Vec3f(float(p.x), float(p.y), float(p.z)))) return T(0);
  std::vector<T> scratch(density_scratch_size(m));
  T raw = raw_density_at(m, m.world_to_grid(p, time01), scratch.data());
  return raw > T(0) ? raw : T(0);
}

template <typename T>
std::vector<T> query_density(const RadianceModel<T>& m, const std::vector<Vec3<T>>& pos,
                             const std::vector<T>& times) {
  if (pos.size() != times.size())
    throw std::invalid_argument("query_density: positions/times size mismatch");
  std::vector<T> out(pos.size());
  for (size_t b = 0; b < pos.size(); ++b) out[b] = query_density_one(m, pos[b], times[b]);
  return out;
}

// Backward through max(0, raw) and the factorized sample.
template <typename T>
inline void density_backward(const RadianceModel<T>& m, const Coord4<T>& c, T raw, T d_sigma,
                             ModelGrads<T>& g) {
  if (raw <= T(0)) return;
  if (m.kind == Decomp::CP) {
    std::vector<T> up(m.r_sigma, d_sigma);
    accumulate_scalar_grads(m.geo_cp, c, up.data(), g.geo_cp);
  } else {
    std::vector<T> up(m.geo_mm.total_components(), d_sigma);
    accumulate_scalar_grads(m.geo_mm, c, up.data(), g.geo_mm);
  }
}

// ---- appearance ----

template <typename T>
inline size_t appearance_scratch_size(const RadianceModel<T>& m) {
  return size_t(5) * m.app_width() + 8;
}

// Stacked per-component scalars s and feature = B s.
template <typename T>
inline void appearance_feature_at(const RadianceModel<T>& m, const Coord4<T>& c, T* s_out,
                                  T* feat_out, T* scratch) {
  int w = m.app_width();
  if (m.kind == Decomp::CP)
    component_scalars(m.app_cp, c, s_out, scratch);
  else
    component_scalars(m.app_mm, c, s_out, scratch);
  for (int p = 0; p < kFeatureDim; ++p) {
    const T* row = m.basis.data() + size_t(p) * w;
    T acc = 0;
    for (int q = 0; q < w; ++q) acc += row[q] * s_out[q];
    feat_out[p] = acc;
  }
}

template <typename T>
std::vector<T> query_appearance_feature(const RadianceModel<T>& m, const std::vector<Vec3<T>>& pos,
                                        const std::vector<T>& times) {
  if (pos.size() != times.size())
    throw std::invalid_argument("query_appearance_feature: positions/times size mismatch");
  int w = m.app_width();
  std::vector<T> out(pos.size() * kFeatureDim);
  std::vector<T> s(w), scratch(appearance_scratch_size(m));
  for (size_t b = 0; b < pos.size(); ++b) {
    appearance_feature_at(m, m.world_to_grid(pos[b], times[b]), s.data(),
                          out.data() + b * kFeatureDim, scratch.data());
  }
  return out;
}

// d(feature)/d(B, appearance factors) given upstream d_feat.
template <typename T>
inline void appearance_backward(const RadianceModel<T>& m, const Coord4<T>& c, const T* s,
                                const T* d_feat, ModelGrads<T>& g) {
  int w = m.app_width();
  // dB[p,q] += d_feat[p] * s[q];  ds[q] = sum_p B[p,q] d_feat[p]
  std::vector<T> ds(w, T(0));
  for (int p = 0; p < kFeatureDim; ++p) {
    const T* brow = m.basis.data() + size_t(p) * w;
    T* grow = g.basis.data() + size_t(p) * w;
    T df = d_feat[p];
    for (int q = 0; q < w; ++q) {
      grow[q] += df * s[q];
      ds[q] += brow[q] * df;
    }
  }
  if (m.kind == Decomp::CP)
    accumulate_scalar_grads(m.app_cp, c, ds.data(), g.app_cp);
  else
    accumulate_scalar_grads(m.app_mm, c, ds.data(), g.app_mm);
}

// ---- color decoding ----

template <typename T>
inline void dir_encode(const Vec3<T>& d, T* out) {
  const T v[3] = {d.x, d.y, d.z};
  int i = 0;
  for (int band = 0; band < 2; ++band) {
    T f = T(1 << band);
    for (int a = 0; a < 3; ++a) {
      out[i++] = std::sin(f * v[a]);
      out[i++] = std::cos(f * v[a]);
    }
  }
}

template <typename T>
inline T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

inline void check_unit_direction(double n2) {
  if (std::abs(std::sqrt(n2) - 1.0) > 1e-4)
    throw std::invalid_argument("decode_color: direction must be unit length");
}

// Saved activations for one decode, enough to run the backward pass.
template <typename T>
struct DecodeCtx {
  std::vector<T> input;   // MLP: feature ++ encoded dir (39)
  std::vector<T> hidden;  // MLP: post-ReLU hidden (128)
  Vec3<T> rgb;            // post-sigmoid output
  std::array<T, kShCoeffs> sh;  // SH basis values
};

template <typename T>
Vec3<T> decode_color(const RadianceModel<T>& m, const T* feature, const Vec3<T>& dir,
                     DecodeCtx<T>* ctx = nullptr) {
  check_unit_direction(double(dir.dot(dir)));
  if (m.decoder == DecoderKind::SH) {
    std::array<T, kShCoeffs> Y;
    sh_basis(dir, Y.data());
    Vec3<T> rgb;
    T* out = &rgb.x;
    for (int ch = 0; ch < 3; ++ch) {
      T acc = 0;
      for (int i = 0; i < kShCoeffs; ++i) acc += feature[ch * kShCoeffs + i] * Y[i];
      out[ch] = sigmoid(acc);
    }
    if (ctx) {
      ctx->sh = Y;
      ctx->rgb = rgb;
    }
    return rgb;
  }
  // MLP: [feature ++ dir_encode] -> 128 ReLU -> 3 sigmoid
  std::vector<T> in(kMlpInDim);
  std::copy(feature, feature + kFeatureDim, in.begin());
  dir_encode(dir, in.data() + kFeatureDim);
  std::vector<T> h(kMlpHidden);
  for (int u = 0; u < kMlpHidden; ++u) {
    const T* row = m.mlp.w1.data() + size_t(u) * kMlpInDim;
    T acc = m.mlp.b1[u];
    for (int q = 0; q < kMlpInDim; ++q) acc += row[q] * in[q];
    h[u] = acc > T(0) ? acc : T(0);
  }
  Vec3<T> rgb;
  T* out = &rgb.x;
  for (int ch = 0; ch < 3; ++ch) {
    const T* row = m.mlp.w2.data() + size_t(ch) * kMlpHidden;
    T acc = m.mlp.b2[ch];
    for (int u = 0; u < kMlpHidden; ++u) acc += row[u] * h[u];
    out[ch] = sigmoid(acc);
  }
  if (ctx) {
    ctx->input = std::move(in);
    ctx->hidden = std::move(h);
    ctx->rgb = rgb;
  }
  return rgb;
}

// Backward of decode_color. Returns d_feature; accumulates decoder grads.
template <typename T>
inline void decode_backward(const RadianceModel<T>& m, const DecodeCtx<T>& ctx,
                            const Vec3<T>& d_rgb, T* d_feature, ModelGrads<T>& g) {
  const T* drgb = &d_rgb.x;
  const T* rgb = &ctx.rgb.x;
  T dpre[3];
  for (int ch = 0; ch < 3; ++ch) dpre[ch] = drgb[ch] * rgb[ch] * (T(1) - rgb[ch]);

  if (m.decoder == DecoderKind::SH) {
    for (int ch = 0; ch < 3; ++ch)
      for (int i = 0; i < kShCoeffs; ++i) d_feature[ch * kShCoeffs + i] = dpre[ch] * ctx.sh[i];
    return;
  }
  std::vector<T> dh(kMlpHidden, T(0));
  for (int ch = 0; ch < 3; ++ch) {
    const T* row = m.mlp.w2.data() + size_t(ch) * kMlpHidden;
    T* grow = g.mlp.w2.data() + size_t(ch) * kMlpHidden;
    for (int u = 0; u < kMlpHidden; ++u) {
      grow[u] += dpre[ch] * ctx.hidden[u];
      dh[u] += row[u] * dpre[ch];
    }
    g.mlp.b2[ch] += dpre[ch];
  }
  for (int p = 0; p < kFeatureDim; ++p) d_feature[p] = T(0);
  for (int u = 0; u < kMlpHidden; ++u) {
    if (ctx.hidden[u] <= T(0)) continue;  // ReLU gate (hidden stores post-activation)
    T du = dh[u];
    const T* row = m.mlp.w1.data() + size_t(u) * kMlpInDim;
    T* grow = g.mlp.w1.data() + size_t(u) * kMlpInDim;
    for (int q = 0; q < kMlpInDim; ++q) grow[q] += du * ctx.input[q];
    g.mlp.b1[u] += du;
    for (int p = 0; p < kFeatureDim; ++p) d_feature[p] += row[p] * du;
  }
}

// ---- combined field query ----

template <typename T>
struct FieldSample {
  T sigma;
  Vec3<T> rgb;
};

template <typename T>
FieldSample<T> query_field_one(const RadianceModel<T>& m, const Vec3<T>& p, const Vec3<T>& dir,
                               T time01) {
  FieldSample<T> out;
  out.sigma = query_density_one(m, p, time01);
  if (!m.aabb.contains(Vec3f(float(p.x), float(p.y), float(p.z)))) {
    out.rgb = {T(0.5), T(0.5), T(0.5)};
    return out;
  }
  int w = m.app_width();
  std::vector<T> s(w), feat(kFeatureDim), scratch(appearance_scratch_size(m));
  appearance_feature_at(m, m.world_to_grid(p, time01), s.data(), feat.data(), scratch.data());
  out.rgb = decode_color(m, feat.data(), dir, (DecodeCtx<T>*)nullptr);
  return out;
}

}  // namespace dtrf
