#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

#include "dtrf/common.hpp"

namespace dtrf {

// Voxel counts per axis of the 4D feature grid. n_t = 1 means static.
struct GridDims {
  int i = 2, j = 2, k = 2, n_t = 1;

  bool operator==(const GridDims&) const = default;
  size_t voxels() const { return size_t(i) * j * k * n_t; }
};

inline void validate_dims(const GridDims& d) {
  if (d.i < 2 || d.j < 2 || d.k < 2 || d.n_t < 1)
    throw std::invalid_argument("grid dims: spatial axes need >= 2 voxels, n_t >= 1");
}

// Continuous grid-space coordinate: x,y,z in [0, dim-1], t in [0, n_t-1].
template <typename T>
struct Coord4 {
  T x{}, y{}, z{}, t{};
};

// Dense 4D tensor, oracle/debug use only (production paths stay factorized).
template <typename T>
struct DenseGrid4 {
  GridDims dims;
  std::vector<T> v;  // v[((a*J + b)*K + c)*N + d]

  T& at(int a, int b, int c, int d) {
    return v[size_t((size_t(a) * dims.j + b) * dims.k + c) * dims.n_t + d];
  }
  T at(int a, int b, int c, int d) const {
    return v[size_t((size_t(a) * dims.j + b) * dims.k + c) * dims.n_t + d];
  }
};

// CP factor set: per component r, one vector per axis. Layout keeps the
// component index innermost: x[i * rank + r].
template <typename T>
struct CpFactors {
  GridDims dims;
  int rank = 0;
  std::vector<T> x, y, z, t;

  size_t param_count() const { return x.size() + y.size() + z.size() + t.size(); }
  void resize_zero() {
    x.assign(size_t(dims.i) * rank, T(0));
    y.assign(size_t(dims.j) * rank, T(0));
    z.assign(size_t(dims.k) * rank, T(0));
    t.assign(size_t(dims.n_t) * rank, T(0));
  }
};

// MM factor set: three families of matrix pairs covering complementary axis
// pairs — (X,Y)(Z,T), (X,Z)(Y,T), (Y,Z)(X,T) — with per-family component
// counts r1, r2, r3. Matrix layout: xy[(ix*J + iy)*r1 + r]; the spatial axis is
// the row of every spatial-time matrix (zt rows = Z, cols = T).
template <typename T>
struct MmFactors {
  GridDims dims;
  int r1 = 0, r2 = 0, r3 = 0;
  std::vector<T> xy, zt, xz, yt, yz, xt;

  int total_components() const { return r1 + r2 + r3; }
  size_t param_count() const {
    return xy.size() + zt.size() + xz.size() + yt.size() + yz.size() + xt.size();
  }
  void resize_zero() {
    xy.assign(size_t(dims.i) * dims.j * r1, T(0));
    zt.assign(size_t(dims.k) * dims.n_t * r1, T(0));
    xz.assign(size_t(dims.i) * dims.k * r2, T(0));
    yt.assign(size_t(dims.j) * dims.n_t * r2, T(0));
    yz.assign(size_t(dims.j) * dims.k * r3, T(0));
    xt.assign(size_t(dims.i) * dims.n_t * r3, T(0));
  }
};

struct ParamStats {
  size_t count = 0;
  size_t bytes = 0;  // at 4 bytes per parameter
};

template <typename T>
inline ParamStats param_stats(const CpFactors<T>& f) {
  return {f.param_count(), 4 * f.param_count()};
}
template <typename T>
inline ParamStats param_stats(const MmFactors<T>& f) {
  return {f.param_count(), 4 * f.param_count()};
}

// ---- initialization ----
// Entries are uniform in [-m, m] with m chosen so a reconstructed grid entry
// has magnitude O(scale) independent of rank: each entry of the grid is a sum
// of `rank` products of #factors entries, so m = (scale * rank^(-1/2 per
// product split)) ^ (1/#factors).

template <typename T>
CpFactors<T> init_cp(const GridDims& dims, int rank, double scale, uint64_t seed) {
  validate_dims(dims);
  if (rank < 1) throw std::invalid_argument("init_cp: rank must be >= 1");
  if (scale < 0) throw std::invalid_argument("init_cp: scale must be >= 0");
  CpFactors<T> f;
  f.dims = dims;
  f.rank = rank;
  double a = std::pow(double(rank), -0.25);
  double m = std::pow(scale * a, 0.25);  // 4 factor entries per product
  Rng rng(seed);
  auto fill = [&](std::vector<T>& v, size_t n) {
    v.resize(n);
    for (auto& e : v) e = T(rng.uniform(-m, m));
  };
  fill(f.x, size_t(dims.i) * rank);
  fill(f.y, size_t(dims.j) * rank);
  fill(f.z, size_t(dims.k) * rank);
  fill(f.t, size_t(dims.n_t) * rank);
  return f;
}

template <typename T>
MmFactors<T> init_mm(const GridDims& dims, int r1, int r2, int r3, double scale, uint64_t seed) {
  validate_dims(dims);
  if (r1 < 0 || r2 < 0 || r3 < 0) throw std::invalid_argument("init_mm: negative rank");
  if (scale < 0) throw std::invalid_argument("init_mm: scale must be >= 0");
  MmFactors<T> f;
  f.dims = dims;
  f.r1 = r1;
  f.r2 = r2;
  f.r3 = r3;
  int total = r1 + r2 + r3;
  if (total == 0) {
    f.resize_zero();
    return f;
  }
  double a = std::pow(double(total), -0.5);
  double m = std::pow(scale * a, 0.5);  // 2 factor entries per product
  Rng rng(seed);
  auto fill = [&](std::vector<T>& v, size_t n) {
    v.resize(n);
    for (auto& e : v) e = T(rng.uniform(-m, m));
  };
  fill(f.xy, size_t(dims.i) * dims.j * r1);
  fill(f.zt, size_t(dims.k) * dims.n_t * r1);
  fill(f.xz, size_t(dims.i) * dims.k * r2);
  fill(f.yt, size_t(dims.j) * dims.n_t * r2);
  fill(f.yz, size_t(dims.j) * dims.k * r3);
  fill(f.xt, size_t(dims.i) * dims.n_t * r3);
  return f;
}

// ---- dense reconstruction (oracle path) ----

inline constexpr size_t kDenseCap = 10'000'000;

template <typename T>
DenseGrid4<T> reconstruct_dense(const CpFactors<T>& f, size_t cap = kDenseCap) {
  if (f.dims.voxels() > cap) throw std::length_error("reconstruct_dense: element cap exceeded");
  DenseGrid4<T> g{f.dims, std::vector<T>(f.dims.voxels(), T(0))};
  int R = f.rank;
  for (int a = 0; a < f.dims.i; ++a)
    for (int b = 0; b < f.dims.j; ++b)
      for (int c = 0; c < f.dims.k; ++c)
        for (int d = 0; d < f.dims.n_t; ++d) {
          T s = 0;
          for (int r = 0; r < R; ++r)
            s += f.x[size_t(a) * R + r] * f.y[size_t(b) * R + r] * f.z[size_t(c) * R + r] *
                 f.t[size_t(d) * R + r];
          g.at(a, b, c, d) = s;
        }
  return g;
}

template <typename T>
DenseGrid4<T> reconstruct_dense(const MmFactors<T>& f, size_t cap = kDenseCap) {
  if (f.dims.voxels() > cap) throw std::length_error("reconstruct_dense: element cap exceeded");
  DenseGrid4<T> g{f.dims, std::vector<T>(f.dims.voxels(), T(0))};
  const auto& D = f.dims;
  for (int a = 0; a < D.i; ++a)
    for (int b = 0; b < D.j; ++b)
      for (int c = 0; c < D.k; ++c)
        for (int d = 0; d < D.n_t; ++d) {
          T s = 0;
          for (int r = 0; r < f.r1; ++r)
            s += f.xy[size_t(a * D.j + b) * f.r1 + r] * f.zt[size_t(c * D.n_t + d) * f.r1 + r];
          for (int r = 0; r < f.r2; ++r)
            s += f.xz[size_t(a * D.k + c) * f.r2 + r] * f.yt[size_t(b * D.n_t + d) * f.r2 + r];
          for (int r = 0; r < f.r3; ++r)
            s += f.yz[size_t(b * D.k + c) * f.r3 + r] * f.xt[size_t(a * D.n_t + d) * f.r3 + r];
          g.at(a, b, c, d) = s;
        }
  return g;
}

// ---- sampling ----
// Axis coordinate -> cell base index + fraction. dim == 1 collapses the axis.
template <typename T>
inline void axis_split(T c, int dim, int& i0, T& frac) {
  if (dim == 1) {
    i0 = 0;
    frac = 0;
    return;
  }
  if (c < T(0) || c > T(dim - 1)) throw std::invalid_argument("sample: coordinate out of bounds");
  i0 = int(c);
  if (i0 > dim - 2) i0 = dim - 2;
  frac = c - T(i0);
}

namespace detail {

// Linear interp of all components of a vector factor at one axis coordinate.
template <typename T>
inline void lerp_rows(const std::vector<T>& v, int rank, int i0, T f, T* out) {
  const T* row0 = v.data() + size_t(i0) * rank;
  const T* row1 = row0 + rank;
  T g = T(1) - f;
  for (int r = 0; r < rank; ++r) out[r] = g * row0[r] + f * row1[r];
}

// Bilinear interp of all components of a matrix factor (rows x cols).
template <typename T>
inline void bilerp_rows(const std::vector<T>& m, int cols, int rank, int i0, T fi, int j0, T fj,
                        T* out) {
  const T* r00 = m.data() + size_t(i0 * cols + j0) * rank;
  const T* r01 = (cols == 1) ? r00 : r00 + rank;
  const T* r10 = m.data() + size_t((i0 + 1) * cols + j0) * rank;
  const T* r11 = (cols == 1) ? r10 : r10 + rank;
  T gi = T(1) - fi, gj = T(1) - fj;
  T w00 = gi * gj, w01 = gi * fj, w10 = fi * gj, w11 = fi * fj;
  for (int r = 0; r < rank; ++r)
    out[r] = w00 * r00[r] + w01 * r01[r] + w10 * r10[r] + w11 * r11[r];
}

// Handles single-row matrices (spatial dim must be >= 2, so only cols can be 1
// — but keep both guards for the n_t == 1 static case).
template <typename T>
inline void bilerp_guard(const std::vector<T>& m, int rows, int cols, int rank, int i0, T fi,
                         int j0, T fj, T* out) {
  (void)rows;
  bilerp_rows(m, cols, rank, i0, fi, j0, fj, out);
}

}  // namespace detail

// Per-component interpolated scalars at one coordinate. `out` must hold
// rank (CP) or r1+r2+r3 (MM) values. This is the workhorse shared by sample(),
// the gradient path, and the appearance stacking of the radiance model.
template <typename T>
inline void component_scalars(const CpFactors<T>& f, const Coord4<T>& c, T* out,
                              T* scratch /* 4*rank */) {
  int R = f.rank;
  int xi, yi, zi, ti;
  T fx, fy, fz, ft;
  axis_split(c.x, f.dims.i, xi, fx);
  axis_split(c.y, f.dims.j, yi, fy);
  axis_split(c.z, f.dims.k, zi, fz);
  axis_split(c.t, f.dims.n_t, ti, ft);
  T* vx = scratch;
  T* vy = scratch + R;
  T* vz = scratch + 2 * R;
  T* vt = scratch + 3 * R;
  detail::lerp_rows(f.x, R, xi, fx, vx);
  detail::lerp_rows(f.y, R, yi, fy, vy);
  detail::lerp_rows(f.z, R, zi, fz, vz);
  if (f.dims.n_t == 1) {
    for (int r = 0; r < R; ++r) vt[r] = f.t[r];
  } else {
    detail::lerp_rows(f.t, R, ti, ft, vt);
  }
  for (int r = 0; r < R; ++r) out[r] = vx[r] * vy[r] * vz[r] * vt[r];
}

template <typename T>
inline void component_scalars(const MmFactors<T>& f, const Coord4<T>& c, T* out,
                              T* scratch /* 2*(r1+r2+r3) */) {
  const auto& D = f.dims;
  int xi, yi, zi, ti;
  T fx, fy, fz, ft;
  axis_split(c.x, D.i, xi, fx);
  axis_split(c.y, D.j, yi, fy);
  axis_split(c.z, D.k, zi, fz);
  axis_split(c.t, D.n_t, ti, ft);
  T* pa = scratch;
  int off = 0;
  if (f.r1) {
    detail::bilerp_rows(f.xy, D.j, f.r1, xi, fx, yi, fy, pa);
    detail::bilerp_guard(f.zt, D.k, D.n_t, f.r1, zi, fz, ti, ft, pa + f.r1);
    for (int r = 0; r < f.r1; ++r) out[off + r] = pa[r] * pa[f.r1 + r];
    off += f.r1;
  }
  if (f.r2) {
    detail::bilerp_rows(f.xz, D.k, f.r2, xi, fx, zi, fz, pa);
    detail::bilerp_guard(f.yt, D.j, D.n_t, f.r2, yi, fy, ti, ft, pa + f.r2);
    for (int r = 0; r < f.r2; ++r) out[off + r] = pa[r] * pa[f.r2 + r];
    off += f.r2;
  }
  if (f.r3) {
    detail::bilerp_rows(f.yz, D.k, f.r3, yi, fy, zi, fz, pa);
    detail::bilerp_guard(f.xt, D.i, D.n_t, f.r3, xi, fx, ti, ft, pa + f.r3);
    for (int r = 0; r < f.r3; ++r) out[off + r] = pa[r] * pa[f.r3 + r];
  }
}

template <typename F, typename T>
inline T sample_one(const F& f, const Coord4<T>& c) {
  int n;
  if constexpr (requires { f.rank; })
    n = f.rank;
  else
    n = f.total_components();
  std::vector<T> comp(n), scratch(4 * size_t(std::max(n, 1)));
  component_scalars(f, c, comp.data(), scratch.data());
  T s = 0;
  for (int r = 0; r < n; ++r) s += comp[r];
  return s;
}

template <typename F, typename T>
std::vector<T> sample(const F& f, const std::vector<Coord4<T>>& coords) {
  std::vector<T> out(coords.size());
  for (size_t i = 0; i < coords.size(); ++i) out[i] = sample_one(f, coords[i]);
  return out;
}

// ---- gradients ----
// Accumulates d(sum_r upstream_r * s_r)/d(factor entries) into `grad`, which
// must have the same shapes as `f`. Per-component upstreams let callers chain
// through the basis matrix; sample_grad() below is the uniform-upstream case.

template <typename T>
inline void accumulate_scalar_grads(const CpFactors<T>& f, const Coord4<T>& c,
                                    const T* upstream, CpFactors<T>& grad) {
  int R = f.rank;
  int xi, yi, zi, ti;
  T fx, fy, fz, ft;
  axis_split(c.x, f.dims.i, xi, fx);
  axis_split(c.y, f.dims.j, yi, fy);
  axis_split(c.z, f.dims.k, zi, fz);
  axis_split(c.t, f.dims.n_t, ti, ft);
  std::vector<T> buf(4 * size_t(R));
  T* vx = buf.data();
  T* vy = vx + R;
  T* vz = vy + R;
  T* vt = vz + R;
  detail::lerp_rows(f.x, R, xi, fx, vx);
  detail::lerp_rows(f.y, R, yi, fy, vy);
  detail::lerp_rows(f.z, R, zi, fz, vz);
  if (f.dims.n_t == 1)
    for (int r = 0; r < R; ++r) vt[r] = f.t[r];
  else
    detail::lerp_rows(f.t, R, ti, ft, vt);

  // d s_r / d vx[r] = vy vz vt, then split onto the two nodes by interp weight
  auto spread = [R](std::vector<T>& g, int i0, T frac, const T* contrib, bool collapse) {
    T* row0 = g.data() + size_t(i0) * R;
    if (collapse) {
      for (int r = 0; r < R; ++r) row0[r] += contrib[r];
      return;
    }
    T* row1 = row0 + R;
    T g0 = T(1) - frac;
    for (int r = 0; r < R; ++r) {
      row0[r] += g0 * contrib[r];
      row1[r] += frac * contrib[r];
    }
  };
  std::vector<T> contrib(R);
  for (int r = 0; r < R; ++r) contrib[r] = upstream[r] * vy[r] * vz[r] * vt[r];
  spread(grad.x, xi, fx, contrib.data(), false);
  for (int r = 0; r < R; ++r) contrib[r] = upstream[r] * vx[r] * vz[r] * vt[r];
  spread(grad.y, yi, fy, contrib.data(), false);
  for (int r = 0; r < R; ++r) contrib[r] = upstream[r] * vx[r] * vy[r] * vt[r];
  spread(grad.z, zi, fz, contrib.data(), false);
  for (int r = 0; r < R; ++r) contrib[r] = upstream[r] * vx[r] * vy[r] * vz[r];
  spread(grad.t, ti, ft, contrib.data(), f.dims.n_t == 1);
}

namespace detail {

template <typename T>
inline void bilerp_backward(std::vector<T>& grad, int cols, int rank, int i0, T fi, int j0, T fj,
                            const T* contrib, bool collapse_col) {
  T gi = T(1) - fi, gj = T(1) - fj;
  T* r00 = grad.data() + size_t(i0 * cols + j0) * rank;
  T* r10 = grad.data() + size_t((i0 + 1) * cols + j0) * rank;
  if (collapse_col) {
    for (int r = 0; r < rank; ++r) {
      r00[r] += gi * contrib[r];
      r10[r] += fi * contrib[r];
    }
    return;
  }
  T* r01 = r00 + rank;
  T* r11 = r10 + rank;
  for (int r = 0; r < rank; ++r) {
    r00[r] += gi * gj * contrib[r];
    r01[r] += gi * fj * contrib[r];
    r10[r] += fi * gj * contrib[r];
    r11[r] += fi * fj * contrib[r];
  }
}

}  // namespace detail

template <typename T>
inline void accumulate_scalar_grads(const MmFactors<T>& f, const Coord4<T>& c,
                                    const T* upstream, MmFactors<T>& grad) {
  const auto& D = f.dims;
  int xi, yi, zi, ti;
  T fx, fy, fz, ft;
  axis_split(c.x, D.i, xi, fx);
  axis_split(c.y, D.j, yi, fy);
  axis_split(c.z, D.k, zi, fz);
  axis_split(c.t, D.n_t, ti, ft);
  bool tcol = D.n_t == 1;

  int maxr = std::max(std::max(f.r1, f.r2), f.r3);
  std::vector<T> va(maxr), vb(maxr), contrib(maxr);
  const T* up = upstream;

  if (f.r1) {
    detail::bilerp_rows(f.xy, D.j, f.r1, xi, fx, yi, fy, va.data());
    detail::bilerp_guard(f.zt, D.k, D.n_t, f.r1, zi, fz, ti, ft, vb.data());
    for (int r = 0; r < f.r1; ++r) contrib[r] = up[r] * vb[r];
    detail::bilerp_backward(grad.xy, D.j, f.r1, xi, fx, yi, fy, contrib.data(), false);
    for (int r = 0; r < f.r1; ++r) contrib[r] = up[r] * va[r];
    detail::bilerp_backward(grad.zt, D.n_t, f.r1, zi, fz, ti, ft, contrib.data(), tcol);
    up += f.r1;
  }
  if (f.r2) {
    detail::bilerp_rows(f.xz, D.k, f.r2, xi, fx, zi, fz, va.data());
    detail::bilerp_guard(f.yt, D.j, D.n_t, f.r2, yi, fy, ti, ft, vb.data());
    for (int r = 0; r < f.r2; ++r) contrib[r] = up[r] * vb[r];
    detail::bilerp_backward(grad.xz, D.k, f.r2, xi, fx, zi, fz, contrib.data(), false);
    for (int r = 0; r < f.r2; ++r) contrib[r] = up[r] * va[r];
    detail::bilerp_backward(grad.yt, D.n_t, f.r2, yi, fy, ti, ft, contrib.data(), tcol);
    up += f.r2;
  }
  if (f.r3) {
    detail::bilerp_rows(f.yz, D.k, f.r3, yi, fy, zi, fz, va.data());
    detail::bilerp_guard(f.xt, D.i, D.n_t, f.r3, xi, fx, ti, ft, vb.data());
    for (int r = 0; r < f.r3; ++r) contrib[r] = up[r] * vb[r];
    detail::bilerp_backward(grad.yz, D.k, f.r3, yi, fy, zi, fz, contrib.data(), false);
    for (int r = 0; r < f.r3; ++r) contrib[r] = up[r] * va[r];
    detail::bilerp_backward(grad.xt, D.n_t, f.r3, xi, fx, ti, ft, contrib.data(), tcol);
  }
}

// Public batched form: gradients of sum_b upstream_b * sample(f, coords_b).
template <typename F, typename T>
F sample_grad(const F& f, const std::vector<Coord4<T>>& coords, const std::vector<T>& upstream) {
  if (coords.size() != upstream.size())
    throw std::invalid_argument("sample_grad: coords/upstream size mismatch");
  F grad;
  grad.dims = f.dims;
  if constexpr (requires { f.rank; })
    grad.rank = f.rank;
  else {
    grad.r1 = f.r1;
    grad.r2 = f.r2;
    grad.r3 = f.r3;
  }
  grad.resize_zero();
  int n;
  if constexpr (requires { f.rank; })
    n = f.rank;
  else
    n = f.total_components();
  std::vector<T> uni(n);
  for (size_t b = 0; b < coords.size(); ++b) {
    for (int r = 0; r < n; ++r) uni[r] = upstream[b];
    accumulate_scalar_grads(f, coords[b], uni.data(), grad);
  }
  return grad;
}

// ---- upsampling ----
// Endpoint-aligned linear resampling: new node i' reads old coordinate
// i'*(I-1)/(I'-1), so constant stays constant and affine stays affine.

namespace detail {

template <typename T>
std::vector<T> resample_rows(const std::vector<T>& v, int old_rows, int new_rows, int row_width) {
  if (new_rows == old_rows) return v;
  std::vector<T> out(size_t(new_rows) * row_width);
  for (int i = 0; i < new_rows; ++i) {
    double c = double(i) * (old_rows - 1) / (new_rows - 1);
    int i0 = int(c);
    if (i0 > old_rows - 2) i0 = old_rows - 2;
    T f = T(c - i0);
    const T* r0 = v.data() + size_t(i0) * row_width;
    const T* r1 = r0 + row_width;
    T* dst = out.data() + size_t(i) * row_width;
    for (int w = 0; w < row_width; ++w) dst[w] = (T(1) - f) * r0[w] + f * r1[w];
  }
  return out;
}

// Resample the column axis of a (rows x cols x rank) matrix.
template <typename T>
std::vector<T> resample_cols(const std::vector<T>& v, int rows, int old_cols, int new_cols,
                             int rank) {
  if (new_cols == old_cols) return v;
  std::vector<T> out(size_t(rows) * new_cols * rank);
  for (int i = 0; i < rows; ++i) {
    const T* src = v.data() + size_t(i) * old_cols * rank;
    T* dst = out.data() + size_t(i) * new_cols * rank;
    for (int j = 0; j < new_cols; ++j) {
      double c = double(j) * (old_cols - 1) / (new_cols - 1);
      int j0 = int(c);
      if (j0 > old_cols - 2) j0 = old_cols - 2;
      T f = T(c - j0);
      const T* c0 = src + size_t(j0) * rank;
      const T* c1 = c0 + rank;
      for (int r = 0; r < rank; ++r) dst[j * rank + r] = (T(1) - f) * c0[r] + f * c1[r];
    }
  }
  return out;
}

inline void check_upsample(const GridDims& d, const GridDims& nd) {
  if (nd.n_t != d.n_t) throw std::invalid_argument("upsample: time axis must not change");
  if (nd.i < d.i || nd.j < d.j || nd.k < d.k)
    throw std::invalid_argument("upsample: new spatial dims must be >= old");
  validate_dims(nd);
}

}  // namespace detail

template <typename T>
CpFactors<T> upsample(const CpFactors<T>& f, const GridDims& nd) {
  detail::check_upsample(f.dims, nd);
  CpFactors<T> out;
  out.dims = nd;
  out.rank = f.rank;
  out.x = detail::resample_rows(f.x, f.dims.i, nd.i, f.rank);
  out.y = detail::resample_rows(f.y, f.dims.j, nd.j, f.rank);
  out.z = detail::resample_rows(f.z, f.dims.k, nd.k, f.rank);
  out.t = f.t;  // never resampled along time
  return out;
}

template <typename T>
MmFactors<T> upsample(const MmFactors<T>& f, const GridDims& nd) {
  detail::check_upsample(f.dims, nd);
  const auto& D = f.dims;
  MmFactors<T> out;
  out.dims = nd;
  out.r1 = f.r1;
  out.r2 = f.r2;
  out.r3 = f.r3;
  // purely spatial matrices: bilinear via two separable passes
  out.xy = detail::resample_cols(detail::resample_rows(f.xy, D.i, nd.i, D.j * f.r1), nd.i, D.j,
                                 nd.j, f.r1);
  out.xz = detail::resample_cols(detail::resample_rows(f.xz, D.i, nd.i, D.k * f.r2), nd.i, D.k,
                                 nd.k, f.r2);
  out.yz = detail::resample_cols(detail::resample_rows(f.yz, D.j, nd.j, D.k * f.r3), nd.j, D.k,
                                 nd.k, f.r3);
  // spatial x time matrices: spatial rows only
  out.zt = detail::resample_rows(f.zt, D.k, nd.k, D.n_t * f.r1);
  out.yt = detail::resample_rows(f.yt, D.j, nd.j, D.n_t * f.r2);
  out.xt = detail::resample_rows(f.xt, D.i, nd.i, D.n_t * f.r3);
  return out;
}

// Node-aligned crop to index ranges [lo, hi] inclusive per spatial axis.
// Restriction of the represented field to the cropped box is exact.
template <typename T>
CpFactors<T> crop(const CpFactors<T>& f, int x0, int x1, int y0, int y1, int z0, int z1) {
  CpFactors<T> out;
  out.dims = {x1 - x0 + 1, y1 - y0 + 1, z1 - z0 + 1, f.dims.n_t};
  validate_dims(out.dims);
  out.rank = f.rank;
  auto slice = [&](const std::vector<T>& v, int lo, int hi) {
    return std::vector<T>(v.begin() + size_t(lo) * f.rank, v.begin() + size_t(hi + 1) * f.rank);
  };
  out.x = slice(f.x, x0, x1);
  out.y = slice(f.y, y0, y1);
  out.z = slice(f.z, z0, z1);
  out.t = f.t;
  return out;
}

template <typename T>
MmFactors<T> crop(const MmFactors<T>& f, int x0, int x1, int y0, int y1, int z0, int z1) {
  const auto& D = f.dims;
  MmFactors<T> out;
  out.dims = {x1 - x0 + 1, y1 - y0 + 1, z1 - z0 + 1, D.n_t};
  validate_dims(out.dims);
  out.r1 = f.r1;
  out.r2 = f.r2;
  out.r3 = f.r3;
  auto slice2 = [](const std::vector<T>& v, int rows, int cols, int rank, int a0, int a1, int b0,
                   int b1) {
    (void)rows;
    std::vector<T> out_v(size_t(a1 - a0 + 1) * (b1 - b0 + 1) * rank);
    size_t dst = 0;
    for (int a = a0; a <= a1; ++a)
      for (int b = b0; b <= b1; ++b)
        for (int r = 0; r < rank; ++r) out_v[dst++] = v[size_t(a * cols + b) * rank + r];
    return out_v;
  };
  out.xy = slice2(f.xy, D.i, D.j, f.r1, x0, x1, y0, y1);
  out.zt = slice2(f.zt, D.k, D.n_t, f.r1, z0, z1, 0, D.n_t - 1);
  out.xz = slice2(f.xz, D.i, D.k, f.r2, x0, x1, z0, z1);
  out.yt = slice2(f.yt, D.j, D.n_t, f.r2, y0, y1, 0, D.n_t - 1);
  out.yz = slice2(f.yz, D.j, D.k, f.r3, y0, y1, z0, z1);
  out.xt = slice2(f.xt, D.i, D.n_t, f.r3, x0, x1, 0, D.n_t - 1);
  return out;
}

}  // namespace dtrf
