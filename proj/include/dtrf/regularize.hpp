#pragma once

#include <cmath>
#include <utility>
#include <vector>

#include "dtrf/tensor_factors.hpp"

namespace dtrf {

// Gaussian neighbor-prediction smoothing along the time axis.
struct SmoothingSpec {
  int window = 3;          // S, odd
  double sigma_k = 0.5;    // kernel width
  bool include_center = false;  // window excludes i_t itself by default
};

// Normalized kernel weights over the (possibly truncated) window around i_t.
// Empty result when the window contains no other index (n_t == 1).
inline std::vector<std::pair<int, double>> kernel_weights(int i_t, int n_t,
                                                          const SmoothingSpec& spec) {
  if (i_t < 0 || i_t >= n_t) throw std::invalid_argument("kernel_weights: index out of range");
  int half = spec.window / 2;
  std::vector<std::pair<int, double>> out;
  double total = 0;
  for (int i_w = std::max(0, i_t - half); i_w <= std::min(n_t - 1, i_t + half); ++i_w) {
    if (i_w == i_t && !spec.include_center) continue;
    double d = double(i_t - i_w);
    double k = std::exp(-d * d / (2.0 * spec.sigma_k * spec.sigma_k));
    out.emplace_back(i_w, k);
    total += k;
  }
  for (auto& [idx, w] : out) w /= total;
  return out;
}

// All windows for a fiber length, computed once.
inline std::vector<std::vector<std::pair<int, double>>> kernel_table(int n_t,
                                                                     const SmoothingSpec& spec) {
  std::vector<std::vector<std::pair<int, double>>> table(n_t);
  for (int i = 0; i < n_t; ++i) table[i] = kernel_weights(i, n_t, spec);
  return table;
}

namespace detail {

// One time fiber: entries fiber[i_t * stride]. Returns the squared-residual
// sum; optionally accumulates d(loss)/d(entries) into grad (same layout).
template <typename T>
double fiber_smoothing(const T* fiber, int n_t, size_t stride,
                       const std::vector<std::vector<std::pair<int, double>>>& table, T* grad,
                       double grad_scale) {
  double loss = 0;
  for (int i_t = 0; i_t < n_t; ++i_t) {
    const auto& win = table[i_t];
    if (win.empty()) continue;
    double pred = 0;
    for (auto& [iw, w] : win) pred += w * double(fiber[size_t(iw) * stride]);
    double r = double(fiber[size_t(i_t) * stride]) - pred;
    loss += r * r;
    if (grad) {
      grad[size_t(i_t) * stride] += T(grad_scale * 2.0 * r);
      for (auto& [iw, w] : win) grad[size_t(iw) * stride] -= T(grad_scale * 2.0 * r * w);
    }
  }
  return loss;
}

}  // namespace detail

// CP: every component's time vector is one fiber.
template <typename T>
double smoothing_loss(const CpFactors<T>& f, const SmoothingSpec& spec, CpFactors<T>* grad = nullptr,
                      double grad_scale = 1.0) {
  int n_t = f.dims.n_t;
  if (n_t <= 1) return 0;
  auto table = kernel_table(n_t, spec);
  double loss = 0;
  for (int r = 0; r < f.rank; ++r)
    loss += detail::fiber_smoothing(f.t.data() + r, n_t, size_t(f.rank), table,
                                    grad ? grad->t.data() + r : nullptr, grad_scale);
  return loss;
}

// MM: every spatial row of every spatial-time matrix is one fiber.
template <typename T>
double smoothing_loss(const MmFactors<T>& f, const SmoothingSpec& spec, MmFactors<T>* grad = nullptr,
                      double grad_scale = 1.0) {
  int n_t = f.dims.n_t;
  if (n_t <= 1) return 0;
  auto table = kernel_table(n_t, spec);
  double loss = 0;
  auto matrix = [&](const std::vector<T>& m, std::vector<T>* g, int rows, int rank) {
    for (int l = 0; l < rows; ++l)
      for (int r = 0; r < rank; ++r) {
        size_t base = size_t(l) * n_t * rank + r;
        loss += detail::fiber_smoothing(m.data() + base, n_t, size_t(rank), table,
                                        g ? g->data() + base : nullptr, grad_scale);
      }
  };
  matrix(f.zt, grad ? &grad->zt : nullptr, f.dims.k, f.r1);
  matrix(f.yt, grad ? &grad->yt : nullptr, f.dims.j, f.r2);
  matrix(f.xt, grad ? &grad->xt : nullptr, f.dims.i, f.r3);
  return loss;
}

// Combined over both grids, as the training loss uses it.
template <typename F>
double smoothing_loss_total(const F& geo, const F& app, const SmoothingSpec& spec) {
  return smoothing_loss(geo, spec) + smoothing_loss(app, spec);
}

// Mean absolute value over all factor entries (basis/decoder excluded).
// Gradient of (scale * mean|x|) is scale * sign(x) / count.
template <typename T>
double l1_accum(const std::vector<T>& v, double& count) {
  double s = 0;
  for (auto e : v) s += std::abs(double(e));
  count += double(v.size());
  return s;
}

template <typename T>
double l1_loss(const CpFactors<T>& f, CpFactors<T>* grad = nullptr, double grad_scale = 1.0) {
  double count = 0;
  double s = l1_accum(f.x, count) + l1_accum(f.y, count) + l1_accum(f.z, count) +
             l1_accum(f.t, count);
  if (grad && count > 0) {
    double gs = grad_scale / count;
    auto acc = [&](const std::vector<T>& v, std::vector<T>& g) {
      for (size_t i = 0; i < v.size(); ++i) g[i] += T(gs * (v[i] > T(0) ? 1 : (v[i] < T(0) ? -1 : 0)));
    };
    acc(f.x, grad->x); acc(f.y, grad->y); acc(f.z, grad->z); acc(f.t, grad->t);
  }
  return count > 0 ? s / count : 0;
}

template <typename T>
double l1_loss(const MmFactors<T>& f, MmFactors<T>* grad = nullptr, double grad_scale = 1.0) {
  double count = 0;
  double s = l1_accum(f.xy, count) + l1_accum(f.zt, count) + l1_accum(f.xz, count) +
             l1_accum(f.yt, count) + l1_accum(f.yz, count) + l1_accum(f.xt, count);
  if (grad && count > 0) {
    double gs = grad_scale / count;
    auto acc = [&](const std::vector<T>& v, std::vector<T>& g) {
      for (size_t i = 0; i < v.size(); ++i) g[i] += T(gs * (v[i] > T(0) ? 1 : (v[i] < T(0) ? -1 : 0)));
    };
    acc(f.xy, grad->xy); acc(f.zt, grad->zt); acc(f.xz, grad->xz);
    acc(f.yt, grad->yt); acc(f.yz, grad->yz); acc(f.xt, grad->xt);
  }
  return count > 0 ? s / count : 0;
}

// Sum and entry count, for assembling the mean over both grids jointly.
template <typename T>
std::pair<double, double> l1_sum_count(const CpFactors<T>& f) {
  double count = 0;
  double s = l1_accum(f.x, count) + l1_accum(f.y, count) + l1_accum(f.z, count) +
             l1_accum(f.t, count);
  return {s, count};
}

template <typename T>
std::pair<double, double> l1_sum_count(const MmFactors<T>& f) {
  double count = 0;
  double s = l1_accum(f.xy, count) + l1_accum(f.zt, count) + l1_accum(f.xz, count) +
             l1_accum(f.yt, count) + l1_accum(f.yz, count) + l1_accum(f.xt, count);
  return {s, count};
}

// Adds scale * sign(entry) into grad for every factor entry.
template <typename T>
void l1_sign_grad(const CpFactors<T>& f, CpFactors<T>& grad, double scale) {
  auto acc = [&](const std::vector<T>& v, std::vector<T>& g) {
    for (size_t i = 0; i < v.size(); ++i)
      g[i] += T(scale * (v[i] > T(0) ? 1 : (v[i] < T(0) ? -1 : 0)));
  };
  acc(f.x, grad.x); acc(f.y, grad.y); acc(f.z, grad.z); acc(f.t, grad.t);
}

template <typename T>
void l1_sign_grad(const MmFactors<T>& f, MmFactors<T>& grad, double scale) {
  auto acc = [&](const std::vector<T>& v, std::vector<T>& g) {
    for (size_t i = 0; i < v.size(); ++i)
      g[i] += T(scale * (v[i] > T(0) ? 1 : (v[i] < T(0) ? -1 : 0)));
  };
  acc(f.xy, grad.xy); acc(f.zt, grad.zt); acc(f.xz, grad.xz);
  acc(f.yt, grad.yt); acc(f.yz, grad.yz); acc(f.xt, grad.xt);
}

}  // namespace dtrf
