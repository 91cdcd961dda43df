#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>

namespace dtrf {

// Thrown for malformed user input (configs, datasets, checkpoints). CLI maps this to exit 2.
struct ParseError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when training hits a non-finite loss/gradient. CLI maps this to exit 3.
struct NanAbort : std::runtime_error {
  using std::runtime_error::runtime_error;
};

template <typename T>
struct Vec3 {
  T x{}, y{}, z{};

  Vec3() = default;
  Vec3(T x_, T y_, T z_) : x(x_), y(y_), z(z_) {}

  Vec3 operator+(const Vec3& o) const { return {x + o.x, y + o.y, z + o.z}; }
  Vec3 operator-(const Vec3& o) const { return {x - o.x, y - o.y, z - o.z}; }
  Vec3 operator*(T s) const { return {x * s, y * s, z * s}; }
  Vec3 operator/(T s) const { return {x / s, y / s, z / s}; }
  Vec3& operator+=(const Vec3& o) { x += o.x; y += o.y; z += o.z; return *this; }
  T operator[](int i) const { return i == 0 ? x : (i == 1 ? y : z); }

  T dot(const Vec3& o) const { return x * o.x + y * o.y + z * o.z; }
  T norm() const { return std::sqrt(dot(*this)); }
  Vec3 normalized() const { T n = norm(); return {x / n, y / n, z / n}; }
  Vec3 cross(const Vec3& o) const {
    return {y * o.z - z * o.y, z * o.x - x * o.z, x * o.y - y * o.x};
  }
};

using Vec3f = Vec3<float>;
using Vec3d = Vec3<double>;

template <typename T>
inline T clamp(T v, T lo, T hi) { return std::min(std::max(v, lo), hi); }

// Axis-aligned scene box in world units.
struct AABB {
  Vec3f lo{-1.5f, -1.5f, -1.5f};
  Vec3f hi{1.5f, 1.5f, 1.5f};

  Vec3f extent() const { return hi - lo; }
  float diag() const { return extent().norm(); }
  bool contains(const Vec3f& p) const {
    return p.x >= lo.x && p.x <= hi.x && p.y >= lo.y && p.y <= hi.y &&
           p.z >= lo.z && p.z <= hi.z;
  }
};

// Slab intersection; returns false on miss. On hit, [t_near, t_far] covers the chord.
template <typename T>
inline bool intersect_aabb(const Vec3<T>& origin, const Vec3<T>& dir, const AABB& box,
                           T& t_near, T& t_far) {
  T tn = T(-1e30), tf = T(1e30);
  const T o[3] = {origin.x, origin.y, origin.z};
  const T d[3] = {dir.x, dir.y, dir.z};
  const float lo[3] = {box.lo.x, box.lo.y, box.lo.z};
  const float hi[3] = {box.hi.x, box.hi.y, box.hi.z};
  for (int a = 0; a < 3; ++a) {
    if (std::abs(d[a]) < T(1e-12)) {
      if (o[a] < T(lo[a]) || o[a] > T(hi[a])) return false;
      continue;
    }
    T inv = T(1) / d[a];
    T t0 = (T(lo[a]) - o[a]) * inv;
    T t1 = (T(hi[a]) - o[a]) * inv;
    if (t0 > t1) std::swap(t0, t1);
    tn = std::max(tn, t0);
    tf = std::min(tf, t1);
  }
  if (tn > tf) return false;
  t_near = tn;
  t_far = tf;
  return true;
}

// Deterministic RNG. All draws go through explicit helpers so sequences are
// identical across standard libraries (std::uniform_real_distribution is not
// pinned by the standard).
struct Rng {
  std::mt19937_64 eng;

  explicit Rng(uint64_t seed = 0) : eng(seed) {}

  // uniform in [0, 1)
  double uniform() {
    return double(eng() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  // uniform integer in [0, n)
  uint64_t uniform_idx(uint64_t n) {
    // modulo bias is irrelevant for n << 2^64
    return eng() % n;
  }
  // Box-Muller; one value per call (second draw discarded to keep state simple)
  double normal() {
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 1e-300) u1 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
  }
};

inline std::string format_vec3(const Vec3f& v) {
  char buf[96];
  std::snprintf(buf, sizeof(buf), "[%g, %g, %g]", v.x, v.y, v.z);
  return buf;
}

}  // namespace dtrf
