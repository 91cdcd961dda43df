#pragma once

#include "dtrf/common.hpp"

namespace dtrf {

inline constexpr int kShCoeffs = 9;  // real SH up to degree 2

// Standard real spherical harmonics basis, degree <= 2, evaluated at a unit
// direction. Sign conventions follow the usual graphics ordering; learned
// coefficients absorb them either way.
template <typename T>
inline void sh_basis(const Vec3<T>& d, T* out) {
  T x = d.x, y = d.y, z = d.z;
  out[0] = T(0.28209479177387814);
  out[1] = T(-0.48860251190291987) * y;
  out[2] = T(0.48860251190291987) * z;
  out[3] = T(-0.48860251190291987) * x;
  out[4] = T(1.0925484305920792) * x * y;
  out[5] = T(-1.0925484305920792) * y * z;
  out[6] = T(0.31539156525252005) * (T(3) * z * z - T(1));
  out[7] = T(-1.0925484305920792) * x * z;
  out[8] = T(0.5462742152960396) * (x * x - y * y);
}

}  // namespace dtrf
