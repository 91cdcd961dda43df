#pragma once

#include <vector>

#include "dtrf/common.hpp"
#include "dtrf/radiance_model.hpp"

namespace dtrf {

// Binary spatial grid over the scene box: a cell is occupied iff the density
// exceeded the threshold at any probed time. Rays skip field queries in empty
// cells; the shrunk box tightens sampling bounds after the mask step.
struct OccupancyMask {
  AABB box;     // box the mask was built over
  AABB shrunk;  // bounding box of occupied cells + margin (== box when empty)
  int nx = 0, ny = 0, nz = 0;
  std::vector<uint8_t> cells;  // x-major: cells[(ix*ny + iy)*nz + iz]
  bool empty = true;           // no occupied cell found

  bool occupied(float x, float y, float z) const {
    if (cells.empty()) return true;  // no mask behaves as all-occupied
    Vec3f e = box.extent();
    int ix = int((x - box.lo.x) / e.x * nx);
    int iy = int((y - box.lo.y) / e.y * ny);
    int iz = int((z - box.lo.z) / e.z * nz);
    if (ix < 0 || iy < 0 || iz < 0 || ix >= nx || iy >= ny || iz >= nz) return false;
    return cells[(size_t(ix) * ny + iy) * nz + iz] != 0;
  }
};

// Evaluates max-over-time density on a dense cell-center grid. time_samples
// evenly spaced over [0,1] (a single sample probes t = 0).
template <typename T>
OccupancyMask build_occupancy_mask(const RadianceModel<T>& m, int nx, int ny, int nz,
                                   double threshold, int time_samples) {
  OccupancyMask mask;
  mask.box = m.aabb;
  mask.shrunk = m.aabb;
  mask.nx = nx;
  mask.ny = ny;
  mask.nz = nz;
  mask.cells.assign(size_t(nx) * ny * nz, 0);

  std::vector<T> times;
  for (int s = 0; s < std::max(1, time_samples); ++s)
    times.push_back(time_samples <= 1 ? T(0) : T(s) / T(time_samples - 1));

  Vec3f e = m.aabb.extent();
  std::vector<T> scratch(density_scratch_size(m));
  int lo[3] = {nx, ny, nz}, hi[3] = {-1, -1, -1};
  for (int ix = 0; ix < nx; ++ix)
    for (int iy = 0; iy < ny; ++iy)
      for (int iz = 0; iz < nz; ++iz) {
        Vec3<T> p{T(m.aabb.lo.x + (ix + 0.5f) / nx * e.x),
                  T(m.aabb.lo.y + (iy + 0.5f) / ny * e.y),
                  T(m.aabb.lo.z + (iz + 0.5f) / nz * e.z)};
        bool occ = false;
        for (T t : times) {
          T raw = raw_density_at(m, m.world_to_grid(p, t), scratch.data());
          if (raw > T(threshold)) {
            occ = true;
            break;
          }
        }
        if (occ) {
          mask.cells[(size_t(ix) * ny + iy) * nz + iz] = 1;
          lo[0] = std::min(lo[0], ix); hi[0] = std::max(hi[0], ix);
          lo[1] = std::min(lo[1], iy); hi[1] = std::max(hi[1], iy);
          lo[2] = std::min(lo[2], iz); hi[2] = std::max(hi[2], iz);
        }
      }

  mask.empty = hi[0] < 0;
  if (!mask.empty) {
    // occupied bounding box + one-cell margin, clamped to the original box
    const int n[3] = {nx, ny, nz};
    float flo[3], fhi[3];
    const float blo[3] = {m.aabb.lo.x, m.aabb.lo.y, m.aabb.lo.z};
    const float ext[3] = {e.x, e.y, e.z};
    for (int a = 0; a < 3; ++a) {
      int c0 = std::max(0, lo[a] - 1), c1 = std::min(n[a] - 1, hi[a] + 1);
      flo[a] = blo[a] + float(c0) / n[a] * ext[a];
      fhi[a] = blo[a] + float(c1 + 1) / n[a] * ext[a];
    }
    mask.shrunk = {{flo[0], flo[1], flo[2]}, {fhi[0], fhi[1], fhi[2]}};
  }
  return mask;
}

}  // namespace dtrf
