#pragma once

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "dtrf/common.hpp"
#include "dtrf/radiance_model.hpp"

namespace dtrf {

// View into one named slice of the model's parameters with its gradient buffer.
template <typename T>
struct ParamGroup {
  std::string name;
  T* param = nullptr;
  T* grad = nullptr;
  size_t size = 0;
  double lr_mult = 1.0;
};

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-8;
};

template <typename T>
struct AdamState {
  struct Group {
    std::vector<T> m, v;
    int64_t step = 0;
  };
  std::vector<Group> groups;

  template <typename U>
  void init(const std::vector<ParamGroup<U>>& pgs) {
    groups.assign(pgs.size(), {});
    for (size_t i = 0; i < pgs.size(); ++i) {
      groups[i].m.assign(pgs[i].size, T(0));
      groups[i].v.assign(pgs[i].size, T(0));
    }
  }
};

// lr(step) = base * ratio^(step/total); default decay reaches base*0.1 at the end.
inline double lr_schedule(int64_t step, int64_t total_steps, double base_lr, double ratio = 0.1) {
  if (total_steps <= 0) return base_lr;
  return base_lr * std::pow(ratio, double(step) / double(total_steps));
}

// One Adam update over all groups. Per-group lr = base_lr * lr_mult.
template <typename T>
void adam_step(std::vector<ParamGroup<T>>& groups, AdamState<T>& state, double base_lr,
               const AdamConfig& cfg = {}) {
  if (state.groups.size() != groups.size())
    throw std::invalid_argument("adam_step: state/group count mismatch");
  for (size_t gi = 0; gi < groups.size(); ++gi) {
    auto& pg = groups[gi];
    auto& st = state.groups[gi];
    if (st.m.size() != pg.size) throw std::invalid_argument("adam_step: state size mismatch");
    st.step += 1;
    double bc1 = 1.0 - std::pow(cfg.beta1, double(st.step));
    double bc2 = 1.0 - std::pow(cfg.beta2, double(st.step));
    double lr = base_lr * pg.lr_mult;
    T b1 = T(cfg.beta1), b2 = T(cfg.beta2);
    for (size_t i = 0; i < pg.size; ++i) {
      T g = pg.grad[i];
      if (!std::isfinite(double(g)))
        throw NanAbort("adam_step: non-finite gradient in group '" + pg.name + "'");
      st.m[i] = b1 * st.m[i] + (T(1) - b1) * g;
      st.v[i] = b2 * st.v[i] + (T(1) - b2) * g * g;
      double mh = double(st.m[i]) / bc1;
      double vh = double(st.v[i]) / bc2;
      pg.param[i] -= T(lr * mh / (std::sqrt(vh) + cfg.eps));
    }
  }
}

// Parameter groups for a radiance model. Factor grids carry the high-lr
// multiplier; basis matrix and decoder run at base lr.
template <typename T>
std::vector<ParamGroup<T>> model_param_groups(RadianceModel<T>& m, ModelGrads<T>& g,
                                              double factor_lr_mult = 20.0) {
  std::vector<ParamGroup<T>> out;
  auto add = [&](const char* name, std::vector<T>& p, std::vector<T>& gr, double mult) {
    if (!p.empty()) out.push_back({name, p.data(), gr.data(), p.size(), mult});
  };
  if (m.kind == Decomp::CP) {
    add("geo.x", m.geo_cp.x, g.geo_cp.x, factor_lr_mult);
    add("geo.y", m.geo_cp.y, g.geo_cp.y, factor_lr_mult);
    add("geo.z", m.geo_cp.z, g.geo_cp.z, factor_lr_mult);
    add("geo.t", m.geo_cp.t, g.geo_cp.t, factor_lr_mult);
    add("app.x", m.app_cp.x, g.app_cp.x, factor_lr_mult);
    add("app.y", m.app_cp.y, g.app_cp.y, factor_lr_mult);
    add("app.z", m.app_cp.z, g.app_cp.z, factor_lr_mult);
    add("app.t", m.app_cp.t, g.app_cp.t, factor_lr_mult);
  } else {
    add("geo.xy", m.geo_mm.xy, g.geo_mm.xy, factor_lr_mult);
    add("geo.zt", m.geo_mm.zt, g.geo_mm.zt, factor_lr_mult);
    add("geo.xz", m.geo_mm.xz, g.geo_mm.xz, factor_lr_mult);
    add("geo.yt", m.geo_mm.yt, g.geo_mm.yt, factor_lr_mult);
    add("geo.yz", m.geo_mm.yz, g.geo_mm.yz, factor_lr_mult);
    add("geo.xt", m.geo_mm.xt, g.geo_mm.xt, factor_lr_mult);
    add("app.xy", m.app_mm.xy, g.app_mm.xy, factor_lr_mult);
    add("app.zt", m.app_mm.zt, g.app_mm.zt, factor_lr_mult);
    add("app.xz", m.app_mm.xz, g.app_mm.xz, factor_lr_mult);
    add("app.yt", m.app_mm.yt, g.app_mm.yt, factor_lr_mult);
    add("app.yz", m.app_mm.yz, g.app_mm.yz, factor_lr_mult);
    add("app.xt", m.app_mm.xt, g.app_mm.xt, factor_lr_mult);
  }
  add("basis", m.basis, g.basis, 1.0);
  if (m.decoder == DecoderKind::MLP) {
    add("mlp.w1", m.mlp.w1, g.mlp.w1, 1.0);
    add("mlp.b1", m.mlp.b1, g.mlp.b1, 1.0);
    add("mlp.w2", m.mlp.w2, g.mlp.w2, 1.0);
    add("mlp.b2", m.mlp.b2, g.mlp.b2, 1.0);
  }
  return out;
}

}  // namespace dtrf
