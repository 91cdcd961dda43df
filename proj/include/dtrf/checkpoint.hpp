#pragma once

#include <bit>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtrf/config.hpp"
#include "dtrf/occupancy.hpp"
#include "dtrf/radiance_model.hpp"

namespace dtrf {

static_assert(std::endian::native == std::endian::little,
              "checkpoint container assumes a little-endian host");

inline constexpr uint32_t kCheckpointVersion = 1;

// Parameter arrays in their declared container order.
template <typename Model, typename Vec>
std::vector<std::pair<std::string, Vec*>> checkpoint_arrays_impl(Model& m) {
  std::vector<std::pair<std::string, Vec*>> v;
  if (m.kind == Decomp::CP) {
    v.push_back({"geo.x", &m.geo_cp.x});
    v.push_back({"geo.y", &m.geo_cp.y});
    v.push_back({"geo.z", &m.geo_cp.z});
    v.push_back({"geo.t", &m.geo_cp.t});
    v.push_back({"app.x", &m.app_cp.x});
    v.push_back({"app.y", &m.app_cp.y});
    v.push_back({"app.z", &m.app_cp.z});
    v.push_back({"app.t", &m.app_cp.t});
  } else {
    v.push_back({"geo.xy", &m.geo_mm.xy});
    v.push_back({"geo.zt", &m.geo_mm.zt});
    v.push_back({"geo.xz", &m.geo_mm.xz});
    v.push_back({"geo.yt", &m.geo_mm.yt});
    v.push_back({"geo.yz", &m.geo_mm.yz});
    v.push_back({"geo.xt", &m.geo_mm.xt});
    v.push_back({"app.xy", &m.app_mm.xy});
    v.push_back({"app.zt", &m.app_mm.zt});
    v.push_back({"app.xz", &m.app_mm.xz});
    v.push_back({"app.yt", &m.app_mm.yt});
    v.push_back({"app.yz", &m.app_mm.yz});
    v.push_back({"app.xt", &m.app_mm.xt});
  }
  v.push_back({"basis", &m.basis});
  if (m.decoder == DecoderKind::MLP) {
    v.push_back({"mlp.w1", &m.mlp.w1});
    v.push_back({"mlp.b1", &m.mlp.b1});
    v.push_back({"mlp.w2", &m.mlp.w2});
    v.push_back({"mlp.b2", &m.mlp.b2});
  }
  return v;
}

inline auto checkpoint_arrays(RadianceModel<float>& m) {
  return checkpoint_arrays_impl<RadianceModel<float>, std::vector<float>>(m);
}
inline auto checkpoint_arrays(const RadianceModel<float>& m) {
  return checkpoint_arrays_impl<const RadianceModel<float>, const std::vector<float>>(m);
}

namespace detail {

inline nlohmann::json aabb_to_json(const AABB& b) {
  return {b.lo.x, b.lo.y, b.lo.z, b.hi.x, b.hi.y, b.hi.z};
}

inline AABB aabb_from_json(const nlohmann::json& j) {
  auto v = j.get<std::vector<float>>();
  if (v.size() != 6) throw ParseError("checkpoint header: aabb needs 6 numbers");
  return {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}};
}

}  // namespace detail

inline void save_checkpoint(const RadianceModel<float>& m, const std::string& path,
                            const TrainConfig* config = nullptr,
                            const OccupancyMask* mask = nullptr) {
  nlohmann::json h;
  h["kind"] = to_string(m.kind);
  h["decoder"] = to_string(m.decoder);
  h["dims"] = {m.dims.i, m.dims.j, m.dims.k, m.dims.n_t};
  h["r_sigma"] = m.r_sigma;
  h["r_c"] = m.r_c;
  h["aabb"] = detail::aabb_to_json(m.aabb);
  h["config"] = config ? train_config_to_json(*config) : nlohmann::json();
  if (mask && !mask->cells.empty()) {
    h["mask"] = {{"nx", mask->nx},
                 {"ny", mask->ny},
                 {"nz", mask->nz},
                 {"box", detail::aabb_to_json(mask->box)},
                 {"shrunk", detail::aabb_to_json(mask->shrunk)},
                 {"empty", mask->empty}};
  } else {
    h["mask"] = nlohmann::json();
  }
  std::string header = h.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw ParseError("cannot open for writing: " + path);
  out.write("DTRF", 4);
  uint32_t version = kCheckpointVersion, hlen = uint32_t(header.size());
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&hlen), 4);
  out.write(header.data(), std::streamsize(header.size()));
  for (auto& [name, arr] : checkpoint_arrays(m))
    out.write(reinterpret_cast<const char*>(arr->data()),
              std::streamsize(arr->size() * sizeof(float)));
  if (mask && !mask->cells.empty())
    out.write(reinterpret_cast<const char*>(mask->cells.data()),
              std::streamsize(mask->cells.size()));
  if (!out) throw ParseError("write failed: " + path);
}

struct CheckpointData {
  RadianceModel<float> model;
  TrainConfig config;
  bool has_config = false;
  OccupancyMask mask;
  bool has_mask = false;
};

inline CheckpointData load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ParseError("cannot open checkpoint: " + path);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  size_t cur = 0;
  auto need = [&](size_t n, const char* section) {
    if (cur + n > buf.size())
      throw ParseError(path + ": truncated checkpoint (missing " + section + ")");
  };

  need(12, "magic/version/header length");
  if (std::memcmp(buf.data(), "DTRF", 4) != 0)
    throw ParseError(path + ": not a DTRF checkpoint (bad magic)");
  uint32_t version, hlen;
  std::memcpy(&version, buf.data() + 4, 4);
  std::memcpy(&hlen, buf.data() + 8, 4);
  if (version != kCheckpointVersion)
    throw ParseError(path + ": unsupported checkpoint version " + std::to_string(version));
  cur = 12;
  need(hlen, "header");
  nlohmann::json h;
  try {
    h = nlohmann::json::parse(buf.data() + cur, buf.data() + cur + hlen);
  } catch (const std::exception& e) {
    throw ParseError(path + ": corrupt checkpoint header: " + e.what());
  }
  cur += hlen;

  CheckpointData ck;
  try {
    ModelSpec spec;
    spec.kind = detail::parse_decomp(h.at("kind").get<std::string>());
    spec.decoder = detail::parse_decoder(h.at("decoder").get<std::string>());
    auto d = h.at("dims").get<std::vector<int>>();
    if (d.size() != 4) throw ParseError("dims needs 4 entries");
    spec.dims = {d[0], d[1], d[2], d[3]};
    spec.r_sigma = h.at("r_sigma").get<int>();
    spec.r_c = h.at("r_c").get<int>();
    spec.aabb = detail::aabb_from_json(h.at("aabb"));
    spec.geo_scale = spec.app_scale = 0;
    ck.model = make_model<float>(spec, 0);
    if (!h.at("config").is_null()) {
      ck.config = train_config_from_json(h["config"], path + " header");
      ck.has_config = true;
    }
    if (!h.at("mask").is_null()) {
      const auto& jm = h["mask"];
      ck.mask.nx = jm.at("nx").get<int>();
      ck.mask.ny = jm.at("ny").get<int>();
      ck.mask.nz = jm.at("nz").get<int>();
      ck.mask.box = detail::aabb_from_json(jm.at("box"));
      ck.mask.shrunk = detail::aabb_from_json(jm.at("shrunk"));
      ck.mask.empty = jm.at("empty").get<bool>();
      ck.has_mask = true;
    }
  } catch (const ParseError&) {
    throw;
  } catch (const std::exception& e) {
    throw ParseError(path + ": invalid checkpoint header: " + e.what());
  }

  for (auto& [name, arr] : checkpoint_arrays(ck.model)) {
    size_t bytes = arr->size() * sizeof(float);
    need(bytes, name.c_str());
    std::memcpy(arr->data(), buf.data() + cur, bytes);
    cur += bytes;
  }
  if (ck.has_mask) {
    size_t cells = size_t(ck.mask.nx) * ck.mask.ny * ck.mask.nz;
    need(cells, "mask cells");
    ck.mask.cells.assign(buf.data() + cur, buf.data() + cur + cells);
    cur += cells;
  }
  if (cur != buf.size())
    throw ParseError(path + ": checkpoint has " + std::to_string(buf.size() - cur) +
                     " trailing bytes (shape mismatch)");
  return ck;
}

}  // namespace dtrf
