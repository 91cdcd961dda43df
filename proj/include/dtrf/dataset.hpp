#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <numbers>
#include <string>
#include <vector>

#include <json.hpp>

#include "dtrf/common.hpp"
#include "dtrf/image.hpp"
#include "dtrf/volume_render.hpp"

namespace dtrf {

struct Frame {
  Image image;
  Camera camera;
  double time = 0;  // in [0,1]
};

struct Dataset {
  std::vector<Frame> train;
  std::vector<Frame> test;
  AABB aabb{{-1.5f, -1.5f, -1.5f}, {1.5f, 1.5f, 1.5f}};
  Vec3f background{1, 1, 1};
  std::string name;
};

// ---- Blender-style transforms loader ----

namespace detail {

inline std::vector<Frame> load_transforms(const std::filesystem::path& dir,
                                          const std::string& json_name, const Vec3f& background,
                                          std::string& warnings) {
  namespace fs = std::filesystem;
  fs::path jpath = dir / json_name;
  std::ifstream in(jpath);
  if (!in) throw ParseError("cannot open " + jpath.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(jpath.string() + ": malformed JSON: " + e.what());
  }
  if (!j.contains("camera_angle_x") || !j.contains("frames"))
    throw ParseError(jpath.string() + ": missing camera_angle_x or frames");
  double fov_x = j["camera_angle_x"].get<double>();

  const auto& jframes = j["frames"];
  size_t with_time = 0;
  for (const auto& f : jframes)
    if (f.contains("time")) ++with_time;
  if (with_time != 0 && with_time != jframes.size())
    throw ParseError(jpath.string() + ": \"time\" present on some frames but not all");
  if (with_time == 0 && jframes.size() > 0)
    warnings += json_name + ": no \"time\" fields, treating every frame as time 0 (static)\n";

  std::vector<Frame> out;
  out.reserve(jframes.size());
  for (const auto& jf : jframes) {
    Frame fr;
    if (!jf.contains("file_path") || !jf.contains("transform_matrix"))
      throw ParseError(jpath.string() + ": frame missing file_path or transform_matrix");
    std::string rel = jf["file_path"].get<std::string>();
    if (rel.size() < 4 || rel.substr(rel.size() - 4) != ".png") rel += ".png";
    fs::path img_path = dir / fs::path(rel).relative_path();
    if (!fs::exists(img_path)) throw ParseError("missing image file: " + img_path.string());
    fr.image = read_png(img_path.string(), background);

    const auto& m = jf["transform_matrix"];
    if (!m.is_array() || m.size() != 4)
      throw ParseError(jpath.string() + ": transform_matrix must be 4x4");
    for (int r = 0; r < 4; ++r) {
      if (!m[r].is_array() || m[r].size() != 4)
        throw ParseError(jpath.string() + ": transform_matrix must be 4x4");
      for (int c = 0; c < 4; ++c) fr.camera.c2w[r * 4 + c] = m[r][c].get<float>();
    }
    fr.camera.fov_x = float(fov_x);
    fr.camera.width = fr.image.width;
    fr.camera.height = fr.image.height;
    validate_camera(fr.camera);

    if (jf.contains("time")) {
      fr.time = jf["time"].get<double>();
      if (!(fr.time >= 0.0 && fr.time <= 1.0))
        throw ParseError(jpath.string() + ": frame time " + std::to_string(fr.time) +
                         " outside [0,1]");
    } else {
      fr.time = 0.0;
    }
    out.push_back(std::move(fr));
  }
  return out;
}

}  // namespace detail

// Loads a transforms_train.json / transforms_test.json dataset directory.
// Camera poses are camera-to-world, Blender convention (camera looks along -Z).
inline Dataset load_dnerf(const std::string& dir, Vec3f background = {1, 1, 1},
                          AABB aabb = {{-1.5f, -1.5f, -1.5f}, {1.5f, 1.5f, 1.5f}},
                          std::string* warnings_out = nullptr) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw ParseError("dataset directory not found: " + dir);
  Dataset ds;
  ds.aabb = aabb;
  ds.background = background;
  ds.name = fs::path(dir).filename().string();
  std::string warnings;
  ds.train = detail::load_transforms(dir, "transforms_train.json", background, warnings);
  if (fs::exists(fs::path(dir) / "transforms_test.json"))
    ds.test = detail::load_transforms(dir, "transforms_test.json", background, warnings);
  if (ds.train.empty()) throw ParseError(dir + ": no training frames");
  if (warnings_out)
    *warnings_out = warnings;
  else if (!warnings.empty())
    std::fprintf(stderr, "%s", warnings.c_str());
  return ds;
}

// ---- procedural synthetic scenes ----

struct SynthSpec {
  std::string kind = "sphere";  // oscillating sphere + static box
  int n_train = 24;
  int n_test = 4;
  int resolution = 64;
  double amplitude = 0.5;  // sphere oscillates along X: x(t) = A sin(2 pi t)
  uint64_t seed = 0;
};

// Analytic time-varying field: a diffuse-emissive sphere oscillating along X
// plus a static box, both with soft linear-falloff shells.
struct AnalyticField {
  double amplitude = 0.5;

  Vec3<double> sphere_center(double t) const {
    return {amplitude * std::sin(2.0 * std::numbers::pi * t), 0.0, 0.3};
  }

  template <typename T>
  FieldSample<T> operator()(const Vec3<T>& p, const Vec3<T>&, T t) const {
    const double r = 0.35, shell = 0.08, sigma0 = 35.0;
    Vec3<double> pd{double(p.x), double(p.y), double(p.z)};
    Vec3<double> d = pd - sphere_center(double(t));
    double s_sphere = sigma0 * clamp((r - d.norm()) / shell, 0.0, 1.0);

    // static box x,y in [-0.5,0.5], z in [-1.1,-0.6]
    double sd = std::max({std::abs(pd.x) - 0.5, std::abs(pd.y) - 0.5,
                          std::abs(pd.z + 0.85) - 0.25});
    double s_box = 40.0 * clamp(-sd / shell, 0.0, 1.0);

    const Vec3<double> c_sphere{0.9, 0.32, 0.22}, c_box{0.2, 0.3, 0.85};
    double total = s_sphere + s_box;
    Vec3<double> rgb{1, 1, 1};
    if (total > 1e-12) rgb = (c_sphere * s_sphere + c_box * s_box) * (1.0 / total);
    return {T(total), {T(rgb.x), T(rgb.y), T(rgb.z)}};
  }
};

namespace detail {

inline Camera synth_camera(double azimuth, double elevation, double radius, int res,
                           float fov_x) {
  Vec3f pos{float(radius * std::cos(azimuth) * std::cos(elevation)),
            float(radius * std::sin(azimuth) * std::cos(elevation)),
            float(radius * std::sin(elevation))};
  Vec3f zc = pos.normalized();  // camera looks along -zc toward the origin
  Vec3f xc = Vec3f{0, 0, 1}.cross(zc).normalized();
  Vec3f yc = zc.cross(xc);
  Camera cam;
  cam.width = cam.height = res;
  cam.fov_x = fov_x;
  cam.c2w = {xc.x, yc.x, zc.x, pos.x, xc.y, yc.y, zc.y, pos.y,
             xc.z, yc.z, zc.z, pos.z, 0,    0,    0,    1};
  return cam;
}

}  // namespace detail

// Renders the analytic field into a deterministic train/test dataset.
inline Dataset make_synthetic(const SynthSpec& spec, AnalyticField* field_out = nullptr) {
  if (spec.resolution < 16) throw std::invalid_argument("make_synthetic: resolution must be >= 16");
  if (spec.n_train < 1) throw std::invalid_argument("make_synthetic: need >= 1 train frame");
  if (spec.kind != "sphere") throw std::invalid_argument("make_synthetic: unknown kind " + spec.kind);

  Dataset ds;
  ds.name = "synthetic-" + spec.kind;
  ds.background = {1, 1, 1};
  ds.aabb = {{-1.5f, -1.5f, -1.5f}, {1.5f, 1.5f, 1.5f}};
  AnalyticField field;
  field.amplitude = spec.amplitude;
  if (field_out) *field_out = field;

  RenderOpts opts;
  opts.step_size = ds.aabb.diag() / 512.f;  // dense sampling for ground truth
  opts.background = ds.background;

  Rng rng(spec.seed);
  const double golden = 2.399963229728653;  // golden-angle azimuth increments
  auto emit = [&](std::vector<Frame>& dst, int n, double az0) {
    for (int i = 0; i < n; ++i) {
      double az = az0 + golden * i;
      double el = rng.uniform(0.15, 1.1);
      Camera cam = detail::synth_camera(az, el, 3.8, spec.resolution, 0.6911112f);
      double t = n > 1 ? double(i) / (n - 1) : 0.0;
      Frame fr;
      fr.camera = cam;
      fr.time = t;
      fr.image = render_image<double>(field, cam, t, ds.aabb, opts);
      dst.push_back(std::move(fr));
    }
  };
  emit(ds.train, spec.n_train, 0.0);
  emit(ds.test, spec.n_test, 0.77);
  return ds;
}

// ---- writing a dataset back out in the transforms_*.json layout ----

inline void save_dataset(const Dataset& ds, const std::string& dir) {
  namespace fs = std::filesystem;
  fs::create_directories(dir);
  auto dump_split = [&](const std::vector<Frame>& frames, const std::string& split) {
    fs::create_directories(fs::path(dir) / split);
    nlohmann::json j;
    j["camera_angle_x"] = frames.empty() ? 0.6911112 : double(frames.front().camera.fov_x);
    j["frames"] = nlohmann::json::array();
    char buf[32];
    for (size_t i = 0; i < frames.size(); ++i) {
      std::snprintf(buf, sizeof buf, "r_%03zu", i);
      std::string rel = "./" + split + "/" + buf;
      write_png((fs::path(dir) / split / (std::string(buf) + ".png")).string(),
                frames[i].image);
      nlohmann::json jf;
      jf["file_path"] = rel;
      jf["time"] = frames[i].time;
      auto mat = nlohmann::json::array();
      for (int r = 0; r < 4; ++r) {
        auto row = nlohmann::json::array();
        for (int c = 0; c < 4; ++c) row.push_back(frames[i].camera.c2w[r * 4 + c]);
        mat.push_back(row);
      }
      jf["transform_matrix"] = mat;
      j["frames"].push_back(jf);
    }
    std::ofstream out(fs::path(dir) / ("transforms_" + split + ".json"));
    out << j.dump(1) << "\n";
  };
  dump_split(ds.train, "train");
  dump_split(ds.test, "test");
}

// Structured spec file for the make-synth command.
inline SynthSpec parse_synth_spec(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open synth spec: " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const std::exception& e) {
    throw ParseError(path + ": malformed JSON: " + e.what());
  }
  SynthSpec s;
  for (auto& [key, val] : j.items()) {
    if (key == "kind")
      s.kind = val.get<std::string>();
    else if (key == "n_train")
      s.n_train = val.get<int>();
    else if (key == "n_test")
      s.n_test = val.get<int>();
    else if (key == "resolution")
      s.resolution = val.get<int>();
    else if (key == "amplitude")
      s.amplitude = val.get<double>();
    else if (key == "seed")
      s.seed = val.get<uint64_t>();
    else
      throw ParseError(path + ": unknown key \"" + key + "\"");
  }
  return s;
}

}  // namespace dtrf
