#include <gtest/gtest.h>

#include <png.h>

#include <unistd.h>

#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "dtrf/checkpoint.hpp"
#include "dtrf/dataset.hpp"
#include "oracles.hpp"

using namespace dtrf;
namespace fs = std::filesystem;

namespace {

fs::path fresh_dir(const std::string& tag) {
  fs::path p = fs::temp_directory_path() / ("dtrf_" + tag + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

void write_rgba_png(const std::string& path, int w, int h, const std::vector<uint8_t>& rgba) {
  FILE* fp = std::fopen(path.c_str(), "wb");
  ASSERT_NE(fp, nullptr);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png_create_info_struct(png);
  ASSERT_EQ(setjmp(png_jmpbuf(png)), 0);
  png_init_io(png, fp);
  png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGBA, PNG_INTERLACE_NONE,
               PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < h; ++y)
    png_write_row(png, const_cast<png_bytep>(rgba.data() + size_t(y) * w * 4));
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  std::fclose(fp);
}

void write_identity_transforms(const fs::path& dir, const std::vector<double>* times,
                               bool skip_time_on_last = false) {
  std::ofstream out(dir / "transforms_train.json");
  out << "{\"camera_angle_x\": 0.6911112,\n \"frames\": [\n";
  size_t n = times ? times->size() : 2;
  for (size_t i = 0; i < n; ++i) {
    out << "  {\"file_path\": \"./train/r_" << i << "\",\n";
    if (times && !(skip_time_on_last && i + 1 == n))
      out << "   \"time\": " << (*times)[i] << ",\n";
    out << "   \"transform_matrix\": [[1,0,0,0],[0,0,-1,-4],[0,1,0,0],[0,0,0,1]]}";
    out << (i + 1 < n ? ",\n" : "\n");
  }
  out << "]}\n";
}

void write_flat_pngs(const fs::path& dir, size_t n, int w = 8, int h = 8) {
  fs::create_directories(dir / "train");
  for (size_t i = 0; i < n; ++i) {
    Image img(w, h, 0.25f);
    write_png((dir / "train" / ("r_" + std::to_string(i) + ".png")).string(), img);
  }
}

}  // namespace

TEST(Png, RoundTripQuantizesOnly) {
  auto dir = fresh_dir("png");
  Image img(9, 5);
  Rng rng(1);
  for (auto& v : img.rgb) v = float(rng.uniform());
  std::string path = (dir / "rt.png").string();
  write_png(path, img);
  Image back = read_png(path, {1, 1, 1});
  ASSERT_EQ(back.width, 9);
  ASSERT_EQ(back.height, 5);
  for (size_t i = 0; i < img.rgb.size(); ++i)
    EXPECT_NEAR(back.rgb[i], img.rgb[i], 0.5f / 255.f + 1e-6f);
  fs::remove_all(dir);
}

TEST(Png, ZeroAlphaCompositesToBackground) {
  auto dir = fresh_dir("alpha");
  // one pixel: pure red with alpha 0 -> background entirely
  write_rgba_png((dir / "a.png").string(), 1, 1, {255, 0, 0, 0});
  Image white = read_png((dir / "a.png").string(), {1, 1, 1});
  EXPECT_FLOAT_EQ(white.rgb[0], 1.f);
  EXPECT_FLOAT_EQ(white.rgb[1], 1.f);
  EXPECT_FLOAT_EQ(white.rgb[2], 1.f);
  Image black = read_png((dir / "a.png").string(), {0, 0, 0});
  EXPECT_FLOAT_EQ(black.rgb[0], 0.f);
  fs::remove_all(dir);
}

TEST(Png, HalfAlphaBlends) {
  auto dir = fresh_dir("alpha2");
  write_rgba_png((dir / "a.png").string(), 1, 1, {255, 0, 0, 128});
  Image img = read_png((dir / "a.png").string(), {1, 1, 1});
  float a = 128.f / 255.f;
  EXPECT_NEAR(img.rgb[0], a + (1 - a), 1e-6);  // red over white stays 1 in R
  EXPECT_NEAR(img.rgb[1], (1 - a), 1e-6);
  fs::remove_all(dir);
}

TEST(LoadDnerf, ParsesTimesAndPoses) {
  auto dir = fresh_dir("load");
  std::vector<double> times{0.0, 1.0};
  write_identity_transforms(dir, &times);
  write_flat_pngs(dir, 2);
  Dataset ds = load_dnerf(dir.string());
  ASSERT_EQ(ds.train.size(), 2u);
  EXPECT_EQ(ds.test.size(), 0u);
  EXPECT_DOUBLE_EQ(ds.train[0].time, 0.0);
  EXPECT_DOUBLE_EQ(ds.train[1].time, 1.0);
  // pose row 1 = [0,0,-1,-4] as written
  EXPECT_FLOAT_EQ(ds.train[0].camera.c2w[6], -1.f);
  EXPECT_FLOAT_EQ(ds.train[0].camera.c2w[7], -4.f);
  EXPECT_EQ(ds.train[0].camera.width, 8);
  EXPECT_NEAR(ds.train[0].image.rgb[0], 0.25f, 0.5f / 255.f);
  fs::remove_all(dir);
}

TEST(LoadDnerf, FocalFromCameraAngle) {
  // camera_angle_x = 0.6911112 at 400 px width -> 0.5*400/tan(0.3455556)
  Camera cam;
  cam.width = 400;
  cam.height = 400;
  cam.fov_x = 0.6911112f;
  EXPECT_NEAR(cam.focal(), 555.555522, 1e-2);
}

TEST(LoadDnerf, AllFramesMissingTimeGoStatic) {
  auto dir = fresh_dir("notime");
  write_identity_transforms(dir, nullptr);  // no time fields at all
  write_flat_pngs(dir, 2);
  std::string warnings;
  Dataset ds = load_dnerf(dir.string(), {1, 1, 1}, {{-1.5f, -1.5f, -1.5f}, {1.5f, 1.5f, 1.5f}},
                          &warnings);
  EXPECT_DOUBLE_EQ(ds.train[0].time, 0.0);
  EXPECT_DOUBLE_EQ(ds.train[1].time, 0.0);
  EXPECT_NE(warnings.find("static"), std::string::npos);
  fs::remove_all(dir);
}

TEST(LoadDnerf, PartialTimeIsAnError) {
  auto dir = fresh_dir("ptime");
  std::vector<double> times{0.0, 0.5, 1.0};
  write_identity_transforms(dir, &times, /*skip_time_on_last=*/true);
  write_flat_pngs(dir, 3);
  EXPECT_THROW(load_dnerf(dir.string()), ParseError);
  fs::remove_all(dir);
}

TEST(LoadDnerf, RejectsBadInput) {
  auto dir = fresh_dir("bad");
  std::vector<double> times{0.0, 2.0};  // out of range
  write_identity_transforms(dir, &times);
  write_flat_pngs(dir, 2);
  EXPECT_THROW(load_dnerf(dir.string()), ParseError);

  times = {0.0, 1.0};
  write_identity_transforms(dir, &times);
  fs::remove(dir / "train" / "r_1.png");  // missing image
  EXPECT_THROW(load_dnerf(dir.string()), ParseError);

  std::ofstream(dir / "transforms_train.json") << "{not json";
  EXPECT_THROW(load_dnerf(dir.string()), ParseError);
  EXPECT_THROW(load_dnerf((dir / "nosuch").string()), ParseError);
  fs::remove_all(dir);
}

TEST(Synthetic, DeterministicPerSeed) {
  SynthSpec spec;
  spec.n_train = 2;
  spec.n_test = 1;
  spec.resolution = 16;
  spec.seed = 9;
  Dataset a = make_synthetic(spec);
  Dataset b = make_synthetic(spec);
  ASSERT_EQ(a.train.size(), 2u);
  for (size_t f = 0; f < a.train.size(); ++f) {
    ASSERT_EQ(a.train[f].image.rgb.size(), b.train[f].image.rgb.size());
    for (size_t i = 0; i < a.train[f].image.rgb.size(); ++i)
      EXPECT_EQ(a.train[f].image.rgb[i], b.train[f].image.rgb[i]);
  }
  spec.seed = 10;
  Dataset c = make_synthetic(spec);
  double diff = 0;
  for (size_t i = 0; i < a.train[0].image.rgb.size(); ++i)
    diff += std::abs(a.train[0].image.rgb[i] - c.train[0].image.rgb[i]);
  EXPECT_GT(diff, 0.0);
}

TEST(Synthetic, SphereFollowsSineMotion) {
  AnalyticField field;
  field.amplitude = 0.5;
  auto c = field.sphere_center(0.25);
  EXPECT_NEAR(c.x, 0.5, 1e-12);  // sin(pi/2) = 1
  EXPECT_NEAR(field.sphere_center(0.75).x, -0.5, 1e-12);
  EXPECT_NEAR(field.sphere_center(0.0).x, 0.0, 1e-12);
  // density at the moved center is the full shell value; at the mirror it is 0
  auto at = [&](double x, double t) {
    return double(field(Vec3<double>{x, 0, 0.3}, Vec3<double>{0, 0, 1}, t).sigma);
  };
  EXPECT_NEAR(at(0.5, 0.25), 35.0, 1e-9);
  EXPECT_EQ(at(-0.5, 0.25), 0.0);
}

TEST(Synthetic, ZeroAmplitudeIsStatic) {
  SynthSpec spec;
  spec.n_train = 3;
  spec.n_test = 0;
  spec.resolution = 16;
  spec.amplitude = 0.0;
  AnalyticField field;
  Dataset ds = make_synthetic(spec, &field);
  // same camera, different times: identical pixels
  RenderOpts opts;
  opts.step_size = ds.aabb.diag() / 256.f;
  Image a = render_image<double>(field, ds.train[0].camera, 0.0, ds.aabb, opts);
  Image b = render_image<double>(field, ds.train[0].camera, 0.7, ds.aabb, opts);
  double var = 0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    double d = a.rgb[i] - b.rgb[i];
    var += d * d;
  }
  EXPECT_LT(var / double(a.rgb.size()), 1e-6);
}

TEST(Synthetic, StoredImagesMatchAnalyticField) {
  SynthSpec spec;
  spec.n_train = 1;
  spec.n_test = 2;
  spec.resolution = 16;
  spec.seed = 4;
  AnalyticField field;
  Dataset ds = make_synthetic(spec, &field);
  RenderOpts opts;
  opts.step_size = ds.aabb.diag() / 512.f;  // the generator's sampler settings
  opts.background = ds.background;
  for (const auto& fr : ds.test) {
    Image re = render_image<double>(field, fr.camera, fr.time, ds.aabb, opts);
    EXPECT_LT(mean_abs_diff(re, fr.image), 1.0 / 255.0);
  }
}

TEST(Synthetic, SaveLoadRoundTrip) {
  auto dir = fresh_dir("synthrt");
  SynthSpec spec;
  spec.n_train = 2;
  spec.n_test = 1;
  spec.resolution = 16;
  spec.seed = 12;
  Dataset ds = make_synthetic(spec);
  save_dataset(ds, dir.string());
  Dataset back = load_dnerf(dir.string());
  ASSERT_EQ(back.train.size(), ds.train.size());
  ASSERT_EQ(back.test.size(), ds.test.size());
  for (size_t f = 0; f < ds.train.size(); ++f) {
    EXPECT_DOUBLE_EQ(back.train[f].time, ds.train[f].time);
    for (int i = 0; i < 16; ++i)
      EXPECT_NEAR(back.train[f].camera.c2w[i], ds.train[f].camera.c2w[i], 1e-6);
    EXPECT_LT(mean_abs_diff(back.train[f].image, ds.train[f].image), 0.5 / 255.0 + 1e-6);
  }
  fs::remove_all(dir);
}

TEST(SynthSpecFile, ParsesAndRejectsUnknown) {
  auto dir = fresh_dir("spec");
  std::ofstream(dir / "s.json") << R"({"kind":"sphere","n_train":5,"resolution":32,"seed":3})";
  SynthSpec s = parse_synth_spec((dir / "s.json").string());
  EXPECT_EQ(s.n_train, 5);
  EXPECT_EQ(s.resolution, 32);
  EXPECT_EQ(s.seed, 3u);
  EXPECT_EQ(s.n_test, 4);  // default
  std::ofstream(dir / "bad.json") << R"({"n_trian": 5})";
  EXPECT_THROW(parse_synth_spec((dir / "bad.json").string()), ParseError);
  fs::remove_all(dir);
}

// ---- checkpoints ----

namespace {

RadianceModel<float> random_model(Decomp kind, DecoderKind dec, uint64_t seed) {
  ModelSpec spec;
  spec.kind = kind;
  spec.decoder = dec;
  spec.dims = {6, 5, 4, 3};
  spec.r_sigma = 2;
  spec.r_c = 3;
  return make_model<float>(spec, seed);
}

}  // namespace

TEST(Checkpoint, RoundTripIsBitIdentical) {
  auto dir = fresh_dir("ckpt");
  for (auto kind : {Decomp::CP, Decomp::MM})
    for (auto dec : {DecoderKind::MLP, DecoderKind::SH}) {
      auto m = random_model(kind, dec, 77);
      TrainConfig cfg;
      cfg.kind = kind;
      cfg.total_steps = 1234;
      OccupancyMask mask;
      mask.box = m.aabb;
      mask.shrunk = {{-0.5f, -0.5f, -0.5f}, {0.5f, 0.5f, 0.5f}};
      mask.nx = mask.ny = mask.nz = 2;
      mask.cells = {1, 0, 0, 1, 1, 1, 0, 0};
      mask.empty = false;
      std::string path = (dir / "m.ckpt").string();
      save_checkpoint(m, path, &cfg, &mask);
      CheckpointData ck = load_checkpoint(path);
      EXPECT_EQ(ck.model.kind, kind);
      EXPECT_EQ(ck.model.decoder, dec);
      EXPECT_EQ(ck.model.dims.i, m.dims.i);
      EXPECT_EQ(ck.model.dims.n_t, m.dims.n_t);
      EXPECT_EQ(ck.model.r_sigma, m.r_sigma);
      EXPECT_EQ(ck.model.r_c, m.r_c);
      auto want = checkpoint_arrays(std::as_const(m));
      auto got = checkpoint_arrays(std::as_const(ck.model));
      ASSERT_EQ(want.size(), got.size());
      for (size_t a = 0; a < want.size(); ++a) {
        ASSERT_EQ(want[a].second->size(), got[a].second->size()) << want[a].first;
        for (size_t i = 0; i < want[a].second->size(); ++i)
          EXPECT_EQ((*want[a].second)[i], (*got[a].second)[i]);
      }
      ASSERT_TRUE(ck.has_config);
      EXPECT_EQ(ck.config.total_steps, 1234);
      ASSERT_TRUE(ck.has_mask);
      EXPECT_EQ(ck.mask.cells, mask.cells);
      EXPECT_FLOAT_EQ(ck.mask.shrunk.hi.x, 0.5f);
    }
  fs::remove_all(dir);
}

TEST(Checkpoint, SizeMatchesAccounting) {
  auto dir = fresh_dir("ckptsz");
  auto m = random_model(Decomp::MM, DecoderKind::MLP, 5);
  std::string path = (dir / "m.ckpt").string();
  save_checkpoint(m, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  uint32_t hlen;
  std::memcpy(&hlen, buf.data() + 8, 4);
  EXPECT_EQ(buf.size(), 12 + size_t(hlen) + 4 * m.param_count());
  // factor portion agrees with the closed-form accounting
  ParamStats geo = param_stats(m.geo_mm), app = param_stats(m.app_mm);
  size_t factor_floats = geo.count + app.count;
  EXPECT_EQ(4 * factor_floats, geo.bytes + app.bytes);
  EXPECT_LT(factor_floats, m.param_count());
  fs::remove_all(dir);
}

TEST(Checkpoint, CorruptFilesAreNamedErrors) {
  auto dir = fresh_dir("ckptbad");
  auto m = random_model(Decomp::CP, DecoderKind::SH, 8);
  std::string path = (dir / "m.ckpt").string();
  save_checkpoint(m, path);
  std::ifstream in(path, std::ios::binary);
  std::vector<char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  auto write_bytes = [&](const std::vector<char>& b) {
    std::ofstream out(path, std::ios::binary);
    out.write(b.data(), std::streamsize(b.size()));
  };

  // truncated mid-payload: the error names the array that is cut short
  std::vector<char> cut(buf.begin(), buf.begin() + std::streamsize(buf.size() - 9));
  write_bytes(cut);
  try {
    load_checkpoint(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("truncated"), std::string::npos);
  }

  std::vector<char> garbage = buf;
  garbage.push_back('x');
  write_bytes(garbage);
  EXPECT_THROW(load_checkpoint(path), ParseError);

  std::vector<char> magic = buf;
  magic[0] = 'X';
  write_bytes(magic);
  try {
    load_checkpoint(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("magic"), std::string::npos);
  }

  std::vector<char> ver = buf;
  ver[4] = 9;
  write_bytes(ver);
  try {
    load_checkpoint(path);
    FAIL() << "expected ParseError";
  } catch (const ParseError& e) {
    EXPECT_NE(std::string(e.what()).find("version"), std::string::npos);
  }

  EXPECT_THROW(load_checkpoint((dir / "nosuch.ckpt").string()), ParseError);
  fs::remove_all(dir);
}

TEST(ImageUtils, DownsampleBoxFilter) {
  Image img(4, 2);
  for (size_t i = 0; i < img.rgb.size(); ++i) img.rgb[i] = float(i);
  Image half = downsample(img, 2);
  ASSERT_EQ(half.width, 2);
  ASSERT_EQ(half.height, 1);
  // channel 0 of the left 2x2 block: pixels 0,1 (row 0) and 4,5 (row 1) -> indices 0,3,12,15
  EXPECT_FLOAT_EQ(half.rgb[0], (0.f + 3.f + 12.f + 15.f) / 4.f);
}
