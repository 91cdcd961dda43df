#include <gtest/gtest.h>

#include <cmath>

#include "dtrf/dataset.hpp"
#include "dtrf/metrics.hpp"
#include "oracles.hpp"

using namespace dtrf;

namespace {

Image noisy(const Image& base, double amp, uint64_t seed) {
  Image out = base;
  Rng rng(seed);
  for (auto& v : out.rgb)
    v = float(clamp(double(v) + amp * (rng.uniform() - 0.5), 0.0, 1.0));
  return out;
}

Image random_image(int w, int h, uint64_t seed) {
  Image img(w, h);
  Rng rng(seed);
  for (auto& v : img.rgb) v = float(rng.uniform());
  return img;
}

}  // namespace

TEST(Psnr, IdenticalImagesAreInfinite) {
  Image a = random_image(7, 7, 3);
  EXPECT_TRUE(std::isinf(psnr(a, a)));
  EXPECT_GT(psnr(a, a), 0);
}

TEST(Psnr, HalfGrayErrorIsSixDb) {
  // uniform |error| 0.5 -> MSE 0.25 -> 10 log10(4) = 6.0206 dB
  Image a(5, 4, 0.5f), b(5, 4, 0.0f);
  EXPECT_NEAR(psnr(a, b), 6.02059991, 1e-6);
}

TEST(Psnr, MonotoneInNoise) {
  Image base(16, 16, 0.5f);
  double p1 = psnr(noisy(base, 0.05, 1), base);
  double p2 = psnr(noisy(base, 0.10, 1), base);
  double p3 = psnr(noisy(base, 0.20, 1), base);
  EXPECT_GT(p1, p2);
  EXPECT_GT(p2, p3);
}

TEST(Psnr, DimMismatchThrows) {
  Image a(4, 4), b(4, 5);
  EXPECT_THROW(psnr(a, b), std::invalid_argument);
}

TEST(Ssim, IdenticalImagesScoreOne) {
  Image a = random_image(16, 16, 11);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
}

TEST(Ssim, ConstantPairClosedForm) {
  // zero variance: contrast-structure term is exactly 1, luminance term is
  // (2*0.2*0.8 + C1) / (0.2^2 + 0.8^2 + C1)
  Image a(16, 16, 0.2f), b(16, 16, 0.8f);
  double mu_a = 0.2f, mu_b = 0.8f, c1 = 1e-4;
  double want = (2 * mu_a * mu_b + c1) / (mu_a * mu_a + mu_b * mu_b + c1);
  EXPECT_NEAR(ssim(a, b), want, 1e-9);
}

TEST(Ssim, MatchesReferenceImplementation) {
  Image a = random_image(18, 14, 21);
  Image b = noisy(a, 0.3, 22);
  double got = ssim(a, b);
  double want = oracle::ssim_reference(detail::rec601_luma(a), detail::rec601_luma(b), 18, 14);
  EXPECT_NEAR(got, want, 1e-7);
  EXPECT_GT(got, -1.0);
  EXPECT_LT(got, 1.0);
}

TEST(Ssim, Symmetric) {
  Image a = random_image(13, 13, 31);
  Image b = random_image(13, 13, 32);
  EXPECT_DOUBLE_EQ(ssim(a, b), ssim(b, a));
}

TEST(Ssim, TooSmallThrows) {
  Image a(10, 12), b(10, 12);
  EXPECT_THROW(ssim(a, b), std::invalid_argument);
}

namespace {

std::vector<Frame> model_frames(const RadianceModel<float>& m, int n, const RenderOpts& opts) {
  std::vector<Frame> frames;
  for (int i = 0; i < n; ++i) {
    Frame fr;
    fr.camera = dtrf::detail::synth_camera(0.3 + 0.8 * i, 0.5, 3.8, 24, 0.6911112f);
    fr.time = n > 1 ? double(i) / (n - 1) : 0.0;
    fr.image = render_model(m, fr.camera, float(fr.time), opts);
    frames.push_back(std::move(fr));
  }
  return frames;
}

}  // namespace

TEST(Evaluate, SelfRenderIsPerfect) {
  ModelSpec spec;
  spec.kind = Decomp::MM;
  spec.decoder = DecoderKind::SH;
  spec.dims = {8, 8, 8, 3};
  spec.r_sigma = 2;
  spec.r_c = 2;
  auto m = make_model<float>(spec, 19);
  RenderOpts opts;
  auto frames = model_frames(m, 2, opts);
  EvalReport rep = evaluate(m, frames, opts);
  ASSERT_EQ(rep.frame_psnr.size(), 2u);
  for (double p : rep.frame_psnr) EXPECT_TRUE(std::isinf(p));
  for (double s : rep.frame_ssim) EXPECT_NEAR(s, 1.0, 1e-12);
}

TEST(Evaluate, MeansMatchHandComputation) {
  ModelSpec spec;
  spec.kind = Decomp::CP;
  spec.decoder = DecoderKind::SH;
  spec.dims = {8, 8, 8, 3};
  spec.r_sigma = 3;
  spec.r_c = 4;
  auto m = make_model<float>(spec, 23);
  RenderOpts opts;
  auto frames = model_frames(m, 3, opts);
  for (size_t i = 0; i < frames.size(); ++i)
    frames[i].image = noisy(frames[i].image, 0.1, 100 + i);  // imperfect ground truth

  EvalReport rep = evaluate(m, frames, opts);
  double sum_p = 0, sum_s = 0;
  for (size_t i = 0; i < frames.size(); ++i) {
    Image re = render_model(m, frames[i].camera, float(frames[i].time), opts);
    EXPECT_DOUBLE_EQ(rep.frame_psnr[i], psnr(re, frames[i].image));
    EXPECT_DOUBLE_EQ(rep.frame_ssim[i], ssim(re, frames[i].image));
    sum_p += rep.frame_psnr[i];
    sum_s += rep.frame_ssim[i];
  }
  EXPECT_NEAR(rep.mean_psnr, sum_p / 3.0, 1e-12);
  EXPECT_NEAR(rep.mean_ssim, sum_s / 3.0, 1e-12);

  auto j = rep.to_json();
  EXPECT_EQ(j["lpips"], "unavailable");
  EXPECT_EQ(j["frames"].size(), 3u);
  EXPECT_NE(rep.table().find("PSNR"), std::string::npos);

  // deterministic: a second evaluation reproduces the numbers exactly
  EvalReport rep2 = evaluate(m, frames, opts);
  for (size_t i = 0; i < frames.size(); ++i)
    EXPECT_DOUBLE_EQ(rep.frame_psnr[i], rep2.frame_psnr[i]);
}
