#include <gtest/gtest.h>

#include <cmath>

#include "dtrf/regularize.hpp"
#include "oracles.hpp"

using namespace dtrf;

TEST(KernelWeights, InteriorS3Halves) {
  auto w = kernel_weights(1, 3, {3, 0.5});
  ASSERT_EQ(w.size(), 2u);
  EXPECT_EQ(w[0].first, 0);
  EXPECT_EQ(w[1].first, 2);
  EXPECT_DOUBLE_EQ(w[0].second, 0.5);
  EXPECT_DOUBLE_EQ(w[1].second, 0.5);
}

TEST(KernelWeights, BoundarySingletonIsOne) {
  auto w = kernel_weights(0, 3, {3, 0.5});
  ASSERT_EQ(w.size(), 1u);
  EXPECT_EQ(w[0].first, 1);
  EXPECT_DOUBLE_EQ(w[0].second, 1.0);
}

TEST(KernelWeights, S5Sigma05Interior) {
  // Evaluated directly from the kernel formula: distances 1,1,2,2 give
  // exp(-2), exp(-2), exp(-8), exp(-8); normalized:
  double e2 = std::exp(-2.0), e8 = std::exp(-8.0);
  double total = 2 * (e2 + e8);
  double w1 = e2 / total, w2 = e8 / total;
  EXPECT_NEAR(w1, 0.4987636884, 1e-9);  // frozen from the formula above
  EXPECT_NEAR(w2, 0.0012363116, 1e-9);

  auto w = kernel_weights(2, 5, {5, 0.5});
  ASSERT_EQ(w.size(), 4u);
  // window order: 0,1,3,4 -> distances 2,1,1,2
  EXPECT_NEAR(w[0].second, w2, 1e-12);
  EXPECT_NEAR(w[1].second, w1, 1e-12);
  EXPECT_NEAR(w[2].second, w1, 1e-12);
  EXPECT_NEAR(w[3].second, w2, 1e-12);
}

TEST(KernelWeights, SumToOneEverywhere) {
  for (int n_t : {2, 3, 4, 5, 6, 9})
    for (int S : {3, 5, 7})
      for (bool center : {false, true})
        for (int i = 0; i < n_t; ++i) {
          auto w = kernel_weights(i, n_t, {S, 0.5, center});
          if (w.empty()) continue;
          double total = 0;
          for (auto& [idx, wt] : w) total += wt;
          EXPECT_NEAR(total, 1.0, 1e-12) << "n_t=" << n_t << " S=" << S << " i=" << i;
        }
}

TEST(KernelWeights, EmptyWindowWhenStatic) {
  EXPECT_TRUE(kernel_weights(0, 1, {3, 0.5}).empty());
}

TEST(KernelWeights, IncludeCenterFlag) {
  auto w = kernel_weights(1, 3, {3, 0.5, true});
  ASSERT_EQ(w.size(), 3u);
  EXPECT_EQ(w[1].first, 1);  // center present
  double total = 0;
  for (auto& [idx, wt] : w) total += wt;
  EXPECT_NEAR(total, 1.0, 1e-12);
}

TEST(Smoothing, ConstantFibersGiveZero) {
  CpFactors<double> f;
  f.dims = {3, 3, 3, 4};
  f.rank = 2;
  f.resize_zero();
  std::fill(f.t.begin(), f.t.end(), 0.8);
  EXPECT_DOUBLE_EQ(smoothing_loss(f, {3, 0.5}), 0.0);

  MmFactors<double> m;
  m.dims = {3, 3, 3, 4};
  m.r1 = m.r2 = m.r3 = 1;
  m.resize_zero();
  // row-constant time matrices: fiber over columns is constant per row
  for (int l = 0; l < 3; ++l)
    for (int it = 0; it < 4; ++it) m.zt[size_t(l * 4 + it)] = 0.3 * l;
  EXPECT_DOUBLE_EQ(smoothing_loss(m, {3, 0.5}), 0.0);
}

TEST(Smoothing, HandValueOnSpikeFiber) {
  // v^T = (0,1,0), S=3: residuals (0-1, 1-0, 0-1) -> loss 3.0
  CpFactors<double> f;
  f.dims = {2, 2, 2, 3};
  f.rank = 1;
  f.resize_zero();
  f.t = {0, 1, 0};
  EXPECT_DOUBLE_EQ(smoothing_loss(f, {3, 0.5}), 3.0);

  // the same fiber as a single MM matrix row
  MmFactors<double> m;
  m.dims = {2, 2, 2, 3};
  m.r3 = 1;  // only the XT family populated
  m.resize_zero();
  m.xt[0] = 0;
  m.xt[1] = 1;
  m.xt[2] = 0;
  EXPECT_DOUBLE_EQ(smoothing_loss(m, {3, 0.5}), 3.0);
}

TEST(Smoothing, SpatialMatricesDoNotContribute) {
  MmFactors<double> m;
  m.dims = {3, 3, 3, 3};
  m.r1 = m.r2 = m.r3 = 1;
  m.resize_zero();
  Rng rng(4);
  for (auto* v : {&m.xy, &m.xz, &m.yz})
    for (auto& e : *v) e = rng.uniform(-1, 1);
  EXPECT_DOUBLE_EQ(smoothing_loss(m, {3, 0.5}), 0.0);
}

TEST(Smoothing, ShrinkingSpikeDecreasesLoss) {
  CpFactors<double> f;
  f.dims = {2, 2, 2, 5};
  f.rank = 1;
  f.resize_zero();
  f.t = {0.2, 0.2, 1.0, 0.2, 0.2};
  double prev = smoothing_loss(f, {3, 0.5});
  for (double spike : {0.8, 0.6, 0.4, 0.2001}) {
    f.t[2] = spike;
    double cur = smoothing_loss(f, {3, 0.5});
    EXPECT_LT(cur, prev);
    prev = cur;
  }
}

TEST(Smoothing, NonNegativeZeroIffConstant) {
  Rng rng(31);
  for (int rep = 0; rep < 20; ++rep) {
    CpFactors<double> f;
    f.dims = {2, 2, 2, 4};
    f.rank = 1;
    f.resize_zero();
    bool constant = rep % 2 == 0;
    double c = rng.uniform(-1, 1);
    for (int i = 0; i < 4; ++i) f.t[i] = constant ? c : rng.uniform(-1, 1);
    double loss = smoothing_loss(f, {3, 0.5});
    EXPECT_GE(loss, 0.0);
    if (constant)
      EXPECT_NEAR(loss, 0.0, 1e-18);
    else
      EXPECT_GT(loss, 1e-12);  // random fibers are non-constant w.p. 1
  }
}

TEST(Smoothing, GradMatchesFiniteDifferences) {
  Rng rng(77);
  CpFactors<double> f;
  f.dims = {3, 4, 3, 5};
  f.rank = 3;
  f.resize_zero();
  for (auto& e : f.t) e = rng.uniform(-1, 1);
  CpFactors<double> g;
  g.dims = f.dims;
  g.rank = f.rank;
  g.resize_zero();
  smoothing_loss(f, {5, 0.5}, &g);
  auto fd = oracle::finite_diff(f.t, 1e-5, [&] { return smoothing_loss(f, {5, 0.5}); });
  EXPECT_LT(oracle::max_rel_err(g.t, fd), 1e-4);

  MmFactors<double> m;
  m.dims = {3, 4, 3, 5};
  m.r1 = m.r2 = m.r3 = 2;
  m.resize_zero();
  for (auto* v : {&m.zt, &m.yt, &m.xt})
    for (auto& e : *v) e = rng.uniform(-1, 1);
  MmFactors<double> mg;
  mg.dims = m.dims;
  mg.r1 = mg.r2 = mg.r3 = 2;
  mg.resize_zero();
  smoothing_loss(m, {3, 0.5}, &mg);
  for (auto [arr, grad] : {std::pair<std::vector<double>*, std::vector<double>*>{&m.zt, &mg.zt},
                           {&m.yt, &mg.yt},
                           {&m.xt, &mg.xt}}) {
    auto fd2 = oracle::finite_diff(*arr, 1e-5, [&] { return smoothing_loss(m, {3, 0.5}); });
    EXPECT_LT(oracle::max_rel_err(*grad, fd2), 1e-4);
  }
}

TEST(L1, ZeroAndConstant) {
  CpFactors<double> f;
  f.dims = {3, 3, 3, 2};
  f.rank = 2;
  f.resize_zero();
  EXPECT_DOUBLE_EQ(l1_loss(f), 0.0);
  for (auto* v : {&f.x, &f.y, &f.z, &f.t})
    for (auto& e : *v) e = -0.37;
  EXPECT_NEAR(l1_loss(f), 0.37, 1e-12);
}

TEST(L1, MatchesBruteForce) {
  Rng rng(8);
  MmFactors<double> m;
  m.dims = {4, 3, 5, 2};
  m.r1 = 2;
  m.r2 = 1;
  m.r3 = 3;
  m.resize_zero();
  double sum = 0;
  size_t count = 0;
  for (auto* v : {&m.xy, &m.zt, &m.xz, &m.yt, &m.yz, &m.xt})
    for (auto& e : *v) {
      e = rng.uniform(-2, 2);
      sum += std::abs(e);
      ++count;
    }
  EXPECT_NEAR(l1_loss(m), sum / double(count), 1e-12);
  auto [s, c] = l1_sum_count(m);
  EXPECT_NEAR(s, sum, 1e-12);
  EXPECT_EQ(size_t(c), count);
}

TEST(L1, SignGradient) {
  CpFactors<double> f;
  f.dims = {2, 2, 2, 1};
  f.rank = 1;
  f.resize_zero();
  f.x = {0.5, -0.2};
  CpFactors<double> g;
  g.dims = f.dims;
  g.rank = 1;
  g.resize_zero();
  l1_sign_grad(f, g, 0.1);
  EXPECT_DOUBLE_EQ(g.x[0], 0.1);
  EXPECT_DOUBLE_EQ(g.x[1], -0.1);
  EXPECT_DOUBLE_EQ(g.y[0], 0.0);  // zero entries get zero subgradient
}
