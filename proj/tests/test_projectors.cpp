#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "hsa/error.hpp"
#include "hsa/ops.hpp"
#include "hsa/projectors.hpp"

namespace hsa {
namespace {

ProjectorConfig small_config() {
  ProjectorConfig cfg;
  cfg.dim = 6;
  cfg.tokens = 4;
  cfg.heads = 2;
  cfg.state = 3;
  cfg.alpha = 0.5;
  return cfg;
}

Tensor random_rows(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<double> v(n * d);
  for (auto& x : v) x = dist(rng);
  return Tensor({n, d}, v);
}

TEST(Pooling, Segments) {
  EXPECT_EQ(pooling_segments(8, 4), (std::vector<std::vector<int>>{{0, 1}, {2, 3}, {4, 5}, {6, 7}}));
  EXPECT_EQ(pooling_segments(7, 4), (std::vector<std::vector<int>>{{0, 1}, {2, 3}, {4, 5}, {6}}));
  EXPECT_EQ(pooling_segments(1, 4), (std::vector<std::vector<int>>{{0}, {0}, {0}, {0}}));
  EXPECT_EQ(pooling_segments(2, 4), (std::vector<std::vector<int>>{{0}, {1}, {1}, {1}}));
}

TEST(GapFactors, Values) {
  EXPECT_EQ(gap_factors({1, 3, 2}, 0.5), (std::vector<double>{1.0, 1.0, 2.0, 1.5}));
  EXPECT_EQ(gap_factors({4, 4}, 0.0), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(Scan, ConstantInputMatchesGeometricSeries) {
  ParameterStore store;
  Rng rng(2);
  auto cfg = small_config();
  cfg.alpha = 0.0;
  MambaProjector proj(cfg, store, rng);
  const auto& p = proj.params();
  const std::size_t n = 12, d = 6, s = 3;
  std::vector<double> row = {0.3, -0.2, 0.5, 0.1, -0.4, 0.25};
  std::vector<double> flat;
  for (std::size_t t = 0; t < n; ++t) flat.insert(flat.end(), row.begin(), row.end());
  Tensor x({n, d}, flat);
  Tensor y = proj.scan(x, std::vector<int>(n - 1, 3));

  Tensor x1 = Tensor({1, d}, row);
  Tensor delta = softplus(p.delta(x1));
  Tensor b = p.in_b(x1);
  Tensor c = p.in_c(x1);
  for (std::size_t t = 1; t <= n; ++t) {
    for (std::size_t ch = 0; ch < d; ++ch) {
      double out = p.skip[ch] * row[ch];
      for (std::size_t j = 0; j < s; ++j) {
        const double decay = std::exp(-delta[ch] * std::exp(p.a_log.at(ch, j)));
        const double state = delta[ch] * b[j] * row[ch] * (1.0 - std::pow(decay, t)) / (1.0 - decay);
        out += c[j] * state;
      }
      EXPECT_NEAR(y.at(t - 1, ch), out, 1e-10);
    }
  }
}

TEST(Scan, MemorylessLimitIgnoresHistoryOrder) {
  ParameterStore store;
  Rng rng(3);
  MambaProjector proj(small_config(), store, rng);
  for (auto& v : proj.mutable_params().a_log.mutable_values()) v = 40.0;
  Tensor x = random_rows(9, 6, 5);
  Tensor y = proj.scan(x, {1, 2, 1, 3, 1, 1, 2, 1});
  Tensor swapped = gather_rows(x, {6, 3, 0, 5, 1, 4, 2, 7, 8});
  Tensor y2 = proj.scan(swapped, {1, 2, 1, 3, 1, 1, 2, 1});
  for (std::size_t c = 0; c < 6; ++c) {
    EXPECT_NEAR(y.at(8, c), y2.at(8, c), 1e-10);
    EXPECT_NEAR(y.at(7, c), y2.at(7, c), 1e-10);
  }
}

TEST(Scan, AlphaZeroEqualsUnbiasedScan) {
  ParameterStore store;
  Rng rng(4);
  MambaProjector proj(small_config(), store, rng);
  Tensor x = random_rows(7, 6, 9);
  const std::vector<int> unit(6, 1), gaps = {1, 4, 2, 1, 3, 5};
  proj.mutable_params().alpha = 0.0;
  Tensor with_gaps = proj.scan(x, gaps);
  proj.mutable_params().alpha = 0.8;
  Tensor bias_free = proj.scan(x, unit);
  Tensor biased = proj.scan(x, gaps);
  bool differs = false;
  for (std::size_t i = 0; i < x.numel(); ++i) {
    EXPECT_EQ(with_gaps[i], bias_free[i]);
    differs |= biased[i] != bias_free[i];
  }
  EXPECT_TRUE(differs);
  EXPECT_THROW(proj.scan(x, {1, 1}), Error);
}

TEST(Scan, FirstStepHasNoHistory) {
  ParameterStore store;
  Rng rng(6);
  MambaProjector proj(small_config(), store, rng);
  Tensor x = random_rows(4, 6, 1);
  Tensor y_full = proj.scan(x, {1, 1, 1});
  Tensor y_one = proj.scan(gather_rows(x, {0}), {});
  for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(y_full.at(0, c), y_one.at(0, c));
}

TEST(Mamba, TokenShapes) {
  ParameterStore store;
  Rng rng(7);
  MambaProjector proj(small_config(), store, rng);
  Tensor one = proj(random_rows(1, 6, 2), SequenceLayout{{0}, {}});
  ASSERT_EQ(one.shape(), (Shape{4, 6}));
  for (std::size_t r = 1; r < 4; ++r)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_EQ(one.at(r, c), one.at(0, c));
  Tensor seven = proj(random_rows(7, 6, 3), SequenceLayout{{6, 5, 4, 3, 2, 1, 0}, {1, 1, 1, 1, 1, 1}});
  EXPECT_EQ(seven.shape(), (Shape{4, 6}));
  for (double v : seven.values()) EXPECT_TRUE(std::isfinite(v));
}

TEST(Attention, ConstantValuesPassThrough) {
  ParameterStore store;
  Rng rng(8);
  CrossAttentionProjector proj(small_config(), store, rng);
  std::vector<double> row = {0.1, 0.2, -0.3, 0.4, 0.0, 1.0};
  std::vector<double> flat;
  for (int i = 0; i < 5; ++i) flat.insert(flat.end(), row.begin(), row.end());
  auto out = proj.attend(Tensor({5, 6}, flat));
  Tensor v = matmul(Tensor({1, 6}, row), proj.value_weight());
  for (std::size_t k = 0; k < 4; ++k)
    for (std::size_t c = 0; c < 6; ++c) EXPECT_NEAR(out.attended.at(k, c), v[c], 1e-12);
}

TEST(Attention, WeightsAreDistributionsAndMaskedNodesGetZero) {
  ParameterStore store;
  Rng rng(9);
  CrossAttentionProjector proj(small_config(), store, rng);
  auto out = proj.attend(random_rows(5, 6, 4), {true, false, true, true, false});
  ASSERT_EQ(out.weights.size(), 2u);
  for (const auto& w : out.weights) {
    ASSERT_EQ(w.shape(), (Shape{4, 5}));
    for (std::size_t k = 0; k < 4; ++k) {
      double total = 0.0;
      for (std::size_t j = 0; j < 5; ++j) total += w.at(k, j);
      EXPECT_NEAR(total, 1.0, 1e-12);
      EXPECT_EQ(w.at(k, 1), 0.0);
      EXPECT_EQ(w.at(k, 4), 0.0);
    }
  }
  EXPECT_EQ(out.tokens.shape(), (Shape{4, 6}));
}

TEST(Attention, NodeOrderInvariance) {
  ParameterStore store;
  Rng rng(10);
  CrossAttentionProjector proj(small_config(), store, rng);
  Tensor h = random_rows(6, 6, 11);
  const std::vector<int> perm = {3, 0, 5, 1, 4, 2};
  RowMask mask = {true, true, false, true, true, true};
  RowMask moved_mask(6);
  for (std::size_t i = 0; i < 6; ++i) moved_mask[i] = mask[static_cast<std::size_t>(perm[i])];
  Tensor a = proj(h, mask);
  Tensor b = proj(gather_rows(h, perm), moved_mask);
  for (std::size_t i = 0; i < a.numel(); ++i) EXPECT_NEAR(a[i], b[i], 1e-12);
}

}  // namespace
}  // namespace hsa
