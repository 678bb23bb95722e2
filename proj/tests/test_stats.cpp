#include <gtest/gtest.h>

#include "oracles.hpp"
#include "ssdl/stats.hpp"

using namespace ssdl;

TEST(Accuracy, Examples) {
  const std::vector<int> y{0, 1, 1, 0};
  EXPECT_DOUBLE_EQ(accuracy(y, y), 1.0);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{1, 0, 0, 1}, y), 0.0);
  EXPECT_DOUBLE_EQ(accuracy(std::vector<int>{0, 1, 1, 1}, y), 0.75);
  EXPECT_THROW(accuracy(std::vector<int>{}, std::vector<int>{}), DataError);
  EXPECT_THROW(accuracy(std::vector<int>{1}, y), DataError);
}

TEST(Auroc, Examples) {
  const std::vector<bool> flags{false, false, true, true};
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{1, 2, 3, 4}, flags), 1.0);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{7, 7, 7, 7}, flags), 0.5);
  EXPECT_DOUBLE_EQ(auroc(std::vector<double>{3, 1, 2, 4}, flags), 0.75);
  EXPECT_THROW(auroc(std::vector<double>{1, 2}, std::vector<bool>{true, true}), DataError);
  EXPECT_THROW(auroc(std::vector<double>{1}, flags), DataError);
}

TEST(Auroc, MatchesPairCounting) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + static_cast<std::size_t>(trial % 49);
    std::uniform_int_distribution<int> level(0, 6);
    std::bernoulli_distribution coin(0.4);
    std::vector<double> s(n);
    std::vector<bool> pos(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = level(rng) * 0.5;
      pos[i] = coin(rng);
    }
    pos[0] = true;
    pos[1] = false;
    EXPECT_NEAR(auroc(s, pos), oracle::auroc(s, pos), 1e-12);
  }
}

TEST(Midranks, Ties) {
  EXPECT_EQ(midranks(std::vector<double>{10, 20, 10, 30}), (std::vector<double>{1.5, 3, 1.5, 4}));
}

TEST(Pearson, Examples) {
  const std::vector<double> x{1, 2, 3};
  EXPECT_NEAR(pearson(x, std::vector<double>{2, 4, 6}), 1.0, 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{-1, -2, -3}), -1.0, 1e-15);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 2, 4}), 0.9820, 5e-5);
  EXPECT_NEAR(pearson(x, std::vector<double>{1, 2, 4}), 3.0 / std::sqrt(28.0 / 3.0), 1e-12);
  EXPECT_THROW(pearson(x, std::vector<double>{5, 5, 5}), DataError);
  EXPECT_THROW(pearson(std::vector<double>{1}, std::vector<double>{1}), DataError);
}

TEST(Wilcoxon, AllPositiveTen) {
  std::vector<double> a(10), b(10, 0.0);
  for (int i = 0; i < 10; ++i) a[static_cast<std::size_t>(i)] = 1.0 + i;
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_TRUE(r.exact);
  EXPECT_EQ(r.n, 10u);
  EXPECT_DOUBLE_EQ(r.w_minus, 0.0);
  EXPECT_DOUBLE_EQ(r.p_value, 2.0 / 1024.0);
  EXPECT_NEAR(r.p_value, 0.001953, 5e-7);
}

TEST(Wilcoxon, SymmetricMixedDifferences) {
  const std::vector<double> a{1, -1, 2, -2, 3, -3}, b(6, 0.0);
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_GT(r.p_value, 0.5);
  EXPECT_NEAR(r.p_value, oracle::wilcoxon_p(a, b), 1e-12);
}

TEST(Wilcoxon, Errors) {
  const std::vector<double> a{1, 2, 3, 4, 5};
  EXPECT_THROW(wilcoxon_signed_rank(a, a), DataError);
  EXPECT_THROW(wilcoxon_signed_rank(a, std::vector<double>{1, 2}), DataError);
  EXPECT_THROW(wilcoxon_signed_rank(std::vector<double>{1, 2, 3, 4}, std::vector<double>{0, 0, 0, 0}), DataError);
}

TEST(Wilcoxon, ExactMatchesEnumerationWithTiesAndZeros) {
  Rng rng(4);
  std::uniform_int_distribution<int> v(-4, 4);
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 6 + static_cast<std::size_t>(trial % 11);
    std::vector<double> a(n), b(n);
    for (std::size_t i = 0; i < n; ++i) {
      a[i] = v(rng);
      b[i] = v(rng) * 0.5;
    }
    std::size_t nonzero = 0;
    for (std::size_t i = 0; i < n; ++i) nonzero += a[i] != b[i];
    if (nonzero < kWilcoxonMinPairs) continue;
    EXPECT_NEAR(wilcoxon_signed_rank(a, b).p_value, oracle::wilcoxon_p(a, b), 1e-12);
  }
}

TEST(Wilcoxon, NormalApproximationAboveTwenty) {
  std::vector<double> a(30), b(30, 0.0);
  for (std::size_t i = 0; i < 30; ++i) a[i] = (i % 3 == 0 ? -1.0 : 1.0) * static_cast<double>(i + 1);
  const auto r = wilcoxon_signed_rank(a, b);
  EXPECT_FALSE(r.exact);
  const double n = 30, mean = n * (n + 1) / 4, sd = std::sqrt(n * (n + 1) * (2 * n + 1) / 24);
  const double z = (std::abs(r.w_plus - mean) - 0.5) / sd;
  EXPECT_NEAR(r.p_value, std::erfc(z / std::sqrt(2.0)), 1e-12);
  EXPECT_DOUBLE_EQ(r.w_plus + r.w_minus, n * (n + 1) / 2);
}

TEST(MeanStd, SkipsNan) {
  const auto ms = mean_std(std::vector<double>{1, std::nan(""), 3});
  EXPECT_DOUBLE_EQ(ms.mean, 2.0);
  EXPECT_DOUBLE_EQ(ms.std, std::sqrt(2.0));
  EXPECT_TRUE(std::isnan(mean_std(std::vector<double>{}).mean));
}
