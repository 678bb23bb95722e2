#include <gtest/gtest.h>

#include "ssdl/dedim.hpp"

using namespace ssdl;

namespace {

FeatureTable gaussian_table(std::size_t n, Eigen::Index d, double offset, std::uint64_t seed,
                            const std::string& prefix = "r") {
  Rng rng(seed);
  std::normal_distribution<double> g(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(n), d);
  for (Eigen::Index k = 0; k < x.size(); ++k) x.data()[k] = g(rng) + offset;
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < n; ++i) ids.push_back(prefix + std::to_string(i));
  return FeatureTable(ids, x);
}

}  // namespace

TEST(Dedim, IdenticalTablesGiveZero) {
  const auto a = gaussian_table(60, 4, 0.0, 1);
  const auto r = dedim_cosine(a, a, {40, 10, 16, 3});
  EXPECT_EQ(r.per_round.size(), 10u);
  for (double v : r.per_round) EXPECT_NEAR(v, 0.0, 1e-12);
  EXPECT_NEAR(r.mean, 0.0, 1e-12);
}

TEST(Dedim, DisjointSupportsGiveOne) {
  Matrix xa = Matrix::Zero(4, 2), xb = Matrix::Constant(4, 2, 10.0);
  xa(0, 0) = xa(0, 1) = 1.0;
  xb(0, 0) = xb(0, 1) = 11.0;
  // With the 1e-6 floor on empty bins the vectors are only nearly orthogonal.
  EXPECT_NEAR(dedim_round(xa, xb, 4), 1.0, 1e-5);
}

TEST(Dedim, SymmetricUnderSwap) {
  const auto a = gaussian_table(70, 3, 0.0, 2, "a");
  const auto b = gaussian_table(55, 3, 1.0, 3, "b");
  for (std::uint64_t seed : {0u, 7u, 99u}) {
    const auto ab = dedim_cosine(a, b, {40, 10, 16, seed});
    const auto ba = dedim_cosine(b, a, {40, 10, 16, seed});
    EXPECT_EQ(ab.mean, ba.mean);
    EXPECT_EQ(ab.std, ba.std);
  }
}

TEST(Dedim, RangeAndDeterminism) {
  const auto a = gaussian_table(50, 5, 0.0, 4);
  const auto b = gaussian_table(50, 5, 0.7, 5);
  const auto r1 = dedim_cosine(a, b, {20, 12, 8, 11});
  const auto r2 = dedim_cosine(a, b, {20, 12, 8, 11});
  EXPECT_EQ(r1.per_round, r2.per_round);
  for (double v : r1.per_round) {
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 1.0);
  }
  EXPECT_GE(r1.std, 0.0);
  EXPECT_EQ(r1.batch_size, 20u);
  EXPECT_EQ(r1.n_batches, 12u);
  EXPECT_EQ(r1.seed, 11u);
}

TEST(Dedim, StdUsesSampleDenominator) {
  const auto a = gaussian_table(50, 2, 0.0, 6);
  const auto b = gaussian_table(50, 2, 0.5, 7);
  const auto r = dedim_cosine(a, b, {30, 4, 8, 1});
  double ss = 0.0;
  for (double v : r.per_round) ss += (v - r.mean) * (v - r.mean);
  EXPECT_NEAR(r.std, std::sqrt(ss / 3.0), 1e-15);
}

TEST(Dedim, LargerShiftIsFarther) {
  const auto a = gaussian_table(80, 8, 0.0, 8);
  const auto near = gaussian_table(80, 8, 0.0, 9);
  const auto far = gaussian_table(80, 8, 8.0, 9);
  EXPECT_GT(dedim_cosine(a, far).mean, dedim_cosine(a, near).mean);
}

TEST(Dedim, Errors) {
  const auto a = gaussian_table(30, 2, 0.0, 1);
  EXPECT_THROW(dedim_cosine(a, a), DataError);  // default batch of 40 exceeds 30 rows
  EXPECT_THROW(dedim_cosine(a, gaussian_table(50, 3, 0.0, 2)), DataError);
  EXPECT_THROW(dedim_cosine(a, a, {0, 10, 16, 0}), DataError);
  EXPECT_THROW(dedim_cosine(a, a, {10, 0, 16, 0}), DataError);
  EXPECT_THROW(dedim_cosine(a, a, {10, 10, 0, 0}), DataError);
}

TEST(Dedim, SamplingWithoutReplacement) {
  Rng rng(4);
  auto idx = sample_without_replacement(20, 20, rng);
  std::sort(idx.begin(), idx.end());
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(idx[i], i);
}

TEST(Dedim, CosineDistanceBasics) {
  const std::vector<double> u{1, 0}, v{0, 1}, w{2, 0};
  EXPECT_DOUBLE_EQ(cosine_distance(u, v), 1.0);
  EXPECT_DOUBLE_EQ(cosine_distance(u, w), 0.0);
  const std::vector<double> z{0, 0};
  EXPECT_THROW(cosine_distance(u, z), NumericError);
}
