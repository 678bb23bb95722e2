#pragma once

// Batch-sampled cosine dataset dissimilarity between two feature tables.
//
// Each round draws n_b rows without replacement from both tables, builds
// per-dimension histograms over the shared (union) range of the two batches,
// concatenates the per-dimension probabilities into one vector per side, and
// records the cosine distance between the two vectors.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <vector>

#include "ssdl/density.hpp"
#include "ssdl/feature_table.hpp"

namespace ssdl {

struct DedimResult {
  double mean = 0.0;
  double std = 0.0;
  std::size_t batch_size = 0;
  std::size_t n_batches = 0;
  std::uint64_t seed = 0;
  std::vector<double> per_round;
};

struct DedimOptions {
  std::size_t batch_size = 40;
  std::size_t n_batches = 10;
  int bins = kDefaultBins;
  std::uint64_t seed = 0;
};

// k distinct indices from [0, n), partial Fisher-Yates.
inline std::vector<std::size_t> sample_without_replacement(std::size_t n, std::size_t k, Rng& rng) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  for (std::size_t i = 0; i < k; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, n - 1);
    std::swap(idx[i], idx[pick(rng)]);
  }
  idx.resize(k);
  return idx;
}

inline double cosine_distance(std::span<const double> u, std::span<const double> v) {
  double uv = 0.0, uu = 0.0, vv = 0.0;
  for (std::size_t i = 0; i < u.size(); ++i) {
    uv += u[i] * v[i];
    uu += u[i] * u[i];
    vv += v[i] * v[i];
  }
  if (uu <= 0.0 || vv <= 0.0) throw NumericError("zero-norm density vector");
  const double dist = 1.0 - uv / (std::sqrt(uu) * std::sqrt(vv));
  return std::clamp(dist, 0.0, 1.0);
}

// Distance for one pair of batches (rows of xa and xb).
inline double dedim_round(const Matrix& xa, const Matrix& xb, int bins) {
  std::vector<double> u, v;
  std::vector<double> ca(static_cast<std::size_t>(xa.rows())), cb(static_cast<std::size_t>(xb.rows()));
  for (Eigen::Index r = 0; r < xa.cols(); ++r) {
    for (Eigen::Index i = 0; i < xa.rows(); ++i) ca[static_cast<std::size_t>(i)] = xa(i, r);
    for (Eigen::Index i = 0; i < xb.rows(); ++i) cb[static_cast<std::size_t>(i)] = xb(i, r);
    const double lo = std::min(*std::min_element(ca.begin(), ca.end()), *std::min_element(cb.begin(), cb.end()));
    const double hi = std::max(*std::max_element(ca.begin(), ca.end()), *std::max_element(cb.begin(), cb.end()));
    const auto edges = equal_width_edges(lo, hi, bins);
    const auto ha = build_histogram(ca, edges);
    const auto hb = build_histogram(cb, edges);
    u.insert(u.end(), ha.probs.begin(), ha.probs.end());
    v.insert(v.end(), hb.probs.begin(), hb.probs.end());
  }
  return cosine_distance(u, v);
}

// Both sides draw their batch from the same per-round stream, so swapping the
// arguments reproduces the same batches and the same distances.
inline DedimResult dedim_cosine(const FeatureTable& a, const FeatureTable& b, const DedimOptions& opt = {}) {
  if (a.d() != b.d()) throw DataError("dedim: tables have different dimensions");
  if (opt.batch_size == 0) throw DataError("dedim: batch size must be >= 1");
  if (opt.n_batches == 0) throw DataError("dedim: need at least one batch");
  if (opt.bins < 1) throw DataError("dedim: bin count must be >= 1");
  if (opt.batch_size > a.n() || opt.batch_size > b.n()) {
    throw DataError("dedim: batch size " + std::to_string(opt.batch_size) + " exceeds table size (" +
                    std::to_string(a.n()) + ", " + std::to_string(b.n()) + ")");
  }
  DedimResult res;
  res.batch_size = opt.batch_size;
  res.n_batches = opt.n_batches;
  res.seed = opt.seed;
  const auto d = static_cast<Eigen::Index>(a.d());
  const auto nb = static_cast<Eigen::Index>(opt.batch_size);
  Matrix xa(nb, d), xb(nb, d);
  for (std::size_t round = 0; round < opt.n_batches; ++round) {
    const auto stream = derive_seed(opt.seed, round);
    Rng rng_a(stream), rng_b(stream);
    const auto ia = sample_without_replacement(a.n(), opt.batch_size, rng_a);
    const auto ib = sample_without_replacement(b.n(), opt.batch_size, rng_b);
    for (Eigen::Index k = 0; k < nb; ++k) {
      xa.row(k) = a.features().row(static_cast<Eigen::Index>(ia[static_cast<std::size_t>(k)]));
      xb.row(k) = b.features().row(static_cast<Eigen::Index>(ib[static_cast<std::size_t>(k)]));
    }
    res.per_round.push_back(dedim_round(xa, xb, opt.bins));
  }
  const double n = static_cast<double>(res.per_round.size());
  res.mean = std::accumulate(res.per_round.begin(), res.per_round.end(), 0.0) / n;
  if (res.per_round.size() > 1) {
    double ss = 0.0;
    for (double x : res.per_round) ss += (x - res.mean) * (x - res.mean);
    res.std = std::sqrt(ss / (n - 1.0));
  }
  return res;
}

}  // namespace ssdl
