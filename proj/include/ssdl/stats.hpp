#pragma once

// Evaluation statistics: accuracy, rank AUROC, Pearson r, Wilcoxon signed-rank.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <span>
#include <vector>

#include "ssdl/core.hpp"

namespace ssdl {

inline double accuracy(std::span<const int> predictions, std::span<const int> labels) {
  if (predictions.size() != labels.size()) throw DataError("accuracy: length mismatch");
  if (predictions.empty()) throw DataError("accuracy: empty input");
  std::size_t hits = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) hits += predictions[i] == labels[i];
  return static_cast<double>(hits) / static_cast<double>(labels.size());
}

// 1-based ranks with ties given their average rank.
inline std::vector<double> midranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

// Probability that a random positive (flag true) outscores a random negative,
// ties counting one half. Computed from midranks (Mann-Whitney U).
inline double auroc(std::span<const double> scores, const std::vector<bool>& positive) {
  if (scores.size() != positive.size()) throw DataError("auroc: length mismatch");
  const auto n_pos = static_cast<double>(std::count(positive.begin(), positive.end(), true));
  const double n_neg = static_cast<double>(positive.size()) - n_pos;
  if (n_pos == 0 || n_neg == 0) throw DataError("auroc: both classes must be present");
  const auto ranks = midranks(scores);
  double rank_sum = 0.0;
  for (std::size_t i = 0; i < ranks.size(); ++i) {
    if (positive[i]) rank_sum += ranks[i];
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

inline double pearson(std::span<const double> xs, std::span<const double> ys) {
  if (xs.size() != ys.size()) throw DataError("pearson: length mismatch");
  if (xs.size() < 2) throw DataError("pearson: need at least 2 points");
  const double n = static_cast<double>(xs.size());
  const double mx = std::accumulate(xs.begin(), xs.end(), 0.0) / n;
  const double my = std::accumulate(ys.begin(), ys.end(), 0.0) / n;
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    sxy += (xs[i] - mx) * (ys[i] - my);
    sxx += (xs[i] - mx) * (xs[i] - mx);
    syy += (ys[i] - my) * (ys[i] - my);
  }
  if (sxx == 0.0 || syy == 0.0) throw DataError("pearson: correlation undefined for constant input");
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

struct WilcoxonResult {
  double w_plus = 0.0;   // rank sum of positive differences
  double w_minus = 0.0;  // rank sum of negative differences
  std::size_t n = 0;     // pairs left after dropping zero differences
  bool exact = false;
  double p_value = 1.0;  // two-sided
};

inline constexpr std::size_t kWilcoxonExactLimit = 20;
inline constexpr std::size_t kWilcoxonMinPairs = 5;

// Paired two-sided Wilcoxon signed-rank test on a - b. Zero differences are
// dropped; ties among |differences| get midranks. Exact null distribution for
// n <= 20, normal approximation with tie and continuity correction above.
inline WilcoxonResult wilcoxon_signed_rank(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) throw DataError("wilcoxon: samples must be paired");
  std::vector<double> diff;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (a[i] != b[i]) diff.push_back(a[i] - b[i]);
  }
  if (diff.empty()) throw DataError("wilcoxon: all differences are zero");
  if (diff.size() < kWilcoxonMinPairs) {
    throw DataError("wilcoxon: need at least " + std::to_string(kWilcoxonMinPairs) + " non-zero differences, got " +
                    std::to_string(diff.size()));
  }
  WilcoxonResult res;
  res.n = diff.size();
  std::vector<double> mag(diff.size());
  std::transform(diff.begin(), diff.end(), mag.begin(), [](double x) { return std::abs(x); });
  const auto ranks = midranks(mag);
  for (std::size_t i = 0; i < diff.size(); ++i) (diff[i] > 0 ? res.w_plus : res.w_minus) += ranks[i];

  if (res.n <= kWilcoxonExactLimit) {
    res.exact = true;
    // Doubled midranks are integers; count sign patterns by doubled W+.
    std::vector<int> r2(ranks.size());
    std::transform(ranks.begin(), ranks.end(), r2.begin(), [](double r) { return static_cast<int>(std::lround(2 * r)); });
    const int total = std::accumulate(r2.begin(), r2.end(), 0);
    std::vector<double> ways(static_cast<std::size_t>(total) + 1, 0.0);
    ways[0] = 1.0;
    int reach = 0;
    for (int r : r2) {
      for (int s = reach; s >= 0; --s) ways[static_cast<std::size_t>(s + r)] += ways[static_cast<std::size_t>(s)];
      reach += r;
    }
    const double patterns = std::ldexp(1.0, static_cast<int>(res.n));
    const auto w = static_cast<int>(std::lround(2 * res.w_plus));
    double lower = 0.0, upper = 0.0;
    for (int s = 0; s <= total; ++s) {
      if (s <= w) lower += ways[static_cast<std::size_t>(s)];
      if (s >= w) upper += ways[static_cast<std::size_t>(s)];
    }
    res.p_value = std::min(1.0, 2.0 * std::min(lower, upper) / patterns);
    return res;
  }

  const double n = static_cast<double>(res.n);
  const double mean = n * (n + 1.0) / 4.0;
  double var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0;
  std::vector<double> sorted = mag;
  std::sort(sorted.begin(), sorted.end());
  for (std::size_t i = 0; i < sorted.size();) {
    std::size_t j = i;
    while (j + 1 < sorted.size() && sorted[j + 1] == sorted[i]) ++j;
    const double t = static_cast<double>(j - i + 1);
    var -= (t * t * t - t) / 48.0;
    i = j + 1;
  }
  if (var <= 0.0) {
    res.p_value = 1.0;
    return res;
  }
  const double dev = std::max(0.0, std::abs(res.w_plus - mean) - 0.5);
  res.p_value = std::min(1.0, std::erfc(dev / std::sqrt(var) / std::sqrt(2.0)));
  return res;
}

struct MeanStd {
  double mean = 0.0;
  double std = 0.0;
};

// Mean and sample standard deviation (n-1); NaN entries are skipped.
inline MeanStd mean_std(std::span<const double> xs) {
  std::vector<double> v;
  for (double x : xs) {
    if (!std::isnan(x)) v.push_back(x);
  }
  MeanStd out;
  if (v.empty()) return {std::nan(""), std::nan("")};
  out.mean = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v) ss += (x - out.mean) * (x - out.mean);
    out.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return out;
}

}  // namespace ssdl
