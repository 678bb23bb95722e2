#pragma once

// Drop the highest-harm fraction of an unlabelled set.

#include <algorithm>
#include <numeric>
#include <span>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "ssdl/feature_table.hpp"

namespace ssdl {

struct FilterDecision {
  std::vector<std::string> kept;     // input order
  std::vector<std::string> dropped;  // input order
  double drop_fraction = 0.0;
};

// Drops round-half-up(f * n) rows with the highest harm. Among equal harms the
// later row is dropped first, so earlier rows are kept preferentially.
inline FilterDecision rank_and_filter(std::span<const ScoredId> scores, double drop_fraction) {
  for (const auto& s : scores) {
    if (!std::isfinite(s.harm)) throw DataError("harm score for '" + s.id + "' is not finite");
  }
  const std::size_t n = scores.size();
  const std::size_t n_drop = round_half_up_count(drop_fraction, n);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (scores[a].harm != scores[b].harm) return scores[a].harm > scores[b].harm;
    return a > b;
  });
  std::vector<bool> drop(n, false);
  for (std::size_t k = 0; k < n_drop; ++k) drop[order[k]] = true;
  FilterDecision out;
  out.drop_fraction = drop_fraction;
  for (std::size_t i = 0; i < n; ++i) (drop[i] ? out.dropped : out.kept).push_back(scores[i].id);
  return out;
}

inline FeatureTable apply_filter(const FeatureTable& table, const FilterDecision& decision) {
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < table.n(); ++i) index.emplace(table.ids()[i], i);
  for (const auto& id : decision.dropped) {
    if (!index.count(id)) throw DataError("filter decision names unknown id '" + id + "'");
  }
  std::vector<std::size_t> rows;
  rows.reserve(decision.kept.size());
  for (const auto& id : decision.kept) {
    const auto it = index.find(id);
    if (it == index.end()) throw DataError("filter decision names unknown id '" + id + "'");
    rows.push_back(it->second);
  }
  std::sort(rows.begin(), rows.end());
  return table.select(rows);
}

// Score list aligned with the table's row order; ids missing from `scores` are an error.
inline std::vector<ScoredId> align_scores(const FeatureTable& table, std::span<const ScoredId> scores) {
  std::unordered_map<std::string, double> by_id;
  for (const auto& s : scores) by_id.emplace(s.id, s.harm);
  std::vector<ScoredId> out;
  out.reserve(table.n());
  for (const auto& id : table.ids()) {
    const auto it = by_id.find(id);
    if (it == by_id.end()) throw DataError("no harm score for id '" + id + "'");
    out.push_back({id, it->second});
  }
  return out;
}

}  // namespace ssdl
