#pragma once

// Synthetic stand-ins for the labelled target set, its test split, an
// in-distribution unlabelled pool (negative class only: prior shift) and an
// out-of-distribution pool (the negative class translated: covariate shift).

#include <cstdint>
#include <string>
#include <vector>

#include "ssdl/feature_table.hpp"

namespace ssdl {

struct SyntheticSpec {
  std::size_t d = 16;
  double separation = 4.5;  // distance between the two class centres, in units of spread
  double spread = 1.0;      // per-coordinate standard deviation of the negative class
  double positive_spread = 0.9;  // same for the positive class, in units of `spread`
  double shift = 4.0;       // OOD translation of every coordinate, in units of spread
  std::size_t n_l = 40;
  std::size_t n_u = 90;
  std::size_t n_test = 62;
  std::size_t pool_size = 0;  // rows per unlabelled pool; 0 means n_u
};

inline void validate(const SyntheticSpec& s) {
  if (s.d < 1) throw DataError("synthetic: d must be >= 1");
  if (!(s.spread > 0.0)) throw DataError("synthetic: spread must be > 0");
  if (!(s.positive_spread > 0.0)) throw DataError("synthetic: positive spread must be > 0");
  if (!(s.shift >= 0.0)) throw DataError("synthetic: shift magnitude must be >= 0");
  if (!(s.separation >= 0.0)) throw DataError("synthetic: separation must be >= 0");
  if (s.n_l < 2 || s.n_l % 2 != 0) throw DataError("synthetic: n_l must be even and >= 2");
  if (s.n_test < 2 || s.n_test % 2 != 0) throw DataError("synthetic: n_test must be even (balanced classes)");
  if (s.n_u < 1) throw DataError("synthetic: n_u must be >= 1");
}

struct SyntheticData {
  FeatureTable labelled;
  FeatureTable test;
  FeatureTable in_dist_pool;
  FeatureTable ood_pool;
};

namespace detail {

// Class 0 (negative) is centred at -separation/2 on the first coordinate,
// class 1 at +separation/2. Negative rows have per-coordinate standard deviation
// `spread`, positive rows `positive_spread * spread`.
inline Vector class_centre(const SyntheticSpec& s, int label) {
  Vector c = Vector::Zero(static_cast<Eigen::Index>(s.d));
  c(0) = (label == 0 ? -0.5 : 0.5) * s.separation * s.spread;
  return c;
}

inline FeatureTable draw_gaussian_rows(const SyntheticSpec& s, const std::vector<int>& labels, const Vector& offset,
                                       const std::string& prefix, bool keep_labels, Rng& rng) {
  std::normal_distribution<double> noise(0.0, 1.0);
  Matrix x(static_cast<Eigen::Index>(labels.size()), static_cast<Eigen::Index>(s.d));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Vector centre = class_centre(s, labels[i]) + offset;
    const double sd = labels[i] == 1 ? s.positive_spread * s.spread : s.spread;
    for (Eigen::Index j = 0; j < x.cols(); ++j) x(static_cast<Eigen::Index>(i), j) = centre(j) + sd * noise(rng);
    ids.push_back(prefix + std::to_string(i));
  }
  std::optional<std::vector<int>> y;
  if (keep_labels) y = labels;
  return FeatureTable(std::move(ids), std::move(x), std::move(y));
}

inline std::vector<int> balanced_labels(std::size_t n) {
  std::vector<int> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = i < n / 2 ? 0 : 1;
  return y;
}

}  // namespace detail

// The OOD pool is the negative class translated by shift * spread in every coordinate.
inline Vector ood_shift_vector(const SyntheticSpec& s) {
  return Vector::Constant(static_cast<Eigen::Index>(s.d), s.shift * s.spread);
}

inline SyntheticData gen_synthetic(const SyntheticSpec& spec, std::uint64_t seed) {
  validate(spec);
  const std::size_t pool = spec.pool_size ? spec.pool_size : spec.n_u;
  const Vector none = Vector::Zero(static_cast<Eigen::Index>(spec.d));
  SyntheticData out;
  Rng r_lab(derive_seed(seed, 11)), r_test(derive_seed(seed, 12)), r_in(derive_seed(seed, 13)),
      r_ood(derive_seed(seed, 14));
  out.labelled = detail::draw_gaussian_rows(spec, detail::balanced_labels(spec.n_l), none, "l", true, r_lab);
  out.test = detail::draw_gaussian_rows(spec, detail::balanced_labels(spec.n_test), none, "t", true, r_test);
  const std::vector<int> negatives(pool, 0);
  out.in_dist_pool = detail::draw_gaussian_rows(spec, negatives, none, "u", false, r_in);
  out.ood_pool = detail::draw_gaussian_rows(spec, negatives, ood_shift_vector(spec), "o", false, r_ood);
  return out;
}

struct ContaminatedSet {
  FeatureTable table;
  std::vector<bool> ood;  // ground truth, for evaluation only
};

// round-half-up(c * n_u) rows from the OOD pool, the rest from the
// in-distribution pool, shuffled.
inline ContaminatedSet contaminate(const FeatureTable& in_pool, const FeatureTable& ood_pool, double fraction,
                                   std::size_t n_u, std::uint64_t seed) {
  if (in_pool.d() != ood_pool.d()) throw DataError("contaminate: pools differ in dimension");
  const std::size_t n_ood = round_half_up_count(fraction, n_u);
  const std::size_t n_in = n_u - n_ood;
  if (n_ood > ood_pool.n() || n_in > in_pool.n()) {
    throw DataError("contaminate: pools too small for " + std::to_string(n_in) + " in-distribution and " +
                    std::to_string(n_ood) + " OOD rows");
  }
  Rng rng(seed);
  struct Pick {
    bool ood;
    std::size_t row;
  };
  std::vector<Pick> picks;
  std::vector<std::size_t> in_rows(in_pool.n()), ood_rows(ood_pool.n());
  std::iota(in_rows.begin(), in_rows.end(), std::size_t{0});
  std::iota(ood_rows.begin(), ood_rows.end(), std::size_t{0});
  std::shuffle(in_rows.begin(), in_rows.end(), rng);
  std::shuffle(ood_rows.begin(), ood_rows.end(), rng);
  for (std::size_t i = 0; i < n_in; ++i) picks.push_back({false, in_rows[i]});
  for (std::size_t i = 0; i < n_ood; ++i) picks.push_back({true, ood_rows[i]});
  std::shuffle(picks.begin(), picks.end(), rng);

  ContaminatedSet out;
  Matrix x(static_cast<Eigen::Index>(n_u), static_cast<Eigen::Index>(in_pool.d()));
  std::vector<std::string> ids;
  for (std::size_t i = 0; i < picks.size(); ++i) {
    const auto& src = picks[i].ood ? ood_pool : in_pool;
    x.row(static_cast<Eigen::Index>(i)) = src.features().row(static_cast<Eigen::Index>(picks[i].row));
    ids.push_back(src.ids()[picks[i].row]);
    out.ood.push_back(picks[i].ood);
  }
  out.table = FeatureTable(std::move(ids), std::move(x));
  return out;
}

}  // namespace ssdl
