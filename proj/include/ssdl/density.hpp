#pragma once

// Feature-histogram harm coefficient.
//
// Each labelled feature dimension gets its own equal-width normalized
// histogram. Dimensions are treated as independent, so the harm of an
// unlabelled vector h is the negative log of the product of per-dimension bin
// probabilities:  harm(h) = -sum_r ln p_r(h_r).

#include <algorithm>
#include <cmath>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "ssdl/feature_table.hpp"

namespace ssdl {

inline constexpr double kProbabilityFloor = 1e-6;
inline constexpr double kDegenerateBinWidth = 1e-8;
inline constexpr int kDefaultBins = 16;

// One dimension's histogram: edges.size() == probs.size() + 1.
struct Histogram {
  std::vector<double> edges;
  std::vector<double> probs;

  std::size_t bins() const noexcept { return probs.size(); }

  // Bin holding x, or -1 when x lies outside [edges.front(), edges.back()].
  // An interior edge belongs to the bin on its right; the final edge belongs
  // to the last bin.
  std::ptrdiff_t locate(double x) const noexcept {
    if (!(x >= edges.front() && x <= edges.back())) return -1;
    const auto it = std::upper_bound(edges.begin(), edges.end(), x);
    auto idx = static_cast<std::ptrdiff_t>(it - edges.begin()) - 1;
    const auto last = static_cast<std::ptrdiff_t>(probs.size()) - 1;
    return std::min(idx, last);
  }
};

// Equal-width edges spanning [lo, hi]; a zero-width range collapses to a
// single bin of width kDegenerateBinWidth centred on the value.
inline std::vector<double> equal_width_edges(double lo, double hi, int bins) {
  std::vector<double> edges;
  if (hi > lo) {
    edges.resize(static_cast<std::size_t>(bins) + 1);
    const double width = (hi - lo) / bins;
    for (int i = 0; i < bins; ++i) edges[static_cast<std::size_t>(i)] = lo + i * width;
    edges.back() = hi;
    if (std::adjacent_find(edges.begin(), edges.end(), std::greater_equal<double>()) == edges.end()) {
      return edges;
    }
    // Range too narrow to split: fall through to the degenerate bin.
    lo = hi = 0.5 * (lo + hi);
  }
  return {lo - 0.5 * kDegenerateBinWidth, hi + 0.5 * kDegenerateBinWidth};
}

// Histogram of `values` over `edges`, counts normalized to sum 1, then every
// probability floored at `floor` (no renormalization).
inline Histogram build_histogram(std::span<const double> values, std::vector<double> edges,
                                 double floor = kProbabilityFloor) {
  Histogram h{std::move(edges), {}};
  h.probs.assign(h.edges.size() - 1, 0.0);
  std::size_t counted = 0;
  for (double v : values) {
    const auto idx = h.locate(v);
    if (idx >= 0) {
      h.probs[static_cast<std::size_t>(idx)] += 1.0;
      ++counted;
    }
  }
  for (auto& p : h.probs) {
    p = counted > 0 ? p / static_cast<double>(counted) : 0.0;
    p = std::max(p, floor);
  }
  return h;
}

class DensityModel {
 public:
  DensityModel() = default;
  DensityModel(std::vector<Histogram> dims, double floor) : dims_(std::move(dims)), floor_(floor) {
    for (const auto& h : dims_) {
      if (h.edges.size() < 2 || h.edges.size() != h.probs.size() + 1) {
        throw DataError("histogram edges/probabilities are inconsistent");
      }
      if (std::adjacent_find(h.edges.begin(), h.edges.end(), std::greater_equal<double>()) != h.edges.end()) {
        throw DataError("histogram edges must be strictly increasing");
      }
    }
  }

  std::size_t d() const noexcept { return dims_.size(); }
  double floor() const noexcept { return floor_; }
  const std::vector<Histogram>& dims() const noexcept { return dims_; }
  const Histogram& dim(std::size_t r) const { return dims_.at(r); }

  // Probability assigned to coordinate value x in dimension r.
  double probability(std::size_t r, double x) const {
    const auto& h = dims_[r];
    const auto idx = h.locate(x);
    return idx < 0 ? floor_ : h.probs[static_cast<std::size_t>(idx)];
  }

 private:
  std::vector<Histogram> dims_;
  double floor_ = kProbabilityFloor;
};

inline DensityModel fit_feature_histograms(const FeatureTable& labelled, int bins = kDefaultBins) {
  if (labelled.n() < 2) throw DataError("density model needs at least 2 labelled rows");
  if (bins < 1) throw DataError("bin count must be >= 1");
  std::vector<Histogram> dims;
  dims.reserve(labelled.d());
  std::vector<double> column(labelled.n());
  for (std::size_t r = 0; r < labelled.d(); ++r) {
    const auto col = labelled.features().col(static_cast<Eigen::Index>(r));
    std::copy(col.begin(), col.end(), column.begin());
    const auto [lo, hi] = std::minmax_element(column.begin(), column.end());
    dims.push_back(build_histogram(column, equal_width_edges(*lo, *hi, bins)));
  }
  return DensityModel(std::move(dims), kProbabilityFloor);
}

template <typename Vec>
double harm_fh(const DensityModel& model, const Vec& h) {
  if (static_cast<std::size_t>(h.size()) != model.d()) {
    throw DataError("vector dimension " + std::to_string(h.size()) + " does not match density model dimension " +
                    std::to_string(model.d()));
  }
  double harm = 0.0;
  for (std::size_t r = 0; r < model.d(); ++r) {
    harm -= std::log(model.probability(r, h[static_cast<Eigen::Index>(r)]));
  }
  return harm;
}

inline std::vector<double> score_table_fh(const DensityModel& model, const FeatureTable& table) {
  if (table.d() != model.d()) {
    throw DataError("table dimension " + std::to_string(table.d()) + " does not match density model dimension " +
                    std::to_string(model.d()));
  }
  std::vector<double> scores(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    scores[i] = harm_fh(model, table.features().row(static_cast<Eigen::Index>(i)));
  }
  return scores;
}

// Text persistence, 17 significant digits.
inline void write_density_model(std::ostream& out, const DensityModel& model) {
  out << "density-model 1\n";
  out << "dims " << model.d() << "\n";
  out << "floor " << format_real(model.floor()) << "\n";
  for (std::size_t r = 0; r < model.d(); ++r) {
    const auto& h = model.dim(r);
    out << "bins " << h.bins() << "\nedges";
    for (double e : h.edges) out << ' ' << format_real(e);
    out << "\nprobs";
    for (double p : h.probs) out << ' ' << format_real(p);
    out << '\n';
  }
}

inline DensityModel read_density_model(TokenReader& in) {
  in.expect("density-model");
  in.expect("1");
  in.expect("dims");
  const auto d = in.count();
  in.expect("floor");
  const double floor = in.real();
  std::vector<Histogram> dims(d);
  for (auto& h : dims) {
    in.expect("bins");
    const auto b = in.count();
    if (b == 0) throw DataError("model file: histogram with zero bins");
    in.expect("edges");
    h.edges.resize(b + 1);
    for (auto& e : h.edges) e = in.real();
    in.expect("probs");
    h.probs.resize(b);
    for (auto& p : h.probs) p = in.real();
  }
  return DensityModel(std::move(dims), floor);
}

}  // namespace ssdl
