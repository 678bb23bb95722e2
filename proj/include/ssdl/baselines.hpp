#pragma once

// Output-based harm scores from a classifier head trained on the labelled
// set: one minus the max softmax, and Monte-Carlo-dropout predictive variance.

#include <set>
#include <vector>

#include "ssdl/nn.hpp"

namespace ssdl {

inline constexpr std::size_t kDefaultMcdPasses = 20;

inline MlpNet train_baseline_head(const FeatureTable& labelled, const TrainConfig& config) {
  if (labelled.empty()) throw DataError("baseline head needs a non-empty labelled set");
  if (!labelled.has_labels()) throw DataError("baseline head needs labels");
  const std::set<int> classes(labelled.labels().begin(), labelled.labels().end());
  if (classes.size() < 2) throw DataError("baseline head needs at least two classes in the labelled set");
  return train_supervised(labelled, std::max(2, labelled.num_classes()), config);
}

inline double harm_softmax(const MlpNet& net, const Vector& x) {
  return 1.0 - softmax(forward(net, x.transpose()).row(0).transpose()).maxCoeff();
}

// Mean over classes of the sample variance (n-1) of softmax outputs across
// `passes` dropout-on forward passes.
inline double harm_mcd(const MlpNet& net, const Vector& x, std::size_t passes, Rng& rng) {
  if (passes < 2) throw DataError("MCD needs at least 2 forward passes");
  const Matrix batch = x.transpose().replicate(static_cast<Eigen::Index>(passes), 1);
  const Matrix p = softmax_rows(forward(net, batch, true, &rng));
  const Matrix centered = p.rowwise() - p.colwise().mean();
  const double n = static_cast<double>(passes);
  return (centered.colwise().squaredNorm() / (n - 1.0)).mean();
}

inline std::vector<double> score_table_softmax(const MlpNet& net, const FeatureTable& table) {
  if (table.empty()) return {};
  const Matrix p = softmax_rows(forward(net, table.features()));
  std::vector<double> out(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) out[i] = 1.0 - p.row(static_cast<Eigen::Index>(i)).maxCoeff();
  return out;
}

// Row i draws its dropout masks from stream derive_seed(seed, i).
inline std::vector<double> score_table_mcd(const MlpNet& net, const FeatureTable& table, std::size_t passes,
                                           std::uint64_t seed) {
  std::vector<double> out(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    Rng rng(derive_seed(seed, i));
    out[i] = harm_mcd(net, table.row(i), passes, rng);
  }
  return out;
}

}  // namespace ssdl
