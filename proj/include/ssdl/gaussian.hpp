#pragma once

// Mahalanobis harm coefficient: squared Mahalanobis distance from the pooled
// labelled feature mean, under a shrinkage-regularized sample covariance.

#include <cmath>
#include <istream>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "ssdl/feature_table.hpp"

namespace ssdl {

inline constexpr double kDefaultShrinkage = 0.1;

// Smallest Cholesky pivot, relative to the largest diagonal entry, that we
// accept as positive definite. Below this the precision matrix is noise.
inline constexpr double kRelativePivotTolerance = 1e-10;

class GaussianModel {
 public:
  GaussianModel() = default;

  // `covariance` is the already-regularized matrix; the precision is derived
  // from it by a Cholesky solve.
  GaussianModel(Vector mean, Matrix covariance, double shrinkage)
      : mean_(std::move(mean)), covariance_(std::move(covariance)), shrinkage_(shrinkage) {
    if (covariance_.rows() != mean_.size() || covariance_.cols() != mean_.size()) {
      throw DataError("covariance shape does not match mean dimension");
    }
    covariance_ = 0.5 * (covariance_ + covariance_.transpose());
    Eigen::LLT<Matrix> llt(covariance_);
    const double scale = covariance_.diagonal().cwiseAbs().maxCoeff();
    bool ok = llt.info() == Eigen::Success && scale > 0.0;
    if (ok) {
      const double min_pivot = llt.matrixLLT().diagonal().minCoeff();
      ok = min_pivot * min_pivot > kRelativePivotTolerance * scale;
    }
    if (!ok) {
      throw NumericError("regularized covariance is not positive definite (shrinkage " + format_real(shrinkage_, 6) +
                         "); increase the shrinkage weight");
    }
    precision_ = llt.solve(Matrix::Identity(covariance_.rows(), covariance_.cols()));
    precision_ = 0.5 * (precision_ + precision_.transpose());
  }

  std::size_t d() const noexcept { return static_cast<std::size_t>(mean_.size()); }
  const Vector& mean() const noexcept { return mean_; }
  const Matrix& covariance() const noexcept { return covariance_; }
  const Matrix& precision() const noexcept { return precision_; }
  double shrinkage() const noexcept { return shrinkage_; }

 private:
  Vector mean_;
  Matrix covariance_;
  Matrix precision_;
  double shrinkage_ = 0.0;
};

// Sample covariance with the n-1 denominator.
inline Matrix sample_covariance(const Matrix& x, const Vector& mean) {
  const Matrix centered = x.rowwise() - mean.transpose();
  return (centered.transpose() * centered) / static_cast<double>(x.rows() - 1);
}

// (1 - lambda) * cov + lambda * (trace(cov) / d) * I
inline Matrix shrink_covariance(const Matrix& cov, double shrinkage) {
  const auto d = cov.rows();
  const double target = cov.trace() / static_cast<double>(d);
  return (1.0 - shrinkage) * cov + shrinkage * target * Matrix::Identity(d, d);
}

inline GaussianModel fit_gaussian(const FeatureTable& labelled, double shrinkage = kDefaultShrinkage) {
  if (labelled.n() < 2) throw DataError("gaussian model needs at least 2 labelled rows");
  if (!(shrinkage >= 0.0 && shrinkage <= 1.0)) throw DataError("shrinkage must lie in [0, 1]");
  Vector mean = labelled.features().colwise().mean().transpose();
  Matrix cov = shrink_covariance(sample_covariance(labelled.features(), mean), shrinkage);
  return GaussianModel(std::move(mean), std::move(cov), shrinkage);
}

// (mean - h)^T Sigma^{-1} (mean - h), without a square root.
template <typename Vec>
double harm_mahalanobis(const GaussianModel& model, const Vec& h) {
  if (static_cast<std::size_t>(h.size()) != model.d()) {
    throw DataError("vector dimension " + std::to_string(h.size()) + " does not match gaussian model dimension " +
                    std::to_string(model.d()));
  }
  Vector delta(static_cast<Eigen::Index>(model.d()));
  for (Eigen::Index j = 0; j < delta.size(); ++j) delta(j) = model.mean()(j) - h[j];
  const double q = delta.dot(model.precision() * delta);
  return q < 0.0 ? 0.0 : q;
}

inline std::vector<double> score_table_mahalanobis(const GaussianModel& model, const FeatureTable& table) {
  if (table.d() != model.d()) {
    throw DataError("table dimension " + std::to_string(table.d()) + " does not match gaussian model dimension " +
                    std::to_string(model.d()));
  }
  const Matrix delta = (-table.features()).rowwise() + model.mean().transpose();
  const Matrix projected = delta * model.precision();
  std::vector<double> scores(table.n());
  for (std::size_t i = 0; i < table.n(); ++i) {
    const auto row = static_cast<Eigen::Index>(i);
    const double q = projected.row(row).dot(delta.row(row));
    scores[i] = q < 0.0 ? 0.0 : q;
  }
  return scores;
}

inline void write_gaussian_model(std::ostream& out, const GaussianModel& model) {
  out << "gaussian-model 1\n";
  out << "dim " << model.d() << "\n";
  out << "shrinkage " << format_real(model.shrinkage()) << "\n";
  out << "mean";
  for (Eigen::Index j = 0; j < model.mean().size(); ++j) out << ' ' << format_real(model.mean()(j));
  out << "\ncovariance\n";
  for (Eigen::Index i = 0; i < model.covariance().rows(); ++i) {
    for (Eigen::Index j = 0; j < model.covariance().cols(); ++j) {
      out << (j ? " " : "") << format_real(model.covariance()(i, j));
    }
    out << '\n';
  }
}

inline GaussianModel read_gaussian_model(TokenReader& in) {
  in.expect("gaussian-model");
  in.expect("1");
  in.expect("dim");
  const auto d = static_cast<Eigen::Index>(in.count());
  if (d == 0) throw DataError("model file: zero dimension");
  in.expect("shrinkage");
  const double shrinkage = in.real();
  in.expect("mean");
  Vector mean(d);
  for (Eigen::Index j = 0; j < d; ++j) mean(j) = in.real();
  in.expect("covariance");
  Matrix cov(d, d);
  for (Eigen::Index i = 0; i < d; ++i) {
    for (Eigen::Index j = 0; j < d; ++j) cov(i, j) = in.real();
  }
  return GaussianModel(std::move(mean), std::move(cov), shrinkage);
}

}  // namespace ssdl
