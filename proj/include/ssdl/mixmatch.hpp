#pragma once

// MixMatch semi-supervised training on feature vectors.
//
// Per step: augment the labelled batch once and the unlabelled batch K times,
// guess labels for the unlabelled rows (mean softmax over the K copies),
// sharpen them with temperature T, MixUp every row against a shuffled partner
// from the pooled batch, and descend on
//   cross-entropy(labelled) + gamma * mean ||softmax(unlabelled) - guess||^2.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <utility>
#include <vector>

#include "ssdl/nn.hpp"

namespace ssdl {

struct MixMatchConfig {
  int k = 2;
  double temperature = 0.25;
  double gamma = 200.0;
  double alpha = 0.75;
  double aug_sigma = 0.1;
  double gamma_rampup = 1.0;  // fraction of total steps over which gamma ramps linearly from 0
  TrainConfig train{};
};

inline void validate(const MixMatchConfig& c) {
  if (c.k < 1) throw DataError("K must be >= 1");
  if (!(c.temperature > 0.0)) throw DataError("temperature must be > 0");
  if (!(c.gamma >= 0.0)) throw DataError("gamma must be >= 0");
  if (!(c.alpha > 0.0)) throw DataError("mixup alpha must be > 0");
  if (!(c.aug_sigma >= 0.0)) throw DataError("augmentation sigma must be >= 0");
  if (!(c.gamma_rampup >= 0.0 && c.gamma_rampup <= 1.0)) throw DataError("gamma ramp-up must lie in [0, 1]");
  validate(c.train);
}

struct TrainHistory {
  std::vector<double> supervised_loss;
  std::vector<double> unsupervised_loss;
  std::vector<double> test_accuracy;
};

// Additive gaussian noise, the feature-space stand-in for image transforms.
inline Vector augment(const Vector& x, double sigma, Rng& rng) {
  if (sigma == 0.0) return x;
  std::normal_distribution<double> noise(0.0, sigma);
  Vector out = x;
  for (Eigen::Index j = 0; j < out.size(); ++j) out(j) += noise(rng);
  return out;
}

inline Matrix augment_rows(const Matrix& x, double sigma, Rng& rng) {
  if (sigma == 0.0) return x;
  std::normal_distribution<double> noise(0.0, sigma);
  Matrix out = x;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    for (Eigen::Index j = 0; j < out.cols(); ++j) out(i, j) += noise(rng);
  }
  return out;
}

struct LabelGuess {
  std::vector<Matrix> copies;  // K augmented copies of the batch
  Matrix probs;                // mean softmax over the copies, rows on the simplex
};

// Dropout is off while guessing.
inline LabelGuess guess_labels(const MlpNet& net, const Matrix& x, int k, double sigma, Rng& rng) {
  if (k < 1) throw DataError("K must be >= 1");
  LabelGuess g;
  g.probs = Matrix::Zero(x.rows(), net.output_dim());
  for (int i = 0; i < k; ++i) {
    g.copies.push_back(augment_rows(x, sigma, rng));
    g.probs += softmax_rows(forward(net, g.copies.back()));
  }
  g.probs /= static_cast<double>(k);
  return g;
}

inline Vector guess_label(const MlpNet& net, const Vector& x, int k, double sigma, Rng& rng) {
  return guess_labels(net, x.transpose(), k, sigma, rng).probs.row(0).transpose();
}

// p_i^(1/T) / sum_j p_j^(1/T), evaluated in log space.
inline Vector sharpen(const Vector& p, double temperature) {
  if (!(temperature > 0.0)) throw DataError("temperature must be > 0");
  if (!(p.maxCoeff() > 0.0)) throw DataError("cannot sharpen an all-zero vector");
  Vector logp(p.size());
  for (Eigen::Index i = 0; i < p.size(); ++i) {
    logp(i) = p(i) > 0.0 ? std::log(p(i)) / temperature : -std::numeric_limits<double>::infinity();
  }
  const double m = logp.maxCoeff();
  Vector out = (logp.array() - m).unaryExpr([](double v) { return std::exp(v); });
  return out / out.sum();
}

inline Matrix sharpen_rows(const Matrix& p, double temperature) {
  Matrix out(p.rows(), p.cols());
  for (Eigen::Index i = 0; i < p.rows(); ++i) out.row(i) = sharpen(p.row(i).transpose(), temperature).transpose();
  return out;
}

struct Mixed {
  Vector x;
  Vector y;
};

// lambda' = max(lambda, 1 - lambda): the first argument always dominates.
inline Mixed mixup_with(const Vector& x1, const Vector& y1, const Vector& x2, const Vector& y2, double lambda) {
  if (x1.size() != x2.size() || y1.size() != y2.size()) throw DataError("mixup: operand shapes differ");
  const double l = std::max(lambda, 1.0 - lambda);
  return {l * x1 + (1.0 - l) * x2, l * y1 + (1.0 - l) * y2};
}

inline Mixed mixup(const Vector& x1, const Vector& y1, const Vector& x2, const Vector& y2, double alpha, Rng& rng) {
  if (!(alpha > 0.0)) throw DataError("mixup alpha must be > 0");
  return mixup_with(x1, y1, x2, y2, sample_beta(alpha, alpha, rng));
}

// Mean labelled cross-entropy + gamma * mean squared L2 between unlabelled
// predictions and their guessed labels.
inline double mixmatch_loss(const Matrix& logits_l, const Matrix& targets_l, const Matrix& probs_u,
                            const Matrix& pseudo_u, double gamma) {
  if (probs_u.rows() != pseudo_u.rows() || probs_u.cols() != pseudo_u.cols()) {
    throw DataError("mixmatch loss: unlabelled predictions and pseudo-labels differ in shape");
  }
  double loss = logits_l.rows() > 0 ? cross_entropy(logits_l, targets_l).value : 0.0;
  if (probs_u.rows() > 0) loss += gamma * (probs_u - pseudo_u).squaredNorm() / static_cast<double>(probs_u.rows());
  return loss;
}

struct MixMatchLossParts {
  double supervised = 0.0;
  double unsupervised = 0.0;
};

// Loss over stacked logits [labelled rows; unlabelled rows]. The pseudo-labels
// are constants: no gradient flows into the label guess.
inline LossFn mixmatch_loss_fn(Matrix targets_l, Matrix pseudo_u, double gamma, MixMatchLossParts* parts = nullptr) {
  return [targets = std::move(targets_l), pseudo = std::move(pseudo_u), gamma, parts](const Matrix& logits) {
    const auto nl = targets.rows();
    const auto nu = pseudo.rows();
    if (logits.rows() != nl + nu || logits.cols() != targets.cols() || pseudo.cols() != targets.cols()) {
      throw DataError("mixmatch loss: logits shape does not match targets");
    }
    LossGrad out;
    out.dlogits = Matrix::Zero(logits.rows(), logits.cols());
    double sup = 0.0, unsup = 0.0;
    if (nl > 0) {
      auto ce = cross_entropy(logits.topRows(nl), targets);
      sup = ce.value;
      out.dlogits.topRows(nl) = ce.dlogits;
    }
    if (nu > 0) {
      const Matrix p = softmax_rows(logits.bottomRows(nu));
      const Matrix diff = p - pseudo;
      unsup = diff.squaredNorm() / static_cast<double>(nu);
      // dL/dp = 2 gamma (p - q) / n_u; through softmax: dz = p * (g - <g, p>).
      const Matrix gp = (2.0 * gamma / static_cast<double>(nu)) * diff;
      const Vector dot = gp.cwiseProduct(p).rowwise().sum();
      out.dlogits.bottomRows(nu) = p.cwiseProduct(gp - dot.replicate(1, p.cols()));
    }
    out.value = sup + gamma * unsup;
    if (parts) *parts = {sup, unsup};
    return out;
  };
}

inline double accuracy_on(const MlpNet& net, const FeatureTable& table) {
  if (table.empty()) return std::numeric_limits<double>::quiet_NaN();
  const auto pred = predict_classes(net, table.features());
  const auto& y = table.labels();
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == y[i];
  return static_cast<double>(hits) / static_cast<double>(pred.size());
}

// Unsupervised weight at a given step: linear ramp from 0 over the first
// gamma_rampup fraction of training, then constant.
inline double gamma_at(const MixMatchConfig& c, std::size_t step, std::size_t total_steps) {
  const double ramp = c.gamma_rampup * static_cast<double>(total_steps);
  if (ramp <= 0.0) return c.gamma;
  return c.gamma * std::min(1.0, static_cast<double>(step) / ramp);
}

struct MixMatchResult {
  MlpNet net;
  TrainHistory history;
};

namespace detail {

// Cycles through a reshuffled index order, one batch at a time.
class BatchCycler {
 public:
  BatchCycler(std::size_t n, std::size_t batch) : order_(n), batch_(std::min(batch, n)) {
    std::iota(order_.begin(), order_.end(), std::size_t{0});
  }

  std::vector<std::size_t> next(Rng& rng) {
    std::vector<std::size_t> out;
    out.reserve(batch_);
    while (out.size() < batch_) {
      if (pos_ == 0) std::shuffle(order_.begin(), order_.end(), rng);
      out.push_back(order_[pos_]);
      pos_ = (pos_ + 1) % order_.size();
    }
    return out;
  }

  std::size_t batch() const noexcept { return batch_; }

 private:
  std::vector<std::size_t> order_;
  std::size_t batch_;
  std::size_t pos_ = 0;
};

}  // namespace detail

inline MixMatchResult train_mixmatch(const FeatureTable& labelled, const FeatureTable& unlabelled,
                                     const FeatureTable& test, const MixMatchConfig& config) {
  validate(config);
  if (labelled.empty()) throw DataError("mixmatch needs a non-empty labelled set");
  if (unlabelled.d() != labelled.d() || (!test.empty() && test.d() != labelled.d())) {
    throw DataError("labelled, unlabelled and test tables must share one dimension");
  }
  const int classes = std::max({2, labelled.num_classes(), test.has_labels() ? test.num_classes() : 0});
  const TrainConfig& tc = config.train;
  MlpNet net(layer_sizes(static_cast<int>(labelled.d()), tc.hidden, classes), tc.dropout, derive_seed(tc.seed, 0),
             tc.zero_init_output);
  Rng rng(derive_seed(tc.seed, 1));

  const Matrix targets = one_hot(labelled.labels(), classes);
  const bool semi = !unlabelled.empty();
  detail::BatchCycler lab_batches(labelled.n(), tc.batch_size);
  detail::BatchCycler unl_batches(semi ? unlabelled.n() : 1, tc.batch_size);
  const std::size_t longest = std::max(labelled.n(), semi ? unlabelled.n() : 0);
  const std::size_t steps_per_epoch = (longest + tc.batch_size - 1) / tc.batch_size;
  const std::size_t total = steps_per_epoch * tc.epochs;
  const auto d = static_cast<Eigen::Index>(labelled.d());

  MixMatchResult result;
  AdamState adam;
  AdamState* state = tc.optimizer == Optimizer::adam ? &adam : nullptr;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < tc.epochs; ++epoch) {
    double sup_sum = 0.0, unsup_sum = 0.0;
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      const auto lrows = lab_batches.next(rng);
      const Matrix xl = augment_rows(gather_rows(labelled.features(), lrows), config.aug_sigma, rng);
      const Matrix yl = gather_rows(targets, lrows);
      const auto nl = xl.rows();

      // Pooled batch W = [labelled; K unlabelled copies] with per-row targets.
      Matrix pool_x = xl, pool_y = yl;
      if (semi) {
        const auto urows = unl_batches.next(rng);
        auto guess = guess_labels(net, gather_rows(unlabelled.features(), urows), config.k, config.aug_sigma, rng);
        const Matrix q = sharpen_rows(guess.probs, config.temperature);
        const auto nu = q.rows();
        pool_x.conservativeResize(nl + nu * config.k, d);
        pool_y.conservativeResize(nl + nu * config.k, classes);
        for (int c = 0; c < config.k; ++c) {
          pool_x.middleRows(nl + c * nu, nu) = guess.copies[static_cast<std::size_t>(c)];
          pool_y.middleRows(nl + c * nu, nu) = q;
        }
      }
      std::vector<std::size_t> partner(static_cast<std::size_t>(pool_x.rows()));
      std::iota(partner.begin(), partner.end(), std::size_t{0});
      std::shuffle(partner.begin(), partner.end(), rng);

      Matrix mixed_x(pool_x.rows(), d), mixed_y(pool_y.rows(), classes);
      for (Eigen::Index i = 0; i < pool_x.rows(); ++i) {
        const auto j = static_cast<Eigen::Index>(partner[static_cast<std::size_t>(i)]);
        const auto m = mixup(pool_x.row(i).transpose(), pool_y.row(i).transpose(), pool_x.row(j).transpose(),
                             pool_y.row(j).transpose(), config.alpha, rng);
        mixed_x.row(i) = m.x.transpose();
        mixed_y.row(i) = m.y.transpose();
      }

      MixMatchLossParts parts;
      const auto loss = mixmatch_loss_fn(mixed_y.topRows(nl), mixed_y.bottomRows(mixed_y.rows() - nl),
                                         gamma_at(config, step, total), &parts);
      const auto masks = sample_dropout_masks(net, mixed_x.rows(), rng);
      train_step(net, mixed_x, loss, one_cycle_lr(step, total, tc.schedule), tc.weight_decay, &masks, state);
      sup_sum += parts.supervised;
      unsup_sum += parts.unsupervised;
    }
    result.history.supervised_loss.push_back(sup_sum / static_cast<double>(steps_per_epoch));
    result.history.unsupervised_loss.push_back(unsup_sum / static_cast<double>(steps_per_epoch));
    result.history.test_accuracy.push_back(test.has_labels() ? accuracy_on(net, test)
                                                             : std::numeric_limits<double>::quiet_NaN());
  }
  result.net = std::move(net);
  return result;
}

}  // namespace ssdl
