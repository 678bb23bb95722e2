#pragma once

// Small fully-connected classifier with hand-written backpropagation.
//
// Layout: input -> [affine -> relu -> dropout] * hidden -> affine (logits).
// Rows of every activation matrix are observations.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <istream>
#include <numbers>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "ssdl/feature_table.hpp"

namespace ssdl {

class MlpNet {
 public:
  MlpNet() = default;

  // sizes = {input, hidden..., output}. Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in));
  // with zero_output the last layer starts at zero, so initial predictions are uniform.
  MlpNet(std::vector<int> sizes, double dropout, std::uint64_t seed, bool zero_output = false)
      : sizes_(std::move(sizes)), dropout_(dropout) {
    if (sizes_.size() < 2) throw DataError("network needs at least an input and an output layer");
    for (int s : sizes_) {
      if (s < 1) throw DataError("layer sizes must be >= 1");
    }
    if (!(dropout_ >= 0.0 && dropout_ < 1.0)) throw DataError("dropout rate must lie in [0, 1)");
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      std::uniform_real_distribution<double> u(-bound, bound);
      Matrix w(sizes_[l + 1], sizes_[l]);
      for (Eigen::Index k = 0; k < w.size(); ++k) w.data()[k] = u(rng);
      Vector b(sizes_[l + 1]);
      for (Eigen::Index k = 0; k < b.size(); ++k) b(k) = u(rng);
      if (zero_output && l + 2 == sizes_.size()) {
        w.setZero();
        b.setZero();
      }
      weights_.push_back(std::move(w));
      biases_.push_back(std::move(b));
    }
  }

  MlpNet(std::vector<int> sizes, double dropout, std::vector<Matrix> weights, std::vector<Vector> biases)
      : sizes_(std::move(sizes)), dropout_(dropout), weights_(std::move(weights)), biases_(std::move(biases)) {
    if (sizes_.size() < 2 || weights_.size() != sizes_.size() - 1 || biases_.size() != weights_.size()) {
      throw DataError("inconsistent network layer chain");
    }
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (weights_[l].rows() != sizes_[l + 1] || weights_[l].cols() != sizes_[l] || biases_[l].size() != sizes_[l + 1]) {
        throw DataError("layer " + std::to_string(l) + " shape does not match the size chain");
      }
    }
    if (!(dropout_ >= 0.0 && dropout_ < 1.0)) throw DataError("dropout rate must lie in [0, 1)");
  }

  const std::vector<int>& sizes() const noexcept { return sizes_; }
  int input_dim() const { return sizes_.front(); }
  int output_dim() const { return sizes_.back(); }
  std::size_t layers() const noexcept { return weights_.size(); }
  double dropout() const noexcept { return dropout_; }

  Matrix& weight(std::size_t l) { return weights_[l]; }
  const Matrix& weight(std::size_t l) const { return weights_[l]; }
  Vector& bias(std::size_t l) { return biases_[l]; }
  const Vector& bias(std::size_t l) const { return biases_[l]; }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < layers(); ++l) n += static_cast<std::size_t>(weights_[l].size() + biases_[l].size());
    return n;
  }

  // Visit every parameter as a mutable double&, weights before biases per layer.
  template <typename F>
  void for_each_parameter(F&& f) {
    for (std::size_t l = 0; l < layers(); ++l) {
      for (Eigen::Index k = 0; k < weights_[l].size(); ++k) f(weights_[l].data()[k]);
      for (Eigen::Index k = 0; k < biases_[l].size(); ++k) f(biases_[l].data()[k]);
    }
  }

 private:
  std::vector<int> sizes_;
  double dropout_ = 0.0;
  std::vector<Matrix> weights_;
  std::vector<Vector> biases_;
};

// One mask per hidden layer; entries are 0 or 1/(1-p) (inverted dropout).
struct DropoutMasks {
  std::vector<Matrix> masks;
};

inline DropoutMasks sample_dropout_masks(const MlpNet& net, Eigen::Index rows, Rng& rng) {
  DropoutMasks m;
  const double p = net.dropout();
  const double keep_scale = 1.0 / (1.0 - p);
  std::bernoulli_distribution keep(1.0 - p);
  for (std::size_t l = 0; l + 1 < net.layers(); ++l) {
    Matrix mask(rows, net.sizes()[l + 1]);
    for (Eigen::Index k = 0; k < mask.size(); ++k) mask.data()[k] = keep(rng) ? keep_scale : 0.0;
    m.masks.push_back(std::move(mask));
  }
  return m;
}

struct ForwardPass {
  std::vector<Matrix> inputs;  // input to layer l (after relu/dropout of layer l-1)
  std::vector<Matrix> pre;     // affine output of layer l
  Matrix logits;
};

inline ForwardPass forward_pass(const MlpNet& net, const Matrix& x, const DropoutMasks* masks = nullptr) {
  if (x.cols() != net.input_dim()) {
    throw DataError("input has " + std::to_string(x.cols()) + " columns, network expects " +
                    std::to_string(net.input_dim()));
  }
  ForwardPass fp;
  Matrix a = x;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    Matrix z = a * net.weight(l).transpose();
    z.rowwise() += net.bias(l).transpose();
    fp.inputs.push_back(std::move(a));
    if (l + 1 == net.layers()) {
      fp.logits = z;
      fp.pre.push_back(std::move(z));
      break;
    }
    a = z.cwiseMax(0.0);
    if (masks && l < masks->masks.size()) a = a.cwiseProduct(masks->masks[l]);
    fp.pre.push_back(std::move(z));
  }
  return fp;
}

// Logits for a batch. With dropout_on and p > 0 a fresh mask is drawn from rng.
inline Matrix forward(const MlpNet& net, const Matrix& x, bool dropout_on = false, Rng* rng = nullptr) {
  if (dropout_on && net.dropout() > 0.0) {
    if (!rng) throw DataError("dropout forward pass requires a random generator");
    const auto masks = sample_dropout_masks(net, x.rows(), *rng);
    return forward_pass(net, x, &masks).logits;
  }
  return forward_pass(net, x).logits;
}

inline Vector softmax(const Vector& logits) {
  const double m = logits.maxCoeff();
  Vector e = (logits.array() - m).exp();
  return e / e.sum();
}

inline Matrix softmax_rows(const Matrix& logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    p.row(i) = (logits.row(i).array() - m).exp();
    p.row(i) /= p.row(i).sum();
  }
  return p;
}

// Row-wise log-softmax, stable for large logits.
inline Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double m = logits.row(i).maxCoeff();
    const double lse = m + std::log((logits.row(i).array() - m).exp().sum());
    out.row(i) = logits.row(i).array() - lse;
  }
  return out;
}

// Loss value and its gradient with respect to the logits.
struct LossGrad {
  double value = 0.0;
  Matrix dlogits;
};

using LossFn = std::function<LossGrad(const Matrix& logits)>;

// Mean over rows of -sum_c y_c log softmax(z)_c; targets may be soft.
inline LossGrad cross_entropy(const Matrix& logits, const Matrix& targets) {
  if (logits.rows() != targets.rows() || logits.cols() != targets.cols()) {
    throw DataError("cross-entropy: logits and targets differ in shape");
  }
  LossGrad g;
  const double n = static_cast<double>(logits.rows());
  if (logits.rows() == 0) {
    g.dlogits = Matrix::Zero(0, logits.cols());
    return g;
  }
  g.value = -(targets.cwiseProduct(log_softmax_rows(logits))).sum() / n;
  // d/dz of -sum_c y_c log p_c is p * sum_c y_c - y.
  const Matrix p = softmax_rows(logits);
  g.dlogits = (p.array().colwise() * targets.rowwise().sum().array() - targets.array()).matrix() / n;
  return g;
}

// Mean over rows of sum_c (z_c - t_c)^2.
inline LossGrad squared_error(const Matrix& outputs, const Matrix& targets) {
  if (outputs.rows() != targets.rows() || outputs.cols() != targets.cols()) {
    throw DataError("squared error: outputs and targets differ in shape");
  }
  LossGrad g;
  const double n = static_cast<double>(std::max<Eigen::Index>(outputs.rows(), 1));
  const Matrix diff = outputs - targets;
  g.value = diff.squaredNorm() / n;
  g.dlogits = 2.0 * diff / n;
  return g;
}

inline LossFn cross_entropy_loss(Matrix targets) {
  return [t = std::move(targets)](const Matrix& logits) { return cross_entropy(logits, t); };
}

inline LossFn squared_error_loss(Matrix targets) {
  return [t = std::move(targets)](const Matrix& out) { return squared_error(out, t); };
}

struct Gradients {
  double loss = 0.0;
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
};

inline Gradients backprop(const MlpNet& net, const Matrix& x, const LossFn& loss, const DropoutMasks* masks = nullptr) {
  const auto fp = forward_pass(net, x, masks);
  const auto lg = loss(fp.logits);
  Gradients g;
  g.loss = lg.value;
  g.weights.resize(net.layers());
  g.biases.resize(net.layers());
  Matrix delta = lg.dlogits;  // dL/d(pre-activation of current layer)
  for (std::size_t l = net.layers(); l-- > 0;) {
    g.weights[l] = delta.transpose() * fp.inputs[l];
    g.biases[l] = delta.colwise().sum().transpose();
    if (l == 0) break;
    Matrix da = delta * net.weight(l);
    if (masks && l - 1 < masks->masks.size()) da = da.cwiseProduct(masks->masks[l - 1]);
    delta = da.cwiseProduct((fp.pre[l - 1].array() > 0.0).cast<double>().matrix());
  }
  return g;
}

// Adam moment estimates, one slot per parameter tensor.
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.99;
  double eps = 1e-5;
  std::size_t t = 0;
  std::vector<Matrix> m_w, v_w;
  std::vector<Vector> m_b, v_b;
};

namespace detail {

template <typename T>
void adam_update(T& param, const T& grad, T& m, T& v, const AdamState& s, double lr, double weight_decay) {
  if (m.size() != grad.size()) {
    m = T::Zero(grad.rows(), grad.cols());
    v = T::Zero(grad.rows(), grad.cols());
  }
  m = s.beta1 * m + (1.0 - s.beta1) * grad;
  v = s.beta2 * v + (1.0 - s.beta2) * grad.cwiseProduct(grad);
  const double c1 = 1.0 - std::pow(s.beta1, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(s.beta2, static_cast<double>(s.t));
  const T step = ((m / c1).array() / ((v / c2).array().sqrt() + s.eps)).matrix();
  param -= lr * (step + weight_decay * param);
}

}  // namespace detail

// One update with decoupled weight decay: w <- w - lr * (g + weight_decay * w),
// where g is the raw gradient (plain descent) or the Adam direction when an
// optimizer state is supplied. Returns the loss evaluated before the update.
inline double train_step(MlpNet& net, const Matrix& x, const LossFn& loss, double lr, double weight_decay,
                         const DropoutMasks* masks = nullptr, AdamState* adam = nullptr) {
  const auto g = backprop(net, x, loss, masks);
  if (!std::isfinite(g.loss)) {
    throw NumericError("non-finite training loss (" + format_real(g.loss, 6) + "); lower the learning rate");
  }
  if (adam) {
    ++adam->t;
    adam->m_w.resize(net.layers());
    adam->v_w.resize(net.layers());
    adam->m_b.resize(net.layers());
    adam->v_b.resize(net.layers());
    for (std::size_t l = 0; l < net.layers(); ++l) {
      detail::adam_update(net.weight(l), g.weights[l], adam->m_w[l], adam->v_w[l], *adam, lr, weight_decay);
      detail::adam_update(net.bias(l), g.biases[l], adam->m_b[l], adam->v_b[l], *adam, lr, weight_decay);
    }
    return g.loss;
  }
  for (std::size_t l = 0; l < net.layers(); ++l) {
    net.weight(l) -= lr * (g.weights[l] + weight_decay * net.weight(l));
    net.bias(l) -= lr * (g.biases[l] + weight_decay * net.bias(l));
  }
  return g.loss;
}

// Cosine interpolation from `start` (pct = 0) to `end` (pct = 1).
inline double cosine_anneal(double start, double end, double pct) {
  return end + (start - end) / 2.0 * (std::cos(std::numbers::pi * pct) + 1.0);
}

struct OneCycle {
  double lr_max = 0.01;
  double div = 25.0;
  double final_div = 1e4;
  double warmup = 0.3;
};

// Warm up from lr_max/div to lr_max over the first `warmup` fraction of the
// steps, then anneal to lr_max/(div*final_div) at the last step.
inline double one_cycle_lr(std::size_t step, std::size_t total_steps, const OneCycle& sched = {}) {
  if (total_steps == 0 || step >= total_steps) {
    throw DataError("one-cycle step " + std::to_string(step) + " out of range [0, " + std::to_string(total_steps) + ")");
  }
  const double start = sched.lr_max / sched.div;
  const double end = sched.lr_max / (sched.div * sched.final_div);
  const double s = static_cast<double>(step);
  const double peak = sched.warmup * static_cast<double>(total_steps);
  if (s < peak) return cosine_anneal(start, sched.lr_max, s / peak);
  const double tail = static_cast<double>(total_steps - 1) - peak;
  if (tail <= 0.0) return sched.lr_max;
  return cosine_anneal(sched.lr_max, end, std::min(1.0, (s - peak) / tail));
}

// Max over parameters of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
// with central differences of step epsilon. Dropout masks, when given, stay fixed.
inline double grad_check(const MlpNet& net, const Matrix& x, const LossFn& loss, double epsilon = 1e-5,
                         const DropoutMasks* masks = nullptr) {
  const auto g = backprop(net, x, loss, masks);
  std::vector<double> analytic;
  for (std::size_t l = 0; l < net.layers(); ++l) {
    analytic.insert(analytic.end(), g.weights[l].data(), g.weights[l].data() + g.weights[l].size());
    analytic.insert(analytic.end(), g.biases[l].data(), g.biases[l].data() + g.biases[l].size());
  }
  MlpNet probe = net;
  std::vector<double*> params;
  probe.for_each_parameter([&](double& p) { params.push_back(&p); });
  double worst = 0.0;
  for (std::size_t k = 0; k < params.size(); ++k) {
    const double saved = *params[k];
    *params[k] = saved + epsilon;
    const double up = loss(forward_pass(probe, x, masks).logits).value;
    *params[k] = saved - epsilon;
    const double down = loss(forward_pass(probe, x, masks).logits).value;
    *params[k] = saved;
    const double numeric = (up - down) / (2.0 * epsilon);
    const double denom = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[k] - numeric) / denom);
  }
  return worst;
}

// ---------------------------------------------------------------------------
// Supervised training and inference helpers

enum class Optimizer { sgd, adam };

struct TrainConfig {
  std::size_t epochs = 50;
  Optimizer optimizer = Optimizer::adam;
  std::size_t batch_size = 16;
  OneCycle schedule{};
  double weight_decay = 0.001;
  std::uint64_t seed = 0;
  std::vector<int> hidden = {64, 64};
  double dropout = 0.2;
  bool zero_init_output = true;
};

inline void validate(const TrainConfig& c) {
  if (c.epochs < 1) throw DataError("epochs must be >= 1");
  if (c.batch_size < 1) throw DataError("batch size must be >= 1");
  if (!(c.schedule.lr_max > 0.0)) throw DataError("lr_max must be > 0");
  if (!(c.weight_decay >= 0.0)) throw DataError("weight decay must be >= 0");
}

inline std::vector<int> layer_sizes(int input, const std::vector<int>& hidden, int output) {
  std::vector<int> sizes{input};
  sizes.insert(sizes.end(), hidden.begin(), hidden.end());
  sizes.push_back(output);
  return sizes;
}

inline Matrix one_hot(const std::vector<int>& labels, int classes) {
  Matrix y = Matrix::Zero(static_cast<Eigen::Index>(labels.size()), classes);
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] >= classes) throw DataError("label " + std::to_string(labels[i]) + " exceeds class count");
    y(static_cast<Eigen::Index>(i), labels[i]) = 1.0;
  }
  return y;
}

inline std::vector<int> predict_classes(const MlpNet& net, const Matrix& x) {
  const Matrix logits = forward(net, x);
  std::vector<int> out(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    Eigen::Index arg = 0;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

inline Matrix gather_rows(const Matrix& x, std::span<const std::size_t> rows) {
  Matrix out(static_cast<Eigen::Index>(rows.size()), x.cols());
  for (std::size_t k = 0; k < rows.size(); ++k) {
    out.row(static_cast<Eigen::Index>(k)) = x.row(static_cast<Eigen::Index>(rows[k]));
  }
  return out;
}

// Plain supervised cross-entropy training on a labelled table.
inline MlpNet train_supervised(const FeatureTable& labelled, int classes, const TrainConfig& config) {
  validate(config);
  if (labelled.empty()) throw DataError("cannot train on an empty table");
  MlpNet net(layer_sizes(static_cast<int>(labelled.d()), config.hidden, classes), config.dropout,
             derive_seed(config.seed, 0), config.zero_init_output);
  Rng rng(derive_seed(config.seed, 1));
  const Matrix targets = one_hot(labelled.labels(), classes);
  const std::size_t n = labelled.n();
  const std::size_t batch = std::min(config.batch_size, n);
  const std::size_t steps_per_epoch = (n + batch - 1) / batch;
  const std::size_t total = steps_per_epoch * config.epochs;
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  AdamState adam;
  AdamState* state = config.optimizer == Optimizer::adam ? &adam : nullptr;
  std::size_t step = 0;
  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t s = 0; s < steps_per_epoch; ++s, ++step) {
      const std::size_t begin = s * batch;
      const std::size_t end = std::min(n, begin + batch);
      const std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Matrix xb = gather_rows(labelled.features(), rows);
      const Matrix yb = gather_rows(targets, rows);
      const auto masks = sample_dropout_masks(net, xb.rows(), rng);
      train_step(net, xb, cross_entropy_loss(yb), one_cycle_lr(step, total, config.schedule), config.weight_decay,
                 &masks, state);
    }
  }
  return net;
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_mlp(std::ostream& out, const MlpNet& net) {
  out << "mlp 1\nlayers " << net.sizes().size();
  for (int s : net.sizes()) out << ' ' << s;
  out << "\ndropout " << format_real(net.dropout()) << '\n';
  for (std::size_t l = 0; l < net.layers(); ++l) {
    out << "weight " << l << '\n';
    for (Eigen::Index i = 0; i < net.weight(l).rows(); ++i) {
      for (Eigen::Index j = 0; j < net.weight(l).cols(); ++j) out << (j ? " " : "") << format_real(net.weight(l)(i, j));
      out << '\n';
    }
    out << "bias " << l << '\n';
    for (Eigen::Index i = 0; i < net.bias(l).size(); ++i) out << (i ? " " : "") << format_real(net.bias(l)(i));
    out << '\n';
  }
}

inline MlpNet read_mlp(TokenReader& in) {
  in.expect("mlp");
  in.expect("1");
  in.expect("layers");
  const auto count = in.count();
  if (count < 2) throw DataError("model file: network needs at least two layers");
  std::vector<int> sizes(count);
  for (auto& s : sizes) s = static_cast<int>(in.count());
  in.expect("dropout");
  const double dropout = in.real();
  std::vector<Matrix> weights;
  std::vector<Vector> biases;
  for (std::size_t l = 0; l + 1 < count; ++l) {
    in.expect("weight");
    in.expect(std::to_string(l));
    Matrix w(sizes[l + 1], sizes[l]);
    for (Eigen::Index i = 0; i < w.rows(); ++i) {
      for (Eigen::Index j = 0; j < w.cols(); ++j) w(i, j) = in.real();
    }
    in.expect("bias");
    in.expect(std::to_string(l));
    Vector b(sizes[l + 1]);
    for (Eigen::Index i = 0; i < b.size(); ++i) b(i) = in.real();
    weights.push_back(std::move(w));
    biases.push_back(std::move(b));
  }
  return MlpNet(std::move(sizes), dropout, std::move(weights), std::move(biases));
}

}  // namespace ssdl
