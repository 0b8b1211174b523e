#pragma once

// Dense (fully connected) networks with reverse-mode gradients and Adam.
//
// Samples are stored column-wise: a batch of B inputs for a net with input
// dimension I is an I x B matrix. Every network in the project is a plain MLP,
// so backpropagation walks the fixed layer list instead of a general graph.

#include <Eigen/Core>

#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "vaerl/errors.hpp"

namespace vaerl::nn {

enum class Activation { relu, tanh, sigmoid, identity };

std::string_view to_string(Activation a);
Activation activation_from_string(std::string_view name);

template <typename Scalar>
using MatrixT = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorT = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
struct Layer {
  MatrixT<Scalar> weight;  // out x in
  VectorT<Scalar> bias;    // out
  Activation activation = Activation::identity;

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
};

namespace detail {

template <typename Derived>
void apply_activation(Activation a, Eigen::MatrixBase<Derived>& z) {
  using S = typename Derived::Scalar;
  switch (a) {
    case Activation::relu:
      z = z.cwiseMax(S(0));
      break;
    case Activation::tanh:
      z = z.array().tanh().matrix();
      break;
    case Activation::sigmoid:
      z = (S(1) / (S(1) + (-z.array()).exp())).matrix();
      break;
    case Activation::identity:
      break;
  }
}

// d activation / d pre-activation, expressed through the pre-activation `z`
// and the post-activation `y`, multiplied into `upstream` in place.
template <typename Scalar>
void multiply_activation_derivative(Activation a, const MatrixT<Scalar>& z, const MatrixT<Scalar>& y,
                                    MatrixT<Scalar>& upstream) {
  switch (a) {
    case Activation::relu:
      upstream = upstream.cwiseProduct((z.array() > Scalar(0)).template cast<Scalar>().matrix());
      break;
    case Activation::tanh:
      upstream = upstream.cwiseProduct((Scalar(1) - y.array().square()).matrix());
      break;
    case Activation::sigmoid:
      upstream = upstream.cwiseProduct((y.array() * (Scalar(1) - y.array())).matrix());
      break;
    case Activation::identity:
      break;
  }
}

}  // namespace detail

// Per-parameter gradients plus the gradient with respect to the input batch.
template <typename Scalar>
struct Gradients {
  std::vector<MatrixT<Scalar>> weight;
  std::vector<VectorT<Scalar>> bias;
  MatrixT<Scalar> input;

  Gradients& operator+=(const Gradients& other) {
    if (other.weight.size() != weight.size()) throw DimensionError("gradient sets have different layer counts");
    for (std::size_t k = 0; k < weight.size(); ++k) {
      weight[k] += other.weight[k];
      bias[k] += other.bias[k];
    }
    return *this;
  }

  void scale(Scalar s) {
    for (auto& w : weight) w *= s;
    for (auto& b : bias) b *= s;
    input *= s;
  }
};

// Activations of every layer for one forward pass; needed by backward().
template <typename Scalar>
struct ForwardTrace {
  MatrixT<Scalar> input;
  std::vector<MatrixT<Scalar>> pre;   // pre-activation per layer
  std::vector<MatrixT<Scalar>> post;  // post-activation per layer

  const MatrixT<Scalar>& output() const { return post.back(); }
};

template <typename Scalar>
class BasicDenseNet {
 public:
  using Matrix = MatrixT<Scalar>;
  using Vector = VectorT<Scalar>;

  BasicDenseNet() = default;

  explicit BasicDenseNet(std::vector<Layer<Scalar>> layers) : layers_(std::move(layers)) {
    if (layers_.empty()) throw DimensionError("network needs at least one layer");
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& l = layers_[k];
      if (l.bias.size() != l.weight.rows())
        throw DimensionError("layer " + std::to_string(k) + ": bias length " + std::to_string(l.bias.size()) +
                             " != output dim " + std::to_string(l.weight.rows()));
      if (k > 0 && l.in_dim() != layers_[k - 1].out_dim())
        throw DimensionError("layer " + std::to_string(k) + ": input dim " + std::to_string(l.in_dim()) +
                             " does not chain with previous output dim " +
                             std::to_string(layers_[k - 1].out_dim()));
    }
  }

  // `widths` = {input, hidden..., output}. Weights uniform in +-1/sqrt(fan_in), biases zero.
  static BasicDenseNet make(std::span<const int> widths, Activation hidden, Activation head, std::mt19937_64& rng) {
    if (widths.size() < 2) throw DimensionError("need at least input and output widths");
    std::vector<Layer<Scalar>> layers;
    for (std::size_t k = 0; k + 1 < widths.size(); ++k) {
      const int in = widths[k];
      const int out = widths[k + 1];
      if (in <= 0 || out <= 0) throw DimensionError("layer widths must be positive");
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      std::uniform_real_distribution<double> dist(-bound, bound);
      Layer<Scalar> l;
      l.weight.resize(out, in);
      for (int c = 0; c < in; ++c)
        for (int r = 0; r < out; ++r) l.weight(r, c) = static_cast<Scalar>(dist(rng));
      l.bias = Vector::Zero(out);
      l.activation = (k + 2 == widths.size()) ? head : hidden;
      layers.push_back(std::move(l));
    }
    return BasicDenseNet(std::move(layers));
  }

  static BasicDenseNet make(std::initializer_list<int> widths, Activation hidden, Activation head,
                            std::mt19937_64& rng) {
    std::vector<int> w(widths);
    return make(std::span<const int>(w), hidden, head, rng);
  }

  int input_dim() const { return layers_.empty() ? 0 : layers_.front().in_dim(); }
  int output_dim() const { return layers_.empty() ? 0 : layers_.back().out_dim(); }
  std::size_t layer_count() const { return layers_.size(); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return n;
  }

  const std::vector<Layer<Scalar>>& layers() const { return layers_; }
  Layer<Scalar>& layer(std::size_t k) { return layers_.at(k); }
  const Layer<Scalar>& layer(std::size_t k) const { return layers_.at(k); }

  Vector forward(const Vector& x) const {
    Matrix batch = x;
    return forward_batch(batch).col(0);
  }

  Matrix forward_batch(const Matrix& inputs) const {
    check_input(inputs);
    Matrix a = inputs;
    for (const auto& l : layers_) {
      Matrix z = l.weight * a;
      z.colwise() += l.bias;
      detail::apply_activation(l.activation, z);
      a = std::move(z);
    }
    return a;
  }

  ForwardTrace<Scalar> forward_trace(const Matrix& inputs) const {
    check_input(inputs);
    ForwardTrace<Scalar> trace;
    trace.input = inputs;
    trace.pre.reserve(layers_.size());
    trace.post.reserve(layers_.size());
    const Matrix* a = &trace.input;
    for (const auto& l : layers_) {
      Matrix z = l.weight * (*a);
      z.colwise() += l.bias;
      Matrix y = z;
      detail::apply_activation(l.activation, y);
      trace.pre.push_back(std::move(z));
      trace.post.push_back(std::move(y));
      a = &trace.post.back();
    }
    return trace;
  }

  // `output_grad` is dL/d(output), same shape as trace.output(). Parameter
  // gradients are summed over the batch columns.
  Gradients<Scalar> backward(const ForwardTrace<Scalar>& trace, const Matrix& output_grad) const {
    if (output_grad.rows() != output_dim() || output_grad.cols() != trace.input.cols())
      throw DimensionError("output gradient shape " + std::to_string(output_grad.rows()) + "x" +
                           std::to_string(output_grad.cols()) + " does not match network output " +
                           std::to_string(output_dim()) + "x" + std::to_string(trace.input.cols()));
    Gradients<Scalar> g;
    g.weight.resize(layers_.size());
    g.bias.resize(layers_.size());
    Matrix delta = output_grad;
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const auto& l = layers_[k];
      detail::multiply_activation_derivative<Scalar>(l.activation, trace.pre[k], trace.post[k], delta);
      const Matrix& a_prev = (k == 0) ? trace.input : trace.post[k - 1];
      g.weight[k].noalias() = delta * a_prev.transpose();
      g.bias[k] = delta.rowwise().sum();
      Matrix next = l.weight.transpose() * delta;
      delta = std::move(next);
    }
    g.input = std::move(delta);
    return g;
  }

  Gradients<Scalar> zero_gradients() const {
    Gradients<Scalar> g;
    for (const auto& l : layers_) {
      g.weight.push_back(Matrix::Zero(l.weight.rows(), l.weight.cols()));
      g.bias.push_back(Vector::Zero(l.bias.size()));
    }
    return g;
  }

  bool all_finite() const {
    for (const auto& l : layers_)
      if (!l.weight.allFinite() || !l.bias.allFinite()) return false;
    return true;
  }

  // target <- tau * source + (1 - tau) * target
  void soft_update_from(const BasicDenseNet& source, Scalar tau) {
    check_same_shape(source);
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      layers_[k].weight = tau * source.layers_[k].weight + (Scalar(1) - tau) * layers_[k].weight;
      layers_[k].bias = tau * source.layers_[k].bias + (Scalar(1) - tau) * layers_[k].bias;
    }
  }

  bool same_shape(const BasicDenseNet& other) const {
    if (layers_.size() != other.layers_.size()) return false;
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const auto& a = layers_[k];
      const auto& b = other.layers_[k];
      if (a.weight.rows() != b.weight.rows() || a.weight.cols() != b.weight.cols() || a.activation != b.activation)
        return false;
    }
    return true;
  }

  template <typename Other>
  BasicDenseNet<Other> cast() const {
    std::vector<Layer<Other>> out;
    for (const auto& l : layers_)
      out.push_back(Layer<Other>{l.weight.template cast<Other>(), l.bias.template cast<Other>(), l.activation});
    return BasicDenseNet<Other>(std::move(out));
  }

  friend bool operator==(const BasicDenseNet& a, const BasicDenseNet& b) {
    if (!a.same_shape(b)) return false;
    for (std::size_t k = 0; k < a.layers_.size(); ++k)
      if (a.layers_[k].weight != b.layers_[k].weight || a.layers_[k].bias != b.layers_[k].bias) return false;
    return true;
  }

 private:
  void check_input(const Matrix& inputs) const {
    if (layers_.empty()) throw DimensionError("forward on an empty network");
    if (inputs.rows() != input_dim())
      throw DimensionError("layer 0: expected input of length " + std::to_string(input_dim()) + ", got " +
                           std::to_string(inputs.rows()));
  }

  void check_same_shape(const BasicDenseNet& other) const {
    if (!same_shape(other)) throw DimensionError("networks have different architectures");
  }

  std::vector<Layer<Scalar>> layers_;
};

using DenseNet = BasicDenseNet<float>;
using Matrix = MatrixT<float>;
using Vector = VectorT<float>;

enum class LossKind { mse, bce, scalar_output };

template <typename Scalar>
struct LossResult {
  Scalar loss = 0;
  MatrixT<Scalar> output;
  Gradients<Scalar> grads;
};

inline constexpr double kBceClamp = 1e-7;

// Backward pass given dL/d(pre-activation of the last layer).
template <typename Scalar>
Gradients<Scalar> backward_from_logits(const BasicDenseNet<Scalar>& net, const ForwardTrace<Scalar>& trace,
                                       const MatrixT<Scalar>& logit_grad) {
  auto layers = net.layers();
  layers.back().activation = Activation::identity;
  BasicDenseNet<Scalar> linear_head(std::move(layers));
  ForwardTrace<Scalar> t = trace;
  t.post.back() = t.pre.back();
  return linear_head.backward(t, logit_grad);
}

// Loss and gradients for one batch (columns are samples); the loss is
// averaged over the batch.
//   mse:           mean over outputs of (y - t)^2
//   bce:           sum over outputs of -[t log y + (1-t) log(1-y)], y clamped to
//                  [1e-7, 1-1e-7] inside the log. With a sigmoid head the
//                  gradient is taken through the logit, (y - t), unclamped.
//   scalar_output: sum over outputs of upstream * y, i.e. `target` holds dL/dy.
template <typename Scalar>
LossResult<Scalar> loss_and_gradients(const BasicDenseNet<Scalar>& net, const MatrixT<Scalar>& inputs, LossKind kind,
                                      const MatrixT<Scalar>& target) {
  using Matrix = MatrixT<Scalar>;
  if (target.rows() != net.output_dim() || target.cols() != inputs.cols())
    throw DimensionError("target shape " + std::to_string(target.rows()) + "x" + std::to_string(target.cols()) +
                         " does not match output " + std::to_string(net.output_dim()) + "x" +
                         std::to_string(inputs.cols()));
  const Scalar inv_batch = Scalar(1) / static_cast<Scalar>(inputs.cols());
  auto trace = net.forward_trace(inputs);
  const Matrix& y = trace.output();
  LossResult<Scalar> r;
  Matrix dy;
  switch (kind) {
    case LossKind::mse: {
      const Scalar k = static_cast<Scalar>(y.rows());
      Matrix diff = y - target;
      r.loss = diff.squaredNorm() / k * inv_batch;
      dy = diff * (Scalar(2) / k * inv_batch);
      break;
    }
    case LossKind::bce: {
      if ((target.array() < Scalar(0)).any() || (target.array() > Scalar(1)).any())
        throw InvalidArgument("bce target outside [0, 1]");
      const Scalar lo = static_cast<Scalar>(kBceClamp);
      Matrix p = y.cwiseMax(lo).cwiseMin(Scalar(1) - lo);
      r.loss = -(target.array() * p.array().log() + (Scalar(1) - target.array()) * (Scalar(1) - p.array()).log())
                    .sum() *
               inv_batch;
      const auto head = net.layers().back().activation;
      if (head == Activation::sigmoid) {
        Matrix dlogit = (y - target) * inv_batch;
        r.output = y;
        r.grads = backward_from_logits(net, trace, dlogit);
        return r;
      }
      dy = ((p - target).array() / (p.array() * (Scalar(1) - p.array()))).matrix() * inv_batch;
      break;
    }
    case LossKind::scalar_output: {
      r.loss = y.cwiseProduct(target).sum() * inv_batch;
      dy = target * inv_batch;
      break;
    }
  }
  r.output = y;
  r.grads = net.backward(trace, dy);
  return r;
}

inline LossResult<float> loss_and_gradients(const DenseNet& net, const Matrix& inputs, LossKind kind,
                                           const Matrix& target) {
  return loss_and_gradients<float>(net, inputs, kind, target);
}

struct AdamConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

template <typename Scalar>
class BasicAdamState {
 public:
  BasicAdamState() = default;
  BasicAdamState(const BasicDenseNet<Scalar>& net, AdamConfig config) : config_(config) {
    for (const auto& l : net.layers()) {
      m_w_.push_back(MatrixT<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
      v_w_.push_back(MatrixT<Scalar>::Zero(l.weight.rows(), l.weight.cols()));
      m_b_.push_back(VectorT<Scalar>::Zero(l.bias.size()));
      v_b_.push_back(VectorT<Scalar>::Zero(l.bias.size()));
    }
  }

  const AdamConfig& config() const { return config_; }
  void set_learning_rate(double lr) { config_.learning_rate = lr; }
  std::int64_t step_count() const { return t_; }

  // Standard Adam with bias correction. Throws NonFiniteError when any
  // parameter becomes NaN/Inf.
  void step(BasicDenseNet<Scalar>& net, const Gradients<Scalar>& grads) {
    if (grads.weight.size() != net.layer_count() || m_w_.size() != net.layer_count())
      throw DimensionError("gradient/optimizer state does not match network layer count");
    ++t_;
    const double c1 = 1.0 - std::pow(config_.beta1, static_cast<double>(t_));
    const double c2 = 1.0 - std::pow(config_.beta2, static_cast<double>(t_));
    const Scalar b1 = static_cast<Scalar>(config_.beta1);
    const Scalar b2 = static_cast<Scalar>(config_.beta2);
    const Scalar lr_hat = static_cast<Scalar>(config_.learning_rate / c1);
    const Scalar inv_c2 = static_cast<Scalar>(1.0 / c2);
    const Scalar eps = static_cast<Scalar>(config_.epsilon);
    for (std::size_t k = 0; k < net.layer_count(); ++k) {
      auto& layer = net.layer(k);
      const auto& gw = grads.weight[k];
      const auto& gb = grads.bias[k];
      if (gw.rows() != layer.weight.rows() || gw.cols() != layer.weight.cols() || gb.size() != layer.bias.size())
        throw DimensionError("layer " + std::to_string(k) + ": gradient shape does not match parameters");
      m_w_[k] = b1 * m_w_[k] + (Scalar(1) - b1) * gw;
      v_w_[k] = b2 * v_w_[k] + (Scalar(1) - b2) * gw.cwiseAbs2();
      layer.weight.array() -= lr_hat * m_w_[k].array() / ((v_w_[k].array() * inv_c2).sqrt() + eps);
      m_b_[k] = b1 * m_b_[k] + (Scalar(1) - b1) * gb;
      v_b_[k] = b2 * v_b_[k] + (Scalar(1) - b2) * gb.cwiseAbs2();
      layer.bias.array() -= lr_hat * m_b_[k].array() / ((v_b_[k].array() * inv_c2).sqrt() + eps);
    }
    if (!net.all_finite())
      throw NonFiniteError("non-finite parameter after optimizer step " + std::to_string(t_));
  }

 private:
  AdamConfig config_;
  std::int64_t t_ = 0;
  std::vector<MatrixT<Scalar>> m_w_, v_w_;
  std::vector<VectorT<Scalar>> m_b_, v_b_;
};

using AdamState = BasicAdamState<float>;

template <typename Scalar>
void adam_step(BasicDenseNet<Scalar>& net, const Gradients<Scalar>& grads, BasicAdamState<Scalar>& state) {
  state.step(net, grads);
}

// Checkpoint format:
//   8-byte magic "VAERLNN\0", u16 version, u32 header length, JSON
//   architecture header, f32 parameters (per layer: weights row-major, then
//   bias), u32 CRC32 of everything before it. All integers little-endian.
inline constexpr std::uint16_t kCheckpointVersion = 1;

std::vector<std::uint8_t> save_checkpoint(const DenseNet& net);
DenseNet load_checkpoint(std::span<const std::uint8_t> bytes);

void save_checkpoint_file(const DenseNet& net, const std::string& path);
DenseNet load_checkpoint_file(const std::string& path);

// CRC32 over the checkpoint payload; used to fingerprint frozen networks.
std::uint32_t parameter_checksum(const DenseNet& net);

}  // namespace vaerl::nn
