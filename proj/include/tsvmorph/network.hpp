#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <vector>

#include "tsvmorph/layers.hpp"

namespace tsvmorph {

/// Sequential stack of layers with reverse-mode chain rule.
template <typename Scalar>
class Network {
 public:
  /// `input` is the per-sample shape, e.g. {1, 54, 54}. Layers before a tanh
  /// get Xavier init, all others feeding a ReLU get Kaiming.
  Network(std::span<const LayerSpec> layers, const Shape& input, std::uint64_t seed);

  Tensor<Scalar> forward(const Tensor<Scalar>& batch, Mode mode);
  Tensor<Scalar> backward(const Tensor<Scalar>& grad_out);
  /// Backward from d(loss)/d(logits), skipping a trailing Softmax.
  Tensor<Scalar> backward_from_logits(const Tensor<Scalar>& grad_logits);

  std::vector<Parameter<Scalar>*> parameters();
  void zero_grad();

  std::size_t size() const { return layers_.size(); }
  Layer<Scalar>& layer(std::size_t i) { return *layers_[i]; }
  const Shape& input_shape() const { return input_; }

 private:
  Tensor<Scalar> backward_range(Tensor<Scalar> grad, std::size_t end);

  Shape input_;
  std::vector<std::unique_ptr<Layer<Scalar>>> layers_;
  bool has_cache_ = false;
};

template <typename Scalar>
struct LossResult {
  double loss = 0;              // mean cross-entropy over the batch
  Tensor<Scalar> grad_logits;   // (probs - onehot) / N
};

/// Mean cross-entropy of softmax outputs [N, classes] against integer labels,
/// and the fused gradient with respect to the logits.
template <typename Scalar>
LossResult<Scalar> softmax_cross_entropy(const Tensor<Scalar>& probs, std::span<const int> labels);

/// v <- momentum * v + g; p <- p - lr * v for every trainable parameter.
/// Throws Error(ShapeMismatch) if a gradient does not match its parameter.
template <typename Scalar>
void sgd_step(std::span<Parameter<Scalar>* const> params, double lr, double momentum);

}  // namespace tsvmorph
