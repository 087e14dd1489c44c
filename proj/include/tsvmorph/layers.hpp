#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <random>
#include <string>
#include <variant>
#include <vector>

#include "tsvmorph/tensor_ops.hpp"

namespace tsvmorph {

struct ConvSpec {
  int filters = 1, kernel = 1, stride = 1, padding = 0;
  friend bool operator==(const ConvSpec&, const ConvSpec&) = default;
};
struct PoolSpec {
  PoolKind kind = PoolKind::Max;
  int size = 2, stride = 2, padding = 0;
  friend bool operator==(const PoolSpec&, const PoolSpec&) = default;
};
struct BatchNormSpec {
  double momentum = 0.9, epsilon = 1e-5;
  friend bool operator==(const BatchNormSpec&, const BatchNormSpec&) = default;
};
struct ActivationSpec {
  ActivationKind kind = ActivationKind::Relu;
  friend bool operator==(const ActivationSpec&, const ActivationSpec&) = default;
};
struct FlattenSpec {
  friend bool operator==(const FlattenSpec&, const FlattenSpec&) = default;
};
struct DenseSpec {
  int units = 1;
  friend bool operator==(const DenseSpec&, const DenseSpec&) = default;
};
struct DropoutSpec {
  double rate = 0.0;
  friend bool operator==(const DropoutSpec&, const DropoutSpec&) = default;
};
struct SoftmaxSpec {
  friend bool operator==(const SoftmaxSpec&, const SoftmaxSpec&) = default;
};

using LayerSpec = std::variant<ConvSpec, PoolSpec, BatchNormSpec, ActivationSpec, FlattenSpec,
                               DenseSpec, DropoutSpec, SoftmaxSpec>;

/// Short form used in layer tables and checkpoints, e.g. "Conv(96,k3,s1,p0)".
std::string describe(const LayerSpec& spec);
/// Inverse of describe.
LayerSpec parse_layer_spec(const std::string& text);

/// Throws Error(InvalidParams) if a field is out of range.
void validate(const LayerSpec& spec);

/// Per-sample output shape ([C,H,W] or [F]) from a per-sample input shape.
/// Throws Error(ShapeUnderflow) when an extent would drop to zero.
Shape output_shape(const LayerSpec& spec, const Shape& input);

/// Trainable parameters learned from the spec, for a given per-sample input.
Index parameter_count(const LayerSpec& spec, const Shape& input);

template <typename Scalar>
struct Parameter {
  std::string name;
  Tensor<Scalar> value, grad, velocity;
  bool trainable = true;  // false for batch-norm running statistics
};

/// One stage of a sequential network, with cached state for backward.
template <typename Scalar>
class Layer {
 public:
  virtual ~Layer() = default;

  virtual Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) = 0;
  /// Gradient w.r.t. the input; accumulates parameter gradients.
  /// Throws Error(NoForwardCache) without a preceding forward.
  virtual Tensor<Scalar> backward(const Tensor<Scalar>& grad_out) = 0;
  virtual std::vector<Parameter<Scalar>*> parameters() { return {}; }
  virtual void clear_cache() = 0;
  /// Restarts the layer's random stream (dropout masks); no-op otherwise.
  virtual void reseed(std::uint64_t) {}

  const LayerSpec& spec() const { return spec_; }

 protected:
  explicit Layer(LayerSpec spec) : spec_(std::move(spec)) {}

 private:
  LayerSpec spec_;
};

enum class InitScheme { Xavier, Kaiming };

/// Builds the runtime layer for `spec`. Weights are drawn from a normal
/// distribution with std sqrt(1/fan_in) (Xavier) or sqrt(2/fan_in) (Kaiming).
template <typename Scalar>
std::unique_ptr<Layer<Scalar>> make_layer(const LayerSpec& spec, const Shape& input, InitScheme init,
                                          std::mt19937_64& rng);

}  // namespace tsvmorph
