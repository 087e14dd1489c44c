#pragma once

#include <cstdint>
#include <random>

#include <Eigen/Core>

#include "tsvmorph/tensor.hpp"

namespace tsvmorph {

enum class Mode { Train, Eval };
enum class PoolKind { Max, Avg };
enum class ActivationKind { Tanh, Relu };

/// floor((n + 2*padding - window) / stride) + 1, or <= 0 when the window
/// does not fit.
inline Index window_output_extent(Index n, int window, int stride, int padding) {
  const Index span = n + 2 * padding - window;
  return span < 0 ? 0 : span / stride + 1;
}

// ---- convolution (cross-correlation, zero padding) ----

/// x: [N, C, H, W] or [C, H, W]; kernels: [F, C, k, k]; bias: [F].
template <typename Scalar>
Tensor<Scalar> conv2d(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                      const Tensor<Scalar>& bias, int stride, int padding);

template <typename Scalar>
struct Conv2dGrads {
  Tensor<Scalar> input, kernels, bias;
};

template <typename Scalar>
Conv2dGrads<Scalar> conv2d_backward(const Tensor<Scalar>& x, const Tensor<Scalar>& kernels,
                                    const Tensor<Scalar>& grad_out, int stride, int padding);

// ---- pooling: padded cells are -inf for max and excluded from averages ----

template <typename Scalar>
struct PoolResult {
  Tensor<Scalar> output;
  std::vector<Index> argmax;  // flat input index per output cell (max pooling only)
};

template <typename Scalar>
PoolResult<Scalar> pool2d(const Tensor<Scalar>& x, PoolKind kind, int size, int stride, int padding);

template <typename Scalar>
Tensor<Scalar> pool2d_backward(const Shape& input_shape, const PoolResult<Scalar>& forward,
                               const Tensor<Scalar>& grad_out, PoolKind kind, int size, int stride,
                               int padding);

// ---- batch normalization over batch and spatial positions, per channel ----

template <typename Scalar>
struct BatchNormState {
  Tensor<Scalar> gamma, beta, running_mean, running_var;
  double momentum = 0.9;  // weight of the old running statistic
  double epsilon = 1e-5;
};

template <typename Scalar>
struct BatchNormCache {
  Tensor<Scalar> normalized;                       // x_hat
  Eigen::Array<Scalar, Eigen::Dynamic, 1> inv_std;  // per channel
  Mode mode = Mode::Eval;
};

/// Train mode uses batch statistics and updates the running ones; eval mode
/// uses the running statistics.
template <typename Scalar>
Tensor<Scalar> batch_norm(const Tensor<Scalar>& x, BatchNormState<Scalar>& state, Mode mode,
                          BatchNormCache<Scalar>* cache = nullptr);

template <typename Scalar>
struct BatchNormGrads {
  Tensor<Scalar> input, gamma, beta;
};

template <typename Scalar>
BatchNormGrads<Scalar> batch_norm_backward(const BatchNormState<Scalar>& state,
                                           const BatchNormCache<Scalar>& cache,
                                           const Tensor<Scalar>& grad_out);

// ---- dropout (inverted) ----

/// Keep mask scaled by 1/(1-rate). Train mode only; eval is the identity.
template <typename Scalar>
Tensor<Scalar> dropout_mask(const Shape& shape, double rate, std::mt19937_64& rng);

template <typename Scalar>
Tensor<Scalar> dropout(const Tensor<Scalar>& x, double rate, Mode mode, std::uint64_t seed);

// ---- pointwise ----

template <typename Derived>
auto activate(const Eigen::ArrayBase<Derived>& x, ActivationKind kind) {
  using Scalar = typename Derived::Scalar;
  return (kind == ActivationKind::Tanh ? x.tanh().eval() : x.max(Scalar(0)).eval());
}

/// Row-wise softmax with max subtraction.
template <typename Derived>
RowMatrix<typename Derived::Scalar> softmax(const Eigen::MatrixBase<Derived>& logits) {
  using Scalar = typename Derived::Scalar;
  RowMatrix<Scalar> out = logits;
  for (Index r = 0; r < out.rows(); ++r) {
    auto row = out.row(r);
    row.array() = (row.array() - row.maxCoeff()).exp();
    row /= row.sum();
  }
  return out;
}

inline constexpr double kProbabilityFloor = 1e-12;

/// -log(max(probs[label], 1e-12)).
template <typename Derived>
double cross_entropy(const Eigen::MatrixBase<Derived>& probs, int label) {
  const double p = static_cast<double>(probs(label));
  return -std::log(std::max(p, kProbabilityFloor));
}

}  // namespace tsvmorph
