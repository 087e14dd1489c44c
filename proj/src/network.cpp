#include "tsvmorph/network.hpp"

#include <variant>

namespace tsvmorph {

namespace {

InitScheme init_for(std::span<const LayerSpec> layers, std::size_t i) {
  for (std::size_t j = i + 1; j < layers.size(); ++j) {
    if (std::holds_alternative<ConvSpec>(layers[j]) || std::holds_alternative<DenseSpec>(layers[j])) break;
    if (const auto* a = std::get_if<ActivationSpec>(&layers[j]))
      return a->kind == ActivationKind::Relu ? InitScheme::Kaiming : InitScheme::Xavier;
  }
  return InitScheme::Xavier;
}

}  // namespace

template <typename Scalar>
Network<Scalar>::Network(std::span<const LayerSpec> layers, const Shape& input, std::uint64_t seed)
    : input_(input) {
  std::mt19937_64 rng(seed);
  Shape shape = input;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    layers_.push_back(make_layer<Scalar>(layers[i], shape, init_for(layers, i), rng));
    shape = output_shape(layers[i], shape);
  }
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::forward(const Tensor<Scalar>& batch, Mode mode) {
  Shape expected = input_;
  expected.insert(expected.begin(), batch.rank() > 0 ? batch.dim(0) : 0);
  if (batch.shape() != expected)
    throw Error(Errc::ShapeMismatch, "network expects " + to_string(expected) + ", got " + to_string(batch.shape()));
  Tensor<Scalar> x = batch;
  for (auto& layer : layers_) x = layer->forward(x, mode);
  has_cache_ = mode == Mode::Train;
  return x;
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::backward_range(Tensor<Scalar> grad, std::size_t end) {
  if (!has_cache_) throw Error(Errc::NoForwardCache, "backward requires a train-mode forward pass");
  for (std::size_t i = end; i-- > 0;) grad = layers_[i]->backward(grad);
  return grad;
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::backward(const Tensor<Scalar>& grad_out) {
  return backward_range(grad_out, layers_.size());
}

template <typename Scalar>
Tensor<Scalar> Network<Scalar>::backward_from_logits(const Tensor<Scalar>& grad_logits) {
  std::size_t end = layers_.size();
  if (end > 0 && std::holds_alternative<SoftmaxSpec>(layers_.back()->spec())) --end;
  return backward_range(grad_logits, end);
}

template <typename Scalar>
std::vector<Parameter<Scalar>*> Network<Scalar>::parameters() {
  std::vector<Parameter<Scalar>*> out;
  for (auto& layer : layers_)
    for (auto* p : layer->parameters()) out.push_back(p);
  return out;
}

template <typename Scalar>
void Network<Scalar>::zero_grad() {
  for (auto* p : parameters()) p->grad.array().setZero();
}

template <typename Scalar>
LossResult<Scalar> softmax_cross_entropy(const Tensor<Scalar>& probs, std::span<const int> labels) {
  if (probs.rank() != 2 || static_cast<std::size_t>(probs.dim(0)) != labels.size())
    throw Error(Errc::ShapeMismatch, "probabilities " + to_string(probs.shape()) + " for " +
                                         std::to_string(labels.size()) + " labels");
  const Index n = probs.dim(0);
  LossResult<Scalar> res{0.0, probs};
  auto g = res.grad_logits.matrix();
  for (Index i = 0; i < n; ++i) {
    const int label = labels[static_cast<std::size_t>(i)];
    if (label < 0 || label >= probs.dim(1)) throw Error(Errc::InvalidLabel, "label out of range");
    res.loss += cross_entropy(probs.matrix().row(i), label);
    g(i, label) -= Scalar(1);
  }
  res.loss /= static_cast<double>(n);
  g /= static_cast<Scalar>(n);
  return res;
}

template <typename Scalar>
void sgd_step(std::span<Parameter<Scalar>* const> params, double lr, double momentum) {
  const auto m = static_cast<Scalar>(momentum);
  const auto rate = static_cast<Scalar>(lr);
  for (Parameter<Scalar>* p : params) {
    if (!p->trainable) continue;
    if (p->grad.shape() != p->value.shape() || p->velocity.shape() != p->value.shape())
      throw Error(Errc::ShapeMismatch, "gradient for '" + p->name + "' has shape " + to_string(p->grad.shape()) +
                                           ", parameter has " + to_string(p->value.shape()));
    p->velocity.array() = m * p->velocity.array() + p->grad.array();
    p->value.array() -= rate * p->velocity.array();
  }
}

template class Network<float>;
template class Network<double>;
template LossResult<float> softmax_cross_entropy(const Tensor<float>&, std::span<const int>);
template LossResult<double> softmax_cross_entropy(const Tensor<double>&, std::span<const int>);
template void sgd_step(std::span<Parameter<float>* const>, double, double);
template void sgd_step(std::span<Parameter<double>* const>, double, double);

}  // namespace tsvmorph
