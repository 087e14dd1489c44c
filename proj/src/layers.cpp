#include "tsvmorph/layers.hpp"

#include <cmath>
#include <cstdio>
#include <regex>

namespace tsvmorph {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::string format_rate(double r) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", r);
  return buf;
}

Shape window_shape(const Shape& in, int channels, int window, int stride, int padding,
                   const std::string& what) {
  if (in.size() != 3)
    throw Error(Errc::ShapeMismatch, what + " needs a [C,H,W] input, got " + to_string(in));
  const Index h = window_output_extent(in[1], window, stride, padding);
  const Index w = window_output_extent(in[2], window, stride, padding);
  if (h <= 0 || w <= 0)
    throw Error(Errc::ShapeUnderflow, what + " on " + to_string(in) + " leaves no output");
  return {channels, h, w};
}

}  // namespace

std::string describe(const LayerSpec& spec) {
  return std::visit(
      Overloaded{
          [](const ConvSpec& c) {
            return "Conv(" + std::to_string(c.filters) + ",k" + std::to_string(c.kernel) + ",s" +
                   std::to_string(c.stride) + ",p" + std::to_string(c.padding) + ")";
          },
          [](const PoolSpec& p) {
            return std::string(p.kind == PoolKind::Max ? "MaxPool" : "AvgPool") + "(k" +
                   std::to_string(p.size) + ",s" + std::to_string(p.stride) + ",p" +
                   std::to_string(p.padding) + ")";
          },
          [](const BatchNormSpec&) { return std::string("BatchNorm"); },
          [](const ActivationSpec& a) {
            return std::string(a.kind == ActivationKind::Tanh ? "Tanh" : "ReLU");
          },
          [](const FlattenSpec&) { return std::string("Flatten"); },
          [](const DenseSpec& d) { return "Dense(" + std::to_string(d.units) + ")"; },
          [](const DropoutSpec& d) { return "Dropout(" + format_rate(d.rate) + ")"; },
          [](const SoftmaxSpec&) { return std::string("Softmax"); },
      },
      spec);
}

LayerSpec parse_layer_spec(const std::string& text) {
  std::smatch m;
  static const std::regex conv(R"(Conv\((\d+),k(\d+),s(\d+),p(\d+)\))");
  static const std::regex pool(R"((Max|Avg)Pool\(k(\d+),s(\d+),p(\d+)\))");
  static const std::regex dense(R"(Dense\((\d+)\))");
  static const std::regex drop(R"(Dropout\(([0-9.eE+-]+)\))");
  if (std::regex_match(text, m, conv))
    return ConvSpec{std::stoi(m[1]), std::stoi(m[2]), std::stoi(m[3]), std::stoi(m[4])};
  if (std::regex_match(text, m, pool))
    return PoolSpec{m[1] == "Max" ? PoolKind::Max : PoolKind::Avg, std::stoi(m[2]), std::stoi(m[3]),
                    std::stoi(m[4])};
  if (std::regex_match(text, m, dense)) return DenseSpec{std::stoi(m[1])};
  if (std::regex_match(text, m, drop)) return DropoutSpec{std::stod(m[1])};
  if (text == "BatchNorm") return BatchNormSpec{};
  if (text == "Tanh") return ActivationSpec{ActivationKind::Tanh};
  if (text == "ReLU") return ActivationSpec{ActivationKind::Relu};
  if (text == "Flatten") return FlattenSpec{};
  if (text == "Softmax") return SoftmaxSpec{};
  throw Error(Errc::InvalidParams, "unknown layer '" + text + "'");
}

void validate(const LayerSpec& spec) {
  auto require = [&](bool ok, const char* what) {
    if (!ok) throw Error(Errc::InvalidParams, describe(spec) + ": " + what);
  };
  std::visit(Overloaded{
                 [&](const ConvSpec& c) {
                   require(c.filters >= 1 && c.kernel >= 1 && c.stride >= 1, "filters, kernel, stride must be >= 1");
                   require(c.padding >= 0, "padding must be >= 0");
                 },
                 [&](const PoolSpec& p) {
                   require(p.size >= 1 && p.stride >= 1, "size and stride must be >= 1");
                   require(p.padding >= 0 && p.padding < p.size, "padding must be in [0, size)");
                 },
                 [&](const BatchNormSpec& b) {
                   require(b.momentum >= 0 && b.momentum < 1 && b.epsilon > 0, "bad momentum or epsilon");
                 },
                 [&](const DenseSpec& d) { require(d.units >= 1, "units must be >= 1"); },
                 [&](const DropoutSpec& d) { require(d.rate >= 0 && d.rate < 1, "rate must be in [0, 1)"); },
                 [](const auto&) {},
             },
             spec);
}

Shape output_shape(const LayerSpec& spec, const Shape& in) {
  validate(spec);
  return std::visit(
      Overloaded{
          [&](const ConvSpec& c) {
            return window_shape(in, c.filters, c.kernel, c.stride, c.padding, describe(spec));
          },
          [&](const PoolSpec& p) {
            return window_shape(in, static_cast<int>(in.at(0)), p.size, p.stride, p.padding, describe(spec));
          },
          [&](const FlattenSpec&) { return Shape{shape_size(in)}; },
          [&](const DenseSpec& d) {
            if (in.size() != 1)
              throw Error(Errc::ShapeMismatch, "Dense needs a flat input, got " + to_string(in));
            return Shape{d.units};
          },
          [&](const auto&) { return in; },
      },
      spec);
}

Index parameter_count(const LayerSpec& spec, const Shape& in) {
  return std::visit(Overloaded{
                        [&](const ConvSpec& c) -> Index {
                          return Index{c.filters} * in.at(0) * c.kernel * c.kernel + c.filters;
                        },
                        [&](const BatchNormSpec&) -> Index { return 2 * in.at(0); },
                        [&](const DenseSpec& d) -> Index { return (in.at(0) + 1) * d.units; },
                        [](const auto&) -> Index { return 0; },
                    },
                    spec);
}

namespace {

template <typename Scalar>
Tensor<Scalar> random_normal(const Shape& shape, double stddev, std::mt19937_64& rng) {
  Tensor<Scalar> t(shape);
  std::normal_distribution<double> normal(0.0, stddev);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<Scalar>(normal(rng));
  return t;
}

double init_std(InitScheme init, Index fan_in) {
  return std::sqrt((init == InitScheme::Kaiming ? 2.0 : 1.0) / static_cast<double>(fan_in));
}

template <typename Scalar>
Parameter<Scalar> make_parameter(std::string name, Tensor<Scalar> value, bool trainable = true) {
  Parameter<Scalar> p;
  p.name = std::move(name);
  p.grad = Tensor<Scalar>(value.shape());
  p.velocity = Tensor<Scalar>(value.shape());
  p.value = std::move(value);
  p.trainable = trainable;
  return p;
}

[[noreturn]] void no_cache(const LayerSpec& spec) {
  throw Error(Errc::NoForwardCache, describe(spec) + ": backward called without a forward pass");
}

template <typename Scalar>
class Conv2dLayer final : public Layer<Scalar> {
 public:
  Conv2dLayer(const ConvSpec& s, const Shape& in, InitScheme init, std::mt19937_64& rng)
      : Layer<Scalar>(s), s_(s) {
    const Index fan_in = in.at(0) * s.kernel * s.kernel;
    kernels_ = make_parameter("kernels",
                              random_normal<Scalar>({s.filters, in.at(0), s.kernel, s.kernel},
                                                    init_std(init, fan_in), rng));
    bias_ = make_parameter("bias", Tensor<Scalar>(Shape{s.filters}));
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode) override {
    input_ = x;
    return conv2d(x, kernels_.value, bias_.value, s_.stride, s_.padding);
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (input_.empty()) no_cache(this->spec());
    auto grads = conv2d_backward(input_, kernels_.value, g, s_.stride, s_.padding);
    kernels_.grad.array() += grads.kernels.array();
    bias_.grad.array() += grads.bias.array();
    return std::move(grads.input);
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&kernels_, &bias_}; }
  void clear_cache() override { input_ = {}; }

 private:
  ConvSpec s_;
  Parameter<Scalar> kernels_, bias_;
  Tensor<Scalar> input_;
};

template <typename Scalar>
class Pool2dLayer final : public Layer<Scalar> {
 public:
  explicit Pool2dLayer(const PoolSpec& s) : Layer<Scalar>(s), s_(s) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode) override {
    input_shape_ = x.shape();
    cache_ = pool2d(x, s_.kind, s_.size, s_.stride, s_.padding);
    cached_ = true;
    return cache_.output;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (!cached_) no_cache(this->spec());
    return pool2d_backward(input_shape_, cache_, g, s_.kind, s_.size, s_.stride, s_.padding);
  }

  void clear_cache() override {
    cache_ = {};
    cached_ = false;
  }

 private:
  PoolSpec s_;
  Shape input_shape_;
  PoolResult<Scalar> cache_;
  bool cached_ = false;
};

template <typename Scalar>
class BatchNormLayer final : public Layer<Scalar> {
 public:
  BatchNormLayer(const BatchNormSpec& s, const Shape& in) : Layer<Scalar>(s) {
    const Index c = in.at(0);
    gamma_ = make_parameter("gamma", Tensor<Scalar>(Shape{c}, Scalar(1)));
    beta_ = make_parameter("beta", Tensor<Scalar>(Shape{c}));
    mean_ = make_parameter("running_mean", Tensor<Scalar>(Shape{c}), false);
    var_ = make_parameter("running_var", Tensor<Scalar>(Shape{c}, Scalar(1)), false);
    momentum_ = s.momentum;
    epsilon_ = s.epsilon;
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override {
    BatchNormState<Scalar> st = state();
    Tensor<Scalar> y = batch_norm(x, st, mode, &cache_);
    mean_.value = std::move(st.running_mean);
    var_.value = std::move(st.running_var);
    cached_ = true;
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (!cached_) no_cache(this->spec());
    auto grads = batch_norm_backward(state(), cache_, g);
    gamma_.grad.array() += grads.gamma.array();
    beta_.grad.array() += grads.beta.array();
    return std::move(grads.input);
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&gamma_, &beta_, &mean_, &var_}; }
  void clear_cache() override {
    cache_ = {};
    cached_ = false;
  }

 private:
  BatchNormState<Scalar> state() const {
    return {gamma_.value, beta_.value, mean_.value, var_.value, momentum_, epsilon_};
  }

  Parameter<Scalar> gamma_, beta_, mean_, var_;
  double momentum_ = 0.9, epsilon_ = 1e-5;
  BatchNormCache<Scalar> cache_;
  bool cached_ = false;
};

template <typename Scalar>
class ActivationLayer final : public Layer<Scalar> {
 public:
  explicit ActivationLayer(const ActivationSpec& s) : Layer<Scalar>(s), kind_(s.kind) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode) override {
    output_ = Tensor<Scalar>(x.shape(), activate(x.array(), kind_));
    return output_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (output_.empty()) no_cache(this->spec());
    Tensor<Scalar> dx(g.shape());
    if (kind_ == ActivationKind::Tanh)
      dx.array() = g.array() * (Scalar(1) - output_.array().square());
    else
      dx.array() = (output_.array() > Scalar(0)).select(g.array(), Scalar(0));
    return dx;
  }

  void clear_cache() override { output_ = {}; }

 private:
  ActivationKind kind_;
  Tensor<Scalar> output_;
};

template <typename Scalar>
class FlattenLayer final : public Layer<Scalar> {
 public:
  FlattenLayer() : Layer<Scalar>(FlattenSpec{}) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode) override {
    input_shape_ = x.shape();
    return x.reshaped({x.dim(0), x.size() / x.dim(0)});
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (input_shape_.empty()) no_cache(this->spec());
    return g.reshaped(input_shape_);
  }

  void clear_cache() override { input_shape_.clear(); }

 private:
  Shape input_shape_;
};

template <typename Scalar>
class DenseLayer final : public Layer<Scalar> {
 public:
  DenseLayer(const DenseSpec& s, const Shape& in, InitScheme init, std::mt19937_64& rng)
      : Layer<Scalar>(s) {
    weights_ = make_parameter("weights", random_normal<Scalar>({s.units, in.at(0)}, init_std(init, in.at(0)), rng));
    bias_ = make_parameter("bias", Tensor<Scalar>(Shape{s.units}));
  }

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode) override {
    if (x.rank() != 2 || x.dim(1) != weights_.value.dim(1))
      throw Error(Errc::ShapeMismatch, describe(this->spec()) + " got input " + to_string(x.shape()));
    input_ = x;
    Tensor<Scalar> y(Shape{x.dim(0), weights_.value.dim(0)});
    y.matrix().noalias() = x.matrix() * weights_.value.matrix().transpose();
    y.matrix().rowwise() += bias_.value.array().matrix().transpose();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (input_.empty()) no_cache(this->spec());
    weights_.grad.matrix().noalias() += g.matrix().transpose() * input_.matrix();
    bias_.grad.array() += g.matrix().colwise().sum().transpose().array();
    Tensor<Scalar> dx(input_.shape());
    dx.matrix().noalias() = g.matrix() * weights_.value.matrix();
    return dx;
  }

  std::vector<Parameter<Scalar>*> parameters() override { return {&weights_, &bias_}; }
  void clear_cache() override { input_ = {}; }

 private:
  Parameter<Scalar> weights_, bias_;
  Tensor<Scalar> input_;
};

template <typename Scalar>
class DropoutLayer final : public Layer<Scalar> {
 public:
  DropoutLayer(const DropoutSpec& s, std::uint64_t seed) : Layer<Scalar>(s), rate_(s.rate), rng_(seed) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode mode) override {
    cached_ = true;
    if (mode == Mode::Eval || rate_ == 0.0) {
      mask_ = {};
      return x;
    }
    mask_ = dropout_mask<Scalar>(x.shape(), rate_, rng_);
    Tensor<Scalar> y = mask_;
    y.array() *= x.array();
    return y;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (!cached_) no_cache(this->spec());
    if (mask_.empty()) return g;
    Tensor<Scalar> dx = mask_;
    dx.array() *= g.array();
    return dx;
  }

  void clear_cache() override {
    mask_ = {};
    cached_ = false;
  }
  void reseed(std::uint64_t seed) override { rng_.seed(seed); }

 private:
  double rate_;
  std::mt19937_64 rng_;
  Tensor<Scalar> mask_;
  bool cached_ = false;
};

template <typename Scalar>
class SoftmaxLayer final : public Layer<Scalar> {
 public:
  SoftmaxLayer() : Layer<Scalar>(SoftmaxSpec{}) {}

  Tensor<Scalar> forward(const Tensor<Scalar>& x, Mode) override {
    output_ = Tensor<Scalar>(x.shape());
    output_.matrix() = softmax(x.matrix());
    return output_;
  }

  Tensor<Scalar> backward(const Tensor<Scalar>& g) override {
    if (output_.empty()) no_cache(this->spec());
    // dx = y * (g - <g, y>) per row
    Tensor<Scalar> dx(g.shape());
    const auto y = output_.matrix();
    const Eigen::Matrix<Scalar, Eigen::Dynamic, 1> dots = (g.matrix().array() * y.array()).rowwise().sum();
    dx.matrix().array() = y.array() * (g.matrix().colwise() - dots).array();
    return dx;
  }

  void clear_cache() override { output_ = {}; }

 private:
  Tensor<Scalar> output_;
};

}  // namespace

template <typename Scalar>
std::unique_ptr<Layer<Scalar>> make_layer(const LayerSpec& spec, const Shape& input, InitScheme init,
                                          std::mt19937_64& rng) {
  output_shape(spec, input);  // validates and checks the shape law
  return std::visit(
      Overloaded{
          [&](const ConvSpec& s) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<Conv2dLayer<Scalar>>(s, input, init, rng);
          },
          [&](const PoolSpec& s) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<Pool2dLayer<Scalar>>(s);
          },
          [&](const BatchNormSpec& s) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<BatchNormLayer<Scalar>>(s, input);
          },
          [&](const ActivationSpec& s) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<ActivationLayer<Scalar>>(s);
          },
          [&](const FlattenSpec&) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<FlattenLayer<Scalar>>();
          },
          [&](const DenseSpec& s) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<DenseLayer<Scalar>>(s, input, init, rng);
          },
          [&](const DropoutSpec& s) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<DropoutLayer<Scalar>>(s, rng());
          },
          [&](const SoftmaxSpec&) -> std::unique_ptr<Layer<Scalar>> {
            return std::make_unique<SoftmaxLayer<Scalar>>();
          },
      },
      spec);
}

template std::unique_ptr<Layer<float>> make_layer(const LayerSpec&, const Shape&, InitScheme, std::mt19937_64&);
template std::unique_ptr<Layer<double>> make_layer(const LayerSpec&, const Shape&, InitScheme, std::mt19937_64&);

}  // namespace tsvmorph
