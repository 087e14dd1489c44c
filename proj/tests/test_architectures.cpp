#include <doctest.h>

#include <fstream>
#include <sstream>

#include "tsvmorph/architectures.hpp"
#include "tsvmorph/error.hpp"
#include "tsvmorph/model.hpp"

using namespace tsvmorph;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("pre-flatten shapes") {
  CHECK(pre_flatten_shape(build(ArchId::VGGInspiredAlexNet)) == Shape{256, 3, 3});
  CHECK(pre_flatten_shape(build(ArchId::LeNet5)) == Shape{120, 6, 6});
  for (auto id : kAllArchs) CHECK_NOTHROW(shape_trace(build(id)));
}

TEST_CASE("AlexNet trace collapses to 1x1 before flatten") {
  const auto trace = shape_trace(build(ArchId::AlexNet));
  CHECK(trace.front().output == Shape{96, 11, 11});
  CHECK(pre_flatten_shape(build(ArchId::AlexNet)) == Shape{256, 1, 1});
}

TEST_CASE("only LeNet5 lacks dropout slots") {
  CHECK_FALSE(build(ArchId::LeNet5).has_dropout());
  for (auto id : {ArchId::AlexNetInspiredLeNet, ArchId::AlexNet, ArchId::VGGInspiredAlexNet})
    CHECK(build(id).has_dropout());
  auto d = with_dropout(build(ArchId::VGGInspiredAlexNet), 0.3);
  for (auto slot : d.dropout_slots) CHECK(std::get<DropoutSpec>(d.layers[slot]).rate == 0.3);
}

TEST_CASE("architecture names parse case-insensitively") {
  for (auto id : kAllArchs) CHECK(parse_arch(to_string(id)) == id);
  CHECK(parse_arch("lenet5") == ArchId::LeNet5);
  CHECK_FALSE(parse_arch("resnet").has_value());
}

TEST_CASE("describe output matches the frozen tables") {
  for (auto id : kAllArchs) {
    CAPTURE(to_string(id));
    const auto golden = slurp(std::string(TSVMORPH_GOLDEN_DIR) + "/describe_" + std::string(to_string(id)) + ".txt");
    REQUIRE_FALSE(golden.empty());
    CHECK(describe_architecture(build(id)) == golden);
  }
}

TEST_CASE("parameter count equals the sum over the trace and the built network") {
  for (auto id : kAllArchs) {
    const auto spec = build(id);
    Index sum = 0;
    for (const auto& row : shape_trace(spec)) sum += row.parameters;
    CHECK(sum == parameter_count(spec));
    Model m(spec, 1);
    Index built = 0;
    for (auto* p : m.net.parameters())
      if (p->trainable) built += p->value.size();
    CHECK(built == sum);
  }
}

TEST_CASE("full forward and backward stay finite for every architecture") {
  for (auto id : kAllArchs) {
    CAPTURE(to_string(id));
    Model m(with_dropout(build(id), 0.5), 7);
    Tensor<float> x({2, 1, 54, 54});
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    for (Index i = 0; i < x.size(); ++i) x[i] = u(rng);
    auto probs = m.net.forward(x, Mode::Train);
    CHECK(probs.all_finite());
    const std::vector<int> labels{0, 2};
    auto loss = softmax_cross_entropy(probs, std::span<const int>(labels));
    m.net.zero_grad();
    auto dx = m.net.backward_from_logits(loss.grad_logits);
    CHECK(dx.all_finite());
    for (auto* p : m.net.parameters()) CHECK(p->grad.all_finite());
  }
}
