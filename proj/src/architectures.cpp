#include "tsvmorph/architectures.hpp"

#include <algorithm>
#include <cctype>
#include <cstdio>
#include <sstream>

namespace tsvmorph {

namespace {

ConvSpec conv(int filters, int kernel, int stride = 1, int padding = 0) {
  return {filters, kernel, stride, padding};
}
PoolSpec max_pool(int size, int stride, int padding = 0) { return {PoolKind::Max, size, stride, padding}; }
PoolSpec avg_pool(int size, int stride) { return {PoolKind::Avg, size, stride, 0}; }
const ActivationSpec kRelu{ActivationKind::Relu};
const ActivationSpec kTanh{ActivationKind::Tanh};

std::vector<LayerSpec> lenet5() {
  return {conv(6, 5), kTanh, avg_pool(2, 2),
          conv(16, 5), kTanh, avg_pool(2, 2),
          conv(120, 5), kTanh,
          FlattenSpec{}, DenseSpec{84}, kTanh, DenseSpec{3}, SoftmaxSpec{}};
}

std::vector<LayerSpec> alexnet_inspired_lenet() {
  return {conv(6, 5), BatchNormSpec{}, kRelu, max_pool(2, 2),
          conv(16, 5), BatchNormSpec{}, kRelu, max_pool(2, 2),
          conv(120, 5), BatchNormSpec{}, kRelu, max_pool(2, 2),
          FlattenSpec{},
          DenseSpec{512}, kRelu, DropoutSpec{},
          DenseSpec{64}, kRelu, DropoutSpec{},
          DenseSpec{3}, SoftmaxSpec{}};
}

// Paddings are not given for the 54x54 transplant: the convolutions keep the
// classic AlexNet paddings and only the last pool is padded, the least
// padding that keeps every extent positive.
std::vector<LayerSpec> alexnet() {
  return {conv(96, 11, 4, 0), BatchNormSpec{}, kRelu, max_pool(3, 2, 0),
          conv(256, 5, 1, 2), BatchNormSpec{}, kRelu, max_pool(3, 2, 0),
          conv(384, 3, 1, 1), kRelu,
          conv(384, 3, 1, 1), kRelu,
          conv(256, 3, 1, 1), kRelu, max_pool(3, 2, 1),
          FlattenSpec{},
          DenseSpec{1024}, kRelu, DropoutSpec{},
          DenseSpec{1024}, kRelu, DropoutSpec{},
          DenseSpec{3}, SoftmaxSpec{}};
}

std::vector<LayerSpec> vgg_inspired_alexnet() {
  return {conv(96, 3), BatchNormSpec{}, kRelu, max_pool(2, 2),
          conv(256, 3), BatchNormSpec{}, kRelu, max_pool(2, 2),
          conv(384, 3), kRelu,
          conv(384, 3), kRelu,
          conv(256, 3), kRelu, max_pool(2, 2),
          FlattenSpec{},
          DenseSpec{1024}, kRelu, DropoutSpec{},
          DenseSpec{256}, kRelu, DropoutSpec{},
          DenseSpec{64}, kRelu,
          DenseSpec{3}, SoftmaxSpec{}};
}

std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

}  // namespace

std::string_view to_string(ArchId id) {
  switch (id) {
    case ArchId::LeNet5: return "LeNet5";
    case ArchId::AlexNetInspiredLeNet: return "AlexNetInspiredLeNet";
    case ArchId::AlexNet: return "AlexNet";
    case ArchId::VGGInspiredAlexNet: return "VGGInspiredAlexNet";
  }
  return "LeNet5";
}

std::optional<ArchId> parse_arch(std::string_view name) {
  const std::string key = lower(name);
  for (ArchId id : kAllArchs)
    if (lower(to_string(id)) == key) return id;
  return std::nullopt;
}

ArchitectureSpec build(ArchId id) {
  ArchitectureSpec spec;
  spec.id = id;
  switch (id) {
    case ArchId::LeNet5: spec.layers = lenet5(); break;
    case ArchId::AlexNetInspiredLeNet: spec.layers = alexnet_inspired_lenet(); break;
    case ArchId::AlexNet: spec.layers = alexnet(); break;
    case ArchId::VGGInspiredAlexNet: spec.layers = vgg_inspired_alexnet(); break;
  }
  for (std::size_t i = 0; i < spec.layers.size(); ++i)
    if (std::holds_alternative<DropoutSpec>(spec.layers[i])) spec.dropout_slots.push_back(i);
  return spec;
}

ArchitectureSpec with_dropout(ArchitectureSpec spec, double rate) {
  for (std::size_t slot : spec.dropout_slots) {
    spec.layers[slot] = DropoutSpec{rate};
    validate(spec.layers[slot]);
  }
  return spec;
}

std::vector<TraceRow> shape_trace(const ArchitectureSpec& spec, const Shape& input) {
  std::vector<TraceRow> rows;
  Shape shape = input;
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const LayerSpec& layer = spec.layers[i];
    Shape out;
    try {
      out = output_shape(layer, shape);
    } catch (const Error& e) {
      throw Error(e.code(), "layer " + std::to_string(i) + " " + describe(layer) + " on " +
                                to_string(shape) + ": " + e.what());
    }
    rows.push_back({i, layer, out, parameter_count(layer, shape)});
    shape = std::move(out);
  }
  return rows;
}

Shape pre_flatten_shape(const ArchitectureSpec& spec) {
  const auto trace = shape_trace(spec);
  for (std::size_t i = 0; i < trace.size(); ++i)
    if (std::holds_alternative<FlattenSpec>(trace[i].layer)) return i == 0 ? kInputShape : trace[i - 1].output;
  return trace.empty() ? kInputShape : trace.back().output;
}

Index parameter_count(const ArchitectureSpec& spec) {
  Index total = 0;
  for (const TraceRow& row : shape_trace(spec)) total += row.parameters;
  return total;
}

std::string describe_architecture(const ArchitectureSpec& spec) {
  const auto trace = shape_trace(spec);
  std::ostringstream out;
  out << "architecture: " << to_string(spec.id) << "\n";
  out << "input: " << to_string(kInputShape) << "\n";
  char line[128];
  std::snprintf(line, sizeof line, "%-4s %-22s %-14s %s\n", "#", "layer", "output", "params");
  out << line;
  for (const TraceRow& row : trace) {
    std::snprintf(line, sizeof line, "%-4zu %-22s %-14s %lld\n", row.index, describe(row.layer).c_str(),
                  to_string(row.output).c_str(), static_cast<long long>(row.parameters));
    out << line;
  }
  out << "dropout_slots:";
  if (spec.dropout_slots.empty()) out << " none";
  for (std::size_t s : spec.dropout_slots) out << " " << s;
  out << "\n";
  out << "pre_flatten: " << to_string(pre_flatten_shape(spec)) << "\n";
  out << "parameters: " << parameter_count(spec) << "\n";
  return out.str();
}

}  // namespace tsvmorph
