#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tsvmorph/layers.hpp"

namespace tsvmorph {

enum class ArchId { LeNet5, AlexNetInspiredLeNet, AlexNet, VGGInspiredAlexNet };

inline constexpr std::array<ArchId, 4> kAllArchs = {ArchId::LeNet5, ArchId::AlexNetInspiredLeNet,
                                                    ArchId::AlexNet, ArchId::VGGInspiredAlexNet};

std::string_view to_string(ArchId id);
/// Case-insensitive match on the architecture name.
std::optional<ArchId> parse_arch(std::string_view name);

/// Per-sample input of every architecture: one 54x54 grayscale channel.
inline const Shape kInputShape{1, 54, 54};

struct ArchitectureSpec {
  ArchId id = ArchId::LeNet5;
  std::vector<LayerSpec> layers;
  std::vector<std::size_t> dropout_slots;  // indices into layers

  bool has_dropout() const { return !dropout_slots.empty(); }
};

/// The layer list for one of the four networks. Dropout layers are built
/// with rate 0; set the swept rate with with_dropout.
ArchitectureSpec build(ArchId id);

/// Copy of spec with every dropout slot set to `rate`.
ArchitectureSpec with_dropout(ArchitectureSpec spec, double rate);

struct TraceRow {
  std::size_t index;
  LayerSpec layer;
  Shape output;
  Index parameters;
};

/// Applies the shape law layer by layer. Throws Error(ShapeUnderflow) naming
/// the offending layer.
std::vector<TraceRow> shape_trace(const ArchitectureSpec& spec, const Shape& input = kInputShape);

/// Output shape of the last layer before Flatten.
Shape pre_flatten_shape(const ArchitectureSpec& spec);

Index parameter_count(const ArchitectureSpec& spec);

/// Layer table, shape trace and parameter count in a fixed text layout.
std::string describe_architecture(const ArchitectureSpec& spec);

}  // namespace tsvmorph
