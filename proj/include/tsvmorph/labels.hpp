#pragma once

#include <array>
#include <optional>
#include <string>
#include <string_view>

namespace tsvmorph {

/// Extrusion morphology classes. The integer value is the network's output index.
enum class MorphologyLabel : int { Granular = 0, EdgeRing = 1, EdgeBulge = 2 };

inline constexpr int kNumClasses = 3;
inline constexpr std::array<MorphologyLabel, kNumClasses> kAllLabels = {
    MorphologyLabel::Granular, MorphologyLabel::EdgeRing, MorphologyLabel::EdgeBulge};

/// Confidence per class, ordered as MorphologyLabel.
using SoftLabel = std::array<double, kNumClasses>;

inline constexpr int index_of(MorphologyLabel l) { return static_cast<int>(l); }

inline std::string_view to_string(MorphologyLabel l) {
  switch (l) {
    case MorphologyLabel::Granular: return "granular";
    case MorphologyLabel::EdgeRing: return "edge_ring";
    case MorphologyLabel::EdgeBulge: return "edge_bulge";
  }
  return "granular";
}

inline std::optional<MorphologyLabel> parse_label(std::string_view s) {
  for (auto l : kAllLabels)
    if (to_string(l) == s) return l;
  return std::nullopt;
}

/// True when every component is >= 0 and the sum is 1 within 1e-6.
bool is_valid_soft_label(const SoftLabel& s);

/// First index of the largest component.
MorphologyLabel argmax(const SoftLabel& s);

}  // namespace tsvmorph
