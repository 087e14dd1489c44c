#pragma once

#include <span>
#include <string>
#include <vector>

#include "tsvmorph/cropper.hpp"

namespace tsvmorph {

/// Label-preserving geometric transform. Rotations are clockwise in degrees.
struct Transform {
  enum class Kind { Identity, Rotate, FlipHorizontal, FlipVertical };

  Kind kind = Kind::Identity;
  int degrees = 0;

  static Transform identity() { return {}; }
  static Transform rotate(int degrees);  // 45, 90, ..., 315
  static Transform flip_horizontal() { return {Kind::FlipHorizontal, 0}; }
  static Transform flip_vertical() { return {Kind::FlipVertical, 0}; }

  /// True for the pixel-permutation subgroup (identity, right angles, flips).
  bool lossless() const;

  friend bool operator==(const Transform&, const Transform&) = default;
};

/// "identity", "rot90", "flip_h", "flip_v", ...
std::string to_string(const Transform& t);
Transform parse_transform(const std::string& s);

inline constexpr int kNumAugmentationTypes = 6;

/// Transforms of augmentation type 0-5, identity first. Flips apply to the
/// originals only, never to rotated copies.
std::vector<Transform> augmentation_transforms(int type);
int augmentation_multiplier(int type);

/// Applies t to a 54x54 image. Non-right-angle rotations resample
/// bilinearly about the image center and fill from the border median.
GrayImage apply(const Transform& t, const GrayImage& img);

/// Every record expanded by the type's transforms in source order, then
/// transform order. Throws Error(UnlabeledRecord) before doing any work if
/// a record has no label.
std::vector<CropRecord> augment_manifest(std::span<const CropRecord> records, int type);

}  // namespace tsvmorph
