#include "tsvmorph/augmentation.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

namespace {

std::uint8_t border_median(const GrayImage& img) {
  std::vector<std::uint8_t> border;
  const Eigen::Index w = img.width(), h = img.height();
  for (Eigen::Index x = 0; x < w; ++x) {
    border.push_back(img(0, x));
    if (h > 1) border.push_back(img(h - 1, x));
  }
  for (Eigen::Index y = 1; y + 1 < h; ++y) {
    border.push_back(img(y, 0));
    if (w > 1) border.push_back(img(y, w - 1));
  }
  auto mid = border.begin() + static_cast<std::ptrdiff_t>(border.size() / 2);
  std::nth_element(border.begin(), mid, border.end());
  return *mid;
}

// Clockwise quarter turn of a square image.
GrayImage rotate_quarter(const GrayImage& img) {
  const Eigen::Index n = img.height();
  GrayImage out(n, n);
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x) out(y, x) = img(n - 1 - x, y);
  return out;
}

GrayImage rotate_bilinear(const GrayImage& img, int degrees) {
  const Eigen::Index n = img.height();
  const std::uint8_t fill = border_median(img);
  const double theta = degrees * std::numbers::pi / 180.0;
  const double c = std::cos(theta), s = std::sin(theta);
  const double mid = (n - 1) / 2.0;
  GrayImage out(n, n, fill);
  for (Eigen::Index y = 0; y < n; ++y)
    for (Eigen::Index x = 0; x < n; ++x) {
      // Inverse map: a clockwise turn in image coordinates (y down) is a
      // positive angle, so the source is at the negative angle.
      const double dx = x - mid, dy = y - mid;
      const double sx = c * dx + s * dy + mid;
      const double sy = -s * dx + c * dy + mid;
      if (sx < 0 || sy < 0 || sx > n - 1 || sy > n - 1) continue;
      const auto x0 = static_cast<Eigen::Index>(std::floor(sx));
      const auto y0 = static_cast<Eigen::Index>(std::floor(sy));
      const Eigen::Index x1 = std::min(x0 + 1, n - 1), y1 = std::min(y0 + 1, n - 1);
      const double fx = sx - x0, fy = sy - y0;
      const double v = (1 - fy) * ((1 - fx) * img(y0, x0) + fx * img(y0, x1)) +
                       fy * ((1 - fx) * img(y1, x0) + fx * img(y1, x1));
      out(y, x) = static_cast<std::uint8_t>(std::clamp(std::round(v), 0.0, 255.0));
    }
  return out;
}

}  // namespace

Transform Transform::rotate(int degrees) {
  if (degrees <= 0 || degrees >= 360 || degrees % 45 != 0)
    throw Error(Errc::InvalidParams, "rotation must be a multiple of 45 in [45, 315]");
  return {Kind::Rotate, degrees};
}

bool Transform::lossless() const { return kind != Kind::Rotate || degrees % 90 == 0; }

std::string to_string(const Transform& t) {
  switch (t.kind) {
    case Transform::Kind::Identity: return "identity";
    case Transform::Kind::Rotate: return "rot" + std::to_string(t.degrees);
    case Transform::Kind::FlipHorizontal: return "flip_h";
    case Transform::Kind::FlipVertical: return "flip_v";
  }
  return "identity";
}

Transform parse_transform(const std::string& s) {
  if (s == "identity") return Transform::identity();
  if (s == "flip_h") return Transform::flip_horizontal();
  if (s == "flip_v") return Transform::flip_vertical();
  if (s.rfind("rot", 0) == 0) {
    try {
      std::size_t used = 0;
      const int deg = std::stoi(s.substr(3), &used);
      if (used == s.size() - 3) return Transform::rotate(deg);
    } catch (const std::logic_error&) {
    }
  }
  throw Error(Errc::InvalidParams, "unknown transform '" + s + "'");
}

std::vector<Transform> augmentation_transforms(int type) {
  if (type < 0 || type >= kNumAugmentationTypes)
    throw Error(Errc::InvalidParams, "augmentation type must be 0-5");
  std::vector<Transform> out{Transform::identity()};
  if (type == 2 || type == 3)
    for (int d : {90, 180, 270}) out.push_back(Transform::rotate(d));
  if (type == 4 || type == 5)
    for (int d = 45; d < 360; d += 45) out.push_back(Transform::rotate(d));
  if (type == 1 || type == 3 || type == 5) {
    out.push_back(Transform::flip_horizontal());
    out.push_back(Transform::flip_vertical());
  }
  return out;
}

int augmentation_multiplier(int type) {
  return static_cast<int>(augmentation_transforms(type).size());
}

GrayImage apply(const Transform& t, const GrayImage& img) {
  if (img.width() != kCropSize || img.height() != kCropSize)
    throw Error(Errc::WrongSize, "expected 54x54, got " + std::to_string(img.width()) + "x" +
                                     std::to_string(img.height()));
  switch (t.kind) {
    case Transform::Kind::Identity: return img;
    case Transform::Kind::FlipHorizontal: return GrayImage(img.pixels.rowwise().reverse().eval());
    case Transform::Kind::FlipVertical: return GrayImage(img.pixels.colwise().reverse().eval());
    case Transform::Kind::Rotate: {
      if (t.degrees % 90 != 0) return rotate_bilinear(img, t.degrees);
      GrayImage out = img;
      for (int q = 0; q < t.degrees / 90; ++q) out = rotate_quarter(out);
      return out;
    }
  }
  return img;
}

std::vector<CropRecord> augment_manifest(std::span<const CropRecord> records, int type) {
  const auto transforms = augmentation_transforms(type);
  for (const CropRecord& r : records)
    if (!r.labeled()) throw Error(Errc::UnlabeledRecord, "record '" + r.source_id + "' has no label");

  std::vector<CropRecord> out;
  out.reserve(records.size() * transforms.size());
  for (const CropRecord& r : records)
    for (const Transform& t : transforms) {
      CropRecord a = r;
      a.image = apply(t, r.image);
      if (t.kind != Transform::Kind::Identity)
        a.transform = r.transform == "identity" ? to_string(t) : r.transform + "+" + to_string(t);
      out.push_back(std::move(a));
    }
  return out;
}

}  // namespace tsvmorph
