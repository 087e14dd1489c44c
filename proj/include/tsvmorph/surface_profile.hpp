#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include <Eigen/Core>

namespace tsvmorph {

using HeightGrid = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PixelGrid = Eigen::Matrix<std::uint8_t, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Surface height grid in nanometers, row-major with a top-left origin.
///
/// The constructor enforces the invariants (non-empty, finite samples,
/// positive pitch), so every HeightMap in flight is valid.
class HeightMap {
 public:
  HeightMap(HeightGrid samples, float pitch_um);

  std::uint32_t width() const { return static_cast<std::uint32_t>(samples_.cols()); }
  std::uint32_t height() const { return static_cast<std::uint32_t>(samples_.rows()); }
  float pitch() const { return pitch_; }
  const HeightGrid& samples() const { return samples_; }

  friend bool operator==(const HeightMap& a, const HeightMap& b) {
    return a.pitch_ == b.pitch_ && a.samples_.rows() == b.samples_.rows() &&
           a.samples_.cols() == b.samples_.cols() && a.samples_ == b.samples_;
  }

 private:
  HeightGrid samples_;
  float pitch_;
};

/// 8-bit grayscale raster. pixels(y, x).
struct GrayImage {
  PixelGrid pixels;

  GrayImage() = default;
  explicit GrayImage(PixelGrid p) : pixels(std::move(p)) {}
  GrayImage(Eigen::Index height, Eigen::Index width, std::uint8_t fill = 0)
      : pixels(PixelGrid::Constant(height, width, fill)) {}

  Eigen::Index width() const { return pixels.cols(); }
  Eigen::Index height() const { return pixels.rows(); }
  std::uint8_t operator()(Eigen::Index y, Eigen::Index x) const { return pixels(y, x); }
  std::uint8_t& operator()(Eigen::Index y, Eigen::Index x) { return pixels(y, x); }

  friend bool operator==(const GrayImage& a, const GrayImage& b) {
    return a.pixels.rows() == b.pixels.rows() && a.pixels.cols() == b.pixels.cols() &&
           a.pixels == b.pixels;
  }
};

inline constexpr std::size_t kWliHeaderBytes = 16;
inline constexpr float kDefaultPitchUm = 0.2f;

// WLI1 raw layout, little-endian: "WLI1", u32 width, u32 height, f32 pitch,
// then width*height f32 samples.
HeightMap parse_wli(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> write_wli(const HeightMap& hm);

HeightMap read_wli_file(const std::filesystem::path& path);
void write_wli_file(const std::filesystem::path& path, const HeightMap& hm);

/// Per-image min-max map to [0, 255], rounding half away from zero.
/// A flat surface renders as uniform 128.
GrayImage render_grayscale(const HeightMap& hm);

// 8-bit grayscale PNG only; other color types or depths are rejected.
GrayImage read_png(const std::filesystem::path& path);
GrayImage decode_png(std::span<const std::uint8_t> bytes);
std::vector<std::uint8_t> encode_png(const GrayImage& img);
void write_png(const std::filesystem::path& path, const GrayImage& img);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace tsvmorph
