#include "tsvmorph/surface_profile.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include <png.h>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

namespace {

constexpr std::uint8_t kMagic[4] = {'W', 'L', 'I', '1'};

std::uint32_t load_u32(const std::uint8_t* p) {
  return std::uint32_t{p[0]} | (std::uint32_t{p[1]} << 8) | (std::uint32_t{p[2]} << 16) |
         (std::uint32_t{p[3]} << 24);
}

float load_f32(const std::uint8_t* p) { return std::bit_cast<float>(load_u32(p)); }

void store_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void store_f32(std::vector<std::uint8_t>& out, float v) {
  store_u32(out, std::bit_cast<std::uint32_t>(v));
}

}  // namespace

HeightMap::HeightMap(HeightGrid samples, float pitch_um)
    : samples_(std::move(samples)), pitch_(pitch_um) {
  if (samples_.size() == 0) throw Error(Errc::BadDimensions, "height map has no samples");
  if (!(pitch_ > 0.0f) || !std::isfinite(pitch_))
    throw Error(Errc::ZeroPitch, "pitch must be positive and finite");
  if (!samples_.allFinite()) throw Error(Errc::NonFiniteSample, "height map holds NaN/Inf");
}

HeightMap parse_wli(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || std::memcmp(bytes.data(), kMagic, 4) != 0)
    throw Error(Errc::BadMagic, "expected \"WLI1\"");
  if (bytes.size() < kWliHeaderBytes) throw Error(Errc::TruncatedPayload, "header is incomplete");

  const std::uint32_t width = load_u32(bytes.data() + 4);
  const std::uint32_t height = load_u32(bytes.data() + 8);
  const float pitch = load_f32(bytes.data() + 12);
  if (width == 0 || height == 0) throw Error(Errc::BadDimensions, "zero width or height");

  const std::uint64_t count = std::uint64_t{width} * height;
  const std::uint64_t expected = kWliHeaderBytes + 4 * count;
  if (bytes.size() != expected)
    throw Error(Errc::TruncatedPayload, "payload is " + std::to_string(bytes.size()) +
                                            " bytes, header implies " + std::to_string(expected));
  if (!(pitch > 0.0f) || !std::isfinite(pitch)) throw Error(Errc::ZeroPitch, "pitch must be > 0");

  HeightGrid grid(height, width);
  const std::uint8_t* p = bytes.data() + kWliHeaderBytes;
  for (std::uint64_t i = 0; i < count; ++i, p += 4) {
    const float v = load_f32(p);
    if (!std::isfinite(v))
      throw Error(Errc::NonFiniteSample, "sample " + std::to_string(i) + " is not finite");
    grid.data()[i] = v;
  }
  return HeightMap(std::move(grid), pitch);
}

std::vector<std::uint8_t> write_wli(const HeightMap& hm) {
  std::vector<std::uint8_t> out;
  out.reserve(kWliHeaderBytes + 4 * static_cast<std::size_t>(hm.samples().size()));
  out.insert(out.end(), std::begin(kMagic), std::end(kMagic));
  store_u32(out, hm.width());
  store_u32(out, hm.height());
  store_f32(out, hm.pitch());
  const HeightGrid& s = hm.samples();
  for (Eigen::Index i = 0; i < s.size(); ++i) store_f32(out, s.data()[i]);
  return out;
}

HeightMap read_wli_file(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return parse_wli(bytes);
}

void write_wli_file(const std::filesystem::path& path, const HeightMap& hm) {
  write_file_bytes(path, write_wli(hm));
}

GrayImage render_grayscale(const HeightMap& hm) {
  const HeightGrid& s = hm.samples();
  const double lo = s.minCoeff();
  const double hi = s.maxCoeff();
  if (hi == lo) return GrayImage(s.rows(), s.cols(), 128);

  const double scale = 255.0 / (hi - lo);
  PixelGrid px(s.rows(), s.cols());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    // std::round is half-away-from-zero; the argument is never negative here.
    const double v = std::round((static_cast<double>(s.data()[i]) - lo) * scale);
    px.data()[i] = static_cast<std::uint8_t>(std::clamp(v, 0.0, 255.0));
  }
  return GrayImage(std::move(px));
}

GrayImage decode_png(std::span<const std::uint8_t> bytes) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&image, bytes.data(), bytes.size()))
    throw Error(Errc::UnsupportedImage, std::string("cannot decode PNG: ") + image.message);
  if (image.format != PNG_FORMAT_GRAY) {
    png_image_free(&image);
    throw Error(Errc::UnsupportedImage, "only 8-bit grayscale PNG is accepted");
  }
  PixelGrid px(image.height, image.width);
  if (!png_image_finish_read(&image, nullptr, px.data(), static_cast<png_int_32>(image.width),
                             nullptr))
    throw Error(Errc::UnsupportedImage, std::string("cannot decode PNG: ") + image.message);
  return GrayImage(std::move(px));
}

GrayImage read_png(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  try {
    return decode_png(bytes);
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_png(const GrayImage& img) {
  png_image image;
  std::memset(&image, 0, sizeof image);
  image.version = PNG_IMAGE_VERSION;
  image.width = static_cast<png_uint_32>(img.width());
  image.height = static_cast<png_uint_32>(img.height());
  image.format = PNG_FORMAT_GRAY;

  png_alloc_size_t size = 0;
  const auto stride = static_cast<png_int_32>(img.width());
  if (!png_image_write_to_memory(&image, nullptr, &size, 0, img.pixels.data(), stride, nullptr))
    throw Error(Errc::Io, std::string("cannot encode PNG: ") + image.message);
  std::vector<std::uint8_t> out(size);
  if (!png_image_write_to_memory(&image, out.data(), &size, 0, img.pixels.data(), stride, nullptr))
    throw Error(Errc::Io, std::string("cannot encode PNG: ") + image.message);
  out.resize(size);
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& img) {
  write_file_bytes(path, encode_png(img));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_file_bytes(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(Errc::Io, "short write to " + path.string());
}

}  // namespace tsvmorph
