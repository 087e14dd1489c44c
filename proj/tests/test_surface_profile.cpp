#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <limits>

#include "tsvmorph/error.hpp"
#include "tsvmorph/surface_profile.hpp"

using namespace tsvmorph;

namespace {

Errc code_of(auto&& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.code();
  }
  FAIL("expected an error");
  return Errc::Io;
}

}  // namespace

TEST_CASE("WLI round trip") {
  HeightGrid g(3, 4);
  for (int i = 0; i < 12; ++i) g.data()[i] = 0.25f * static_cast<float>(i) - 1.0f;
  HeightMap m(g, 0.2f);
  const auto bytes = write_wli(m);
  CHECK(bytes.size() == 16 + 12 * 4);
  CHECK(parse_wli(bytes) == m);
}

TEST_CASE("WLI 1x1 file is 20 bytes") {
  HeightGrid g(1, 1);
  g(0, 0) = 3.5f;
  const auto bytes = write_wli(HeightMap(g, 1.0f));
  CHECK(bytes.size() == 20);
  CHECK(parse_wli(bytes).samples()(0, 0) == 3.5f);
}

TEST_CASE("WLI rejects malformed input") {
  HeightGrid g(2, 2);
  g.setZero();
  auto good = write_wli(HeightMap(g, 0.5f));

  auto bad_magic = good;
  bad_magic[0] = 'X';
  CHECK(code_of([&] { parse_wli(bad_magic); }) == Errc::BadMagic);

  auto truncated = good;
  truncated.pop_back();
  CHECK(code_of([&] { parse_wli(truncated); }) == Errc::TruncatedPayload);
  CHECK(code_of([&] { parse_wli(std::span(good).first(10)); }) == Errc::TruncatedPayload);

  auto nan = good;
  const float q = std::numeric_limits<float>::quiet_NaN();
  std::memcpy(nan.data() + 16, &q, 4);
  CHECK(code_of([&] { parse_wli(nan); }) == Errc::NonFiniteSample);

  auto zero_pitch = good;
  std::memset(zero_pitch.data() + 12, 0, 4);
  CHECK(code_of([&] { parse_wli(zero_pitch); }) == Errc::ZeroPitch);

  CHECK(code_of([&] { HeightMap(HeightGrid(0, 3), 1.0f); }) == Errc::BadDimensions);
}

TEST_CASE("render_grayscale maps min to 0 and max to 255") {
  HeightGrid g(1, 3);
  g << -2.0f, 0.0f, 2.0f;
  auto img = render_grayscale(HeightMap(g, 1.0f));
  CHECK(img(0, 0) == 0);
  CHECK(img(0, 1) == 128);
  CHECK(img(0, 2) == 255);

  HeightGrid flat = HeightGrid::Constant(2, 2, 7.0f);
  auto f = render_grayscale(HeightMap(flat, 1.0f));
  CHECK(f(1, 1) == 128);
}

TEST_CASE("PNG round trip") {
  GrayImage img(5, 7, 0);
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 7; ++x) img(y, x) = static_cast<std::uint8_t>(y * 40 + x);
  CHECK(decode_png(encode_png(img)) == img);
  const auto path = std::filesystem::temp_directory_path() / "tsvmorph_png_roundtrip.png";
  write_png(path, img);
  CHECK(read_png(path) == img);
  std::filesystem::remove(path);
}
