#include <doctest.h>

#include <algorithm>
#include <map>

#include "tsvmorph/augmentation.hpp"
#include "tsvmorph/error.hpp"

using namespace tsvmorph;

namespace {

GrayImage pattern() {
  GrayImage img(54, 54, 0);
  for (int y = 0; y < 54; ++y)
    for (int x = 0; x < 54; ++x) img(y, x) = static_cast<std::uint8_t>((7 * x + 3 * y) % 256);
  return img;
}

CropRecord labeled(int i) {
  CropRecord r;
  r.image = pattern();
  r.label = kAllLabels[static_cast<std::size_t>(i) % 3];
  r.source_id = "m_0_" + std::to_string(i);
  return r;
}

}  // namespace

TEST_CASE("multipliers per augmentation type") {
  const int expected[] = {1, 3, 4, 6, 8, 10};
  for (int t = 0; t < 6; ++t) {
    CHECK(augmentation_multiplier(t) == expected[t]);
    CHECK(static_cast<int>(augmentation_transforms(t).size()) == expected[t]);
    CHECK(augmentation_transforms(t).front().kind == Transform::Kind::Identity);
  }
  CHECK_THROWS_AS(augmentation_transforms(6), Error);
}

TEST_CASE("right-angle rotations are exact permutations") {
  const auto img = pattern();
  const auto r90 = apply(Transform::rotate(90), img);
  // clockwise: the left column becomes the top row
  for (int i = 0; i < 54; ++i) CHECK(r90(0, i) == img(53 - i, 0));
  const auto back = apply(Transform::rotate(270), r90);
  CHECK(back == img);
  CHECK(apply(Transform::rotate(180), apply(Transform::rotate(180), img)) == img);
  auto sorted = [](GrayImage g) {
    std::vector<std::uint8_t> v(g.pixels.data(), g.pixels.data() + g.pixels.size());
    std::sort(v.begin(), v.end());
    return v;
  };
  CHECK(sorted(r90) == sorted(img));
}

TEST_CASE("flips are involutions") {
  const auto img = pattern();
  const Transform h{Transform::Kind::FlipHorizontal, 0};
  const Transform v{Transform::Kind::FlipVertical, 0};
  CHECK(apply(h, apply(h, img)) == img);
  CHECK(apply(v, apply(v, img)) == img);
  CHECK(apply(h, img)(0, 0) == img(0, 53));
  CHECK(apply(v, img)(0, 0) == img(53, 0));
}

TEST_CASE("45 degree rotation keeps the center and size") {
  GrayImage img(54, 54, 10);
  for (int y = 20; y < 34; ++y)
    for (int x = 20; x < 34; ++x) img(y, x) = 200;
  const auto r = apply(Transform::rotate(45), img);
  CHECK(r.width() == 54);
  CHECK(r(27, 27) == 200);
  CHECK(r(0, 0) == 10);
}

TEST_CASE("wrong-size images and bad angles are rejected") {
  try {
    apply(Transform::rotate(90), GrayImage(10, 10, 0));
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::WrongSize);
  }
  CHECK_THROWS_AS(Transform::rotate(30), Error);
  CHECK_THROWS_AS(Transform::rotate(360), Error);
}

TEST_CASE("transform names round-trip") {
  for (int t = 0; t < 6; ++t)
    for (const auto& tr : augmentation_transforms(t)) CHECK(parse_transform(to_string(tr)) == tr);
  CHECK(to_string(Transform::rotate(90)) == "rot90");
}

TEST_CASE("augment_manifest preserves labels and provenance") {
  std::vector<CropRecord> recs;
  for (int i = 0; i < 7; ++i) recs.push_back(labeled(i));
  const auto out = augment_manifest(recs, 4);
  REQUIRE(out.size() == 7 * 8);
  std::map<MorphologyLabel, int> before, after;
  for (const auto& r : recs) ++before[*r.label];
  for (const auto& r : out) ++after[*r.label];
  for (auto l : kAllLabels) CHECK(after[l] == 8 * before[l]);
  CHECK(out[0].transform == "identity");
  CHECK(out[1].source_id == recs[0].source_id);
  CHECK(out[8].source_id == recs[1].source_id);

  recs[3].label.reset();
  try {
    augment_manifest(recs, 1);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.code() == Errc::UnlabeledRecord);
  }
}
