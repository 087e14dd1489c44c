#include <doctest.h>

#include <vector>

#include "tsvmorph/error.hpp"
#include "tsvmorph/synthetic_generator.hpp"

using namespace tsvmorph;

namespace {

GenParams with_seed(std::uint64_t seed) {
  GenParams p;
  p.seed = seed;
  return p;
}

}  // namespace

TEST_CASE("edge ring rim dominates the interior") {
  const GenParams p = with_seed(1);
  const auto s = via_stats(generate_via(MorphologyLabel::EdgeRing, p), p);
  CHECK(s.rim_mean >= 3.0 * s.interior_mean);
}

TEST_CASE("granular undulation is comparable at the rim and inside") {
  const GenParams p = with_seed(1);
  const auto s = via_stats(generate_via(MorphologyLabel::Granular, p), p);
  const double ratio = s.rim_rms / s.interior_rms;
  CHECK(ratio >= 0.5);
  CHECK(ratio <= 2.0);
}

TEST_CASE("generation is deterministic and bounded") {
  for (auto label : kAllLabels) {
    const GenParams p = with_seed(42);
    const auto a = generate_via(label, p);
    CHECK(a == generate_via(label, p));
    CHECK(a.samples().allFinite());
    CHECK(a.samples().minCoeff() >= p.background_level);
    CHECK(a.samples().maxCoeff() <= p.background_level + 4 * p.amplitude);
  }
  CHECK_FALSE(generate_via(MorphologyLabel::Granular, with_seed(1)) ==
              generate_via(MorphologyLabel::Granular, with_seed(2)));
}

TEST_CASE("classes are separable by rim statistics for at least 95% of seeds") {
  for (auto label : kAllLabels) {
    int hits = 0;
    for (std::uint64_t seed = 1; seed <= 100; ++seed) {
      const GenParams p = with_seed(seed);
      hits += classify_by_stats(via_stats(generate_via(label, p), p), p) == label;
    }
    CAPTURE(to_string(label));
    CHECK(hits >= 95);
  }
}

TEST_CASE("parameter validation") {
  GenParams p;
  p.via_radius = 27;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.amplitude = 0;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.bump_count_max = 13;
  CHECK_THROWS_AS(p.validate(), Error);
  p = {};
  p.bump_count_min = 0;
  CHECK_THROWS_AS(p.validate(), Error);
}

TEST_CASE("mosaic layout") {
  const GenParams p = with_seed(3);
  SUBCASE("single via") {
    const std::vector<MorphologyLabel> labels{MorphologyLabel::Granular};
    const auto m = generate_mosaic(1, 1, labels, p, 4);
    REQUIRE(m.boxes.size() == 1);
    CHECK(m.boxes[0].box.width() == 28);
    CHECK(m.boxes[0].box.x0 >= 0);
    CHECK(m.boxes[0].box.x1 <= m.heightmap.width());
  }
  SUBCASE("2x3 boxes are disjoint and in bounds") {
    std::vector<MorphologyLabel> labels(6, MorphologyLabel::EdgeBulge);
    const auto m = generate_mosaic(2, 3, labels, p, 6);
    REQUIRE(m.boxes.size() == 6);
    for (std::size_t i = 0; i < 6; ++i) {
      const auto& b = m.boxes[i].box;
      CHECK(b.x0 >= 0);
      CHECK(b.y0 >= 0);
      CHECK(b.x1 <= m.heightmap.width());
      CHECK(b.y1 <= m.heightmap.height());
      for (std::size_t j = i + 1; j < 6; ++j) CHECK(iou(b, m.boxes[j].box) == 0.0);
    }
    CHECK(m.boxes[4].row == 1);
    CHECK(m.boxes[4].col == 1);
  }
  SUBCASE("label count must match the grid") {
    std::vector<MorphologyLabel> labels(5, MorphologyLabel::Granular);
    try {
      generate_mosaic(2, 3, labels, p, 6);
      FAIL("expected an error");
    } catch (const Error& e) {
      CHECK(e.code() == Errc::LabelCountMismatch);
    }
  }
}

TEST_CASE("iou") {
  CHECK(iou({0, 0, 10, 10}, {0, 0, 10, 10}) == 1.0);
  CHECK(iou({0, 0, 10, 10}, {5, 0, 15, 10}) == doctest::Approx(50.0 / 150.0));
  CHECK(iou({0, 0, 2, 2}, {3, 3, 5, 5}) == 0.0);
}
