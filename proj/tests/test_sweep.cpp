#include <doctest.h>

#include <atomic>
#include <set>

#include "tsvmorph/error.hpp"
#include "tsvmorph/sweep.hpp"

using namespace tsvmorph;

namespace {

// Deterministic fake accuracy per cell.
History stub(const TrainConfig& c) {
  History h;
  h.max_total_accuracy = 0.5 + 0.01 * c.aug_type + 0.1 * c.dropout + 0.001 * static_cast<int>(c.arch);
  h.best_epoch = 1;
  return h;
}

const std::vector<double> kDropouts{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
const std::vector<int> kAugs{0, 1, 2, 3, 4, 5};

}  // namespace

TEST_CASE("full grid has 114 cells") {
  std::atomic<int> calls{0};
  const auto report = sweep(kAllArchs, kAugs, kDropouts, TrainConfig{}, [&](const TrainConfig& c) {
    ++calls;
    return stub(c);
  }, 4);
  CHECK(calls == 114);
  CHECK(report.rows.size() == 114);
  int lenet = 0;
  for (const auto& r : report.rows)
    if (r.arch == ArchId::LeNet5) {
      ++lenet;
      CHECK_FALSE(r.dropout.has_value());
    }
  CHECK(lenet == 6);
}

TEST_CASE("single LeNet5 cell reports NA dropout") {
  const std::vector<ArchId> archs{ArchId::LeNet5};
  const std::vector<int> augs{0};
  const auto report = sweep(archs, augs, kDropouts, TrainConfig{}, stub);
  REQUIRE(report.rows.size() == 1);
  CHECK(to_csv(report.rows).find("LeNet5,0,NA,") != std::string::npos);
  CHECK(to_json(report.rows)[0]["dropout"].is_null());
}

TEST_CASE("best per arch is the max over that arch's rows") {
  const auto report = sweep(kAllArchs, kAugs, kDropouts, TrainConfig{}, stub, 3);
  REQUIRE(report.best.size() == 4);
  for (const auto& b : report.best) {
    double mx = 0;
    for (const auto& r : report.rows)
      if (r.arch == b.arch) mx = std::max(mx, r.max_accuracy);
    CHECK(b.max_accuracy == mx);
  }
  CHECK(report.best[3].aug_type == 5);
  CHECK(report.best[3].dropout == 0.5);
}

TEST_CASE("rows are in cell order whatever the worker count") {
  const auto one = sweep(kAllArchs, kAugs, kDropouts, TrainConfig{}, stub, 1);
  const auto many = sweep(kAllArchs, kAugs, kDropouts, TrainConfig{}, stub, 8);
  CHECK(one.rows == many.rows);
}

TEST_CASE("JSON and CSV round trip") {
  const auto report = sweep(kAllArchs, kAugs, kDropouts, TrainConfig{}, stub, 2);
  CHECK(rows_from_json(to_json(report.rows)) == report.rows);
  CHECK(rows_from_csv(to_csv(report.rows)) == report.rows);
  CHECK(to_json(rows_from_csv(to_csv(report.rows))) == to_json(report.rows));
  CHECK(render_summary(report).find("best per architecture") != std::string::npos);
}

TEST_CASE("empty axes and failing cells") {
  const std::vector<int> none;
  CHECK_THROWS_AS(sweep(kAllArchs, none, kDropouts, TrainConfig{}, stub), Error);
  CHECK_THROWS_AS(sweep(kAllArchs, kAugs, kDropouts, TrainConfig{},
                        [](const TrainConfig& c) -> History {
                          if (c.aug_type == 3) throw Error(Errc::EmptyClass, "boom");
                          return stub(c);
                        },
                        4),
                  Error);
}

TEST_CASE("extending an axis never lowers the per-arch best") {
  const std::vector<int> few{0, 1};
  const auto small = sweep(kAllArchs, few, kDropouts, TrainConfig{}, stub);
  const auto big = sweep(kAllArchs, kAugs, kDropouts, TrainConfig{}, stub);
  for (std::size_t i = 0; i < 4; ++i) CHECK(big.best[i].max_accuracy >= small.best[i].max_accuracy);
}
