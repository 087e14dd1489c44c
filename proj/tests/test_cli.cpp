#include <doctest.h>

#include <array>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <sys/wait.h>

#include "tsvmorph/architectures.hpp"
#include "tsvmorph/manifest.hpp"
#include "tsvmorph/sweep.hpp"

using namespace tsvmorph;
namespace fs = std::filesystem;

namespace {

struct Run {
  int code;
  std::string out;
};

Run run(const std::string& args) {
  const std::string cmd = std::string(TSVMORPH_CLI) + " " + args + " 2>/dev/null";
  Run r{0, {}};
  FILE* pipe = popen(cmd.c_str(), "r");
  REQUIRE(pipe);
  std::array<char, 4096> buf;
  std::size_t n;
  while ((n = fread(buf.data(), 1, buf.size(), pipe)) > 0) r.out.append(buf.data(), n);
  const int status = pclose(pipe);
  r.code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

struct TempDir {
  fs::path path;
  explicit TempDir(const std::string& name) : path(fs::temp_directory_path() / name) { fs::remove_all(path); }
  ~TempDir() { fs::remove_all(path); }
};

}  // namespace

TEST_CASE("usage errors exit 1") {
  CHECK(run("").code == 1);
  CHECK(run("describe --bogus").code == 1);
  CHECK(run("describe --arch ResNet").code == 1);
  CHECK(run("train missing.jsonl --out x").code == 1);
}

TEST_CASE("describe is byte-stable and matches the library") {
  const auto a = run("describe --arch VGGInspiredAlexNet");
  CHECK(a.code == 0);
  CHECK(a.out == describe_architecture(build(ArchId::VGGInspiredAlexNet)));
  CHECK(run("describe --arch all").out == run("describe --arch all").out);
}

TEST_CASE("generate, crop, augment, train and eval") {
  TempDir t("tsvmorph_cli_test");
  const auto d = t.path.string();
  REQUIRE(run("generate --rows 4 --cols 5 --seed 7 --out " + d + "/gen").code == 0);
  CHECK(fs::exists(t.path / "gen/mosaic.wli"));
  CHECK(fs::exists(t.path / "gen/mosaic.png"));
  CHECK(fs::exists(t.path / "gen/truth.jsonl"));

  SUBCASE("same seed, same bytes") {
    REQUIRE(run("generate --rows 4 --cols 5 --seed 7 --out " + d + "/gen2").code == 0);
    CHECK(slurp(t.path / "gen/mosaic.wli") == slurp(t.path / "gen2/mosaic.wli"));
  }
  SUBCASE("seed falls back to the environment") {
    REQUIRE(run("generate --rows 1 --cols 2 --out " + d + "/e1").code == 0);
    const std::string env = "TSVMORPH_SEED=7 ";
    REQUIRE(std::system((env + TSVMORPH_CLI + " generate --rows 4 --cols 5 --out " + d + "/e2 2>/dev/null").c_str()) == 0);
    CHECK(slurp(t.path / "gen/mosaic.wli") == slurp(t.path / "e2/mosaic.wli"));
  }
  SUBCASE("crop with ground truth labels") {
    REQUIRE(run("crop " + d + "/gen/mosaic.wli --grid-rows 4 --grid-cols 5 --truth " + d + "/gen/truth.jsonl --out " +
                d + "/crops")
                .code == 0);
    const auto recs = read_manifest(t.path / "crops/manifest.jsonl");
    REQUIRE(recs.size() == 20);
    CHECK(recs[7].path == "mosaic_1_2.png");
    CHECK(recs[7].label.has_value());
    CHECK(run("crop " + d + "/gen/mosaic.png --out " + d + "/auto").code == 0);
    CHECK(read_manifest(t.path / "auto/manifest.jsonl").size() == 20);
    CHECK(run("crop " + d + "/gen/mosaic.png --grid-rows 4 --grid-cols 5 --cell 5000x5 --out " + d + "/bad").code == 2);
  }
  SUBCASE("dataset, augmentation and a short training run") {
    REQUIRE(run("generate --rows 1 --cols 1 --train 12 --test 6 --seed 3 --out " + d + "/ds").code == 0);
    const fs::path man = t.path / "ds/dataset/manifest.jsonl";
    REQUIRE(read_manifest(man).size() == 18);
    REQUIRE(run("augment " + man.string() + " --type 2 --out " + d + "/aug").code == 0);
    const auto aug = read_manifest(t.path / "aug/manifest.jsonl");
    CHECK(aug.size() == 12 * 4 + 6);

    const auto tr = run("train " + man.string() + " --arch LeNet5 --epochs 2 --out " + d + "/model");
    REQUIRE(tr.code == 0);
    CHECK(tr.out.find("best epoch") != std::string::npos);
    CHECK(fs::exists(t.path / "model/history.json"));
    const auto ev = run("eval " + d + "/model/model.ckpt " + man.string());
    CHECK(ev.code == 0);
    CHECK(ev.out.find("accuracy:") != std::string::npos);
    CHECK(run("train " + man.string() + " --arch LeNet5 --epochs 1 --dropout 1.5 --out " + d + "/x").code == 1);

    const auto sw = run("sweep " + man.string() + " --archs LeNet5,AlexNetInspiredLeNet --aug 0-1 --dropout 0.0-0.1 "
                        "--epochs 1 --workers 2 --out " + d + "/sweep");
    REQUIRE(sw.code == 0);
    const auto rows = rows_from_csv(slurp(t.path / "sweep/sweep.csv"));
    CHECK(rows.size() == 2 + 4);
  }
  SUBCASE("data errors exit 2") {
    std::ofstream(t.path / "broken.jsonl") << "{not json\n";
    CHECK(run("eval " + d + "/gen/mosaic.png " + (t.path / "broken.jsonl").string()).code == 2);
  }
}
