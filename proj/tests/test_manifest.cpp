#include <doctest.h>

#include <filesystem>
#include <fstream>

#include "tsvmorph/error.hpp"
#include "tsvmorph/manifest.hpp"

using namespace tsvmorph;
namespace fs = std::filesystem;

TEST_CASE("manifest lines round-trip in field order") {
  ManifestRecord r{"a/b.png", MorphologyLabel::EdgeRing, SoftLabel{0.2, 0.7, 0.1}, Split::Test, "m_1_2", "rot90"};
  const auto line = to_json_line(r);
  CHECK(line.rfind(R"({"path":"a/b.png","label":"edge_ring","soft_label":)", 0) == 0);
  CHECK(parse_manifest_line(line) == r);

  ManifestRecord u{"c.png", std::nullopt, std::nullopt, Split::Train, "m_0_0", "identity"};
  CHECK(to_json_line(u) == R"({"path":"c.png","split":"train","source_id":"m_0_0","transform":"identity"})");
  CHECK(parse_manifest_line(to_json_line(u)) == u);
}

TEST_CASE("malformed manifest lines") {
  auto code = [](std::string_view line) {
    try {
      parse_manifest_line(line);
    } catch (const Error& e) {
      return e.code();
    }
    return Errc::Io;
  };
  CHECK(code("{") == Errc::BadManifest);
  CHECK(code(R"({"path":"x","split":"valid","source_id":"s"})") == Errc::BadManifest);
  CHECK(code(R"({"split":"train","source_id":"s"})") == Errc::BadManifest);
  CHECK(code(R"({"path":"x","split":"train","source_id":"s","label":"round"})") == Errc::InvalidLabel);
  CHECK(code(R"({"path":"x","split":"train","source_id":"s","soft_label":[0.5,0.5,0.5]})") == Errc::InvalidLabel);
}

TEST_CASE("export and reload crops") {
  const fs::path dir = fs::temp_directory_path() / "tsvmorph_manifest_test";
  fs::remove_all(dir);
  std::vector<CropRecord> crops(2);
  crops[0].image = GrayImage(54, 54, 10);
  crops[0].source_id = "m_0_0";
  assign_label(crops[0], MorphologyLabel::Granular, std::nullopt);
  crops[1].image = GrayImage(54, 54, 200);
  crops[1].source_id = "m_0_1";

  const auto recs = export_crops(crops, dir, Split::Train);
  CHECK(recs[0].path == "m_0_0.png");
  write_manifest(dir / "manifest.jsonl", recs);
  const auto back = read_manifest(dir / "manifest.jsonl");
  CHECK(back == recs);
  const auto loaded = load_records(back, dir);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].image == crops[0].image);
  CHECK(loaded[0].label == MorphologyLabel::Granular);
  CHECK_FALSE(loaded[1].labeled());
  CHECK(load_records(back, dir, Split::Test).empty());
  CHECK(crop_file_name("m", 1, 2) == "m_1_2.png");
  fs::remove_all(dir);
}
