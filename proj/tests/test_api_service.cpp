#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>
#include <thread>

#include "tsvmorph/api_service.hpp"
#include "tsvmorph/dataset.hpp"

// After Eigen: resolv.h (via httplib) defines a _res macro.
#include <httplib.h>

using namespace tsvmorph;
namespace fs = std::filesystem;
using nlohmann::json;

namespace {

struct Fixture {
  fs::path dir;
  GrayImage image;
  std::string png;

  Fixture() {
    dir = fs::temp_directory_path() / "tsvmorph_api_test";
    fs::remove_all(dir);
    GenParams p;
    p.seed = 8;
    std::vector<MorphologyLabel> labels;
    for (int i = 0; i < 6; ++i) labels.push_back(kAllLabels[i % 3]);
    image = render_grayscale(generate_mosaic(2, 3, labels, p, 6).heightmap);
    const auto bytes = encode_png(image);
    png.assign(bytes.begin(), bytes.end());
  }
  ~Fixture() { fs::remove_all(dir); }
};

ApiService::Response call(ApiService& api, std::string method, std::string path, std::string body = {},
                          std::map<std::string, std::string> query = {}) {
  return api.handle({std::move(method), std::move(path), std::move(query), std::move(body)});
}

std::string create(ApiService& api, const Fixture& f) {
  auto r = call(api, "POST", "/sessions", f.png, {{"source", "wafer"}});
  REQUIRE(r.status == 201);
  return json::parse(r.body)["id"];
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("session creation auto-detects the grid") {
  Fixture f;
  ApiService api(f.dir);
  auto r = call(api, "POST", "/sessions", f.png);
  REQUIRE(r.status == 201);
  const auto j = json::parse(r.body);
  CHECK(j["crop_count"] == 6);
  CHECK(j["grid"]["rows"] == 2);
  CHECK(j["grid"]["cols"] == 3);

  CHECK(call(api, "POST", "/sessions", "not a png").status == 400);
  CHECK(call(api, "POST", "/sessions", f.png, {{"rows", "0"}, {"cols", "3"}}).status == 400);
  CHECK(call(api, "GET", "/health").status == 200);
  CHECK(call(api, "GET", "/sessions/nope").status == 404);
}

TEST_CASE("labels, previews and grid edits") {
  Fixture f;
  ApiService api(f.dir);
  const auto id = create(api, f);
  const std::string base = "/sessions/" + id;

  auto r = call(api, "POST", base + "/crops/1/label", R"({"soft_label":[0.6,0.3,0.1]})");
  REQUIRE(r.status == 200);
  CHECK(json::parse(r.body)["label"] == "granular");
  CHECK(call(api, "POST", base + "/crops/2/label", R"({"label":"edge_ring"})").status == 200);
  CHECK(call(api, "POST", base + "/crops/2/label", R"({"label":"round"})").status == 400);
  CHECK(call(api, "POST", base + "/crops/2/label", R"({"soft_label":[0.6,0.6,0.1]})").status == 400);
  CHECK(call(api, "POST", base + "/crops/2/label", "{").status == 400);
  CHECK(call(api, "POST", base + "/crops/9/label", R"({"label":"granular"})").status == 404);

  auto pv = call(api, "GET", base + "/preview", {}, {{"cell", "0,1"}});
  REQUIRE(pv.status == 200);
  CHECK(pv.content_type == "image/png");
  const auto img = decode_png(std::span(reinterpret_cast<const std::uint8_t*>(pv.body.data()), pv.body.size()));
  CHECK(img.width() == 54);
  CHECK(call(api, "GET", base + "/preview", {}, {{"cell", "5,5"}}).status == 404);
  CHECK(call(api, "GET", base + "/preview").status == 400);

  const auto before = json::parse(call(api, "GET", base).body);
  const int x = before["grid"]["x_offset"];
  auto g = call(api, "PUT", base + "/grid", json{{"x_offset", x + 3}}.dump());
  REQUIRE(g.status == 200);
  const auto after = json::parse(g.body);
  CHECK(after["grid"]["x_offset"] == x + 3);
  CHECK(after["crops"][1]["label"] == "granular");
  CHECK(after["crops"][2]["label"] == "edge_ring");
  CHECK(after["labeled_count"] == 2);
  CHECK(call(api, "PUT", base + "/grid", R"({"cell_width":100000})").status == 400);
  CHECK(call(api, "PUT", base + "/grid", R"({"rows":"two"})").status == 400);
}

TEST_CASE("export requires labels unless partial") {
  Fixture f;
  ApiService api(f.dir);
  const auto id = create(api, f);
  const std::string base = "/sessions/" + id;
  CHECK(call(api, "POST", base + "/export").status == 409);
  auto partial = call(api, "POST", base + "/export", {}, {{"partial", "true"}});
  CHECK(partial.status == 200);
  for (int i = 0; i < 6; ++i)
    CHECK(call(api, "POST", base + "/crops/" + std::to_string(i) + "/label",
               json{{"label", std::string(to_string(kAllLabels[i % 3]))}}.dump())
              .status == 200);
  auto full = call(api, "POST", base + "/export");
  REQUIRE(full.status == 200);
  const fs::path out = json::parse(full.body)["dir"].get<std::string>();

  // Same grid and labels through the library path used by the CLI.
  const auto session = json::parse(call(api, "GET", base).body);
  const GridSpec grid = grid_from_json(session["grid"]);
  auto crops = crop_mosaic(f.image, grid, kDefaultTheta, "wafer");
  for (int i = 0; i < 6; ++i) assign_label(crops[i], kAllLabels[i % 3], std::nullopt);
  const fs::path cli = f.dir / "cli";
  write_manifest(cli / "manifest.jsonl", export_crops(crops, cli, Split::Train));
  CHECK(slurp(out / "manifest.jsonl") == slurp(cli / "manifest.jsonl"));
  for (const auto& c : crops) CHECK(read_png(out / (c.source_id + ".png")) == c.image);
}

TEST_CASE("journal replay restores sessions") {
  Fixture f;
  std::string id;
  {
    ApiService api(f.dir);
    id = create(api, f);
    call(api, "POST", "/sessions/" + id + "/crops/4/label", R"({"label":"edge_bulge"})");
    call(api, "PUT", "/sessions/" + id + "/grid", R"({"y_offset":1})");
  }
  ApiService again(f.dir);
  CHECK(again.session_count() == 1);
  const auto j = json::parse(call(again, "GET", "/sessions/" + id).body);
  CHECK(j["crops"][4]["label"] == "edge_bulge");
  CHECK(j["grid"]["y_offset"] == 1);
  CHECK(j["dirty"] == true);
  const auto second = create(again, f);
  CHECK(second != id);
}

TEST_CASE("concurrent label posts to one session are all kept") {
  Fixture f;
  ApiService api(f.dir);
  const auto id = create(api, f);
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i)
    threads.emplace_back([&, i] {
      for (int k = 0; k < 20; ++k)
        call(api, "POST", "/sessions/" + id + "/crops/" + std::to_string(i) + "/label",
             json{{"label", std::string(to_string(kAllLabels[(i + k) % 3]))}}.dump());
    });
  for (auto& t : threads) t.join();
  const auto j = json::parse(call(api, "GET", "/sessions/" + id).body);
  CHECK(j["labeled_count"] == 6);
  for (int i = 0; i < 6; ++i) CHECK(j["crops"][i]["label"] == std::string(to_string(kAllLabels[(i + 19) % 3])));
}

TEST_CASE("endpoints over HTTP") {
  Fixture f;
  ApiService api(f.dir);
  httplib::Server server;
  api.bind(server);
  const int port = server.bind_to_any_port("127.0.0.1");
  std::thread th([&] { server.listen_after_bind(); });
  server.wait_until_ready();

  httplib::Client client("127.0.0.1", port);
  auto health = client.Get("/health");
  REQUIRE(health);
  CHECK(health->status == 200);
  auto created = client.Post("/sessions?rows=2&cols=3", f.png, "image/png");
  REQUIRE(created);
  CHECK(created->status == 201);
  const std::string id = json::parse(created->body)["id"];
  auto label = client.Post("/sessions/" + id + "/crops/0/label", R"({"label":"granular"})", "application/json");
  REQUIRE(label);
  CHECK(label->status == 200);
  auto conflict = client.Post("/sessions/" + id + "/export", "", "application/json");
  REQUIRE(conflict);
  CHECK(conflict->status == 409);
  auto grid = client.Put("/sessions/" + id + "/grid", R"({"x_skew":0})", "application/json");
  REQUIRE(grid);
  CHECK(grid->status == 200);

  server.stop();
  th.join();
}
