#include "tsvmorph/api_service.hpp"

#include <charconv>
#include <fstream>
#include <httplib.h>
#include <sstream>

#include "tsvmorph/error.hpp"
#include "tsvmorph/logging.hpp"

namespace tsvmorph {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

using Response = ApiService::Response;

Response json_response(int status, const json& body) { return {status, "application/json", body.dump()}; }

Response error_response(int status, const std::string& message, std::string_view code = {}) {
  json j{{"error", message}};
  if (!code.empty()) j["code"] = std::string(code);
  return json_response(status, j);
}

int status_for(Errc c) {
  switch (c) {
    case Errc::Io: return 500;
    default: return 400;
  }
}

std::vector<std::string> split_path(const std::string& path) {
  std::vector<std::string> parts;
  std::string part;
  std::istringstream in(path);
  while (std::getline(in, part, '/'))
    if (!part.empty()) parts.push_back(part);
  return parts;
}

std::optional<long long> parse_int(std::string_view s) {
  long long v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) return std::nullopt;
  return v;
}

std::optional<std::pair<int, int>> parse_cell(const std::string& s) {
  auto comma = s.find(',');
  if (comma == std::string::npos) return std::nullopt;
  auto r = parse_int(std::string_view(s).substr(0, comma));
  auto c = parse_int(std::string_view(s).substr(comma + 1));
  if (!r || !c) return std::nullopt;
  return std::pair{static_cast<int>(*r), static_cast<int>(*c)};
}

json crop_json(const CropRecord& c, std::size_t index) {
  json j{{"index", index},
         {"row", c.row},
         {"col", c.col},
         {"source_id", c.source_id},
         {"box", {c.source_box.x0, c.source_box.y0, c.source_box.x1, c.source_box.y1}}};
  j["label"] = c.label ? json(std::string(to_string(*c.label))) : json(nullptr);
  j["soft_label"] = c.soft_label ? json(*c.soft_label) : json(nullptr);
  return j;
}

json label_json(const Session::CellLabel& l) {
  json j;
  j["label"] = l.label ? json(std::string(to_string(*l.label))) : json(nullptr);
  j["soft_label"] = l.soft_label ? json(*l.soft_label) : json(nullptr);
  return j;
}

// Parses {"label": name|null, "soft_label": [a,b,c]|null}; throws InvalidLabel.
Session::CellLabel parse_label_body(const json& j) {
  if (!j.is_object()) throw Error(Errc::InvalidLabel, "label body must be a JSON object");
  Session::CellLabel out;
  if (j.contains("label") && !j["label"].is_null()) {
    if (!j["label"].is_string()) throw Error(Errc::InvalidLabel, "label must be a string");
    out.label = parse_label(j["label"].get<std::string>());
    if (!out.label) throw Error(Errc::InvalidLabel, "unknown label '" + j["label"].get<std::string>() + "'");
  }
  if (j.contains("soft_label") && !j["soft_label"].is_null()) {
    const auto& s = j["soft_label"];
    if (!s.is_array() || s.size() != kNumClasses) throw Error(Errc::InvalidLabel, "soft_label needs 3 numbers");
    SoftLabel soft{};
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (!s[i].is_number()) throw Error(Errc::InvalidLabel, "soft_label needs 3 numbers");
      soft[i] = s[i].get<double>();
    }
    out.soft_label = soft;
  }
  // Validate through the same rule the crop records use.
  CropRecord probe;
  if (out.label || out.soft_label) assign_label(probe, out.label, out.soft_label);
  out.label = probe.label;
  return out;
}

}  // namespace

json to_json(const GridSpec& g) {
  return {{"rows", g.rows},         {"cols", g.cols},           {"x_offset", g.x_offset},
          {"y_offset", g.y_offset}, {"cell_width", g.cell_width}, {"cell_height", g.cell_height},
          {"x_skew", g.x_skew},     {"y_skew", g.y_skew}};
}

GridSpec grid_from_json(const json& j, const GridSpec& base) {
  if (!j.is_object()) throw Error(Errc::InvalidGrid, "grid must be a JSON object");
  GridSpec g = base;
  auto field = [&](const char* key, int& out) {
    auto it = j.find(key);
    if (it == j.end()) return;
    if (!it->is_number_integer()) throw Error(Errc::InvalidGrid, std::string("grid field '") + key + "' must be an integer");
    out = it->get<int>();
  };
  field("rows", g.rows);
  field("cols", g.cols);
  field("x_offset", g.x_offset);
  field("y_offset", g.y_offset);
  field("cell_width", g.cell_width);
  field("cell_height", g.cell_height);
  field("x_skew", g.x_skew);
  field("y_skew", g.y_skew);
  return g;
}

void Session::recrop() {
  crops = crop_mosaic(image, grid, theta, source);
  for (auto& c : crops) {
    auto it = labels.find({c.row, c.col});
    if (it != labels.end()) assign_label(c, it->second.label, it->second.soft_label);
  }
}

std::size_t Session::labeled_count() const {
  std::size_t n = 0;
  for (const auto& c : crops) n += c.labeled();
  return n;
}

ApiService::ApiService(fs::path data_dir) : data_dir_(std::move(data_dir)) {
  fs::create_directories(data_dir_ / "sessions");
  replay();
}

ApiService::~ApiService() = default;

std::size_t ApiService::session_count() const {
  std::lock_guard lock(mu_);
  return sessions_.size();
}

std::shared_ptr<Session> ApiService::find(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = sessions_.find(id);
  return it == sessions_.end() ? nullptr : it->second;
}

void ApiService::append_journal(const json& entry) {
  if (replaying_) return;
  std::lock_guard lock(mu_);
  std::ofstream out(data_dir_ / "journal.jsonl", std::ios::app);
  out << entry.dump() << '\n';
  out.flush();
  if (!out) throw Error(Errc::Io, "cannot append to session journal");
}

void ApiService::replay() {
  std::ifstream in(data_dir_ / "journal.jsonl");
  if (!in) return;
  replaying_ = true;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      const json e = json::parse(line);
      const std::string op = e.at("op");
      const std::string id = e.at("id");
      if (op == "create") {
        auto s = std::make_shared<Session>();
        s->id = id;
        s->source = e.at("source");
        s->theta = e.at("theta");
        s->low_confidence = e.value("low_confidence", false);
        s->image = read_png(data_dir_ / "sessions" / (id + ".png"));
        s->grid = grid_from_json(e.at("grid"));
        s->recrop();
        sessions_[id] = s;
        if (auto n = parse_int(std::string_view(id).substr(1)); n && static_cast<std::uint64_t>(*n) >= next_id_)
          next_id_ = static_cast<std::uint64_t>(*n) + 1;
        continue;
      }
      auto s = sessions_.at(id);
      if (op == "grid") {
        s->grid = grid_from_json(e.at("grid"));
        s->recrop();
      } else if (op == "label") {
        const std::pair key{e.at("row").get<int>(), e.at("col").get<int>()};
        auto l = parse_label_body(e);
        if (l.label)
          s->labels[key] = l;
        else
          s->labels.erase(key);
        s->dirty = true;
        s->recrop();
      } else if (op == "export") {
        s->dirty = false;
      }
    } catch (const std::exception& ex) {
      log(LogLevel::Warn, "journal line " + std::to_string(lineno) + " skipped: " + ex.what());
    }
  }
  replaying_ = false;
}

Response ApiService::handle(const Request& req) {
  try {
    const auto parts = split_path(req.path);
    if (parts.size() == 1 && parts[0] == "health") {
      if (req.method != "GET") return error_response(405, "method not allowed");
      return json_response(200, {{"status", "ok"}, {"sessions", session_count()}});
    }
    if (parts.empty() || parts[0] != "sessions") return error_response(404, "no such endpoint");
    if (parts.size() == 1) {
      if (req.method != "POST") return error_response(405, "method not allowed");
      return create_session(req);
    }
    auto s = find(parts[1]);
    if (!s) return error_response(404, "unknown session '" + parts[1] + "'");
    std::lock_guard lock(s->mu);
    if (parts.size() == 2 && req.method == "GET") return get_session(*s);
    if (parts.size() == 3 && parts[2] == "grid" && req.method == "PUT") return put_grid(*s, req);
    if (parts.size() == 3 && parts[2] == "preview" && req.method == "GET") return preview(*s, req);
    if (parts.size() == 3 && parts[2] == "export" && req.method == "POST") return export_session(*s, req);
    if (parts.size() == 5 && parts[2] == "crops" && parts[4] == "label" && req.method == "POST") {
      auto n = parse_int(parts[3]);
      if (!n || *n < 0 || static_cast<std::size_t>(*n) >= s->crops.size())
        return error_response(404, "unknown crop '" + parts[3] + "'");
      return post_label(*s, static_cast<std::size_t>(*n), req);
    }
    return error_response(404, "no such endpoint");
  } catch (const Error& e) {
    return error_response(status_for(e.code()), e.what(), to_string(e.code()));
  } catch (const json::exception& e) {
    return error_response(400, std::string("malformed JSON: ") + e.what());
  } catch (const std::exception& e) {
    return error_response(500, e.what());
  }
}

Response ApiService::create_session(const Request& req) {
  const auto* bytes = reinterpret_cast<const std::uint8_t*>(req.body.data());
  GrayImage image = decode_png(std::span(bytes, req.body.size()));

  auto q = [&](const char* key) -> std::optional<std::string> {
    auto it = req.query.find(key);
    return it == req.query.end() ? std::nullopt : std::optional(it->second);
  };
  double theta = kDefaultTheta;
  if (auto t = q("theta")) {
    try {
      theta = std::stod(*t);
    } catch (const std::exception&) {
      return error_response(400, "theta must be a number");
    }
  }
  int rows = 0, cols = 0;
  if (q("rows") || q("cols")) {
    const long long r = parse_int(q("rows").value_or("")).value_or(0);
    const long long c = parse_int(q("cols").value_or("")).value_or(0);
    if (r < 1 || c < 1) return error_response(400, "rows and cols must both be positive integers");
    rows = static_cast<int>(r);
    cols = static_cast<int>(c);
  } else {
    std::tie(rows, cols) = detect_grid_dims(image, theta);
    if (rows < 1 || cols < 1) return error_response(400, "no vias detected; pass rows and cols");
  }
  const GridEstimate est = estimate_grid(image, rows, cols, theta);

  auto s = std::make_shared<Session>();
  s->source = q("source").value_or("mosaic");
  if (s->source.empty() || s->source.find_first_of("/\\") != std::string::npos)
    return error_response(400, "source must be a plain name");
  s->image = std::move(image);
  s->grid = est.grid;
  s->theta = theta;
  s->low_confidence = est.low_confidence;
  s->recrop();
  {
    std::lock_guard lock(mu_);
    s->id = "s" + std::to_string(next_id_++);
  }
  write_png(data_dir_ / "sessions" / (s->id + ".png"), s->image);
  append_journal({{"op", "create"},
                  {"id", s->id},
                  {"source", s->source},
                  {"theta", s->theta},
                  {"low_confidence", s->low_confidence},
                  {"grid", to_json(s->grid)}});
  {
    std::lock_guard lock(mu_);
    sessions_[s->id] = s;
  }
  return json_response(201, {{"id", s->id},
                             {"grid", to_json(s->grid)},
                             {"crop_count", s->crops.size()},
                             {"low_confidence", s->low_confidence}});
}

Response ApiService::get_session(Session& s) {
  json crops = json::array();
  for (std::size_t i = 0; i < s.crops.size(); ++i) crops.push_back(crop_json(s.crops[i], i));
  return json_response(200, {{"id", s.id},
                             {"source", s.source},
                             {"width", s.image.width()},
                             {"height", s.image.height()},
                             {"theta", s.theta},
                             {"grid", to_json(s.grid)},
                             {"low_confidence", s.low_confidence},
                             {"dirty", s.dirty},
                             {"crop_count", s.crops.size()},
                             {"labeled_count", s.labeled_count()},
                             {"crops", crops}});
}

Response ApiService::put_grid(Session& s, const Request& req) {
  const GridSpec g = grid_from_json(json::parse(req.body), s.grid);
  g.validate(s.image.width(), s.image.height());
  s.grid = g;
  s.recrop();
  append_journal({{"op", "grid"}, {"id", s.id}, {"grid", to_json(g)}});
  return get_session(s);
}

Response ApiService::preview(Session& s, const Request& req) {
  auto it = req.query.find("cell");
  if (it == req.query.end()) return error_response(400, "cell=r,c is required");
  auto cell = parse_cell(it->second);
  if (!cell) return error_response(400, "cell must be r,c");
  const auto [r, c] = *cell;
  if (r < 0 || c < 0 || r >= s.grid.rows || c >= s.grid.cols)
    return error_response(404, "cell " + it->second + " is outside the grid");
  const auto png = encode_png(s.crops[static_cast<std::size_t>(r * s.grid.cols + c)].image);
  return {200, "image/png", std::string(png.begin(), png.end())};
}

Response ApiService::post_label(Session& s, std::size_t index, const Request& req) {
  const json body = json::parse(req.body);
  const auto l = parse_label_body(body);
  auto& crop = s.crops[index];
  const std::pair key{crop.row, crop.col};
  if (l.label)
    s.labels[key] = l;
  else
    s.labels.erase(key);
  crop.label.reset();
  crop.soft_label.reset();
  if (l.label) assign_label(crop, l.label, l.soft_label);
  s.dirty = true;
  json entry = label_json(l);
  entry["op"] = "label";
  entry["id"] = s.id;
  entry["row"] = crop.row;
  entry["col"] = crop.col;
  append_journal(entry);
  return json_response(200, crop_json(crop, index));
}

Response ApiService::export_session(Session& s, const Request& req) {
  auto flag = [&](const char* key) {
    auto it = req.query.find(key);
    return it != req.query.end() && (it->second == "true" || it->second == "1");
  };
  const std::size_t labeled = s.labeled_count();
  if (labeled < s.crops.size() && !flag("partial"))
    return error_response(409, std::to_string(s.crops.size() - labeled) + " crops are unlabeled; use ?partial=true");
  Split split = Split::Train;
  if (auto it = req.query.find("split"); it != req.query.end()) {
    auto sp = parse_split(it->second);
    if (!sp) return error_response(400, "split must be train or test");
    split = *sp;
  }
  const fs::path dir = data_dir_ / "exports" / s.id;
  const auto records = export_crops(s.crops, dir, split);
  write_manifest(dir / "manifest.jsonl", records);
  s.dirty = false;
  append_journal({{"op", "export"}, {"id", s.id}});
  return json_response(200, {{"dir", dir.string()},
                             {"manifest", (dir / "manifest.jsonl").string()},
                             {"count", records.size()},
                             {"labeled_count", labeled}});
}

void ApiService::bind(httplib::Server& server) {
  auto route = [this](const httplib::Request& hreq, httplib::Response& hres) {
    Request req{hreq.method, hreq.path, {}, hreq.body};
    for (const auto& [k, v] : hreq.params) req.query[k] = v;
    const Response r = handle(req);
    hres.status = r.status;
    hres.set_content(r.body, r.content_type);
  };
  const char* any = R"(/.*)";
  server.Get(any, route);
  server.Post(any, route);
  server.Put(any, route);
}

void serve(const fs::path& data_dir, const std::string& host, int port) {
  ApiService service(data_dir);
  httplib::Server server;
  service.bind(server);
  log(LogLevel::Info, "serving on http://" + host + ":" + std::to_string(port));
  if (!server.listen(host, port)) throw Error(Errc::Io, "cannot listen on " + host + ":" + std::to_string(port));
}

}  // namespace tsvmorph
