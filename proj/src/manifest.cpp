#include "tsvmorph/manifest.hpp"

#include <fstream>
#include <json.hpp>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

namespace fs = std::filesystem;

std::string_view to_string(Split s) { return s == Split::Train ? "train" : "test"; }

std::optional<Split> parse_split(std::string_view s) {
  if (s == "train") return Split::Train;
  if (s == "test") return Split::Test;
  return std::nullopt;
}

std::string to_json_line(const ManifestRecord& rec) {
  nlohmann::ordered_json j;
  j["path"] = rec.path;
  if (rec.label) j["label"] = std::string(to_string(*rec.label));
  if (rec.soft_label) j["soft_label"] = *rec.soft_label;
  j["split"] = std::string(to_string(rec.split));
  j["source_id"] = rec.source_id;
  j["transform"] = rec.transform;
  return j.dump();
}

ManifestRecord parse_manifest_line(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadManifest, std::string("invalid JSON: ") + e.what());
  }
  auto str = [&](const char* key) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || !it->is_string())
      throw Error(Errc::BadManifest, std::string("missing string field '") + key + "'");
    return it->get<std::string>();
  };
  if (!j.is_object()) throw Error(Errc::BadManifest, "manifest line is not an object");
  ManifestRecord rec;
  rec.path = str("path");
  rec.source_id = str("source_id");
  if (j.contains("transform")) rec.transform = str("transform");
  auto split = parse_split(str("split"));
  if (!split) throw Error(Errc::BadManifest, "split must be train or test");
  rec.split = *split;
  if (j.contains("label") && !j["label"].is_null()) {
    auto l = parse_label(str("label"));
    if (!l) throw Error(Errc::InvalidLabel, "unknown label '" + j["label"].get<std::string>() + "'");
    rec.label = l;
  }
  if (j.contains("soft_label") && !j["soft_label"].is_null()) {
    const auto& s = j["soft_label"];
    if (!s.is_array() || s.size() != kNumClasses)
      throw Error(Errc::BadManifest, "soft_label must have 3 components");
    SoftLabel soft{};
    for (std::size_t i = 0; i < kNumClasses; ++i) {
      if (!s[i].is_number()) throw Error(Errc::BadManifest, "soft_label components must be numbers");
      soft[i] = s[i].get<double>();
    }
    if (!is_valid_soft_label(soft)) throw Error(Errc::InvalidLabel, "soft_label is not normalized");
    rec.soft_label = soft;
  }
  return rec;
}

std::vector<ManifestRecord> read_manifest(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open manifest " + path.string());
  std::vector<ManifestRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(parse_manifest_line(line));
    } catch (const Error& e) {
      throw Error(e.code(), path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return out;
}

void write_manifest(const fs::path& path, std::span<const ManifestRecord> records) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write manifest " + path.string());
  for (const auto& r : records) out << to_json_line(r) << '\n';
  if (!out) throw Error(Errc::Io, "write failed for " + path.string());
}

std::vector<CropRecord> load_records(std::span<const ManifestRecord> records, const fs::path& base_dir,
                                     std::optional<Split> split) {
  std::vector<CropRecord> out;
  for (const auto& r : records) {
    if (split && r.split != *split) continue;
    fs::path p(r.path);
    if (p.is_relative()) p = base_dir / p;
    CropRecord c{read_png(p), Box{}, 0, 0, std::nullopt, std::nullopt, r.source_id, r.transform};
    if (r.label || r.soft_label) assign_label(c, r.label, r.soft_label);
    out.push_back(std::move(c));
  }
  return out;
}

std::string crop_file_name(const std::string& source, int row, int col) {
  return source + "_" + std::to_string(row) + "_" + std::to_string(col) + ".png";
}

std::vector<ManifestRecord> export_crops(std::span<const CropRecord> crops, const fs::path& dir, Split split) {
  fs::create_directories(dir);
  std::vector<ManifestRecord> out;
  out.reserve(crops.size());
  for (const auto& c : crops) {
    std::string name = c.source_id;
    if (c.transform != "identity") name += "__" + c.transform;
    for (char& ch : name)
      if (ch == '+' || ch == '/') ch = '-';
    name += ".png";
    write_png(dir / name, c.image);
    out.push_back({name, c.label, c.soft_label, split, c.source_id, c.transform});
  }
  return out;
}

}  // namespace tsvmorph
