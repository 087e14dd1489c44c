#pragma once

#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "tsvmorph/cropper.hpp"
#include "tsvmorph/labels.hpp"

namespace tsvmorph {

enum class Split { Train, Test };

std::string_view to_string(Split s);
std::optional<Split> parse_split(std::string_view s);

/// One JSON line of a dataset manifest. `path` is relative to the manifest's
/// directory unless absolute.
struct ManifestRecord {
  std::string path;
  std::optional<MorphologyLabel> label;
  std::optional<SoftLabel> soft_label;
  Split split = Split::Train;
  std::string source_id;
  std::string transform = "identity";

  friend bool operator==(const ManifestRecord&, const ManifestRecord&) = default;
};

/// {"path":…,"label":…,"soft_label":[…],"split":…,"source_id":…,"transform":…}
/// with label and soft_label omitted when absent.
std::string to_json_line(const ManifestRecord& rec);
/// Throws Error(BadManifest) on malformed lines.
ManifestRecord parse_manifest_line(std::string_view line);

std::vector<ManifestRecord> read_manifest(const std::filesystem::path& path);
void write_manifest(const std::filesystem::path& path, std::span<const ManifestRecord> records);

/// Loads images for the records (optionally one split only) as CropRecords
/// carrying label, soft label, source id and transform.
std::vector<CropRecord> load_records(std::span<const ManifestRecord> records,
                                     const std::filesystem::path& base_dir,
                                     std::optional<Split> split = std::nullopt);

/// PNG file name for a crop: "{source}_{row}_{col}.png".
std::string crop_file_name(const std::string& source, int row, int col);

/// Writes each crop as a PNG named after its source_id under `dir` and
/// returns the matching manifest records (paths relative to `dir`).
std::vector<ManifestRecord> export_crops(std::span<const CropRecord> crops,
                                         const std::filesystem::path& dir, Split split);

}  // namespace tsvmorph
