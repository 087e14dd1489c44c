#pragma once

#include <optional>
#include <string>
#include <vector>

#include "tsvmorph/labels.hpp"
#include "tsvmorph/surface_profile.hpp"
#include "tsvmorph/synthetic_generator.hpp"

namespace tsvmorph {

inline constexpr int kCropSize = 54;
inline constexpr double kDefaultTheta = 12.0;

/// Regular grid of cells over a mosaic. Cell (r, c) starts at
/// (x_offset + c*cell_width + r*x_skew, y_offset + r*cell_height + c*y_skew).
struct GridSpec {
  int rows = 1, cols = 1;
  int x_offset = 0, y_offset = 0;
  int cell_width = 8, cell_height = 8;
  int x_skew = 0, y_skew = 0;

  Box cell(int row, int col) const;
  /// Throws Error(InvalidGrid) unless every cell lies inside a width x height image.
  void validate(Eigen::Index width, Eigen::Index height) const;

  friend bool operator==(const GridSpec&, const GridSpec&) = default;
};

struct GridEstimate {
  GridSpec grid;
  bool low_confidence = false;  // uniform fallback, no via runs matched
};

/// Mode of the four 5x5 corner patches.
std::uint8_t estimate_background(const GrayImage& img);

/// Auto-detects the via row and column counts from the intensity profiles.
/// Returns {0, 0} when no via is visible.
std::pair<int, int> detect_grid_dims(const GrayImage& img, double theta = kDefaultTheta);

GridEstimate estimate_grid(const GrayImage& img, int rows, int cols, double theta = kDefaultTheta);

/// Tightest box whose edge scanlines are the first, scanning inward from each
/// side of the cell, with mean intensity more than theta away from the
/// background. Returns the full cell when nothing crosses theta.
Box detect_box_in_cell(const GrayImage& img, const Box& cell, double theta = kDefaultTheta);
Box detect_box_in_cell(const GrayImage& img, const Box& cell, double theta, std::uint8_t background);

/// Box content centered in a 54x54 canvas filled with `fill`. The odd
/// remainder of the padding goes right/bottom.
GrayImage crop_centered(const GrayImage& img, const Box& box, std::uint8_t fill);
GrayImage crop_centered(const GrayImage& img, const Box& box);

struct CropRecord {
  GrayImage image;
  Box source_box;
  int row = 0, col = 0;
  std::optional<MorphologyLabel> label;
  std::optional<SoftLabel> soft_label;
  std::string source_id;
  std::string transform = "identity";

  bool labeled() const { return label.has_value(); }
};

/// Applies a hard and/or soft label. With only a soft label the hard label
/// becomes its argmax. Throws Error(InvalidLabel) on a non-normalized soft
/// label or a hard label that disagrees with it.
void assign_label(CropRecord& rec, std::optional<MorphologyLabel> label,
                  std::optional<SoftLabel> soft);

/// One unlabeled 54x54 record per cell, row-major. `source` names the
/// mosaic and prefixes each record's source_id as "{source}_{row}_{col}".
std::vector<CropRecord> crop_mosaic(const GrayImage& img, const GridSpec& grid,
                                    double theta = kDefaultTheta, const std::string& source = "mosaic");

}  // namespace tsvmorph
