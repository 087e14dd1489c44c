#include "tsvmorph/cropper.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

namespace {

constexpr int kCornerPatch = 5;
constexpr int kMinRun = 2;

struct Run {
  int begin, end;  // [begin, end)
  double center() const { return (begin + end) / 2.0; }
};

// Mean of every column (axis 0) or row (axis 1) of the image.
std::vector<double> profile(const GrayImage& img, int axis) {
  const Eigen::Index n = axis == 0 ? img.width() : img.height();
  std::vector<double> out(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto line = axis == 0 ? img.pixels.col(i).cast<double>().eval()
                                : img.pixels.row(i).transpose().cast<double>().eval();
    out[static_cast<std::size_t>(i)] = line.mean();
  }
  return out;
}

// Maximal runs where the profile deviates from the background by at least
// `threshold`. Background gaps shorter than kMinRun do not split a run.
std::vector<Run> signal_runs(const std::vector<double>& prof, double background, double threshold) {
  std::vector<Run> runs;
  const int n = static_cast<int>(prof.size());
  int i = 0;
  while (i < n) {
    if (std::abs(prof[i] - background) < threshold) {
      ++i;
      continue;
    }
    int j = i;
    while (j < n && std::abs(prof[j] - background) >= threshold) ++j;
    if (!runs.empty() && i - runs.back().end < kMinRun)
      runs.back().end = j;
    else
      runs.push_back({i, j});
    i = j;
  }
  return runs;
}

struct AxisFit {
  int offset, cell;
  bool matched;
};

// Uniform partition of `extent` into `count` cells whose boundaries sit in
// the middle of the background runs between via runs.
AxisFit fit_axis(const std::vector<Run>& runs, int count, int extent) {
  if (static_cast<int>(runs.size()) != count) return {0, extent / count, false};

  double offset = 0, pitch = 0;
  if (count == 1) {
    const double lead = runs[0].begin / 2.0;
    const double trail = (runs[0].end + extent) / 2.0;
    offset = lead;
    pitch = trail - lead;
  } else {
    // least-squares line through the run centers
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (int i = 0; i < count; ++i) {
      const double c = runs[static_cast<std::size_t>(i)].center();
      sx += i;
      sy += c;
      sxx += static_cast<double>(i) * i;
      sxy += i * c;
    }
    pitch = (count * sxy - sx * sy) / (count * sxx - sx * sx);
    const double first_center = (sy - pitch * sx) / count;
    offset = first_center - pitch / 2;
  }
  int cell = std::max(8, static_cast<int>(std::lround(pitch)));
  int off = static_cast<int>(std::lround(offset));
  off = std::clamp(off, 0, std::max(0, extent - cell * count));
  if (off + cell * count > extent) cell = std::max(8, (extent - off) / count);
  return {off, cell, true};
}

}  // namespace

Box GridSpec::cell(int row, int col) const {
  const int x = x_offset + col * cell_width + row * x_skew;
  const int y = y_offset + row * cell_height + col * y_skew;
  return {x, y, x + cell_width, y + cell_height};
}

void GridSpec::validate(Eigen::Index width, Eigen::Index height) const {
  if (rows < 1 || cols < 1) throw Error(Errc::InvalidGrid, "rows and cols must be >= 1");
  if (cell_width < 8 || cell_height < 8) throw Error(Errc::InvalidGrid, "cells must be at least 8x8");
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) {
      const Box b = cell(r, c);
      if (b.x0 < 0 || b.y0 < 0 || b.x1 > width || b.y1 > height)
        throw Error(Errc::InvalidGrid, "cell (" + std::to_string(r) + "," + std::to_string(c) +
                                           ") leaves the image");
    }
}

std::uint8_t estimate_background(const GrayImage& img) {
  const Eigen::Index pw = std::min<Eigen::Index>(kCornerPatch, img.width());
  const Eigen::Index ph = std::min<Eigen::Index>(kCornerPatch, img.height());
  std::array<int, 256> hist{};
  const std::array<Eigen::Index, 2> xs{0, img.width() - pw};
  const std::array<Eigen::Index, 2> ys{0, img.height() - ph};
  for (Eigen::Index y0 : ys)
    for (Eigen::Index x0 : xs)
      for (Eigen::Index y = y0; y < y0 + ph; ++y)
        for (Eigen::Index x = x0; x < x0 + pw; ++x) ++hist[img(y, x)];
  return static_cast<std::uint8_t>(std::max_element(hist.begin(), hist.end()) - hist.begin());
}

std::pair<int, int> detect_grid_dims(const GrayImage& img, double theta) {
  const double bg = estimate_background(img);
  const auto rows = signal_runs(profile(img, 1), bg, theta / 2);
  const auto cols = signal_runs(profile(img, 0), bg, theta / 2);
  return {static_cast<int>(rows.size()), static_cast<int>(cols.size())};
}

GridEstimate estimate_grid(const GrayImage& img, int rows, int cols, double theta) {
  if (img.width() < 8 || img.height() < 8)
    throw Error(Errc::ImageTooSmall, "image must be at least 8x8");
  if (rows < 1 || cols < 1) throw Error(Errc::InvalidGrid, "rows and cols must be >= 1");

  const double bg = estimate_background(img);
  const int w = static_cast<int>(img.width()), h = static_cast<int>(img.height());
  const AxisFit fx = fit_axis(signal_runs(profile(img, 0), bg, theta / 2), cols, w);
  const AxisFit fy = fit_axis(signal_runs(profile(img, 1), bg, theta / 2), rows, h);

  GridEstimate est;
  est.grid = GridSpec{rows, cols, fx.offset, fy.offset, fx.cell, fy.cell, 0, 0};
  est.low_confidence = !(fx.matched && fy.matched);
  if (est.grid.cell_width * cols > w || est.grid.cell_height * rows > h)
    throw Error(Errc::ImageTooSmall, "image cannot hold the requested grid of 8x8 cells");
  est.grid.validate(w, h);
  return est;
}

Box detect_box_in_cell(const GrayImage& img, const Box& cell, double theta, std::uint8_t background) {
  if (cell.x0 < 0 || cell.y0 < 0 || cell.x1 > img.width() || cell.y1 > img.height() ||
      cell.width() <= 0 || cell.height() <= 0)
    throw Error(Errc::InvalidGrid, "cell lies outside the image");

  const auto block = img.pixels.block(cell.y0, cell.x0, cell.height(), cell.width()).cast<double>();
  const Eigen::VectorXd row_mean = block.rowwise().mean();
  const Eigen::RowVectorXd col_mean = block.colwise().mean();
  auto hot = [&](double m) { return std::abs(m - background) > theta; };

  int top = -1, bottom = -1, left = -1, right = -1;
  for (int i = 0; i < cell.height(); ++i)
    if (hot(row_mean(i))) { top = i; break; }
  for (int i = cell.height() - 1; i >= 0; --i)
    if (hot(row_mean(i))) { bottom = i; break; }
  for (int i = 0; i < cell.width(); ++i)
    if (hot(col_mean(i))) { left = i; break; }
  for (int i = cell.width() - 1; i >= 0; --i)
    if (hot(col_mean(i))) { right = i; break; }

  if (top < 0 || left < 0) return cell;
  return {cell.x0 + left, cell.y0 + top, cell.x0 + right + 1, cell.y0 + bottom + 1};
}

Box detect_box_in_cell(const GrayImage& img, const Box& cell, double theta) {
  return detect_box_in_cell(img, cell, theta, estimate_background(img));
}

GrayImage crop_centered(const GrayImage& img, const Box& box, std::uint8_t fill) {
  if (box.width() > kCropSize || box.height() > kCropSize)
    throw Error(Errc::BoxTooLarge, std::to_string(box.width()) + "x" + std::to_string(box.height()) +
                                       " exceeds 54x54");
  if (box.x0 < 0 || box.y0 < 0 || box.x1 > img.width() || box.y1 > img.height() ||
      box.width() <= 0 || box.height() <= 0)
    throw Error(Errc::InvalidGrid, "box lies outside the image");
  GrayImage out(kCropSize, kCropSize, fill);
  const int left = (kCropSize - box.width()) / 2;
  const int top = (kCropSize - box.height()) / 2;
  out.pixels.block(top, left, box.height(), box.width()) =
      img.pixels.block(box.y0, box.x0, box.height(), box.width());
  return out;
}

GrayImage crop_centered(const GrayImage& img, const Box& box) {
  return crop_centered(img, box, estimate_background(img));
}

void assign_label(CropRecord& rec, std::optional<MorphologyLabel> label,
                  std::optional<SoftLabel> soft) {
  if (soft) {
    if (!is_valid_soft_label(*soft))
      throw Error(Errc::InvalidLabel, "soft label must be non-negative and sum to 1");
    if (label && *label != argmax(*soft))
      throw Error(Errc::InvalidLabel, "hard label disagrees with argmax of soft label");
    label = argmax(*soft);
  }
  rec.label = label;
  rec.soft_label = soft;
}

std::vector<CropRecord> crop_mosaic(const GrayImage& img, const GridSpec& grid, double theta,
                                    const std::string& source) {
  grid.validate(img.width(), img.height());
  const std::uint8_t bg = estimate_background(img);
  std::vector<CropRecord> out;
  out.reserve(static_cast<std::size_t>(grid.rows) * grid.cols);
  for (int r = 0; r < grid.rows; ++r)
    for (int c = 0; c < grid.cols; ++c) {
      const Box cell = grid.cell(r, c);
      Box box = detect_box_in_cell(img, cell, theta, bg);
      if (box == cell) {
        // Nothing crossed theta: keep the central window, which is background.
        const int w = std::min(cell.width(), kCropSize), h = std::min(cell.height(), kCropSize);
        const int x0 = cell.x0 + (cell.width() - w) / 2, y0 = cell.y0 + (cell.height() - h) / 2;
        box = {x0, y0, x0 + w, y0 + h};
      }
      CropRecord rec;
      rec.image = crop_centered(img, box, bg);
      rec.source_box = box;
      rec.row = r;
      rec.col = c;
      rec.source_id = source + "_" + std::to_string(r) + "_" + std::to_string(c);
      out.push_back(std::move(rec));
    }
  return out;
}

}  // namespace tsvmorph
