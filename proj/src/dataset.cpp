#include "tsvmorph/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <random>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

std::pair<std::uint32_t, std::uint32_t> grid_for_count(std::size_t count) {
  if (count == 0) throw Error(Errc::InvalidParams, "dataset split needs at least one via");
  const auto cols = static_cast<std::uint32_t>(std::ceil(std::sqrt(static_cast<double>(count))));
  const auto rows = static_cast<std::uint32_t>((count + cols - 1) / cols);
  return {rows, cols};
}

SyntheticSplit make_synthetic_split(std::size_t count, const GenParams& p, const std::string& source, int gap) {
  const auto [rows, cols] = grid_for_count(count);
  std::vector<MorphologyLabel> labels;
  labels.reserve(count);
  for (std::size_t i = 0; i < count; ++i) labels.push_back(kAllLabels[i % kNumClasses]);
  std::mt19937_64 rng(derive_seed(p.seed, 77));
  std::shuffle(labels.begin(), labels.end(), rng);
  // Padding cells get vias too so the grid stays regular; they are not cropped.
  for (std::size_t i = count; i < std::size_t{rows} * cols; ++i) labels.push_back(kAllLabels[i % kNumClasses]);

  Mosaic mosaic = generate_mosaic(rows, cols, labels, p, gap);
  GrayImage image = render_grayscale(mosaic.heightmap);
  GridEstimate grid = estimate_grid(image, static_cast<int>(rows), static_cast<int>(cols));
  auto crops = crop_mosaic(image, grid.grid, kDefaultTheta, source);
  crops.resize(count);
  for (std::size_t i = 0; i < count; ++i) assign_label(crops[i], labels[i], std::nullopt);
  return {std::move(mosaic), std::move(image), grid, std::move(crops)};
}

SyntheticDataset make_synthetic_dataset(std::size_t train_count, std::size_t test_count, std::uint64_t seed,
                                        GenParams p) {
  p.seed = derive_seed(seed, 1);
  SyntheticSplit train = make_synthetic_split(train_count, p, "train");
  p.seed = derive_seed(seed, 2);
  return {std::move(train), make_synthetic_split(test_count, p, "test")};
}

}  // namespace tsvmorph
