#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tsvmorph/cropper.hpp"
#include "tsvmorph/synthetic_generator.hpp"

namespace tsvmorph {

/// A synthetic mosaic pushed through the cropping pipeline, with each crop
/// labeled from the generator's ground truth.
struct SyntheticSplit {
  Mosaic mosaic;
  GrayImage image;  // rendered mosaic
  GridEstimate grid;
  std::vector<CropRecord> crops;  // labeled, row-major
};

/// Smallest near-square grid holding `count` vias.
std::pair<std::uint32_t, std::uint32_t> grid_for_count(std::size_t count);

/// `count` vias with labels as balanced as `count` allows, in a shuffled
/// order drawn from p.seed. Cells beyond `count` in the last row are
/// dropped from the crops. Source ids are "{source}_{row}_{col}".
SyntheticSplit make_synthetic_split(std::size_t count, const GenParams& p, const std::string& source,
                                    int gap = 6);

struct SyntheticDataset {
  SyntheticSplit train, test;
};

/// Train and test mosaics from independent seed streams of `seed`.
SyntheticDataset make_synthetic_dataset(std::size_t train_count, std::size_t test_count, std::uint64_t seed,
                                        GenParams p = {});

}  // namespace tsvmorph
