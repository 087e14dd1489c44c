#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsvmorph/architectures.hpp"
#include "tsvmorph/cropper.hpp"
#include "tsvmorph/model.hpp"

namespace tsvmorph {

struct TrainConfig {
  ArchId arch = ArchId::LeNet5;
  std::uint32_t epochs = 200;
  int aug_type = 0;
  double dropout = 0.0;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 32;
  std::uint32_t lr_halve_every = 50;  // 0 keeps the rate constant
  std::uint64_t seed = 1;
  bool strict_determinism = true;
  std::filesystem::path checkpoint;  // best-epoch model; empty to skip

  /// Throws Error(InvalidConfig).
  void validate() const;
  double learning_rate(std::uint32_t epoch) const;  // epoch is 1-based
};

using Confusion = std::array<std::array<std::int64_t, kNumClasses>, kNumClasses>;

/// Rows are true classes, columns predictions.
struct Metrics {
  Confusion confusion{};
  std::array<double, kNumClasses> per_class_accuracy{};
  double total_accuracy = 0;
  std::uint32_t epoch = 0;

  static Metrics from_confusion(const Confusion& c, std::uint32_t epoch = 0);
  std::int64_t count() const;

  friend bool operator==(const Metrics&, const Metrics&) = default;
};

struct History {
  std::vector<Metrics> epochs;     // test metrics, one per epoch
  std::vector<double> train_loss;  // mean batch loss per epoch
  double max_total_accuracy = 0;
  std::uint32_t best_epoch = 0;

  friend bool operator==(const History&, const History&) = default;
};

struct TrainResult {
  Model model;  // restored to the best epoch
  History history;
};

/// Called after every epoch with its test metrics and mean training loss.
using EpochCallback = std::function<void(const Metrics&, double train_loss)>;

/// Trains on `train` (augmented by config.aug_type) and scores `test` after
/// every epoch. Throws Error(OverlappingSplits) if a source id appears in
/// both, Error(EmptyClass) if a class is missing from `train`,
/// Error(UnlabeledRecord) for unlabeled input.
TrainResult train(const TrainConfig& config, std::span<const CropRecord> train,
                  std::span<const CropRecord> test, const EpochCallback& on_epoch = {});

/// Confusion over argmax predictions. Throws Error(UnlabeledRecord).
Metrics evaluate(Model& model, std::span<const CropRecord> records);

nlohmann::json to_json(const Metrics& m);
nlohmann::json to_json(const History& h);

}  // namespace tsvmorph
