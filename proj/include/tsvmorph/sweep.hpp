#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tsvmorph/training.hpp"

namespace tsvmorph {

struct SweepRow {
  ArchId arch = ArchId::LeNet5;
  int aug_type = 0;
  std::optional<double> dropout;  // none for networks without dropout layers
  double max_accuracy = 0;
  std::uint32_t best_epoch = 0;

  friend bool operator==(const SweepRow&, const SweepRow&) = default;
};

struct SweepReport {
  std::vector<SweepRow> rows;  // in cell order
  std::vector<SweepRow> best;  // one per architecture, in first-seen order
};

/// Cell configs: every (arch, aug, dropout); architectures without dropout
/// slots take one cell per aug type with dropout 0.
std::vector<TrainConfig> sweep_cells(std::span<const ArchId> archs, std::span<const int> aug_types,
                                     std::span<const double> dropouts, const TrainConfig& base);

using CellRunner = std::function<History(const TrainConfig&)>;

/// Runs every cell with `runner` on up to `workers` threads. Rows keep cell
/// order whatever the completion order. Throws Error(InvalidConfig) on an
/// empty axis; cell errors propagate.
SweepReport sweep(std::span<const ArchId> archs, std::span<const int> aug_types, std::span<const double> dropouts,
                  const TrainConfig& base, const CellRunner& runner, int workers = 1);

/// Per-arch rows with the highest max_accuracy; ties keep the earliest cell.
std::vector<SweepRow> best_per_arch(std::span<const SweepRow> rows);

nlohmann::json to_json(std::span<const SweepRow> rows);
std::vector<SweepRow> rows_from_json(const nlohmann::json& j);

/// Header "arch,aug_type,dropout,max_accuracy,best_epoch"; missing dropout
/// is written as NA; accuracies round-trip exactly.
std::string to_csv(std::span<const SweepRow> rows);
std::vector<SweepRow> rows_from_csv(const std::string& csv);

/// Text table of all rows followed by the per-architecture best rows.
std::string render_summary(const SweepReport& report);

}  // namespace tsvmorph
