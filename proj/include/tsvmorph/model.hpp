#pragma once

#include <cstdint>
#include <filesystem>
#include <span>

#include <json.hpp>

#include "tsvmorph/architectures.hpp"
#include "tsvmorph/network.hpp"
#include "tsvmorph/surface_profile.hpp"

namespace tsvmorph {

/// A network instantiated from an architecture, in training precision.
struct Model {
  ArchitectureSpec spec;
  Network<float> net;

  Model(ArchitectureSpec s, std::uint64_t seed) : spec(std::move(s)), net(spec.layers, kInputShape, seed) {}
};

/// Stacks 54x54 images into [N, 1, 54, 54], mapping intensity to [-1, 1].
Tensor<float> to_batch(std::span<const GrayImage* const> images);

/// Class probabilities [N, 3] in eval mode.
Tensor<float> predict(Model& model, const Tensor<float>& batch);

struct CheckpointInfo {
  std::uint32_t epoch = 0;
  nlohmann::json metrics = nlohmann::json::object();
};

/// "TSVMCKPT", u64 header length, JSON header (architecture, layers, shapes,
/// epoch, metrics, byte offsets), then little-endian f32 parameter arrays in
/// layer order. Batch-norm running statistics are stored as parameters.
void save_checkpoint(const std::filesystem::path& path, Model& model, const CheckpointInfo& info);

struct LoadedCheckpoint {
  Model model;
  CheckpointInfo info;
};

LoadedCheckpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace tsvmorph
