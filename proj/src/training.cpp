#include "tsvmorph/training.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "tsvmorph/augmentation.hpp"
#include "tsvmorph/error.hpp"
#include "tsvmorph/logging.hpp"
#include "tsvmorph/synthetic_generator.hpp"

namespace tsvmorph {

namespace {

constexpr Index kEvalBatch = 64;
constexpr std::uint64_t kInitStream = 0x1417;
constexpr std::uint64_t kShuffleStream = 0x5a1f;

int label_index(const CropRecord& r) {
  if (!r.label) throw Error(Errc::UnlabeledRecord, "record " + r.source_id + " has no label");
  return static_cast<int>(*r.label);
}

// Stacks images[first..last) of `order` into one batch.
Tensor<float> gather(std::span<const CropRecord> recs, std::span<const std::size_t> order) {
  std::vector<const GrayImage*> imgs;
  imgs.reserve(order.size());
  for (auto i : order) imgs.push_back(&recs[i].image);
  return to_batch(imgs);
}

std::string base_source(const std::string& id) { return id.substr(0, id.find('+')); }

using Snapshot = std::vector<Tensor<float>>;

Snapshot snapshot(Model& m) {
  Snapshot s;
  for (auto* p : m.net.parameters()) s.push_back(p->value);
  return s;
}

void restore(Model& m, const Snapshot& s) {
  auto params = m.net.parameters();
  for (std::size_t i = 0; i < params.size(); ++i) params[i]->value = s[i];
}

}  // namespace

void TrainConfig::validate() const {
  if (epochs < 1) throw Error(Errc::InvalidConfig, "epochs must be at least 1");
  if (!(dropout >= 0.0 && dropout < 1.0)) throw Error(Errc::InvalidConfig, "dropout must be in [0, 1)");
  if (aug_type < 0 || aug_type > 5) throw Error(Errc::InvalidConfig, "aug_type must be 0-5");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw Error(Errc::InvalidConfig, "lr must be positive");
  if (!(momentum >= 0.0 && momentum < 1.0)) throw Error(Errc::InvalidConfig, "momentum must be in [0, 1)");
  if (batch_size < 2) throw Error(Errc::InvalidConfig, "batch_size must be at least 2");
}

double TrainConfig::learning_rate(std::uint32_t epoch) const {
  if (lr_halve_every == 0 || epoch == 0) return lr;
  return lr * std::pow(0.5, static_cast<double>((epoch - 1) / lr_halve_every));
}

Metrics Metrics::from_confusion(const Confusion& c, std::uint32_t epoch) {
  Metrics m;
  m.confusion = c;
  m.epoch = epoch;
  std::int64_t diag = 0, total = 0;
  for (std::size_t i = 0; i < kNumClasses; ++i) {
    std::int64_t row = 0;
    for (std::size_t j = 0; j < kNumClasses; ++j) row += c[i][j];
    m.per_class_accuracy[i] = row > 0 ? static_cast<double>(c[i][i]) / static_cast<double>(row) : 0.0;
    diag += c[i][i];
    total += row;
  }
  m.total_accuracy = total > 0 ? static_cast<double>(diag) / static_cast<double>(total) : 0.0;
  return m;
}

std::int64_t Metrics::count() const {
  std::int64_t n = 0;
  for (const auto& row : confusion)
    for (auto v : row) n += v;
  return n;
}

Metrics evaluate(Model& model, std::span<const CropRecord> records) {
  std::vector<int> labels;
  labels.reserve(records.size());
  for (const auto& r : records) labels.push_back(label_index(r));
  Confusion c{};
  std::vector<std::size_t> order(records.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  for (std::size_t start = 0; start < records.size(); start += kEvalBatch) {
    const std::size_t end = std::min(records.size(), start + static_cast<std::size_t>(kEvalBatch));
    auto probs = predict(model, gather(records, std::span(order).subspan(start, end - start)));
    auto p = probs.matrix();
    for (Index i = 0; i < p.rows(); ++i) {
      Index pred = 0;
      p.row(i).maxCoeff(&pred);
      ++c[labels[start + i]][pred];
    }
  }
  return Metrics::from_confusion(c);
}

TrainResult train(const TrainConfig& config, std::span<const CropRecord> train_set,
                  std::span<const CropRecord> test_set, const EpochCallback& on_epoch) {
  config.validate();

  std::set<std::string> test_sources;
  for (const auto& r : test_set) {
    label_index(r);
    test_sources.insert(base_source(r.source_id));
  }
  std::array<std::int64_t, kNumClasses> counts{};
  for (const auto& r : train_set) {
    ++counts[label_index(r)];
    if (test_sources.count(base_source(r.source_id)))
      throw Error(Errc::OverlappingSplits, "source " + r.source_id + " appears in both train and test");
  }
  for (std::size_t c = 0; c < kNumClasses; ++c)
    if (counts[c] == 0)
      throw Error(Errc::EmptyClass,
                  "class " + std::string(to_string(static_cast<MorphologyLabel>(c))) + " is absent from the train split");
  const auto [lo, hi] = std::minmax_element(counts.begin(), counts.end());
  if (static_cast<double>(*hi - *lo) > 0.1 * static_cast<double>(*hi)) {
    std::ostringstream msg;
    msg << "train classes are imbalanced by more than 10% (" << counts[0] << "/" << counts[1] << "/" << counts[2]
        << ")";
    log(LogLevel::Warn, msg.str());
  }

  const auto augmented = augment_manifest(train_set, config.aug_type);
  std::vector<int> labels;
  labels.reserve(augmented.size());
  for (const auto& r : augmented) labels.push_back(label_index(r));

  TrainResult result{Model(with_dropout(build(config.arch), config.dropout), derive_seed(config.seed, kInitStream)),
                     History{}};
  Model& model = result.model;
  History& hist = result.history;
  Snapshot best;

  std::vector<std::size_t> order(augmented.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  const std::size_t bs = static_cast<std::size_t>(config.batch_size);

  for (std::uint32_t epoch = 1; epoch <= config.epochs; ++epoch) {
    std::mt19937_64 rng(derive_seed(config.seed, kShuffleStream + epoch));
    std::shuffle(order.begin(), order.end(), rng);
    const double lr = config.learning_rate(epoch);

    double loss_sum = 0;
    std::size_t batches = 0;
    for (std::size_t start = 0; start < order.size();) {
      std::size_t end = std::min(order.size(), start + bs);
      // Batch norm needs two samples; fold a trailing singleton into this batch.
      if (order.size() - end == 1) end = order.size();
      std::span<const std::size_t> idx(order.data() + start, end - start);
      auto x = gather(augmented, idx);
      std::vector<int> y;
      y.reserve(idx.size());
      for (auto i : idx) y.push_back(labels[i]);

      auto probs = model.net.forward(x, Mode::Train);
      auto loss = softmax_cross_entropy(probs, std::span<const int>(y));
      if (!std::isfinite(loss.loss))
        throw Error(Errc::NonFiniteSample, "training loss became non-finite at epoch " + std::to_string(epoch));
      model.net.zero_grad();
      model.net.backward_from_logits(loss.grad_logits);
      auto params = model.net.parameters();
      sgd_step<float>(params, lr, config.momentum);

      loss_sum += loss.loss;
      ++batches;
      start = end;
    }
    const double mean_loss = batches ? loss_sum / static_cast<double>(batches) : 0.0;

    Metrics m = evaluate(model, test_set);
    m.epoch = epoch;
    hist.epochs.push_back(m);
    hist.train_loss.push_back(mean_loss);
    if (hist.best_epoch == 0 || m.total_accuracy > hist.max_total_accuracy) {
      hist.max_total_accuracy = m.total_accuracy;
      hist.best_epoch = epoch;
      best = snapshot(model);
    }
    if (on_epoch) on_epoch(m, mean_loss);
  }

  restore(model, best);
  if (!config.checkpoint.empty()) {
    CheckpointInfo info;
    info.epoch = hist.best_epoch;
    info.metrics = to_json(hist.epochs[hist.best_epoch - 1]);
    info.metrics["aug_type"] = config.aug_type;
    info.metrics["dropout"] = config.dropout;
    info.metrics["seed"] = config.seed;
    save_checkpoint(config.checkpoint, model, info);
  }
  return result;
}

nlohmann::json to_json(const Metrics& m) {
  return {{"epoch", m.epoch},
          {"confusion", m.confusion},
          {"per_class_accuracy", m.per_class_accuracy},
          {"total_accuracy", m.total_accuracy}};
}

nlohmann::json to_json(const History& h) {
  nlohmann::json epochs = nlohmann::json::array();
  for (std::size_t i = 0; i < h.epochs.size(); ++i) {
    auto e = to_json(h.epochs[i]);
    e["train_loss"] = h.train_loss[i];
    epochs.push_back(std::move(e));
  }
  return {{"max_total_accuracy", h.max_total_accuracy}, {"best_epoch", h.best_epoch}, {"epochs", epochs}};
}

}  // namespace tsvmorph
