// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. TSVMORPH_E2E_EPOCHS overrides the end-to-end budget.

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "support/gradcheck.hpp"
#include "tsvmorph/architectures.hpp"
#include "tsvmorph/augmentation.hpp"
#include "tsvmorph/dataset.hpp"
#include "tsvmorph/error.hpp"
#include "tsvmorph/logging.hpp"
#include "tsvmorph/sweep.hpp"
#include "tsvmorph/training.hpp"

using namespace tsvmorph;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

int failures = 0;

void criterion(const char* name, double budget_s, const std::function<Outcome()>& body) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = body();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  if (budget_s > 0 && secs > budget_s) {
    o.pass = false;
    o.detail += " [over the " + std::to_string(static_cast<int>(budget_s)) + " s budget]";
  }
  failures += !o.pass;
  std::printf("%s %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

Outcome augmentation_arithmetic() {
  std::vector<CropRecord> recs(1004);
  std::mt19937_64 rng(1);
  std::uniform_int_distribution<int> px(0, 255);
  for (std::size_t i = 0; i < recs.size(); ++i) {
    GrayImage img(54, 54, 0);
    for (int k = 0; k < 54 * 54; ++k) img.pixels.data()[k] = static_cast<std::uint8_t>(px(rng));
    recs[i].image = std::move(img);
    recs[i].label = kAllLabels[i % 3];
    recs[i].source_id = "r" + std::to_string(i);
  }
  std::map<MorphologyLabel, long> base;
  for (const auto& r : recs) ++base[*r.label];
  const long expected[] = {1004, 3012, 4016, 6024, 8032, 10040};
  std::string sizes;
  bool ok = true;
  for (int t = 0; t < 6; ++t) {
    const auto out = augment_manifest(recs, t);
    std::map<MorphologyLabel, long> counts;
    for (const auto& r : out) ++counts[*r.label];
    const long m = augmentation_multiplier(t);
    for (auto l : kAllLabels) ok &= counts[l] == m * base[l];
    ok &= static_cast<long>(out.size()) == expected[t];
    sizes += (t ? "/" : "") + std::to_string(out.size());
  }
  return {ok, "types 0-5 give " + sizes + " records, label multisets scaled"};
}

Outcome shape_traces() {
  bool ok = true;
  std::string detail;
  for (auto id : kAllArchs) {
    shape_trace(build(id));
    detail += std::string(to_string(id)) + " " + to_string(pre_flatten_shape(build(id))) + "; ";
  }
  ok &= pre_flatten_shape(build(ArchId::VGGInspiredAlexNet)) == Shape{256, 3, 3};
  ok &= pre_flatten_shape(build(ArchId::LeNet5)) == Shape{120, 6, 6};
  return {ok, detail + "pre-flatten shapes checked"};
}

Outcome gradient_checks() {
  struct Case {
    const char* name;
    LayerSpec spec;
    Shape input;
  };
  const Case cases[] = {
      {"conv", ConvSpec{3, 3, 1, 0}, {2, 6, 6}},
      {"conv s2 p1", ConvSpec{2, 3, 2, 1}, {2, 7, 7}},
      {"maxpool", PoolSpec{PoolKind::Max, 3, 2, 1}, {2, 7, 7}},
      {"avgpool", PoolSpec{PoolKind::Avg, 3, 2, 1}, {2, 7, 7}},
      {"batchnorm", BatchNormSpec{}, {3, 4, 4}},
      {"relu", ActivationSpec{ActivationKind::Relu}, {2, 4, 4}},
      {"tanh", ActivationSpec{ActivationKind::Tanh}, {2, 4, 4}},
      {"flatten", FlattenSpec{}, {2, 3, 3}},
      {"dense", DenseSpec{5}, {7}},
      {"dropout", DropoutSpec{0.3}, {12}},
      {"softmax", SoftmaxSpec{}, {4}},
  };
  double worst = 0;
  std::string where;
  std::size_t checked = 0;
  for (const auto& c : cases)
    for (std::uint64_t seed = 1; seed <= 10; ++seed) {
      std::mt19937_64 rng(seed);
      auto layer = make_layer<double>(c.spec, c.input, InitScheme::Kaiming, rng);
      Shape batch{3};
      batch.insert(batch.end(), c.input.begin(), c.input.end());
      const auto r = testing::check_layer(*layer, testing::random_tensor(batch, rng), seed);
      checked += r.checked;
      if (r.max_rel_error > worst) {
        worst = r.max_rel_error;
        where = std::string(c.name) + " " + r.worst;
      }
    }
  return {worst <= testing::kTolerance,
          fmt("%zu entries over 11 layer kinds x 10 seeds, max relative error %.2e%s", checked, worst,
              where.empty() ? "" : (" at " + where).c_str())};
}

Outcome numerical_hygiene() {
  std::mt19937_64 rng(2024);
  std::normal_distribution<double> n(0.0, 50.0);
  std::uniform_int_distribution<int> pick(0, 5);
  RowMatrix<double> logits(10000, 3);
  for (Index r = 0; r < logits.rows(); ++r)
    for (Index c = 0; c < 3; ++c) {
      const int k = pick(rng);
      logits(r, c) = k == 0 ? 1e3 : k == 1 ? -1e3 : n(rng);
    }
  logits.row(0) << 1e3, 1e3, 1e3;
  logits.row(1) << -1e3, -1e3, -1e3;
  logits.row(2) << 1e3, -1e3, 0;
  const auto p = softmax(logits);
  const double dev = (p.rowwise().sum().array() - 1.0).abs().maxCoeff();
  bool ok = p.allFinite() && dev <= 1e-6;

  RowMatrix<float> lf = logits.cast<float>();
  const auto pf = softmax(lf);
  const double devf = (pf.rowwise().sum().array() - 1.0f).abs().maxCoeff();
  ok &= pf.allFinite() && devf <= 1e-6;

  for (auto id : kAllArchs) {
    Model m(with_dropout(build(id), 0.5), 11);
    Tensor<float> x({4, 1, 54, 54});
    std::uniform_real_distribution<float> u(-1.f, 1.f);
    for (Index i = 0; i < x.size(); ++i) x[i] = u(rng);
    const auto probs = m.net.forward(x, Mode::Train);
    const std::vector<int> labels{0, 1, 2, 0};
    const auto loss = softmax_cross_entropy(probs, std::span<const int>(labels));
    m.net.zero_grad();
    const auto dx = m.net.backward_from_logits(loss.grad_logits);
    ok &= probs.all_finite() && dx.all_finite() && std::isfinite(loss.loss);
    for (auto* prm : m.net.parameters()) ok &= prm->grad.all_finite() && prm->value.all_finite();
    const auto eval = m.net.forward(x, Mode::Eval);
    ok &= eval.all_finite() && (eval.matrix().rowwise().sum().array() - 1.0f).abs().maxCoeff() <= 1e-6;
  }
  return {ok, fmt("10^4 logit rows: max |sum-1| %.1e (f64), %.1e (f32); four networks finite in forward/backward",
                  dev, devf)};
}

Outcome cropper_fidelity() {
  double min_iou = 1.0;
  int misses = 0, vias = 0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    GenParams p;
    p.seed = seed;
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<int> pick(0, 2);
    std::vector<MorphologyLabel> labels;
    for (int i = 0; i < 20; ++i) labels.push_back(kAllLabels[pick(rng)]);
    const auto m = generate_mosaic(4, 5, labels, p, 6);
    const auto img = render_grayscale(m.heightmap);
    const auto est = estimate_grid(img, 4, 5);
    const auto crops = crop_mosaic(img, est.grid);
    for (std::size_t i = 0; i < m.boxes.size(); ++i) {
      const double v = iou(crops[i].source_box, m.boxes[i].box);
      min_iou = std::min(min_iou, v);
      misses += v < 0.9;
      ++vias;
    }
  }
  return {misses == 0 && min_iou >= 0.9, fmt("%d vias, min IoU %.3f, %d misses", vias, min_iou, misses)};
}

Outcome end_to_end(std::uint32_t epochs) {
  bool ok = true;
  std::string detail;
  for (std::uint64_t seed = 1; seed <= 3; ++seed) {
    const auto d = make_synthetic_dataset(300, 90, seed);
    TrainConfig c;
    c.epochs = epochs;
    c.aug_type = 2;
    c.seed = seed;
    c.arch = ArchId::VGGInspiredAlexNet;
    c.dropout = 0.2;
    const auto vgg = train(c, d.train.crops, d.test.crops).history;
    c.arch = ArchId::LeNet5;
    c.dropout = 0.0;
    const auto lenet = train(c, d.train.crops, d.test.crops).history;
    const bool seed_ok = vgg.max_total_accuracy >= 0.90 && lenet.max_total_accuracy >= 0.80 &&
                         vgg.max_total_accuracy >= lenet.max_total_accuracy;
    ok &= seed_ok;
    detail += fmt("seed %llu: VGG %.3f (epoch %u), LeNet5 %.3f (epoch %u)%s; ", static_cast<unsigned long long>(seed),
                  vgg.max_total_accuracy, vgg.best_epoch, lenet.max_total_accuracy, lenet.best_epoch,
                  seed_ok ? "" : " <- short");
    std::fprintf(stderr, "end-to-end %s\n", detail.c_str());
  }
  return {ok, detail + std::to_string(epochs) + " epochs, aug 2, VGG dropout 0.2"};
}

Outcome sweep_mechanics() {
  const std::vector<int> augs{0, 1, 2, 3, 4, 5};
  const std::vector<double> drops{0.0, 0.1, 0.2, 0.3, 0.4, 0.5};
  TrainConfig base;
  base.epochs = 1;
  bool ok = true;
  const auto report = sweep(kAllArchs, augs, drops, base, [&](const TrainConfig& c) {
    History h;
    ok &= c.epochs == 1;
    h.epochs.push_back(Metrics::from_confusion({{{1 + c.aug_type, 0, 0}, {0, 1, 0}, {0, 0, 1}}}, 1));
    h.max_total_accuracy = h.epochs[0].total_accuracy * (1.0 - 0.1 * c.dropout);
    h.best_epoch = 1;
    return h;
  }, 4);
  int lenet = 0;
  for (const auto& r : report.rows) lenet += r.arch == ArchId::LeNet5 && !r.dropout;
  ok &= report.rows.size() == 114 && lenet == 6;
  const std::vector<ArchId> only{ArchId::LeNet5};
  const std::vector<int> zero{0};
  const auto single = sweep(only, zero, drops, base, [](const TrainConfig&) { return History{{}, {}, 0.5, 1}; });
  ok &= single.rows.size() == 1 && to_csv(single.rows).find(",NA,") != std::string::npos;
  const bool json_rt = rows_from_json(to_json(report.rows)) == report.rows;
  const bool csv_rt = rows_from_csv(to_csv(report.rows)) == report.rows;
  for (const auto& b : report.best)
    for (const auto& r : report.rows) ok &= r.arch != b.arch || r.max_accuracy <= b.max_accuracy;
  ok &= json_rt && csv_rt;
  return {ok, fmt("%zu runs (LeNet5 %d, dropout NA), JSON round trip %s, CSV round trip %s", report.rows.size(), lenet,
                  json_rt ? "exact" : "differs", csv_rt ? "exact" : "differs")};
}

Outcome determinism() {
  const auto d = make_synthetic_dataset(60, 15, 9);
  TrainConfig c;
  c.arch = ArchId::AlexNetInspiredLeNet;
  c.epochs = 3;
  c.aug_type = 1;
  c.dropout = 0.3;
  c.seed = 99;
  c.strict_determinism = true;
  const auto a = train(c, d.train.crops, d.test.crops).history;
  const auto b = train(c, d.train.crops, d.test.crops).history;
  return {a == b && !a.epochs.empty(),
          fmt("two runs, %zu epochs each: histories %s (final loss %.17g)", a.epochs.size(),
              a == b ? "bit-identical" : "differ", a.train_loss.back())};
}

}  // namespace

int main() {
  set_log_level(LogLevel::Error);
  std::uint32_t epochs = 8;
  if (const char* e = std::getenv("TSVMORPH_E2E_EPOCHS")) epochs = static_cast<std::uint32_t>(std::stoul(e));

  criterion("augmentation arithmetic", 10, augmentation_arithmetic);
  criterion("shape traces", 1, shape_traces);
  criterion("gradient checks", 60, gradient_checks);
  criterion("numerical hygiene", 0, numerical_hygiene);
  criterion("cropper fidelity", 30, cropper_fidelity);
  criterion("sweep mechanics", 0, sweep_mechanics);
  criterion("determinism", 0, determinism);
  if (epochs > 50) {
    criterion("end-to-end surrogate", 0, [] { return Outcome{false, "budget above 50 epochs"}; });
  } else {
    criterion("end-to-end surrogate", 0, [&] { return end_to_end(epochs); });
  }
  std::printf("%d criteria failed\n", failures);
  return failures ? 1 : 0;
}
