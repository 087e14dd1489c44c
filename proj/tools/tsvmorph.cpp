// tsvmorph: command-line front end for the via morphology pipeline.

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <thread>

#include <CLI11.hpp>
#include <json.hpp>

#include "tsvmorph/api_service.hpp"
#include "tsvmorph/architectures.hpp"
#include "tsvmorph/augmentation.hpp"
#include "tsvmorph/dataset.hpp"
#include "tsvmorph/error.hpp"
#include "tsvmorph/logging.hpp"
#include "tsvmorph/manifest.hpp"
#include "tsvmorph/sweep.hpp"
#include "tsvmorph/training.hpp"

namespace fs = std::filesystem;
using namespace tsvmorph;
using nlohmann::json;

namespace {

constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& flag) {
  if (flag) return *flag;
  if (const char* env = std::getenv("TSVMORPH_SEED")) {
    try {
      return std::stoull(env);
    } catch (const std::exception&) {
      throw UsageError("TSVMORPH_SEED must be an unsigned integer");
    }
  }
  return 1;
}

int default_workers() { return static_cast<int>(std::max(1u, std::thread::hardware_concurrency())); }

void write_text(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  out << text;
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
}

// "0-5" or "0,2,4" or "3".
std::vector<int> parse_int_axis(const std::string& text) {
  std::vector<int> out;
  try {
    if (auto dash = text.find('-'); dash != std::string::npos && dash > 0) {
      const int lo = std::stoi(text.substr(0, dash)), hi = std::stoi(text.substr(dash + 1));
      if (hi < lo) throw UsageError("empty range " + text);
      for (int v = lo; v <= hi; ++v) out.push_back(v);
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  } catch (const std::invalid_argument&) {
    throw UsageError("bad integer list '" + text + "'");
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

// "0.0-0.5" (inclusive, in steps of `step`) or "0.1,0.3".
std::vector<double> parse_real_axis(const std::string& text, double step) {
  std::vector<double> out;
  try {
    if (auto dash = text.find('-'); dash != std::string::npos && dash > 0) {
      const double lo = std::stod(text.substr(0, dash)), hi = std::stod(text.substr(dash + 1));
      if (hi < lo || step <= 0) throw UsageError("empty range " + text);
      const int n = static_cast<int>(std::floor((hi - lo) / step + 1e-9));
      for (int i = 0; i <= n; ++i) out.push_back(std::round((lo + i * step) * 1e9) / 1e9);
      return out;
    }
    std::stringstream ss(text);
    std::string item;
    while (std::getline(ss, item, ',')) out.push_back(std::stod(item));
  } catch (const std::invalid_argument&) {
    throw UsageError("bad number list '" + text + "'");
  }
  if (out.empty()) throw UsageError("empty list '" + text + "'");
  return out;
}

std::vector<ArchId> parse_archs(const std::string& text) {
  if (text == "all") return {kAllArchs.begin(), kAllArchs.end()};
  std::vector<ArchId> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    auto a = parse_arch(item);
    if (!a) throw UsageError("unknown architecture '" + item + "'");
    out.push_back(*a);
  }
  if (out.empty()) throw UsageError("no architectures given");
  return out;
}

ArchId parse_one_arch(const std::string& text) {
  auto a = parse_arch(text);
  if (!a) throw UsageError("unknown architecture '" + text + "'");
  return *a;
}

std::pair<int, int> parse_pair(const std::string& text, char sep, const char* what) {
  const auto pos = text.find(sep);
  try {
    if (pos == std::string::npos) throw std::invalid_argument(what);
    return {std::stoi(text.substr(0, pos)), std::stoi(text.substr(pos + 1))};
  } catch (const std::exception&) {
    throw UsageError(std::string(what) + " must look like A" + sep + "B, got '" + text + "'");
  }
}

GrayImage read_image(const fs::path& path) {
  auto ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".wli") return render_grayscale(read_wli_file(path));
  if (ext == ".png") return read_png(path);
  throw Error(Errc::UnsupportedImage, "expected a .png or .wli file: " + path.string());
}

json truth_json(const MosaicBox& b) {
  return {{"row", b.row}, {"col", b.col}, {"x0", b.box.x0}, {"y0", b.box.y0},
          {"x1", b.box.x1}, {"y1", b.box.y1}, {"label", std::string(to_string(b.label))}};
}

// Ground-truth labels keyed by (row, col) from a generate truth file.
std::map<std::pair<int, int>, MorphologyLabel> read_truth(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::Io, "cannot open " + path.string());
  std::map<std::pair<int, int>, MorphologyLabel> out;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto j = json::parse(line);
      auto label = parse_label(j.at("label").get<std::string>());
      if (!label) throw Error(Errc::InvalidLabel, "unknown label in " + path.string());
      out[{j.at("row").get<int>(), j.at("col").get<int>()}] = *label;
    } catch (const json::exception& e) {
      throw Error(Errc::BadManifest, path.string() + ": " + e.what());
    }
  }
  return out;
}

struct Loaded {
  std::vector<CropRecord> train, test;
};

Loaded load_manifest_splits(const fs::path& manifest) {
  const auto recs = read_manifest(manifest);
  const auto base = manifest.parent_path();
  return {load_records(recs, base, Split::Train), load_records(recs, base, Split::Test)};
}

void print_metrics(const Metrics& m) {
  std::printf("accuracy: %.4f  granular: %.4f  edge_ring: %.4f  edge_bulge: %.4f\n", m.total_accuracy,
              m.per_class_accuracy[0], m.per_class_accuracy[1], m.per_class_accuracy[2]);
  std::printf("confusion (rows true, cols predicted):\n");
  for (const auto& row : m.confusion)
    std::printf("  %6lld %6lld %6lld\n", static_cast<long long>(row[0]), static_cast<long long>(row[1]),
                static_cast<long long>(row[2]));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Via extrusion morphology: synthetic data, cropping, augmentation and CNN training"};
  app.require_subcommand(1);
  app.set_version_flag("--version", "tsvmorph 0.1.0");
  std::string log_level;
  app.add_option("--log", log_level, "debug|info|warn|error|off")->check(CLI::IsMember({"debug", "info", "warn", "error", "off"}));

  std::optional<std::uint64_t> seed_flag;
  auto add_seed = [&](CLI::App* sub) { sub->add_option("--seed", seed_flag, "Seed (falls back to TSVMORPH_SEED)"); };

  // generate
  auto* gen = app.add_subcommand("generate", "Synthetic mosaic with ground truth, optionally a labeled dataset");
  std::uint32_t gen_rows = 4, gen_cols = 5;
  int gen_gap = 6;
  std::size_t gen_train = 0, gen_test = 0;
  fs::path gen_out;
  gen->add_option("--rows", gen_rows, "Via rows")->check(CLI::Range(1, 200));
  gen->add_option("--cols", gen_cols, "Via columns")->check(CLI::Range(1, 200));
  gen->add_option("--gap", gen_gap, "Background pixels between vias")->check(CLI::Range(2, 100));
  gen->add_option("--train", gen_train, "Also write a labeled train split of this many crops");
  gen->add_option("--test", gen_test, "Also write a labeled test split of this many crops");
  gen->add_option("--out", gen_out, "Output directory")->required();
  add_seed(gen);

  // import
  auto* imp = app.add_subcommand("import", "Single-via PNG/WLI files or folders into a manifest");
  std::vector<fs::path> imp_inputs;
  std::string imp_split = "train", imp_label;
  fs::path imp_out;
  imp->add_option("inputs", imp_inputs, "Files or directories")->required();
  imp->add_option("--split", imp_split, "train|test")->check(CLI::IsMember({"train", "test"}));
  imp->add_option("--label", imp_label, "Label for every input (default: parent directory name)")
      ->check(CLI::IsMember({"granular", "edge_ring", "edge_bulge"}));
  imp->add_option("--out", imp_out, "Output directory")->required();

  // crop
  auto* crop = app.add_subcommand("crop", "Cut a mosaic into 54x54 crops");
  fs::path crop_in, crop_out, crop_truth;
  int crop_rows = 0, crop_cols = 0;
  double crop_theta = kDefaultTheta;
  std::string crop_offsets, crop_cell, crop_skew, crop_source, crop_split = "train";
  crop->add_option("input", crop_in, "Mosaic .png or .wli")->required()->check(CLI::ExistingFile);
  crop->add_option("--grid-rows", crop_rows, "Grid rows (auto-detected if omitted)")->check(CLI::PositiveNumber);
  crop->add_option("--grid-cols", crop_cols, "Grid columns (auto-detected if omitted)")->check(CLI::PositiveNumber);
  crop->add_option("--theta", crop_theta, "Intensity threshold above background")->check(CLI::NonNegativeNumber);
  crop->add_option("--offsets", crop_offsets, "Override grid origin as X,Y");
  crop->add_option("--cell", crop_cell, "Override cell size as WxH");
  crop->add_option("--skew", crop_skew, "Override grid skew as X,Y");
  crop->add_option("--source", crop_source, "Source name (default: input file stem)");
  crop->add_option("--split", crop_split, "train|test")->check(CLI::IsMember({"train", "test"}));
  crop->add_option("--truth", crop_truth, "Label crops from a generate truth file")->check(CLI::ExistingFile);
  crop->add_option("--out", crop_out, "Output directory")->required();

  // augment
  auto* aug = app.add_subcommand("augment", "Expand the train split by an augmentation type");
  fs::path aug_in, aug_out;
  int aug_type = 0;
  aug->add_option("manifest", aug_in, "Input manifest")->required()->check(CLI::ExistingFile);
  aug->add_option("--type", aug_type, "Augmentation type 0-5")->required()->check(CLI::Range(0, 5));
  aug->add_option("--out", aug_out, "Output directory")->required();

  // train
  auto* tr = app.add_subcommand("train", "Train one network on a manifest's train split");
  fs::path tr_in, tr_out;
  TrainConfig tcfg;
  std::string tr_arch = "VGGInspiredAlexNet";
  tr->add_option("manifest", tr_in, "Manifest with train and test splits")->required()->check(CLI::ExistingFile);
  tr->add_option("--arch", tr_arch, "LeNet5|AlexNetInspiredLeNet|AlexNet|VGGInspiredAlexNet");
  tr->add_option("--epochs", tcfg.epochs, "Epochs")->check(CLI::Range(1u, 100000u));
  tr->add_option("--aug", tcfg.aug_type, "Augmentation type 0-5")->check(CLI::Range(0, 5));
  tr->add_option("--dropout", tcfg.dropout, "Dropout rate in [0,1)");
  tr->add_option("--lr", tcfg.lr, "Initial learning rate");
  tr->add_option("--momentum", tcfg.momentum, "SGD momentum");
  tr->add_option("--batch", tcfg.batch_size, "Batch size");
  tr->add_option("--lr-halve-every", tcfg.lr_halve_every, "Halve the rate every N epochs (0: never)");
  tr->add_option("--out", tr_out, "Output directory")->required();
  add_seed(tr);

  // eval
  auto* ev = app.add_subcommand("eval", "Score a checkpoint on a manifest split");
  fs::path ev_ckpt, ev_in;
  std::string ev_split = "test";
  ev->add_option("checkpoint", ev_ckpt, "Checkpoint file")->required()->check(CLI::ExistingFile);
  ev->add_option("manifest", ev_in, "Manifest")->required()->check(CLI::ExistingFile);
  ev->add_option("--split", ev_split, "train|test")->check(CLI::IsMember({"train", "test"}));

  // sweep
  auto* sw = app.add_subcommand("sweep", "Train every architecture x augmentation x dropout cell");
  fs::path sw_in, sw_out = "sweep";
  std::string sw_archs = "all", sw_aug = "0-5", sw_drop = "0.0-0.5";
  double sw_step = 0.1;
  TrainConfig scfg;
  int sw_workers = default_workers();
  sw->add_option("manifest", sw_in, "Manifest with train and test splits")->required()->check(CLI::ExistingFile);
  sw->add_option("--archs", sw_archs, "all or a comma list");
  sw->add_option("--aug", sw_aug, "Range like 0-5 or a comma list");
  sw->add_option("--dropout", sw_drop, "Range like 0.0-0.5 or a comma list");
  sw->add_option("--dropout-step", sw_step, "Step for dropout ranges");
  sw->add_option("--epochs", scfg.epochs, "Epochs per cell")->check(CLI::Range(1u, 100000u));
  sw->add_option("--lr", scfg.lr, "Initial learning rate");
  sw->add_option("--batch", scfg.batch_size, "Batch size");
  sw->add_option("--workers", sw_workers, "Cells trained in parallel")->check(CLI::PositiveNumber);
  sw->add_option("--out", sw_out, "Output directory");
  add_seed(sw);

  // describe
  auto* desc = app.add_subcommand("describe", "Print an architecture's layer table and shape trace");
  std::string desc_arch = "all";
  desc->add_option("--arch", desc_arch, "Architecture name or all");

  // serve
  auto* srv = app.add_subcommand("serve", "Run the labeling HTTP service");
  int srv_port = 8080;
  std::string srv_host = "127.0.0.1";
  fs::path srv_data = "tsvmorph-data";
  srv->add_option("--port", srv_port, "TCP port")->check(CLI::Range(1, 65535));
  srv->add_option("--host", srv_host, "Bind address");
  srv->add_option("--data", srv_data, "Session and export directory");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitUsage;
  }

  if (log_level == "debug") set_log_level(LogLevel::Debug);
  else if (log_level == "info") set_log_level(LogLevel::Info);
  else if (log_level == "warn") set_log_level(LogLevel::Warn);
  else if (log_level == "error") set_log_level(LogLevel::Error);
  else if (log_level == "off") set_log_level(LogLevel::Off);

  try {
    if (*gen) {
      GenParams p;
      p.seed = resolve_seed(seed_flag);
      std::vector<MorphologyLabel> labels;
      std::mt19937_64 rng(derive_seed(p.seed, 99));
      std::uniform_int_distribution<int> pick(0, 2);
      for (std::uint32_t i = 0; i < gen_rows * gen_cols; ++i) labels.push_back(kAllLabels[pick(rng)]);
      const auto m = generate_mosaic(gen_rows, gen_cols, labels, p, gen_gap);
      fs::create_directories(gen_out);
      write_wli_file(gen_out / "mosaic.wli", m.heightmap);
      write_png(gen_out / "mosaic.png", render_grayscale(m.heightmap));
      std::string truth;
      for (const auto& b : m.boxes) truth += truth_json(b).dump() + "\n";
      write_text(gen_out / "truth.jsonl", truth);
      log(LogLevel::Info, "wrote " + std::to_string(m.boxes.size()) + " vias to " + gen_out.string());

      if (gen_train > 0 || gen_test > 0) {
        if (gen_train == 0 || gen_test == 0) throw UsageError("--train and --test must be given together");
        const auto d = make_synthetic_dataset(gen_train, gen_test, p.seed);
        const fs::path dir = gen_out / "dataset";
        auto recs = export_crops(d.train.crops, dir, Split::Train);
        const auto test = export_crops(d.test.crops, dir, Split::Test);
        recs.insert(recs.end(), test.begin(), test.end());
        write_manifest(dir / "manifest.jsonl", recs);
        log(LogLevel::Info, "wrote " + std::to_string(recs.size()) + " labeled crops to " + dir.string());
      }
      return 0;
    }

    if (*imp) {
      const Split split = *parse_split(imp_split);
      std::vector<fs::path> files;
      for (const auto& in : imp_inputs) {
        if (fs::is_directory(in)) {
          for (const auto& e : fs::recursive_directory_iterator(in))
            if (e.is_regular_file()) files.push_back(e.path());
        } else if (fs::exists(in)) {
          files.push_back(in);
        } else {
          throw Error(Errc::Io, "no such file: " + in.string());
        }
      }
      std::sort(files.begin(), files.end());
      std::vector<CropRecord> crops;
      std::set<std::string> ids;
      for (const auto& f : files) {
        auto ext = f.extension().string();
        std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
        if (ext != ".png" && ext != ".wli") continue;
        GrayImage img = read_image(f);
        if (img.width() > kCropSize || img.height() > kCropSize)
          throw Error(Errc::WrongSize, f.string() + " is larger than 54x54; crop the mosaic instead");
        if (img.width() != kCropSize || img.height() != kCropSize)
          img = crop_centered(img, Box{0, 0, static_cast<int>(img.width()), static_cast<int>(img.height())});
        CropRecord r;
        r.image = std::move(img);
        r.source_id = f.parent_path().filename().string() + "_" + f.stem().string();
        if (!ids.insert(r.source_id).second) throw Error(Errc::BadManifest, "duplicate source id " + r.source_id);
        const auto label = parse_label(imp_label.empty() ? f.parent_path().filename().string() : imp_label);
        if (label) assign_label(r, label, std::nullopt);
        crops.push_back(std::move(r));
      }
      if (crops.empty()) throw Error(Errc::Io, "no .png or .wli inputs found");
      write_manifest(imp_out / "manifest.jsonl", export_crops(crops, imp_out, split));
      log(LogLevel::Info, "imported " + std::to_string(crops.size()) + " images");
      return 0;
    }

    if (*crop) {
      if ((crop_rows > 0) != (crop_cols > 0)) throw UsageError("--grid-rows and --grid-cols go together");
      const GrayImage img = read_image(crop_in);
      int rows = crop_rows, cols = crop_cols;
      if (rows == 0) {
        std::tie(rows, cols) = detect_grid_dims(img, crop_theta);
        if (rows == 0) throw Error(Errc::InvalidGrid, "no vias detected; pass --grid-rows/--grid-cols");
        log(LogLevel::Info, "detected a " + std::to_string(rows) + "x" + std::to_string(cols) + " grid");
      }
      auto est = estimate_grid(img, rows, cols, crop_theta);
      if (est.low_confidence) log(LogLevel::Warn, "grid estimate is low-confidence; check the crops");
      GridSpec g = est.grid;
      if (!crop_offsets.empty()) std::tie(g.x_offset, g.y_offset) = parse_pair(crop_offsets, ',', "--offsets");
      if (!crop_cell.empty()) std::tie(g.cell_width, g.cell_height) = parse_pair(crop_cell, 'x', "--cell");
      if (!crop_skew.empty()) std::tie(g.x_skew, g.y_skew) = parse_pair(crop_skew, ',', "--skew");
      g.validate(img.width(), img.height());
      const std::string source = crop_source.empty() ? crop_in.stem().string() : crop_source;
      auto crops = crop_mosaic(img, g, crop_theta, source);
      if (!crop_truth.empty()) {
        const auto truth = read_truth(crop_truth);
        for (auto& c : crops)
          if (auto it = truth.find({c.row, c.col}); it != truth.end()) assign_label(c, it->second, std::nullopt);
      }
      write_manifest(crop_out / "manifest.jsonl", export_crops(crops, crop_out, *parse_split(crop_split)));
      write_text(crop_out / "grid.json", to_json(g).dump(2) + "\n");
      log(LogLevel::Info, "wrote " + std::to_string(crops.size()) + " crops to " + crop_out.string());
      return 0;
    }

    if (*aug) {
      auto [train, test] = load_manifest_splits(aug_in);
      const auto expanded = augment_manifest(train, aug_type);
      auto recs = export_crops(expanded, aug_out, Split::Train);
      const auto t = export_crops(test, aug_out, Split::Test);
      recs.insert(recs.end(), t.begin(), t.end());
      write_manifest(aug_out / "manifest.jsonl", recs);
      log(LogLevel::Info, "augmented " + std::to_string(train.size()) + " train records to " +
                              std::to_string(expanded.size()));
      return 0;
    }

    if (*tr) {
      tcfg.arch = parse_one_arch(tr_arch);
      tcfg.seed = resolve_seed(seed_flag);
      tcfg.checkpoint = tr_out / "model.ckpt";
      tcfg.validate();
      auto [train_set, test_set] = load_manifest_splits(tr_in);
      auto result = train(tcfg, train_set, test_set, [](const Metrics& m, double loss) {
        char line[128];
        std::snprintf(line, sizeof line, "epoch %u loss %.5f test accuracy %.4f", m.epoch, loss, m.total_accuracy);
        log(LogLevel::Info, line);
      });
      write_text(tr_out / "history.json", to_json(result.history).dump(2) + "\n");
      std::printf("best epoch %u\n", result.history.best_epoch);
      print_metrics(result.history.epochs[result.history.best_epoch - 1]);
      return 0;
    }

    if (*ev) {
      auto loaded = load_checkpoint(ev_ckpt);
      const auto recs = read_manifest(ev_in);
      const auto data = load_records(recs, ev_in.parent_path(), parse_split(ev_split));
      const Metrics m = evaluate(loaded.model, data);
      print_metrics(m);
      return 0;
    }

    if (*sw) {
      const auto archs = parse_archs(sw_archs);
      const auto augs = parse_int_axis(sw_aug);
      for (int a : augs)
        if (a < 0 || a > 5) throw UsageError("augmentation types are 0-5");
      const auto drops = parse_real_axis(sw_drop, sw_step);
      scfg.seed = resolve_seed(seed_flag);
      auto [train_set, test_set] = load_manifest_splits(sw_in);
      const auto cells = sweep_cells(archs, augs, drops, scfg);
      log(LogLevel::Info, std::to_string(cells.size()) + " sweep cells on " + std::to_string(sw_workers) + " workers");
      const auto report = sweep(archs, augs, drops, scfg,
                                [&](const TrainConfig& c) {
                                  auto h = train(c, train_set, test_set).history;
                                  char line[160];
                                  std::snprintf(line, sizeof line, "cell %s aug %d dropout %.2f: max accuracy %.4f",
                                                std::string(to_string(c.arch)).c_str(), c.aug_type, c.dropout,
                                                h.max_total_accuracy);
                                  log(LogLevel::Info, line);
                                  return h;
                                },
                                sw_workers);
      write_text(sw_out / "sweep.json", to_json(report.rows).dump(2) + "\n");
      write_text(sw_out / "sweep.csv", to_csv(report.rows));
      write_text(sw_out / "best.json", to_json(report.best).dump(2) + "\n");
      const auto summary = render_summary(report);
      write_text(sw_out / "summary.txt", summary);
      std::fputs(summary.c_str(), stdout);
      return 0;
    }

    if (*desc) {
      const auto archs = parse_archs(desc_arch);
      for (std::size_t i = 0; i < archs.size(); ++i) {
        if (i) std::fputs("\n", stdout);
        std::fputs(describe_architecture(build(archs[i])).c_str(), stdout);
      }
      return 0;
    }

    if (*srv) {
      serve(srv_data, srv_host, srv_port);
      return 0;
    }
  } catch (const UsageError& e) {
    std::cerr << "usage error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const Error& e) {
    log(LogLevel::Error, std::string(to_string(e.code())) + ": " + e.what());
    return e.code() == Errc::InvalidConfig ? kExitUsage : kExitData;
  } catch (const std::exception& e) {
    log(LogLevel::Error, e.what());
    return kExitData;
  }
  return kExitUsage;
}
