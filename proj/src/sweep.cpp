#include "tsvmorph/sweep.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "tsvmorph/error.hpp"

namespace tsvmorph {

namespace {

std::string dropout_text(const std::optional<double>& d) {
  if (!d) return "NA";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", *d);
  return buf;
}

std::string fixed_dropout(double d) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%.2f", d);
  return buf;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) out.push_back(field);
  if (!line.empty() && line.back() == ',') out.emplace_back();
  return out;
}

}  // namespace

std::vector<TrainConfig> sweep_cells(std::span<const ArchId> archs, std::span<const int> aug_types,
                                     std::span<const double> dropouts, const TrainConfig& base) {
  std::vector<TrainConfig> cells;
  for (auto arch : archs) {
    const bool has_dropout = build(arch).has_dropout();
    for (int aug : aug_types) {
      if (!has_dropout) {
        TrainConfig c = base;
        c.arch = arch;
        c.aug_type = aug;
        c.dropout = 0.0;
        cells.push_back(c);
        continue;
      }
      for (double d : dropouts) {
        TrainConfig c = base;
        c.arch = arch;
        c.aug_type = aug;
        c.dropout = d;
        cells.push_back(c);
      }
    }
  }
  return cells;
}

SweepReport sweep(std::span<const ArchId> archs, std::span<const int> aug_types, std::span<const double> dropouts,
                  const TrainConfig& base, const CellRunner& runner, int workers) {
  if (archs.empty() || aug_types.empty() || dropouts.empty())
    throw Error(Errc::InvalidConfig, "sweep axes must be non-empty");
  const auto cells = sweep_cells(archs, aug_types, dropouts, base);
  for (const auto& c : cells) c.validate();

  std::vector<SweepRow> rows(cells.size());
  std::atomic<std::size_t> next{0};
  std::exception_ptr failure;
  std::mutex failure_mu;

  auto work = [&] {
    for (std::size_t i = next++; i < cells.size(); i = next++) {
      {
        std::lock_guard lock(failure_mu);
        if (failure) return;
      }
      try {
        const auto& c = cells[i];
        const History h = runner(c);
        rows[i] = SweepRow{c.arch, c.aug_type, build(c.arch).has_dropout() ? std::optional(c.dropout) : std::nullopt,
                           h.max_total_accuracy, h.best_epoch};
      } catch (...) {
        std::lock_guard lock(failure_mu);
        if (!failure) failure = std::current_exception();
      }
    }
  };

  const int n = std::max(1, std::min<int>(workers, static_cast<int>(cells.size())));
  if (n == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    for (int t = 0; t < n; ++t) pool.emplace_back(work);
  }
  if (failure) std::rethrow_exception(failure);

  SweepReport report;
  report.rows = std::move(rows);
  report.best = best_per_arch(report.rows);
  return report;
}

std::vector<SweepRow> best_per_arch(std::span<const SweepRow> rows) {
  std::vector<SweepRow> best;
  for (const auto& r : rows) {
    auto it = std::find_if(best.begin(), best.end(), [&](const SweepRow& b) { return b.arch == r.arch; });
    if (it == best.end())
      best.push_back(r);
    else if (r.max_accuracy > it->max_accuracy)
      *it = r;
  }
  return best;
}

nlohmann::json to_json(std::span<const SweepRow> rows) {
  nlohmann::json out = nlohmann::json::array();
  for (const auto& r : rows) {
    nlohmann::ordered_json j;
    j["arch"] = std::string(to_string(r.arch));
    j["aug_type"] = r.aug_type;
    j["dropout"] = r.dropout ? nlohmann::ordered_json(*r.dropout) : nlohmann::ordered_json(nullptr);
    j["max_accuracy"] = r.max_accuracy;
    j["best_epoch"] = r.best_epoch;
    out.push_back(nlohmann::json::parse(j.dump()));
  }
  return out;
}

std::vector<SweepRow> rows_from_json(const nlohmann::json& j) {
  if (!j.is_array()) throw Error(Errc::BadManifest, "sweep report must be a JSON array");
  std::vector<SweepRow> rows;
  try {
    for (const auto& e : j) {
      SweepRow r;
      auto arch = parse_arch(e.at("arch").get<std::string>());
      if (!arch) throw Error(Errc::BadManifest, "unknown architecture in sweep report");
      r.arch = *arch;
      r.aug_type = e.at("aug_type").get<int>();
      if (!e.at("dropout").is_null()) r.dropout = e.at("dropout").get<double>();
      r.max_accuracy = e.at("max_accuracy").get<double>();
      r.best_epoch = e.at("best_epoch").get<std::uint32_t>();
      rows.push_back(r);
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(Errc::BadManifest, std::string("malformed sweep report: ") + e.what());
  }
  return rows;
}

std::string to_csv(std::span<const SweepRow> rows) {
  std::ostringstream out;
  out << "arch,aug_type,dropout,max_accuracy,best_epoch\n";
  char acc[32];
  for (const auto& r : rows) {
    std::snprintf(acc, sizeof acc, "%.17g", r.max_accuracy);
    out << to_string(r.arch) << ',' << r.aug_type << ',' << dropout_text(r.dropout) << ',' << acc << ','
        << r.best_epoch << '\n';
  }
  return out.str();
}

std::vector<SweepRow> rows_from_csv(const std::string& csv) {
  std::istringstream in(csv);
  std::string line;
  if (!std::getline(in, line) || line.rfind("arch,", 0) != 0)
    throw Error(Errc::BadManifest, "sweep CSV is missing its header");
  std::vector<SweepRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = split_csv_line(line);
    if (f.size() != 5) throw Error(Errc::BadManifest, "sweep CSV row needs 5 fields: " + line);
    SweepRow r;
    auto arch = parse_arch(f[0]);
    if (!arch) throw Error(Errc::BadManifest, "unknown architecture '" + f[0] + "'");
    r.arch = *arch;
    try {
      r.aug_type = std::stoi(f[1]);
      if (f[2] != "NA") r.dropout = std::stod(f[2]);
      r.max_accuracy = std::stod(f[3]);
      r.best_epoch = static_cast<std::uint32_t>(std::stoul(f[4]));
    } catch (const std::exception&) {
      throw Error(Errc::BadManifest, "bad number in sweep CSV row: " + line);
    }
    rows.push_back(r);
  }
  return rows;
}

std::string render_summary(const SweepReport& report) {
  std::ostringstream out;
  char line[160];
  auto put = [&](const SweepRow& r) {
    std::snprintf(line, sizeof line, "%-22s %3d %7s %8.2f%% %6u\n", std::string(to_string(r.arch)).c_str(),
                  r.aug_type, r.dropout ? fixed_dropout(*r.dropout).c_str() : "NA",
                  100.0 * r.max_accuracy, r.best_epoch);
    out << line;
  };
  std::snprintf(line, sizeof line, "%-22s %3s %7s %9s %6s\n", "arch", "aug", "dropout", "max_acc", "epoch");
  const std::string header = line;
  out << header;
  for (const auto& r : report.rows) put(r);
  out << "\nbest per architecture\n" << header;
  for (const auto& r : report.best) put(r);
  return out.str();
}

}  // namespace tsvmorph
