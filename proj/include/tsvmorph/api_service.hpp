#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <utility>

#include <json.hpp>

#include "tsvmorph/cropper.hpp"
#include "tsvmorph/manifest.hpp"

namespace httplib {
class Server;
}

namespace tsvmorph {

nlohmann::json to_json(const GridSpec& g);
/// Fields missing from `j` keep their value from `base`. Throws
/// Error(InvalidGrid) on non-integer fields.
GridSpec grid_from_json(const nlohmann::json& j, const GridSpec& base = {});

/// One cropping session: a mosaic, its grid and per-cell labels.
struct Session {
  struct CellLabel {
    std::optional<MorphologyLabel> label;
    std::optional<SoftLabel> soft_label;
  };

  std::string id;
  std::string source;  // prefix of crop source ids
  GrayImage image;
  GridSpec grid;
  double theta = kDefaultTheta;
  bool low_confidence = false;
  bool dirty = false;  // labels changed since the last export
  std::vector<CropRecord> crops;
  std::map<std::pair<int, int>, CellLabel> labels;  // keyed by (row, col)
  std::mutex mu;

  /// Re-cuts crops from image and grid, then re-applies stored labels.
  void recrop();
  std::size_t labeled_count() const;
};

/// Transport-independent request handling for the labeling service. All
/// mutations are appended to `{data_dir}/journal.jsonl` and replayed by the
/// constructor.
class ApiService {
 public:
  struct Request {
    std::string method;
    std::string path;
    std::map<std::string, std::string> query;
    std::string body;
  };
  struct Response {
    int status = 200;
    std::string content_type = "application/json";
    std::string body;
  };

  explicit ApiService(std::filesystem::path data_dir);
  ~ApiService();

  Response handle(const Request& req);

  /// Routes every endpoint of `server` to handle().
  void bind(httplib::Server& server);

  std::size_t session_count() const;
  const std::filesystem::path& data_dir() const { return data_dir_; }

 private:
  std::shared_ptr<Session> find(const std::string& id) const;
  void append_journal(const nlohmann::json& entry);
  void replay();

  Response create_session(const Request& req);
  Response get_session(Session& s);
  Response put_grid(Session& s, const Request& req);
  Response preview(Session& s, const Request& req);
  Response post_label(Session& s, std::size_t index, const Request& req);
  Response export_session(Session& s, const Request& req);

  std::filesystem::path data_dir_;
  mutable std::mutex mu_;  // guards sessions_, next_id_ and the journal file
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
  bool replaying_ = false;
};

/// Blocks serving on host:port until the process is stopped.
void serve(const std::filesystem::path& data_dir, const std::string& host, int port);

}  // namespace tsvmorph
