#pragma once

#include "synthset/error.hpp"
#include "synthset/raster.hpp"
#include "synthset/selection.hpp"

#include <nlohmann/json.hpp>

#include <atomic>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <shared_mutex>
#include <span>
#include <string>
#include <thread>
#include <vector>

namespace synthset {

enum class Verdict { accept, reject };

std::string to_string(Verdict verdict);
/// Throws DataError on anything but "accept" / "reject".
Verdict parse_verdict(std::string_view text);

struct Decision {
  std::string candidate_id;
  Verdict verdict = Verdict::accept;
  std::string decided_at;  // ISO 8601 UTC
  std::string reviewer;

  bool operator==(const Decision&) const = default;
};

nlohmann::ordered_json to_json(const Decision& decision);
Decision decision_from_json(const nlohmann::json& j);

/// Every record of a decisions log, in file order. A missing file is an empty log.
std::vector<Decision> read_decision_log(const std::filesystem::path& path);

/// Last decision per candidate, ordered by candidate id.
std::vector<Decision> effective_decisions(std::span<const Decision> log);

/// Effective decisions of a log or export file.
std::vector<Decision> read_decisions(const std::filesystem::path& path);

std::set<std::string> accepted_ids(std::span<const Decision> decisions);

std::string decisions_jsonl(std::span<const Decision> decisions);

class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

struct ReviewCandidate {
  std::string id;
  SelectionScores scores;
  std::filesystem::path image_path;
};

enum class StatusFilter { all, undecided, accepted, rejected };

/// Throws DataError on an unknown filter name.
StatusFilter parse_status_filter(std::string_view text);

/// Longest side scaled down to `longest` pixels by area averaging; smaller images are kept.
RgbImage make_thumbnail(const RgbImage& image, int longest = 256);

/// Reviewable candidates plus the append-only decisions log. Readers run concurrently; writes
/// are serialized.
class ReviewStore {
 public:
  static constexpr std::size_t kMaxPageSize = 200;

  struct Entry {
    ReviewCandidate candidate;
    std::optional<Decision> decision;
  };

  struct Page {
    std::vector<Entry> items;
    std::size_t total = 0;  // matching candidates across all pages
    std::size_t page = 1;
    std::size_t page_size = 50;
  };

  /// Replays `log_path` if it exists. Thumbnails are cached under `thumbnail_dir`.
  ReviewStore(std::vector<ReviewCandidate> candidates, std::filesystem::path log_path,
              std::filesystem::path thumbnail_dir);

  /// Candidates ordered by id. `page` is 1-based; pages past the end are empty.
  /// Throws DataError when page < 1 or page_size is outside [1, 200].
  Page list(StatusFilter filter, std::size_t page, std::size_t page_size) const;

  /// Appends a decision stamped with the current time. Throws NotFoundError for ids that are
  /// not reviewable.
  Decision record(const std::string& candidate_id, Verdict verdict, const std::string& reviewer);

  std::vector<Decision> effective() const;
  std::size_t size() const { return candidates_.size(); }
  bool contains(const std::string& id) const { return candidates_.contains(id); }

  /// PNG bytes of the candidate's thumbnail. Throws NotFoundError for unknown ids.
  std::vector<std::uint8_t> thumbnail_png(const std::string& candidate_id) const;

 private:
  std::map<std::string, ReviewCandidate> candidates_;
  std::filesystem::path log_path_;
  std::filesystem::path thumbnail_dir_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, Decision> effective_;
  mutable std::mutex thumbnail_mutex_;
};

nlohmann::ordered_json to_json(const ReviewStore::Page& page);

/// HTTP front-end:
///   GET  /api/candidates?status=&page=&page_size=
///   GET  /api/candidates/{id}/thumbnail
///   POST /api/decisions        {candidate_id, verdict, reviewer}
///   GET  /api/export           effective decisions as JSON Lines
/// Errors are {"error": text} with status 400 or 404.
class ReviewServer {
 public:
  explicit ReviewServer(ReviewStore& store);
  ~ReviewServer();
  ReviewServer(const ReviewServer&) = delete;
  ReviewServer& operator=(const ReviewServer&) = delete;

  /// Serves on `host:port` until stop(); blocks the caller.
  bool listen(const std::string& host, int port);

  /// Binds an ephemeral port and serves from a background thread. Returns the port.
  int start(const std::string& host = "127.0.0.1");
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace synthset
