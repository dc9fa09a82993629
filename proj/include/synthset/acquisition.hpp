#pragma once

#include "synthset/common.hpp"
#include "synthset/error.hpp"

#include <nlohmann/json.hpp>

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <map>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace synthset {

enum class Engine { google, bing, yahoo, baidu };
enum class Language { en, de, zh };

std::string to_string(Engine engine);
std::string to_string(Language language);
Engine parse_engine(std::string_view text);
Language parse_language(std::string_view text);

struct QueryTask {
  Engine engine = Engine::google;
  std::string query;
  Language language = Language::en;
  Role role = Role::object;

  bool operator==(const QueryTask&) const = default;
};

/// Which (engine, language) pairs each role is searched with, in expansion order.
struct EnginePolicy {
  std::vector<std::pair<Engine, Language>> object{
      {Engine::google, Language::en}, {Engine::google, Language::de},
      {Engine::bing, Language::en},   {Engine::bing, Language::de},
      {Engine::yahoo, Language::en},  {Engine::yahoo, Language::de},
      {Engine::baidu, Language::zh}};
  std::vector<std::pair<Engine, Language>> distractor{{Engine::google, Language::en},
                                                      {Engine::google, Language::de}};

  /// Throws ConfigError when an object pair uses Baidu with a language other than Chinese.
  void validate() const;
};

/// The nine English parcel phrases used as default object queries.
const std::vector<std::string>& default_object_queries();

/// Static phrase lookup; unknown phrases pass through unchanged with a logged warning.
std::vector<std::string> translate_queries(std::span<const std::string> queries, Language target,
                                           std::vector<std::string>* untranslated = nullptr);

/// One task per (engine, language) pair of the role's policy and per query, translated to the
/// pair's language. Objects precede distractors; within a role the order is engine, language,
/// query index. Throws ConfigError("no queries") when both lists are empty.
std::vector<QueryTask> expand_queries(std::span<const std::string> object_queries,
                                      std::span<const std::string> distractor_queries,
                                      const EnginePolicy& policy = {});

/// k names sampled without replacement, deterministic in `seed`.
std::vector<std::string> sample_distractor_categories(std::span<const std::string> categories,
                                                      std::size_t k, std::uint64_t seed);

/// Non-empty, trimmed lines of a text file.
std::vector<std::string> read_lines(const std::filesystem::path& path);

class FetchError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Source of search results and image bytes. Implementations throw FetchError on failure.
class Fetcher {
 public:
  virtual ~Fetcher() = default;
  virtual std::vector<std::string> search(const QueryTask& task, std::size_t limit) = 0;
  virtual std::vector<std::uint8_t> download(const std::string& url) = 0;
  /// Rate-limiter key for search requests.
  virtual std::string search_host() const { return "search"; }
};

/// Plain-HTTP fetcher. Search requests go to `<base>/search?engine=&lang=&role=&q=&limit=` and
/// must answer with a JSON array of image URLs; downloads are plain GETs of those URLs.
class HttpFetcher : public Fetcher {
 public:
  explicit HttpFetcher(std::string base_url,
                       std::chrono::milliseconds timeout = std::chrono::seconds(30));
  std::vector<std::string> search(const QueryTask& task, std::size_t limit) override;
  std::vector<std::uint8_t> download(const std::string& url) override;
  std::string search_host() const override;

  const std::string& base_url() const { return base_url_; }

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// "http://host:port/path" -> {"http://host:port", "/path"}. Throws FetchError otherwise.
std::pair<std::string, std::string> split_url(const std::string& url);

/// Minimum spacing between request starts to the same host, shared across threads.
class RateLimiter {
 public:
  explicit RateLimiter(std::chrono::milliseconds min_interval = std::chrono::seconds(1))
      : min_interval_(min_interval) {}

  /// Blocks until a request to `host` may start.
  void acquire(const std::string& host);

 private:
  std::chrono::milliseconds min_interval_;
  std::mutex mutex_;
  std::map<std::string, std::chrono::steady_clock::time_point> next_slot_;
};

struct FetchPolicy {
  std::size_t limit = 500;
  int retries = 2;
  std::chrono::milliseconds backoff{500};  // doubled after each failed attempt
};

struct Download {
  std::string url;
  std::vector<std::uint8_t> bytes;
};

struct SkippedDownload {
  std::string url;
  std::string reason;
};

struct FetchOutcome {
  std::vector<Download> downloads;
  std::vector<SkippedDownload> skipped;
};

/// Fetches up to `policy.limit` results for one task. Failed downloads are retried and then
/// recorded as skipped; a failing search request yields an outcome with one skip entry.
FetchOutcome fetch_task(const QueryTask& task, Fetcher& fetcher, RateLimiter& limiter,
                        const FetchPolicy& policy = {});

enum class CandidateStatus { raw, matted, selected, rejected };

std::string to_string(CandidateStatus status);
CandidateStatus parse_status(std::string_view text);

struct CandidateImage {
  std::string id;  // SHA-256 of the bytes, lowercase hex
  std::string source_url;
  QueryTask task;
  std::uint64_t byte_length = 0;
  std::string fetched_at;  // ISO 8601 UTC
  std::string extension;   // jpg, png or webp
  CandidateStatus status = CandidateStatus::raw;
  std::optional<std::string> reject_reason;
};

nlohmann::ordered_json to_json(const CandidateImage& record);
CandidateImage candidate_from_json(const nlohmann::json& j);

std::string sha256_hex(std::span<const std::uint8_t> bytes);
std::string utc_timestamp();

/// Append-only JSON Lines manifest plus the image store directory it indexes. Each record's
/// bytes live at `<store>/<id>.<ext>`. Thread-safe.
class Manifest {
 public:
  Manifest(std::filesystem::path manifest_path, std::filesystem::path store_dir);

  /// Stores the bytes and appends the record unless its id is already present.
  bool append(const CandidateImage& record, std::span<const std::uint8_t> bytes);

  /// Moves a record forward in its lifecycle (raw -> matted -> selected/rejected, or straight to
  /// rejected). Rewrites the manifest atomically. Throws DataError on a backward transition.
  void update_status(const std::string& id, CandidateStatus status,
                     std::optional<std::string> reason = std::nullopt);

  std::vector<CandidateImage> records() const;
  std::optional<CandidateImage> find(const std::string& id) const;
  std::size_t size() const;
  bool contains(const std::string& id) const;

  std::filesystem::path image_path(const CandidateImage& record) const;
  const std::filesystem::path& store_dir() const { return store_dir_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  void rewrite_locked() const;

  std::filesystem::path path_;
  std::filesystem::path store_dir_;
  mutable std::mutex mutex_;
  std::vector<CandidateImage> records_;
  std::map<std::string, std::size_t> index_;
};

/// Hashes, deduplicates and records downloads for a task. Duplicate bytes are recorded once
/// (first provenance wins). Empty or unrecognized payloads are skipped with a reason.
std::size_t dedupe_and_record(std::span<const Download> downloads, const QueryTask& task,
                              Manifest& manifest, std::vector<SkippedDownload>* skipped = nullptr);

struct ScrapeSummary {
  std::size_t tasks = 0;
  std::size_t downloaded = 0;
  std::size_t new_records = 0;
  std::vector<SkippedDownload> skipped;
};

/// Runs fetch_task + dedupe_and_record over all tasks with up to `jobs` threads. Records are
/// appended in task order so the manifest does not depend on scheduling.
ScrapeSummary scrape(std::span<const QueryTask> tasks, Fetcher& fetcher, RateLimiter& limiter,
                     Manifest& manifest, const FetchPolicy& policy, unsigned jobs);

}  // namespace synthset
