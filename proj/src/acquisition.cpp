#include "synthset/acquisition.hpp"

#include "synthset/image_io.hpp"
#include "synthset/parallel.hpp"
#include "synthset/rng.hpp"

#include <httplib.h>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include <algorithm>
#include <ctime>
#include <fstream>
#include <thread>

namespace synthset {

std::string to_string(Engine engine) {
  switch (engine) {
    case Engine::google: return "google";
    case Engine::bing: return "bing";
    case Engine::yahoo: return "yahoo";
    case Engine::baidu: return "baidu";
  }
  return {};
}

std::string to_string(Language language) {
  switch (language) {
    case Language::en: return "en";
    case Language::de: return "de";
    case Language::zh: return "zh";
  }
  return {};
}

Engine parse_engine(std::string_view text) {
  for (Engine e : {Engine::google, Engine::bing, Engine::yahoo, Engine::baidu})
    if (to_string(e) == text) return e;
  throw DataError("unknown engine '" + std::string(text) + "'");
}

Language parse_language(std::string_view text) {
  for (Language l : {Language::en, Language::de, Language::zh})
    if (to_string(l) == text) return l;
  throw DataError("unknown language '" + std::string(text) + "'");
}

void EnginePolicy::validate() const {
  for (const auto& [engine, language] : object)
    if (engine == Engine::baidu && language != Language::zh)
      throw ConfigError("baidu object queries must be in Chinese");
}

const std::vector<std::string>& default_object_queries() {
  static const std::vector<std::string> queries{
      "parcel",      "parcel package", "parcel amazon", "packet post",  "packing carton",
      "packing box", "carton box",     "shipping box",  "pallet carton"};
  return queries;
}

namespace {

struct Translation {
  const char* en;
  const char* de;
  const char* zh;
};

constexpr Translation kPhrasebook[] = {
    {"parcel", "Paket", "包裹"},
    {"parcel package", "Paketsendung", "包裹包装"},
    {"parcel amazon", "Paket Amazon", "亚马逊包裹"},
    {"packet post", "Päckchen Post", "邮政包裹"},
    {"packing carton", "Verpackungskarton", "包装纸箱"},
    {"packing box", "Packkiste", "包装盒"},
    {"carton box", "Kartonbox", "纸箱"},
    {"shipping box", "Versandkarton", "运输箱"},
    {"pallet carton", "Palettenkarton", "托盘纸箱"},
};

}  // namespace

std::vector<std::string> translate_queries(std::span<const std::string> queries, Language target,
                                           std::vector<std::string>* untranslated) {
  std::vector<std::string> out;
  out.reserve(queries.size());
  for (const auto& q : queries) {
    if (target == Language::en) {
      out.push_back(q);
      continue;
    }
    const auto it = std::find_if(std::begin(kPhrasebook), std::end(kPhrasebook),
                                 [&](const Translation& t) { return q == t.en; });
    if (it == std::end(kPhrasebook)) {
      spdlog::warn("no {} translation for '{}', using it unchanged", to_string(target), q);
      if (untranslated) untranslated->push_back(q);
      out.push_back(q);
    } else {
      out.emplace_back(target == Language::de ? it->de : it->zh);
    }
  }
  return out;
}

std::vector<QueryTask> expand_queries(std::span<const std::string> object_queries,
                                      std::span<const std::string> distractor_queries,
                                      const EnginePolicy& policy) {
  if (object_queries.empty() && distractor_queries.empty()) throw ConfigError("no queries");
  policy.validate();
  std::vector<QueryTask> tasks;
  const auto expand = [&](std::span<const std::string> queries,
                          const std::vector<std::pair<Engine, Language>>& pairs, Role role) {
    for (const auto& [engine, language] : pairs) {
      const auto translated = translate_queries(queries, language);
      for (const auto& q : translated) {
        if (q.empty()) throw ConfigError("empty query");
        tasks.push_back({engine, q, language, role});
      }
    }
  };
  expand(object_queries, policy.object, Role::object);
  expand(distractor_queries, policy.distractor, Role::distractor);
  return tasks;
}

std::vector<std::string> sample_distractor_categories(std::span<const std::string> categories,
                                                      std::size_t k, std::uint64_t seed) {
  if (k > categories.size())
    throw ConfigError("cannot sample " + std::to_string(k) + " of " +
                      std::to_string(categories.size()) + " categories");
  std::vector<std::string> pool(categories.begin(), categories.end());
  CounterRng rng(mix64(seed ^ fnv1a64("distractor-categories")));
  // Partial Fisher-Yates: the first k slots hold the sample.
  for (std::size_t i = 0; i < k; ++i) {
    const auto j = static_cast<std::size_t>(rng.uniform_int(static_cast<std::int64_t>(i),
                                                            static_cast<std::int64_t>(pool.size()) - 1));
    std::swap(pool[i], pool[j]);
  }
  pool.resize(k);
  return pool;
}

std::vector<std::string> read_lines(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open " + path.string());
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    const auto first = line.find_first_not_of(" \t\r");
    if (first == std::string::npos) continue;
    const auto last = line.find_last_not_of(" \t\r");
    lines.push_back(line.substr(first, last - first + 1));
  }
  return lines;
}

std::pair<std::string, std::string> split_url(const std::string& url) {
  const std::string scheme = "http://";
  if (url.rfind(scheme, 0) != 0) throw FetchError("only plain http URLs are supported: " + url);
  const auto slash = url.find('/', scheme.size());
  if (slash == std::string::npos) return {url, "/"};
  return {url.substr(0, slash), url.substr(slash)};
}

HttpFetcher::HttpFetcher(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {
  while (!base_url_.empty() && base_url_.back() == '/') base_url_.pop_back();
}

namespace {

httplib::Result http_get(const std::string& url, const httplib::Params& params,
                         std::chrono::milliseconds timeout) {
  const auto [origin, path] = split_url(url);
  httplib::Client client(origin);
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_follow_location(true);
  return client.Get(path, params, httplib::Headers{});
}

}  // namespace

std::vector<std::string> HttpFetcher::search(const QueryTask& task, std::size_t limit) {
  const httplib::Params params{{"engine", to_string(task.engine)},
                               {"lang", to_string(task.language)},
                               {"role", to_string(task.role)},
                               {"q", task.query},
                               {"limit", std::to_string(limit)}};
  auto res = http_get(base_url_ + "/search", params, timeout_);
  if (!res) throw FetchError("search request failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw FetchError("search returned HTTP " + std::to_string(res->status));
  try {
    const auto j = nlohmann::json::parse(res->body);
    return j.get<std::vector<std::string>>();
  } catch (const nlohmann::json::exception& e) {
    throw FetchError(std::string("malformed result page: ") + e.what());
  }
}

std::vector<std::uint8_t> HttpFetcher::download(const std::string& url) {
  auto res = http_get(url, {}, timeout_);
  if (!res) throw FetchError("download failed: " + httplib::to_string(res.error()));
  if (res->status != 200) throw FetchError("download returned HTTP " + std::to_string(res->status));
  return {res->body.begin(), res->body.end()};
}

std::string HttpFetcher::search_host() const { return split_url(base_url_).first; }

void RateLimiter::acquire(const std::string& host) {
  std::chrono::steady_clock::time_point slot;
  {
    std::lock_guard lock(mutex_);
    const auto now = std::chrono::steady_clock::now();
    auto& next = next_slot_[host];
    slot = std::max(now, next);
    next = slot + min_interval_;
  }
  std::this_thread::sleep_until(slot);
}

namespace {

std::string host_of(const std::string& url) {
  try {
    return split_url(url).first;
  } catch (const FetchError&) {
    return url;
  }
}

}  // namespace

FetchOutcome fetch_task(const QueryTask& task, Fetcher& fetcher, RateLimiter& limiter,
                        const FetchPolicy& policy) {
  if (policy.limit < 1) throw ConfigError("result limit must be >= 1");
  FetchOutcome outcome;
  std::vector<std::string> urls;
  try {
    limiter.acquire(fetcher.search_host());
    urls = fetcher.search(task, policy.limit);
  } catch (const FetchError& e) {
    outcome.skipped.push_back({"search:" + task.query, e.what()});
    return outcome;
  }
  if (urls.size() > policy.limit) urls.resize(policy.limit);

  for (const auto& url : urls) {
    auto backoff = policy.backoff;
    std::string last_error;
    bool ok = false;
    for (int attempt = 0; attempt <= policy.retries; ++attempt) {
      if (attempt > 0) {
        std::this_thread::sleep_for(backoff);
        backoff *= 2;
      }
      try {
        limiter.acquire(host_of(url));
        outcome.downloads.push_back({url, fetcher.download(url)});
        ok = true;
        break;
      } catch (const FetchError& e) {
        last_error = e.what();
      }
    }
    if (!ok)
      outcome.skipped.push_back({url, "failed after " + std::to_string(policy.retries + 1) +
                                          " attempts: " + last_error});
  }
  return outcome;
}

std::string to_string(CandidateStatus status) {
  switch (status) {
    case CandidateStatus::raw: return "raw";
    case CandidateStatus::matted: return "matted";
    case CandidateStatus::selected: return "selected";
    case CandidateStatus::rejected: return "rejected";
  }
  return {};
}

CandidateStatus parse_status(std::string_view text) {
  for (auto s : {CandidateStatus::raw, CandidateStatus::matted, CandidateStatus::selected,
                 CandidateStatus::rejected})
    if (to_string(s) == text) return s;
  throw DataError("unknown status '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const CandidateImage& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["source_url"] = r.source_url;
  j["engine"] = to_string(r.task.engine);
  j["query"] = r.task.query;
  j["language"] = to_string(r.task.language);
  j["role"] = to_string(r.task.role);
  j["byte_length"] = r.byte_length;
  j["fetched_at"] = r.fetched_at;
  j["status"] = to_string(r.status);
  if (r.reject_reason) j["reject_reason"] = *r.reject_reason;
  return j;
}

CandidateImage candidate_from_json(const nlohmann::json& j) {
  CandidateImage r;
  r.id = j.at("id").get<std::string>();
  r.source_url = j.at("source_url").get<std::string>();
  r.task.engine = parse_engine(j.at("engine").get<std::string>());
  r.task.query = j.at("query").get<std::string>();
  r.task.language = parse_language(j.at("language").get<std::string>());
  r.task.role = parse_role(j.at("role").get<std::string>());
  r.byte_length = j.at("byte_length").get<std::uint64_t>();
  r.fetched_at = j.at("fetched_at").get<std::string>();
  r.status = parse_status(j.at("status").get<std::string>());
  if (j.contains("reject_reason")) r.reject_reason = j["reject_reason"].get<std::string>();
  return r;
}

std::string sha256_hex(std::span<const std::uint8_t> bytes) {
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  if (EVP_Digest(bytes.data(), bytes.size(), digest, &length, EVP_sha256(), nullptr) != 1)
    throw DataError("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  out.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) {
    out += hex[digest[i] >> 4];
    out += hex[digest[i] & 0xF];
  }
  return out;
}

std::string utc_timestamp() {
  const std::time_t now = std::time(nullptr);
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

Manifest::Manifest(std::filesystem::path manifest_path, std::filesystem::path store_dir)
    : path_(std::move(manifest_path)), store_dir_(std::move(store_dir)) {
  std::filesystem::create_directories(store_dir_);
  if (path_.has_parent_path()) std::filesystem::create_directories(path_.parent_path());
  std::ifstream in(path_);
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    CandidateImage r;
    try {
      r = candidate_from_json(nlohmann::json::parse(line));
    } catch (const std::exception& e) {
      throw DataError(path_.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
    for (const char* ext : {"jpg", "png", "webp"})
      if (std::filesystem::exists(store_dir_ / (r.id + "." + ext))) r.extension = ext;
    if (index_.contains(r.id)) throw DataError("duplicate manifest id " + r.id);
    index_[r.id] = records_.size();
    records_.push_back(std::move(r));
  }
}

bool Manifest::append(const CandidateImage& record, std::span<const std::uint8_t> bytes) {
  std::lock_guard lock(mutex_);
  if (index_.contains(record.id)) return false;
  write_bytes(store_dir_ / (record.id + "." + record.extension), bytes);
  std::ofstream out(path_, std::ios::app);
  if (!out) throw DataError("cannot append to " + path_.string());
  out << to_json(record).dump() << '\n';
  index_[record.id] = records_.size();
  records_.push_back(record);
  return true;
}

void Manifest::update_status(const std::string& id, CandidateStatus status,
                             std::optional<std::string> reason) {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(id);
  if (it == index_.end()) throw DataError("unknown candidate " + id);
  CandidateImage& r = records_[it->second];
  const auto rank = [](CandidateStatus s) {
    switch (s) {
      case CandidateStatus::raw: return 0;
      case CandidateStatus::matted: return 1;
      default: return 2;
    }
  };
  if (rank(status) <= rank(r.status) && status != r.status)
    throw DataError("status of " + id + " cannot go from " + to_string(r.status) + " to " +
                    to_string(status));
  if (rank(r.status) == 2 && status != r.status)
    throw DataError("status of " + id + " is final");
  r.status = status;
  r.reject_reason = status == CandidateStatus::rejected ? std::move(reason) : std::nullopt;
  rewrite_locked();
}

void Manifest::rewrite_locked() const {
  const auto tmp = std::filesystem::path(path_.string() + ".tmp");
  {
    std::ofstream out(tmp, std::ios::trunc);
    if (!out) throw DataError("cannot write " + tmp.string());
    for (const auto& r : records_) out << to_json(r).dump() << '\n';
  }
  std::filesystem::rename(tmp, path_);
}

std::vector<CandidateImage> Manifest::records() const {
  std::lock_guard lock(mutex_);
  return records_;
}

std::optional<CandidateImage> Manifest::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return records_[it->second];
}

std::size_t Manifest::size() const {
  std::lock_guard lock(mutex_);
  return records_.size();
}

bool Manifest::contains(const std::string& id) const {
  std::lock_guard lock(mutex_);
  return index_.contains(id);
}

std::filesystem::path Manifest::image_path(const CandidateImage& record) const {
  return store_dir_ / (record.id + "." + record.extension);
}

std::size_t dedupe_and_record(std::span<const Download> downloads, const QueryTask& task,
                              Manifest& manifest, std::vector<SkippedDownload>* skipped) {
  std::size_t added = 0;
  for (const auto& d : downloads) {
    if (d.bytes.empty()) {
      if (skipped) skipped->push_back({d.url, "zero-length payload"});
      continue;
    }
    const ImageFormat format = detect_format(d.bytes);
    if (format == ImageFormat::unknown) {
      if (skipped) skipped->push_back({d.url, "unrecognized image format"});
      continue;
    }
    CandidateImage record;
    record.id = sha256_hex(d.bytes);
    record.source_url = d.url;
    record.task = task;
    record.byte_length = d.bytes.size();
    record.fetched_at = utc_timestamp();
    record.extension = extension_for(format);
    if (manifest.append(record, d.bytes)) ++added;
  }
  return added;
}

ScrapeSummary scrape(std::span<const QueryTask> tasks, Fetcher& fetcher, RateLimiter& limiter,
                     Manifest& manifest, const FetchPolicy& policy, unsigned jobs) {
  std::vector<FetchOutcome> outcomes(tasks.size());
  parallel_for(tasks.size(), jobs, [&](std::size_t i) {
    outcomes[i] = fetch_task(tasks[i], fetcher, limiter, policy);
  });
  ScrapeSummary summary;
  summary.tasks = tasks.size();
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    summary.downloaded += outcomes[i].downloads.size();
    summary.new_records += dedupe_and_record(outcomes[i].downloads, tasks[i], manifest, &summary.skipped);
    summary.skipped.insert(summary.skipped.end(), outcomes[i].skipped.begin(), outcomes[i].skipped.end());
  }
  return summary;
}

}  // namespace synthset
