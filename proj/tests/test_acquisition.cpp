#include "synthset/acquisition.hpp"
#include "synthset/image_io.hpp"

#include "testkit.hpp"

#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <fstream>
#include <thread>

using namespace synthset;
using namespace std::chrono_literals;

namespace {

std::vector<std::uint8_t> png_bytes(int seed) {
  CounterRng rng(static_cast<std::uint64_t>(seed));
  RgbImage img = testkit::solid(8, 8, {seed % 256, 10, 20});
  testkit::add_noise(img, 3, rng);
  return encode_png(with_alpha(img));
}

/// In-memory fetcher with canned results; URLs containing "bad" always fail.
class CannedFetcher : public Fetcher {
 public:
  std::map<std::string, std::vector<std::uint8_t>> payloads;
  std::vector<std::string> results;
  std::atomic<int> downloads{0};

  std::vector<std::string> search(const QueryTask&, std::size_t) override { return results; }
  std::vector<std::uint8_t> download(const std::string& url) override {
    ++downloads;
    if (url.find("bad") != std::string::npos) throw FetchError("connection refused");
    return payloads.at(url);
  }
};

/// Local HTTP server speaking the fetcher protocol.
struct FixtureServer {
  httplib::Server server;
  std::thread thread;
  int port = 0;
  std::atomic<int> requests{0};
  std::vector<std::chrono::steady_clock::time_point> stamps;
  std::mutex mutex;

  FixtureServer() {
    server.Get("/search", [this](const httplib::Request& req, httplib::Response& res) {
      note();
      const std::string q = req.get_param_value("q");
      const std::string base = "http://127.0.0.1:" + std::to_string(port);
      nlohmann::json urls = {base + "/img/" + q + "-1.png", base + "/img/" + q + "-2.png"};
      if (q == "broken") return void(res.status = 500);
      res.set_content(urls.dump(), "application/json");
    });
    server.Get(R"(/img/(.+))", [this](const httplib::Request& req, httplib::Response& res) {
      note();
      const std::string name = req.matches[1];
      const auto bytes = png_bytes(static_cast<int>(std::hash<std::string>{}(name) % 200));
      res.set_content(std::string(bytes.begin(), bytes.end()), "image/png");
    });
    port = server.bind_to_any_port("127.0.0.1");
    thread = std::thread([this] { server.listen_after_bind(); });
    server.wait_until_ready();
  }
  ~FixtureServer() {
    server.stop();
    thread.join();
  }
  void note() {
    std::lock_guard lock(mutex);
    stamps.push_back(std::chrono::steady_clock::now());
    ++requests;
  }
  std::string url() const { return "http://127.0.0.1:" + std::to_string(port); }
};

}  // namespace

TEST_CASE("default matrix expands nine queries into 63 object tasks") {
  const auto tasks = expand_queries(default_object_queries(), {});
  CHECK(default_object_queries().size() == 9);
  CHECK(tasks.size() == 63);
  std::size_t baidu = 0;
  for (const auto& t : tasks) {
    CHECK(t.role == Role::object);
    if (t.engine == Engine::baidu) {
      ++baidu;
      CHECK(t.language == Language::zh);
    }
  }
  CHECK(baidu == 9);
  // Order: engine, then language, then query index.
  CHECK(tasks[0].engine == Engine::google);
  CHECK(tasks[0].language == Language::en);
  CHECK(tasks[0].query == "parcel");
  CHECK(tasks[1].query == "parcel package");
  CHECK(tasks[9].language == Language::de);
  CHECK(tasks[9].query == "Paket");
  CHECK(tasks[54].engine == Engine::baidu);
  CHECK(tasks[54].query == "包裹");
  CHECK(expand_queries(default_object_queries(), {}) == tasks);
}

TEST_CASE("distractor expansion and empty input") {
  const std::vector<std::string> d{"chair", "lamp"};
  const auto tasks = expand_queries({}, d);
  CHECK(tasks.size() == 4);
  for (const auto& t : tasks) {
    CHECK(t.engine == Engine::google);
    CHECK(t.role == Role::distractor);
  }
  CHECK_THROWS_AS(expand_queries({}, {}), ConfigError);
}

TEST_CASE("policy rejects baidu outside chinese") {
  EnginePolicy p;
  p.object.emplace_back(Engine::baidu, Language::en);
  CHECK_THROWS_AS(p.validate(), ConfigError);
  CHECK_NOTHROW(EnginePolicy{}.validate());
}

TEST_CASE("translation table") {
  const std::vector<std::string> q{"parcel", "pallet carton", "mystery item"};
  std::vector<std::string> missed;
  CHECK(translate_queries(q, Language::de, &missed) ==
        std::vector<std::string>{"Paket", "Palettenkarton", "mystery item"});
  CHECK(missed == std::vector<std::string>{"mystery item"});
  CHECK(translate_queries(q, Language::en) == q);
  CHECK(translate_queries(q, Language::zh)[2] == "mystery item");
  for (const auto& phrase : default_object_queries()) {
    std::vector<std::string> miss;
    translate_queries(std::vector<std::string>{phrase}, Language::de, &miss);
    translate_queries(std::vector<std::string>{phrase}, Language::zh, &miss);
    CHECK(miss.empty());
  }
}

TEST_CASE("distractor category sampling") {
  const std::vector<std::string> five{"a", "b", "c", "d", "e"};
  auto all = sample_distractor_categories(five, 5, 1);
  CHECK(all.size() == 5);
  CHECK(std::set(all.begin(), all.end()).size() == 5);
  std::vector<std::string> many;
  for (int i = 0; i < 200; ++i) many.push_back("cat" + std::to_string(i));
  const auto s1 = sample_distractor_categories(many, 100, 11);
  CHECK(s1 == sample_distractor_categories(many, 100, 11));
  CHECK(s1 != sample_distractor_categories(many, 100, 12));
  CHECK(std::set(s1.begin(), s1.end()).size() == 100);
  CHECK_THROWS_AS(sample_distractor_categories(five, 6, 1), ConfigError);
}

TEST_CASE("fetch_task truncates, retries and skips") {
  CannedFetcher f;
  for (int i = 0; i < 5; ++i) {
    const std::string url = "http://h/" + std::to_string(i);
    f.results.push_back(url);
    f.payloads[url] = png_bytes(i);
  }
  RateLimiter limiter(0ms);
  FetchPolicy policy{3, 2, 1ms};
  auto out = fetch_task({Engine::google, "parcel", Language::en, Role::object}, f, limiter, policy);
  CHECK(out.downloads.size() == 3);
  CHECK(out.skipped.empty());

  f.results = {"http://h/0", "http://h/bad", "http://h/1", "http://h/2"};
  f.downloads = 0;
  out = fetch_task({Engine::google, "parcel", Language::en, Role::object}, f, limiter, {10, 2, 1ms});
  CHECK(out.downloads.size() == 3);
  REQUIRE(out.skipped.size() == 1);
  CHECK(out.skipped[0].url == "http://h/bad");
  CHECK(f.downloads == 3 + 3);  // one try each plus two retries for the failing URL
}

TEST_CASE("manifest deduplicates by content and is idempotent") {
  testkit::TempDir dir;
  Manifest manifest(dir / "manifest.jsonl", dir / "images");
  const auto a = png_bytes(1), b = png_bytes(2);
  const QueryTask task{Engine::bing, "parcel", Language::en, Role::object};
  std::vector<Download> same{{"http://x/1", a}, {"http://y/2", a}};
  CHECK(dedupe_and_record(same, task, manifest) == 1);
  CHECK(manifest.records()[0].source_url == "http://x/1");
  std::vector<Download> distinct{{"http://x/1", a}, {"http://x/3", b}};
  CHECK(dedupe_and_record(distinct, task, manifest) == 1);
  CHECK(dedupe_and_record(distinct, task, manifest) == 0);
  CHECK(manifest.size() == 2);

  std::vector<SkippedDownload> skipped;
  std::vector<Download> junk{{"http://x/empty", {}}, {"http://x/text", {'h', 'i'}}};
  CHECK(dedupe_and_record(junk, task, manifest, &skipped) == 0);
  CHECK(skipped.size() == 2);

  // Record count equals the distinct hashes of the stored files.
  std::set<std::string> hashes;
  for (const auto& f : std::filesystem::directory_iterator(dir / "images"))
    hashes.insert(sha256_hex(read_bytes(f.path())));
  CHECK(hashes.size() == manifest.size());
  for (const auto& r : manifest.records()) {
    CHECK(hashes.contains(r.id));
    CHECK(r.byte_length > 0);
    CHECK(std::filesystem::exists(manifest.image_path(r)));
  }

  // Reload from disk.
  Manifest again(dir / "manifest.jsonl", dir / "images");
  CHECK(again.size() == 2);
  std::ifstream in(dir / "manifest.jsonl");
  std::string line;
  std::getline(in, line);
  const auto j = nlohmann::ordered_json::parse(line);
  std::vector<std::string> keys;
  for (const auto& [k, v] : j.items()) keys.push_back(k);
  CHECK(keys == std::vector<std::string>{"id", "source_url", "engine", "query", "language", "role",
                                         "byte_length", "fetched_at", "status"});
}

TEST_CASE("manifest status moves forward only") {
  testkit::TempDir dir;
  Manifest manifest(dir / "manifest.jsonl", dir / "images");
  const QueryTask task{Engine::google, "parcel", Language::en, Role::object};
  std::vector<Download> d{{"http://x/1", png_bytes(1)}, {"http://x/2", png_bytes(2)}};
  dedupe_and_record(d, task, manifest);
  const auto ids = manifest.records();
  manifest.update_status(ids[0].id, CandidateStatus::matted);
  manifest.update_status(ids[0].id, CandidateStatus::selected);
  CHECK_THROWS_AS(manifest.update_status(ids[0].id, CandidateStatus::raw), DataError);
  CHECK_THROWS_AS(manifest.update_status(ids[0].id, CandidateStatus::rejected), DataError);
  manifest.update_status(ids[1].id, CandidateStatus::rejected, "size");
  Manifest again(dir / "manifest.jsonl", dir / "images");
  CHECK(again.find(ids[0].id)->status == CandidateStatus::selected);
  CHECK(again.find(ids[1].id)->reject_reason == "size");
}

TEST_CASE("http fetcher against the fixture server") {
  FixtureServer server;
  HttpFetcher fetcher(server.url());
  testkit::TempDir dir;
  Manifest manifest(dir / "manifest.jsonl", dir / "images");
  RateLimiter limiter(0ms);
  const std::vector<QueryTask> tasks{{Engine::google, "alpha", Language::en, Role::object},
                                     {Engine::google, "broken", Language::en, Role::object},
                                     {Engine::bing, "beta", Language::de, Role::distractor}};
  const auto summary = scrape(tasks, fetcher, limiter, manifest, FetchPolicy{10, 1, 1ms}, 2);
  CHECK(summary.tasks == 3);
  CHECK(summary.downloaded == 4);
  REQUIRE(summary.skipped.size() == 1);
  CHECK(summary.skipped[0].url == "search:broken");
  const auto records = manifest.records();
  REQUIRE(records.size() == summary.new_records);
  CHECK(records.front().source_url.find("alpha") != std::string::npos);  // task order
}

TEST_CASE("per-host rate limit spaces requests") {
  FixtureServer server;
  HttpFetcher fetcher(server.url());
  testkit::TempDir dir;
  Manifest manifest(dir / "manifest.jsonl", dir / "images");
  RateLimiter limiter(1000ms);
  const std::vector<QueryTask> tasks{{Engine::google, "one", Language::en, Role::object},
                                     {Engine::google, "two", Language::en, Role::object}};
  const auto t0 = std::chrono::steady_clock::now();
  scrape(tasks, fetcher, limiter, manifest, FetchPolicy{1, 0, 1ms}, 2);
  const auto elapsed = std::chrono::steady_clock::now() - t0;
  const int n = server.requests.load();
  CHECK(n == 4);  // two searches, two downloads
  CHECK(elapsed >= std::chrono::milliseconds(1000 * (n - 1)));
  std::sort(server.stamps.begin(), server.stamps.end());
  for (std::size_t i = 1; i < server.stamps.size(); ++i)
    CHECK(server.stamps[i] - server.stamps[i - 1] >= 990ms);
}

TEST_CASE("split_url accepts plain http only") {
  CHECK(split_url("http://a:1/x/y") == std::pair<std::string, std::string>{"http://a:1", "/x/y"});
  CHECK(split_url("http://a").second == "/");
  CHECK_THROWS_AS(split_url("https://a/x"), FetchError);
}
