#include "synthset/review.hpp"

#include "synthset/acquisition.hpp"
#include "synthset/image_io.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include <charconv>
#include <fstream>
#include <mutex>

namespace synthset {

namespace fs = std::filesystem;

std::string to_string(Verdict verdict) { return verdict == Verdict::accept ? "accept" : "reject"; }

Verdict parse_verdict(std::string_view text) {
  if (text == "accept") return Verdict::accept;
  if (text == "reject") return Verdict::reject;
  throw DataError("verdict must be 'accept' or 'reject', got '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const Decision& d) {
  return {{"candidate_id", d.candidate_id},
          {"verdict", to_string(d.verdict)},
          {"decided_at", d.decided_at},
          {"reviewer", d.reviewer}};
}

Decision decision_from_json(const nlohmann::json& j) {
  try {
    Decision d;
    d.candidate_id = j.at("candidate_id").get<std::string>();
    d.verdict = parse_verdict(j.at("verdict").get<std::string>());
    d.decided_at = j.value("decided_at", "");
    d.reviewer = j.value("reviewer", "");
    if (d.candidate_id.empty()) throw DataError("empty candidate_id");
    return d;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("malformed decision: ") + e.what());
  }
}

std::vector<Decision> read_decision_log(const fs::path& path) {
  std::vector<Decision> log;
  std::ifstream in(path);
  if (!in) return log;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      log.push_back(decision_from_json(nlohmann::json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(number) + ": " + e.what());
    }
  }
  return log;
}

std::vector<Decision> effective_decisions(std::span<const Decision> log) {
  std::map<std::string, Decision> last;
  for (const auto& d : log) last.insert_or_assign(d.candidate_id, d);
  std::vector<Decision> out;
  for (auto& [id, d] : last) out.push_back(d);
  return out;
}

std::vector<Decision> read_decisions(const fs::path& path) {
  if (!fs::exists(path)) throw ConfigError("decisions file not found: " + path.string());
  return effective_decisions(read_decision_log(path));
}

std::set<std::string> accepted_ids(std::span<const Decision> decisions) {
  std::set<std::string> ids;
  for (const auto& d : effective_decisions(decisions))
    if (d.verdict == Verdict::accept) ids.insert(d.candidate_id);
  return ids;
}

std::string decisions_jsonl(std::span<const Decision> decisions) {
  std::string out;
  for (const auto& d : decisions) out += to_json(d).dump() + "\n";
  return out;
}

StatusFilter parse_status_filter(std::string_view text) {
  if (text.empty() || text == "all") return StatusFilter::all;
  if (text == "undecided") return StatusFilter::undecided;
  if (text == "accepted" || text == "accept") return StatusFilter::accepted;
  if (text == "rejected" || text == "reject") return StatusFilter::rejected;
  throw DataError("unknown status filter '" + std::string(text) + "'");
}

RgbImage make_thumbnail(const RgbImage& image, int longest) {
  const auto w = image.width(), h = image.height();
  const auto longer = std::max(w, h);
  if (longer <= longest) return image;
  const double f = static_cast<double>(longest) / static_cast<double>(longer);
  const auto tw = std::max<Eigen::Index>(1, std::lround(w * f));
  const auto th = std::max<Eigen::Index>(1, std::lround(h * f));
  RgbImage out(tw, th);
  for (Eigen::Index ty = 0; ty < th; ++ty) {
    const auto y0 = ty * h / th, y1 = std::max(y0 + 1, (ty + 1) * h / th);
    for (Eigen::Index tx = 0; tx < tw; ++tx) {
      const auto x0 = tx * w / tw, x1 = std::max(x0 + 1, (tx + 1) * w / tw);
      const auto n = (y1 - y0) * (x1 - x0);
      for (int c = 0; c < 3; ++c) {
        const auto sum = image[c].block(y0, x0, y1 - y0, x1 - x0).cast<std::int64_t>().sum();
        out[c](ty, tx) = static_cast<std::uint8_t>((sum + n / 2) / n);
      }
    }
  }
  return out;
}

ReviewStore::ReviewStore(std::vector<ReviewCandidate> candidates, fs::path log_path, fs::path thumbnail_dir)
    : log_path_(std::move(log_path)), thumbnail_dir_(std::move(thumbnail_dir)) {
  for (auto& c : candidates) {
    const std::string id = c.id;
    candidates_.emplace(id, std::move(c));
  }
  for (const auto& d : read_decision_log(log_path_)) {
    if (!candidates_.contains(d.candidate_id))
      spdlog::warn("decision for {} refers to a candidate that is not reviewable", d.candidate_id);
    effective_.insert_or_assign(d.candidate_id, d);
  }
}

ReviewStore::Page ReviewStore::list(StatusFilter filter, std::size_t page, std::size_t page_size) const {
  if (page < 1) throw DataError("page must be >= 1");
  if (page_size < 1 || page_size > kMaxPageSize) throw DataError("page_size must be in [1, 200]");
  std::shared_lock lock(mutex_);
  Page out;
  out.page = page;
  out.page_size = page_size;
  const std::size_t first = (page - 1) * page_size;
  for (const auto& [id, candidate] : candidates_) {
    const auto it = effective_.find(id);
    const bool decided = it != effective_.end();
    bool match = true;
    switch (filter) {
      case StatusFilter::all: break;
      case StatusFilter::undecided: match = !decided; break;
      case StatusFilter::accepted: match = decided && it->second.verdict == Verdict::accept; break;
      case StatusFilter::rejected: match = decided && it->second.verdict == Verdict::reject; break;
    }
    if (!match) continue;
    if (out.total >= first && out.items.size() < page_size)
      out.items.push_back({candidate, decided ? std::optional<Decision>(it->second) : std::nullopt});
    ++out.total;
  }
  return out;
}

Decision ReviewStore::record(const std::string& candidate_id, Verdict verdict, const std::string& reviewer) {
  if (!candidates_.contains(candidate_id)) throw NotFoundError("unknown candidate " + candidate_id);
  Decision d{candidate_id, verdict, utc_timestamp(), reviewer};
  std::unique_lock lock(mutex_);
  if (log_path_.has_parent_path()) fs::create_directories(log_path_.parent_path());
  std::ofstream out(log_path_, std::ios::app | std::ios::binary);
  out << to_json(d).dump() << '\n';
  out.flush();
  if (!out) throw DataError("cannot append to " + log_path_.string());
  effective_.insert_or_assign(candidate_id, d);
  return d;
}

std::vector<Decision> ReviewStore::effective() const {
  std::shared_lock lock(mutex_);
  std::vector<Decision> out;
  for (const auto& [id, d] : effective_) out.push_back(d);
  return out;
}

std::vector<std::uint8_t> ReviewStore::thumbnail_png(const std::string& candidate_id) const {
  const auto it = candidates_.find(candidate_id);
  if (it == candidates_.end()) throw NotFoundError("unknown candidate " + candidate_id);
  const fs::path cached = thumbnail_dir_ / (candidate_id + ".png");
  std::lock_guard lock(thumbnail_mutex_);
  if (fs::exists(cached)) return read_bytes(cached);
  const RgbImage image = drop_alpha(read_image(it->second.image_path).pixels);
  auto png = encode_png(with_alpha(make_thumbnail(image, 256)));
  write_bytes(cached, png);
  return png;
}

nlohmann::ordered_json to_json(const ReviewStore::Page& page) {
  auto items = nlohmann::ordered_json::array();
  for (const auto& e : page.items) {
    nlohmann::ordered_json item{{"id", e.candidate.id},
                                {"thumbnail_url", "/api/candidates/" + e.candidate.id + "/thumbnail"},
                                {"scores", to_json(e.candidate.scores)}};
    if (e.decision) item["verdict"] = to_string(e.decision->verdict);
    items.push_back(std::move(item));
  }
  return {{"page", page.page}, {"page_size", page.page_size}, {"total", page.total}, {"items", items}};
}

struct ReviewServer::Impl {
  ReviewStore& store;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ReviewStore& s) : store(s) {}
};

namespace {

void send_error(httplib::Response& res, int status, const std::string& message) {
  res.status = status;
  res.set_content(nlohmann::json{{"error", message}}.dump(), "application/json");
}

std::size_t query_number(const httplib::Request& req, const char* key, std::size_t fallback) {
  if (!req.has_param(key)) return fallback;
  const std::string text = req.get_param_value(key);
  std::size_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc() || ptr != text.data() + text.size())
    throw DataError(std::string(key) + " must be a positive integer");
  return value;
}

}  // namespace

ReviewServer::ReviewServer(ReviewStore& store) : impl_(std::make_unique<Impl>(store)) {
  auto& srv = impl_->server;
  ReviewStore& st = impl_->store;

  srv.Get("/api/candidates", [&st](const httplib::Request& req, httplib::Response& res) {
    try {
      const auto filter = parse_status_filter(req.has_param("status") ? req.get_param_value("status") : "");
      const auto page = st.list(filter, query_number(req, "page", 1), query_number(req, "page_size", 50));
      res.set_content(to_json(page).dump(), "application/json");
    } catch (const DataError& e) {
      send_error(res, 400, e.what());
    }
  });

  srv.Get(R"(/api/candidates/([0-9A-Za-z_.-]+)/thumbnail)",
          [&st](const httplib::Request& req, httplib::Response& res) {
            try {
              const auto png = st.thumbnail_png(req.matches[1]);
              res.set_content(std::string(png.begin(), png.end()), "image/png");
            } catch (const NotFoundError& e) {
              send_error(res, 404, e.what());
            } catch (const DataError& e) {
              send_error(res, 500, e.what());
            }
          });

  srv.Post("/api/decisions", [&st](const httplib::Request& req, httplib::Response& res) {
    nlohmann::json body;
    try {
      body = nlohmann::json::parse(req.body);
    } catch (const nlohmann::json::exception&) {
      return send_error(res, 400, "body must be JSON");
    }
    try {
      if (!body.is_object() || !body.contains("candidate_id") || !body["candidate_id"].is_string())
        return send_error(res, 400, "candidate_id is required");
      if (!body.contains("verdict") || !body["verdict"].is_string())
        return send_error(res, 400, "verdict is required");
      const Verdict verdict = parse_verdict(body["verdict"].get<std::string>());
      std::string reviewer;
      if (body.contains("reviewer")) {
        if (!body["reviewer"].is_string()) return send_error(res, 400, "reviewer must be text");
        reviewer = body["reviewer"].get<std::string>();
      }
      const Decision d = st.record(body["candidate_id"].get<std::string>(), verdict, reviewer);
      res.set_content(to_json(d).dump(), "application/json");
    } catch (const NotFoundError& e) {
      send_error(res, 404, e.what());
    } catch (const DataError& e) {
      send_error(res, 400, e.what());
    }
  });

  srv.Get("/api/export", [&st](const httplib::Request&, httplib::Response& res) {
    res.set_content(decisions_jsonl(st.effective()), "application/x-ndjson");
  });

  srv.set_error_handler([](const httplib::Request&, httplib::Response& res) {
    if (res.body.empty()) send_error(res, res.status, "not found");
  });
}

ReviewServer::~ReviewServer() { stop(); }

bool ReviewServer::listen(const std::string& host, int port) { return impl_->server.listen(host, port); }

int ReviewServer::start(const std::string& host) {
  const int port = impl_->server.bind_to_any_port(host);
  if (port < 0) throw DataError("cannot bind " + host);
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return port;
}

void ReviewServer::stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace synthset
