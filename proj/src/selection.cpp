#include "synthset/selection.hpp"

#include "synthset/error.hpp"
#include "synthset/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

namespace synthset {

void FilterConfig::validate() const {
  const auto fraction = [](double v, const char* name) {
    if (!(v > 0.0 && v < 1.0)) throw ConfigError(std::string(name) + " must be in (0, 1)");
  };
  fraction(border_margin_fraction, "border_margin_fraction");
  fraction(max_transparency_score, "max_transparency_score");
  fraction(min_convexity, "min_convexity");
  fraction(detector_score_threshold, "detector_score_threshold");
  if (opacity_cutoff_alpha < 1 || opacity_cutoff_alpha > 255)
    throw ConfigError("opacity_cutoff_alpha must be in [1, 255]");
  if (max_border_variance < 0.0) throw ConfigError("max_border_variance must be >= 0");
}

nlohmann::ordered_json to_json(const SelectionScores& s) {
  nlohmann::ordered_json j;
  j["byte_length"] = s.byte_length;
  if (s.border_variance) j["border_variance"] = *s.border_variance;
  if (s.transparency_score) j["transparency_score"] = *s.transparency_score;
  if (s.convexity_score) j["convexity_score"] = *s.convexity_score;
  return j;
}

SelectionScores scores_from_json(const nlohmann::json& j) {
  SelectionScores s;
  s.byte_length = j.value("byte_length", std::uint64_t{0});
  if (j.contains("border_variance")) s.border_variance = j["border_variance"].get<double>();
  if (j.contains("transparency_score")) s.transparency_score = j["transparency_score"].get<double>();
  if (j.contains("convexity_score")) s.convexity_score = j["convexity_score"].get<double>();
  return s;
}

bool size_filter(std::uint64_t byte_length, const FilterConfig& config) {
  return byte_length >= config.min_bytes;
}

double border_variance(const RgbImage& image, double margin_fraction) {
  const Eigen::Index h = image.height(), w = image.width();
  const auto thickness = [&](Eigen::Index dim) {
    return std::max<Eigen::Index>(1, static_cast<Eigen::Index>(std::lround(margin_fraction * static_cast<double>(dim))));
  };
  const Eigen::Index my = thickness(h), mx = thickness(w);
  const bool inner_empty = h - 2 * my <= 0 || w - 2 * mx <= 0;

  double total = 0.0;
  for (int c = 0; c < 3; ++c) {
    std::int64_t n = 0, sum = 0, sum_sq = 0;
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x) {
        const bool in_frame = inner_empty || y < my || y >= h - my || x < mx || x >= w - mx;
        if (!in_frame) continue;
        const std::int64_t v = image[c](y, x);
        ++n;
        sum += v;
        sum_sq += v * v;
      }
    // Integer moments keep the variance exact up to the final division.
    const double nn = static_cast<double>(n);
    total += static_cast<double>(n * sum_sq - sum * sum) / (nn * nn);
  }
  return total / 3.0;
}

double transparency_score(const RgbaImage& cutout, int opacity_cutoff_alpha) {
  const auto alpha = cutout[3].cast<int>();
  const auto nonzero = (alpha > 0).count();
  if (nonzero == 0) throw DataError("empty matte");
  const auto translucent = ((alpha > 0) && (alpha < opacity_cutoff_alpha)).count();
  return static_cast<double>(translucent) / static_cast<double>(nonzero);
}

std::optional<double> convexity_score(const Mask& mask) {
  const Polygon contour = largest_contour(mask);
  try {
    const Polygon hull = convex_hull(contour);
    return polygon_area(contour) / polygon_area(hull);
  } catch (const DataError&) {
    return std::nullopt;
  }
}

DetectionSidecar DetectionSidecar::from_json(const nlohmann::json& j) {
  if (!j.is_object()) throw DataError("detection sidecar must be a JSON object");
  DetectionSidecar out;
  for (const auto& [id, list] : j.items()) {
    if (!list.is_array()) throw DataError("sidecar entry for " + id + " must be an array");
    auto& dets = out.detections[id];
    for (const auto& d : list) {
      Detection det;
      det.score = d.at("score").get<double>();
      if (!(det.score >= 0.0 && det.score <= 1.0))
        throw DataError("sidecar score out of [0, 1] for " + id);
      const auto& box = d.at("bbox");
      if (!box.is_array() || box.size() != 4) throw DataError("sidecar bbox must be [x,y,w,h]");
      for (int k = 0; k < 4; ++k) det.bbox[k] = box[k].get<double>();
      if (det.bbox[2] < 0 || det.bbox[3] < 0) throw DataError("sidecar bbox has negative size");
      dets.push_back(det);
    }
  }
  return out;
}

DetectionSidecar DetectionSidecar::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open sidecar " + path.string());
  try {
    return from_json(nlohmann::json::parse(in));
  } catch (const nlohmann::json::exception& e) {
    throw DataError("malformed sidecar " + path.string() + ": " + e.what());
  }
}

bool DetectionSidecar::bboxes_within(const std::string& id, int width, int height) const {
  const auto it = detections.find(id);
  if (it == detections.end()) return true;
  return std::all_of(it->second.begin(), it->second.end(), [&](const Detection& d) {
    return d.bbox[0] >= 0 && d.bbox[1] >= 0 && d.bbox[0] + d.bbox[2] <= width &&
           d.bbox[1] + d.bbox[3] <= height;
  });
}

bool cnn_selection_filter(const DetectionSidecar& sidecar, const std::string& source_id,
                          const FilterConfig& config) {
  const auto it = sidecar.detections.find(source_id);
  if (it == sidecar.detections.end()) return false;
  const auto confident = std::count_if(it->second.begin(), it->second.end(), [&](const Detection& d) {
    return d.score >= config.detector_score_threshold;
  });
  return confident == 1;
}

std::string to_string(Strategy strategy) {
  switch (strategy) {
    case Strategy::plain: return "plain";
    case Strategy::cnn: return "cnn";
    case Strategy::manual: return "manual";
  }
  return {};
}

Strategy parse_strategy(std::string_view text) {
  if (text == "plain") return Strategy::plain;
  if (text == "cnn") return Strategy::cnn;
  if (text == "manual") return Strategy::manual;
  throw ConfigError("unknown strategy '" + std::string(text) + "'");
}

nlohmann::ordered_json to_json(const CandidateReport& r) {
  nlohmann::ordered_json j;
  j["id"] = r.id;
  j["decision"] = r.keep ? "keep" : "reject";
  if (r.failed_filter) {
    j["failed_filter"] = *r.failed_filter;
    if (!r.detail.empty()) j["detail"] = r.detail;
  }
  j["scores"] = to_json(r.scores);
  return j;
}

namespace {

CandidateReport reject(CandidateReport report, const char* filter, std::string detail) {
  report.keep = false;
  report.failed_filter = filter;
  report.detail = std::move(detail);
  return report;
}

std::string fmt_double(double v) {
  std::ostringstream s;
  s.precision(6);
  s << v;
  return s.str();
}

}  // namespace

CandidateReport run_prechain(const SelectionCandidate& candidate, const FilterConfig& config,
                             const MattingFn& matting, RgbaImage* cutout_out) {
  CandidateReport report;
  report.id = candidate.id;
  report.role = candidate.role;
  report.scores.byte_length = candidate.byte_length;

  if (!size_filter(candidate.byte_length, config))
    return reject(report, filter_names::size,
                  std::to_string(candidate.byte_length) + " < " + std::to_string(config.min_bytes) + " bytes");

  RgbImage image;
  try {
    image = candidate.load_image();
  } catch (const std::exception& e) {
    return reject(report, filter_names::decode, e.what());
  }
  if (image.width() < 3 || image.height() < 3)
    return reject(report, filter_names::decode, "image smaller than 3x3");

  const double variance = border_variance(image, config.border_margin_fraction);
  report.scores.border_variance = variance;
  if (!(variance < config.max_border_variance))
    return reject(report, filter_names::border_variance, fmt_double(variance) + " >= " +
                                                             fmt_double(config.max_border_variance));

  RgbaImage cutout;
  try {
    cutout = matting(candidate, image);
  } catch (const std::exception& e) {
    return reject(report, filter_names::matting, e.what());
  }
  if ((cutout[3] == 0).all()) return reject(report, filter_names::matting, "empty matte");

  const double transparency = transparency_score(cutout, config.opacity_cutoff_alpha);
  report.scores.transparency_score = transparency;
  if (!(transparency < config.max_transparency_score))
    return reject(report, filter_names::transparency,
                  fmt_double(transparency) + " >= " + fmt_double(config.max_transparency_score));

  report.keep = true;
  if (cutout_out) *cutout_out = std::move(cutout);
  return report;
}

namespace {

CandidateReport evaluate(const SelectionCandidate& candidate, Strategy strategy,
                         const FilterConfig& config, const MattingFn& matting,
                         const StrategyInputs& inputs) {
  RgbaImage cutout;
  CandidateReport report = run_prechain(candidate, config, matting, &cutout);
  if (!report.keep || candidate.role == Role::distractor) return report;

  if (strategy == Strategy::plain || strategy == Strategy::cnn) {
    const Mask opaque = alpha_at_least(cutout, config.opacity_cutoff_alpha);
    if (!opaque.any()) return reject(report, filter_names::convexity, "no opaque pixels");
    const auto convexity = convexity_score(opaque);
    if (!convexity) return reject(report, filter_names::convexity, "degenerate contour");
    report.scores.convexity_score = *convexity;
    if (*convexity < config.min_convexity)
      return reject(report, filter_names::convexity,
                    fmt_double(*convexity) + " < " + fmt_double(config.min_convexity));
  }
  if (strategy == Strategy::cnn && !cnn_selection_filter(*inputs.sidecar, candidate.id, config))
    return reject(report, filter_names::detector, "not exactly one confident detection");
  if (strategy == Strategy::manual && !inputs.accepted->contains(candidate.id))
    return reject(report, filter_names::manual, "not accepted by reviewer");
  return report;
}

}  // namespace

SelectionResult apply_strategy(std::span<const SelectionCandidate> candidates, Strategy strategy,
                               const FilterConfig& config, const MattingFn& matting,
                               const StrategyInputs& inputs, unsigned jobs) {
  config.validate();
  if (strategy == Strategy::cnn && !inputs.sidecar)
    throw ConfigError("cnn strategy requires a detection sidecar (--sidecar)");
  if (strategy == Strategy::manual && !inputs.accepted)
    throw ConfigError("manual strategy requires a decisions file (--decisions)");

  std::vector<const SelectionCandidate*> order;
  order.reserve(candidates.size());
  for (const auto& c : candidates) order.push_back(&c);
  std::sort(order.begin(), order.end(), [](auto* a, auto* b) { return a->id < b->id; });

  SelectionResult result;
  result.reports.resize(order.size());
  parallel_for(order.size(), jobs, [&](std::size_t i) {
    result.reports[i] = evaluate(*order[i], strategy, config, matting, inputs);
  });
  for (const auto& r : result.reports) {
    if (!r.keep) continue;
    (r.role == Role::object ? result.selected : result.selected_distractors).push_back(r.id);
  }
  return result;
}

std::string reasons_jsonl(std::span<const CandidateReport> reports) {
  std::string out;
  for (const auto& r : reports) out += to_json(r).dump() + "\n";
  return out;
}

}  // namespace synthset
