#pragma once

#include "synthset/common.hpp"
#include "synthset/contour.hpp"
#include "synthset/raster.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

namespace synthset {

struct FilterConfig {
  std::uint64_t min_bytes = 80 * 1024;
  double border_margin_fraction = 0.02;
  double max_border_variance = 50.0;
  int opacity_cutoff_alpha = 243;  // ceil(0.95 * 255)
  double max_transparency_score = 0.1;
  double min_convexity = 0.95;
  double detector_score_threshold = 0.95;

  /// Throws ConfigError when a field is outside its domain.
  void validate() const;
};

struct SelectionScores {
  std::uint64_t byte_length = 0;
  std::optional<double> border_variance;
  std::optional<double> transparency_score;
  std::optional<double> convexity_score;
};

nlohmann::ordered_json to_json(const SelectionScores& scores);
SelectionScores scores_from_json(const nlohmann::json& j);

// Individual filters and scores.

bool size_filter(std::uint64_t byte_length, const FilterConfig& config);

/// Mean over the three channels of the population variance of the pixels in the outer frame.
/// The frame is `max(1, round(fraction * dimension))` pixels thick on each side.
double border_variance(const RgbImage& image, double margin_fraction);

/// Fraction of non-zero-alpha pixels whose alpha is below the opacity cutoff.
double transparency_score(const RgbaImage& cutout, int opacity_cutoff_alpha);

/// Largest-contour area over its convex-hull area; empty when the hull is degenerate.
std::optional<double> convexity_score(const Mask& mask);

struct Detection {
  double score = 0.0;
  std::array<double, 4> bbox{};  // x, y, w, h
};

/// Detector output per candidate id.
struct DetectionSidecar {
  std::map<std::string, std::vector<Detection>> detections;

  static DetectionSidecar from_json(const nlohmann::json& j);
  static DetectionSidecar load(const std::filesystem::path& path);
  /// Checks that every bbox lies inside an image of the given size.
  bool bboxes_within(const std::string& id, int width, int height) const;
};

/// Keeps a candidate iff it has exactly one detection scoring at least the threshold.
bool cnn_selection_filter(const DetectionSidecar& sidecar, const std::string& source_id,
                          const FilterConfig& config);

// Strategies.

enum class Strategy { plain, cnn, manual };

std::string to_string(Strategy strategy);
Strategy parse_strategy(std::string_view text);

/// Filter names, in chain order, as recorded in reasons reports.
namespace filter_names {
inline constexpr const char* decode = "decode";
inline constexpr const char* size = "size";
inline constexpr const char* border_variance = "border_variance";
inline constexpr const char* matting = "matting";
inline constexpr const char* transparency = "transparency";
inline constexpr const char* convexity = "convexity";
inline constexpr const char* detector = "detector";
inline constexpr const char* manual = "manual";
}  // namespace filter_names

struct SelectionCandidate {
  std::string id;
  Role role = Role::object;
  std::uint64_t byte_length = 0;
  std::function<RgbImage()> load_image;
};

/// Produces the RGBA cutout for a candidate; throws on matting failure.
using MattingFn = std::function<RgbaImage(const SelectionCandidate&, const RgbImage&)>;

struct StrategyInputs {
  std::optional<DetectionSidecar> sidecar;
  /// Ids a reviewer accepted; required by the manual strategy.
  std::optional<std::set<std::string>> accepted;
};

struct CandidateReport {
  std::string id;
  Role role = Role::object;
  bool keep = false;
  std::optional<std::string> failed_filter;
  std::string detail;
  SelectionScores scores;
};

nlohmann::ordered_json to_json(const CandidateReport& report);

struct SelectionResult {
  std::vector<std::string> selected;            // objects, sorted by id
  std::vector<std::string> selected_distractors;  // distractors passing the shared pre-chain
  std::vector<CandidateReport> reports;         // sorted by id
};

/// Shared pre-chain: size, border variance, matting, transparency. On success the cutout is
/// written to `cutout_out` when provided.
CandidateReport run_prechain(const SelectionCandidate& candidate, const FilterConfig& config,
                             const MattingFn& matting, RgbaImage* cutout_out = nullptr);

/// Runs the strategy over all candidates. Objects go through the full chain for the strategy;
/// distractors only through the pre-chain. Output is ordered by id regardless of `jobs`.
/// Throws ConfigError when the strategy's required input is missing.
SelectionResult apply_strategy(std::span<const SelectionCandidate> candidates, Strategy strategy,
                               const FilterConfig& config, const MattingFn& matting,
                               const StrategyInputs& inputs, unsigned jobs = 1);

/// Reasons report as JSON Lines.
std::string reasons_jsonl(std::span<const CandidateReport> reports);

}  // namespace synthset
