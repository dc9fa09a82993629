#pragma once

#include "synthset/blending.hpp"
#include "synthset/composition.hpp"
#include "synthset/selection.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <string>
#include <vector>

namespace synthset {

struct MattingConfig {
  double flood_fill_tolerance = 30.0;
  std::string command;  // empty: use the flood-fill matte
  int timeout_seconds = 60;
};

struct AcquisitionConfig {
  std::size_t results_per_task = 500;
  double rate_limit_per_second = 1.0;
  int retries = 2;
  int backoff_ms = 500;
  std::size_t distractor_category_count = 100;
};

struct GenerationConfig {
  std::array<std::size_t, 3> split_counts{2000, 500, 500};  // train, val, test
  std::array<double, 3> split_ratios{0.8, 0.1, 0.1};
  std::vector<std::string> excluded_categories{"archive"};
  std::string category_name = "parcel";
  std::vector<BlendMethod> methods = all_blend_methods();
  double min_visible_fraction = 0.05;
  int jpeg_quality = 95;
};

/// Every threshold and range of the pipeline. Serialized as one flat JSON object.
struct PipelineConfig {
  FilterConfig filter;
  LayoutConfig layout;
  BlendParams blend;
  MattingConfig matting;
  AcquisitionConfig acquisition;
  GenerationConfig generation;

  void validate() const;
};

inline constexpr std::array<const char*, 3> kSplitNames{"train", "val", "test"};

/// Flat JSON with every key materialized.
nlohmann::ordered_json to_json(const PipelineConfig& config);

/// Applies the keys of `j` over `base`. Throws ConfigError on unknown keys or bad values.
PipelineConfig apply_config_json(PipelineConfig base, const nlohmann::json& j);

PipelineConfig load_config(const std::filesystem::path& path);

}  // namespace synthset
