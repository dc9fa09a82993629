#include "synthset/config.hpp"

#include "synthset/error.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <functional>

namespace synthset {

namespace {

struct Binding {
  const char* key;
  std::function<nlohmann::ordered_json(const PipelineConfig&)> get;
  std::function<void(PipelineConfig&, const nlohmann::json&)> set;
};

template <typename T, typename Access>
Binding field(const char* key, Access access) {
  return {key,
          [access](const PipelineConfig& c) {
            return nlohmann::ordered_json(access(const_cast<PipelineConfig&>(c)));
          },
          [access](PipelineConfig& c, const nlohmann::json& j) { access(c) = j.get<T>(); }};
}

std::vector<std::string> method_names(const std::vector<BlendMethod>& methods) {
  std::vector<std::string> out;
  for (auto m : methods) out.push_back(to_string(m));
  return out;
}

const std::vector<Binding>& bindings() {
  using C = PipelineConfig;
  static const std::vector<Binding> table{
      field<std::uint64_t>("min_bytes", [](C& c) -> auto& { return c.filter.min_bytes; }),
      field<double>("border_margin_fraction", [](C& c) -> auto& { return c.filter.border_margin_fraction; }),
      field<double>("max_border_variance", [](C& c) -> auto& { return c.filter.max_border_variance; }),
      field<int>("opacity_cutoff_alpha", [](C& c) -> auto& { return c.filter.opacity_cutoff_alpha; }),
      field<double>("max_transparency_score", [](C& c) -> auto& { return c.filter.max_transparency_score; }),
      field<double>("min_convexity", [](C& c) -> auto& { return c.filter.min_convexity; }),
      field<double>("detector_score_threshold", [](C& c) -> auto& { return c.filter.detector_score_threshold; }),

      field<std::array<int, 2>>("n_objects_range", [](C& c) -> auto& { return c.layout.n_objects_range; }),
      field<std::array<int, 2>>("n_distractors_range", [](C& c) -> auto& { return c.layout.n_distractors_range; }),
      field<std::array<double, 2>>("scale_fraction_range", [](C& c) -> auto& { return c.layout.scale_fraction_range; }),
      field<double>("max_upscale", [](C& c) -> auto& { return c.layout.max_upscale; }),
      field<double>("max_pairwise_iou", [](C& c) -> auto& { return c.layout.max_pairwise_iou; }),
      field<std::array<double, 2>>("rotation_range", [](C& c) -> auto& { return c.layout.rotation_range; }),
      field<int>("placement_attempts", [](C& c) -> auto& { return c.layout.placement_attempts; }),
      field<int>("layout_attempts", [](C& c) -> auto& { return c.layout.layout_attempts; }),
      field<int>("max_layout_resamples", [](C& c) -> auto& { return c.layout.max_layout_resamples; }),

      field<double>("gaussian_sigma", [](C& c) -> auto& { return c.blend.gaussian_sigma; }),
      field<int>("motion_length_min", [](C& c) -> auto& { return c.blend.motion_length_min; }),
      field<int>("motion_length_max", [](C& c) -> auto& { return c.blend.motion_length_max; }),
      field<std::array<double, 2>>("motion_angle_range", [](C& c) -> auto& { return c.blend.motion_angle_range; }),
      field<double>("poisson_tolerance", [](C& c) -> auto& { return c.blend.poisson_tolerance; }),
      field<int>("poisson_max_iters", [](C& c) -> auto& { return c.blend.poisson_max_iters; }),

      field<double>("flood_fill_tolerance", [](C& c) -> auto& { return c.matting.flood_fill_tolerance; }),
      field<std::string>("matting_command", [](C& c) -> auto& { return c.matting.command; }),
      field<int>("matting_timeout_seconds", [](C& c) -> auto& { return c.matting.timeout_seconds; }),

      field<std::size_t>("results_per_task", [](C& c) -> auto& { return c.acquisition.results_per_task; }),
      field<double>("rate_limit_per_second", [](C& c) -> auto& { return c.acquisition.rate_limit_per_second; }),
      field<int>("retries", [](C& c) -> auto& { return c.acquisition.retries; }),
      field<int>("backoff_ms", [](C& c) -> auto& { return c.acquisition.backoff_ms; }),
      field<std::size_t>("distractor_category_count", [](C& c) -> auto& { return c.acquisition.distractor_category_count; }),

      field<std::size_t>("train_count", [](C& c) -> auto& { return c.generation.split_counts[0]; }),
      field<std::size_t>("val_count", [](C& c) -> auto& { return c.generation.split_counts[1]; }),
      field<std::size_t>("test_count", [](C& c) -> auto& { return c.generation.split_counts[2]; }),
      field<std::array<double, 3>>("split_ratios", [](C& c) -> auto& { return c.generation.split_ratios; }),
      field<std::vector<std::string>>("excluded_categories", [](C& c) -> auto& { return c.generation.excluded_categories; }),
      field<std::string>("category_name", [](C& c) -> auto& { return c.generation.category_name; }),
      Binding{"blend_methods",
              [](const C& c) { return nlohmann::ordered_json(method_names(c.generation.methods)); },
              [](C& c, const nlohmann::json& j) {
                c.generation.methods.clear();
                for (const auto& name : j.get<std::vector<std::string>>())
                  c.generation.methods.push_back(parse_blend_method(name));
              }},
      field<double>("min_visible_fraction", [](C& c) -> auto& { return c.generation.min_visible_fraction; }),
      field<int>("jpeg_quality", [](C& c) -> auto& { return c.generation.jpeg_quality; }),
  };
  return table;
}

}  // namespace

void PipelineConfig::validate() const {
  filter.validate();
  layout.validate();
  blend.validate();
  if (blend.opacity_cutoff_alpha != filter.opacity_cutoff_alpha)
    throw ConfigError("blend and filter opacity cutoffs differ");
  if (!(matting.flood_fill_tolerance >= 0.0)) throw ConfigError("flood_fill_tolerance must be >= 0");
  if (matting.timeout_seconds < 1) throw ConfigError("matting_timeout_seconds must be >= 1");
  if (acquisition.results_per_task < 1) throw ConfigError("results_per_task must be >= 1");
  if (!(acquisition.rate_limit_per_second > 0.0)) throw ConfigError("rate_limit_per_second must be > 0");
  if (acquisition.retries < 0 || acquisition.backoff_ms < 0) throw ConfigError("retries/backoff must be >= 0");
  double sum = 0;
  for (double r : generation.split_ratios) {
    if (r < 0) throw ConfigError("split_ratios must be >= 0");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split_ratios must sum to 1");
  if (generation.methods.empty()) throw ConfigError("blend_methods must not be empty");
  for (std::size_t i = 0; i < generation.methods.size(); ++i)
    for (std::size_t k = i + 1; k < generation.methods.size(); ++k)
      if (generation.methods[i] == generation.methods[k]) throw ConfigError("duplicate blend method");
  if (!(generation.min_visible_fraction >= 0.0 && generation.min_visible_fraction <= 1.0))
    throw ConfigError("min_visible_fraction must be in [0, 1]");
  if (generation.jpeg_quality < 1 || generation.jpeg_quality > 100)
    throw ConfigError("jpeg_quality must be in [1, 100]");
  if (generation.category_name.empty()) throw ConfigError("category_name must not be empty");
}

nlohmann::ordered_json to_json(const PipelineConfig& config) {
  nlohmann::ordered_json j;
  for (const auto& b : bindings()) j[b.key] = b.get(config);
  return j;
}

PipelineConfig apply_config_json(PipelineConfig base, const nlohmann::json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    const auto& table = bindings();
    const auto it = std::find_if(table.begin(), table.end(), [&](const Binding& b) { return key == b.key; });
    if (it == table.end()) throw ConfigError("unknown config key '" + key + "'");
    try {
      it->set(base, value);
    } catch (const nlohmann::json::exception& e) {
      throw ConfigError("bad value for '" + key + "': " + e.what());
    }
  }
  base.blend.opacity_cutoff_alpha = base.filter.opacity_cutoff_alpha;
  base.validate();
  return base;
}

PipelineConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  return apply_config_json(PipelineConfig{}, j);
}

}  // namespace synthset
