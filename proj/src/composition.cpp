#include "synthset/composition.hpp"

#include "synthset/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace synthset {

void LayoutConfig::validate() const {
  const auto ordered = [](auto range, const char* name) {
    if (range[0] > range[1]) throw ConfigError(std::string(name) + " is not well-ordered");
  };
  ordered(n_objects_range, "n_objects_range");
  ordered(n_distractors_range, "n_distractors_range");
  ordered(scale_fraction_range, "scale_fraction_range");
  ordered(rotation_range, "rotation_range");
  if (n_objects_range[0] < 1) throw ConfigError("n_objects_range must start at >= 1");
  if (n_distractors_range[0] < 0) throw ConfigError("n_distractors_range must be >= 0");
  if (!(scale_fraction_range[0] > 0.0)) throw ConfigError("scale_fraction_range must be > 0");
  if (!(max_upscale >= 1.0)) throw ConfigError("max_upscale must be >= 1");
  if (!(max_pairwise_iou >= 0.0 && max_pairwise_iou <= 1.0))
    throw ConfigError("max_pairwise_iou must be in [0, 1]");
  if (placement_attempts < 1 || layout_attempts < 1 || max_layout_resamples < 1)
    throw ConfigError("attempt counts must be >= 1");
}

nlohmann::ordered_json to_json(const Layout& layout) {
  nlohmann::ordered_json j;
  j["sample_index"] = layout.sample_index;
  j["seed"] = layout.seed;
  j["background_ref"] = layout.background_ref;
  j["scene_category"] = layout.scene_category;
  j["bg_width"] = layout.bg_width;
  j["bg_height"] = layout.bg_height;
  auto& items = j["placements"] = nlohmann::ordered_json::array();
  for (const auto& p : layout.placements) {
    nlohmann::ordered_json e;
    e["cutout_id"] = p.cutout_id;
    e["role"] = to_string(p.role);
    e["scale"] = p.scale;
    e["rotation"] = p.rotation_deg;
    e["top_left"] = {p.x, p.y};
    e["size"] = {p.width, p.height};
    e["source_size"] = {p.source_width, p.source_height};
    e["z"] = p.z;
    items.push_back(std::move(e));
  }
  j["log"] = layout.log;
  return j;
}

Layout layout_from_json(const nlohmann::json& j) {
  Layout layout;
  layout.sample_index = j.at("sample_index").get<std::uint64_t>();
  layout.seed = j.at("seed").get<std::uint64_t>();
  layout.background_ref = j.at("background_ref").get<std::string>();
  layout.scene_category = j.at("scene_category").get<std::string>();
  layout.bg_width = j.at("bg_width").get<int>();
  layout.bg_height = j.at("bg_height").get<int>();
  for (const auto& e : j.at("placements")) {
    Placement p;
    p.cutout_id = e.at("cutout_id").get<std::string>();
    p.role = parse_role(e.at("role").get<std::string>());
    p.scale = e.at("scale").get<double>();
    p.rotation_deg = e.at("rotation").get<double>();
    p.x = e.at("top_left")[0].get<int>();
    p.y = e.at("top_left")[1].get<int>();
    p.width = e.at("size")[0].get<int>();
    p.height = e.at("size")[1].get<int>();
    p.source_width = e.at("source_size")[0].get<int>();
    p.source_height = e.at("source_size")[1].get<int>();
    p.z = e.at("z").get<int>();
    layout.placements.push_back(std::move(p));
  }
  if (j.contains("log")) layout.log = j["log"].get<std::vector<std::string>>();
  return layout;
}

namespace {

// cos/sin with exact values at multiples of 90 degrees.
std::array<double, 2> cos_sin(double degrees) {
  double d = std::fmod(degrees, 360.0);
  if (d < 0) d += 360.0;
  if (d == 0.0) return {1.0, 0.0};
  if (d == 90.0) return {0.0, 1.0};
  if (d == 180.0) return {-1.0, 0.0};
  if (d == 270.0) return {0.0, -1.0};
  const double r = d * std::numbers::pi / 180.0;
  return {std::cos(r), std::sin(r)};
}

constexpr double kExtentSlack = 1e-9;

}  // namespace

std::optional<std::array<int, 2>> transformed_extent(int width, int height, double scale,
                                                     double rotation_deg) {
  if (!(scale > 0.0)) throw DataError("scale must be positive");
  const auto [c, s] = cos_sin(rotation_deg);
  const double ew = scale * (width * std::abs(c) + height * std::abs(s));
  const double eh = scale * (width * std::abs(s) + height * std::abs(c));
  if (ew < 1.0 || eh < 1.0) return std::nullopt;
  return std::array<int, 2>{static_cast<int>(std::ceil(ew - kExtentSlack)),
                            static_cast<int>(std::ceil(eh - kExtentSlack))};
}

RgbaImage transform_cutout(const RgbaImage& cutout, double scale, double rotation_deg) {
  const int w = static_cast<int>(cutout.width()), h = static_cast<int>(cutout.height());
  const auto extent = transformed_extent(w, h, scale, rotation_deg);
  if (!extent) throw DataError("transformed cutout would be smaller than one pixel");
  const int out_w = (*extent)[0], out_h = (*extent)[1];
  const auto [c, s] = cos_sin(rotation_deg);

  RgbaImage out(out_w, out_h);
  const auto rgb_at = [&](int ch, int x, int y) {
    return static_cast<double>(cutout[ch](std::clamp(y, 0, h - 1), std::clamp(x, 0, w - 1)));
  };
  const auto alpha_at = [&](int x, int y) {
    return (x < 0 || y < 0 || x >= w || y >= h) ? 0.0 : static_cast<double>(cutout[3](y, x));
  };
  const auto to_u8 = [](double v) {
    return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
  };

  for (int oy = 0; oy < out_h; ++oy)
    for (int ox = 0; ox < out_w; ++ox) {
      const double px = (ox + 0.5 - out_w / 2.0) / scale;
      const double py = (oy + 0.5 - out_h / 2.0) / scale;
      // Inverse of a counterclockwise on-screen rotation (y axis points down).
      const double sx = c * px - s * py + w / 2.0 - 0.5;
      const double sy = s * px + c * py + h / 2.0 - 0.5;
      const int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      const double fx = sx - x0, fy = sy - y0;
      const double w00 = (1 - fx) * (1 - fy), w10 = fx * (1 - fy), w01 = (1 - fx) * fy, w11 = fx * fy;
      for (int ch = 0; ch < 3; ++ch) {
        const double v = w00 * rgb_at(ch, x0, y0) + w10 * rgb_at(ch, x0 + 1, y0) +
                         w01 * rgb_at(ch, x0, y0 + 1) + w11 * rgb_at(ch, x0 + 1, y0 + 1);
        out[ch](oy, ox) = to_u8(v);
      }
      const double a = w00 * alpha_at(x0, y0) + w10 * alpha_at(x0 + 1, y0) +
                       w01 * alpha_at(x0, y0 + 1) + w11 * alpha_at(x0 + 1, y0 + 1);
      out[3](oy, ox) = to_u8(a);
    }
  return out;
}

RgbaImage crop_to_content(const RgbaImage& cutout) {
  const PixelBox box = tight_box(cutout[3] > 0);
  if (box.w == 0) throw DataError("cutout is fully transparent");
  RgbaImage out;
  for (int ch = 0; ch < 4; ++ch) out[ch] = cutout[ch].block(box.y, box.x, box.h, box.w);
  return out;
}

double scale_for_fraction(double fraction, int cutout_longer_side, int bg_longer_side,
                          const LayoutConfig& config) {
  const double scale = fraction * bg_longer_side / cutout_longer_side;
  return std::min(scale, config.max_upscale);
}

bool scale_usable(int cutout_longer_side, int bg_longer_side, const LayoutConfig& config) {
  return config.max_upscale * cutout_longer_side >= config.scale_fraction_range[0] * bg_longer_side;
}

std::optional<double> sample_scale(int cutout_longer_side, int bg_longer_side,
                                   const LayoutConfig& config, CounterRng& rng) {
  if (cutout_longer_side < 1 || bg_longer_side < 1) throw DataError("sides must be >= 1");
  if (!scale_usable(cutout_longer_side, bg_longer_side, config)) return std::nullopt;
  const double fraction = rng.uniform(config.scale_fraction_range[0], config.scale_fraction_range[1]);
  return scale_for_fraction(fraction, cutout_longer_side, bg_longer_side, config);
}

Layout sample_layout(int bg_width, int bg_height, std::span<const PoolEntry> objects,
                     std::span<const PoolEntry> distractors, const LayoutConfig& config,
                     CounterRng& rng) {
  config.validate();
  const int bg_longer = std::max(bg_width, bg_height);
  const auto usable = [&](std::span<const PoolEntry> pool, const char* name) {
    std::vector<const PoolEntry*> out;
    for (const auto& e : pool)
      if (e.width >= 1 && e.height >= 1 && scale_usable(e.longer_side(), bg_longer, config))
        out.push_back(&e);
    if (out.empty())
      throw DataError(std::string(name) + " pool has no cutout usable at background size " +
                      std::to_string(bg_width) + "x" + std::to_string(bg_height));
    return out;
  };
  const auto object_pool = usable(objects, "object");
  std::vector<const PoolEntry*> distractor_pool;
  if (config.n_distractors_range[1] > 0) {
    if (distractors.empty() && config.n_distractors_range[0] > 0)
      throw DataError("distractor pool is empty");
    if (!distractors.empty()) distractor_pool = usable(distractors, "distractor");
  }

  Layout layout;
  layout.bg_width = bg_width;
  layout.bg_height = bg_height;

  for (int resample = 0; resample < config.max_layout_resamples; ++resample) {
    layout.placements.clear();
    const int n_objects = static_cast<int>(rng.uniform_int(config.n_objects_range[0], config.n_objects_range[1]));
    int n_distractors = 0;
    if (!distractor_pool.empty())
      n_distractors = static_cast<int>(rng.uniform_int(config.n_distractors_range[0], config.n_distractors_range[1]));

    std::vector<Role> roles(n_objects, Role::object);
    roles.insert(roles.end(), n_distractors, Role::distractor);
    for (std::size_t i = roles.size(); i > 1; --i)
      std::swap(roles[i - 1], roles[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i) - 1))]);

    int placed_objects = 0;
    for (std::size_t item = 0; item < roles.size(); ++item) {
      const auto& pool = roles[item] == Role::object ? object_pool : distractor_pool;
      const PoolEntry& entry = *pool[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(pool.size()) - 1))];

      std::optional<Placement> accepted;
      for (int round = 0; round < config.layout_attempts && !accepted; ++round) {
        const double scale = *sample_scale(entry.longer_side(), bg_longer, config, rng);
        const double rotation = rng.uniform(config.rotation_range[0], config.rotation_range[1]);
        const auto extent = transformed_extent(entry.width, entry.height, scale, rotation);
        if (!extent || (*extent)[0] > bg_width || (*extent)[1] > bg_height) continue;
        const int w = (*extent)[0], h = (*extent)[1];
        for (int attempt = 0; attempt < config.placement_attempts; ++attempt) {
          const PixelBox box{static_cast<int>(rng.uniform_int(0, bg_width - w)),
                             static_cast<int>(rng.uniform_int(0, bg_height - h)), w, h};
          const bool fits = std::all_of(layout.placements.begin(), layout.placements.end(),
                                        [&](const Placement& p) {
                                          return bbox_iou(box, p.box()) <= config.max_pairwise_iou;
                                        });
          if (!fits) continue;
          accepted = Placement{entry.id, roles[item], scale, rotation, box.x, box.y, w, h,
                               entry.width, entry.height, static_cast<int>(layout.placements.size())};
          break;
        }
      }
      if (accepted) {
        if (accepted->role == Role::object) ++placed_objects;
        layout.placements.push_back(std::move(*accepted));
      } else {
        layout.log.push_back("dropped " + to_string(roles[item]) + " " + entry.id +
                             ": no admissible position");
      }
    }
    if (placed_objects > 0) return layout;
    layout.log.push_back("resampled layout: no object of interest could be placed");
  }
  throw DataError("no admissible layout after " + std::to_string(config.max_layout_resamples) +
                  " resamples");
}

Mask placed_mask(const RgbaImage& transformed, const Placement& placement, int bg_width,
                 int bg_height, int opacity_cutoff_alpha) {
  Mask out = Mask::Constant(bg_height, bg_width, false);
  const PixelBox region = intersect(placement.box(), PixelBox{0, 0, bg_width, bg_height});
  for (int y = region.y; y < region.bottom(); ++y)
    for (int x = region.x; x < region.right(); ++x)
      out(y, x) = transformed[3](y - placement.y, x - placement.x) >= opacity_cutoff_alpha;
  return out;
}

AnnotationResult derive_annotations(const Layout& layout, std::span<const Mask> full_masks,
                                    const std::string& category, double min_visible_fraction) {
  if (full_masks.size() != layout.placements.size())
    throw DataError("one mask per placement is required");
  AnnotationResult result;
  if (full_masks.empty()) return result;

  Mask covered = Mask::Constant(full_masks[0].rows(), full_masks[0].cols(), false);
  std::vector<Mask> visible(full_masks.size());
  // Walk from the top of the paste stack down.
  std::vector<std::size_t> order(full_masks.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return layout.placements[a].z > layout.placements[b].z;
  });
  for (std::size_t i : order) {
    visible[i] = full_masks[i] && !covered;
    covered = covered || full_masks[i];
  }

  for (std::size_t i = 0; i < full_masks.size(); ++i) {
    const Placement& p = layout.placements[i];
    if (p.role != Role::object) continue;
    const auto full_area = full_masks[i].count();
    const auto visible_area = visible[i].count();
    if (full_area == 0 || static_cast<double>(visible_area) < min_visible_fraction * static_cast<double>(full_area)) {
      result.dropped.push_back("sample " + std::to_string(layout.sample_index) + " placement " +
                               std::to_string(i) + " (" + p.cutout_id + "): visible " +
                               std::to_string(visible_area) + " of " + std::to_string(full_area) + " px");
      continue;
    }
    InstanceAnnotation a;
    a.placement_index = i;
    a.category = category;
    a.full_mask = full_masks[i];
    a.visible_mask = std::move(visible[i]);
    a.bbox = tight_box(a.visible_mask);
    a.area = static_cast<std::int64_t>(visible_area);
    result.annotations.push_back(std::move(a));
  }
  return result;
}

}  // namespace synthset
