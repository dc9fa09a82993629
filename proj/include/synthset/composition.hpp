#pragma once

#include "synthset/common.hpp"
#include "synthset/raster.hpp"
#include "synthset/rng.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace synthset {

struct LayoutConfig {
  std::array<int, 2> n_objects_range{1, 4};
  std::array<int, 2> n_distractors_range{2, 4};
  std::array<double, 2> scale_fraction_range{0.15, 0.40};
  double max_upscale = 1.2;
  double max_pairwise_iou = 0.5;
  std::array<double, 2> rotation_range{0.0, 360.0};  // degrees, half-open
  int placement_attempts = 50;
  int layout_attempts = 5;
  /// Whole-layout resamples allowed when no object of interest could be placed.
  int max_layout_resamples = 20;

  void validate() const;
};

/// What layout sampling needs to know about a cutout.
struct PoolEntry {
  std::string id;
  int width = 0;
  int height = 0;

  int longer_side() const { return std::max(width, height); }
};

struct Placement {
  std::string cutout_id;
  Role role = Role::object;
  double scale = 1.0;
  double rotation_deg = 0.0;
  int x = 0;  // top-left of the transformed canvas in background pixels
  int y = 0;
  int width = 0;  // transformed canvas size
  int height = 0;
  int source_width = 0;  // cutout size before transformation
  int source_height = 0;
  int z = 0;  // paste order; higher pastes later

  PixelBox box() const { return {x, y, width, height}; }
};

struct Layout {
  std::string background_ref;
  std::string scene_category;
  int bg_width = 0;
  int bg_height = 0;
  std::uint64_t sample_index = 0;
  std::uint64_t seed = 0;
  std::vector<Placement> placements;
  std::vector<std::string> log;  // dropped items and resamples
};

nlohmann::ordered_json to_json(const Layout& layout);
Layout layout_from_json(const nlohmann::json& j);

/// Canvas size of a w x h cutout after scaling and rotation, or nullopt below one pixel.
std::optional<std::array<int, 2>> transformed_extent(int width, int height, double scale,
                                                     double rotation_deg);

/// Scales and rotates (counterclockwise on screen) about the centre. The canvas grows to hold
/// the rotated extent; RGB and alpha are resampled bilinearly, alpha is zero outside the source
/// and RGB is edge-extended there. Throws DataError when the result would be under one pixel.
RgbaImage transform_cutout(const RgbaImage& cutout, double scale, double rotation_deg);

/// Crops to the tight box of non-zero alpha.
RgbaImage crop_to_content(const RgbaImage& cutout);

/// Scale that makes the cutout's longer side `fraction` of the background's, clamped to the
/// upscale limit.
double scale_for_fraction(double fraction, int cutout_longer_side, int bg_longer_side,
                          const LayoutConfig& config);

/// False when even the maximum upscale cannot reach the minimum fraction.
bool scale_usable(int cutout_longer_side, int bg_longer_side, const LayoutConfig& config);

/// Draws a size fraction uniformly and converts it to a scale; nullopt marks an unusable cutout.
std::optional<double> sample_scale(int cutout_longer_side, int bg_longer_side,
                                   const LayoutConfig& config, CounterRng& rng);

template <typename Scalar>
double bbox_iou(const Box<Scalar>& a, const Box<Scalar>& b) {
  const auto inter = intersect(a, b).area();
  const auto uni = a.area() + b.area() - inter;
  if (uni <= Scalar(0)) return 0.0;
  return static_cast<double>(inter) / static_cast<double>(uni);
}

/// Samples counts, cutouts, scales, rotations and positions under the IoU and containment
/// constraints. Throws DataError when a required pool has no usable cutout.
Layout sample_layout(int bg_width, int bg_height, std::span<const PoolEntry> objects,
                     std::span<const PoolEntry> distractors, const LayoutConfig& config,
                     CounterRng& rng);

/// Background-sized mask of the transformed cutout's pixels with alpha >= cutoff.
Mask placed_mask(const RgbaImage& transformed, const Placement& placement, int bg_width,
                 int bg_height, int opacity_cutoff_alpha);

struct InstanceAnnotation {
  std::size_t placement_index = 0;
  std::string category;
  Mask full_mask;
  Mask visible_mask;
  PixelBox bbox;
  std::int64_t area = 0;
};

struct AnnotationResult {
  std::vector<InstanceAnnotation> annotations;
  std::vector<std::string> dropped;
};

/// Visible mask = full mask minus everything pasted later. Only objects of interest are
/// annotated; those with less than `min_visible_fraction` of their area visible are dropped.
AnnotationResult derive_annotations(const Layout& layout, std::span<const Mask> full_masks,
                                    const std::string& category,
                                    double min_visible_fraction = 0.05);

}  // namespace synthset
