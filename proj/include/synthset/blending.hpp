#pragma once

#include "synthset/composition.hpp"
#include "synthset/raster.hpp"
#include "synthset/rng.hpp"

#include <span>
#include <string>
#include <vector>

namespace synthset {

enum class BlendMethod { none, gaussian, motion, poisson };

std::string to_string(BlendMethod method);
BlendMethod parse_blend_method(std::string_view text);
inline const std::vector<BlendMethod>& all_blend_methods() {
  static const std::vector<BlendMethod> all{BlendMethod::none, BlendMethod::gaussian,
                                            BlendMethod::motion, BlendMethod::poisson};
  return all;
}

struct BlendParams {
  double gaussian_sigma = 2.0;
  int motion_length_min = 3;
  int motion_length_max = 11;
  std::array<double, 2> motion_angle_range{0.0, 180.0};
  double poisson_tolerance = 1e-4;
  int poisson_max_iters = 10000;
  int opacity_cutoff_alpha = 243;

  void validate() const;
};

/// A transformed cutout positioned on the background; `box` is its canvas.
struct PlacedCutout {
  PixelBox box;
  const RgbaImage* pixels = nullptr;
};

/// Alpha-over in paste order: round((a * src + (255 - a) * dst) / 255).
RgbImage composite_none(const RgbImage& bg, std::span<const PlacedCutout> placed);

/// Normalized Gaussian taps for radius ceil(3 sigma).
std::vector<double> gaussian_kernel(double sigma);

/// Each cutout's alpha is blurred with the Gaussian (and rounded) before alpha-over.
RgbImage composite_gaussian(const RgbImage& bg, std::span<const PlacedCutout> placed, double sigma);

struct MotionKernel {
  int length = 3;
  double angle_deg = 0.0;
};

/// Normalized line kernel of odd `length` through the centre at `angle_deg`, as a
/// length x length plane.
Plane<double> motion_kernel(const MotionKernel& kernel);

/// Premultiplied RGBA of each cutout is convolved with its own line kernel, drawn from `rng`
/// in paste order, then composited. The drawn kernels are appended to `chosen` when given.
RgbImage composite_motion(const RgbImage& bg, std::span<const PlacedCutout> placed, CounterRng& rng,
                          const BlendParams& params, std::vector<MotionKernel>* chosen = nullptr);

struct PoissonPlacementStats {
  std::size_t placement = 0;
  std::size_t domain_size = 0;
  bool fallback = false;  // empty domain, pasted with alpha-over instead
  bool converged = true;
  int iterations = 0;
  double residual = 0.0;          // solver-reported
  double posthoc_residual = 0.0;  // recomputed from raw planes
};

/// Seamless cloning of each cutout's opaque region (alpha >= cutoff), in paste order; the
/// Dirichlet values come from the composite so far.
RgbImage composite_poisson(const RgbImage& bg, std::span<const PlacedCutout> placed,
                           const BlendParams& params,
                           std::vector<PoissonPlacementStats>* stats = nullptr);

struct CompositeSample {
  BlendMethod method = BlendMethod::none;
  std::string file_name;
  RgbImage image;
  std::vector<PoissonPlacementStats> poisson;
  std::vector<MotionKernel> motion;
};

struct RenderedLayout {
  std::vector<CompositeSample> variants;
  AnnotationResult annotations;  // shared by every variant
};

/// `<split>_<index>_<method>.jpg`
std::string variant_file_name(const std::string& split, std::uint64_t sample_index, BlendMethod method);

/// Transforms each placement's cutout once, derives annotations, and renders one image per
/// method. `cutouts[i]` is the untransformed cutout of placement i.
RenderedLayout render_variants(const RgbImage& bg, const Layout& layout,
                               std::span<const RgbaImage* const> cutouts,
                               std::span<const BlendMethod> methods, const BlendParams& params,
                               CounterRng& rng, const std::string& split,
                               const std::string& category, double min_visible_fraction = 0.05);

}  // namespace synthset
