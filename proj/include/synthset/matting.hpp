#pragma once

#include "synthset/common.hpp"
#include "synthset/error.hpp"
#include "synthset/raster.hpp"
#include "synthset/selection.hpp"

#include <chrono>
#include <optional>
#include <string>

namespace synthset {

/// An RGBA object image with its provenance and, once scored, its quality scores.
struct Cutout {
  RgbaImage pixels;
  Role role = Role::object;
  std::string source_id;
  std::optional<SelectionScores> scores;
};

/// Wraps pixels as a cutout; throws DataError if no pixel has alpha > 0.
Cutout make_cutout(RgbaImage pixels, Role role, std::string source_id);

class MattingError : public DataError {
 public:
  using DataError::DataError;
};

/// Runs `command_template` through /bin/sh with `{in}` replaced by a PNG of `image` and `{out}`
/// by the path the tool must write an RGBA PNG to. The tool's pixels are returned verbatim.
/// Throws MattingError on non-zero exit, timeout, or output without alpha / wrong size.
RgbaImage remove_background_external(const RgbImage& image, const std::string& command_template,
                                     std::chrono::milliseconds timeout = std::chrono::seconds(60));

/// Border-seeded region growing: every border pixel seeds a background region that absorbs
/// 4-neighbours within `color_tolerance` (Euclidean RGB) of the region's running mean. The
/// binary alpha is then opened and closed with a 3x3 square, and background pockets that lost
/// their border connection are filled. Throws MattingError("no foreground") if nothing remains.
RgbaImage flood_fill_matte(const RgbImage& image, double color_tolerance = 30.0);

/// 3x3 binary erosion/dilation; pixels outside the raster count as unset.
Mask erode3(const Mask& mask);
Mask dilate3(const Mask& mask);

}  // namespace synthset
