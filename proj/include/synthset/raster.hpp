#pragma once

#include <Eigen/Dense>

#include <array>
#include <cstdint>
#include <stdexcept>

namespace synthset {

/// A single image channel, row-major, indexed as (row, col) = (y, x).
template <typename Scalar>
using Plane = Eigen::Array<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

using Mask = Plane<bool>;

/// Planar multi-channel raster. All planes share the same dimensions.
template <typename Scalar, int Channels>
struct Raster {
  static constexpr int channels = Channels;
  using scalar_type = Scalar;

  std::array<Plane<Scalar>, Channels> planes;

  Raster() = default;
  Raster(Eigen::Index width, Eigen::Index height, Scalar fill = Scalar(0)) {
    for (auto& p : planes) p = Plane<Scalar>::Constant(height, width, fill);
  }

  Eigen::Index width() const { return planes[0].cols(); }
  Eigen::Index height() const { return planes[0].rows(); }
  bool empty() const { return planes[0].size() == 0; }

  Plane<Scalar>& operator[](int c) { return planes[c]; }
  const Plane<Scalar>& operator[](int c) const { return planes[c]; }

  bool operator==(const Raster& other) const {
    for (int c = 0; c < Channels; ++c) {
      if (planes[c].rows() != other.planes[c].rows() ||
          planes[c].cols() != other.planes[c].cols() ||
          !(planes[c] == other.planes[c]).all())
        return false;
    }
    return true;
  }
};

using RgbImage = Raster<std::uint8_t, 3>;
using RgbaImage = Raster<std::uint8_t, 4>;

template <int Channels>
using RealRaster = Raster<double, Channels>;

/// Axis-aligned box in pixel units; (x, y) is the top-left corner.
template <typename Scalar>
struct Box {
  Scalar x{}, y{}, w{}, h{};

  Scalar right() const { return x + w; }
  Scalar bottom() const { return y + h; }
  Scalar area() const { return w * h; }
  bool operator==(const Box&) const = default;
};

using PixelBox = Box<int>;

template <typename Scalar>
Box<Scalar> intersect(const Box<Scalar>& a, const Box<Scalar>& b) {
  const Scalar x0 = std::max(a.x, b.x);
  const Scalar y0 = std::max(a.y, b.y);
  const Scalar x1 = std::min(a.right(), b.right());
  const Scalar y1 = std::min(a.bottom(), b.bottom());
  if (x1 <= x0 || y1 <= y0) return {x0, y0, Scalar(0), Scalar(0)};
  return {x0, y0, x1 - x0, y1 - y0};
}

/// Tight bounding box of the set pixels; w = h = 0 when the mask is empty.
inline PixelBox tight_box(const Mask& mask) {
  int x0 = static_cast<int>(mask.cols()), y0 = static_cast<int>(mask.rows());
  int x1 = -1, y1 = -1;
  for (Eigen::Index y = 0; y < mask.rows(); ++y)
    for (Eigen::Index x = 0; x < mask.cols(); ++x)
      if (mask(y, x)) {
        x0 = std::min<int>(x0, static_cast<int>(x));
        y0 = std::min<int>(y0, static_cast<int>(y));
        x1 = std::max<int>(x1, static_cast<int>(x));
        y1 = std::max<int>(y1, static_cast<int>(y));
      }
  if (x1 < 0) return {0, 0, 0, 0};
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

/// Binary mask of pixels whose alpha is at least `cutoff`.
inline Mask alpha_at_least(const RgbaImage& image, int cutoff) {
  return image[3].cast<int>() >= cutoff;
}

inline RgbImage drop_alpha(const RgbaImage& image) {
  RgbImage out;
  for (int c = 0; c < 3; ++c) out[c] = image[c];
  return out;
}

inline RgbaImage with_alpha(const RgbImage& image, std::uint8_t alpha = 255) {
  RgbaImage out;
  for (int c = 0; c < 3; ++c) out[c] = image[c];
  out[3] = Plane<std::uint8_t>::Constant(image.height(), image.width(), alpha);
  return out;
}

}  // namespace synthset
