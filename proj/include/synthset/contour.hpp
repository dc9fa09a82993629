#pragma once

#include "synthset/raster.hpp"

#include <Eigen/Core>

#include <cstdint>
#include <span>
#include <vector>

namespace synthset {

/// Lattice point on pixel-boundary coordinates: pixel (row r, col c) covers [c, c+1] x [r, r+1].
using Vertex = Eigen::Matrix<std::int64_t, 2, 1>;
using Polygon = std::vector<Vertex>;

/// Twice the signed shoelace area. Exact for lattice polygons.
std::int64_t twice_signed_area(std::span<const Vertex> polygon);

inline double polygon_area(std::span<const Vertex> polygon) {
  const auto twice = twice_signed_area(polygon);
  return static_cast<double>(twice < 0 ? -twice : twice) / 2.0;
}

/// Drops vertices lying on the straight segment between their neighbours.
Polygon remove_collinear(Polygon polygon);

/// Outer boundary of every 8-connected foreground component, traced along pixel edges.
/// Components are returned in raster order of their topmost-leftmost pixel; each polygon lists
/// only its corner vertices and starts at that pixel's top-left corner.
std::vector<Polygon> trace_outer_boundaries(const Mask& mask);

/// Outer boundary with the largest enclosed area. Ties go to the polygon whose topmost-leftmost
/// vertex has the smaller (row, col). Throws DataError on an empty mask.
Polygon largest_contour(const Mask& mask);

/// Monotone-chain convex hull, counterclockwise in (x, y) axes, without collinear vertices.
/// Throws DataError("degenerate contour") when fewer than three non-collinear points exist.
Polygon convex_hull(std::span<const Vertex> points);

/// Pixels whose centers lie inside any of the polygons (even-odd rule per polygon).
Mask rasterize_polygons(std::span<const Polygon> polygons, Eigen::Index width, Eigen::Index height);

}  // namespace synthset
