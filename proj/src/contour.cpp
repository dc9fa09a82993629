#include "synthset/contour.hpp"

#include "synthset/error.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdlib>
#include <deque>

namespace synthset {

std::int64_t twice_signed_area(std::span<const Vertex> polygon) {
  std::int64_t sum = 0;
  const std::size_t n = polygon.size();
  for (std::size_t i = 0; i < n; ++i) {
    const Vertex& a = polygon[i];
    const Vertex& b = polygon[(i + 1) % n];
    sum += a.x() * b.y() - b.x() * a.y();
  }
  return sum;
}

namespace {

std::int64_t cross(const Vertex& o, const Vertex& a, const Vertex& b) {
  return (a.x() - o.x()) * (b.y() - o.y()) - (a.y() - o.y()) * (b.x() - o.x());
}

// Directions in image axes (y down): right, down, left, up.
constexpr std::array<std::array<int, 2>, 4> kDirections{{{1, 0}, {0, 1}, {-1, 0}, {0, -1}}};

int left_of(int d) { return (d + 3) % 4; }
int right_of(int d) { return (d + 1) % 4; }

struct Labels {
  Plane<int> ids;
  std::vector<Eigen::Vector2i> seeds;  // topmost-leftmost pixel (x, y) per component
};

Labels label_components(const Mask& mask) {
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  Labels labels{Plane<int>::Constant(h, w, -1), {}};
  std::deque<Eigen::Vector2i> queue;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x) || labels.ids(y, x) >= 0) continue;
      const int id = static_cast<int>(labels.seeds.size());
      labels.seeds.emplace_back(x, y);
      labels.ids(y, x) = id;
      queue.emplace_back(x, y);
      while (!queue.empty()) {
        const Eigen::Vector2i p = queue.front();
        queue.pop_front();
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = p.x() + dx, ny = p.y() + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h) continue;
            if (!mask(ny, nx) || labels.ids(ny, nx) >= 0) continue;
            labels.ids(ny, nx) = id;
            queue.emplace_back(nx, ny);
          }
      }
    }
  return labels;
}

// Walks the boundary with the component on the right-hand side. At a vertex, the cell ahead
// and to the left wins (which keeps diagonal neighbours joined), then straight, then right.
Polygon trace_component(const Plane<int>& ids, int id, const Eigen::Vector2i& seed) {
  const auto inside = [&](std::int64_t cx, std::int64_t cy) {
    return cx >= 0 && cy >= 0 && cx < ids.cols() && cy < ids.rows() && ids(cy, cx) == id;
  };
  const auto ahead = [&](const Vertex& v, int d, bool left) {
    const auto [dx, dy] = kDirections[d];
    const auto [lx, ly] = kDirections[left_of(d)];
    const int sign = left ? 1 : -1;
    // Twice the cell centre is odd in both axes, so an arithmetic shift gives the floor.
    const std::int64_t cx2 = 2 * v.x() + dx + sign * lx;
    const std::int64_t cy2 = 2 * v.y() + dy + sign * ly;
    return inside(cx2 >> 1, cy2 >> 1);
  };

  const Vertex start(seed.x(), seed.y());
  const int start_dir = 0;
  Vertex v = start;
  int d = start_dir;
  std::vector<Vertex> points;
  std::vector<int> out_dirs;
  do {
    points.push_back(v);
    out_dirs.push_back(d);
    v += Vertex(kDirections[d][0], kDirections[d][1]);
    if (ahead(v, d, true))
      d = left_of(d);
    else if (!ahead(v, d, false))
      d = right_of(d);
  } while (!(v == start && d == start_dir));

  Polygon corners;
  const std::size_t n = points.size();
  for (std::size_t i = 0; i < n; ++i) {
    const int incoming = out_dirs[(i + n - 1) % n];
    if (incoming != out_dirs[i]) corners.push_back(points[i]);
  }
  return corners;
}

Vertex topmost_leftmost(const Polygon& p) {
  return *std::min_element(p.begin(), p.end(), [](const Vertex& a, const Vertex& b) {
    return a.y() != b.y() ? a.y() < b.y() : a.x() < b.x();
  });
}

}  // namespace

Polygon remove_collinear(Polygon polygon) {
  bool changed = true;
  while (changed && polygon.size() > 2) {
    changed = false;
    for (std::size_t i = 0; i < polygon.size() && polygon.size() > 2; ++i) {
      const std::size_t n = polygon.size();
      const Vertex& prev = polygon[(i + n - 1) % n];
      const Vertex& next = polygon[(i + 1) % n];
      if (cross(prev, polygon[i], next) == 0) {
        polygon.erase(polygon.begin() + static_cast<std::ptrdiff_t>(i));
        changed = true;
        break;
      }
    }
  }
  return polygon;
}

std::vector<Polygon> trace_outer_boundaries(const Mask& mask) {
  const Labels labels = label_components(mask);
  std::vector<Polygon> out;
  out.reserve(labels.seeds.size());
  for (std::size_t id = 0; id < labels.seeds.size(); ++id)
    out.push_back(trace_component(labels.ids, static_cast<int>(id), labels.seeds[id]));
  return out;
}

Polygon largest_contour(const Mask& mask) {
  auto polygons = trace_outer_boundaries(mask);
  if (polygons.empty()) throw DataError("empty mask has no contour");
  std::size_t best = 0;
  std::int64_t best_area = -1;
  for (std::size_t i = 0; i < polygons.size(); ++i) {
    const std::int64_t a = std::abs(twice_signed_area(polygons[i]));
    if (a > best_area) {
      best = i;
      best_area = a;
    } else if (a == best_area) {
      const Vertex ti = topmost_leftmost(polygons[i]), tb = topmost_leftmost(polygons[best]);
      if (ti.y() < tb.y() || (ti.y() == tb.y() && ti.x() < tb.x())) best = i;
    }
  }
  return std::move(polygons[best]);
}

Polygon convex_hull(std::span<const Vertex> points) {
  std::vector<Vertex> pts(points.begin(), points.end());
  std::sort(pts.begin(), pts.end(), [](const Vertex& a, const Vertex& b) {
    return a.x() != b.x() ? a.x() < b.x() : a.y() < b.y();
  });
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) throw DataError("degenerate contour");

  Polygon hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, lower = k + 1; i-- > 0;) {
    while (k >= lower && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  if (hull.size() < 3) throw DataError("degenerate contour");
  return hull;
}

Mask rasterize_polygons(std::span<const Polygon> polygons, Eigen::Index width, Eigen::Index height) {
  Mask out = Mask::Constant(height, width, false);
  std::vector<double> xs;
  for (const auto& poly : polygons) {
    const std::size_t n = poly.size();
    if (n < 3) continue;
    for (Eigen::Index y = 0; y < height; ++y) {
      const double yc = static_cast<double>(y) + 0.5;
      xs.clear();
      for (std::size_t i = 0; i < n; ++i) {
        const Vertex& a = poly[i];
        const Vertex& b = poly[(i + 1) % n];
        const double ay = static_cast<double>(a.y()), by = static_cast<double>(b.y());
        if ((ay <= yc) == (by <= yc)) continue;
        const double t = (yc - ay) / (by - ay);
        xs.push_back(static_cast<double>(a.x()) + t * static_cast<double>(b.x() - a.x()));
      }
      std::sort(xs.begin(), xs.end());
      for (std::size_t i = 0; i + 1 < xs.size(); i += 2) {
        for (Eigen::Index x = std::max<Eigen::Index>(0, static_cast<Eigen::Index>(std::ceil(xs[i] - 0.5)));
             x < width && static_cast<double>(x) + 0.5 < xs[i + 1]; ++x)
          out(y, x) = true;
      }
    }
  }
  return out;
}

}  // namespace synthset
