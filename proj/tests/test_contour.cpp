#include "synthset/contour.hpp"
#include "synthset/error.hpp"

#include "testkit.hpp"

#include <doctest.h>

#include <algorithm>

using namespace synthset;

namespace {

std::vector<std::pair<std::int64_t, std::int64_t>> as_pairs(const Polygon& p) {
  std::vector<std::pair<std::int64_t, std::int64_t>> out;
  for (const auto& v : p) out.emplace_back(v.x(), v.y());
  return out;
}

Mask square(int size, int pad) {
  Mask m = Mask::Constant(size + 2 * pad, size + 2 * pad, false);
  m.block(pad, pad, size, size).setConstant(true);
  return m;
}

}  // namespace

TEST_CASE("filled square traces to its four corners") {
  const Polygon p = largest_contour(square(10, 2));
  REQUIRE(p.size() == 4);
  CHECK(polygon_area(p) == 100.0);
  CHECK(p[0] == Vertex(2, 2));
}

TEST_CASE("largest of two squares wins") {
  Mask m = Mask::Constant(30, 30, false);
  m.block(1, 1, 5, 5).setConstant(true);
  m.block(10, 10, 10, 10).setConstant(true);
  CHECK(trace_outer_boundaries(m).size() == 2);
  CHECK(polygon_area(largest_contour(m)) == 100.0);
}

TEST_CASE("plus shape: 12 vertices, area 5, hull octagon of area 7") {
  const Polygon p = largest_contour(testkit::plus_mask());
  CHECK(p.size() == 12);
  CHECK(twice_signed_area(p) != 0);
  CHECK(polygon_area(p) == 5.0);
  const Polygon hull = convex_hull(p);
  CHECK(hull.size() == 8);
  CHECK(polygon_area(hull) == 7.0);
  CHECK(twice_signed_area(hull) > 0);  // counterclockwise
}

TEST_CASE("L shape: area 3, hull 3.5") {
  const Polygon p = largest_contour(testkit::l_mask());
  CHECK(polygon_area(p) == 3.0);
  CHECK(polygon_area(convex_hull(p)) == 3.5);
}

TEST_CASE("hull examples") {
  const Polygon sq{{0, 0}, {4, 0}, {4, 4}, {0, 4}};
  auto h = convex_hull(sq);
  CHECK(h.size() == 4);
  auto with_centre = sq;
  with_centre.emplace_back(2, 2);
  CHECK(convex_hull(with_centre).size() == 4);
  const Polygon line{{0, 0}, {1, 1}, {2, 2}};
  CHECK_THROWS_AS(convex_hull(line), DataError);
}

TEST_CASE("diagonal pixels form one 8-connected component") {
  const Mask m = testkit::mask_from_rows({"#..", ".#.", "..#"});
  const auto polys = trace_outer_boundaries(m);
  REQUIRE(polys.size() == 1);
  CHECK(polygon_area(polys[0]) == 3.0);
}

TEST_CASE("holes are enclosed by the outer boundary") {
  const Mask ring = testkit::mask_from_rows({"###", "#.#", "###"});
  CHECK(polygon_area(largest_contour(ring)) == 9.0);
}

TEST_CASE("empty mask has no contour") {
  CHECK_THROWS_AS(largest_contour(Mask::Constant(4, 4, false)), DataError);
}

TEST_CASE("remove_collinear keeps corners only") {
  const Polygon p{{0, 0}, {1, 0}, {2, 0}, {2, 2}, {0, 2}, {0, 1}};
  CHECK(remove_collinear(p).size() == 4);
}

TEST_CASE("traced areas and hulls match brute force on random rasters") {
  CounterRng rng(2024);
  for (int trial = 0; trial < 60; ++trial) {
    const int w = static_cast<int>(rng.uniform_int(2, 48)), h = static_cast<int>(rng.uniform_int(2, 48));
    const Mask m = testkit::random_blob_mask(w, h, rng);
    auto oracle = testkit::naive_filled_areas(m);
    std::vector<std::int64_t> traced;
    for (const auto& p : trace_outer_boundaries(m)) traced.push_back(std::abs(twice_signed_area(p)) / 2);
    CHECK(traced == oracle);  // same components in the same raster order

    const Polygon contour = largest_contour(m);
    const auto naive = testkit::naive_hull(testkit::component_extreme_corners(m));
    if (naive.twice_area == 0) {
      CHECK_THROWS_AS(convex_hull(contour), DataError);
      continue;
    }
    const Polygon hull = convex_hull(contour);
    const auto pairs = as_pairs(hull);
    CHECK(std::set(pairs.begin(), pairs.end()) == naive.vertices);
    CHECK(twice_signed_area(hull) == naive.twice_area);
  }
}

TEST_CASE("rasterizing a traced polygon reproduces the component") {
  CounterRng rng(99);
  for (int trial = 0; trial < 20; ++trial) {
    Mask m = Mask::Constant(20, 24, false);
    const int x0 = static_cast<int>(rng.uniform_int(0, 10)), y0 = static_cast<int>(rng.uniform_int(0, 8));
    m.block(y0, x0, rng.uniform_int(1, 10), rng.uniform_int(1, 12)).setConstant(true);
    m(y0, x0) = false;  // notch
    if (!m.any()) continue;
    const auto polys = trace_outer_boundaries(m);
    const Mask back = rasterize_polygons(polys, m.cols(), m.rows());
    CHECK((back == m).all());
  }
}
