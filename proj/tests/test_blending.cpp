#include "synthset/blending.hpp"
#include "synthset/error.hpp"

#include "testkit.hpp"

#include <doctest.h>

#include <cmath>

using namespace synthset;

namespace {

RgbaImage opaque(int w, int h, std::array<int, 3> rgb, int alpha = 255) {
  RgbaImage img(w, h);
  for (int c = 0; c < 3; ++c) img[c].setConstant(static_cast<std::uint8_t>(rgb[c]));
  img[3].setConstant(static_cast<std::uint8_t>(alpha));
  return img;
}

Layout single_layout(int bw, int bh, const RgbaImage& cut, int x, int y) {
  Layout layout;
  layout.bg_width = bw;
  layout.bg_height = bh;
  layout.sample_index = 7;
  Placement p;
  p.cutout_id = "a";
  p.x = x;
  p.y = y;
  p.width = p.source_width = static_cast<int>(cut.width());
  p.height = p.source_height = static_cast<int>(cut.height());
  layout.placements.push_back(p);
  return layout;
}

}  // namespace

TEST_CASE("no blending is the identity without cutouts") {
  CounterRng rng(1);
  RgbImage bg = testkit::solid(30, 20, {90, 80, 70});
  testkit::add_noise(bg, 20, rng);
  CHECK(composite_none(bg, {}) == bg);
}

TEST_CASE("opaque and half-transparent alpha-over") {
  const RgbImage bg = testkit::solid(10, 10, {50, 50, 50});
  const RgbaImage full = opaque(4, 4, {200, 100, 0});
  const RgbaImage half = opaque(4, 4, {200, 100, 0}, 128);
  const PlacedCutout a{{2, 3, 4, 4}, &full}, b{{2, 3, 4, 4}, &half};
  const RgbImage out_full = composite_none(bg, std::span(&a, 1));
  CHECK(out_full[0](3, 2) == 200);
  CHECK(out_full[1](6, 5) == 100);
  CHECK(out_full[2](4, 4) == 0);
  CHECK(out_full[0](2, 2) == 50);
  const RgbImage out_half = composite_none(bg, std::span(&b, 1));
  // round((128 * 200 + 127 * 50) / 255) = round(125.29)
  CHECK(out_half[0](3, 2) == 125);
  CHECK(out_half[1](3, 2) == static_cast<int>(std::lround((128.0 * 100 + 127.0 * 50) / 255.0)));
}

TEST_CASE("gaussian kernel is normalized with radius ceil(3 sigma)") {
  for (double sigma : {0.5, 1.0, 2.0, 3.3}) {
    const auto taps = gaussian_kernel(sigma);
    CHECK(taps.size() == static_cast<std::size_t>(2 * std::ceil(3 * sigma) + 1));
    double sum = 0;
    for (double t : taps) sum += t;
    CHECK(sum == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("gaussian edge profile matches direct convolution of the alpha step") {
  const RgbImage bg = testkit::solid(60, 60, {0, 0, 0});
  const RgbaImage cut = opaque(20, 40, {255, 255, 255});
  const PlacedCutout p{{20, 10, 20, 40}, &cut};
  const RgbImage out = composite_gaussian(bg, std::span(&p, 1), 2.0);

  std::vector<double> step(60, 0.0);
  for (int x = 20; x < 40; ++x) step[static_cast<std::size_t>(x)] = 1.0;
  const auto profile = testkit::brute_gaussian_1d(step, 2.0);
  for (int x = 0; x < 60; ++x) {
    const long expected = std::lround(255.0 * profile[static_cast<std::size_t>(x)]);
    CHECK(out[0](30, x) == expected);
  }
}

TEST_CASE("blending a cutout of the background colour changes nothing") {
  const RgbImage bg = testkit::solid(40, 40, {120, 60, 30});
  CounterRng rng(3);
  RgbaImage cut = testkit::shape_cutout(16, 16, {120, 60, 30}, true, true, rng);
  for (int c = 0; c < 3; ++c) cut[c].setConstant(static_cast<std::uint8_t>(bg[c](0, 0)));
  const PlacedCutout p{{12, 12, 16, 16}, &cut};
  BlendParams params;
  CHECK(composite_none(bg, std::span(&p, 1)) == bg);
  CHECK(composite_gaussian(bg, std::span(&p, 1), 2.0) == bg);
  CounterRng motion_rng(4);
  CHECK(composite_motion(bg, std::span(&p, 1), motion_rng, params) == bg);
  CHECK(composite_poisson(bg, std::span(&p, 1), params) == bg);
}

TEST_CASE("motion kernels are normalized lines") {
  for (int length : {3, 5, 11})
    for (double angle : {0.0, 30.0, 45.0, 90.0, 135.0, 179.0}) {
      const Plane<double> k = motion_kernel({length, angle});
      CHECK(k.sum() == doctest::Approx(1.0).epsilon(1e-12));
      CHECK(k(length / 2, length / 2) > 0.0);
    }
  const Plane<double> h = motion_kernel({3, 0.0});
  CHECK(h.row(1).sum() == doctest::Approx(1.0));
  const Plane<double> v = motion_kernel({3, 90.0});
  CHECK(v.col(1).sum() == doctest::Approx(1.0));
  CHECK_THROWS_AS(motion_kernel({4, 0.0}), ConfigError);
}

TEST_CASE("horizontal motion blur smears the left and right edges by thirds") {
  const RgbImage bg = testkit::solid(30, 20, {0, 0, 0});
  const RgbaImage cut = opaque(10, 10, {255, 255, 255});
  const PlacedCutout p{{10, 5, 10, 10}, &cut};
  BlendParams params;
  params.motion_length_min = params.motion_length_max = 3;
  params.motion_angle_range = {0.0, 0.0};
  CounterRng rng(5);
  std::vector<MotionKernel> chosen;
  const RgbImage out = composite_motion(bg, std::span(&p, 1), rng, params, &chosen);
  REQUIRE(chosen.size() == 1);
  CHECK(chosen[0].length == 3);
  CHECK(out[0](10, 9) == 85);    // 255 / 3
  CHECK(out[0](10, 10) == 170);  // 2 * 255 / 3
  CHECK(out[0](10, 11) == 255);
  CHECK(out[0](10, 20) == 85);
  CHECK(out[0](10, 8) == 0);
  CHECK(out[0](4, 12) == 0);  // vertical edges stay sharp
}

TEST_CASE("render_variants produces one image per method and leaves far pixels alone") {
  CounterRng rng(6);
  RgbImage bg = testkit::solid(80, 60, {40, 90, 140});
  testkit::add_noise(bg, 15, rng);
  const RgbaImage cut = testkit::shape_cutout(20, 16, {220, 180, 30}, false, true, rng);
  const Layout layout = single_layout(80, 60, cut, 30, 20);
  const RgbaImage* cutouts[] = {&cut};
  BlendParams params;

  CounterRng render_rng(7);
  const auto all = render_variants(bg, layout, cutouts, all_blend_methods(), params, render_rng, "val", "parcel");
  REQUIRE(all.variants.size() == 4);
  CHECK(all.variants[3].file_name == "val_7_poisson.jpg");
  REQUIRE(all.annotations.annotations.size() == 1);
  const int reach = static_cast<int>(std::ceil(3 * params.gaussian_sigma));
  for (const auto& v : all.variants) {
    for (int y = 0; y < 60; ++y)
      for (int x = 0; x < 80; ++x) {
        const bool near = x >= 30 - reach && x < 50 + reach && y >= 20 - reach && y < 36 + reach;
        if (near) continue;
        for (int c = 0; c < 3; ++c) REQUIRE(v.image[c](y, x) == bg[c](y, x));
      }
  }
  // Poisson only rewrites its domain, the opaque part of the cutout.
  const Mask& mask = all.annotations.annotations[0].full_mask;
  const RgbImage& poisson = all.variants[3].image;
  for (int y = 0; y < 60; ++y)
    for (int x = 0; x < 80; ++x)
      if (!mask(y, x))
        for (int c = 0; c < 3; ++c) {
          // Pixels of the soft fringe are neither in the domain nor pasted.
          REQUIRE(poisson[c](y, x) == bg[c](y, x));
        }
  REQUIRE(all.variants[3].poisson.size() == 1);
  CHECK(all.variants[3].poisson[0].converged);

  CounterRng again(7);
  const auto none_only = render_variants(bg, layout, cutouts, std::vector{BlendMethod::none}, params, again, "val", "parcel");
  REQUIRE(none_only.variants.size() == 1);
  CHECK(none_only.variants[0].image == all.variants[0].image);
  CHECK((none_only.annotations.annotations[0].visible_mask == mask).all());
}

TEST_CASE("blend method names round trip") {
  for (BlendMethod m : all_blend_methods()) CHECK(parse_blend_method(to_string(m)) == m);
  CHECK_THROWS_AS(parse_blend_method("laplacian"), ConfigError);
}
