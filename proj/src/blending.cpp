#include "synthset/blending.hpp"

#include "synthset/error.hpp"
#include "synthset/poisson.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace synthset {

std::string to_string(BlendMethod method) {
  switch (method) {
    case BlendMethod::none: return "none";
    case BlendMethod::gaussian: return "gaussian";
    case BlendMethod::motion: return "motion";
    case BlendMethod::poisson: return "poisson";
  }
  return {};
}

BlendMethod parse_blend_method(std::string_view text) {
  for (BlendMethod m : all_blend_methods())
    if (to_string(m) == text) return m;
  throw ConfigError("unknown blend method '" + std::string(text) + "'");
}

void BlendParams::validate() const {
  if (!(gaussian_sigma > 0.0)) throw ConfigError("gaussian_sigma must be > 0");
  if (motion_length_min < 3 || motion_length_min % 2 == 0 || motion_length_max % 2 == 0 ||
      motion_length_max < motion_length_min)
    throw ConfigError("motion lengths must be odd, >= 3 and ordered");
  if (motion_angle_range[0] > motion_angle_range[1]) throw ConfigError("motion_angle_range is not ordered");
  if (!(poisson_tolerance > 0.0)) throw ConfigError("poisson_tolerance must be > 0");
  if (poisson_max_iters < 1) throw ConfigError("poisson_max_iters must be >= 1");
}

namespace {

std::uint8_t round_u8(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
}

std::uint8_t alpha_over(int src, int dst, int alpha) {
  return static_cast<std::uint8_t>((alpha * src + (255 - alpha) * dst + 127) / 255);
}

// Pads a cutout by `pad` pixels: RGB is edge-extended, alpha is zero.
RealRaster<4> pad_cutout(const RgbaImage& cutout, int pad) {
  const int w = static_cast<int>(cutout.width()), h = static_cast<int>(cutout.height());
  RealRaster<4> out(w + 2 * pad, h + 2 * pad);
  for (int y = 0; y < h + 2 * pad; ++y)
    for (int x = 0; x < w + 2 * pad; ++x) {
      const int sx = std::clamp(x - pad, 0, w - 1), sy = std::clamp(y - pad, 0, h - 1);
      for (int c = 0; c < 3; ++c) out[c](y, x) = cutout[c](sy, sx);
      const bool inside = x >= pad && y >= pad && x < w + pad && y < h + pad;
      out[3](y, x) = inside ? cutout[3](y - pad, x - pad) : 0.0;
    }
  return out;
}

Plane<double> convolve_separable(const Plane<double>& in, const std::vector<double>& taps) {
  const int r = static_cast<int>(taps.size() / 2);
  const Eigen::Index h = in.rows(), w = in.cols();
  Plane<double> tmp = Plane<double>::Zero(h, w), out = Plane<double>::Zero(h, w);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -r; k <= r; ++k) {
        const Eigen::Index sx = x + k;
        if (sx >= 0 && sx < w) acc += taps[static_cast<std::size_t>(k + r)] * in(y, sx);
      }
      tmp(y, x) = acc;
    }
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double acc = 0;
      for (int k = -r; k <= r; ++k) {
        const Eigen::Index sy = y + k;
        if (sy >= 0 && sy < h) acc += taps[static_cast<std::size_t>(k + r)] * tmp(sy, x);
      }
      out(y, x) = acc;
    }
  return out;
}

}  // namespace

RgbImage composite_none(const RgbImage& bg, std::span<const PlacedCutout> placed) {
  RgbImage out = bg;
  const PixelBox frame{0, 0, static_cast<int>(bg.width()), static_cast<int>(bg.height())};
  for (const auto& p : placed) {
    const PixelBox region = intersect(p.box, frame);
    for (int y = region.y; y < region.bottom(); ++y)
      for (int x = region.x; x < region.right(); ++x) {
        const int a = (*p.pixels)[3](y - p.box.y, x - p.box.x);
        if (a == 0) continue;
        for (int c = 0; c < 3; ++c)
          out[c](y, x) = alpha_over((*p.pixels)[c](y - p.box.y, x - p.box.x), out[c](y, x), a);
      }
  }
  return out;
}

std::vector<double> gaussian_kernel(double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> taps(static_cast<std::size_t>(2 * r + 1));
  double sum = 0;
  for (int k = -r; k <= r; ++k) {
    const double v = std::exp(-(k * k) / (2.0 * sigma * sigma));
    taps[static_cast<std::size_t>(k + r)] = v;
    sum += v;
  }
  for (auto& t : taps) t /= sum;
  return taps;
}

RgbImage composite_gaussian(const RgbImage& bg, std::span<const PlacedCutout> placed, double sigma) {
  if (!(sigma > 0.0)) throw ConfigError("gaussian sigma must be > 0");
  const auto taps = gaussian_kernel(sigma);
  const int r = static_cast<int>(taps.size() / 2);

  std::vector<RgbaImage> blurred;
  std::vector<PlacedCutout> shifted;
  blurred.reserve(placed.size());
  for (const auto& p : placed) {
    const RealRaster<4> padded = pad_cutout(*p.pixels, r);
    const Plane<double> alpha = convolve_separable(padded[3], taps);
    RgbaImage img(padded.width(), padded.height());
    for (int c = 0; c < 3; ++c) img[c] = padded[c].round().cast<std::uint8_t>();
    img[3] = alpha.unaryExpr([](double v) { return round_u8(v); });
    blurred.push_back(std::move(img));
  }
  for (std::size_t i = 0; i < placed.size(); ++i)
    shifted.push_back({{placed[i].box.x - r, placed[i].box.y - r, placed[i].box.w + 2 * r,
                        placed[i].box.h + 2 * r},
                       &blurred[i]});
  return composite_none(bg, shifted);
}

Plane<double> motion_kernel(const MotionKernel& kernel) {
  if (kernel.length < 3 || kernel.length % 2 == 0) throw ConfigError("motion length must be odd and >= 3");
  const int half = kernel.length / 2;
  const double rad = kernel.angle_deg * std::numbers::pi / 180.0;
  Plane<double> k = Plane<double>::Zero(kernel.length, kernel.length);
  for (int t = -half; t <= half; ++t) {
    const int dx = static_cast<int>(std::lround(t * std::cos(rad)));
    const int dy = static_cast<int>(std::lround(-t * std::sin(rad)));
    k(dy + half, dx + half) += 1.0 / kernel.length;
  }
  return k;
}

RgbImage composite_motion(const RgbImage& bg, std::span<const PlacedCutout> placed, CounterRng& rng,
                          const BlendParams& params, std::vector<MotionKernel>* chosen) {
  RgbImage out = bg;
  const PixelBox frame{0, 0, static_cast<int>(bg.width()), static_cast<int>(bg.height())};
  const int min_half = params.motion_length_min / 2, max_half = params.motion_length_max / 2;

  for (const auto& p : placed) {
    MotionKernel mk;
    mk.length = 2 * static_cast<int>(rng.uniform_int(min_half, max_half)) + 1;
    mk.angle_deg = rng.uniform(params.motion_angle_range[0], params.motion_angle_range[1]);
    if (chosen) chosen->push_back(mk);
    const Plane<double> kernel = motion_kernel(mk);
    const int r = mk.length / 2;

    // Premultiplied planes on the 0..255 scale; alpha as a fraction.
    RealRaster<4> src = pad_cutout(*p.pixels, r);
    src[3] /= 255.0;
    for (int c = 0; c < 3; ++c) src[c] *= src[3];

    const Eigen::Index h = src.height(), w = src.width();
    RealRaster<4> blurred(w, h);
    for (Eigen::Index ky = 0; ky < kernel.rows(); ++ky)
      for (Eigen::Index kx = 0; kx < kernel.cols(); ++kx) {
        const double weight = kernel(ky, kx);
        if (weight == 0.0) continue;
        const Eigen::Index dy = ky - r, dx = kx - r;
        // out(y, x) += weight * in(y - dy, x - dx) over the overlapping rectangle.
        const Eigen::Index y0 = std::max<Eigen::Index>(0, dy), y1 = std::min<Eigen::Index>(h, h + dy);
        const Eigen::Index x0 = std::max<Eigen::Index>(0, dx), x1 = std::min<Eigen::Index>(w, w + dx);
        if (y1 <= y0 || x1 <= x0) continue;
        for (int c = 0; c < 4; ++c)
          blurred[c].block(y0, x0, y1 - y0, x1 - x0) +=
              weight * src[c].block(y0 - dy, x0 - dx, y1 - y0, x1 - x0);
      }

    const PixelBox box{p.box.x - r, p.box.y - r, static_cast<int>(w), static_cast<int>(h)};
    const PixelBox region = intersect(box, frame);
    for (int y = region.y; y < region.bottom(); ++y)
      for (int x = region.x; x < region.right(); ++x) {
        const double a = blurred[3](y - box.y, x - box.x);
        if (a <= 0.0) continue;
        for (int c = 0; c < 3; ++c)
          out[c](y, x) = round_u8(blurred[c](y - box.y, x - box.x) + (1.0 - a) * out[c](y, x));
      }
  }
  return out;
}

RgbImage composite_poisson(const RgbImage& bg, std::span<const PlacedCutout> placed,
                           const BlendParams& params, std::vector<PoissonPlacementStats>* stats) {
  RgbImage out = bg;
  const int bw = static_cast<int>(bg.width()), bh = static_cast<int>(bg.height());
  const PixelBox frame{0, 0, bw, bh};

  for (std::size_t i = 0; i < placed.size(); ++i) {
    const PlacedCutout& p = placed[i];
    const RgbaImage& cut = *p.pixels;
    PoissonPlacementStats st;
    st.placement = i;

    const PixelBox window = intersect(PixelBox{p.box.x - 1, p.box.y - 1, p.box.w + 2, p.box.h + 2}, frame);
    Mask domain = Mask::Constant(window.h, window.w, false);
    ChannelPlanes<double, 3> target, source;
    for (int c = 0; c < 3; ++c) {
      target[c].resize(window.h, window.w);
      source[c].resize(window.h, window.w);
    }
    for (int wy = 0; wy < window.h; ++wy)
      for (int wx = 0; wx < window.w; ++wx) {
        const int x = window.x + wx, y = window.y + wy;
        const int cx = x - p.box.x, cy = y - p.box.y;
        const bool on_canvas = cx >= 0 && cy >= 0 && cx < p.box.w && cy < p.box.h;
        const bool on_border = x == 0 || y == 0 || x == bw - 1 || y == bh - 1;
        domain(wy, wx) = on_canvas && !on_border && cut[3](cy, cx) >= params.opacity_cutoff_alpha;
        const int sx = std::clamp(cx, 0, p.box.w - 1), sy = std::clamp(cy, 0, p.box.h - 1);
        for (int c = 0; c < 3; ++c) {
          target[c](wy, wx) = out[c](y, x) / 255.0;
          source[c](wy, wx) = cut[c](sy, sx) / 255.0;
        }
      }

    if (!domain.any()) {
      st.fallback = true;
      out = composite_none(out, std::span(&p, 1));
      if (stats) stats->push_back(st);
      continue;
    }

    const auto system = assemble_poisson_system<double, 3>(domain, target, source);
    const auto solution = poisson_solve(system, params.poisson_tolerance, params.poisson_max_iters);
    st.domain_size = system.domain.size();
    st.converged = solution.converged;
    st.iterations = solution.iterations;
    st.residual = solution.residual;

    ChannelPlanes<double, 3> solved = target;
    for (std::size_t k = 0; k < system.domain.size(); ++k) {
      const auto& q = system.domain[k];
      for (int c = 0; c < 3; ++c) {
        solved[c](q.y(), q.x()) = solution.unclamped(static_cast<Eigen::Index>(k), c);
        out[c](window.y + q.y(), window.x + q.x()) =
            round_u8(255.0 * solution.values(static_cast<Eigen::Index>(k), c));
      }
    }
    st.posthoc_residual = poisson_equation_residual<double, 3>(domain, target, source, solved);
    if (stats) stats->push_back(st);
  }
  return out;
}

std::string variant_file_name(const std::string& split, std::uint64_t sample_index, BlendMethod method) {
  return split + "_" + std::to_string(sample_index) + "_" + to_string(method) + ".jpg";
}

RenderedLayout render_variants(const RgbImage& bg, const Layout& layout,
                               std::span<const RgbaImage* const> cutouts,
                               std::span<const BlendMethod> methods, const BlendParams& params,
                               CounterRng& rng, const std::string& split,
                               const std::string& category, double min_visible_fraction) {
  params.validate();
  if (cutouts.size() != layout.placements.size())
    throw DataError("one cutout per placement is required");
  if (bg.width() != layout.bg_width || bg.height() != layout.bg_height)
    throw DataError("background size differs from layout");

  std::vector<RgbaImage> transformed;
  transformed.reserve(cutouts.size());
  std::vector<Mask> masks;
  for (std::size_t i = 0; i < cutouts.size(); ++i) {
    const Placement& p = layout.placements[i];
    transformed.push_back(transform_cutout(*cutouts[i], p.scale, p.rotation_deg));
    if (transformed.back().width() != p.width || transformed.back().height() != p.height)
      throw DataError("transformed cutout size disagrees with layout for " + p.cutout_id);
    masks.push_back(placed_mask(transformed.back(), p, layout.bg_width, layout.bg_height,
                                params.opacity_cutoff_alpha));
  }

  // Paste order follows z.
  std::vector<std::size_t> order(cutouts.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return layout.placements[a].z < layout.placements[b].z;
  });
  std::vector<PlacedCutout> placed;
  for (std::size_t i : order) placed.push_back({layout.placements[i].box(), &transformed[i]});

  RenderedLayout result;
  result.annotations = derive_annotations(layout, masks, category, min_visible_fraction);

  CounterRng motion_rng = rng.fork();
  for (BlendMethod method : methods) {
    CompositeSample sample;
    sample.method = method;
    sample.file_name = variant_file_name(split, layout.sample_index, method);
    switch (method) {
      case BlendMethod::none: sample.image = composite_none(bg, placed); break;
      case BlendMethod::gaussian: sample.image = composite_gaussian(bg, placed, params.gaussian_sigma); break;
      case BlendMethod::motion: {
        CounterRng local = motion_rng;
        sample.image = composite_motion(bg, placed, local, params, &sample.motion);
        break;
      }
      case BlendMethod::poisson:
        sample.image = composite_poisson(bg, placed, params, &sample.poisson);
        for (auto& s : sample.poisson) s.placement = order[s.placement];
        break;
    }
    result.variants.push_back(std::move(sample));
  }
  return result;
}

}  // namespace synthset
