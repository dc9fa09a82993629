#include "testkit.hpp"

#include "synthset/acquisition.hpp"
#include "synthset/image_io.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <deque>
#include <map>
#include <stdexcept>

namespace testkit {

namespace fs = std::filesystem;

TempDir::TempDir(const std::string& prefix) {
  std::string pattern = (fs::temp_directory_path() / (prefix + "-XXXXXX")).string();
  if (!mkdtemp(pattern.data())) throw std::runtime_error("mkdtemp failed");
  path_ = pattern;
}

TempDir::~TempDir() {
  std::error_code ec;
  fs::remove_all(path_, ec);
}

RgbImage solid(int w, int h, std::array<int, 3> rgb) {
  RgbImage img(w, h);
  for (int c = 0; c < 3; ++c) img[c].setConstant(static_cast<std::uint8_t>(rgb[c]));
  return img;
}

void add_noise(RgbImage& image, int amplitude, CounterRng& rng) {
  for (Eigen::Index y = 0; y < image.height(); ++y)
    for (Eigen::Index x = 0; x < image.width(); ++x)
      for (int c = 0; c < 3; ++c) {
        const int v = image[c](y, x) + static_cast<int>(rng.uniform_int(-amplitude, amplitude));
        image[c](y, x) = static_cast<std::uint8_t>(std::clamp(v, 0, 255));
      }
}

Mask mask_from_rows(const std::vector<std::string>& rows) {
  Mask m = Mask::Constant(static_cast<Eigen::Index>(rows.size()),
                          rows.empty() ? 0 : static_cast<Eigen::Index>(rows[0].size()), false);
  for (std::size_t y = 0; y < rows.size(); ++y)
    for (std::size_t x = 0; x < rows[y].size(); ++x) m(y, x) = rows[y][x] == '#';
  return m;
}

Mask plus_mask() { return mask_from_rows({".#.", "###", ".#."}); }
Mask l_mask() { return mask_from_rows({"#.", "##"}); }

Mask random_blob_mask(int w, int h, CounterRng& rng) {
  Mask m = Mask::Constant(h, w, false);
  const int shapes = static_cast<int>(rng.uniform_int(1, 4));
  for (int s = 0; s < shapes; ++s) {
    const int x0 = static_cast<int>(rng.uniform_int(0, w - 1)), y0 = static_cast<int>(rng.uniform_int(0, h - 1));
    const int rw = static_cast<int>(rng.uniform_int(1, std::max(1, w / 2)));
    const int rh = static_cast<int>(rng.uniform_int(1, std::max(1, h / 2)));
    const bool disc = rng.uniform() < 0.5;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool in;
        if (disc) {
          const double dx = (x - x0) / double(rw), dy = (y - y0) / double(rh);
          in = dx * dx + dy * dy <= 1.0;
        } else {
          in = x >= x0 && x < x0 + rw && y >= y0 && y < y0 + rh;
        }
        if (in) m(y, x) = true;
      }
  }
  const int specks = static_cast<int>(rng.uniform_int(0, 6));
  for (int s = 0; s < specks; ++s) m(rng.uniform_int(0, h - 1), rng.uniform_int(0, w - 1)) = true;
  return m;
}

RgbaImage shape_cutout(int w, int h, std::array<int, 3> rgb, bool disc, bool soft, CounterRng& rng) {
  RgbaImage out(w, h);
  for (int c = 0; c < 3; ++c) out[c].setConstant(static_cast<std::uint8_t>(rgb[c]));
  const double cx = (w - 1) / 2.0, cy = (h - 1) / 2.0;
  const double rx = (w - 2) / 2.0, ry = (h - 2) / 2.0;
  auto inside = [&](int x, int y) {
    if (disc) {
      const double dx = (x - cx) / rx, dy = (y - cy) / ry;
      return dx * dx + dy * dy <= 1.0;
    }
    return x >= 1 && y >= 1 && x < w - 1 && y < h - 1;
  };
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      // Shaded faces give the Poisson guidance something to carry.
      const int shade = (x * 40) / std::max(1, w - 1) - (y * 25) / std::max(1, h - 1);
      for (int c = 0; c < 3; ++c)
        out[c](y, x) = static_cast<std::uint8_t>(std::clamp(rgb[c] + shade + int(rng.uniform_int(-4, 4)), 0, 255));
      out[3](y, x) = inside(x, y) ? 255 : 0;
    }
  if (soft) {
    const auto hard = out[3];
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (hard(y, x)) continue;
        for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
          const int nx = x + dx, ny = y + dy;
          if (nx >= 0 && ny >= 0 && nx < w && ny < h && hard(ny, nx)) out[3](y, x) = 128;
        }
      }
  }
  return out;
}

namespace {

constexpr int kCorpusW = 320, kCorpusH = 256;

void fill_rect(RgbImage& img, int x0, int y0, int x1, int y1, std::array<int, 3> rgb) {
  for (int y = y0; y < y1; ++y)
    for (int x = x0; x < x1; ++x)
      for (int c = 0; c < 3; ++c) img[c](y, x) = static_cast<std::uint8_t>(rgb[c]);
}

void fill_ellipse(RgbImage& img, double cx, double cy, double rx, double ry, std::array<int, 3> rgb) {
  for (Eigen::Index y = 0; y < img.height(); ++y)
    for (Eigen::Index x = 0; x < img.width(); ++x) {
      const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
      if (dx * dx + dy * dy <= 1.0)
        for (int c = 0; c < 3; ++c) img[c](y, x) = static_cast<std::uint8_t>(rgb[c]);
    }
}

CorpusImage finish(std::string name, std::string expected, RgbImage img, CounterRng& rng) {
  add_noise(img, 6, rng);
  CorpusImage out{std::move(name), std::move(expected), encode_png(with_alpha(img)), ""};
  out.id = sha256_hex(out.bytes);
  return out;
}

}  // namespace

std::vector<CorpusImage> threshold_corpus() {
  CounterRng rng(0xC0FFEE);
  const std::array<int, 3> bg{228, 226, 220};
  const std::array<int, 3> brown{150, 105, 60};
  std::vector<CorpusImage> corpus;

  // Clean: convex, opaque, homogeneous border, large enough.
  {
    RgbImage a = solid(kCorpusW, kCorpusH, bg);
    fill_rect(a, 80, 60, 240, 196, brown);
    corpus.push_back(finish("clean_box", "", a, rng));
    RgbImage b = solid(kCorpusW, kCorpusH, bg);
    fill_rect(b, 40, 90, 280, 170, {60, 80, 150});
    corpus.push_back(finish("clean_wide", "", b, rng));
    RgbImage c = solid(kCorpusW, kCorpusH, bg);
    fill_ellipse(c, 160, 128, 80, 80, {40, 120, 60});
    corpus.push_back(finish("clean_disc", "", c, rng));
    RgbImage d = solid(kCorpusW, kCorpusH, {200, 215, 230});
    fill_ellipse(d, 160, 128, 110, 70, {120, 60, 40});
    corpus.push_back(finish("clean_ellipse", "", d, rng));
  }
  // Tiny: same content at a size that encodes well under the byte threshold.
  for (int k = 0; k < 2; ++k) {
    RgbImage t = solid(80 + 8 * k, 64, bg);
    fill_rect(t, 20, 16, 60, 48, brown);
    corpus.push_back(finish("tiny_" + std::to_string(k), filter_names::size, t, rng));
  }
  // Busy border: high-contrast stripes in the frame.
  for (int k = 0; k < 2; ++k) {
    RgbImage b = solid(kCorpusW, kCorpusH, bg);
    for (int y = 0; y < kCorpusH; ++y)
      for (int x = 0; x < kCorpusW; ++x)
        if (((x / (2 + k)) + (y / 3)) % 2 == 0)
          for (int c = 0; c < 3; ++c) b[c](y, x) = 20;
    fill_rect(b, 90, 70, 230, 186, brown);
    corpus.push_back(finish("busy_border_" + std::to_string(k), filter_names::border_variance, b, rng));
  }
  // Transparent matte: the object barely differs from the background, so the fixture matte
  // comes out half transparent.
  for (int k = 0; k < 2; ++k) {
    RgbImage t = solid(kCorpusW, kCorpusH, bg);
    const int d = 35 + 5 * k;
    fill_rect(t, 70, 60, 250, 196, {bg[0] - d, bg[1] - d, bg[2] - d});
    corpus.push_back(finish("transparent_" + std::to_string(k), filter_names::transparency, t, rng));
  }
  // Concave: plus and L shapes.
  {
    RgbImage p = solid(kCorpusW, kCorpusH, bg);
    fill_rect(p, 85, 103, 235, 153, brown);
    fill_rect(p, 135, 53, 185, 203, brown);
    corpus.push_back(finish("concave_plus", filter_names::convexity, p, rng));
    RgbImage l = solid(kCorpusW, kCorpusH, bg);
    fill_rect(l, 90, 58, 160, 198, brown);
    fill_rect(l, 160, 128, 230, 198, brown);
    corpus.push_back(finish("concave_l", filter_names::convexity, l, rng));
  }
  return corpus;
}

RgbaImage distance_matte(const RgbImage& image, double full_contrast, double floor) {
  const auto w = image.width(), h = image.height();
  std::array<double, 3> mean{};
  std::int64_t n = 0;
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      if (y != 0 && x != 0 && y != h - 1 && x != w - 1) continue;
      for (int c = 0; c < 3; ++c) mean[c] += image[c](y, x);
      ++n;
    }
  for (auto& m : mean) m /= static_cast<double>(n);
  RgbaImage out = with_alpha(image, 0);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      double d2 = 0;
      for (int c = 0; c < 3; ++c) d2 += (image[c](y, x) - mean[c]) * (image[c](y, x) - mean[c]);
      const double d = std::sqrt(d2);
      if (d < floor) continue;
      out[3](y, x) = static_cast<std::uint8_t>(std::lround(std::min(255.0, 255.0 * d / full_contrast)));
    }
  if ((out[3] == 0).all()) throw MattingError("no foreground");
  return out;
}

MattingFn fixture_matting() {
  return [](const SelectionCandidate&, const RgbImage& image) { return distance_matte(image); };
}

std::vector<SelectionCandidate> corpus_candidates(const std::vector<CorpusImage>& corpus) {
  std::vector<SelectionCandidate> out;
  for (const auto& img : corpus) {
    const auto bytes = img.bytes;
    out.push_back({img.id, Role::object, bytes.size(),
                   [bytes] { return drop_alpha(decode_image(bytes).pixels); }});
  }
  return out;
}

void write_backgrounds(const fs::path& dir, int categories, int per_category, int w, int h, std::uint64_t seed) {
  CounterRng rng(seed);
  for (int k = 0; k <= categories; ++k) {
    const std::string name = k == categories ? "archive" : "scene_" + std::to_string(k);
    const int base_r = static_cast<int>(rng.uniform_int(40, 215));
    const int base_g = static_cast<int>(rng.uniform_int(40, 215));
    const int base_b = static_cast<int>(rng.uniform_int(40, 215));
    for (int i = 0; i < per_category; ++i) {
      RgbImage img(w, h);
      for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
          const int gx = (x * 30) / w + i * 5, gy = (y * 20) / h;
          img[0](y, x) = static_cast<std::uint8_t>(std::clamp(base_r + gx, 0, 255));
          img[1](y, x) = static_cast<std::uint8_t>(std::clamp(base_g + gy, 0, 255));
          img[2](y, x) = static_cast<std::uint8_t>(std::clamp(base_b - gx / 2, 0, 255));
        }
      add_noise(img, 5, rng);
      write_bytes(dir / name / (std::to_string(i) + ".png"), encode_png(with_alpha(img)));
    }
  }
}

std::vector<Cutout> make_cutouts(Role role, int count, std::uint64_t seed) {
  CounterRng rng(seed);
  std::vector<Cutout> out;
  for (int i = 0; i < count; ++i) {
    const bool object = role == Role::object;
    const int w = static_cast<int>(rng.uniform_int(object ? 34 : 20, object ? 60 : 50));
    const int h = static_cast<int>(rng.uniform_int(object ? 28 : 12, object ? 52 : 40));
    const std::array<int, 3> rgb{static_cast<int>(rng.uniform_int(60, 200)),
                                 static_cast<int>(rng.uniform_int(60, 200)),
                                 static_cast<int>(rng.uniform_int(60, 200))};
    const bool disc = !object && i % 2 == 0;
    out.push_back(make_cutout(shape_cutout(w, h, rgb, disc, true, rng), role,
                              std::string(object ? "obj" : "dis") + std::to_string(i)));
  }
  return out;
}

void write_cutout_dirs(const fs::path& dir, int objects, int distractors, std::uint64_t seed) {
  for (const auto& c : make_cutouts(Role::object, objects, seed))
    write_bytes(dir / "objects" / (c.source_id + ".png"), encode_png(c.pixels));
  for (const auto& c : make_cutouts(Role::distractor, distractors, seed + 1))
    write_bytes(dir / "distractors" / (c.source_id + ".png"), encode_png(c.pixels));
}

PipelineConfig desk_config() {
  PipelineConfig config;
  config.generation.split_counts = {20, 5, 5};
  return config;
}

double naive_border_variance(const RgbImage& image, double margin_fraction) {
  const auto w = image.width(), h = image.height();
  const auto tx = std::max<Eigen::Index>(1, std::lround(margin_fraction * static_cast<double>(w)));
  const auto ty = std::max<Eigen::Index>(1, std::lround(margin_fraction * static_cast<double>(h)));
  const bool whole = w - 2 * tx <= 0 || h - 2 * ty <= 0;
  double total = 0;
  for (int c = 0; c < 3; ++c) {
    std::vector<double> values;
    for (Eigen::Index y = 0; y < h; ++y)
      for (Eigen::Index x = 0; x < w; ++x) {
        const bool inner = x >= tx && x < w - tx && y >= ty && y < h - ty;
        if (whole || !inner) values.push_back(image[c](y, x));
      }
    double mean = 0;
    for (double v : values) mean += v;
    mean /= static_cast<double>(values.size());
    double var = 0;
    for (double v : values) var += (v - mean) * (v - mean);
    total += var / static_cast<double>(values.size());
  }
  return total / 3.0;
}

double naive_transparency(const RgbaImage& cutout, int cutoff) {
  std::int64_t nonzero = 0, below = 0;
  for (Eigen::Index y = 0; y < cutout.height(); ++y)
    for (Eigen::Index x = 0; x < cutout.width(); ++x) {
      const int a = cutout[3](y, x);
      if (a > 0) ++nonzero;
      if (a > 0 && a < cutoff) ++below;
    }
  return static_cast<double>(below) / static_cast<double>(nonzero);
}

namespace {

/// 8-connected component labels in raster discovery order; -1 for background.
std::vector<std::vector<std::pair<int, int>>> components8(const Mask& mask) {
  const int h = static_cast<int>(mask.rows()), w = static_cast<int>(mask.cols());
  std::vector<int> label(static_cast<std::size_t>(w * h), -1);
  std::vector<std::vector<std::pair<int, int>>> comps;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      if (!mask(y, x) || label[y * w + x] >= 0) continue;
      const int id = static_cast<int>(comps.size());
      comps.emplace_back();
      std::deque<std::pair<int, int>> queue{{x, y}};
      label[y * w + x] = id;
      while (!queue.empty()) {
        auto [cx, cy] = queue.front();
        queue.pop_front();
        comps[id].emplace_back(cx, cy);
        for (int dy = -1; dy <= 1; ++dy)
          for (int dx = -1; dx <= 1; ++dx) {
            const int nx = cx + dx, ny = cy + dy;
            if (nx < 0 || ny < 0 || nx >= w || ny >= h || !mask(ny, nx) || label[ny * w + nx] >= 0) continue;
            label[ny * w + nx] = id;
            queue.emplace_back(nx, ny);
          }
      }
    }
  return comps;
}

std::int64_t filled_area(const std::vector<std::pair<int, int>>& comp, int w, int h) {
  const int pw = w + 2, ph = h + 2;
  std::vector<char> wall(static_cast<std::size_t>(pw * ph), 0), seen(static_cast<std::size_t>(pw * ph), 0);
  for (auto [x, y] : comp) wall[(y + 1) * pw + x + 1] = 1;
  std::deque<std::pair<int, int>> queue{{0, 0}};
  seen[0] = 1;
  std::int64_t outside = 0;
  while (!queue.empty()) {
    auto [x, y] = queue.front();
    queue.pop_front();
    ++outside;
    for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
      const int nx = x + dx, ny = y + dy;
      if (nx < 0 || ny < 0 || nx >= pw || ny >= ph) continue;
      const std::size_t k = static_cast<std::size_t>(ny * pw + nx);
      if (wall[k] || seen[k]) continue;
      seen[k] = 1;
      queue.emplace_back(nx, ny);
    }
  }
  return static_cast<std::int64_t>(pw) * ph - outside;
}

}  // namespace

std::vector<std::int64_t> naive_filled_areas(const Mask& mask) {
  std::vector<std::int64_t> areas;
  for (const auto& comp : components8(mask))
    areas.push_back(filled_area(comp, static_cast<int>(mask.cols()), static_cast<int>(mask.rows())));
  return areas;
}

NaiveHull naive_hull(const std::vector<std::pair<std::int64_t, std::int64_t>>& input) {
  std::vector<std::pair<std::int64_t, std::int64_t>> pts(input.begin(), input.end());
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  NaiveHull hull;
  for (const auto& a : pts)
    for (const auto& b : pts) {
      if (a == b) continue;
      const std::int64_t ex = b.first - a.first, ey = b.second - a.second;
      bool edge = true;
      for (const auto& p : pts) {
        const std::int64_t px = p.first - a.first, py = p.second - a.second;
        const std::int64_t cross = ex * py - ey * px;
        if (cross < 0) {
          edge = false;
          break;
        }
        if (cross == 0) {
          const std::int64_t dot = ex * px + ey * py;
          if (dot < 0 || dot > ex * ex + ey * ey) {
            edge = false;
            break;
          }
        }
      }
      if (!edge) continue;
      hull.vertices.insert(a);
      hull.vertices.insert(b);
      hull.twice_area += a.first * b.second - a.second * b.first;
    }
  return hull;
}

std::vector<std::pair<std::int64_t, std::int64_t>> component_extreme_corners(const Mask& mask) {
  const auto comps = components8(mask);
  const int w = static_cast<int>(mask.cols()), h = static_cast<int>(mask.rows());
  std::size_t best = 0;
  std::int64_t best_area = -1;
  for (std::size_t i = 0; i < comps.size(); ++i) {
    const auto a = filled_area(comps[i], w, h);
    if (a > best_area) {
      best_area = a;
      best = i;
    }
  }
  std::vector<std::pair<std::int64_t, std::int64_t>> corners;
  if (comps.empty()) return corners;
  std::map<int, std::pair<int, int>> rows;
  for (auto [x, y] : comps[best]) {
    auto [it, inserted] = rows.emplace(y, std::pair{x, x});
    if (!inserted) {
      it->second.first = std::min(it->second.first, x);
      it->second.second = std::max(it->second.second, x);
    }
  }
  for (auto [y, span] : rows) {
    corners.emplace_back(span.first, y);
    corners.emplace_back(span.first, y + 1);
    corners.emplace_back(span.second + 1, y);
    corners.emplace_back(span.second + 1, y + 1);
  }
  return corners;
}

std::optional<double> naive_convexity(const Mask& mask) {
  const auto areas = naive_filled_areas(mask);
  if (areas.empty()) return std::nullopt;
  const auto hull = naive_hull(component_extreme_corners(mask));
  if (hull.twice_area <= 0) return std::nullopt;
  const auto largest = *std::max_element(areas.begin(), areas.end());
  return static_cast<double>(2 * largest) / static_cast<double>(hull.twice_area);
}

Plane<double> dense_poisson(const Mask& domain, const Plane<double>& target, const Plane<double>& source) {
  const auto h = domain.rows(), w = domain.cols();
  Plane<int> index = Plane<int>::Constant(h, w, -1);
  int n = 0;
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      if (domain(y, x)) index(y, x) = n++;
  Eigen::MatrixXd A = Eigen::MatrixXd::Zero(n, n);
  Eigen::VectorXd b = Eigen::VectorXd::Zero(n);
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x) {
      const int i = index(y, x);
      if (i < 0) continue;
      A(i, i) = 4;
      for (auto [dx, dy] : {std::pair{1, 0}, {-1, 0}, {0, 1}, {0, -1}}) {
        const auto qx = x + dx, qy = y + dy;
        b(i) += source(y, x) - source(qy, qx);
        if (index(qy, qx) >= 0) A(i, index(qy, qx)) -= 1;
        else b(i) += target(qy, qx);
      }
    }
  const Eigen::VectorXd f = A.partialPivLu().solve(b);
  Plane<double> out = target;
  for (Eigen::Index y = 0; y < h; ++y)
    for (Eigen::Index x = 0; x < w; ++x)
      if (index(y, x) >= 0) out(y, x) = f(index(y, x));
  return out;
}

std::vector<double> brute_gaussian_1d(const std::vector<double>& signal, double sigma) {
  const int r = static_cast<int>(std::ceil(3 * sigma));
  std::vector<double> taps;
  double sum = 0;
  for (int k = -r; k <= r; ++k) {
    taps.push_back(std::exp(-(k * k) / (2 * sigma * sigma)));
    sum += taps.back();
  }
  std::vector<double> out(signal.size(), 0.0);
  for (std::size_t i = 0; i < signal.size(); ++i)
    for (int k = -r; k <= r; ++k) {
      const auto j = static_cast<std::ptrdiff_t>(i) + k;
      if (j >= 0 && j < static_cast<std::ptrdiff_t>(signal.size())) out[i] += taps[k + r] / sum * signal[j];
    }
  return out;
}

}  // namespace testkit
