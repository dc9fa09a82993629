#include "synthset/dataset.hpp"

#include "synthset/error.hpp"
#include "synthset/image_io.hpp"
#include "synthset/parallel.hpp"
#include "synthset/rng.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

namespace synthset {

namespace fs = std::filesystem;

std::vector<std::string> BackgroundPool::categories() const {
  std::set<std::string> names;
  for (const auto& e : entries) names.insert(e.scene_category);
  return {names.begin(), names.end()};
}

BackgroundPool scan_backgrounds(const fs::path& root, std::vector<std::string> excluded_categories) {
  if (!fs::is_directory(root)) throw DataError("background directory not found: " + root.string());
  BackgroundPool pool;
  pool.root = root;
  pool.excluded_categories = std::move(excluded_categories);
  const std::set<std::string> excluded(pool.excluded_categories.begin(), pool.excluded_categories.end());
  for (const auto& dir : fs::directory_iterator(root)) {
    if (!dir.is_directory()) continue;
    const std::string category = dir.path().filename().string();
    if (excluded.contains(category)) continue;
    for (const auto& file : fs::directory_iterator(dir.path())) {
      if (!file.is_regular_file()) continue;
      std::string ext = file.path().extension().string();
      std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
      if (ext != ".jpg" && ext != ".jpeg" && ext != ".png") continue;
      pool.entries.push_back({fs::relative(file.path(), root), category});
    }
  }
  std::sort(pool.entries.begin(), pool.entries.end(),
            [](const BackgroundEntry& a, const BackgroundEntry& b) { return a.path < b.path; });
  return pool;
}

nlohmann::ordered_json to_json(const SplitPlan& plan) {
  nlohmann::ordered_json j;
  for (std::size_t s = 0; s < 3; ++s)
    j[kSplitNames[s]] = {{"categories", plan.categories[s]}, {"images", plan.image_counts[s]}};
  return j;
}

SplitPlan split_backgrounds(const BackgroundPool& pool, std::array<double, 3> ratios, std::uint64_t seed) {
  double sum = 0;
  for (double r : ratios) {
    if (r < 0) throw ConfigError("split ratios must be >= 0");
    sum += r;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw ConfigError("split ratios must sum to 1");

  std::map<std::string, std::size_t> sizes;
  for (const auto& e : pool.entries) ++sizes[e.scene_category];
  std::vector<std::string> order;
  for (const auto& [name, n] : sizes) order.push_back(name);
  if (order.size() < 3)
    throw ConfigError("background pool needs at least 3 scene categories, found " +
                      std::to_string(order.size()));

  CounterRng rng(mix64(seed ^ fnv1a64("background-split")));
  for (std::size_t i = order.size() - 1; i > 0; --i)
    std::swap(order[i], order[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(i)))]);

  const double total = static_cast<double>(pool.entries.size());
  SplitPlan plan;
  for (std::size_t k = 0; k < order.size(); ++k) {
    const std::size_t remaining = order.size() - k;
    std::vector<std::size_t> empty;
    for (std::size_t s = 0; s < 3; ++s)
      if (ratios[s] > 0 && plan.categories[s].empty()) empty.push_back(s);
    std::size_t pick = 0;
    if (!empty.empty() && remaining == empty.size()) {
      pick = empty.front();
    } else {
      double best = -std::numeric_limits<double>::infinity();
      for (std::size_t s = 0; s < 3; ++s) {
        if (ratios[s] <= 0) continue;
        const double deficit = ratios[s] * total - static_cast<double>(plan.image_counts[s]);
        if (deficit > best) {
          best = deficit;
          pick = s;
        }
      }
    }
    plan.categories[pick].push_back(order[k]);
    plan.image_counts[pick] += sizes[order[k]];
  }
  for (auto& c : plan.categories) std::sort(c.begin(), c.end());
  return plan;
}

std::optional<CocoAnnotationRecord> make_coco_annotation(const InstanceAnnotation& annotation,
                                                         std::vector<std::string>* log) {
  CocoAnnotationRecord record;
  record.placement_index = annotation.placement_index;
  record.bbox = annotation.bbox;
  record.area = annotation.area;
  std::int64_t traced = 0;
  for (auto& polygon : trace_outer_boundaries(annotation.visible_mask)) {
    if (polygon.size() < 3) {
      if (log) log->push_back("placement " + std::to_string(annotation.placement_index) +
                              ": degenerate polygon dropped");
      continue;
    }
    traced += std::abs(twice_signed_area(polygon)) / 2;
    record.segmentation.push_back(std::move(polygon));
  }
  if (traced != annotation.area && log)
    log->push_back("placement " + std::to_string(annotation.placement_index) + ": holes dropped (" +
                   std::to_string(traced - annotation.area) + " px)");
  if (record.segmentation.empty()) {
    if (log) log->push_back("placement " + std::to_string(annotation.placement_index) +
                            ": annotation dropped, no polygon");
    return std::nullopt;
  }
  return record;
}

nlohmann::ordered_json export_coco(std::span<const CocoImage> images, const std::string& category_name) {
  nlohmann::ordered_json doc;
  doc["info"] = {{"description", "synthetic instance segmentation"}, {"version", "1.0"}};
  doc["images"] = nlohmann::ordered_json::array();
  doc["annotations"] = nlohmann::ordered_json::array();
  doc["categories"] = nlohmann::ordered_json::array(
      {{{"id", 1}, {"name", category_name}, {"supercategory", category_name}}});
  std::int64_t next_ann = 1;
  for (std::size_t i = 0; i < images.size(); ++i) {
    const auto& img = images[i];
    const auto image_id = static_cast<std::int64_t>(i + 1);
    doc["images"].push_back({{"id", image_id},
                             {"file_name", img.file_name},
                             {"width", img.width},
                             {"height", img.height},
                             {"sample_index", img.sample_index},
                             {"blend_method", to_string(img.method)}});
    for (const auto& rec : img.annotations) {
      auto segmentation = nlohmann::ordered_json::array();
      for (const auto& polygon : rec.segmentation) {
        auto coords = nlohmann::ordered_json::array();
        for (const auto& v : polygon) {
          coords.push_back(v.x());
          coords.push_back(v.y());
        }
        segmentation.push_back(std::move(coords));
      }
      doc["annotations"].push_back({{"id", next_ann++},
                                    {"image_id", image_id},
                                    {"category_id", 1},
                                    {"segmentation", std::move(segmentation)},
                                    {"area", rec.area},
                                    {"bbox", {rec.bbox.x, rec.bbox.y, rec.bbox.w, rec.bbox.h}},
                                    {"iscrowd", 0},
                                    {"placement_index", rec.placement_index},
                                    {"mask_file", rec.mask_file}});
    }
  }
  return doc;
}

std::vector<std::string> check_coco_schema(const nlohmann::json& doc) {
  std::vector<std::string> problems;
  auto fail = [&](std::string msg) { problems.push_back(std::move(msg)); };
  if (!doc.is_object()) {
    fail("document is not an object");
    return problems;
  }
  for (const char* key : {"images", "annotations", "categories"})
    if (!doc.contains(key) || !doc[key].is_array()) fail(std::string("missing array '") + key + "'");
  if (!problems.empty()) return problems;

  std::map<std::int64_t, std::pair<double, double>> image_size;
  for (const auto& img : doc["images"]) {
    if (!img.is_object() || !img.contains("id") || !img["id"].is_number_integer() ||
        !img.contains("file_name") || !img["file_name"].is_string() || !img.contains("width") ||
        !img["width"].is_number_integer() || !img.contains("height") ||
        !img["height"].is_number_integer()) {
      fail("malformed image entry");
      continue;
    }
    const auto id = img["id"].get<std::int64_t>();
    const auto w = img["width"].get<std::int64_t>(), h = img["height"].get<std::int64_t>();
    if (w <= 0 || h <= 0) fail("image " + std::to_string(id) + " has non-positive size");
    if (!image_size.emplace(id, std::pair<double, double>(double(w), double(h))).second)
      fail("duplicate image id " + std::to_string(id));
  }
  std::set<std::int64_t> category_ids;
  for (const auto& cat : doc["categories"]) {
    if (!cat.is_object() || !cat.contains("id") || !cat["id"].is_number_integer() ||
        !cat.contains("name") || !cat["name"].is_string()) {
      fail("malformed category entry");
      continue;
    }
    if (!category_ids.insert(cat["id"].get<std::int64_t>()).second) fail("duplicate category id");
  }
  std::set<std::int64_t> ann_ids;
  for (const auto& ann : doc["annotations"]) {
    if (!ann.is_object() || !ann.contains("id") || !ann["id"].is_number_integer()) {
      fail("annotation without integer id");
      continue;
    }
    const auto id = ann["id"].get<std::int64_t>();
    const std::string where = "annotation " + std::to_string(id);
    if (!ann_ids.insert(id).second) fail("duplicate " + where);
    if (!ann.contains("image_id") || !ann["image_id"].is_number_integer() ||
        !image_size.contains(ann["image_id"].get<std::int64_t>())) {
      fail(where + ": unresolved image_id");
      continue;
    }
    const auto [iw, ih] = image_size[ann["image_id"].get<std::int64_t>()];
    if (!ann.contains("category_id") || !ann["category_id"].is_number_integer() ||
        !category_ids.contains(ann["category_id"].get<std::int64_t>()))
      fail(where + ": unresolved category_id");
    if (!ann.contains("iscrowd") || ann["iscrowd"] != 0) fail(where + ": iscrowd must be 0");
    if (!ann.contains("area") || !ann["area"].is_number() || !(ann["area"].get<double>() > 0))
      fail(where + ": area must be positive");
    if (!ann.contains("bbox") || !ann["bbox"].is_array() || ann["bbox"].size() != 4) {
      fail(where + ": bbox must have 4 numbers");
    } else {
      std::array<double, 4> b{};
      bool numeric = true;
      for (std::size_t k = 0; k < 4; ++k) {
        if (!ann["bbox"][k].is_number()) numeric = false;
        else b[k] = ann["bbox"][k].get<double>();
      }
      if (!numeric) fail(where + ": bbox must have 4 numbers");
      else if (b[0] < 0 || b[1] < 0 || b[2] <= 0 || b[3] <= 0 || b[0] + b[2] > iw || b[1] + b[3] > ih)
        fail(where + ": bbox outside its image");
    }
    if (!ann.contains("segmentation") || !ann["segmentation"].is_array() || ann["segmentation"].empty()) {
      fail(where + ": segmentation must be a non-empty polygon list");
    } else {
      for (const auto& poly : ann["segmentation"]) {
        if (!poly.is_array() || poly.size() < 6 || poly.size() % 2 != 0) {
          fail(where + ": polygon needs an even number (>= 6) of coordinates");
          continue;
        }
        for (const auto& c : poly)
          if (!c.is_number()) {
            fail(where + ": non-numeric polygon coordinate");
            break;
          }
      }
    }
  }
  return problems;
}

namespace {

std::string dump_line(const nlohmann::ordered_json& j) { return j.dump() + "\n"; }

struct SampleOutput {
  std::string layout_line;
  std::vector<CocoAnnotationRecord> records;
  std::vector<std::pair<std::string, BlendMethod>> files;
  int bg_width = 0;
  int bg_height = 0;
  std::vector<PoissonPlacementStats> poisson;
  std::vector<std::string> log;
  std::size_t dropped_instances = 0;
  double seconds = 0;
};

struct PreparedPool {
  std::vector<RgbaImage> pixels;
  std::vector<PoolEntry> entries;
  std::map<std::string, std::size_t> index;
};

PreparedPool prepare_pool(const std::vector<Cutout>& cutouts) {
  PreparedPool pool;
  for (const auto& c : cutouts) {
    if (pool.index.contains(c.source_id)) throw DataError("duplicate cutout id " + c.source_id);
    RgbaImage cropped = crop_to_content(c.pixels);
    pool.entries.push_back({c.source_id, static_cast<int>(cropped.width()), static_cast<int>(cropped.height())});
    pool.index[c.source_id] = pool.pixels.size();
    pool.pixels.push_back(std::move(cropped));
  }
  return pool;
}

}  // namespace

GenerationReport generate_dataset(const PipelineConfig& config, const GenerationInputs& inputs,
                                  const fs::path& out_dir, std::uint64_t seed, unsigned jobs) {
  config.validate();
  if (inputs.objects.empty()) throw DataError("object cutout pool is empty");
  if (inputs.distractors.empty() && config.layout.n_distractors_range[1] > 0)
    throw DataError("distractor cutout pool is empty");
  for (const auto& c : inputs.objects)
    if (c.role != Role::object) throw DataError("cutout " + c.source_id + " is not an object");
  for (const auto& c : inputs.distractors)
    if (c.role != Role::distractor) throw DataError("cutout " + c.source_id + " is not a distractor");

  const SplitPlan plan = split_backgrounds(inputs.backgrounds, config.generation.split_ratios, seed);
  const PreparedPool objects = prepare_pool(inputs.objects);
  const PreparedPool distractors = prepare_pool(inputs.distractors);
  const auto& gen = config.generation;

  const auto wall_start = std::chrono::steady_clock::now();
  GenerationReport result;
  nlohmann::ordered_json splits_report, splits_timing;
  nlohmann::ordered_json drops = nlohmann::ordered_json::array();
  nlohmann::ordered_json nonconverged = nlohmann::ordered_json::array();
  std::size_t poisson_placements = 0, poisson_fallbacks = 0;
  double max_residual = 0, max_posthoc = 0;

  for (std::size_t s = 0; s < 3; ++s) {
    const std::string split = kSplitNames[s];
    const std::size_t count = gen.split_counts[s];
    const fs::path split_dir = out_dir / split;
    fs::create_directories(split_dir / "images");
    fs::create_directories(split_dir / "masks");

    std::vector<const BackgroundEntry*> bgs;
    const std::set<std::string> cats(plan.categories[s].begin(), plan.categories[s].end());
    for (const auto& e : inputs.backgrounds.entries)
      if (cats.contains(e.scene_category)) bgs.push_back(&e);
    if (count > 0 && bgs.empty()) throw DataError("split " + split + " has no background images");

    std::vector<SampleOutput> outputs(count);
    const auto split_start = std::chrono::steady_clock::now();
    parallel_for(count, jobs, [&](std::size_t i) {
      const auto t0 = std::chrono::steady_clock::now();
      SampleOutput& out = outputs[i];
      const std::uint64_t key = substream_seed(seed, split, i);
      CounterRng rng(key);
      const BackgroundEntry& bg_entry =
          *bgs[static_cast<std::size_t>(rng.uniform_int(0, static_cast<std::int64_t>(bgs.size()) - 1))];
      const RgbImage bg = drop_alpha(read_image(inputs.backgrounds.root / bg_entry.path).pixels);

      Layout layout = sample_layout(static_cast<int>(bg.width()), static_cast<int>(bg.height()),
                                    objects.entries, distractors.entries, config.layout, rng);
      layout.background_ref = bg_entry.path.generic_string();
      layout.scene_category = bg_entry.scene_category;
      layout.sample_index = i;
      layout.seed = key;

      std::vector<const RgbaImage*> ptrs;
      for (const auto& p : layout.placements) {
        const PreparedPool& pool = p.role == Role::object ? objects : distractors;
        ptrs.push_back(&pool.pixels[pool.index.at(p.cutout_id)]);
      }
      RenderedLayout rendered = render_variants(bg, layout, ptrs, gen.methods, config.blend, rng, split,
                                                gen.category_name, gen.min_visible_fraction);

      for (const auto& variant : rendered.variants) {
        write_bytes(split_dir / "images" / variant.file_name, encode_jpeg(variant.image, gen.jpeg_quality));
        out.files.emplace_back(variant.file_name, variant.method);
        if (variant.method == BlendMethod::poisson) out.poisson = variant.poisson;
      }
      out.log = layout.log;
      for (const auto& d : rendered.annotations.dropped) out.log.push_back(d);
      out.dropped_instances = rendered.annotations.dropped.size();
      for (const auto& ann : rendered.annotations.annotations) {
        auto rec = make_coco_annotation(ann, &out.log);
        if (!rec) continue;
        rec->mask_file = "masks/" + split + "_" + std::to_string(i) + "_" +
                         std::to_string(ann.placement_index) + ".png";
        write_bytes(split_dir / rec->mask_file, encode_png(ann.visible_mask));
        out.records.push_back(std::move(*rec));
      }
      out.bg_width = layout.bg_width;
      out.bg_height = layout.bg_height;
      out.layout_line = dump_line(to_json(layout));
      out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    });

    // Assembly is sequential and in sample order.
    std::string layouts;
    std::vector<CocoImage> coco_images;
    nlohmann::ordered_json variants = nlohmann::ordered_json::object();
    double slowest = 0, sum_seconds = 0;
    for (std::size_t i = 0; i < count; ++i) {
      const SampleOutput& out = outputs[i];
      layouts += out.layout_line;
      auto files = nlohmann::ordered_json::array();
      for (const auto& [file, method] : out.files) {
        coco_images.push_back({file, out.bg_width, out.bg_height, i, method, out.records});
        files.push_back({{"file", "images/" + file}, {"method", to_string(method)}});
      }
      variants[std::to_string(i)] = std::move(files);
      for (const auto& line : out.log)
        drops.push_back({{"split", split}, {"sample_index", i}, {"event", line}});
      for (const auto& st : out.poisson) {
        ++poisson_placements;
        if (st.fallback) {
          ++poisson_fallbacks;
          continue;
        }
        max_residual = std::max(max_residual, st.residual);
        max_posthoc = std::max(max_posthoc, st.posthoc_residual);
        if (!st.converged)
          nonconverged.push_back({{"split", split}, {"sample_index", i}, {"placement", st.placement},
                                  {"iterations", st.iterations}, {"residual", st.residual}});
      }
      slowest = std::max(slowest, out.seconds);
      sum_seconds += out.seconds;
      result.images_written[s] += out.files.size();
    }
    write_text(split_dir / "layouts.jsonl", layouts);
    write_text(split_dir / "annotations.coco.json", export_coco(coco_images, gen.category_name).dump(1) + "\n");
    write_text(split_dir / "variants.json", variants.dump(1) + "\n");

    splits_report[split] = {{"categories", plan.categories[s]},
                            {"background_images", plan.image_counts[s]},
                            {"samples", count},
                            {"images", result.images_written[s]}};
    splits_timing[split] = {
        {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - split_start).count()},
        {"sample_seconds_total", sum_seconds},
        {"sample_seconds_max", slowest}};
    spdlog::info("{}: {} samples, {} images", split, count, result.images_written[s]);
  }

  std::vector<std::string> methods;
  for (auto m : gen.methods) methods.push_back(to_string(m));
  result.report = {{"seed", seed},
                   {"config", to_json(config)},
                   {"methods", methods},
                   {"splits", splits_report},
                   {"drops", drops},
                   {"poisson",
                    {{"placements", poisson_placements},
                     {"fallbacks", poisson_fallbacks},
                     {"max_residual", max_residual},
                     {"max_posthoc_residual", max_posthoc},
                     {"non_converged", nonconverged}}}};
  result.timings = {
      {"jobs", jobs},
      {"wall_seconds", std::chrono::duration<double>(std::chrono::steady_clock::now() - wall_start).count()},
      {"splits", splits_timing}};
  write_text(out_dir / "report.json", result.report.dump(2) + "\n");
  write_text(out_dir / "timings.json", result.timings.dump(2) + "\n");
  return result;
}

std::vector<std::string> check_layout(const Layout& layout, const LayoutConfig& config) {
  std::vector<std::string> problems;
  const std::string where = layout.scene_category + "#" + std::to_string(layout.sample_index);
  const auto& ps = layout.placements;
  const std::int64_t W = layout.bg_width, H = layout.bg_height;
  const double bg_longer = static_cast<double>(std::max(W, H));
  int objects = 0, distractors = 0;
  for (std::size_t i = 0; i < ps.size(); ++i) {
    const auto& p = ps[i];
    (p.role == Role::object ? objects : distractors)++;
    if (p.width < 1 || p.height < 1) problems.push_back(where + ": empty canvas");
    if (p.x < 0 || p.y < 0 || std::int64_t(p.x) + p.width > W || std::int64_t(p.y) + p.height > H)
      problems.push_back(where + ": placement " + std::to_string(i) + " leaves the background");
    const double longer = p.scale * static_cast<double>(std::max(p.source_width, p.source_height));
    const double frac = longer / bg_longer;
    const bool in_range = frac >= config.scale_fraction_range[0] - 1e-9 &&
                          frac <= config.scale_fraction_range[1] + 1e-9;
    const bool clamped = p.scale == config.max_upscale;
    if (!in_range && !clamped)
      problems.push_back(where + ": placement " + std::to_string(i) + " longer side fraction " +
                         std::to_string(frac) + " out of range");
    if (p.scale > config.max_upscale) problems.push_back(where + ": upscale above limit");
    if (p.rotation_deg < config.rotation_range[0] || p.rotation_deg >= config.rotation_range[1])
      problems.push_back(where + ": rotation out of range");
    for (std::size_t k = 0; k < i; ++k) {
      const auto& q = ps[k];
      const std::int64_t ix = std::max<std::int64_t>(
          0, std::min<std::int64_t>(p.x + p.width, q.x + q.width) - std::max(p.x, q.x));
      const std::int64_t iy = std::max<std::int64_t>(
          0, std::min<std::int64_t>(p.y + p.height, q.y + q.height) - std::max(p.y, q.y));
      const std::int64_t inter = ix * iy;
      const std::int64_t uni = std::int64_t(p.width) * p.height + std::int64_t(q.width) * q.height - inter;
      // inter / uni <= max  <=>  inter <= max * uni, evaluated without division
      if (uni > 0 && static_cast<long double>(inter) >
                         static_cast<long double>(config.max_pairwise_iou) * static_cast<long double>(uni))
        problems.push_back(where + ": placements " + std::to_string(k) + "," + std::to_string(i) +
                           " overlap above the IoU limit");
    }
  }
  if (objects < 1) problems.push_back(where + ": no object of interest");
  if (objects > config.n_objects_range[1]) problems.push_back(where + ": too many objects");
  if (distractors > config.n_distractors_range[1]) problems.push_back(where + ": too many distractors");
  return problems;
}

namespace {

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

Mask decode_mask(const fs::path& path) {
  const auto img = read_image(path).pixels;
  return img[0].cast<int>() >= 128;
}

}  // namespace

ValidationResult validate_output_tree(const fs::path& out_dir) {
  ValidationResult result;
  auto& problems = result.problems;
  const auto report = read_json_file(out_dir / "report.json");
  PipelineConfig config;
  try {
    config = apply_config_json(PipelineConfig{}, report.at("config"));
  } catch (const std::exception& e) {
    problems.push_back(std::string("report.json config unreadable: ") + e.what());
    return result;
  }
  const std::size_t n_methods = report.at("methods").size();

  std::map<std::string, std::string> category_split;
  for (std::size_t s = 0; s < 3; ++s) {
    const std::string split = kSplitNames[s];
    const fs::path dir = out_dir / split;
    const std::size_t expected = config.generation.split_counts[s];

    std::ifstream layouts_in(dir / "layouts.jsonl");
    if (!layouts_in) {
      problems.push_back(split + ": layouts.jsonl missing");
      continue;
    }
    std::size_t layouts = 0;
    std::string line;
    while (std::getline(layouts_in, line)) {
      if (line.empty()) continue;
      Layout layout;
      try {
        layout = layout_from_json(nlohmann::json::parse(line));
      } catch (const std::exception& e) {
        problems.push_back(split + ": unreadable layout record: " + e.what());
        continue;
      }
      ++layouts;
      ++result.layouts_checked;
      const auto [it, inserted] = category_split.emplace(layout.scene_category, split);
      if (!inserted && it->second != split)
        problems.push_back("scene category '" + layout.scene_category + "' appears in " + it->second +
                           " and " + split);
      for (auto& p : check_layout(layout, config.layout)) problems.push_back(split + ": " + p);
    }
    if (layouts != expected)
      problems.push_back(split + ": " + std::to_string(layouts) + " layouts, expected " + std::to_string(expected));

    std::size_t images = 0;
    if (fs::is_directory(dir / "images"))
      for (const auto& f : fs::directory_iterator(dir / "images"))
        if (f.path().extension() == ".jpg") ++images;
    if (images != expected * n_methods)
      problems.push_back(split + ": " + std::to_string(images) + " images, expected " +
                         std::to_string(expected * n_methods));

    nlohmann::json coco;
    try {
      coco = read_json_file(dir / "annotations.coco.json");
    } catch (const DataError& e) {
      problems.push_back(e.what());
      continue;
    }
    const auto schema = check_coco_schema(coco);
    for (const auto& p : schema) problems.push_back(split + " coco: " + p);
    if (!schema.empty()) continue;
    if (coco["images"].size() != expected * n_methods)
      problems.push_back(split + ": COCO lists " + std::to_string(coco["images"].size()) + " images");

    std::map<std::string, double> checked;  // one re-raster per mask file
    for (const auto& ann : coco["annotations"]) {
      ++result.annotations_checked;
      const std::string mask_file = ann.value("mask_file", "");
      if (mask_file.empty()) {
        problems.push_back(split + ": annotation " + ann["id"].dump() + " has no mask_file");
        continue;
      }
      if (checked.contains(mask_file)) continue;
      Mask stored;
      try {
        stored = decode_mask(dir / mask_file);
      } catch (const DataError& e) {
        problems.push_back(split + ": " + e.what());
        continue;
      }
      std::vector<Polygon> polygons;
      for (const auto& coords : ann["segmentation"]) {
        Polygon poly;
        for (std::size_t k = 0; k + 1 < coords.size(); k += 2)
          poly.emplace_back(std::llround(coords[k].get<double>()), std::llround(coords[k + 1].get<double>()));
        polygons.push_back(std::move(poly));
      }
      const Mask raster = rasterize_polygons(polygons, stored.cols(), stored.rows());
      const auto inter = (raster && stored).count();
      const auto uni = (raster || stored).count();
      const double iou = uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
      checked[mask_file] = iou;
      result.min_polygon_iou = std::min(result.min_polygon_iou, iou);
      if (iou < 0.98)
        problems.push_back(split + ": " + mask_file + " polygon IoU " + std::to_string(iou) + " < 0.98");
      if (static_cast<std::int64_t>(stored.count()) != ann["area"].get<std::int64_t>())
        problems.push_back(split + ": " + mask_file + " area differs from mask");
    }
  }
  return result;
}

}  // namespace synthset
