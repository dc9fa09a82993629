#pragma once

#include "synthset/blending.hpp"
#include "synthset/composition.hpp"
#include "synthset/config.hpp"
#include "synthset/contour.hpp"
#include "synthset/matting.hpp"

#include <nlohmann/json.hpp>

#include <array>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace synthset {

struct BackgroundEntry {
  std::filesystem::path path;  // relative to the pool root
  std::string scene_category;
};

struct BackgroundPool {
  std::filesystem::path root;
  std::vector<BackgroundEntry> entries;
  std::vector<std::string> excluded_categories{"archive"};

  std::vector<std::string> categories() const;  // sorted, unique
};

/// Scans `<root>/<category>/<image>` (jpg/jpeg/png), skipping excluded categories.
BackgroundPool scan_backgrounds(const std::filesystem::path& root,
                                std::vector<std::string> excluded_categories = {"archive"});

struct SplitPlan {
  std::array<std::vector<std::string>, 3> categories;  // train, val, test
  std::array<std::size_t, 3> image_counts{};
};

nlohmann::ordered_json to_json(const SplitPlan& plan);

/// Shuffles the categories with `seed`, then gives each to the split furthest below its
/// image-count target (ties to the earlier split). A split still empty when only as many
/// categories remain as there are empty splits receives the next category.
/// Throws ConfigError with fewer than three categories or ratios not summing to one.
SplitPlan split_backgrounds(const BackgroundPool& pool, std::array<double, 3> ratios, std::uint64_t seed);

/// One COCO annotation before ids are assigned. Segmentation polygons are on pixel-boundary
/// coordinates.
struct CocoAnnotationRecord {
  std::size_t placement_index = 0;
  std::vector<Polygon> segmentation;
  PixelBox bbox;
  std::int64_t area = 0;
  std::string mask_file;
};

/// Traces the visible mask's outer boundaries (one polygon per component). Holes are dropped
/// and polygons with fewer than three vertices are skipped; both are logged. Returns nullopt
/// when no polygon survives.
std::optional<CocoAnnotationRecord> make_coco_annotation(const InstanceAnnotation& annotation,
                                                         std::vector<std::string>* log = nullptr);

struct CocoImage {
  std::string file_name;
  int width = 0;
  int height = 0;
  std::uint64_t sample_index = 0;
  BlendMethod method = BlendMethod::none;
  std::span<const CocoAnnotationRecord> annotations;
};

/// COCO document with a single category (id 1). Every blending variant is its own image entry
/// carrying a copy of the layout's annotations.
nlohmann::ordered_json export_coco(std::span<const CocoImage> images, const std::string& category_name);

/// Structural COCO checks: sections present, unique ids, resolvable references, polygons with
/// at least six coordinates, positive area, bbox inside its image, iscrowd = 0.
std::vector<std::string> check_coco_schema(const nlohmann::json& document);

struct GenerationReport {
  nlohmann::ordered_json report;   // deterministic for a given seed and inputs
  nlohmann::ordered_json timings;  // wall-clock figures, kept apart from the report
  std::array<std::size_t, 3> images_written{};
};

struct GenerationInputs {
  std::vector<Cutout> objects;
  std::vector<Cutout> distractors;
  BackgroundPool backgrounds;
};

/// Renders every split into `out_dir`:
///   {split}/images/*.jpg, {split}/masks/*.png, {split}/layouts.jsonl,
///   {split}/annotations.coco.json, {split}/variants.json, report.json, timings.json
/// Throws DataError before rendering when the object pool is empty.
GenerationReport generate_dataset(const PipelineConfig& config, const GenerationInputs& inputs,
                                  const std::filesystem::path& out_dir, std::uint64_t seed,
                                  unsigned jobs);

/// Problems found by an independent re-check of an emitted layout.
std::vector<std::string> check_layout(const Layout& layout, const LayoutConfig& config);

struct ValidationResult {
  std::vector<std::string> problems;
  std::size_t layouts_checked = 0;
  std::size_t annotations_checked = 0;
  double min_polygon_iou = 1.0;

  bool ok() const { return problems.empty(); }
};

/// Re-checks an output tree: split hygiene, image counts, layout constraints, COCO schema and
/// polygon fidelity (IoU >= 0.98 against the stored visible masks).
ValidationResult validate_output_tree(const std::filesystem::path& out_dir);

}  // namespace synthset
