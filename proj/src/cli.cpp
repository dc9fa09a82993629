#include "synthset/cli.hpp"

#include "synthset/acquisition.hpp"
#include "synthset/config.hpp"
#include "synthset/dataset.hpp"
#include "synthset/error.hpp"
#include "synthset/image_io.hpp"
#include "synthset/matting.hpp"
#include "synthset/parallel.hpp"
#include "synthset/review.hpp"
#include "synthset/selection.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <fstream>
#include <iostream>
#include <mutex>

namespace synthset {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config_path;
  std::uint64_t seed = 0;
  unsigned jobs = default_jobs();
  std::string workspace;
  int verbosity = 0;
  bool quiet = false;

  std::string strategy = "plain";
  std::string sidecar;
  std::string decisions;
  bool no_blend = false;
  std::string out;

  std::string fetcher_url;
  std::string queries;
  std::string categories;
  std::string backgrounds;
  std::string cutouts;
  std::string host = "127.0.0.1";
  int port = 8080;
};

/// Resolved run state shared by the stages.
struct RunContext {
  std::string command;
  PipelineConfig config;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  fs::path workspace;
  const Options* options = nullptr;

  fs::path manifest_path() const { return workspace / "manifest.jsonl"; }
  fs::path images_dir() const { return workspace / "images"; }
  fs::path cutouts_dir() const { return workspace / "cutouts"; }
  fs::path selection_dir() const { return workspace / "selection"; }
  fs::path out_dir() const { return options->out.empty() ? workspace / "out" : fs::path(options->out); }
};

void write_run_report(const RunContext& ctx, nlohmann::ordered_json summary) {
  nlohmann::ordered_json report{{"command", ctx.command},
                                {"seed", ctx.seed},
                                {"config", to_json(ctx.config)},
                                {"summary", std::move(summary)}};
  write_text(ctx.workspace / "report.json", report.dump(2) + "\n");
}

RgbImage load_rgb(const fs::path& path) { return drop_alpha(read_image(path).pixels); }

MattingFn make_matting(const RunContext& ctx, bool use_cache) {
  const fs::path cutouts = ctx.cutouts_dir();
  const MattingConfig cfg = ctx.config.matting;
  return [cutouts, cfg, use_cache](const SelectionCandidate& c, const RgbImage& image) -> RgbaImage {
    const fs::path cached = cutouts / (c.id + ".png");
    if (use_cache && fs::exists(cached)) {
      auto decoded = read_image(cached);
      if (decoded.has_alpha) return decoded.pixels;
    }
    if (!cfg.command.empty())
      return remove_background_external(image, cfg.command, std::chrono::seconds(cfg.timeout_seconds));
    return flood_fill_matte(image, cfg.flood_fill_tolerance);
  };
}

std::vector<SelectionCandidate> manifest_candidates(const Manifest& manifest) {
  std::vector<SelectionCandidate> out;
  for (const auto& r : manifest.records()) {
    const fs::path path = manifest.image_path(r);
    out.push_back({r.id, r.task.role, r.byte_length, [path] { return load_rgb(path); }});
  }
  return out;
}

int cmd_scrape(const RunContext& ctx) {
  const Options& o = *ctx.options;
  if (o.fetcher_url.empty()) throw ConfigError("scrape requires --fetcher-url");
  std::vector<std::string> objects =
      o.queries.empty() ? default_object_queries() : read_lines(o.queries);
  std::vector<std::string> distractors;
  if (!o.categories.empty())
    distractors = sample_distractor_categories(read_lines(o.categories),
                                               ctx.config.acquisition.distractor_category_count, ctx.seed);
  const auto tasks = expand_queries(objects, distractors);

  HttpFetcher fetcher(o.fetcher_url);
  RateLimiter limiter(std::chrono::milliseconds(
      std::llround(1000.0 / ctx.config.acquisition.rate_limit_per_second)));
  Manifest manifest(ctx.manifest_path(), ctx.images_dir());
  FetchPolicy policy;
  policy.limit = ctx.config.acquisition.results_per_task;
  policy.retries = ctx.config.acquisition.retries;
  policy.backoff = std::chrono::milliseconds(ctx.config.acquisition.backoff_ms);
  const auto summary = scrape(tasks, fetcher, limiter, manifest, policy, ctx.jobs);

  auto skipped = nlohmann::ordered_json::array();
  for (const auto& s : summary.skipped) skipped.push_back({{"url", s.url}, {"reason", s.reason}});
  write_run_report(ctx, {{"tasks", summary.tasks},
                         {"downloaded", summary.downloaded},
                         {"new_records", summary.new_records},
                         {"manifest_size", manifest.size()},
                         {"skipped", skipped}});
  std::cout << "scrape: " << summary.tasks << " tasks, " << summary.downloaded << " downloads, "
            << summary.new_records << " new records, " << summary.skipped.size() << " skipped\n";
  return 0;
}

int cmd_mat(const RunContext& ctx) {
  Manifest manifest(ctx.manifest_path(), ctx.images_dir());
  std::vector<CandidateImage> raw;
  for (const auto& r : manifest.records())
    if (r.status == CandidateStatus::raw) raw.push_back(r);
  const MattingFn matting = make_matting(ctx, false);

  std::vector<std::optional<std::string>> failures(raw.size());
  parallel_for(raw.size(), ctx.jobs, [&](std::size_t i) {
    const auto& r = raw[i];
    try {
      const RgbImage image = load_rgb(manifest.image_path(r));
      const RgbaImage cutout = matting({r.id, r.task.role, r.byte_length, {}}, image);
      write_bytes(ctx.cutouts_dir() / (r.id + ".png"), encode_png(cutout));
    } catch (const MattingError& e) {
      failures[i] = std::string("matting: ") + e.what();
    } catch (const DataError& e) {
      failures[i] = std::string("decode: ") + e.what();
    }
  });
  std::size_t matted = 0, rejected = 0;
  for (std::size_t i = 0; i < raw.size(); ++i) {
    if (failures[i]) {
      manifest.update_status(raw[i].id, CandidateStatus::rejected, failures[i]);
      ++rejected;
    } else {
      manifest.update_status(raw[i].id, CandidateStatus::matted);
      ++matted;
    }
  }
  write_run_report(ctx, {{"raw", raw.size()}, {"matted", matted}, {"rejected", rejected}});
  std::cout << "mat: " << matted << " matted, " << rejected << " rejected\n";
  return 0;
}

std::string join_lines(const std::vector<std::string>& ids) {
  std::string out;
  for (const auto& id : ids) out += id + "\n";
  return out;
}

int cmd_select(const RunContext& ctx) {
  const Options& o = *ctx.options;
  const Strategy strategy = parse_strategy(o.strategy);
  StrategyInputs inputs;
  if (strategy == Strategy::cnn) {
    if (o.sidecar.empty()) throw ConfigError("select --strategy cnn requires --sidecar PATH");
    inputs.sidecar = DetectionSidecar::load(o.sidecar);
  }
  if (strategy == Strategy::manual) {
    if (o.decisions.empty()) throw ConfigError("select --strategy manual requires --decisions PATH");
    inputs.accepted = accepted_ids(read_decisions(o.decisions));
  }
  Manifest manifest(ctx.manifest_path(), ctx.images_dir());
  const auto candidates = manifest_candidates(manifest);
  const auto result =
      apply_strategy(candidates, strategy, ctx.config.filter, make_matting(ctx, true), inputs, ctx.jobs);

  const std::string name = to_string(strategy);
  write_text(ctx.selection_dir() / ("reasons_" + name + ".jsonl"), reasons_jsonl(result.reports));
  write_text(ctx.selection_dir() / ("selected_" + name + ".txt"), join_lines(result.selected));
  write_text(ctx.selection_dir() / "distractors.txt", join_lines(result.selected_distractors));

  std::map<std::string, std::size_t> failed;
  for (const auto& r : result.reports)
    if (r.failed_filter) ++failed[*r.failed_filter];
  write_run_report(ctx, {{"strategy", name},
                         {"candidates", candidates.size()},
                         {"selected", result.selected.size()},
                         {"selected_distractors", result.selected_distractors.size()},
                         {"rejected_by", failed}});
  std::cout << "select (" << name << "): " << result.selected.size() << " objects, "
            << result.selected_distractors.size() << " distractors of " << candidates.size()
            << " candidates\n";
  return 0;
}

int cmd_review(const RunContext& ctx) {
  Manifest manifest(ctx.manifest_path(), ctx.images_dir());
  std::vector<SelectionCandidate> objects;
  for (auto& c : manifest_candidates(manifest))
    if (c.role == Role::object) objects.push_back(std::move(c));
  const MattingFn matting = make_matting(ctx, true);
  std::vector<std::optional<ReviewCandidate>> reviewable(objects.size());
  parallel_for(objects.size(), ctx.jobs, [&](std::size_t i) {
    const auto report = run_prechain(objects[i], ctx.config.filter, matting);
    if (report.keep)
      reviewable[i] = ReviewCandidate{objects[i].id, report.scores,
                                      manifest.image_path(*manifest.find(objects[i].id))};
  });
  std::vector<ReviewCandidate> candidates;
  for (auto& r : reviewable)
    if (r) candidates.push_back(std::move(*r));

  ReviewStore store(std::move(candidates), ctx.workspace / "decisions.jsonl", ctx.workspace / "thumbnails");
  write_run_report(ctx, {{"reviewable", store.size()}});
  ReviewServer server(store);
  const Options& o = *ctx.options;
  std::cout << "review: " << store.size() << " candidates on http://" << o.host << ":" << o.port
            << std::endl;
  if (!server.listen(o.host, o.port)) throw ConfigError("cannot listen on " + o.host + ":" + std::to_string(o.port));
  return 0;
}

std::vector<Cutout> load_cutout_dir(const fs::path& dir, Role role) {
  std::vector<Cutout> out;
  if (!fs::is_directory(dir)) return out;
  std::vector<fs::path> files;
  for (const auto& f : fs::directory_iterator(dir))
    if (f.path().extension() == ".png") files.push_back(f.path());
  std::sort(files.begin(), files.end());
  for (const auto& f : files) {
    auto decoded = read_image(f);
    if (!decoded.has_alpha) throw DataError("cutout without alpha: " + f.string());
    out.push_back(make_cutout(std::move(decoded.pixels), role, f.stem().string()));
  }
  return out;
}

std::vector<std::string> read_id_list(const fs::path& path) {
  if (!fs::exists(path)) throw DataError("missing " + path.string() + " (run select first)");
  return read_lines(path);
}

std::vector<Cutout> load_selected(const RunContext& ctx, const std::vector<std::string>& ids, Role role) {
  std::vector<Cutout> out;
  Manifest manifest(ctx.manifest_path(), ctx.images_dir());
  const MattingFn matting = make_matting(ctx, true);
  for (const auto& id : ids) {
    const auto record = manifest.find(id);
    if (!record) throw DataError("selected id " + id + " is not in the manifest");
    const RgbImage image = load_rgb(manifest.image_path(*record));
    out.push_back(make_cutout(matting({id, role, record->byte_length, {}}, image), role, id));
  }
  return out;
}

int cmd_compose(const RunContext& ctx) {
  const Options& o = *ctx.options;
  if (o.backgrounds.empty()) throw ConfigError("compose requires --backgrounds DIR");
  GenerationInputs inputs;
  if (!o.cutouts.empty()) {
    inputs.objects = load_cutout_dir(fs::path(o.cutouts) / "objects", Role::object);
    inputs.distractors = load_cutout_dir(fs::path(o.cutouts) / "distractors", Role::distractor);
  } else {
    const Strategy strategy = parse_strategy(o.strategy);
    inputs.objects = load_selected(
        ctx, read_id_list(ctx.selection_dir() / ("selected_" + to_string(strategy) + ".txt")), Role::object);
    inputs.distractors =
        load_selected(ctx, read_id_list(ctx.selection_dir() / "distractors.txt"), Role::distractor);
  }
  inputs.backgrounds = scan_backgrounds(o.backgrounds, ctx.config.generation.excluded_categories);
  const fs::path out = ctx.out_dir();
  auto result = generate_dataset(ctx.config, inputs, out, ctx.seed, ctx.jobs);
  std::cout << "compose: " << result.images_written[0] << "/" << result.images_written[1] << "/"
            << result.images_written[2] << " images (train/val/test) in " << out.string() << "\n";
  return 0;
}

int cmd_validate(const RunContext& ctx) {
  const auto result = validate_output_tree(ctx.out_dir());
  for (const auto& p : result.problems) std::cout << "problem: " << p << "\n";
  std::cout << "validate: " << result.layouts_checked << " layouts, " << result.annotations_checked
            << " annotations, min polygon IoU " << result.min_polygon_iou << ", "
            << result.problems.size() << " problems\n";
  return result.ok() ? 0 : 2;
}

int dispatch(const std::string& command, RunContext& ctx) {
  if (command == "scrape") return cmd_scrape(ctx);
  if (command == "mat") return cmd_mat(ctx);
  if (command == "select") return cmd_select(ctx);
  if (command == "review") return cmd_review(ctx);
  if (command == "compose") return cmd_compose(ctx);
  if (command == "validate") return cmd_validate(ctx);
  // all
  for (const char* stage : {"scrape", "mat", "select", "compose"}) {
    ctx.command = stage;
    if (int rc = dispatch(stage, ctx); rc != 0) return rc;
  }
  return 0;
}

}  // namespace

int run_cli(int argc, const char* const* argv) {
  CLI::App app{"Synthetic instance-segmentation dataset pipeline", "synthset"};
  app.require_subcommand(1);
  Options o;
  if (const char* ws = std::getenv("SYNTHSET_WORKSPACE")) o.workspace = ws;
  if (o.workspace.empty()) o.workspace = "workspace";

  auto common = [&o](CLI::App* sub) {
    sub->add_option("--config", o.config_path, "JSON config file (flat keys)");
    sub->add_option("--seed", o.seed, "master seed");
    sub->add_option("--jobs", o.jobs, "worker threads")->check(CLI::PositiveNumber);
    sub->add_option("--workspace", o.workspace, "workspace directory (default $SYNTHSET_WORKSPACE)");
    sub->add_flag("-v,--verbose", o.verbosity, "more logging");
    sub->add_flag("-q,--quiet", o.quiet, "errors only");
  };
  auto out_opt = [&o](CLI::App* sub) { sub->add_option("--out", o.out, "output directory"); };
  auto selection_opts = [&o](CLI::App* sub) {
    sub->add_option("--strategy", o.strategy, "plain, cnn or manual");
    sub->add_option("--sidecar", o.sidecar, "detection sidecar JSON (cnn)");
    sub->add_option("--decisions", o.decisions, "decisions JSON Lines (manual)");
  };
  auto scrape_opts = [&o](CLI::App* sub) {
    sub->add_option("--fetcher-url", o.fetcher_url, "search/download service base URL");
    sub->add_option("--queries", o.queries, "object queries, one per line");
    sub->add_option("--categories", o.categories, "distractor categories, one per line");
  };
  auto compose_opts = [&o](CLI::App* sub) {
    sub->add_option("--backgrounds", o.backgrounds, "background directory <category>/<image>");
    sub->add_option("--cutouts", o.cutouts, "directory with objects/ and distractors/ RGBA PNGs");
    sub->add_flag("--no-blend", o.no_blend, "render only the direct paste");
  };

  auto* scrape_cmd = app.add_subcommand("scrape", "search and download candidate images");
  common(scrape_cmd);
  scrape_opts(scrape_cmd);
  auto* mat_cmd = app.add_subcommand("mat", "matte raw candidates");
  common(mat_cmd);
  auto* select_cmd = app.add_subcommand("select", "apply a selection strategy");
  common(select_cmd);
  selection_opts(select_cmd);
  auto* review_cmd = app.add_subcommand("review", "serve the review API");
  common(review_cmd);
  review_cmd->add_option("--host", o.host, "bind address");
  review_cmd->add_option("--port", o.port, "bind port");
  auto* compose_cmd = app.add_subcommand("compose", "render layouts and export COCO");
  common(compose_cmd);
  compose_opts(compose_cmd);
  out_opt(compose_cmd);
  compose_cmd->add_option("--strategy", o.strategy, "which selected set to compose");
  auto* all_cmd = app.add_subcommand("all", "scrape, mat, select and compose");
  common(all_cmd);
  scrape_opts(all_cmd);
  selection_opts(all_cmd);
  compose_opts(all_cmd);
  out_opt(all_cmd);
  auto* validate_cmd = app.add_subcommand("validate", "re-check an output tree");
  common(validate_cmd);
  out_opt(validate_cmd);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << e.what() << "\n\n" << app.help();
    return 1;
  }

  const std::string command = app.get_subcommands().front()->get_name();
  spdlog::set_level(o.quiet ? spdlog::level::err
                            : o.verbosity > 0 ? spdlog::level::debug : spdlog::level::warn);
  try {
    RunContext ctx;
    ctx.command = command;
    ctx.options = &o;
    ctx.seed = o.seed;
    ctx.jobs = o.jobs;
    ctx.config = o.config_path.empty() ? PipelineConfig{} : load_config(o.config_path);
    if (o.no_blend) ctx.config.generation.methods = {BlendMethod::none};
    ctx.config.validate();
    ctx.workspace = o.workspace;
    if (command != "validate") {
      std::error_code ec;
      fs::create_directories(ctx.workspace, ec);
      if (ec || !fs::is_directory(ctx.workspace))
        throw ConfigError("workspace " + ctx.workspace.string() + " is not a writable directory");
    }
    return dispatch(command, ctx);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const DataError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 2;
  } catch (const FetchError& e) {
    std::cerr << "fetch error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}

int run_cli(const std::vector<std::string>& args) {
  std::vector<const char*> argv{"synthset"};
  for (const auto& a : args) argv.push_back(a.c_str());
  return run_cli(static_cast<int>(argv.size()), argv.data());
}

}  // namespace synthset
