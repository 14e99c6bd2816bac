// rsonerf: reconstruct 3D radiance fields of a target object from posed 2D
// images. Subcommands wire the pipeline end to end:
//   synth   - generate a synthetic orbit or spin dataset with ground truth
//   chroma  - green-screen background removal over a directory of PNGs
//   train   - optimize a field (vanilla | instant | dnerf) on a dataset
//   render  - render views from a checkpoint (single frame or 3x3 grid)
//   eval    - PSNR/SSIM report on chosen views, optional external LPIPS
//   bench   - wall-clock time-to-quality comparison across field kinds
//
// One JSON config file carries every tunable; command-line flags override
// single keys. Exit codes: 0 success, 2 usage/validation, 3 runtime abort.

#include <CLI11.hpp>
#include <json.hpp>

#include "rsonerf/dataset.hpp"
#include "rsonerf/fields.hpp"
#include "rsonerf/metrics.hpp"
#include "rsonerf/preprocess.hpp"
#include "rsonerf/trainer.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>

namespace fs = std::filesystem;
using nlohmann::json;
using namespace rsonerf;

namespace {

struct RunConfig {
  std::string precision = "f32";
  fields::FieldConfig field;
  train::TrainConfig train;
  prep::ChromaKeyConfig chroma;
  data::SynthConfig synth;
  int synth_width = 591, synth_height = 443;
  int synth_frames = 80;
  int render_samples = 64;
  Vec3<double> render_background = Vec3<double>::Zero();
  std::uint64_t render_seed = 0;
  bool lr_explicit = false;
};

RunConfig load_config(const std::string& path) {
  RunConfig cfg;
  if (path.empty()) return cfg;
  std::ifstream in(path);
  if (!in) throw ContractError("config: cannot open " + path);
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ContractError(cat("config: ", path, " is not valid JSON: ", e.what()));
  }
  if (j.contains("precision")) j.at("precision").get_to(cfg.precision);
  if (j.contains("field")) cfg.field = j.at("field").get<fields::FieldConfig>();
  if (j.contains("train")) {
    cfg.train = j.at("train").get<train::TrainConfig>();
    cfg.lr_explicit = j.at("train").contains("learning_rate");
  }
  if (j.contains("chroma")) {
    const auto& c = j.at("chroma");
    if (c.contains("key_hue")) c.at("key_hue").get_to(cfg.chroma.key_hue);
    if (c.contains("hue_tolerance")) c.at("hue_tolerance").get_to(cfg.chroma.hue_tolerance);
    if (c.contains("min_saturation"))
      c.at("min_saturation").get_to(cfg.chroma.min_saturation);
    if (c.contains("min_value")) c.at("min_value").get_to(cfg.chroma.min_value);
    if (c.contains("despill_strength"))
      c.at("despill_strength").get_to(cfg.chroma.despill_strength);
    if (c.contains("feather_radius"))
      c.at("feather_radius").get_to(cfg.chroma.feather_radius);
  }
  if (j.contains("synth")) {
    const auto& s = j.at("synth");
    if (s.contains("views")) s.at("views").get_to(cfg.synth.n_views);
    if (s.contains("radius")) s.at("radius").get_to(cfg.synth.radius);
    if (s.contains("lighting")) s.at("lighting").get_to(cfg.synth.lighting_scale);
    if (s.contains("samples_per_ray")) s.at("samples_per_ray").get_to(cfg.synth.samples_per_ray);
    if (s.contains("seed")) s.at("seed").get_to(cfg.synth.seed);
    if (s.contains("spin_rate")) s.at("spin_rate").get_to(cfg.synth.spin_rate_deg_per_s);
    if (s.contains("fps")) s.at("fps").get_to(cfg.synth.frame_rate_fps);
    if (s.contains("width")) s.at("width").get_to(cfg.synth_width);
    if (s.contains("height")) s.at("height").get_to(cfg.synth_height);
    if (s.contains("frames")) s.at("frames").get_to(cfg.synth_frames);
  }
  if (j.contains("render")) {
    const auto& r = j.at("render");
    if (r.contains("samples_per_ray")) r.at("samples_per_ray").get_to(cfg.render_samples);
    if (r.contains("rng_seed")) r.at("rng_seed").get_to(cfg.render_seed);
    if (r.contains("background_rgb")) {
      const auto& bg = r.at("background_rgb");
      require(bg.is_array() && bg.size() == 3, "render.background_rgb must hold 3 numbers");
      for (int i = 0; i < 3; ++i) cfg.render_background[i] = bg[i].get<double>();
    }
  }
  return cfg;
}

// Collects every validation failure before reporting, so a bad config is
// fixed in one pass.
int validate_all(const RunConfig& cfg, const std::vector<std::string>& more) {
  std::vector<std::string> errors = more;
  auto attempt = [&errors](const std::function<void()>& fn) {
    try {
      fn();
    } catch (const std::exception& e) {
      errors.push_back(e.what());
    }
  };
  attempt([&] { cfg.field.validate(); });
  attempt([&] { cfg.train.validate(); });
  attempt([&] { cfg.chroma.validate(); });
  attempt([&] { cfg.synth.validate(); });
  attempt([&] {
    require(cfg.precision == "f32" || cfg.precision == "f64",
            "precision must be f32 or f64");
  });
  attempt([&] {
    require(cfg.render_samples >= 2, "render.samples_per_ray must be >= 2");
    require(cfg.render_background.minCoeff() >= 0 && cfg.render_background.maxCoeff() <= 1,
            "render.background_rgb must lie in [0,1]");
  });
  if (errors.empty()) return 0;
  for (const auto& e : errors) std::cerr << "config error: " << e << "\n";
  return 2;
}

double default_lr_for(const std::string& kind) {
  // hash tables tolerate large steps; deep trunks do not
  return kind == "instant" ? 1e-2 : 5e-4;
}

void write_eval_history(const std::string& path,
                        const std::vector<train::EvalRecord>& history) {
  std::ofstream out(path, std::ios::trunc);
  for (const auto& r : history) {
    json j{{"step", r.step}, {"psnr", r.psnr}, {"ssim", r.ssim}, {"seconds", r.seconds}};
    out << j.dump() << "\n";
  }
}

struct TrainArgs {
  std::string dataset, out, kind = "instant";
};

template <typename S>
int run_train(RunConfig cfg, const TrainArgs& args) {
  auto manifest = data::load_manifest(args.dataset);
  auto images = data::load_frame_images(manifest, args.dataset);
  cfg.field.kind = args.kind;
  if (!cfg.lr_explicit) cfg.train.learning_rate = default_lr_for(args.kind);
  if (args.kind == "dnerf" && !manifest.has_times()) {
    std::cerr << "dnerf training needs a dataset with per-frame 'time' values; "
              << args.dataset << " has none\n";
    return 2;
  }

  auto field = fields::make_field<S>(cfg.field, cfg.train.seed);
  std::cout << "training " << args.kind << " (" << field->parameter_count()
            << " parameters) on " << manifest.frames.size() << " frames\n";

  const auto save = [&](std::int64_t step, const train::TrainResult<S>& result) {
    fields::CheckpointMeta meta;
    meta.config = cfg.field;
    meta.seed = cfg.train.seed;
    meta.step = step;
    meta.extra["loss"] = std::to_string(result.final_loss);
    meta.extra["seconds"] = std::to_string(result.seconds);
    meta.extra["train_config"] = json(cfg.train).dump();
    fields::save_checkpoint<S>(args.out, *field, meta);
    write_eval_history(args.out + ".evals.jsonl", result.eval_history);
  };
  auto result = train::train_loop<S>(*field, manifest, images, cfg.train, save);

  std::cout << "finished after " << result.steps_run << " steps in " << result.seconds
            << " s, final loss " << result.final_loss
            << (result.plateaued ? " (held-out PSNR plateaued)" : "") << "\n";
  if (!result.eval_history.empty()) {
    const auto& last = result.eval_history.back();
    std::cout << "held-out psnr " << last.psnr << " dB, ssim " << last.ssim << "\n";
  }
  std::cout << "checkpoint written to " << args.out << "\n";
  return 0;
}

struct RenderArgs {
  std::string checkpoint, poses, out;
  int frame = 0;
  bool grid = false;
  double grid_step_deg = 5.0;
  double time = 0.0;
  bool raw = false;
};

template <typename S>
int run_render(const RunConfig& cfg, const RenderArgs& args) {
  auto [field, meta] = fields::load_checkpoint<S>(args.checkpoint);
  auto manifest = data::load_manifest(args.poses);
  require(args.frame >= 0 && args.frame < static_cast<int>(manifest.frames.size()),
          cat("render: frame ", args.frame, " outside dataset of ",
              manifest.frames.size(), " frames"));
  fs::create_directories(args.out);

  render::RenderConfig<S> rc;
  rc.samples_per_ray = cfg.render_samples;
  rc.background_rgb = cfg.render_background.template cast<S>();
  rc.rng_seed = cfg.render_seed;
  const auto intr = manifest.intrinsics.cast<S>();
  std::optional<S> time;
  if (field->wants_time()) time = static_cast<S>(args.time);

  auto emit = [&](const render::Pose<S>& pose, const std::string& name) {
    auto image = render::render_image<S>(intr, pose, *field, rc, time);
    // the PNG is the composited view; the raw dump keeps rgb + opacity
    img::write_png((fs::path(args.out) / (name + ".png")).string(),
                   img::to_u8(train::rgb_of(image)));
    if (args.raw)
      img::write_raw_f32((fs::path(args.out) / (name + ".raw")).string(), image);
  };

  if (!args.grid) {
    emit(manifest.unit_cube_pose(args.frame).template cast<S>(),
         "frame_" + std::to_string(args.frame));
    std::cout << "rendered 1 view into " << args.out << "\n";
    return 0;
  }

  // 3x3 grid of novel views around the chosen frame: the camera position is
  // swept in azimuth and elevation about the scene center
  const auto base = manifest.unit_cube_pose(args.frame);
  const Vec3<double> center(0.5, 0.5, 0.5);
  const Vec3<double> offset = base.translation() - center;
  const double radius = offset.norm();
  const double azimuth = std::atan2(offset[1], offset[0]);
  const double elevation = std::asin(std::clamp(offset[2] / radius, -1.0, 1.0));
  const double step = args.grid_step_deg * EIGEN_PI / 180.0;
  for (int row = -1; row <= 1; ++row)
    for (int col = -1; col <= 1; ++col) {
      const double az = azimuth + col * step;
      const double el = std::clamp(elevation + row * step, -1.2, 1.2);
      const Vec3<double> eye =
          center + radius * Vec3<double>(std::cos(el) * std::cos(az),
                                         std::cos(el) * std::sin(az), std::sin(el));
      const auto pose = render::Pose<double>::look_at(eye, center, Vec3<double>::UnitZ());
      emit(pose.template cast<S>(),
           cat("grid_", row + 1, "_", col + 1));
    }
  std::cout << "rendered 9 novel views around frame " << args.frame << " into "
            << args.out << "\n";
  return 0;
}

struct EvalArgs {
  std::string checkpoint, dataset, out, lpips_file, holdout_list;
  double holdout_fraction = -1;
};

template <typename S>
int run_eval(const RunConfig& cfg, const EvalArgs& args) {
  auto [field, meta] = fields::load_checkpoint<S>(args.checkpoint);
  auto manifest = data::load_manifest(args.dataset);
  auto images = data::load_frame_images(manifest, args.dataset);

  std::vector<std::size_t> views;
  if (!args.holdout_list.empty()) {
    std::stringstream ss(args.holdout_list);
    for (std::string part; std::getline(ss, part, ',');) {
      const std::size_t idx = std::stoul(part);
      require(idx < manifest.frames.size(),
              cat("eval: view ", idx, " outside dataset of ", manifest.frames.size(),
                  " frames"));
      views.push_back(idx);
    }
  } else {
    const double fraction = args.holdout_fraction >= 0 ? args.holdout_fraction
                                                       : cfg.train.holdout_fraction;
    views = train::holdout_indices(manifest.frames.size(), fraction);
  }
  require(!views.empty(), "eval: no views selected (use --holdout or --holdout-fraction)");

  render::RenderConfig<S> rc;
  rc.samples_per_ray = cfg.render_samples;
  rc.background_rgb = cfg.render_background.template cast<S>();
  const auto intr = manifest.intrinsics.cast<S>();

  std::vector<std::string> ids;
  std::vector<img::ImageF> rendered, truth;
  for (std::size_t idx : views) {
    std::optional<S> time;
    if (field->wants_time() && manifest.frames[idx].time)
      time = static_cast<S>(*manifest.frames[idx].time);
    auto image = render::render_image<S>(
        intr, manifest.unit_cube_pose(idx).template cast<S>(), *field, rc, time);
    // compare in the 8-bit domain the ground-truth files live in, so a
    // checkpoint evaluated against its own saved renders scores exactly
    rendered.push_back(img::to_float(img::to_u8(train::rgb_of(image))));
    truth.push_back(train::composited_truth(images[idx], cfg.render_background));
    ids.push_back("view" + std::to_string(idx));
  }

  std::map<std::string, double> lpips;
  const std::map<std::string, double>* lpips_ptr = nullptr;
  if (!args.lpips_file.empty()) {
    lpips = metrics::load_lpips_file(args.lpips_file);
    lpips_ptr = &lpips;
  }
  auto report = metrics::build_report(ids, rendered, truth, lpips_ptr, 1.0);
  std::cout << report.to_text();
  if (!args.out.empty()) {
    std::ofstream(args.out + ".txt") << report.to_text();
    std::ofstream(args.out + ".jsonl") << report.to_jsonl();
    std::cout << "report written to " << args.out << ".txt and .jsonl\n";
  }
  return 0;
}

struct BenchArgs {
  std::string dataset, kinds = "instant,vanilla";
  double target_db = 0;
};

template <typename S>
int run_bench(const RunConfig& cfg, const BenchArgs& args) {
  auto manifest = data::load_manifest(args.dataset);
  auto images = data::load_frame_images(manifest, args.dataset);

  std::vector<train::BenchEntry> entries;
  std::stringstream ss(args.kinds);
  for (std::string kind; std::getline(ss, kind, ',');) {
    require(kind == "vanilla" || kind == "instant" || kind == "dnerf",
            cat("bench: unknown field kind '", kind, "'"));
    train::BenchEntry entry;
    entry.kind = kind;
    entry.field_config = cfg.field;
    entry.field_config.kind = kind;
    entry.train_config = cfg.train;
    if (!cfg.lr_explicit) entry.train_config.learning_rate = default_lr_for(kind);
    entries.push_back(std::move(entry));
  }

  auto rows = train::bench<S>(entries, manifest, images, args.target_db);
  std::cout << "target: held-out psnr >= " << args.target_db << " dB\n";
  std::cout << train::bench_table(rows);
  if (rows.size() == 2 && rows[0].reached) {
    const double speedup = rows[1].seconds / rows[0].seconds;
    std::cout << rows[0].kind << " reached the target " << speedup << "x faster than "
              << rows[1].kind << (rows[1].reached ? "" : " (which timed out)") << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"rsonerf: radiance-field reconstruction of resident space objects"};
  app.require_subcommand(1);

  std::string config_path;
  int threads = 0;
  std::string precision_flag;
  app.add_option("--config", config_path, "JSON config file (flags override keys)");
  app.add_option("--threads", threads, "cap worker threads (also: RSONERF_THREADS)");
  app.add_option("--precision", precision_flag, "scalar width: f32 or f64");

  // synth ---------------------------------------------------------------
  auto* synth = app.add_subcommand("synth", "generate a synthetic dataset");
  std::string synth_out;
  int synth_views = -1, synth_frames = -1, synth_w = -1, synth_h = -1, synth_samples = -1;
  double synth_lighting = -1, synth_radius = -1, synth_spin = -1, synth_fps = -1;
  std::int64_t synth_seed = -1;
  synth->add_option("--out", synth_out, "output dataset directory")->required();
  synth->add_option("--views", synth_views, "orbit views (360/n azimuth step)");
  synth->add_option("--lighting", synth_lighting, "lamp intensity in (0,1]");
  synth->add_option("--spin", synth_spin, "spin mode: target yaw rate, deg/s");
  synth->add_option("--fps", synth_fps, "spin mode: capture frame rate, Hz");
  synth->add_option("--frames", synth_frames, "spin mode: frame count");
  synth->add_option("--radius", synth_radius, "camera orbit radius (unit-cube units)");
  synth->add_option("--width", synth_w, "image width");
  synth->add_option("--height", synth_h, "image height");
  synth->add_option("--samples", synth_samples, "ground-truth samples per ray");
  synth->add_option("--seed", synth_seed, "generation seed");

  // chroma ---------------------------------------------------------------
  auto* chroma = app.add_subcommand("chroma", "batch green-screen removal");
  std::string chroma_in, chroma_out;
  double key_hue = -1, hue_tol = -1, min_sat = -1, min_val = -1, despill = -1;
  int feather = -1;
  chroma->add_option("--in", chroma_in, "input directory of PNGs")->required();
  chroma->add_option("--out", chroma_out, "output directory (RGBA PNGs)")->required();
  chroma->add_option("--key-hue", key_hue, "key hue, degrees");
  chroma->add_option("--hue-tolerance", hue_tol, "hue tolerance, degrees");
  chroma->add_option("--min-saturation", min_sat, "minimum keyed saturation");
  chroma->add_option("--min-value", min_val, "minimum keyed value");
  chroma->add_option("--despill", despill, "despill strength in [0,1]");
  chroma->add_option("--feather", feather, "alpha feather radius, pixels");

  // train ----------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "train a field on a dataset");
  TrainArgs train_args;
  std::int64_t train_steps = -1, train_eval_every = -1;
  std::int64_t train_seed = -1;
  int train_rays = -1, train_samples = -1;
  double train_lr = -1, train_holdout = -1;
  train_cmd->add_option("--dataset", train_args.dataset, "transforms.json path")->required();
  train_cmd->add_option("--out", train_args.out, "checkpoint output path")->required();
  train_cmd->add_option("--field", train_args.kind, "vanilla | instant | dnerf");
  train_cmd->add_option("--steps", train_steps, "max optimization steps");
  train_cmd->add_option("--rays", train_rays, "rays per batch");
  train_cmd->add_option("--samples", train_samples, "samples per ray");
  train_cmd->add_option("--lr", train_lr, "learning rate");
  train_cmd->add_option("--holdout", train_holdout, "held-out frame fraction");
  train_cmd->add_option("--eval-every", train_eval_every, "steps between evals");
  train_cmd->add_option("--seed", train_seed, "training seed");

  // render ---------------------------------------------------------------
  auto* render_cmd = app.add_subcommand("render", "render views from a checkpoint");
  RenderArgs render_args;
  render_cmd->add_option("--checkpoint", render_args.checkpoint, "checkpoint path")
      ->required();
  render_cmd->add_option("--poses", render_args.poses, "transforms.json for poses")
      ->required();
  render_cmd->add_option("--out", render_args.out, "output directory")->required();
  render_cmd->add_option("--frame", render_args.frame, "frame index to render");
  render_cmd->add_flag("--grid", render_args.grid, "render a 3x3 novel-view grid");
  render_cmd->add_option("--grid-step", render_args.grid_step_deg,
                         "grid angular step, degrees");
  render_cmd->add_option("--time", render_args.time, "time input for dnerf fields");
  render_cmd->add_flag("--raw", render_args.raw, "also dump float32 raw images");

  // eval -----------------------------------------------------------------
  auto* eval_cmd = app.add_subcommand("eval", "metric report for a checkpoint");
  EvalArgs eval_args;
  eval_cmd->add_option("--checkpoint", eval_args.checkpoint, "checkpoint path")->required();
  eval_cmd->add_option("--dataset", eval_args.dataset, "transforms.json path")->required();
  eval_cmd->add_option("--out", eval_args.out, "report path prefix");
  eval_cmd->add_option("--holdout", eval_args.holdout_list,
                       "comma-separated view indices");
  eval_cmd->add_option("--holdout-fraction", eval_args.holdout_fraction,
                       "evaluate the standard held-out split");
  eval_cmd->add_option("--lpips-file", eval_args.lpips_file,
                       "external per-view LPIPS values");

  // bench ----------------------------------------------------------------
  auto* bench_cmd = app.add_subcommand("bench", "time-to-quality comparison");
  BenchArgs bench_args;
  bench_cmd->add_option("--dataset", bench_args.dataset, "transforms.json path")
      ->required();
  bench_cmd->add_option("--kinds", bench_args.kinds, "comma-separated field kinds");
  bench_cmd->add_option("--target-db", bench_args.target_db, "held-out PSNR target")
      ->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;  // --help exits 0; any parse failure is usage error
  }

  try {
    RunConfig cfg = load_config(config_path);
    if (threads > 0) setenv("RSONERF_THREADS", std::to_string(threads).c_str(), 1);
    if (!precision_flag.empty()) cfg.precision = precision_flag;

    // flag overrides
    if (synth_views > 0) cfg.synth.n_views = synth_views;
    if (synth_lighting >= 0) cfg.synth.lighting_scale = synth_lighting;
    if (synth_radius > 0) cfg.synth.radius = synth_radius;
    if (synth_spin > 0) cfg.synth.spin_rate_deg_per_s = synth_spin;
    if (synth_fps > 0) cfg.synth.frame_rate_fps = synth_fps;
    if (synth_w > 0) cfg.synth_width = synth_w;
    if (synth_h > 0) cfg.synth_height = synth_h;
    if (synth_samples > 0) cfg.synth.samples_per_ray = synth_samples;
    if (synth_seed >= 0) cfg.synth.seed = std::uint64_t(synth_seed);
    if (synth_frames > 0) cfg.synth_frames = synth_frames;
    if (key_hue >= 0) cfg.chroma.key_hue = key_hue;
    if (hue_tol >= 0) cfg.chroma.hue_tolerance = hue_tol;
    if (min_sat >= 0) cfg.chroma.min_saturation = min_sat;
    if (min_val >= 0) cfg.chroma.min_value = min_val;
    if (despill >= 0) cfg.chroma.despill_strength = despill;
    if (feather >= 0) cfg.chroma.feather_radius = feather;
    if (train_steps > 0) cfg.train.max_steps = train_steps;
    if (train_rays > 0) cfg.train.rays_per_batch = train_rays;
    if (train_samples > 0) cfg.train.samples_per_ray = train_samples;
    if (train_lr > 0) {
      cfg.train.learning_rate = train_lr;
      cfg.lr_explicit = true;
    }
    if (train_holdout >= 0) cfg.train.holdout_fraction = train_holdout;
    if (train_eval_every >= 0) cfg.train.eval_every = train_eval_every;
    if (train_seed >= 0) cfg.train.seed = std::uint64_t(train_seed);

    std::vector<std::string> extra_errors;
    if (train_cmd->parsed() && train_args.kind != "vanilla" &&
        train_args.kind != "instant" && train_args.kind != "dnerf")
      extra_errors.push_back(
          cat("--field must be vanilla, instant or dnerf; got '", train_args.kind, "'"));
    if (const int code = validate_all(cfg, extra_errors)) return code;
    const bool f64 = cfg.precision == "f64";

    if (synth->parsed()) {
      auto scene = data::AnalyticScene::default_satellite();
      auto intr = data::default_synth_intrinsics(cfg.synth_width, cfg.synth_height);
      data::DatasetManifest manifest;
      if (synth_spin > 0 || synth_fps > 0) {
        manifest = f64 ? data::generate_spin_dataset<double>(scene, intr, cfg.synth,
                                                             cfg.synth_frames, synth_out)
                       : data::generate_spin_dataset<float>(scene, intr, cfg.synth,
                                                            cfg.synth_frames, synth_out);
        std::cout << "spin dataset: " << manifest.frames.size() << " frames at "
                  << cfg.synth.spin_rate_deg_per_s / cfg.synth.frame_rate_fps
                  << " deg/frame -> " << synth_out << "\n";
      } else {
        manifest = f64 ? data::generate_dataset<double>(scene, intr, cfg.synth, synth_out)
                       : data::generate_dataset<float>(scene, intr, cfg.synth, synth_out);
        std::cout << "orbit dataset: " << manifest.frames.size() << " views at "
                  << 360.0 / cfg.synth.n_views << " deg increments -> " << synth_out
                  << "\n";
      }
      return 0;
    }

    if (chroma->parsed()) {
      fs::create_directories(chroma_out);
      std::vector<fs::path> inputs;
      if (fs::exists(chroma_in))
        for (const auto& entry : fs::directory_iterator(chroma_in))
          if (entry.path().extension() == ".png") inputs.push_back(entry.path());
      std::sort(inputs.begin(), inputs.end());
      if (inputs.empty()) {
        std::cerr << "warning: no PNG files found in " << chroma_in << "\n";
        return 0;
      }
      for (const auto& path : inputs) {
        auto keyed = prep::chroma_key(img::read_png(path.string()), cfg.chroma);
        img::write_png((fs::path(chroma_out) / path.filename()).string(), keyed);
      }
      std::cout << "keyed " << inputs.size() << " images into " << chroma_out << "\n";
      return 0;
    }

    if (train_cmd->parsed())
      return f64 ? run_train<double>(cfg, train_args) : run_train<float>(cfg, train_args);
    if (render_cmd->parsed())
      return f64 ? run_render<double>(cfg, render_args)
                 : run_render<float>(cfg, render_args);
    if (eval_cmd->parsed())
      return f64 ? run_eval<double>(cfg, eval_args) : run_eval<float>(cfg, eval_args);
    if (bench_cmd->parsed())
      return f64 ? run_bench<double>(cfg, bench_args) : run_bench<float>(cfg, bench_args);
    return 2;
  } catch (const ContractError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const AbortError& e) {
    std::cerr << "abort: " << e.what() << "\n";
    return 3;
  } catch (const std::exception& e) {
    std::cerr << "unexpected error: " << e.what() << "\n";
    return 3;
  }
}
