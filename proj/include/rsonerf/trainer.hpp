#pragma once

// Photometric training of any radiance field on a posed dataset: uniform
// (frame x pixel) ray batches, MSE against RGBA targets composited over the
// configured background, Adam with exponential learning-rate decay, held-out
// evaluation with a plateau stop, checkpointing, and the time-to-quality
// benchmark harness.
//
// Batches are split into one contiguous slice per worker; every worker runs
// forward+backward on its own tape and the per-parameter gradients are
// reduced in worker order before a single Adam update, so runs are bitwise
// reproducible for a fixed seed and thread cap.

#include "rsonerf/dataset.hpp"
#include "rsonerf/fields.hpp"
#include "rsonerf/metrics.hpp"
#include "rsonerf/renderer.hpp"

#include <chrono>
#include <functional>
#include <sstream>

namespace rsonerf::train {

struct TrainConfig {
  std::int64_t max_steps = 2000;
  int rays_per_batch = 1024;
  double learning_rate = 1e-2;
  double lr_decay = 0.9995;  // per-step multiplier
  double lr_floor = 1e-3;
  std::int64_t eval_every = 250;  // 0 disables intermediate evals
  double holdout_fraction = 0.1;
  std::uint64_t seed = 1;
  int samples_per_ray = 48;
  Vec3<double> background_rgb = Vec3<double>::Zero();
  bool stratified_jitter = true;
  double plateau_min_gain_db = 0.1;
  int plateau_evals = 3;

  void validate() const {
    require(max_steps > 0, "train: max_steps must be positive");
    require(rays_per_batch > 0, "train: rays_per_batch must be positive");
    require(learning_rate > 0, "train: learning_rate must be positive");
    require(lr_decay > 0 && lr_decay <= 1, "train: lr_decay must lie in (0,1]");
    require(holdout_fraction >= 0 && holdout_fraction < 1,
            "train: holdout_fraction must lie in [0,1)");
    require(samples_per_ray >= 2, "train: samples_per_ray must be >= 2");
    require(background_rgb.minCoeff() >= 0 && background_rgb.maxCoeff() <= 1,
            "train: background_rgb must lie in [0,1]");
    require(plateau_evals >= 1, "train: plateau_evals must be >= 1");
  }
};

void to_json(nlohmann::json& j, const TrainConfig& c);
void from_json(const nlohmann::json& j, TrainConfig& c);

// Evenly spaced held-out frames; leaves at least one training frame.
inline std::vector<std::size_t> holdout_indices(std::size_t n_frames, double fraction) {
  require(fraction >= 0 && fraction < 1, "holdout fraction must lie in [0,1)");
  const auto n_hold = static_cast<std::size_t>(fraction * double(n_frames));
  require(n_frames - n_hold >= 1, "holdout would leave no training frames");
  std::vector<std::size_t> held;
  for (std::size_t k = 0; k < n_hold; ++k)
    held.push_back((k * n_frames) / n_hold);
  return held;
}

// Stop once `count` consecutive evals each gained less than min_gain dB.
inline bool plateau_should_stop(const std::vector<double>& eval_psnr, double min_gain,
                                int count) {
  if (static_cast<int>(eval_psnr.size()) < count + 1) return false;
  for (std::size_t i = eval_psnr.size() - count; i < eval_psnr.size(); ++i)
    if (eval_psnr[i] - eval_psnr[i - 1] >= min_gain) return false;
  return true;
}

template <typename S>
struct RayBatch {
  std::vector<render::Ray<S>> rays;
  MatX<S> targets;                        // [B x 3], composited over background
  VecX<S> times;                          // per ray; meaningful iff has_times
  bool has_times = false;
  std::vector<std::size_t> frame_indices;  // which frame each ray came from
};

// n pixels uniform over (train frame x pixel); RGBA targets composite over
// the background, RGB targets pass through.
template <typename S>
RayBatch<S> sample_ray_batch(const data::DatasetManifest& manifest,
                             const std::vector<img::ImageF>& images,
                             const std::vector<std::size_t>& train_frames, int n,
                             const Vec3<double>& background, Rng& rng) {
  require(n > 0, "sample_ray_batch: n must be positive");
  require(!train_frames.empty(), "sample_ray_batch: no training frames");
  const int w = manifest.intrinsics.width, h = manifest.intrinsics.height;
  const auto intr = manifest.intrinsics.cast<S>();
  RayBatch<S> batch;
  batch.rays.reserve(n);
  batch.targets.resize(n, 3);
  batch.times.resize(n);
  batch.has_times = manifest.has_times();
  batch.frame_indices.reserve(n);
  const std::uint64_t pixels_per_frame = std::uint64_t(w) * h;
  for (int k = 0; k < n; ++k) {
    const std::uint64_t draw = rng.uniform_index(train_frames.size() * pixels_per_frame);
    const std::size_t frame = train_frames[draw / pixels_per_frame];
    const std::uint64_t pix = draw % pixels_per_frame;
    const int x = static_cast<int>(pix % w), y = static_cast<int>(pix / w);
    batch.frame_indices.push_back(frame);
    batch.rays.push_back(render::pixel_to_ray<S>(
        x, y, intr, manifest.unit_cube_pose(frame).template cast<S>()));
    const img::ImageF& image = images[frame];
    const double alpha = image.channels == 4 ? image.at(x, y, 3) : 1.0;
    for (int c = 0; c < 3; ++c) {
      const double fg = image.at(x, y, std::min(c, image.channels - 1));
      batch.targets(k, c) = static_cast<S>(alpha * fg + (1.0 - alpha) * background[c]);
    }
    batch.times[k] = static_cast<S>(
        manifest.frames[frame].time.value_or(0.0));
  }
  return batch;
}

template <typename S>
struct StepStats {
  double loss = 0;
  double max_sigma = 0;
};

// One optimization step over a ray batch. Parallel across workers with
// per-worker tapes; gradients reduced in worker order; single Adam writer.
template <typename S>
StepStats<S> train_step(fields::RadianceField<S>& field, const RayBatch<S>& batch,
                        ad::AdamState<S>& adam, const render::RenderConfig<S>& rc,
                        std::uint64_t step_seed) {
  const Index b = static_cast<Index>(batch.rays.size());
  const int n = rc.samples_per_ray;
  require(b > 0, "train_step: empty batch");

  auto params = field.parameters();
  const std::size_t n_params = params.size();
  const int workers = worker_count();
  std::vector<std::vector<ArrX<S>>> worker_grads(workers);
  std::vector<double> worker_loss(workers, 0.0);
  std::vector<double> worker_max_sigma(workers, 0.0);
  std::vector<std::uint64_t> ray_seeds(b);
  for (Index r = 0; r < b; ++r) ray_seeds[r] = Rng::derive(step_seed, std::uint64_t(r));

  parallel_chunks(b, [&](int w, Index begin, Index end) {
    const Index rows = end - begin;
    std::vector<render::Ray<S>> rays(batch.rays.begin() + begin, batch.rays.begin() + end);
    std::vector<std::uint64_t> seeds(ray_seeds.begin() + begin, ray_seeds.begin() + end);
    ad::Tape<S> tape;
    auto binding = field.bind(tape, true);
    auto geo = render::make_ray_geometry<S>(rays, rc, seeds);
    VecX<S> times;
    const VecX<S>* times_ptr = nullptr;
    if (batch.has_times && field.wants_time()) {
      times.resize(rows * n);
      for (Index r = 0; r < rows; ++r)
        times.segment(r * n, n).setConstant(batch.times[begin + r]);
      times_ptr = &times;
    }
    auto samples = binding.query(
        tape, tape.constant(ad::Tensor<S>::from_mat(geo.positions)), geo.directions,
        times_ptr);
    worker_max_sigma[w] = double(samples.sigma.values.maxCoeff());
    auto out = render::composite_rays(tape, samples.sigma, samples.rgb, geo.deltas,
                                      rc.background_rgb);
    ad::Tensor<S> target = ad::Tensor<S>::from_mat(
        MatX<S>(batch.targets.middleRows(begin, rows)));
    // slice mse scaled by its share so worker losses sum to the batch mse
    auto loss = ad::scale(tape, ad::mse_loss(tape, out.rgb, target),
                          static_cast<S>(double(rows) / double(b)));
    worker_loss[w] = double(loss.item());
    auto grads = tape.backward(loss.node);
    worker_grads[w].resize(n_params);
    for (std::size_t p = 0; p < n_params; ++p) {
      const ad::NodeId node = binding.params[p].node;
      if (node < static_cast<ad::NodeId>(grads.size()) && grads[node].size() > 0)
        worker_grads[w][p] = std::move(grads[node]);
    }
  });

  StepStats<S> stats;
  for (int w = 0; w < workers; ++w) {
    stats.loss += worker_loss[w];
    stats.max_sigma = std::max(stats.max_sigma, worker_max_sigma[w]);
  }

  std::vector<ArrX<S>> reduced(n_params);
  for (std::size_t p = 0; p < n_params; ++p)
    for (int w = 0; w < workers; ++w) {
      if (worker_grads[w].empty() || worker_grads[w][p].size() == 0) continue;
      if (reduced[p].size() == 0)
        reduced[p] = worker_grads[w][p];
      else
        reduced[p] += worker_grads[w][p];
    }

  if (!std::isfinite(stats.loss))
    throw AbortError(cat("training aborted: non-finite loss at adam step ",
                         adam.step_count + 1, " (lr ", adam.cfg.learning_rate,
                         ", max sigma ", stats.max_sigma, ")"));
  adam_step(params, reduced, adam);
  return stats;
}

struct EvalRecord {
  std::int64_t step = 0;
  double psnr = 0;
  double ssim = 0;
  double seconds = 0;
};

// Renders a frame's ground truth composited over the training background.
inline img::ImageF composited_truth(const img::ImageF& frame, const Vec3<double>& bg) {
  img::ImageF out(frame.width, frame.height, 3);
  for (int y = 0; y < frame.height; ++y)
    for (int x = 0; x < frame.width; ++x) {
      const double alpha = frame.channels == 4 ? frame.at(x, y, 3) : 1.0;
      for (int c = 0; c < 3; ++c)
        out.at(x, y, c) = static_cast<float>(
            alpha * frame.at(x, y, std::min(c, frame.channels - 1)) +
            (1.0 - alpha) * bg[c]);
    }
  return out;
}

inline img::ImageF rgb_of(const img::ImageF& rgba) {
  img::ImageF out(rgba.width, rgba.height, 3);
  for (int y = 0; y < rgba.height; ++y)
    for (int x = 0; x < rgba.width; ++x)
      for (int c = 0; c < 3; ++c) out.at(x, y, c) = rgba.at(x, y, c);
  return out;
}

// Mean held-out PSNR/SSIM of the field at its current parameters.
template <typename S>
std::pair<double, double> evaluate_holdout(const fields::RadianceField<S>& field,
                                           const data::DatasetManifest& manifest,
                                           const std::vector<img::ImageF>& images,
                                           const std::vector<std::size_t>& held_out,
                                           const TrainConfig& cfg) {
  require(!held_out.empty(), "evaluate_holdout: no held-out frames");
  render::RenderConfig<S> rc;
  rc.samples_per_ray = cfg.samples_per_ray;
  rc.stratified_jitter = false;
  rc.background_rgb = cfg.background_rgb.template cast<S>();
  double psnr_sum = 0, ssim_sum = 0;
  for (std::size_t idx : held_out) {
    std::optional<S> time;
    if (field.wants_time() && manifest.frames[idx].time)
      time = static_cast<S>(*manifest.frames[idx].time);
    auto rendered = render::render_image<S>(manifest.intrinsics.cast<S>(),
                                            manifest.unit_cube_pose(idx).template cast<S>(),
                                            field, rc, time);
    const auto truth = composited_truth(images[idx], cfg.background_rgb);
    const auto rgb = rgb_of(rendered);
    psnr_sum += metrics::psnr(rgb, truth, 1.0);
    ssim_sum += metrics::ssim(rgb, truth, 1.0);
  }
  return {psnr_sum / double(held_out.size()), ssim_sum / double(held_out.size())};
}

template <typename S>
struct TrainResult {
  std::int64_t steps_run = 0;
  double final_loss = 0;
  double seconds = 0;
  std::vector<double> loss_history;
  std::vector<EvalRecord> eval_history;
  std::vector<std::size_t> held_out;
  bool plateaued = false;
};

// Runs up to max_steps, evaluating every eval_every steps and stopping early
// once held-out PSNR plateaus. `on_checkpoint` fires after every eval and at
// the end (step, result so far).
template <typename S>
TrainResult<S> train_loop(
    fields::RadianceField<S>& field, const data::DatasetManifest& manifest,
    const std::vector<img::ImageF>& images, const TrainConfig& cfg,
    const std::function<void(std::int64_t, const TrainResult<S>&)>& on_checkpoint = {}) {
  cfg.validate();
  require(manifest.frames.size() >= 2, "train: need at least 2 frames");
  require(images.size() == manifest.frames.size(),
          cat("train: ", images.size(), " images for ", manifest.frames.size(), " frames"));
  if (field.wants_time())
    require(manifest.has_times(),
            "train: dnerf field needs per-frame 'time' stamps in the manifest");

  TrainResult<S> result;
  result.held_out = holdout_indices(manifest.frames.size(), cfg.holdout_fraction);
  std::vector<std::size_t> train_frames;
  for (std::size_t i = 0; i < manifest.frames.size(); ++i)
    if (std::find(result.held_out.begin(), result.held_out.end(), i) ==
        result.held_out.end())
      train_frames.push_back(i);

  render::RenderConfig<S> rc;
  rc.samples_per_ray = cfg.samples_per_ray;
  rc.stratified_jitter = cfg.stratified_jitter;
  rc.background_rgb = cfg.background_rgb.template cast<S>();

  ad::AdamState<S> adam(ad::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
  Rng sampler(Rng::derive(cfg.seed, 0x73616d706c65ull));
  const auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&t0] {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  std::vector<double> eval_psnr;
  for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
    adam.cfg.learning_rate = std::max(
        cfg.lr_floor, cfg.learning_rate * std::pow(cfg.lr_decay, double(step - 1)));
    auto batch = sample_ray_batch<S>(manifest, images, train_frames, cfg.rays_per_batch,
                                     cfg.background_rgb, sampler);
    auto stats =
        train_step<S>(field, batch, adam, rc, Rng::derive(cfg.seed, 0x6a69745eull + step));
    result.loss_history.push_back(stats.loss);
    result.final_loss = stats.loss;
    result.steps_run = step;

    const bool eval_now =
        (cfg.eval_every > 0 && step % cfg.eval_every == 0 && !result.held_out.empty()) ||
        (step == cfg.max_steps && !result.held_out.empty());
    if (eval_now) {
      auto [p, s] = evaluate_holdout<S>(field, manifest, images, result.held_out, cfg);
      result.eval_history.push_back(EvalRecord{step, p, s, elapsed()});
      eval_psnr.push_back(p);
      if (on_checkpoint) on_checkpoint(step, result);
      if (plateau_should_stop(eval_psnr, cfg.plateau_min_gain_db, cfg.plateau_evals)) {
        result.plateaued = true;
        break;
      }
    }
  }
  result.seconds = elapsed();
  if (on_checkpoint) on_checkpoint(result.steps_run, result);
  return result;
}

// ---------------------------------------------------------------------------
// Time-to-quality benchmark (the runtime-comparison harness)

struct BenchEntry {
  std::string kind;
  fields::FieldConfig field_config;
  TrainConfig train_config;
};

struct BenchRow {
  std::string kind;
  std::string device;
  double seconds = 0;
  bool reached = false;
  std::int64_t steps = 0;
  double final_psnr = 0;
};

inline std::string bench_table(const std::vector<BenchRow>& rows) {
  std::ostringstream out;
  out << "kind       device                                   seconds   reached   psnr_db\n";
  for (const auto& r : rows) {
    char buf[200];
    std::snprintf(buf, sizeof(buf), "%-10s %-40s %8.2f   %-7s %9.3f\n", r.kind.c_str(),
                  r.device.c_str(), r.seconds, r.reached ? "yes" : "no", r.final_psnr);
    out << buf;
  }
  return out.str();
}

// Trains each entry until its held-out PSNR first reaches target_db (or the
// step budget runs out) and reports the wall-clock. Timeouts are recorded,
// not thrown.
template <typename S>
std::vector<BenchRow> bench(const std::vector<BenchEntry>& entries,
                            const data::DatasetManifest& manifest,
                            const std::vector<img::ImageF>& images, double target_db) {
  require(!entries.empty(), "bench: need at least one field kind");
  std::vector<BenchRow> rows;
  for (const auto& entry : entries) {
    auto field = fields::make_field<S>(entry.field_config, entry.train_config.seed);
    BenchRow row;
    row.kind = entry.kind;
    row.device = device_description();

    TrainConfig cfg = entry.train_config;
    cfg.validate();
    require(cfg.holdout_fraction > 0, "bench: needs held-out frames to measure quality");
    const auto t0 = std::chrono::steady_clock::now();
    const auto held_out = holdout_indices(manifest.frames.size(), cfg.holdout_fraction);
    std::vector<std::size_t> train_frames;
    for (std::size_t i = 0; i < manifest.frames.size(); ++i)
      if (std::find(held_out.begin(), held_out.end(), i) == held_out.end())
        train_frames.push_back(i);

    render::RenderConfig<S> rc;
    rc.samples_per_ray = cfg.samples_per_ray;
    rc.stratified_jitter = cfg.stratified_jitter;
    rc.background_rgb = cfg.background_rgb.template cast<S>();
    ad::AdamState<S> adam(ad::AdamConfig{cfg.learning_rate, 0.9, 0.999, 1e-8});
    Rng sampler(Rng::derive(cfg.seed, 0x73616d706c65ull));

    for (std::int64_t step = 1; step <= cfg.max_steps; ++step) {
      adam.cfg.learning_rate = std::max(
          cfg.lr_floor, cfg.learning_rate * std::pow(cfg.lr_decay, double(step - 1)));
      auto batch = sample_ray_batch<S>(manifest, images, train_frames, cfg.rays_per_batch,
                                       cfg.background_rgb, sampler);
      train_step<S>(*field, batch, adam, rc,
                    Rng::derive(cfg.seed, 0x6a69745eull + step));
      row.steps = step;
      if (cfg.eval_every > 0 && step % cfg.eval_every == 0) {
        auto [p, s] = evaluate_holdout<S>(*field, manifest, images, held_out, cfg);
        row.final_psnr = p;
        if (p >= target_db) {
          row.reached = true;
          break;
        }
      }
    }
    row.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    rows.push_back(std::move(row));
  }
  return rows;
}

inline void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = nlohmann::json{{"max_steps", c.max_steps},
                     {"rays_per_batch", c.rays_per_batch},
                     {"learning_rate", c.learning_rate},
                     {"lr_decay", c.lr_decay},
                     {"lr_floor", c.lr_floor},
                     {"eval_every", c.eval_every},
                     {"holdout_fraction", c.holdout_fraction},
                     {"seed", c.seed},
                     {"samples_per_ray", c.samples_per_ray},
                     {"background_rgb",
                      {c.background_rgb[0], c.background_rgb[1], c.background_rgb[2]}},
                     {"stratified_jitter", c.stratified_jitter},
                     {"plateau_min_gain_db", c.plateau_min_gain_db},
                     {"plateau_evals", c.plateau_evals}};
}

inline void from_json(const nlohmann::json& j, TrainConfig& c) {
  c = TrainConfig{};
  if (j.contains("max_steps")) j.at("max_steps").get_to(c.max_steps);
  if (j.contains("rays_per_batch")) j.at("rays_per_batch").get_to(c.rays_per_batch);
  if (j.contains("learning_rate")) j.at("learning_rate").get_to(c.learning_rate);
  if (j.contains("lr_decay")) j.at("lr_decay").get_to(c.lr_decay);
  if (j.contains("lr_floor")) j.at("lr_floor").get_to(c.lr_floor);
  if (j.contains("eval_every")) j.at("eval_every").get_to(c.eval_every);
  if (j.contains("holdout_fraction")) j.at("holdout_fraction").get_to(c.holdout_fraction);
  if (j.contains("seed")) j.at("seed").get_to(c.seed);
  if (j.contains("samples_per_ray")) j.at("samples_per_ray").get_to(c.samples_per_ray);
  if (j.contains("background_rgb")) {
    const auto& bg = j.at("background_rgb");
    require(bg.is_array() && bg.size() == 3, "background_rgb must hold 3 numbers");
    for (int i = 0; i < 3; ++i) c.background_rgb[i] = bg[i].get<double>();
  }
  if (j.contains("stratified_jitter")) j.at("stratified_jitter").get_to(c.stratified_jitter);
  if (j.contains("plateau_min_gain_db"))
    j.at("plateau_min_gain_db").get_to(c.plateau_min_gain_db);
  if (j.contains("plateau_evals")) j.at("plateau_evals").get_to(c.plateau_evals);
}

}  // namespace rsonerf::train
