#pragma once

// Posed-image datasets: the transforms-JSON manifest convention, frame-rate
// subsampling, and synthetic orbit / spin dataset generation against the
// analytic scene oracle.

#include "rsonerf/camera.hpp"
#include "rsonerf/image.hpp"
#include "rsonerf/renderer.hpp"
#include "rsonerf/scene.hpp"

#include <filesystem>
#include <optional>

namespace rsonerf::data {

struct FrameRecord {
  std::string file_path;  // relative to the manifest
  render::Pose<double> transform;
  std::optional<double> time;
};

struct DatasetManifest {
  render::CameraIntrinsics<double> intrinsics;
  double aabb_scale = 1.0;  // world units per unit-cube edge
  std::vector<FrameRecord> frames;

  // Pose with translation mapped into the unit cube. Raw transforms are kept
  // verbatim so that write/load round-trips stay bit-exact for any scale.
  render::Pose<double> unit_cube_pose(std::size_t i) const {
    render::Pose<double> p = frames.at(i).transform;
    p.camera_to_world.template block<3, 1>(0, 3) /= aabb_scale;
    return p;
  }

  bool has_times() const {
    for (const auto& f : frames)
      if (!f.time.has_value()) return false;
    return !frames.empty();
  }
};

// Parses the transforms-JSON convention. Validates pose rigidity (tolerance
// 1e-4) and names the offending field or frame in every error.
DatasetManifest load_manifest(const std::string& path);
void write_manifest(const DatasetManifest& manifest, const std::string& path);

// Loads every frame image (PNG, any supported channel count) as float.
std::vector<img::ImageF> load_frame_images(const DatasetManifest& manifest,
                                           const std::string& manifest_path);

// Keeps every stride-th frame (stride = round(source/target)), first frame
// always included.
std::vector<std::size_t> select_frame_indices(std::size_t count, double source_rate,
                                              double target_rate);

// ---------------------------------------------------------------------------
// Synthetic dataset generation

// Capture geometry of the source footage: 591x443 frames, field of view
// sized so the satellite fills the frame from the default orbit radius.
inline render::CameraIntrinsics<double> default_synth_intrinsics(int width = 591,
                                                                 int height = 443) {
  return render::CameraIntrinsics<double>::from_angle_x(width, height, 0.62);
}

struct SynthConfig {
  int n_views = 36;
  double radius = 1.4;           // orbit radius around the cube center, unit-cube units
  double lighting_scale = 1.0;   // lamp intensity multiplier on albedo
  int samples_per_ray = 256;     // ground-truth quadrature density
  std::uint64_t seed = 0;
  // spin mode (generate_spin_dataset)
  double spin_rate_deg_per_s = 10.0;
  double frame_rate_fps = 2.0;

  void validate() const {
    require(n_views >= 2, "synth: need at least two views");
    require(radius > 0.87, "synth: radius must place cameras outside the unit cube");
    require(lighting_scale > 0 && lighting_scale <= 1,
            "synth: lighting_scale must lie in (0,1]");
    require(samples_per_ray >= 2, "synth: samples_per_ray must be >= 2");
    require(spin_rate_deg_per_s > 0, "synth: spin rate must be positive");
    require(frame_rate_fps > 0, "synth: frame rate must be positive");
  }
};

namespace detail {

inline render::Pose<double> orbit_pose(double azimuth_deg, double radius) {
  const double a = azimuth_deg * EIGEN_PI / 180.0;
  const Vec3<double> center(0.5, 0.5, 0.5);
  const Vec3<double> eye = center + radius * Vec3<double>(std::cos(a), std::sin(a), 0.0);
  return render::Pose<double>::look_at(eye, center, Vec3<double>::UnitZ());
}

template <typename S>
DatasetManifest generate_views(const AnalyticScene& scene,
                               const render::CameraIntrinsics<double>& intr,
                               const SynthConfig& cfg, int n_frames, double azimuth_step,
                               bool with_times, const std::string& out_dir) {
  cfg.validate();
  intr.validate();
  scene.validate();
  namespace fs = std::filesystem;
  fs::create_directories(fs::path(out_dir) / "frames");

  auto field = analytic_field<S>(scene, cfg.lighting_scale);
  render::RenderConfig<S> rc;
  rc.samples_per_ray = cfg.samples_per_ray;
  rc.stratified_jitter = false;  // ground truth stays quadrature-exact
  rc.rng_seed = cfg.seed;
  rc.background_rgb = Vec3<S>::Zero();

  DatasetManifest manifest;
  manifest.intrinsics = intr;
  manifest.aabb_scale = 1.0;
  for (int i = 0; i < n_frames; ++i) {
    const auto pose = orbit_pose(i * azimuth_step, cfg.radius);
    auto image = render::render_image<S>(intr.cast<S>(), pose.template cast<S>(), field, rc);
    // renders come back premultiplied over the (black) background; stored
    // RGBA files use straight alpha, the convention trainers composite with
    for (int y = 0; y < image.height; ++y)
      for (int x = 0; x < image.width; ++x) {
        const float alpha = image.at(x, y, 3);
        for (int c = 0; c < 3; ++c)
          image.at(x, y, c) = alpha > 1e-4f
                                  ? std::min(1.f, image.at(x, y, c) / alpha)
                                  : 0.f;
      }
    char name[64];
    std::snprintf(name, sizeof(name), "frames/frame_%04d.png", i);
    img::write_png((fs::path(out_dir) / name).string(), img::to_u8(image));
    FrameRecord record;
    record.file_path = name;
    record.transform = pose;
    if (with_times) record.time = (n_frames > 1) ? double(i) / double(n_frames - 1) : 0.0;
    manifest.frames.push_back(std::move(record));
  }
  write_manifest(manifest, (fs::path(out_dir) / "transforms.json").string());
  return manifest;
}

}  // namespace detail

// Cameras on a horizontal circle, azimuth step 360/n_views, all looking at
// the scene center.
template <typename S = float>
DatasetManifest generate_dataset(const AnalyticScene& scene,
                                 const render::CameraIntrinsics<double>& intr,
                                 const SynthConfig& cfg, const std::string& out_dir) {
  return detail::generate_views<S>(scene, intr, cfg, cfg.n_views, 360.0 / cfg.n_views,
                                   /*with_times=*/false, out_dir);
}

// A spinning target seen from a fixed chaser, re-expressed as the equivalent
// camera orbit around a static scene; frames carry normalized timestamps.
// Azimuth step per frame = spin_rate / frame_rate.
template <typename S = float>
DatasetManifest generate_spin_dataset(const AnalyticScene& scene,
                                      const render::CameraIntrinsics<double>& intr,
                                      const SynthConfig& cfg, int n_frames,
                                      const std::string& out_dir) {
  require(n_frames >= 2, "spin dataset: need at least two frames");
  const double step = cfg.spin_rate_deg_per_s / cfg.frame_rate_fps;
  return detail::generate_views<S>(scene, intr, cfg, n_frames, step,
                                   /*with_times=*/true, out_dir);
}

}  // namespace rsonerf::data
