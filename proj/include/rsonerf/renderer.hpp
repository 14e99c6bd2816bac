#pragma once

// Transmittance-quadrature volume rendering. Sampling is stratified over the
// ray's t range; compositing uses the alpha formulation
//   alpha_i = 1 - exp(-sigma_i * delta_i),  T_i = prod_{j<i} (1 - alpha_j),
//   w_i = T_i * alpha_i
// and is a single differentiable tape op with a hand-derived backward, so
// gradients flow from pixels to field parameters.

#include "rsonerf/camera.hpp"
#include "rsonerf/field_interface.hpp"
#include "rsonerf/image.hpp"

namespace rsonerf::render {

template <typename S>
struct RenderConfig {
  int samples_per_ray = 64;
  Vec3<S> background_rgb = Vec3<S>::Zero();
  bool stratified_jitter = false;
  std::uint64_t rng_seed = 0;
  S miss_t_near = S(0);
  S miss_t_far = S(1.7320508075688772);  // unit-cube diagonal

  void validate() const {
    require(samples_per_ray >= 2, "render: samples_per_ray must be >= 2");
    require(background_rgb.minCoeff() >= S(0) && background_rgb.maxCoeff() <= S(1),
            "render: background_rgb must lie in [0,1]");
    require(miss_t_near >= S(0) && miss_t_near < miss_t_far,
            "render: miss range must satisfy 0 <= near < far");
  }

  template <typename T>
  RenderConfig<T> cast() const {
    RenderConfig<T> c;
    c.samples_per_ray = samples_per_ray;
    c.background_rgb = background_rgb.template cast<T>();
    c.stratified_jitter = stratified_jitter;
    c.rng_seed = rng_seed;
    c.miss_t_near = static_cast<T>(miss_t_near);
    c.miss_t_far = static_cast<T>(miss_t_far);
    return c;
  }
};

template <typename S>
struct RaySamples {
  ArrX<S> t;      // sample positions along the ray
  ArrX<S> delta;  // interval lengths; sums to t_far - t_near
};

// Equal bins over [t_near, t_far]; midpoints when jitter is off, one uniform
// draw per bin when on.
template <typename S>
RaySamples<S> sample_points(const Ray<S>& ray, const RenderConfig<S>& cfg, Rng& rng) {
  const int n = cfg.samples_per_ray;
  const S span = ray.t_far - ray.t_near;
  const S width = span / static_cast<S>(n);
  RaySamples<S> out;
  out.t.resize(n);
  out.delta = ArrX<S>::Constant(n, width);
  for (int i = 0; i < n; ++i) {
    const S u = cfg.stratified_jitter ? static_cast<S>(rng.uniform()) : S(0.5);
    out.t[i] = ray.t_near + (static_cast<S>(i) + u) * width;
  }
  return out;
}

template <typename S>
struct CompositeOut {
  ad::Tensor<S> rgb;      // [B x 3]
  ad::Tensor<S> opacity;  // [B x 1]
};

// sigma: [B*N x 1] node, rgb: [B*N x 3] node, deltas: [B x N] constant.
// Row-major sample order: ray b occupies rows b*N .. b*N+N-1.
template <typename S>
CompositeOut<S> composite_rays(ad::Tape<S>& tape, const ad::Tensor<S>& sigma,
                               const ad::Tensor<S>& rgb, const MatX<S>& deltas,
                               const Vec3<S>& background) {
  const Index rays = deltas.rows(), n = deltas.cols();
  require(sigma.rank() == 2 && sigma.cols() == 1 && sigma.rows() == rays * n,
          cat("composite: sigma rows ", sigma.rows(), " vs ", rays * n, " samples"));
  require(rgb.rank() == 2 && rgb.cols() == 3 && rgb.rows() == rays * n,
          cat("composite: rgb rows ", rgb.rows(), " vs ", rays * n, " samples"));
  const ad::NodeId is = tape.ensure(sigma), ic = tape.ensure(rgb);
  const bool needs_grad = tape.requires_grad(is) || tape.requires_grad(ic);

  // cache per sample: weight w_i and the survivor product T_{i+1}
  struct Cache {
    std::vector<S> w, t_next;
  };
  auto cache = std::make_shared<Cache>();
  if (needs_grad) {
    cache->w.resize(static_cast<std::size_t>(rays) * n);
    cache->t_next.resize(static_cast<std::size_t>(rays) * n);
  }

  const S* sig = tape.value(is).values.data();
  const auto col = tape.value(ic).mat();
  MatX<S> out(rays, 4);
  for (Index b = 0; b < rays; ++b) {
    S transmit = S(1);
    S sum_w = S(0);
    Vec3<S> acc = Vec3<S>::Zero();
    for (Index i = 0; i < n; ++i) {
      const Index row = b * n + i;
      const S tau = sig[row] * deltas(b, i);
      const S survive = std::exp(-tau);
      const S alpha = S(1) - survive;
      const S w = transmit * alpha;
      acc += w * col.row(row).transpose();
      sum_w += w;
      transmit *= survive;
      if (needs_grad) {
        cache->w[row] = w;
        cache->t_next[row] = transmit;
      }
    }
    out.template block<1, 3>(b, 0) = (acc + (S(1) - sum_w) * background).transpose();
    out(b, 3) = sum_w;
  }

  ad::Tensor<S> packed = ad::Tensor<S>::from_mat(out);
  packed.node = tape.record(
      packed, {is, ic},
      [is, ic, rays, n, deltas, background, cache](ad::Tape<S>& t, const ArrX<S>& up) {
        const auto dOut = ad::detail::as_mat<S>(up, rays, 4);
        const auto col = t.value(ic).mat();
        const bool want_sigma = t.requires_grad(is);
        const bool want_rgb = t.requires_grad(ic);
        ArrX<S> dSigma;
        if (want_sigma) dSigma = ArrX<S>::Zero(rays * n);
        MatX<S> dRgb;
        if (want_rgb) dRgb = MatX<S>::Zero(rays * n, 3);
        for (Index b = 0; b < rays; ++b) {
          const Vec3<S> dC = dOut.template block<1, 3>(b, 0).transpose();
          const S dO = dOut(b, 3);
          S suffix = S(0);
          for (Index i = n - 1; i >= 0; --i) {
            const Index row = b * n + i;
            const S w = cache->w[row];
            if (want_rgb) dRgb.row(row) = (w * dC).transpose();
            if (want_sigma) {
              // dL/dw_i: color delta against background plus opacity pull
              const S dw = dC.dot(col.row(row).transpose() - background) + dO;
              const S dtau = dw * cache->t_next[row] - suffix;
              dSigma[row] = dtau * deltas(b, i);
              suffix += dw * w;
            }
          }
        }
        if (want_sigma) t.accumulate(is, dSigma);
        if (want_rgb) t.accumulate_mat(ic, dRgb);
      });

  CompositeOut<S> result;
  result.rgb = ad::slice_cols(tape, packed, 0, 3);
  result.opacity = ad::slice_cols(tape, packed, 3, 1);
  return result;
}

// ---------------------------------------------------------------------------
// Whole-ray and whole-image forward rendering (no gradients retained).

template <typename S>
struct RayBatchGeometry {
  MatX<S> positions;   // [B*N x 3], clamped to the unit cube
  MatX<S> directions;  // [B*N x 3]
  MatX<S> deltas;      // [B x N]
};

template <typename S>
RayBatchGeometry<S> make_ray_geometry(const std::vector<Ray<S>>& rays,
                                      const RenderConfig<S>& cfg,
                                      const std::vector<std::uint64_t>& ray_seeds) {
  const Index b = static_cast<Index>(rays.size());
  const Index n = cfg.samples_per_ray;
  RayBatchGeometry<S> geo;
  geo.positions.resize(b * n, 3);
  geo.directions.resize(b * n, 3);
  geo.deltas.resize(b, n);
  for (Index r = 0; r < b; ++r) {
    Rng rng(ray_seeds.empty() ? Rng::derive(cfg.rng_seed, std::uint64_t(r))
                              : ray_seeds[r]);
    const auto samples = sample_points(rays[r], cfg, rng);
    geo.deltas.row(r) = samples.delta.transpose();
    for (Index i = 0; i < n; ++i) {
      const Vec3<S> p = rays[r].origin + samples.t[i] * rays[r].direction;
      geo.positions.row(r * n + i) =
          p.cwiseMax(Vec3<S>::Zero()).cwiseMin(Vec3<S>::Ones()).transpose();
      geo.directions.row(r * n + i) = rays[r].direction.transpose();
    }
  }
  return geo;
}

// Composites one ray through the field; convenience wrapper over the batch
// path, used by tests and single-probe tools.
template <typename S>
std::pair<Vec3<S>, S> render_ray(const Ray<S>& ray, const fields::RadianceField<S>& field,
                                 const RenderConfig<S>& cfg,
                                 std::optional<S> time = std::nullopt) {
  cfg.validate();
  ad::Tape<S> tape;
  auto binding = field.bind(tape, false);
  auto geo = make_ray_geometry<S>({ray}, cfg, {});
  VecX<S> times;
  const VecX<S>* times_ptr = nullptr;
  if (time) {
    times = VecX<S>::Constant(cfg.samples_per_ray, *time);
    times_ptr = &times;
  }
  auto samples = binding.query(tape, tape.constant(ad::Tensor<S>::from_mat(geo.positions)),
                               geo.directions, times_ptr);
  auto out = composite_rays(tape, samples.sigma, samples.rgb, geo.deltas,
                            cfg.background_rgb);
  return {out.rgb.mat().row(0).transpose(), out.opacity.values[0]};
}

// Full-raster render: RGBA float image (alpha = accumulated opacity).
// Parallel over pixel chunks; per-pixel RNG streams are derived from
// (seed, pixel index) so the output is independent of the worker count.
template <typename S>
img::ImageF render_image(const CameraIntrinsics<S>& intr, const Pose<S>& pose,
                         const fields::RadianceField<S>& field, const RenderConfig<S>& cfg,
                         std::optional<S> time = std::nullopt) {
  intr.validate();
  pose.validate();
  cfg.validate();
  const Index total = Index(intr.width) * intr.height;
  img::ImageF image(intr.width, intr.height, 4);
  constexpr Index kChunk = 4096;

  parallel_chunks(total, [&](int, Index begin, Index end) {
    for (Index chunk = begin; chunk < end; chunk += kChunk) {
      const Index count = std::min<Index>(kChunk, end - chunk);
      std::vector<Ray<S>> rays(count);
      std::vector<std::uint64_t> seeds(count);
      for (Index k = 0; k < count; ++k) {
        const Index pix = chunk + k;
        rays[k] = pixel_to_ray(pix % intr.width, pix / intr.width, intr, pose,
                               cfg.miss_t_near, cfg.miss_t_far);
        seeds[k] = Rng::derive(cfg.rng_seed, std::uint64_t(pix));
      }
      ad::Tape<S> tape;
      auto binding = field.bind(tape, false);
      auto geo = make_ray_geometry<S>(rays, cfg, seeds);
      VecX<S> times;
      const VecX<S>* times_ptr = nullptr;
      if (time) {
        times = VecX<S>::Constant(count * cfg.samples_per_ray, *time);
        times_ptr = &times;
      }
      auto samples = binding.query(
          tape, tape.constant(ad::Tensor<S>::from_mat(geo.positions)), geo.directions,
          times_ptr);
      auto out =
          composite_rays(tape, samples.sigma, samples.rgb, geo.deltas, cfg.background_rgb);
      for (Index k = 0; k < count; ++k) {
        const Index pix = chunk + k;
        const int x = static_cast<int>(pix % intr.width);
        const int y = static_cast<int>(pix / intr.width);
        for (int c = 0; c < 3; ++c)
          image.at(x, y, c) = static_cast<float>(out.rgb.mat()(k, c));
        image.at(x, y, 3) = static_cast<float>(out.opacity.values[k]);
      }
    }
  });
  return image;
}

}  // namespace rsonerf::render
