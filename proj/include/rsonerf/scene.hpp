#pragma once

// Analytic test scenes: unions of constant-density primitives with an exact
// point-membership oracle. These stand in for the physical mock-up: the
// default satellite has a body, two thin panels and a dish so renders exhibit
// occlusion and thin structure.

#include "rsonerf/core.hpp"
#include "rsonerf/field_interface.hpp"

#include <variant>

namespace rsonerf::data {

struct BoxPrimitive {
  Vec3<double> lo, hi;
  double sigma = 0;
  Vec3<double> rgb = Vec3<double>::Zero();

  bool contains(const Vec3<double>& x) const {
    return (x.array() >= lo.array()).all() && (x.array() <= hi.array()).all();
  }
};

struct CylinderPrimitive {  // axis parallel to z
  double cx = 0.5, cy = 0.5, radius = 0.1;
  double zlo = 0, zhi = 1;
  double sigma = 0;
  Vec3<double> rgb = Vec3<double>::Zero();

  bool contains(const Vec3<double>& x) const {
    const double dx = x[0] - cx, dy = x[1] - cy;
    return dx * dx + dy * dy <= radius * radius && x[2] >= zlo && x[2] <= zhi;
  }
};

using Primitive = std::variant<BoxPrimitive, CylinderPrimitive>;

struct AnalyticScene {
  std::vector<Primitive> primitives;

  void validate() const {
    for (const auto& prim : primitives) {
      std::visit(
          [](const auto& p) {
            require(p.sigma >= 0, "scene: primitive density must be nonnegative");
            require(p.rgb.minCoeff() >= 0 && p.rgb.maxCoeff() <= 1,
                    "scene: primitive colors must lie in [0,1]");
          },
          prim);
      if (const auto* box = std::get_if<BoxPrimitive>(&prim)) {
        require((box->lo.array() >= 0).all() && (box->hi.array() <= 1).all() &&
                    (box->lo.array() < box->hi.array()).all(),
                "scene: box must be nonempty and inside the unit cube");
      } else if (const auto* cyl = std::get_if<CylinderPrimitive>(&prim)) {
        require(cyl->radius > 0 && cyl->zlo < cyl->zhi && cyl->zlo >= 0 && cyl->zhi <= 1 &&
                    cyl->cx - cyl->radius >= 0 && cyl->cx + cyl->radius <= 1 &&
                    cyl->cy - cyl->radius >= 0 && cyl->cy + cyl->radius <= 1,
                "scene: cylinder must be nonempty and inside the unit cube");
      }
    }
  }

  static AnalyticScene default_satellite() {
    AnalyticScene scene;
    // body
    scene.primitives.push_back(BoxPrimitive{Vec3<double>(0.38, 0.40, 0.40),
                                            Vec3<double>(0.62, 0.60, 0.60), 60.0,
                                            Vec3<double>(0.78, 0.70, 0.35)});
    // thin solar panels, port and starboard
    scene.primitives.push_back(BoxPrimitive{Vec3<double>(0.08, 0.44, 0.47),
                                            Vec3<double>(0.36, 0.56, 0.52), 60.0,
                                            Vec3<double>(0.15, 0.25, 0.75)});
    scene.primitives.push_back(BoxPrimitive{Vec3<double>(0.64, 0.44, 0.47),
                                            Vec3<double>(0.92, 0.56, 0.52), 60.0,
                                            Vec3<double>(0.15, 0.25, 0.75)});
    // dish on top
    scene.primitives.push_back(
        CylinderPrimitive{0.5, 0.5, 0.09, 0.60, 0.70, 60.0, Vec3<double>(0.85, 0.85, 0.88)});
    scene.validate();
    return scene;
  }
};

// First primitive (in list order) containing x wins; empty space is black
// vacuum. x is expected inside the unit cube.
inline std::pair<double, Vec3<double>> analytic_query(const Vec3<double>& x,
                                                      const AnalyticScene& scene) {
  for (const auto& prim : scene.primitives) {
    bool inside = false;
    double sigma = 0;
    Vec3<double> rgb = Vec3<double>::Zero();
    std::visit(
        [&](const auto& p) {
          inside = p.contains(x);
          sigma = p.sigma;
          rgb = p.rgb;
        },
        prim);
    if (inside) return {sigma, rgb};
  }
  return {0.0, Vec3<double>::Zero()};
}

// Radiance-field view of the scene; lighting_scale multiplies albedo only,
// mirroring a dimmed lamp.
template <typename S>
fields::CallableField<S> analytic_field(const AnalyticScene& scene,
                                        double lighting_scale = 1.0) {
  require(lighting_scale > 0 && lighting_scale <= 1,
          "analytic_field: lighting_scale must lie in (0,1]");
  scene.validate();
  return fields::CallableField<S>(
      "analytic", [scene, lighting_scale](const MatX<S>& pos, VecX<S>& sigma, MatX<S>& rgb) {
        for (Index i = 0; i < pos.rows(); ++i) {
          const Vec3<double> x = pos.row(i).transpose().template cast<double>();
          const auto [s, c] = analytic_query(x, scene);
          sigma[i] = static_cast<S>(s);
          rgb.row(i) = (c * lighting_scale).template cast<S>().transpose();
        }
      });
}

}  // namespace rsonerf::data
