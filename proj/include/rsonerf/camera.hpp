#pragma once

// Camera intrinsics (pinhole plus single radial coefficient), rigid poses,
// and ray generation. The scene convention throughout: content lives inside
// the unit cube, cameras look down their local -z axis, and rays are clipped
// to the cube where they hit it.

#include "rsonerf/core.hpp"

#include <optional>

namespace rsonerf::render {

template <typename S>
struct CameraIntrinsics {
  S fx = S(1), fy = S(1);
  S cx = S(0.5), cy = S(0.5);
  int width = 1, height = 1;
  S k1 = S(0);  // radial distortion; 0 = pinhole

  void validate() const {
    require(fx > S(0) && fy > S(0), "intrinsics: focal lengths must be positive");
    require(width > 0 && height > 0, "intrinsics: image size must be positive");
    require(cx > S(0) && cx < S(width), "intrinsics: cx must lie inside the image");
    require(cy > S(0) && cy < S(height), "intrinsics: cy must lie inside the image");
  }

  static CameraIntrinsics from_angle_x(int w, int h, double angle_x_radians) {
    CameraIntrinsics intr;
    intr.width = w;
    intr.height = h;
    intr.fx = intr.fy = static_cast<S>(0.5 * w / std::tan(0.5 * angle_x_radians));
    intr.cx = static_cast<S>(0.5 * w);
    intr.cy = static_cast<S>(0.5 * h);
    return intr;
  }

  double angle_x() const { return 2.0 * std::atan(0.5 * double(width) / double(fx)); }

  template <typename T>
  CameraIntrinsics<T> cast() const {
    return CameraIntrinsics<T>{static_cast<T>(fx), static_cast<T>(fy),
                               static_cast<T>(cx), static_cast<T>(cy),
                               width, height, static_cast<T>(k1)};
  }
};

template <typename S>
struct Pose {
  Mat4<S> camera_to_world = Mat4<S>::Identity();

  // identity rotation, zero translation
  static Pose canonical() { return Pose{}; }

  static Pose from_matrix(const Mat4<S>& m) { return Pose{m}; }

  // Camera at `eye` looking toward `target`; `up` fixes the roll. The local
  // basis is [image-right, image-down, backward] so that rendered rows run
  // top to bottom for a +z world up.
  static Pose look_at(const Vec3<S>& eye, const Vec3<S>& target, const Vec3<S>& up) {
    Vec3<S> backward = (eye - target).normalized();
    Vec3<S> right = backward.cross(up);
    const S n = right.norm();
    require(n > S(1e-8), "look_at: view direction parallel to up vector");
    right /= n;
    const Vec3<S> down = backward.cross(right);
    Pose pose;
    pose.camera_to_world.template block<3, 1>(0, 0) = right;
    pose.camera_to_world.template block<3, 1>(0, 1) = down;
    pose.camera_to_world.template block<3, 1>(0, 2) = backward;
    pose.camera_to_world.template block<3, 1>(0, 3) = eye;
    return pose;
  }

  Mat3<S> rotation() const { return camera_to_world.template block<3, 3>(0, 0); }
  Vec3<S> translation() const { return camera_to_world.template block<3, 1>(0, 3); }

  void validate(S tol = S(1e-4)) const {
    const Mat3<S> r = rotation();
    const S ortho = (r.transpose() * r - Mat3<S>::Identity()).cwiseAbs().maxCoeff();
    require(ortho <= tol, cat("pose: rotation not orthonormal (max deviation ",
                              double(ortho), ")"));
    require(std::abs(r.determinant() - S(1)) <= tol,
            cat("pose: rotation determinant ", double(r.determinant()),
                " is not +1 (reflections are not rigid)"));
    const S bottom = (camera_to_world.row(3) -
                      Eigen::Matrix<S, 1, 4>(S(0), S(0), S(0), S(1)))
                         .cwiseAbs()
                         .maxCoeff();
    require(bottom <= S(1e-6), "pose: bottom row must be (0,0,0,1)");
  }

  template <typename T>
  Pose<T> cast() const {
    return Pose<T>{camera_to_world.template cast<T>()};
  }
};

template <typename S>
struct Ray {
  Vec3<S> origin = Vec3<S>::Zero();
  Vec3<S> direction = Vec3<S>::UnitZ();
  S t_near = S(0), t_far = S(1);
};

// Slab test against [0,1]^3; empty when the ray misses.
template <typename S>
std::optional<std::pair<S, S>> intersect_unit_cube(const Vec3<S>& origin,
                                                   const Vec3<S>& direction) {
  S t0 = -std::numeric_limits<S>::infinity();
  S t1 = std::numeric_limits<S>::infinity();
  for (int d = 0; d < 3; ++d) {
    if (direction[d] == S(0)) {
      if (origin[d] < S(0) || origin[d] > S(1)) return std::nullopt;
      continue;
    }
    S a = (S(0) - origin[d]) / direction[d];
    S b = (S(1) - origin[d]) / direction[d];
    if (a > b) std::swap(a, b);
    t0 = std::max(t0, a);
    t1 = std::min(t1, b);
  }
  if (t1 <= std::max(t0, S(0))) return std::nullopt;
  return std::pair<S, S>(std::max(t0, S(0)), t1);
}

// Camera-space direction ((i+0.5-cx)/fx, (j+0.5-cy)/fy, -1) with the radial
// term removed by fixed-point undistortion, normalized, then rotated into
// world space. t range comes from the unit-cube hit, or the fallback range
// when the ray misses.
template <typename S>
Ray<S> pixel_to_ray(Index i, Index j, const CameraIntrinsics<S>& intr,
                    const Pose<S>& pose, S miss_t_near = S(0),
                    S miss_t_far = S(1.7320508075688772)) {
  require(i >= 0 && i < intr.width && j >= 0 && j < intr.height,
          cat("pixel_to_ray: pixel (", i, ", ", j, ") outside ", intr.width, "x",
              intr.height));
  S u = (static_cast<S>(i) + S(0.5) - intr.cx) / intr.fx;
  S v = (static_cast<S>(j) + S(0.5) - intr.cy) / intr.fy;
  if (intr.k1 != S(0)) {
    const S rd2 = u * u + v * v;
    S r2 = rd2;
    for (int iter = 0; iter < 5; ++iter) {
      const S f = S(1) + intr.k1 * r2;
      r2 = rd2 / (f * f);
    }
    const S scale = S(1) / (S(1) + intr.k1 * r2);
    u *= scale;
    v *= scale;
  }
  Vec3<S> dir_cam(u, v, S(-1));
  dir_cam.normalize();

  Ray<S> ray;
  ray.origin = pose.translation();
  ray.direction = pose.rotation() * dir_cam;
  if (auto hit = intersect_unit_cube(ray.origin, ray.direction)) {
    ray.t_near = hit->first;
    ray.t_far = hit->second;
  } else {
    ray.t_near = miss_t_near;
    ray.t_far = miss_t_far;
  }
  return ray;
}

}  // namespace rsonerf::render
