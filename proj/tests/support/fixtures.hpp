#pragma once

#include "vise/camera.hpp"
#include "vise/geometry.hpp"
#include "vise/imgproc.hpp"
#include "vise/render.hpp"
#include "vise/rng.hpp"

#include <cmath>
#include <numbers>

namespace vise::testing {

struct PoseCase {
  camera::CameraIntrinsics intrinsics;
  camera::FiducialTag tag;
  geometry::RigidTransform truth;    // tag -> camera
  geometry::RigidTransform initial;  // perturbed guess
};

/// Camera 300-900 mm from a 60 mm tag at the origin, viewing it from the
/// tag's front hemisphere, with an initial guess off by up to `rot_deg`
/// degrees and `depth_frac` of the distance.
inline PoseCase random_pose_case(Rng& rng, double rot_deg = 10.0, double depth_frac = 0.1) {
  using Eigen::Vector3d;
  PoseCase c;
  c.intrinsics = camera::CameraIntrinsics{600.0, 600.0, 320.0, 240.0, 640, 480};
  c.tag = camera::FiducialTag::square(geometry::RigidTransform{}, 60.0);
  const double dist = rng.uniform(300.0, 900.0);
  const double az = rng.uniform(0.0, 2 * std::numbers::pi);
  const double el = rng.uniform(0.5, 1.4);
  const Vector3d eye(dist * std::cos(el) * std::cos(az), dist * std::cos(el) * std::sin(az), dist * std::sin(el));
  const Vector3d target(rng.uniform(-15, 15), rng.uniform(-15, 15), 0.0);
  c.truth = camera::look_at(eye, target, Vector3d::UnitX());

  Vector3d axis(rng.normal(), rng.normal(), rng.normal());
  axis.normalize();
  const double angle = rng.uniform(0.0, rot_deg) * std::numbers::pi / 180.0;
  Vector3d shift(rng.normal(), rng.normal(), rng.normal());
  shift = shift.normalized() * rng.uniform(0.0, depth_frac * dist);
  c.initial.rotation = geometry::rotation_exp(axis * angle) * c.truth.rotation;
  c.initial.translation = c.truth.translation + shift;
  return c;
}

/// Two 128 px cameras 1100 mm from the arm, 90 degrees apart.
inline render::SceneSpec test_scene(std::size_t clutter = 0) {
  render::SceneSpec scene;
  const Eigen::Vector3d target(0, 0, 120);
  for (int i = 0; i < 2; ++i) {
    const double az = i * std::numbers::pi / 2;
    const double el = 20.0 * std::numbers::pi / 180.0;
    const Eigen::Vector3d eye =
        target + 1100.0 * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    scene.cameras[static_cast<std::size_t>(i)] =
        camera::CameraModel{camera::CameraIntrinsics{190, 190, 63.5, 50.0, 128, 128}, camera::look_at(eye, target)};
  }
  scene.appearance.radius_base = 25.0;
  scene.appearance.radius_tip = 25.0;
  scene.clutter_blob_count = clutter;
  scene.clutter_seed = 5;
  return scene;
}

inline geometry::ArmConfiguration test_arm() {
  return geometry::ArmConfiguration({geometry::PccSection(0.006, 0.5, 110.0), geometry::PccSection(0.01, 2.5, 110.0),
                                     geometry::PccSection(0.008, 4.5, 115.0)});
}

/// Full-frame crops of test_scene's 128 px views, down to 64 px.
inline imgproc::PreprocessSpec test_preprocess() {
  imgproc::PreprocessSpec spec;
  spec.crops = {imgproc::Rect{0, 0, 128, 128}, imgproc::Rect{0, 0, 128, 128}};
  spec.target_size = 64;
  spec.median_kernel = 3;
  spec.threshold_block = 15;
  spec.threshold_c = -5;
  spec.morph_kernel = 3;
  spec.morph_iterations = 1;
  return spec;
}

}  // namespace vise::testing
