#include <doctest.h>

#include "support/fixtures.hpp"
#include "vise/camera.hpp"

#include <cmath>
#include <numbers>

using namespace vise::camera;
using vise::geometry::RigidTransform;
using Eigen::Vector2d;
using Eigen::Vector3d;

namespace {

CameraModel identity_camera() {
  CameraModel cam;
  cam.intrinsics = CameraIntrinsics{500, 500, 128, 128, 256, 256};
  return cam;
}

}  // namespace

TEST_CASE("pinhole projection") {
  const auto cam = identity_camera();
  CHECK((project(cam, Vector3d(0, 0, 1000)) - Vector2d(128, 128)).norm() == 0.0);
  CHECK((project(cam, Vector3d(100, 0, 1000)) - Vector2d(178, 128)).norm() < 1e-12);
  CHECK_THROWS_WITH_AS(project(cam, Vector3d(0, 0, -10)), "point not in front of camera", CameraError);
  CHECK_THROWS_AS(project(cam, Vector3d(0, 0, 0)), CameraError);

  const Vector3d p(12.0, -7.0, 300.0);
  const Vector2d ref = project_camera_frame(cam.intrinsics, p);
  for (double lambda : {0.01, 0.5, 3.0, 1000.0}) {
    CHECK((project_camera_frame(cam.intrinsics, lambda * p) - ref).norm() < 1e-9);
  }
}

TEST_CASE("intrinsics validation") {
  CameraIntrinsics k{500, 500, 128, 128, 256, 256};
  CHECK_NOTHROW(k.validate());
  k.fx = 0;
  CHECK_THROWS_AS(k.validate(), CameraError);
  k = {500, 500, 256, 128, 256, 256};
  CHECK_THROWS_AS(k.validate(), CameraError);
}

TEST_CASE("look_at puts the target on the optical axis") {
  const Vector3d eye(800, -300, 400), target(10, 20, 150);
  const auto pose = look_at(eye, target);
  const Vector3d c = pose.apply(target);
  CHECK(std::abs(c.x()) < 1e-9);
  CHECK(std::abs(c.y()) < 1e-9);
  CHECK(c.z() == doctest::Approx((eye - target).norm()));
  // World up maps to image up (negative y).
  CHECK(pose.apply(target + Vector3d::UnitZ()).y() < 0.0);
}

TEST_CASE("fiducial observations") {
  auto cam = identity_camera();
  RigidTransform tag_pose;
  tag_pose.translation = Vector3d(0, 0, 1000);
  const auto tag = FiducialTag::square(tag_pose, 80.0);
  CHECK_NOTHROW(tag.validate());
  const auto exact = observe_fiducial(cam, tag);
  for (int i = 0; i < 4; ++i) CHECK((exact[i] - project(cam, tag.corners[i])).norm() == 0.0);
  // Fronto-parallel square at depth z has pixel side fx * s / z.
  CHECK((exact[1] - exact[0]).norm() == doctest::Approx(500.0 * 80.0 / 1000.0));
  CHECK((exact[2] - exact[1]).norm() == doctest::Approx(40.0));

  const auto n1 = observe_fiducial(cam, tag, 0.5, 77);
  const auto n2 = observe_fiducial(cam, tag, 0.5, 77);
  for (int i = 0; i < 4; ++i) CHECK((n1[i] - n2[i]).norm() == 0.0);
  CHECK((n1[0] - exact[0]).norm() > 0.0);

  tag_pose.translation = Vector3d(0, 0, -1000);
  CHECK_THROWS_AS(observe_fiducial(cam, FiducialTag::square(tag_pose, 80.0)), CameraError);
}

TEST_CASE("pose from the truth stays put") {
  vise::Rng rng(8);
  const auto c = vise::testing::random_pose_case(rng);
  const auto obs = observe_fiducial(CameraModel{c.intrinsics, c.truth}, c.tag);
  const auto est = estimate_camera_pose_detailed(c.intrinsics, c.tag, obs, c.truth);
  CHECK((est.pose.translation - c.truth.translation).norm() < 1e-9);
  CHECK(est.final_cost() < 1e-18);
}

TEST_CASE("pose recovery from an offset guess") {
  vise::Rng rng(21);
  for (int i = 0; i < 100; ++i) {
    const auto c = vise::testing::random_pose_case(rng, 10.0, 0.05);
    const auto obs = observe_fiducial(CameraModel{c.intrinsics, c.truth}, c.tag);
    const auto est = estimate_camera_pose_detailed(c.intrinsics, c.tag, obs, c.initial);
    CHECK((est.pose.translation - c.truth.translation).norm() < 1e-6);
    CHECK(vise::geometry::rotation_angle(est.pose.rotation.transpose() * c.truth.rotation) < 1e-8);
    for (std::size_t k = 1; k < est.cost_trace.size(); ++k) {
      CHECK(est.cost_trace[k] <= est.cost_trace[k - 1]);
    }
  }
}

TEST_CASE("noisy corners: estimate improves on the initializer") {
  vise::Rng rng(4);
  for (int i = 0; i < 20; ++i) {
    const auto c = vise::testing::random_pose_case(rng);
    const auto obs = observe_fiducial(CameraModel{c.intrinsics, c.truth}, c.tag, 0.5, 1000 + i);
    const auto est = estimate_camera_pose(c.intrinsics, c.tag, obs, c.initial);
    CHECK(reprojection_rms(c.intrinsics, c.tag, obs, est) <= reprojection_rms(c.intrinsics, c.tag, obs, c.initial));
  }
}

TEST_CASE("pose estimation errors") {
  vise::Rng rng(9);
  const auto c = vise::testing::random_pose_case(rng);
  const auto obs = observe_fiducial(CameraModel{c.intrinsics, c.truth}, c.tag);
  std::span<const Vector2d> three(obs.data(), 3);
  CHECK_THROWS_AS(estimate_camera_pose(c.intrinsics, c.tag, three, c.initial), CameraError);
  RigidTransform behind = c.truth;
  behind.translation.z() = -behind.translation.z();
  CHECK_THROWS_WITH_AS(estimate_camera_pose(c.intrinsics, c.tag, obs, behind), "pose estimation diverged",
                       CameraError);
}

TEST_CASE("realignment delta") {
  vise::Rng rng(12);
  const auto saved = vise::testing::random_pose_case(rng).truth;
  const auto same = realignment_delta(saved, saved);
  CHECK(same.translation_mm == 0.0);
  CHECK(same.rotation_rad == 0.0);
  CHECK(is_aligned(same));

  RigidTransform offset = RigidTransform::from_translation(Vector3d(1.46, 0, 0));
  const auto shifted = realignment_delta(saved, saved * offset);
  CHECK(shifted.translation_mm == doctest::Approx(1.46).epsilon(1e-12));
  CHECK(shifted.rotation_rad < 1e-12);
  CHECK(is_aligned(shifted));

  const auto turned = realignment_delta(saved, saved * RigidTransform::from_rotation(vise::geometry::rot_z(0.1)));
  CHECK(turned.rotation_rad == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(turned.translation_mm < 1e-12);
  CHECK_FALSE(is_aligned(turned));

  const auto current = vise::testing::random_pose_case(rng).truth;
  const auto d = realignment_delta(saved, current);
  const auto back = saved * d.delta;
  CHECK((back.translation - current.translation).norm() < 1e-9);
  CHECK((back.rotation - current.rotation).norm() < 1e-9);
}
