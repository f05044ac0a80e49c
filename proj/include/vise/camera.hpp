#pragma once

// Pinhole cameras, synthetic fiducial observations, fiducial-based pose
// recovery and the camera realignment readout.

#include "vise/geometry.hpp"

#include <Eigen/Core>

#include <array>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <vector>

namespace vise::camera {

using geometry::RigidTransform;

class CameraError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct CameraIntrinsics {
  double fx = 500.0;
  double fy = 500.0;
  double cx = 128.0;
  double cy = 128.0;
  int width = 256;
  int height = 256;

  void validate() const;
};

struct CameraModel {
  CameraIntrinsics intrinsics;
  RigidTransform extrinsics;  // world -> camera

  Eigen::Vector3d to_camera(const Eigen::Vector3d& world) const { return extrinsics.apply(world); }
};

/// World-to-camera transform for a camera at `eye` looking at `target`.
/// Camera axes follow the image convention: x right, y down, z forward.
RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target,
                       const Eigen::Vector3d& up = Eigen::Vector3d::UnitZ());

/// Pinhole projection of a camera-frame point.
Eigen::Vector2d project_camera_frame(const CameraIntrinsics& intrinsics, const Eigen::Vector3d& point);

/// Pinhole projection of a world point. Throws if the point is not in front
/// of the camera (depth <= 1e-9 mm). The pixel may fall outside the image.
Eigen::Vector2d project(const CameraModel& camera, const Eigen::Vector3d& point);

struct FiducialTag {
  std::array<Eigen::Vector3d, 4> corners;  // counter-clockwise seen from the normal
  double side = 0.0;

  /// Square tag of the given side centered on `pose`'s origin, lying in
  /// the pose's xy plane with normal along its +z axis.
  static FiducialTag square(const RigidTransform& pose, double side);

  Eigen::Vector3d normal() const;
  void validate() const;
};

using CornerObservations = std::array<Eigen::Vector2d, 4>;

/// Projects the tag corners, optionally adding seeded Gaussian pixel noise.
CornerObservations observe_fiducial(const CameraModel& camera, const FiducialTag& tag,
                                    double noise_std = 0.0, std::uint64_t seed = 0);

struct PoseOptions {
  int max_iterations = 100;
  double step_tolerance = 1e-10;
  int max_step_halvings = 30;
  double divergence_cost = 1e6;
};

struct PoseEstimate {
  RigidTransform pose;             // tag (world) -> camera
  std::vector<double> cost_trace;  // summed squared reprojection error per accepted iterate
  int iterations = 0;

  double final_cost() const { return cost_trace.back(); }
};

/// Summed squared reprojection error of the tag under a candidate pose.
/// Returns +inf if any corner is not in front of the camera.
double reprojection_cost(const CameraIntrinsics& intrinsics, const FiducialTag& tag,
                         std::span<const Eigen::Vector2d> observations, const RigidTransform& pose);

/// Root-mean-square reprojection error in pixels per corner.
double reprojection_rms(const CameraIntrinsics& intrinsics, const FiducialTag& tag,
                        std::span<const Eigen::Vector2d> observations, const RigidTransform& pose);

/// Gauss-Newton refinement of the 6-DoF camera pose from tag corners.
/// Rotation updates are small-angle increments left-composed onto the
/// current estimate. Throws CameraError("pose estimation diverged") when
/// the initial pose puts a corner behind the camera or the cost explodes.
PoseEstimate estimate_camera_pose_detailed(const CameraIntrinsics& intrinsics, const FiducialTag& tag,
                                           std::span<const Eigen::Vector2d> observations,
                                           const RigidTransform& initial, const PoseOptions& options = {});

RigidTransform estimate_camera_pose(const CameraIntrinsics& intrinsics, const FiducialTag& tag,
                                    std::span<const Eigen::Vector2d> observations,
                                    const RigidTransform& initial);

struct RealignmentDelta {
  double translation_mm = 0.0;
  double rotation_rad = 0.0;
  RigidTransform delta;  // saved^-1 * current
};

RealignmentDelta realignment_delta(const RigidTransform& saved, const RigidTransform& current);

struct AlignmentThreshold {
  double translation_mm = 2.0;
  double rotation_deg = 0.5;
};

bool is_aligned(const RealignmentDelta& delta, const AlignmentThreshold& threshold = {});

}  // namespace vise::camera
