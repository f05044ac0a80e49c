#include "vise/camera.hpp"

#include "vise/rng.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <numbers>
#include <string>

namespace vise::camera {

namespace {

Eigen::Matrix3d skew(const Eigen::Vector3d& v) {
  Eigen::Matrix3d m;
  m << 0.0, -v.z(), v.y(), v.z(), 0.0, -v.x(), -v.y(), v.x(), 0.0;
  return m;
}

constexpr double kMinDepth = 1e-9;

}  // namespace

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw CameraError("focal lengths must be positive");
  if (width <= 0 || height <= 0) throw CameraError("image size must be positive");
  if (cx < 0.0 || cx >= width || cy < 0.0 || cy >= height) {
    throw CameraError("principal point must lie inside the image");
  }
}

RigidTransform look_at(const Eigen::Vector3d& eye, const Eigen::Vector3d& target, const Eigen::Vector3d& up) {
  const Eigen::Vector3d forward = (target - eye).normalized();
  Eigen::Vector3d right = forward.cross(up);
  if (right.norm() < 1e-12) throw CameraError("look_at: up vector is parallel to the view direction");
  right.normalize();
  const Eigen::Vector3d down = forward.cross(right);
  RigidTransform out;
  out.rotation.row(0) = right.transpose();
  out.rotation.row(1) = down.transpose();
  out.rotation.row(2) = forward.transpose();
  out.translation = -(out.rotation * eye);
  return out;
}

Eigen::Vector2d project_camera_frame(const CameraIntrinsics& k, const Eigen::Vector3d& p) {
  if (!(p.z() > kMinDepth)) throw CameraError("point not in front of camera");
  return {k.fx * p.x() / p.z() + k.cx, k.fy * p.y() / p.z() + k.cy};
}

Eigen::Vector2d project(const CameraModel& camera, const Eigen::Vector3d& point) {
  return project_camera_frame(camera.intrinsics, camera.to_camera(point));
}

FiducialTag FiducialTag::square(const RigidTransform& pose, double side) {
  if (!(side > 0.0)) throw CameraError("tag side must be positive");
  const double h = 0.5 * side;
  FiducialTag tag;
  tag.side = side;
  tag.corners = {pose.apply({-h, -h, 0.0}), pose.apply({h, -h, 0.0}), pose.apply({h, h, 0.0}),
                 pose.apply({-h, h, 0.0})};
  return tag;
}

Eigen::Vector3d FiducialTag::normal() const {
  return (corners[1] - corners[0]).cross(corners[2] - corners[1]).normalized();
}

void FiducialTag::validate() const {
  if (!(side > 0.0)) throw CameraError("tag side must be positive");
  const Eigen::Vector3d n = normal();
  for (const auto& c : corners) {
    if (std::abs(n.dot(c - corners[0])) > 1e-6) throw CameraError("tag corners are not coplanar");
  }
}

CornerObservations observe_fiducial(const CameraModel& camera, const FiducialTag& tag, double noise_std,
                                    std::uint64_t seed) {
  CornerObservations out;
  Rng rng(seed);
  for (std::size_t i = 0; i < 4; ++i) {
    out[i] = project(camera, tag.corners[i]);
    if (noise_std > 0.0) {
      out[i].x() += rng.normal(0.0, noise_std);
      out[i].y() += rng.normal(0.0, noise_std);
    }
  }
  return out;
}

double reprojection_cost(const CameraIntrinsics& k, const FiducialTag& tag,
                         std::span<const Eigen::Vector2d> observations, const RigidTransform& pose) {
  double cost = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const Eigen::Vector3d pc = pose.apply(tag.corners[i]);
    if (!(pc.z() > kMinDepth)) return std::numeric_limits<double>::infinity();
    cost += (project_camera_frame(k, pc) - observations[i]).squaredNorm();
  }
  return cost;
}

double reprojection_rms(const CameraIntrinsics& k, const FiducialTag& tag,
                        std::span<const Eigen::Vector2d> observations, const RigidTransform& pose) {
  return std::sqrt(reprojection_cost(k, tag, observations, pose) / 4.0);
}

PoseEstimate estimate_camera_pose_detailed(const CameraIntrinsics& k, const FiducialTag& tag,
                                           std::span<const Eigen::Vector2d> observations,
                                           const RigidTransform& initial, const PoseOptions& options) {
  if (observations.size() < 4) {
    throw CameraError("pose estimation needs 4 corner observations, got " + std::to_string(observations.size()));
  }
  PoseEstimate result;
  result.pose = initial;
  double cost = reprojection_cost(k, tag, observations, initial);
  if (!std::isfinite(cost) || cost > options.divergence_cost) throw CameraError("pose estimation diverged");
  result.cost_trace.push_back(cost);

  for (int iter = 0; iter < options.max_iterations && cost > 0.0; ++iter) {
    Eigen::Matrix<double, 6, 6> jtj = Eigen::Matrix<double, 6, 6>::Zero();
    Eigen::Matrix<double, 6, 1> jtr = Eigen::Matrix<double, 6, 1>::Zero();
    for (std::size_t i = 0; i < 4; ++i) {
      const Eigen::Vector3d rotated = result.pose.rotation * tag.corners[i];
      const Eigen::Vector3d pc = rotated + result.pose.translation;
      const double iz = 1.0 / pc.z();
      Eigen::Matrix<double, 2, 3> dproj;
      dproj << k.fx * iz, 0.0, -k.fx * pc.x() * iz * iz, 0.0, k.fy * iz, -k.fy * pc.y() * iz * iz;
      Eigen::Matrix<double, 3, 6> dpoint;
      dpoint.leftCols<3>() = -skew(rotated);
      dpoint.rightCols<3>() = Eigen::Matrix3d::Identity();
      const Eigen::Matrix<double, 2, 6> jac = dproj * dpoint;
      const Eigen::Vector2d r = project_camera_frame(k, pc) - observations[i];
      jtj += jac.transpose() * jac;
      jtr += jac.transpose() * r;
    }
    const Eigen::Matrix<double, 6, 1> step = -jtj.ldlt().solve(jtr);
    if (!step.allFinite()) break;

    double scale = 1.0;
    bool accepted = false;
    for (int h = 0; h <= options.max_step_halvings; ++h, scale *= 0.5) {
      RigidTransform trial;
      trial.rotation = geometry::rotation_exp(scale * step.head<3>()) * result.pose.rotation;
      trial.translation = result.pose.translation + scale * step.tail<3>();
      const double c = reprojection_cost(k, tag, observations, trial);
      if (c < cost) {
        result.pose = trial;
        cost = c;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    if (cost > options.divergence_cost) throw CameraError("pose estimation diverged");
    result.cost_trace.push_back(cost);
    result.iterations = iter + 1;
    if (scale * step.norm() < options.step_tolerance) break;
  }
  return result;
}

RigidTransform estimate_camera_pose(const CameraIntrinsics& k, const FiducialTag& tag,
                                    std::span<const Eigen::Vector2d> observations, const RigidTransform& initial) {
  return estimate_camera_pose_detailed(k, tag, observations, initial).pose;
}

RealignmentDelta realignment_delta(const RigidTransform& saved, const RigidTransform& current) {
  RealignmentDelta out;
  out.delta = saved.inverse() * current;
  out.translation_mm = out.delta.translation.norm();
  out.rotation_rad = geometry::rotation_angle(out.delta.rotation);
  return out;
}

bool is_aligned(const RealignmentDelta& delta, const AlignmentThreshold& threshold) {
  return delta.translation_mm <= threshold.translation_mm &&
         delta.rotation_rad <= threshold.rotation_deg * std::numbers::pi / 180.0;
}

}  // namespace vise::camera
