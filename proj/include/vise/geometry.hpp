#pragma once

// Piecewise-constant-curvature (PCC) kinematics for continuum arms.
//
// Every section starts with its tangent along +z of its base frame and bends
// in the plane at angle phi about z. Lengths are millimeters, curvature is
// 1/mm, angles are radians.

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstddef>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vise::geometry {

class GeometryError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Wraps an angle into [0, 2*pi).
double wrap_two_pi(double angle);

/// Wraps an angle into (-pi, pi].
double wrap_pi(double angle);

class PccSection {
public:
  PccSection() = default;

  /// Builds a canonical section. Negative curvature is folded into phi + pi,
  /// phi is wrapped into [0, 2*pi), and phi is forced to 0 for a straight
  /// section. Throws GeometryError for non-positive or non-finite length.
  PccSection(double curvature, double phi, double length);

  double curvature() const { return curvature_; }
  double phi() const { return phi_; }
  double length() const { return length_; }
  double bend_angle() const { return curvature_ * length_; }

  /// The same arc truncated to `fraction` of its length.
  PccSection truncated(double fraction) const;

private:
  double curvature_ = 0.0;
  double phi_ = 0.0;
  double length_ = 1.0;
};

struct RigidTransform {
  Eigen::Matrix3d rotation = Eigen::Matrix3d::Identity();
  Eigen::Vector3d translation = Eigen::Vector3d::Zero();

  static RigidTransform identity() { return {}; }
  static RigidTransform from_translation(const Eigen::Vector3d& t);
  static RigidTransform from_rotation(const Eigen::Matrix3d& r);

  Eigen::Vector3d apply(const Eigen::Vector3d& point) const { return rotation * point + translation; }
  RigidTransform inverse() const;

  /// Matrix-style composition: (a * b).apply(p) == a.apply(b.apply(p)).
  friend RigidTransform operator*(const RigidTransform& a, const RigidTransform& b);
};

/// Geodesic angle of a rotation matrix, in [0, pi].
double rotation_angle(const Eigen::Matrix3d& rotation);

/// Axis-angle vector (so(3) logarithm) of a rotation matrix.
Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rotation);

/// Rodrigues exponential of an axis-angle vector.
Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& omega);

Eigen::Matrix3d rot_x(double angle);
Eigen::Matrix3d rot_y(double angle);
Eigen::Matrix3d rot_z(double angle);

/// Largest deviation of R^T R from identity plus |det R - 1|.
double orthonormality_error(const Eigen::Matrix3d& rotation);

class ArmConfiguration {
public:
  static constexpr std::size_t kMaxSections = 6;

  ArmConfiguration() = default;
  explicit ArmConfiguration(std::vector<PccSection> sections);

  const std::vector<PccSection>& sections() const { return sections_; }
  std::size_t size() const { return sections_.size(); }
  const PccSection& operator[](std::size_t i) const { return sections_[i]; }
  double total_length() const;
  std::vector<double> section_lengths() const;

  /// All sections straight with the given lengths.
  static ArmConfiguration straight(std::span<const double> lengths);

private:
  std::vector<PccSection> sections_;
};

enum class Representation { Points, Pcc };

std::string to_string(Representation representation);
Representation representation_from_string(const std::string& name);

/// Flat regression target. `values` hold physical units: millimeters for
/// points, (1/mm, rad) pairs for PCC. `scale` is the robot's total length.
struct ShapeLabel {
  Representation representation = Representation::Points;
  std::vector<float> values;
  double scale = 1.0;

  /// Throws GeometryError if the length does not fit the representation.
  void validate() const;

  /// Number of key points (Points) or sections (Pcc).
  std::size_t entity_count() const;

  /// Dimensionless targets: positions / scale, curvature * scale, phi as is.
  std::vector<float> normalized() const;
  static ShapeLabel from_normalized(Representation representation, std::span<const float> values,
                                    double scale);
};

/// Output width for a representation with `count` key points or sections.
std::size_t label_width(Representation representation, std::size_t count);

/// Tip-to-base transform of one section, expressed in the section base frame.
RigidTransform fk_section(const PccSection& section);

/// Cumulative end frames T_1, T_1*T_2, ... in the arm base frame.
std::vector<RigidTransform> fk_chain(const ArmConfiguration& config);

/// Backbone points at arc-length fractions {0, 1/(n-1), ..., 1} of each
/// section; the shared joint between consecutive sections appears once.
std::vector<Eigen::Vector3d> sample_backbone(const ArmConfiguration& config,
                                             std::size_t samples_per_section);

/// Backbone point at arc length `s` from the base, clamped to [0, total].
Eigen::Vector3d backbone_point(const ArmConfiguration& config, double arc_length);

/// Arc-length positions of the key points used by points_label.
std::vector<double> key_point_stations(const ArmConfiguration& config, std::size_t key_point_count);

/// Key-point positions base to tip. When the count equals the section count
/// the section endpoints are used, otherwise equally spaced arc-length stations.
std::vector<Eigen::Vector3d> key_points(const ArmConfiguration& config, std::size_t key_point_count);

ShapeLabel points_label(const ArmConfiguration& config, std::size_t key_point_count);

struct FitOptions {
  int max_iterations = 50;
  double convergence_tolerance = 1e-10;
  int max_step_halvings = 30;
};

struct SectionFit {
  PccSection section;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
};

/// Weighted residual (translation mm, orientation rad * length/2) between a
/// section's end frame and a target frame.
Eigen::Matrix<double, 6, 1> section_residual(const PccSection& section, const RigidTransform& target);

/// Fits (curvature, phi) of a fixed-length section to an observed end frame:
/// closed-form initialization from the translation, then Gauss-Newton on the
/// combined translation/orientation residual.
SectionFit fit_pcc_section_detailed(const RigidTransform& end_frame, double length,
                                    const FitOptions& options = {});

PccSection fit_pcc_section(const RigidTransform& end_frame, double length);

/// Fits every section from cumulative end frames (as produced by fk_chain).
std::vector<PccSection> fit_pcc_chain(std::span<const RigidTransform> cumulative_frames,
                                      std::span<const double> lengths);

ShapeLabel pcc_label(std::span<const PccSection> sections);

/// Rebuilds an arm from a PCC label and known section lengths.
ArmConfiguration config_from_pcc_label(const ShapeLabel& label, std::span<const double> lengths);

}  // namespace vise::geometry
