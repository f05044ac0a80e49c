#include "vise/geometry.hpp"

#include <Eigen/QR>

#include <algorithm>
#include <cmath>
#include <numbers>

namespace vise::geometry {

namespace {

constexpr double kTwoPi = 2.0 * std::numbers::pi;

// Forward kinematics without canonicalization; valid for negative curvature.
RigidTransform fk_raw(double curvature, double phi, double length) {
  RigidTransform out;
  if (curvature == 0.0) {
    out.translation = {0.0, 0.0, length};
    return out;
  }
  const double theta = curvature * length;
  const double half = std::sin(0.5 * theta);
  const double radial = 2.0 * half * half / curvature;  // (1 - cos theta) / kappa
  const double axial = std::sin(theta) / curvature;
  const Eigen::Matrix3d rz = rot_z(phi);
  out.translation = rz * Eigen::Vector3d(radial, 0.0, axial);
  out.rotation = rz * rot_y(theta) * rot_z(-phi);
  return out;
}

Eigen::Matrix<double, 6, 1> raw_residual(double curvature, double phi, double length,
                                         const RigidTransform& target) {
  const RigidTransform fk = fk_raw(curvature, phi, length);
  Eigen::Matrix<double, 6, 1> r;
  r.head<3>() = fk.translation - target.translation;
  r.tail<3>() = 0.5 * length * rotation_log(target.rotation.transpose() * fk.rotation);
  return r;
}

}  // namespace

double wrap_two_pi(double angle) {
  double a = std::fmod(angle, kTwoPi);
  if (a < 0.0) a += kTwoPi;
  if (a >= kTwoPi) a = 0.0;
  return a;
}

double wrap_pi(double angle) {
  double a = wrap_two_pi(angle);
  if (a > std::numbers::pi) a -= kTwoPi;
  return a;
}

PccSection::PccSection(double curvature, double phi, double length) {
  if (!std::isfinite(length) || length <= 0.0) {
    throw GeometryError("section length must be positive, got " + std::to_string(length));
  }
  if (!std::isfinite(curvature) || !std::isfinite(phi)) {
    throw GeometryError("section curvature and phi must be finite");
  }
  if (curvature < 0.0) {
    curvature = -curvature;
    phi += std::numbers::pi;
  }
  curvature_ = curvature;
  phi_ = curvature == 0.0 ? 0.0 : wrap_two_pi(phi);
  length_ = length;
}

PccSection PccSection::truncated(double fraction) const {
  PccSection out = *this;
  out.length_ = length_ * fraction;
  if (out.length_ <= 0.0) out.length_ = 0.0;
  return out;
}

RigidTransform RigidTransform::from_translation(const Eigen::Vector3d& t) {
  RigidTransform out;
  out.translation = t;
  return out;
}

RigidTransform RigidTransform::from_rotation(const Eigen::Matrix3d& r) {
  RigidTransform out;
  out.rotation = r;
  return out;
}

RigidTransform RigidTransform::inverse() const {
  RigidTransform out;
  out.rotation = rotation.transpose();
  out.translation = -(out.rotation * translation);
  return out;
}

RigidTransform operator*(const RigidTransform& a, const RigidTransform& b) {
  RigidTransform out;
  out.rotation = a.rotation * b.rotation;
  out.translation = a.rotation * b.translation + a.translation;
  return out;
}

double rotation_angle(const Eigen::Matrix3d& r) {
  const Eigen::Vector3d skew(r(2, 1) - r(1, 2), r(0, 2) - r(2, 0), r(1, 0) - r(0, 1));
  const double s = 0.5 * skew.norm();
  const double c = 0.5 * (r.trace() - 1.0);
  return std::atan2(s, c);
}

Eigen::Vector3d rotation_log(const Eigen::Matrix3d& rotation) {
  const Eigen::AngleAxisd aa{Eigen::Quaterniond(rotation).normalized()};
  double angle = aa.angle();
  Eigen::Vector3d axis = aa.axis();
  if (angle > std::numbers::pi) {
    angle = kTwoPi - angle;
    axis = -axis;
  }
  return angle * axis;
}

Eigen::Matrix3d rotation_exp(const Eigen::Vector3d& omega) {
  const double angle = omega.norm();
  if (angle == 0.0) return Eigen::Matrix3d::Identity();
  return Eigen::AngleAxisd(angle, omega / angle).toRotationMatrix();
}

Eigen::Matrix3d rot_x(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitX()).toRotationMatrix(); }
Eigen::Matrix3d rot_y(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitY()).toRotationMatrix(); }
Eigen::Matrix3d rot_z(double a) { return Eigen::AngleAxisd(a, Eigen::Vector3d::UnitZ()).toRotationMatrix(); }

double orthonormality_error(const Eigen::Matrix3d& r) {
  const double gram = (r.transpose() * r - Eigen::Matrix3d::Identity()).cwiseAbs().maxCoeff();
  return gram + std::abs(r.determinant() - 1.0);
}

ArmConfiguration::ArmConfiguration(std::vector<PccSection> sections) : sections_(std::move(sections)) {
  if (sections_.empty() || sections_.size() > kMaxSections) {
    throw GeometryError("arm configuration needs 1 to 6 sections, got " +
                        std::to_string(sections_.size()));
  }
}

double ArmConfiguration::total_length() const {
  double total = 0.0;
  for (const auto& s : sections_) total += s.length();
  return total;
}

std::vector<double> ArmConfiguration::section_lengths() const {
  std::vector<double> out;
  out.reserve(sections_.size());
  for (const auto& s : sections_) out.push_back(s.length());
  return out;
}

ArmConfiguration ArmConfiguration::straight(std::span<const double> lengths) {
  std::vector<PccSection> sections;
  for (double l : lengths) sections.emplace_back(0.0, 0.0, l);
  return ArmConfiguration(std::move(sections));
}

std::string to_string(Representation representation) {
  return representation == Representation::Points ? "points" : "pcc";
}

Representation representation_from_string(const std::string& name) {
  if (name == "points") return Representation::Points;
  if (name == "pcc") return Representation::Pcc;
  throw GeometryError("unknown representation '" + name + "' (expected points or pcc)");
}

std::size_t label_width(Representation representation, std::size_t count) {
  return representation == Representation::Points ? 3 * count : 2 * count;
}

void ShapeLabel::validate() const {
  const std::size_t n = values.size();
  const bool ok = representation == Representation::Points ? (n == 6 || n == 9 || n == 12 || n == 18)
                                                           : (n == 6 || n == 12);
  if (!ok) {
    throw GeometryError("label of length " + std::to_string(n) + " is invalid for representation " +
                        to_string(representation));
  }
  if (!(scale > 0.0)) throw GeometryError("label scale must be positive");
}

std::size_t ShapeLabel::entity_count() const {
  return representation == Representation::Points ? values.size() / 3 : values.size() / 2;
}

std::vector<float> ShapeLabel::normalized() const {
  std::vector<float> out(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (representation == Representation::Points) {
      out[i] = static_cast<float>(values[i] / scale);
    } else {
      out[i] = i % 2 == 0 ? static_cast<float>(values[i] * scale) : values[i];
    }
  }
  return out;
}

ShapeLabel ShapeLabel::from_normalized(Representation representation, std::span<const float> values,
                                       double scale) {
  ShapeLabel out{representation, {}, scale};
  out.values.resize(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (representation == Representation::Points) {
      out.values[i] = static_cast<float>(values[i] * scale);
    } else {
      out.values[i] = i % 2 == 0 ? static_cast<float>(values[i] / scale) : values[i];
    }
  }
  return out;
}

RigidTransform fk_section(const PccSection& section) {
  return fk_raw(section.curvature(), section.phi(), section.length());
}

std::vector<RigidTransform> fk_chain(const ArmConfiguration& config) {
  std::vector<RigidTransform> out;
  out.reserve(config.size());
  RigidTransform acc;
  for (const auto& s : config.sections()) {
    acc = acc * fk_section(s);
    out.push_back(acc);
  }
  return out;
}

std::vector<Eigen::Vector3d> sample_backbone(const ArmConfiguration& config,
                                             std::size_t samples_per_section) {
  if (samples_per_section < 2) throw GeometryError("sample_backbone needs at least 2 samples per section");
  std::vector<Eigen::Vector3d> out;
  out.reserve(config.size() * (samples_per_section - 1) + 1);
  RigidTransform prefix;
  const double denom = static_cast<double>(samples_per_section - 1);
  for (std::size_t i = 0; i < config.size(); ++i) {
    const PccSection& s = config[i];
    for (std::size_t k = (i == 0 ? 0 : 1); k < samples_per_section; ++k) {
      const double t = static_cast<double>(k) / denom;
      if (k == 0) {
        out.push_back(prefix.translation);
      } else {
        out.push_back(prefix.apply(fk_raw(s.curvature(), s.phi(), t * s.length()).translation));
      }
    }
    prefix = prefix * fk_section(s);
    // The last sample of a section is the joint; use the chained frame so the
    // next section starts from exactly the same point.
    out.back() = prefix.translation;
  }
  return out;
}

Eigen::Vector3d backbone_point(const ArmConfiguration& config, double arc_length) {
  RigidTransform prefix;
  double start = 0.0;
  for (std::size_t i = 0; i < config.size(); ++i) {
    const PccSection& s = config[i];
    const bool last = i + 1 == config.size();
    if (arc_length <= start + s.length() || last) {
      const double local = std::clamp(arc_length - start, 0.0, s.length());
      if (local == s.length()) return (prefix * fk_section(s)).translation;
      return prefix.apply(fk_raw(s.curvature(), s.phi(), local).translation);
    }
    prefix = prefix * fk_section(s);
    start += s.length();
  }
  return prefix.translation;
}

std::vector<double> key_point_stations(const ArmConfiguration& config, std::size_t count) {
  if (count != 2 && count != 3 && count != 4 && count != 6) {
    throw GeometryError("key point count must be 2, 3, 4 or 6, got " + std::to_string(count));
  }
  std::vector<double> out;
  out.reserve(count);
  if (count == config.size()) {
    double acc = 0.0;
    for (const auto& s : config.sections()) {
      acc += s.length();
      out.push_back(acc);
    }
    return out;
  }
  const double total = config.total_length();
  for (std::size_t k = 1; k <= count; ++k) out.push_back(total * static_cast<double>(k) / count);
  return out;
}

std::vector<Eigen::Vector3d> key_points(const ArmConfiguration& config, std::size_t count) {
  std::vector<Eigen::Vector3d> out;
  if (count == config.size()) {
    for (const auto& frame : fk_chain(config)) out.push_back(frame.translation);
    return out;
  }
  for (double s : key_point_stations(config, count)) out.push_back(backbone_point(config, s));
  return out;
}

ShapeLabel points_label(const ArmConfiguration& config, std::size_t key_point_count) {
  key_point_stations(config, key_point_count);  // validates the count
  ShapeLabel label{Representation::Points, {}, config.total_length()};
  for (const auto& p : key_points(config, key_point_count)) {
    for (int j = 0; j < 3; ++j) label.values.push_back(static_cast<float>(p[j]));
  }
  return label;
}

Eigen::Matrix<double, 6, 1> section_residual(const PccSection& section, const RigidTransform& target) {
  return raw_residual(section.curvature(), section.phi(), section.length(), target);
}

SectionFit fit_pcc_section_detailed(const RigidTransform& end_frame, double length,
                                    const FitOptions& options) {
  if (!(length > 0.0)) throw GeometryError("fit length must be positive");
  const Eigen::Vector3d& p = end_frame.translation;
  const double norm_sq = p.squaredNorm();
  if (std::sqrt(norm_sq) < 1e-9) throw GeometryError("unfittable frame");

  const double radial = std::hypot(p.x(), p.y());
  // Parameters: bend angle u = kappa * L (dimensionless) and phi.
  double u = radial > 0.0 ? 2.0 * radial / norm_sq * length : 0.0;
  double phi = radial > 0.0 ? std::atan2(p.y(), p.x()) : 0.0;

  auto residual = [&](double uu, double pp) { return raw_residual(uu / length, pp, length, end_frame); };

  Eigen::Matrix<double, 6, 1> r = residual(u, phi);
  double cost = r.squaredNorm();
  SectionFit fit;
  fit.initial_cost = cost;

  constexpr double h = 1e-6;
  int iter = 0;
  for (; iter < options.max_iterations && cost > 0.0; ++iter) {
    Eigen::Matrix<double, 6, 2> jac;
    jac.col(0) = (residual(u + h, phi) - residual(u - h, phi)) / (2.0 * h);
    jac.col(1) = (residual(u, phi + h) - residual(u, phi - h)) / (2.0 * h);
    const Eigen::Vector2d step = -jac.completeOrthogonalDecomposition().solve(r);

    double scale = 1.0;
    bool accepted = false;
    double new_cost = cost;
    for (int k = 0; k <= options.max_step_halvings; ++k, scale *= 0.5) {
      const double uu = u + scale * step[0];
      const double pp = phi + scale * step[1];
      const auto rr = residual(uu, pp);
      const double c = rr.squaredNorm();
      if (c < cost) {
        u = uu;
        phi = pp;
        r = rr;
        new_cost = c;
        accepted = true;
        break;
      }
    }
    if (!accepted) break;
    const double change = cost - new_cost;
    cost = new_cost;
    if (change < options.convergence_tolerance) {
      ++iter;
      break;
    }
  }

  fit.section = PccSection(u / length, phi, length);
  fit.final_cost = section_residual(fit.section, end_frame).squaredNorm();
  fit.iterations = iter;
  return fit;
}

PccSection fit_pcc_section(const RigidTransform& end_frame, double length) {
  return fit_pcc_section_detailed(end_frame, length).section;
}

std::vector<PccSection> fit_pcc_chain(std::span<const RigidTransform> frames,
                                      std::span<const double> lengths) {
  if (frames.size() != lengths.size()) throw GeometryError("frame and length counts differ");
  std::vector<PccSection> out;
  RigidTransform previous;
  for (std::size_t i = 0; i < frames.size(); ++i) {
    out.push_back(fit_pcc_section(previous.inverse() * frames[i], lengths[i]));
    previous = frames[i];
  }
  return out;
}

ShapeLabel pcc_label(std::span<const PccSection> sections) {
  if (sections.size() != 3 && sections.size() != 6) {
    throw GeometryError("PCC labels need 3 or 6 sections, got " + std::to_string(sections.size()));
  }
  ShapeLabel label{Representation::Pcc, {}, 0.0};
  for (const auto& s : sections) {
    label.values.push_back(static_cast<float>(s.curvature()));
    label.values.push_back(static_cast<float>(s.phi()));
    label.scale += s.length();
  }
  return label;
}

ArmConfiguration config_from_pcc_label(const ShapeLabel& label, std::span<const double> lengths) {
  if (label.representation != Representation::Pcc) throw GeometryError("label is not a PCC label");
  if (label.values.size() != 2 * lengths.size()) {
    throw GeometryError("PCC label has " + std::to_string(label.values.size() / 2) + " sections but " +
                        std::to_string(lengths.size()) + " lengths were given");
  }
  std::vector<PccSection> sections;
  for (std::size_t i = 0; i < lengths.size(); ++i) {
    sections.emplace_back(label.values[2 * i], label.values[2 * i + 1], lengths[i]);
  }
  return ArmConfiguration(std::move(sections));
}

}  // namespace vise::geometry
