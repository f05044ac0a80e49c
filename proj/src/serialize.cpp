#include "vise/serialize.hpp"

#include <algorithm>
#include <cstring>

namespace vise {

void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  for (const auto& item : j.items()) {
    const bool known = std::any_of(allowed.begin(), allowed.end(),
                                   [&](const char* k) { return item.key() == k; });
    if (!known) throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

Json vec3_to_json(const Eigen::Vector3d& v) { return Json::array({v.x(), v.y(), v.z()}); }

Eigen::Vector3d vec3_from_json(const Json& j, const std::string& where) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(where + ": expected 3 numbers");
  try {
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + ": " + e.what());
  }
}

}  // namespace vise

namespace vise::geometry {

void to_json(Json& j, const RigidTransform& t) {
  Json rot = Json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(t.rotation(r, c));
  j = Json{{"rotation", rot}, {"translation", vec3_to_json(t.translation)}};
}

void from_json(const Json& j, RigidTransform& t) {
  require_keys(j, {"rotation", "translation"}, "transform");
  const auto& rot = j.at("rotation");
  if (!rot.is_array() || rot.size() != 9) throw ConfigError("transform.rotation: expected 9 numbers (row-major)");
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) t.rotation(r, c) = rot[static_cast<std::size_t>(3 * r + c)].get<double>();
  if (orthonormality_error(t.rotation) > 1e-6) throw ConfigError("transform.rotation is not a rotation matrix");
  t.translation = vec3_from_json(j.at("translation"), "transform.translation");
}

void to_json(Json& j, const PccSection& s) {
  j = Json{{"curvature", s.curvature()}, {"phi", s.phi()}, {"length", s.length()}};
}

void from_json(const Json& j, PccSection& s) {
  require_keys(j, {"curvature", "phi", "length"}, "section");
  s = PccSection(j.at("curvature").get<double>(), j.at("phi").get<double>(), j.at("length").get<double>());
}

void to_json(Json& j, const ArmConfiguration& c) { j = Json{{"sections", c.sections()}}; }

void from_json(const Json& j, ArmConfiguration& c) {
  require_keys(j, {"sections"}, "arm");
  c = ArmConfiguration(j.at("sections").get<std::vector<PccSection>>());
}

void to_json(Json& j, const Representation& r) { j = to_string(r); }

void from_json(const Json& j, Representation& r) {
  try {
    r = representation_from_string(j.get<std::string>());
  } catch (const GeometryError& e) {
    throw ConfigError(e.what());
  }
}

}  // namespace vise::geometry

namespace vise::camera {

void to_json(Json& j, const CameraIntrinsics& k) {
  j = Json{{"fx", k.fx}, {"fy", k.fy}, {"cx", k.cx}, {"cy", k.cy}, {"width", k.width}, {"height", k.height}};
}

void from_json(const Json& j, CameraIntrinsics& k) {
  const std::string w = "intrinsics";
  require_keys(j, {"fx", "fy", "cx", "cy", "width", "height"}, w);
  read_optional(j, "fx", k.fx, w);
  read_optional(j, "fy", k.fy, w);
  read_optional(j, "cx", k.cx, w);
  read_optional(j, "cy", k.cy, w);
  read_optional(j, "width", k.width, w);
  read_optional(j, "height", k.height, w);
}

void to_json(Json& j, const CameraModel& c) {
  j = Json{{"intrinsics", c.intrinsics}, {"extrinsics", c.extrinsics}};
}

void from_json(const Json& j, CameraModel& c) {
  require_keys(j, {"intrinsics", "extrinsics", "look_at"}, "camera");
  read_optional(j, "intrinsics", c.intrinsics, "camera");
  if (j.contains("extrinsics") && j.contains("look_at")) {
    throw ConfigError("camera: give either extrinsics or look_at, not both");
  }
  if (j.contains("extrinsics")) c.extrinsics = j.at("extrinsics").get<geometry::RigidTransform>();
  if (j.contains("look_at")) {
    const auto& la = j.at("look_at");
    require_keys(la, {"eye", "target", "up"}, "camera.look_at");
    const Eigen::Vector3d up =
        la.contains("up") ? vec3_from_json(la.at("up"), "camera.look_at.up") : Eigen::Vector3d::UnitZ();
    c.extrinsics = look_at(vec3_from_json(la.at("eye"), "camera.look_at.eye"),
                           vec3_from_json(la.at("target"), "camera.look_at.target"), up);
  }
}

void to_json(Json& j, const AlignmentThreshold& t) {
  j = Json{{"translation_mm", t.translation_mm}, {"rotation_deg", t.rotation_deg}};
}

void from_json(const Json& j, AlignmentThreshold& t) {
  require_keys(j, {"translation_mm", "rotation_deg"}, "alignment_threshold");
  read_optional(j, "translation_mm", t.translation_mm, "alignment_threshold");
  read_optional(j, "rotation_deg", t.rotation_deg, "alignment_threshold");
}

}  // namespace vise::camera

namespace vise::render {

void to_json(Json& j, const Stripe& s) {
  j = Json{{"arc_fraction", s.arc_fraction}, {"width_mm", s.width_mm}, {"intensity", s.intensity}};
}

void from_json(const Json& j, Stripe& s) {
  require_keys(j, {"arc_fraction", "width_mm", "intensity"}, "stripe");
  read_optional(j, "arc_fraction", s.arc_fraction, "stripe");
  read_optional(j, "width_mm", s.width_mm, "stripe");
  int v = s.intensity;
  read_optional(j, "intensity", v, "stripe");
  if (v < 0 || v > 255) throw ConfigError("stripe.intensity must be in [0, 255]");
  s.intensity = static_cast<std::uint8_t>(v);
}

void to_json(Json& j, const RobotAppearance& a) {
  j = Json{{"radius_base", a.radius_base},
           {"radius_tip", a.radius_tip},
           {"body_intensity", a.body_intensity},
           {"background_intensity", a.background_intensity},
           {"stripes", a.stripes}};
}

namespace {
std::uint8_t read_intensity(const Json& j, const char* key, std::uint8_t fallback, const std::string& where) {
  int v = fallback;
  read_optional(j, key, v, where);
  if (v < 0 || v > 255) throw ConfigError(where + "." + key + " must be in [0, 255]");
  return static_cast<std::uint8_t>(v);
}
}  // namespace

void from_json(const Json& j, RobotAppearance& a) {
  const std::string w = "appearance";
  require_keys(j, {"radius_base", "radius_tip", "body_intensity", "background_intensity", "stripes"}, w);
  read_optional(j, "radius_base", a.radius_base, w);
  read_optional(j, "radius_tip", a.radius_tip, w);
  a.body_intensity = read_intensity(j, "body_intensity", a.body_intensity, w);
  a.background_intensity = read_intensity(j, "background_intensity", a.background_intensity, w);
  if (j.contains("stripes")) a.stripes = j.at("stripes").get<std::vector<Stripe>>();
}

void to_json(Json& j, const SceneSpec& s) {
  j = Json{{"cameras", s.cameras},
           {"appearance", s.appearance},
           {"clutter_blob_count", s.clutter_blob_count},
           {"clutter_seed", s.clutter_seed},
           {"samples_per_section", s.samples_per_section}};
}

void from_json(const Json& j, SceneSpec& s) {
  const std::string w = "scene";
  require_keys(j, {"cameras", "appearance", "clutter_blob_count", "clutter_seed", "samples_per_section"}, w);
  if (j.contains("cameras")) {
    const auto& cams = j.at("cameras");
    if (!cams.is_array() || cams.size() != 2) throw ConfigError("scene.cameras: exactly two cameras are required");
    s.cameras[0] = cams[0].get<camera::CameraModel>();
    s.cameras[1] = cams[1].get<camera::CameraModel>();
  }
  read_optional(j, "appearance", s.appearance, w);
  read_optional(j, "clutter_blob_count", s.clutter_blob_count, w);
  read_optional(j, "clutter_seed", s.clutter_seed, w);
  read_optional(j, "samples_per_section", s.samples_per_section, w);
}

}  // namespace vise::render

namespace vise::imgproc {

void to_json(Json& j, const Rect& r) { j = Json::array({r.x, r.y, r.width, r.height}); }

void from_json(const Json& j, Rect& r) {
  if (!j.is_array() || j.size() != 4) throw ConfigError("crop: expected [x, y, width, height]");
  r = Rect{j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

void to_json(Json& j, const PreprocessSpec& s) {
  j = Json{{"crops", s.crops},
           {"target_size", s.target_size},
           {"median_kernel", s.median_kernel},
           {"threshold_block", s.threshold_block},
           {"threshold_c", s.threshold_c},
           {"morph_kernel", s.morph_kernel},
           {"morph_iterations", s.morph_iterations}};
}

void from_json(const Json& j, PreprocessSpec& s) {
  const std::string w = "preprocess";
  require_keys(j, {"crops", "target_size", "median_kernel", "threshold_block", "threshold_c", "morph_kernel",
                   "morph_iterations"},
               w);
  if (j.contains("crops")) {
    const auto& c = j.at("crops");
    if (!c.is_array() || c.size() != 2) throw ConfigError("preprocess.crops: one rectangle per camera");
    s.crops[0] = c[0].get<Rect>();
    s.crops[1] = c[1].get<Rect>();
  }
  read_optional(j, "target_size", s.target_size, w);
  read_optional(j, "median_kernel", s.median_kernel, w);
  read_optional(j, "threshold_block", s.threshold_block, w);
  read_optional(j, "threshold_c", s.threshold_c, w);
  read_optional(j, "morph_kernel", s.morph_kernel, w);
  read_optional(j, "morph_iterations", s.morph_iterations, w);
}

}  // namespace vise::imgproc

namespace vise::nn {

void to_json(Json& j, const NetworkSpec& s) {
  j = Json{{"input_size", s.input_size},       {"input_channels", s.input_channels},
           {"conv_channels", s.conv_channels}, {"fc_hidden", s.fc_hidden},
           {"output_size", s.output_size},     {"dropout_p", s.dropout_p}};
}

void from_json(const Json& j, NetworkSpec& s) {
  const std::string w = "network";
  require_keys(j, {"input_size", "input_channels", "conv_channels", "fc_hidden", "output_size", "dropout_p"}, w);
  read_optional(j, "input_size", s.input_size, w);
  read_optional(j, "input_channels", s.input_channels, w);
  read_optional(j, "conv_channels", s.conv_channels, w);
  read_optional(j, "fc_hidden", s.fc_hidden, w);
  read_optional(j, "output_size", s.output_size, w);
  read_optional(j, "dropout_p", s.dropout_p, w);
}

}  // namespace vise::nn
