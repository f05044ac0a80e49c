#pragma once

// JSON forms of the configuration types. Readers reject unknown keys and
// fill missing ones from the type's defaults.

#include "vise/camera.hpp"
#include "vise/geometry.hpp"
#include "vise/imgproc.hpp"
#include "vise/nn/network.hpp"
#include "vise/render.hpp"

#include <json.hpp>

#include <initializer_list>
#include <stdexcept>
#include <string>

namespace vise {

using Json = nlohmann::json;

class ConfigError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Throws ConfigError naming the first key of `j` not in `allowed`.
void require_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where);

/// Reads j[key] into out when present; wraps type errors in ConfigError.
template <typename T>
void read_optional(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

Json vec3_to_json(const Eigen::Vector3d& v);
Eigen::Vector3d vec3_from_json(const Json& j, const std::string& where);

}  // namespace vise

namespace vise::geometry {
void to_json(Json& j, const RigidTransform& t);
void from_json(const Json& j, RigidTransform& t);
void to_json(Json& j, const PccSection& s);
void from_json(const Json& j, PccSection& s);
void to_json(Json& j, const ArmConfiguration& c);
void from_json(const Json& j, ArmConfiguration& c);
void to_json(Json& j, const Representation& r);
void from_json(const Json& j, Representation& r);
}  // namespace vise::geometry

namespace vise::camera {
void to_json(Json& j, const CameraIntrinsics& k);
void from_json(const Json& j, CameraIntrinsics& k);
void to_json(Json& j, const CameraModel& c);
void from_json(const Json& j, CameraModel& c);
void to_json(Json& j, const AlignmentThreshold& t);
void from_json(const Json& j, AlignmentThreshold& t);
}  // namespace vise::camera

namespace vise::render {
void to_json(Json& j, const Stripe& s);
void from_json(const Json& j, Stripe& s);
void to_json(Json& j, const RobotAppearance& a);
void from_json(const Json& j, RobotAppearance& a);
void to_json(Json& j, const SceneSpec& s);
void from_json(const Json& j, SceneSpec& s);
}  // namespace vise::render

namespace vise::imgproc {
void to_json(Json& j, const Rect& r);
void from_json(const Json& j, Rect& r);
void to_json(Json& j, const PreprocessSpec& s);
void from_json(const Json& j, PreprocessSpec& s);
}  // namespace vise::imgproc

namespace vise::nn {
void to_json(Json& j, const NetworkSpec& s);
void from_json(const Json& j, NetworkSpec& s);
}  // namespace vise::nn
