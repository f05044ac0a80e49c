#include "vise/config.hpp"

#include <cmath>
#include <fstream>
#include <numbers>

namespace vise::checkpoint {

void to_json(Json& j, const Fiducial& f) { j = Json{{"pose", f.pose}, {"side", f.side}}; }

void from_json(const Json& j, Fiducial& f) {
  require_keys(j, {"pose", "side"}, "fiducial");
  f.pose = j.at("pose").get<geometry::RigidTransform>();
  f.side = j.at("side").get<double>();
  if (!(f.side > 0.0)) throw ConfigError("fiducial.side must be positive");
}

}  // namespace vise::checkpoint

namespace vise::config {

namespace {

Json optional_path(const std::optional<std::filesystem::path>& p) { return p ? Json(p->string()) : Json(nullptr); }

void read_path(const Json& j, const char* key, std::optional<std::filesystem::path>& out) {
  if (!j.contains(key) || j.at(key).is_null()) return;
  if (!j.at(key).is_string()) throw ConfigError(std::string("paths.") + key + ": expected a string");
  out = std::filesystem::path(j.at(key).get<std::string>());
}

}  // namespace

void RunConfig::validate() const {
  if (jobs < 1) throw ConfigError("jobs must be at least 1");
  generate.scene.validate();
  generate.motion.validate();
  generate.preprocess.validate();
  train.validate();
  try {
    network.validate();
  } catch (const nn::NnError& e) {
    throw ConfigError(std::string("network: ") + e.what());
  }
  if (network.input_channels != 2) throw ConfigError("network: input_channels must be 2 (one per camera)");
  if (network.input_size != generate.preprocess.target_size) {
    throw ConfigError("network.input_size " + std::to_string(network.input_size) +
                      " differs from preprocess.target_size " + std::to_string(generate.preprocess.target_size));
  }
  const std::size_t sections = generate.motion.section_lengths.size();
  std::size_t width = 0;
  try {
    width = generate.label.width(sections);
  } catch (const geometry::GeometryError& e) {
    throw ConfigError(std::string("label: ") + e.what());
  }
  if (static_cast<std::size_t>(network.output_size) != width) {
    throw ConfigError("network.output_size " + std::to_string(network.output_size) + " does not fit a " +
                      geometry::to_string(generate.label.representation) + " label of width " +
                      std::to_string(width));
  }
  for (int cam = 0; cam < 2; ++cam) {
    const auto& r = generate.preprocess.crops[static_cast<std::size_t>(cam)];
    const auto& k = generate.scene.cameras[static_cast<std::size_t>(cam)].intrinsics;
    if (r.x < 0 || r.y < 0 || r.x + r.width > k.width || r.y + r.height > k.height) {
      throw ConfigError("preprocess.crops[" + std::to_string(cam) + "] leaves the " + std::to_string(k.width) + "x" +
                        std::to_string(k.height) + " camera image");
    }
  }
  if (dataset.train < 2 || dataset.test < 1) throw ConfigError("dataset: need at least 2 train and 1 test samples");
  if (!(alignment.translation_mm >= 0.0) || !(alignment.rotation_deg >= 0.0)) {
    throw ConfigError("alignment thresholds must be non-negative");
  }
}

RunConfig desk_config(std::uint64_t seed) {
  RunConfig c;
  c.seed = seed;
  auto& scene = c.generate.scene;
  const Eigen::Vector3d target(0, 0, 120);
  for (std::size_t i = 0; i < 2; ++i) {
    const double az = static_cast<double>(i) * std::numbers::pi / 2;
    const double el = 20.0 * std::numbers::pi / 180.0;
    const Eigen::Vector3d eye =
        target + 1100.0 * Eigen::Vector3d(std::cos(el) * std::cos(az), std::cos(el) * std::sin(az), std::sin(el));
    scene.cameras[i] = camera::CameraModel{camera::CameraIntrinsics{190, 190, 63.5, 50.0, 128, 128},
                                           camera::look_at(eye, target)};
  }
  scene.appearance.radius_base = 25.0;
  scene.appearance.radius_tip = 25.0;
  scene.appearance.stripes = render::even_stripes(3, 25.0, scene.appearance.background_intensity);
  scene.clutter_blob_count = 0;
  scene.clutter_seed = 5;

  c.generate.motion.mode = training::MotionMode::Random;
  auto& pre = c.generate.preprocess;
  pre.crops = {imgproc::Rect{0, 0, 128, 128}, imgproc::Rect{0, 0, 128, 128}};
  pre.target_size = 64;
  pre.median_kernel = 3;
  pre.threshold_block = 15;
  pre.threshold_c = -5;
  pre.morph_kernel = 3;
  pre.morph_iterations = 1;

  c.network.input_size = 64;
  c.network.output_size = 9;
  c.network.dropout_p = 0.0;
  c.train.batch_size = 4;
  c.train.max_epochs = 60;
  c.train.lr = 2e-3;
  c.train.lr_decay_every = 15;
  c.train.weight_decay = 0.1;
  c.fiducial = checkpoint::Fiducial{geometry::RigidTransform::from_translation({150, 150, 0}), 60.0};
  return c;
}

checkpoint::Metadata make_metadata(const RunConfig& cfg) {
  checkpoint::Metadata m;
  m.representation = cfg.generate.label.representation;
  m.section_lengths = cfg.generate.motion.section_lengths;
  m.key_points = m.representation == geometry::Representation::Points ? cfg.generate.label.key_points
                                                                       : m.section_lengths.size();
  m.scale = 0.0;
  for (double l : m.section_lengths) m.scale += l;
  m.preprocess = cfg.generate.preprocess;
  m.cameras = cfg.generate.scene.cameras;
  m.fiducial = cfg.fiducial;
  if (cfg.fiducial) {
    for (std::size_t i = 0; i < 2; ++i) m.saved_poses[i] = m.cameras[i].extrinsics * cfg.fiducial->pose;
  }
  return m;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path.string());
  Json j;
  try {
    j = Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError("config " + path.string() + " is not valid JSON: " + e.what());
  }
  auto cfg = j.get<RunConfig>();
  const auto base = std::filesystem::absolute(path).parent_path();
  for (auto* p : {&cfg.paths.train_data, &cfg.paths.test_data, &cfg.paths.weights, &cfg.paths.reports}) {
    if (!*p) continue;
    if (p->value().is_relative()) *p = base / p->value();
    const auto parent = p->value().parent_path();
    if (!parent.empty() && !std::filesystem::is_directory(parent)) {
      throw ConfigError("path " + p->value().string() + " does not resolve: no directory " + parent.string());
    }
  }
  cfg.validate();
  return cfg;
}

void to_json(Json& j, const RunConfig& c) {
  j = Json{{"seed", c.seed},
           {"jobs", c.jobs},
           {"scene", c.generate.scene},
           {"motion", c.generate.motion},
           {"preprocess", c.generate.preprocess},
           {"label", c.generate.label},
           {"network", c.network},
           {"train", c.train},
           {"dataset", Json{{"train", c.dataset.train}, {"test", c.dataset.test}}},
           {"fiducial", c.fiducial ? Json(*c.fiducial) : Json(nullptr)},
           {"alignment", c.alignment},
           {"paths", Json{{"train_data", optional_path(c.paths.train_data)},
                          {"test_data", optional_path(c.paths.test_data)},
                          {"weights", optional_path(c.paths.weights)},
                          {"reports", optional_path(c.paths.reports)}}}};
}

void from_json(const Json& j, RunConfig& c) {
  require_keys(j,
               {"seed", "jobs", "scene", "motion", "preprocess", "label", "network", "train", "dataset", "fiducial",
                "alignment", "paths"},
               "config");
  if (!j.contains("seed") || !j.at("seed").is_number_unsigned()) {
    throw ConfigError("config: 'seed' is required and must be a non-negative integer");
  }
  try {
    c.seed = j.at("seed").get<std::uint64_t>();
    read_optional(j, "jobs", c.jobs, "config");
    read_optional(j, "scene", c.generate.scene, "config");
    read_optional(j, "motion", c.generate.motion, "config");
    read_optional(j, "preprocess", c.generate.preprocess, "config");
    read_optional(j, "label", c.generate.label, "config");
    read_optional(j, "network", c.network, "config");
    read_optional(j, "train", c.train, "config");
    if (j.contains("dataset")) {
      const auto& d = j.at("dataset");
      require_keys(d, {"train", "test"}, "dataset");
      read_optional(d, "train", c.dataset.train, "dataset");
      read_optional(d, "test", c.dataset.test, "dataset");
    }
    if (j.contains("fiducial")) {
      if (j.at("fiducial").is_null()) {
        c.fiducial.reset();
      } else {
        c.fiducial = j.at("fiducial").get<checkpoint::Fiducial>();
      }
    }
    read_optional(j, "alignment", c.alignment, "config");
    if (j.contains("paths")) {
      const auto& p = j.at("paths");
      require_keys(p, {"train_data", "test_data", "weights", "reports"}, "paths");
      read_path(p, "train_data", c.paths.train_data);
      read_path(p, "test_data", c.paths.test_data);
      read_path(p, "weights", c.paths.weights);
      read_path(p, "reports", c.paths.reports);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
}

}  // namespace vise::config
