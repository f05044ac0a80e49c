#include "cli.hpp"

#include "vise/camera.hpp"
#include "vise/checkpoint.hpp"
#include "vise/config.hpp"
#include "vise/eval.hpp"
#include "vise/image.hpp"
#include "vise/rng.hpp"
#include "vise/training.hpp"

#include <CLI11.hpp>

#include <charconv>
#include <filesystem>
#include <fstream>
#include <memory>
#include <numbers>
#include <ostream>
#include <sstream>

namespace vise::cli {

namespace fs = std::filesystem;

namespace {

constexpr std::uint64_t kObserveSalt = 0x4f4253ULL;

class CliError : public std::runtime_error {
public:
  CliError(int code, const std::string& message) : std::runtime_error(message), code_(code) {}
  int code() const { return code_; }

private:
  int code_;
};

std::string exit_code_footer() {
  std::ostringstream os;
  os << "Exit codes:\n";
  for (const auto& e : exit_codes()) os << "  " << e.code << "  " << e.name << ": " << e.meaning << "\n";
  os << "Errors are printed to stderr as one JSON object: {\"error\": {\"code\", \"type\", \"message\"}}.\n"
     << "Seed precedence: --seed, then the VISE_SEED environment variable, then the config's \"seed\".";
  return os.str();
}

struct Options {
  std::string config;
  std::string out;
  std::string data;
  std::string val;
  std::string weights;
  std::string history;
  std::string corners;
  std::string axis;
  std::string split = "train";
  std::string camera = "both";
  std::vector<std::string> images;
  std::vector<double> values;
  std::vector<double> shift{0, 0, 0};
  std::vector<double> rotate{0, 0, 0};
  std::uint64_t seed = 0;
  std::size_t count = 0;
  std::size_t first_index = 0;
  unsigned jobs = 1;
  int epochs = 0;
  int repeats = 50;
  std::size_t marker = 2;
  double noise = 0.0;
  double max_translation_mm = 0.0;
  double max_rotation_deg = 0.0;
  bool preprocessed = false;
  bool overwrite = false;
  bool verbose = false;
};

struct App {
  std::unique_ptr<CLI::App> app;
  Options opt;
  std::map<std::string, CLI::App*> subs;
};

CLI::Option* add_seed(CLI::App* sub, Options& o) {
  return sub->add_option("--seed", o.seed, "Seed override (beats VISE_SEED and the config seed)");
}

std::unique_ptr<App> make_app() {
  auto a = std::make_unique<App>();
  auto& o = a->opt;
  a->app = std::make_unique<CLI::App>(
      "Two-view shape estimation for continuum arms: synthetic data generation, training, inference, "
      "evaluation, robustness sweeps and camera realignment.",
      "vise");
  auto* app = a->app.get();
  app->require_subcommand(1);
  app->footer(exit_code_footer());
  app->set_help_all_flag("--help-all", "Print help for every subcommand");

  auto sub = [&](const char* name, const char* desc) {
    auto* s = app->add_subcommand(name, desc);
    s->footer(exit_code_footer());
    a->subs[name] = s;
    return s;
  };

  auto* init = sub("init-config", "Write the desk-scale default config");
  init->add_option("--out", o.out, "Config file to write")->required();
  init->add_option("--seed", o.seed, "Seed stored in the config")->default_val(7);

  auto* gen = sub("gen", "Render and preprocess a labeled dataset");
  gen->add_option("--config", o.config, "Run config (JSON)")->required()->group("Inputs");
  gen->add_option("--out", o.out, "Dataset directory to create")->required();
  gen->add_option("--split", o.split, "train: ids from 0; test: ids after the train count")
      ->check(CLI::IsMember({"train", "test"}));
  gen->add_option("--count", o.count, "Number of samples (default: the config's count for --split)");
  gen->add_option("--first-index", o.first_index, "First sample id (overrides --split)");
  gen->add_option("--jobs", o.jobs, "Worker threads (default: config jobs)")->check(CLI::PositiveNumber);
  gen->add_flag("--overwrite", o.overwrite, "Replace an existing --out directory");
  add_seed(gen, o);

  auto* train = sub("train", "Train a network; writes weights and a history CSV");
  train->add_option("--config", o.config, "Run config (JSON)")->required()->group("Inputs");
  train->add_option("--data", o.data, "Training dataset directory")->required()->group("Inputs");
  train->add_option("--val", o.val, "Validation dataset (default: split --data by train.train_fraction)")
      ->group("Inputs");
  train->add_option("--out", o.weights, "Weight file to write")->required();
  train->add_option("--history", o.history, "History CSV (default: <out>.history.csv)");
  train->add_option("--epochs", o.epochs, "Override train.max_epochs")->check(CLI::PositiveNumber);
  train->add_flag("--verbose", o.verbose, "Print one line per epoch to stderr");
  add_seed(train, o);

  auto* infer = sub("infer", "Estimate the shape from one image pair; prints JSON in mm / (1/mm, rad)");
  infer->add_option("--weights", o.weights, "Weight file")->required()->group("Inputs");
  infer->add_option("images", o.images, "Camera 0 and camera 1 images (PGM/PPM)")
      ->required()
      ->expected(2)
      ->group("Inputs");
  infer->add_flag("--preprocessed", o.preprocessed, "Images are already binary network inputs");

  auto* ev = sub("eval", "Evaluate weights on a dataset");
  ev->add_option("--weights", o.weights, "Weight file")->required()->group("Inputs");
  ev->add_option("--data", o.data, "Dataset directory")->required()->group("Inputs");
  ev->add_option("--out", o.out, "Report prefix: writes <out>.csv and <out>.json");

  auto* sw = sub("sweep", "Perturb raw images along one axis and evaluate each value");
  sw->add_option("--weights", o.weights, "Weight file")->required()->group("Inputs");
  sw->add_option("--data", o.data, "Dataset directory")->required()->group("Inputs");
  sw->add_option("--axis", o.axis, "brightness (offset), noise (std dev) or occlusion (strip px)")
      ->required()
      ->check(CLI::IsMember({"brightness", "noise", "occlusion"}));
  sw->add_option("--values", o.values, "Comma-separated axis values")->required()->delimiter(',');
  sw->add_option("--marker", o.marker, "Occluded section endpoint, 1-based (default 2)")->check(CLI::PositiveNumber);
  sw->add_option("--out", o.out, "Report prefix: writes <out>.csv and <out>.json");
  add_seed(sw, o);

  auto* re = sub("realign", "Compare observed fiducial corners with the training-time camera poses");
  re->add_option("--weights", o.weights, "Weight file (carries the saved poses)")->required()->group("Inputs");
  re->add_option("--observed-corners", o.corners, "Corner file as written by 'observe'")
      ->required()
      ->group("Inputs");
  re->add_option("--config", o.config, "Run config supplying the alignment thresholds")->group("Inputs");
  re->add_option("--max-translation-mm", o.max_translation_mm, "Translation threshold override")
      ->check(CLI::NonNegativeNumber);
  re->add_option("--max-rotation-deg", o.max_rotation_deg, "Rotation threshold override")
      ->check(CLI::NonNegativeNumber);

  auto* ob = sub("observe", "Simulate fiducial corner observations, optionally from moved cameras");
  ob->add_option("--config", o.config, "Run config with a fiducial")->required()->group("Inputs");
  ob->add_option("--out", o.out, "Corner file to write")->required();
  ob->add_option("--shift", o.shift, "Camera displacement x,y,z in world mm")->expected(3)->delimiter(',');
  ob->add_option("--rotate", o.rotate, "Camera rotation x,y,z in degrees (camera frame)")
      ->expected(3)
      ->delimiter(',');
  ob->add_option("--camera", o.camera, "Which camera moves: 0, 1 or both")->check(CLI::IsMember({"0", "1", "both"}));
  ob->add_option("--noise", o.noise, "Corner noise std dev in px")->check(CLI::NonNegativeNumber);
  add_seed(ob, o);

  auto* lat = sub("latency", "Median load / preprocess / forward timings for one image pair");
  lat->add_option("--weights", o.weights, "Weight file")->required()->group("Inputs");
  lat->add_option("images", o.images, "Camera 0 and camera 1 images")->required()->expected(2)->group("Inputs");
  lat->add_option("--repeats", o.repeats, "Timed repetitions, at least 10")->check(CLI::Range(10, 1000000));

  auto* sch = sub("schedule", "Print the learning-rate schedule as CSV without training");
  sch->add_option("--config", o.config, "Run config (default: 450 epochs from 1e-4, halved every 200)")
      ->group("Inputs");
  sch->add_option("--epochs", o.epochs, "Override the epoch count")->check(CLI::PositiveNumber);
  return a;
}

std::uint64_t resolve_seed(const CLI::App* sub, const Options& o, const char* env, std::uint64_t config_seed) {
  if (sub->count("--seed") > 0) return o.seed;
  if (env != nullptr && *env != '\0') {
    const std::string s(env);
    std::uint64_t v = 0;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size()) {
      throw CliError(kUsage, "VISE_SEED must be a non-negative integer, got '" + s + "'");
    }
    return v;
  }
  return config_seed;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw CliError(kIo, "cannot write " + path.string());
  f << text;
  if (!f) throw CliError(kIo, "failed writing " + path.string());
}

Json read_json_file(const fs::path& path) {
  std::ifstream f(path);
  if (!f) throw CliError(kIo, "cannot read " + path.string());
  try {
    return Json::parse(f);
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kIo, path.string() + " is not valid JSON: " + e.what());
  }
}

void check_dataset(const training::LoadedDataset& d, geometry::Representation rep, std::size_t width, double scale,
                   const imgproc::PreprocessSpec& preprocess, const std::string& what) {
  for (const auto& r : d.records) {
    if (r.label.representation != rep || r.label.values.size() != width) {
      throw CliError(kSpecMismatch, what + " holds " + geometry::to_string(r.label.representation) + " labels of width " +
                                        std::to_string(r.label.values.size()) + ", expected " +
                                        geometry::to_string(rep) + " of width " + std::to_string(width));
    }
    if (std::abs(r.label.scale - scale) > 1e-9) {
      throw CliError(kSpecMismatch, what + " was labeled with scale " + std::to_string(r.label.scale) +
                                        " mm, expected " + std::to_string(scale));
    }
  }
  if (Json(d.spec.preprocess) != Json(preprocess)) {
    throw CliError(kSpecMismatch, what + " was preprocessed with different settings");
  }
}

void check_dataset(const training::LoadedDataset& d, const checkpoint::Metadata& meta, const std::string& what) {
  check_dataset(d, meta.representation, geometry::label_width(meta.representation, meta.key_points), meta.scale,
                meta.preprocess, what);
  for (const auto& r : d.records) {
    if (r.config.section_lengths() != meta.section_lengths) {
      throw CliError(kSpecMismatch, what + " uses different section lengths from the weights");
    }
  }
}

Json label_json(const geometry::ShapeLabel& label, const checkpoint::Metadata& meta) {
  Json j{{"representation", geometry::to_string(label.representation)}, {"scale_mm", meta.scale}};
  std::vector<double> values(label.values.begin(), label.values.end());
  j["values"] = values;
  if (label.representation == geometry::Representation::Points) {
    Json pts = Json::array();
    for (std::size_t i = 0; i + 2 < values.size(); i += 3) pts.push_back({values[i], values[i + 1], values[i + 2]});
    j["points_mm"] = pts;
  } else {
    const auto config = geometry::config_from_pcc_label(label, meta.section_lengths);
    j["sections"] = config.sections();
    Json ends = Json::array();
    for (const auto& t : geometry::fk_chain(config)) ends.push_back(vec3_to_json(t.translation));
    j["endpoints_mm"] = ends;
  }
  return j;
}

std::array<ImageBuffer, 2> load_pair(const std::vector<std::string>& paths, const checkpoint::Metadata& meta,
                                     bool preprocessed) {
  std::array<ImageBuffer, 2> pair;
  for (int cam = 0; cam < 2; ++cam) {
    auto img = read_pnm(paths[static_cast<std::size_t>(cam)]);
    if (preprocessed) {
      if (img.width() != meta.preprocess.target_size || img.height() != meta.preprocess.target_size) {
        throw CliError(kSpecMismatch, "preprocessed images must be " + std::to_string(meta.preprocess.target_size) +
                                          " px square, got " + std::to_string(img.width()) + "x" +
                                          std::to_string(img.height()));
      }
      pair[static_cast<std::size_t>(cam)] = std::move(img);
    } else {
      pair[static_cast<std::size_t>(cam)] = imgproc::preprocess(img, meta.preprocess, cam);
    }
  }
  return pair;
}

void write_reports(const std::string& prefix, std::span<const eval::EvalReport> reports, const Json& summary) {
  if (prefix.empty()) return;
  write_text(prefix + ".csv", eval::reports_csv(reports));
  write_text(prefix + ".json", summary.dump(2) + "\n");
}

int cmd_init_config(const Options& o, std::ostream& out) {
  const Json j = config::desk_config(o.seed);
  write_text(o.out, j.dump(2) + "\n");
  out << Json{{"config", o.out}, {"seed", o.seed}}.dump() << "\n";
  return kOk;
}

int cmd_gen(const CLI::App* sub, const Options& o, std::ostream& out, const char* env) {
  auto cfg = config::load_config(o.config);
  const auto seed = resolve_seed(sub, o, env, cfg.seed);
  const bool test = o.split == "test";
  const std::size_t count = sub->count("--count") > 0 ? o.count : (test ? cfg.dataset.test : cfg.dataset.train);
  const std::size_t first = sub->count("--first-index") > 0 ? o.first_index : (test ? cfg.dataset.train : 0);
  const unsigned jobs = sub->count("--jobs") > 0 ? o.jobs : cfg.jobs;
  if (count == 0) throw CliError(kUsage, "--count must be at least 1");

  const fs::path dir(o.out);
  if (fs::exists(dir) && !(fs::is_directory(dir) && fs::is_empty(dir))) {
    if (!o.overwrite) throw CliError(kIo, dir.string() + " already exists; pass --overwrite to replace it");
    fs::remove_all(dir);
  }
  const auto records = training::generate_dataset(cfg.generate, count, seed, jobs, first);
  training::write_dataset(dir, records, cfg.generate, seed);
  out << Json{{"out", dir.string()}, {"count", count}, {"first_index", first}, {"seed", seed}}.dump() << "\n";
  return kOk;
}

int cmd_train(const CLI::App* sub, const Options& o, std::ostream& out, std::ostream& err, const char* env) {
  auto cfg = config::load_config(o.config);
  const auto seed = resolve_seed(sub, o, env, cfg.seed);
  if (sub->count("--epochs") > 0) cfg.train.max_epochs = o.epochs;
  auto meta = config::make_metadata(cfg);
  const auto width = static_cast<std::size_t>(cfg.network.output_size);

  const auto data = training::read_dataset(o.data);
  check_dataset(data, meta, "--data");
  std::vector<training::DatasetRecord> train_recs;
  std::vector<training::DatasetRecord> val_recs;
  if (!o.val.empty()) {
    const auto val = training::read_dataset(o.val);
    check_dataset(val, meta, "--val");
    train_recs = data.records;
    val_recs = val.records;
  } else {
    std::tie(train_recs, val_recs) =
        training::split_dataset<training::DatasetRecord>(data.records, cfg.train.train_fraction, seed);
  }
  (void)width;

  auto net = nn::VggSBn::build(cfg.network, seed);
  const auto result = training::train(
      net, training::make_inputs(train_recs), training::make_targets(train_recs), training::make_inputs(val_recs),
      training::make_targets(val_recs), cfg.train, seed, [&](const training::EpochRecord& e) {
        if (o.verbose) {
          err << "epoch " << e.epoch << " lr " << e.lr << " train " << e.train_loss << " val " << e.val_loss << "\n";
        }
      });

  meta.extra = Json{{"seed", seed},
                    {"best_epoch", result.best_epoch},
                    {"best_val_loss", result.best_val_loss},
                    {"epochs_run", result.history.size()},
                    {"stopped_early", result.stopped_early},
                    {"train_samples", train_recs.size()},
                    {"val_samples", val_recs.size()}};
  try {
    checkpoint::save(o.weights, net, meta);
  } catch (const checkpoint::CheckpointError& e) {
    throw CliError(kIo, e.what());
  }
  const std::string history = o.history.empty() ? o.weights + ".history.csv" : o.history;
  write_text(history, training::history_csv(result.history));
  Json summary = meta.extra;
  summary["weights"] = o.weights;
  summary["history"] = history;
  out << summary.dump() << "\n";
  return kOk;
}

int cmd_infer(const Options& o, std::ostream& out) {
  auto ck = checkpoint::load(o.weights);
  const std::array<std::array<ImageBuffer, 2>, 1> pairs{load_pair(o.images, ck.meta, o.preprocessed)};
  const auto labels = eval::predict_labels(ck.network, ck.meta, pairs);
  out << label_json(labels[0], ck.meta).dump(2) << "\n";
  return kOk;
}

int cmd_eval(const Options& o, std::ostream& out) {
  auto ck = checkpoint::load(o.weights);
  const auto data = training::read_dataset(o.data);
  check_dataset(data, ck.meta, "--data");
  const auto report = eval::evaluate(ck.network, ck.meta, data.records);
  const Json summary = eval::report_json(report);
  write_reports(o.out, std::span(&report, 1), summary);
  out << summary.dump(2) << "\n";
  return kOk;
}

int cmd_sweep(const CLI::App* sub, const Options& o, std::ostream& out, const char* env) {
  auto ck = checkpoint::load(o.weights);
  const auto data = training::read_dataset(o.data);
  check_dataset(data, ck.meta, "--data");
  eval::SweepSpec spec;
  spec.axis = eval::sweep_axis_from_string(o.axis);
  spec.values = o.values;
  if (o.marker > data.records[0].config.size()) {
    throw CliError(kUsage, "--marker " + std::to_string(o.marker) + " exceeds the " +
                               std::to_string(data.records[0].config.size()) + " section endpoints");
  }
  spec.occlusion_marker = o.marker - 1;
  spec.seed = resolve_seed(sub, o, env, data.seed);
  for (double v : spec.values) {
    const bool integral = std::round(v) == v;
    if ((spec.axis != eval::SweepAxis::Noise && !integral) || (spec.axis != eval::SweepAxis::Brightness && v < 0)) {
      throw CliError(kUsage, "invalid " + o.axis + " value " + std::to_string(v));
    }
  }
  const auto reports = eval::sweep(ck.network, ck.meta, data.records, spec);
  Json summary{{"axis", o.axis}, {"marker", o.marker}, {"seed", spec.seed}, {"reports", Json::array()}};
  for (const auto& r : reports) summary["reports"].push_back(eval::report_json(r));
  write_reports(o.out, reports, summary);
  out << summary.dump(2) << "\n";
  return kOk;
}

int cmd_realign(const CLI::App* sub, const Options& o, std::ostream& out) {
  const auto ck = checkpoint::load(o.weights);
  if (!ck.meta.fiducial) throw CliError(kSpecMismatch, "the weight file carries no fiducial, so no saved poses");
  camera::AlignmentThreshold threshold;
  if (!o.config.empty()) threshold = config::load_config(o.config).alignment;
  if (sub->count("--max-translation-mm") > 0) threshold.translation_mm = o.max_translation_mm;
  if (sub->count("--max-rotation-deg") > 0) threshold.rotation_deg = o.max_rotation_deg;

  const Json file = read_json_file(o.corners);
  const auto tag = camera::FiducialTag::square(geometry::RigidTransform{}, ck.meta.fiducial->side);
  Json cams = Json::array();
  bool all_aligned = true;
  try {
    const auto& list = file.at("cameras");
    if (!list.is_array() || list.size() != 2) throw CliError(kIo, "corner file needs a 'cameras' array of 2 entries");
    for (std::size_t i = 0; i < 2; ++i) {
      if (list[i].is_null()) {
        cams.push_back(nullptr);
        continue;
      }
      const auto& pts = list[i].at("corners");
      if (!pts.is_array() || pts.size() != 4) throw CliError(kIo, "each camera needs 4 corners");
      camera::CornerObservations obs;
      for (std::size_t k = 0; k < 4; ++k) obs[k] = {pts[k].at(0).get<double>(), pts[k].at(1).get<double>()};
      const auto& k = ck.meta.cameras[i].intrinsics;
      const auto current = camera::estimate_camera_pose(k, tag, obs, ck.meta.saved_poses[i]);
      const auto delta = camera::realignment_delta(ck.meta.saved_poses[i], current);
      const bool aligned = camera::is_aligned(delta, threshold);
      all_aligned = all_aligned && aligned;
      cams.push_back(Json{{"translation_mm", delta.translation_mm},
                          {"rotation_deg", delta.rotation_rad * 180.0 / std::numbers::pi},
                          {"delta", delta.delta},
                          {"reprojection_rms_px", camera::reprojection_rms(k, tag, obs, current)},
                          {"verdict", aligned ? "aligned" : "misaligned"}});
    }
  } catch (const nlohmann::json::exception& e) {
    throw CliError(kIo, "malformed corner file: " + std::string(e.what()));
  }
  out << Json{{"cameras", cams},
              {"threshold", threshold},
              {"verdict", all_aligned ? "aligned" : "misaligned"}}
             .dump(2)
      << "\n";
  return kOk;
}

int cmd_observe(const CLI::App* sub, const Options& o, std::ostream& out, const char* env) {
  const auto cfg = config::load_config(o.config);
  if (!cfg.fiducial) throw CliError(kConfig, "config has no fiducial");
  const auto seed = resolve_seed(sub, o, env, cfg.seed);
  const auto tag = camera::FiducialTag::square(cfg.fiducial->pose, cfg.fiducial->side);
  const Eigen::Vector3d shift(o.shift[0], o.shift[1], o.shift[2]);
  const Eigen::Vector3d rot = Eigen::Vector3d(o.rotate[0], o.rotate[1], o.rotate[2]) * std::numbers::pi / 180.0;
  Json cams = Json::array();
  for (int i = 0; i < 2; ++i) {
    auto model = cfg.generate.scene.cameras[static_cast<std::size_t>(i)];
    if (o.camera == "both" || o.camera == std::to_string(i)) {
      model.extrinsics = geometry::RigidTransform::from_rotation(geometry::rotation_exp(rot)) * model.extrinsics *
                         geometry::RigidTransform::from_translation(-shift);
    }
    const auto obs = camera::observe_fiducial(model, tag, o.noise, stream_seed(seed, static_cast<std::uint64_t>(i), kObserveSalt));
    Json pts = Json::array();
    for (const auto& p : obs) pts.push_back({p.x(), p.y()});
    cams.push_back(Json{{"corners", pts}});
  }
  write_text(o.out, Json{{"cameras", cams}}.dump(2) + "\n");
  out << Json{{"out", o.out}, {"seed", seed}}.dump() << "\n";
  return kOk;
}

int cmd_latency(const Options& o, std::ostream& out) {
  auto ck = checkpoint::load(o.weights);
  const auto r = eval::latency_profile(ck.network, ck.meta, {fs::path(o.images[0]), fs::path(o.images[1])}, o.repeats);
  out << eval::latency_json(r).dump(2) << "\n";
  return kOk;
}

int cmd_schedule(const CLI::App* sub, const Options& o, std::ostream& out) {
  training::TrainConfig cfg;
  if (!o.config.empty()) cfg = config::load_config(o.config).train;
  if (sub->count("--epochs") > 0) cfg.max_epochs = o.epochs;
  out << training::history_csv(training::schedule_dry_run(cfg));
  return kOk;
}

/// Input files are checked here rather than by the parser so that a
/// missing file is an I/O error, not a usage error.
void check_inputs(const CLI::App* sub) {
  for (const auto* opt : sub->get_options()) {
    if (opt->get_group() != "Inputs" || opt->count() == 0) continue;
    for (const auto& path : opt->results()) {
      if (!fs::exists(path)) throw CliError(kIo, "missing input " + opt->get_name() + ": " + path);
    }
  }
}

int dispatch(App& a, std::ostream& out, std::ostream& err, const char* env) {
  const auto& o = a.opt;
  for (const auto& [name, sub] : a.subs) {
    if (sub->parsed()) check_inputs(sub);
  }
  for (const auto& [name, sub] : a.subs) {
    if (!sub->parsed()) continue;
    if (name == "init-config") return cmd_init_config(o, out);
    if (name == "gen") return cmd_gen(sub, o, out, env);
    if (name == "train") return cmd_train(sub, o, out, err, env);
    if (name == "infer") return cmd_infer(o, out);
    if (name == "eval") return cmd_eval(o, out);
    if (name == "sweep") return cmd_sweep(sub, o, out, env);
    if (name == "realign") return cmd_realign(sub, o, out);
    if (name == "observe") return cmd_observe(sub, o, out, env);
    if (name == "latency") return cmd_latency(o, out);
    if (name == "schedule") return cmd_schedule(sub, o, out);
  }
  throw CliError(kUsage, "no subcommand given");
}

const char* type_name(int code) {
  for (const auto& e : exit_codes()) {
    if (e.code == code) return e.name;
  }
  return "internal";
}

int report(std::ostream& err, int code, const std::string& message) {
  err << Json{{"error", {{"code", code}, {"type", type_name(code)}, {"message", message}}}}.dump() << "\n";
  return code;
}

}  // namespace

const std::vector<ExitCodeDoc>& exit_codes() {
  static const std::vector<ExitCodeDoc> codes{
      {kOk, "ok", "success"},
      {kInternal, "internal", "unexpected internal error"},
      {kUsage, "usage", "bad command line or VISE_SEED"},
      {kConfig, "config", "invalid config, or a config that renders an impossible scene"},
      {kIo, "io", "missing, unreadable, unwritable or malformed input/output files"},
      {kCorruptWeights, "corrupt_weights", "weight file has bad magic, version, manifest or data"},
      {kSpecMismatch, "spec_mismatch", "weights, dataset and request disagree (representation, sizes, preprocess)"},
      {kNumerical, "numerical", "non-finite loss or parameters, or pose estimation diverged"},
  };
  return codes;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err, const char* env_seed) {
  auto a = make_app();
  try {
    a->app->parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    const CLI::App* target = a->app.get();
    for (const auto& [name, sub] : a->subs) {
      if (sub->parsed()) target = sub;
    }
    out << target->help();
    return kOk;
  } catch (const CLI::CallForAllHelp&) {
    out << a->app->help("", CLI::AppFormatMode::All);
    return kOk;
  } catch (const CLI::ParseError& e) {
    return report(err, kUsage, e.what());
  }
  try {
    return dispatch(*a, out, err, env_seed);
  } catch (const CliError& e) {
    return report(err, e.code(), e.what());
  } catch (const checkpoint::CheckpointError& e) {
    const auto c = e.code();
    const int code = c == checkpoint::ErrorCode::Io                        ? kIo
                     : c == checkpoint::ErrorCode::RepresentationMismatch ? kSpecMismatch
                                                                            : kCorruptWeights;
    return report(err, code, e.what());
  } catch (const ConfigError& e) {
    return report(err, kConfig, e.what());
  } catch (const training::NumericalError& e) {
    return report(err, kNumerical, e.what());
  } catch (const training::DatasetIoError& e) {
    return report(err, kIo, e.what());
  } catch (const ImageError& e) {
    return report(err, kIo, e.what());
  } catch (const camera::CameraError& e) {
    return report(err, kNumerical, e.what());
  } catch (const training::TrainingError& e) {
    // Sample-level generation failures come from the scene, i.e. the config.
    const bool sample = std::string(e.what()).rfind("sample ", 0) == 0;
    return report(err, sample ? kConfig : kSpecMismatch, e.what());
  } catch (const eval::EvalError& e) {
    return report(err, kSpecMismatch, e.what());
  } catch (const nn::NnError& e) {
    return report(err, kSpecMismatch, e.what());
  } catch (const render::RenderError& e) {
    return report(err, kConfig, e.what());
  } catch (const imgproc::ImgprocError& e) {
    return report(err, kConfig, e.what());
  } catch (const geometry::GeometryError& e) {
    return report(err, kConfig, e.what());
  } catch (const std::exception& e) {
    return report(err, kInternal, e.what());
  }
}

std::vector<std::string> subcommands() {
  auto a = make_app();
  std::vector<std::string> names;
  for (const auto* s : a->app->get_subcommands({})) names.push_back(s->get_name());
  return names;
}

std::string help_text(const std::string& subcommand) {
  auto a = make_app();
  if (subcommand.empty()) return a->app->help();
  return a->app->get_subcommand(subcommand)->help();
}

std::vector<std::string> option_names(const std::string& subcommand) {
  auto a = make_app();
  const CLI::App* app = subcommand.empty() ? a->app.get() : a->app->get_subcommand(subcommand);
  std::vector<std::string> names;
  for (const auto* opt : app->get_options()) {
    for (const auto& l : opt->get_lnames()) names.push_back("--" + l);
    if (opt->get_positional()) names.push_back(opt->get_name(true, false));
  }
  return names;
}

}  // namespace vise::cli
