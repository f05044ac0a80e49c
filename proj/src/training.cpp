#include "vise/training.hpp"

#include "vise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <exception>
#include <fstream>
#include <mutex>
#include <numbers>
#include <sstream>
#include <thread>

namespace vise::training {

namespace {

constexpr std::uint64_t kMotionSalt = 0x6d6f74ULL;
constexpr std::uint64_t kShuffleSalt = 0x5348ULL;
constexpr std::uint64_t kDropoutSalt = 0x44524fULL;
constexpr std::uint64_t kSplitSalt = 0x53504cULL;
constexpr std::size_t kPredictBatch = 64;

std::string image_name(std::size_t id, int cam) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu_%d.pgm", id, cam);
  return buf;
}

void copy_rows(const nn::Tensor& src, std::span<const std::size_t> rows, nn::Tensor& dst) {
  const std::size_t width = src.numel() / src.dim(0);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::copy_n(src.data() + rows[i] * width, width, dst.data() + i * width);
  }
}

nn::Shape with_rows(const nn::Shape& shape, std::size_t rows) {
  nn::Shape s = shape;
  s[0] = rows;
  return s;
}

}  // namespace

std::string to_string(MotionMode mode) { return mode == MotionMode::Circular ? "circular" : "random"; }

MotionMode motion_mode_from_string(const std::string& name) {
  if (name == "circular") return MotionMode::Circular;
  if (name == "random") return MotionMode::Random;
  throw ConfigError("unknown motion mode '" + name + "' (expected circular or random)");
}

void MotionSpec::validate() const {
  if (section_lengths.empty() || section_lengths.size() > geometry::ArmConfiguration::kMaxSections) {
    throw ConfigError("motion: 1 to 6 sections required");
  }
  for (double l : section_lengths) {
    if (!(l > 0.0)) throw ConfigError("motion: section lengths must be positive");
  }
  if (mode == MotionMode::Circular) {
    if (periods.size() != section_lengths.size()) throw ConfigError("motion: one period per section required");
    for (double t : periods) {
      if (!(t > 0.0)) throw ConfigError("motion: periods must be positive");
    }
    if (!(amplitude >= 0.0 && amplitude <= 1.0)) throw ConfigError("motion: amplitude must be in [0, 1]");
    if (!(time_step > 0.0)) throw ConfigError("motion: time_step must be positive");
  } else if (!(kappa_max >= 0.0 && kappa_max <= 1.0)) {
    throw ConfigError("motion: kappa_max must be in [0, 1] (at most a half-circle bend)");
  }
}

geometry::ArmConfiguration configuration_at(const MotionSpec& motion, std::size_t index, std::uint64_t seed) {
  std::vector<geometry::PccSection> sections;
  const double pi = std::numbers::pi;
  if (motion.mode == MotionMode::Circular) {
    const double t = static_cast<double>(index) * motion.time_step;
    for (std::size_t i = 0; i < motion.section_lengths.size(); ++i) {
      const double len = motion.section_lengths[i];
      sections.emplace_back(motion.amplitude * pi / len, 2.0 * pi * t / motion.periods[i], len);
    }
  } else {
    Rng rng(stream_seed(seed, index, kMotionSalt));
    for (double len : motion.section_lengths) {
      const double kappa = rng.uniform(0.0, motion.kappa_max * pi / len);
      const double phi = rng.uniform(0.0, 2.0 * pi);
      sections.emplace_back(kappa, phi, len);
    }
  }
  return geometry::ArmConfiguration(std::move(sections));
}

std::size_t LabelSpec::width(std::size_t sections) const {
  return representation == geometry::Representation::Points ? geometry::label_width(representation, key_points)
                                                            : geometry::label_width(representation, sections);
}

geometry::ShapeLabel make_label(const geometry::ArmConfiguration& config, const LabelSpec& spec) {
  if (spec.representation == geometry::Representation::Points) return geometry::points_label(config, spec.key_points);
  return geometry::pcc_label(config.sections());
}

std::vector<DatasetRecord> generate_dataset(const GenerateSpec& spec, std::size_t count, std::uint64_t seed,
                                            unsigned jobs, std::size_t first_index) {
  if (count == 0) throw TrainingError("dataset count must be at least 1");
  spec.motion.validate();
  spec.scene.validate();
  spec.preprocess.validate();
  std::vector<DatasetRecord> out(count);
  std::exception_ptr failure;
  std::size_t failed_index = 0;
  std::mutex lock;

  auto work = [&](unsigned worker, unsigned stride) {
    for (std::size_t k = worker; k < count; k += stride) {
      const std::size_t id = first_index + k;
      try {
        DatasetRecord r;
        r.id = id;
        r.config = configuration_at(spec.motion, id, seed);
        r.label = make_label(r.config, spec.label);
        for (int cam = 0; cam < 2; ++cam) {
          r.raw[cam] = render::render_view(spec.scene, cam, r.config);
          r.input[cam] = imgproc::preprocess(r.raw[cam], spec.preprocess, cam);
        }
        out[k] = std::move(r);
      } catch (...) {
        std::lock_guard<std::mutex> guard(lock);
        if (!failure || id < failed_index) {
          failure = std::current_exception();
          failed_index = id;
        }
        return;
      }
    }
  };

  const unsigned workers = std::max(1u, std::min<unsigned>(jobs, static_cast<unsigned>(count)));
  if (workers == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> threads;
    for (unsigned w = 0; w < workers; ++w) threads.emplace_back(work, w, workers);
    for (auto& t : threads) t.join();
  }
  if (failure) {
    try {
      std::rethrow_exception(failure);
    } catch (const std::exception& e) {
      throw TrainingError("sample " + std::to_string(failed_index) + ": " + e.what());
    }
  }
  return out;
}

void write_dataset(const std::filesystem::path& dir, std::span<const DatasetRecord> records,
                   const GenerateSpec& spec, std::uint64_t seed) {
  namespace fs = std::filesystem;
  fs::create_directories(dir / "raw");
  fs::create_directories(dir / "input");
  {
    std::ofstream meta(dir / "dataset.json", std::ios::binary);
    meta << Json{{"generator", spec}, {"seed", seed}, {"count", records.size()}}.dump(2) << "\n";
    if (!meta) throw DatasetIoError("cannot write " + (dir / "dataset.json").string());
  }
  std::ofstream manifest(dir / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw DatasetIoError("cannot write " + (dir / "manifest.jsonl").string());
  for (const auto& r : records) {
    Json raw = Json::array(), input = Json::array();
    for (int cam = 0; cam < 2; ++cam) {
      const std::string name = image_name(r.id, cam);
      write_pgm(dir / "raw" / name, r.raw[cam]);
      write_pgm(dir / "input" / name, r.input[cam]);
      raw.push_back("raw/" + name);
      input.push_back("input/" + name);
    }
    const Json line{{"id", r.id},
                    {"images", {{"raw", raw}, {"input", input}}},
                    {"label", r.label.values},
                    {"representation", r.label.representation},
                    {"scale", r.label.scale},
                    {"config", r.config}};
    manifest << line.dump() << "\n";
  }
  if (!manifest) throw DatasetIoError("failed writing manifest in " + dir.string());
}

LoadedDataset read_dataset(const std::filesystem::path& dir) {
  LoadedDataset out;
  std::ifstream meta(dir / "dataset.json", std::ios::binary);
  if (!meta) throw DatasetIoError("cannot read " + (dir / "dataset.json").string());
  Json header;
  try {
    header = Json::parse(meta);
    out.spec = header.at("generator").get<GenerateSpec>();
    out.seed = header.at("seed").get<std::uint64_t>();
  } catch (const nlohmann::json::exception& e) {
    throw DatasetIoError("malformed dataset.json: " + std::string(e.what()));
  } catch (const ConfigError& e) {
    throw DatasetIoError("malformed dataset.json: " + std::string(e.what()));
  }

  std::ifstream manifest(dir / "manifest.jsonl", std::ios::binary);
  if (!manifest) throw DatasetIoError("cannot read " + (dir / "manifest.jsonl").string());
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(manifest, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      const Json j = Json::parse(line);
      DatasetRecord r;
      r.id = j.at("id").get<std::size_t>();
      r.config = j.at("config").get<geometry::ArmConfiguration>();
      r.label.representation = j.at("representation").get<geometry::Representation>();
      r.label.values = j.at("label").get<std::vector<float>>();
      r.label.scale = j.at("scale").get<double>();
      r.label.validate();
      for (int cam = 0; cam < 2; ++cam) {
        r.raw[cam] = read_pnm(dir / j.at("images").at("raw").at(cam).get<std::string>());
        r.input[cam] = read_pnm(dir / j.at("images").at("input").at(cam).get<std::string>());
      }
      out.records.push_back(std::move(r));
    } catch (const nlohmann::json::exception& e) {
      throw DatasetIoError("malformed manifest.jsonl line " + std::to_string(line_no) + ": " + e.what());
    } catch (const ConfigError& e) {
      throw DatasetIoError("malformed manifest.jsonl line " + std::to_string(line_no) + ": " + e.what());
    } catch (const geometry::GeometryError& e) {
      throw DatasetIoError("malformed manifest.jsonl line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  if (out.records.empty()) throw DatasetIoError("dataset " + dir.string() + " has no records");
  return out;
}

Split split_indices(std::size_t count, double train_fraction, std::uint64_t seed) {
  if (count == 0) throw TrainingError("cannot split an empty dataset");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw TrainingError("train fraction must be in (0, 1) so both parts are positive");
  }
  std::vector<std::size_t> order(count);
  for (std::size_t i = 0; i < count; ++i) order[i] = i;
  Rng rng(stream_seed(seed, 0, kSplitSalt));
  rng.shuffle(order.begin(), order.end());
  const auto cut = static_cast<std::size_t>(std::llround(static_cast<double>(count) * train_fraction));
  Split s;
  s.train.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(cut));
  s.test.assign(order.begin() + static_cast<std::ptrdiff_t>(cut), order.end());
  return s;
}

void TrainConfig::validate() const {
  if (batch_size < 2) throw ConfigError("train: batch_size must be at least 2 (batch normalization)");
  if (max_epochs < 1) throw ConfigError("train: max_epochs must be positive");
  if (!(lr > 0.0) || !(lr_decay > 0.0) || lr_decay_every < 1) throw ConfigError("train: invalid learning-rate schedule");
  if (!(weight_decay >= 0.0)) throw ConfigError("train: weight_decay must be non-negative");
  if (early_stop_patience && *early_stop_patience < 1) throw ConfigError("train: patience must be positive or null");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw ConfigError("train: train_fraction must be in (0, 1)");
}

double lr_at(const TrainConfig& cfg, int epoch) {
  return cfg.lr * std::pow(cfg.lr_decay, static_cast<double>(epoch / cfg.lr_decay_every));
}

nn::Tensor make_inputs(std::span<const std::array<ImageBuffer, 2>> pairs) {
  if (pairs.empty()) throw TrainingError("no images to convert");
  const auto size = static_cast<std::size_t>(pairs[0][0].width());
  nn::Tensor out({pairs.size(), 2, size, size});
  float* dst = out.data();
  for (const auto& pair : pairs) {
    for (const auto& img : pair) {
      if (static_cast<std::size_t>(img.width()) != size || static_cast<std::size_t>(img.height()) != size) {
        throw TrainingError("network inputs must all be " + std::to_string(size) + "x" + std::to_string(size));
      }
      for (auto p : img.pixels()) *dst++ = p >= 128 ? 1.0f : 0.0f;
    }
  }
  return out;
}

nn::Tensor make_inputs(std::span<const DatasetRecord> records) {
  std::vector<std::array<ImageBuffer, 2>> pairs;
  pairs.reserve(records.size());
  for (const auto& r : records) pairs.push_back(r.input);
  return make_inputs(pairs);
}

nn::Tensor make_targets(std::span<const DatasetRecord> records) {
  if (records.empty()) throw TrainingError("no records");
  const std::size_t width = records[0].label.values.size();
  nn::Tensor out({records.size(), width});
  for (std::size_t i = 0; i < records.size(); ++i) {
    const auto n = records[i].label.normalized();
    if (n.size() != width) throw TrainingError("label widths differ within the dataset");
    std::copy(n.begin(), n.end(), out.data() + i * width);
  }
  return out;
}

nn::Tensor predict(const nn::VggSBn& net, const nn::Tensor& inputs) {
  const std::size_t n = inputs.dim(0);
  const std::size_t width = static_cast<std::size_t>(net.spec().output_size);
  nn::Tensor out({n, width});
  std::vector<std::size_t> rows;
  for (std::size_t start = 0; start < n; start += kPredictBatch) {
    const std::size_t m = std::min(kPredictBatch, n - start);
    rows.resize(m);
    for (std::size_t i = 0; i < m; ++i) rows[i] = start + i;
    nn::Tensor batch(with_rows(inputs.shape(), m));
    copy_rows(inputs, rows, batch);
    const auto y = net.infer(batch);
    std::copy_n(y.data(), y.numel(), out.data() + start * width);
  }
  return out;
}

double evaluate_loss(const nn::VggSBn& net, const nn::Tensor& inputs, const nn::Tensor& targets) {
  return nn::l1_loss(predict(net, inputs), targets);
}

TrainResult train(nn::VggSBn& net, const nn::Tensor& train_inputs, const nn::Tensor& train_targets,
                  const nn::Tensor& val_inputs, const nn::Tensor& val_targets, const TrainConfig& cfg,
                  std::uint64_t seed, const EpochCallback& on_epoch) {
  cfg.validate();
  const std::size_t n = train_inputs.dim(0);
  if (n < 2) throw TrainingError("training needs at least 2 samples");
  if (train_targets.dim(0) != n || val_targets.dim(0) != val_inputs.dim(0) || val_inputs.dim(0) == 0) {
    throw TrainingError("input and target counts differ, or the validation set is empty");
  }
  const auto out_width = static_cast<std::size_t>(net.spec().output_size);
  if (train_targets.dim(1) != out_width || val_targets.dim(1) != out_width) {
    throw TrainingError("label width " + std::to_string(train_targets.dim(1)) + " does not match network output " +
                        std::to_string(out_width));
  }

  nn::AdamWConfig opt;
  opt.weight_decay = cfg.weight_decay;
  auto params = net.parameters();
  auto grads = net.gradients();
  auto state = nn::AdamWState::zeros_like(params);

  TrainResult result;
  std::vector<nn::Tensor> best;
  int since_best = 0;
  std::vector<std::size_t> order(n);

  for (int epoch = 0; epoch < cfg.max_epochs; ++epoch) {
    const double lr = lr_at(cfg, epoch);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    Rng shuffle(stream_seed(seed, static_cast<std::uint64_t>(epoch), kShuffleSalt));
    shuffle.shuffle(order.begin(), order.end());
    Rng dropout(stream_seed(seed, static_cast<std::uint64_t>(epoch), kDropoutSalt));

    double loss_sum = 0.0;
    std::size_t seen = 0;
    std::size_t batch_index = 0;
    for (std::size_t start = 0; start < n; start += cfg.batch_size, ++batch_index) {
      const std::size_t m = std::min(cfg.batch_size, n - start);
      if (m < 2) break;  // batch statistics need two samples
      const std::span<const std::size_t> rows(order.data() + start, m);
      nn::Tensor x(with_rows(train_inputs.shape(), m));
      nn::Tensor y(with_rows(train_targets.shape(), m));
      copy_rows(train_inputs, rows, x);
      copy_rows(train_targets, rows, y);

      const auto pred = net.forward_train(x, dropout);
      const double loss = nn::l1_loss(pred, y);
      if (!std::isfinite(loss)) {
        throw NumericalError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(batch_index));
      }
      net.backward(nn::l1_loss_backward(pred, y));
      nn::adamw_step(params, grads, state, lr, opt);
      loss_sum += loss * static_cast<double>(m);
      seen += m;
    }
    for (const auto& p : net.state()) {
      if (!p.tensor->all_finite()) {
        throw NumericalError("non-finite value in " + p.name + " after epoch " + std::to_string(epoch));
      }
    }

    EpochRecord rec{epoch, lr, loss_sum / static_cast<double>(seen), evaluate_loss(net, val_inputs, val_targets)};
    result.history.push_back(rec);
    if (on_epoch) on_epoch(rec);

    if (result.best_epoch < 0 || rec.val_loss < result.best_val_loss - cfg.min_improvement) {
      result.best_epoch = epoch;
      result.best_val_loss = rec.val_loss;
      best.clear();
      for (const auto& p : net.state()) best.push_back(*p.tensor);
      since_best = 0;
    } else if (cfg.early_stop_patience && ++since_best >= *cfg.early_stop_patience) {
      result.stopped_early = true;
      break;
    }
  }

  auto current = net.state();
  for (std::size_t i = 0; i < current.size(); ++i) *current[i].tensor = best[i];
  return result;
}

std::vector<EpochRecord> schedule_dry_run(const TrainConfig& cfg) {
  cfg.validate();
  std::vector<EpochRecord> out;
  for (int e = 0; e < cfg.max_epochs; ++e) out.push_back({e, lr_at(cfg, e), 0.0, 0.0});
  return out;
}

std::string history_csv(std::span<const EpochRecord> history) {
  std::ostringstream os;
  os << "epoch,lr,train_loss,val_loss\n";
  char buf[128];
  for (const auto& r : history) {
    std::snprintf(buf, sizeof buf, "%d,%.17g,%.17g,%.17g\n", r.epoch, r.lr, r.train_loss, r.val_loss);
    os << buf;
  }
  return os.str();
}

void to_json(Json& j, const MotionSpec& m) {
  j = Json{{"mode", to_string(m.mode)},         {"section_lengths", m.section_lengths},
           {"periods", m.periods},              {"amplitude", m.amplitude},
           {"kappa_max", m.kappa_max},          {"time_step", m.time_step}};
}

void from_json(const Json& j, MotionSpec& m) {
  const std::string w = "motion";
  require_keys(j, {"mode", "section_lengths", "periods", "amplitude", "kappa_max", "time_step"}, w);
  if (j.contains("mode")) m.mode = motion_mode_from_string(j.at("mode").get<std::string>());
  read_optional(j, "section_lengths", m.section_lengths, w);
  read_optional(j, "periods", m.periods, w);
  read_optional(j, "amplitude", m.amplitude, w);
  read_optional(j, "kappa_max", m.kappa_max, w);
  read_optional(j, "time_step", m.time_step, w);
}

void to_json(Json& j, const LabelSpec& l) {
  j = Json{{"representation", l.representation}, {"key_points", l.key_points}};
}

void from_json(const Json& j, LabelSpec& l) {
  require_keys(j, {"representation", "key_points"}, "label");
  read_optional(j, "representation", l.representation, "label");
  read_optional(j, "key_points", l.key_points, "label");
}

void to_json(Json& j, const TrainConfig& c) {
  j = Json{{"batch_size", c.batch_size},
           {"max_epochs", c.max_epochs},
           {"lr", c.lr},
           {"lr_decay", c.lr_decay},
           {"lr_decay_every", c.lr_decay_every},
           {"weight_decay", c.weight_decay},
           {"early_stop_patience", c.early_stop_patience ? Json(*c.early_stop_patience) : Json(nullptr)},
           {"min_improvement", c.min_improvement},
           {"train_fraction", c.train_fraction}};
}

void from_json(const Json& j, TrainConfig& c) {
  const std::string w = "train";
  require_keys(j, {"batch_size", "max_epochs", "lr", "lr_decay", "lr_decay_every", "weight_decay",
                   "early_stop_patience", "min_improvement", "train_fraction"},
               w);
  read_optional(j, "batch_size", c.batch_size, w);
  read_optional(j, "max_epochs", c.max_epochs, w);
  read_optional(j, "lr", c.lr, w);
  read_optional(j, "lr_decay", c.lr_decay, w);
  read_optional(j, "lr_decay_every", c.lr_decay_every, w);
  read_optional(j, "weight_decay", c.weight_decay, w);
  if (j.contains("early_stop_patience")) {
    const auto& p = j.at("early_stop_patience");
    c.early_stop_patience = p.is_null() ? std::nullopt : std::optional<int>(p.get<int>());
  }
  read_optional(j, "min_improvement", c.min_improvement, w);
  read_optional(j, "train_fraction", c.train_fraction, w);
}

void to_json(Json& j, const GenerateSpec& g) {
  j = Json{{"scene", g.scene}, {"motion", g.motion}, {"preprocess", g.preprocess}, {"label", g.label}};
}

void from_json(const Json& j, GenerateSpec& g) {
  require_keys(j, {"scene", "motion", "preprocess", "label"}, "generator");
  read_optional(j, "scene", g.scene, "generator");
  read_optional(j, "motion", g.motion, "generator");
  read_optional(j, "preprocess", g.preprocess, "generator");
  read_optional(j, "label", g.label, "generator");
}

}  // namespace vise::training
