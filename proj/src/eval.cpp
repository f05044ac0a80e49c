#include "vise/eval.hpp"

#include "vise/imgproc.hpp"
#include "vise/rng.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <sstream>

namespace vise::eval {

namespace {

constexpr std::uint64_t kNoiseSalt = 0x4e4f4953ULL;

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

std::vector<double> point_errors(const geometry::ShapeLabel& pred, const geometry::ShapeLabel& truth) {
  if (pred.representation != geometry::Representation::Points ||
      truth.representation != geometry::Representation::Points) {
    throw EvalError("point_errors needs two points labels");
  }
  if (pred.values.size() != truth.values.size() || pred.values.size() % 3 != 0) {
    throw EvalError("point label lengths differ: " + std::to_string(pred.values.size()) + " vs " +
                    std::to_string(truth.values.size()));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < pred.values.size(); i += 3) {
    const double dx = double{pred.values[i]} - truth.values[i];
    const double dy = double{pred.values[i + 1]} - truth.values[i + 1];
    const double dz = double{pred.values[i + 2]} - truth.values[i + 2];
    out.push_back(std::sqrt(dx * dx + dy * dy + dz * dz));
  }
  return out;
}

std::vector<double> pcc_errors(const geometry::ShapeLabel& pred, const geometry::ArmConfiguration& truth) {
  if (pred.representation != geometry::Representation::Pcc) throw EvalError("pcc_errors needs a PCC label");
  if (pred.values.size() != 2 * truth.size()) {
    throw EvalError("PCC label has " + std::to_string(pred.values.size()) + " values for " +
                    std::to_string(truth.size()) + " sections");
  }
  const auto lengths = truth.section_lengths();
  const auto predicted = geometry::fk_chain(geometry::config_from_pcc_label(pred, lengths));
  const auto actual = geometry::fk_chain(truth);
  std::vector<double> out;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    out.push_back((predicted[i].translation - actual[i].translation).norm());
  }
  return out;
}

std::vector<double> record_errors(const geometry::ShapeLabel& pred, const training::DatasetRecord& truth) {
  if (pred.representation == geometry::Representation::Pcc) return pcc_errors(pred, truth.config);
  return point_errors(pred, truth.label);
}

EvalReport aggregate(std::span<const std::vector<double>> errors, double scale,
                     geometry::Representation representation) {
  if (errors.empty()) throw EvalError("no samples to aggregate");
  if (!(scale > 0.0)) throw EvalError("scale must be positive");
  const std::size_t width = errors[0].size();
  EvalReport r;
  r.representation = representation;
  r.sample_count = errors.size();
  r.scale = scale;
  r.points.resize(width);
  for (std::size_t k = 0; k < width; ++k) {
    double sum = 0.0, mx = 0.0;
    for (const auto& row : errors) {
      if (row.size() != width) throw EvalError("error rows differ in length");
      sum += row[k];
      mx = std::max(mx, row[k]);
    }
    const double mean = sum / static_cast<double>(errors.size());
    double sq = 0.0;
    for (const auto& row : errors) sq += (row[k] - mean) * (row[k] - mean);
    auto& p = r.points[k];
    p.mean_mm = mean;
    p.std_mm = std::sqrt(sq / static_cast<double>(errors.size()));
    p.max_mm = mx;
    p.mean_pct = 100.0 * p.mean_mm / scale;
    p.std_pct = 100.0 * p.std_mm / scale;
    p.max_pct = 100.0 * p.max_mm / scale;
  }
  return r;
}

std::vector<geometry::ShapeLabel> predict_labels(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                                                 std::span<const std::array<ImageBuffer, 2>> inputs) {
  const auto out = training::predict(net, training::make_inputs(inputs));
  const std::size_t width = out.dim(1);
  std::vector<geometry::ShapeLabel> labels;
  for (std::size_t i = 0; i < out.dim(0); ++i) {
    labels.push_back(geometry::ShapeLabel::from_normalized(
        meta.representation, std::span<const float>(out.data() + i * width, width), meta.scale));
  }
  return labels;
}

namespace {

EvalReport evaluate_inputs(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                           std::span<const training::DatasetRecord> records,
                           std::span<const std::array<ImageBuffer, 2>> inputs) {
  const auto preds = predict_labels(net, meta, inputs);
  std::vector<std::vector<double>> errors;
  for (std::size_t i = 0; i < records.size(); ++i) errors.push_back(record_errors(preds[i], records[i]));
  return aggregate(errors, meta.scale, meta.representation);
}

}  // namespace

EvalReport evaluate(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                    std::span<const training::DatasetRecord> records) {
  if (records.empty()) throw EvalError("no records to evaluate");
  std::vector<std::array<ImageBuffer, 2>> inputs;
  for (const auto& r : records) inputs.push_back(r.input);
  return evaluate_inputs(net, meta, records, inputs);
}

std::string to_string(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::Brightness: return "brightness";
    case SweepAxis::Noise: return "noise";
    case SweepAxis::Occlusion: return "occlusion";
  }
  return "unknown";
}

SweepAxis sweep_axis_from_string(const std::string& name) {
  if (name == "brightness") return SweepAxis::Brightness;
  if (name == "noise") return SweepAxis::Noise;
  if (name == "occlusion") return SweepAxis::Occlusion;
  throw EvalError("unknown sweep axis '" + name + "' (expected brightness, noise or occlusion)");
}

ImageBuffer perturb(const ImageBuffer& raw, SweepAxis axis, double value, const camera::CameraModel& camera,
                    const geometry::ArmConfiguration& config, std::size_t marker, std::uint64_t noise_seed) {
  switch (axis) {
    case SweepAxis::Brightness: {
      const double rounded = std::round(value);
      if (rounded != value || std::abs(value) > 255) throw EvalError("brightness offsets must be integers in [-255, 255]");
      return render::perturb_brightness(raw, static_cast<int>(rounded));
    }
    case SweepAxis::Noise:
      if (!(value >= 0.0)) throw EvalError("noise standard deviation must be non-negative");
      return render::perturb_gaussian(raw, value, noise_seed);
    case SweepAxis::Occlusion: {
      const double rounded = std::round(value);
      if (rounded != value || value < 0) throw EvalError("occlusion widths must be non-negative integers");
      return render::perturb_occlusion(raw, camera, config, marker, static_cast<int>(rounded));
    }
  }
  return raw;
}

std::vector<EvalReport> sweep(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                              std::span<const training::DatasetRecord> records, const SweepSpec& spec) {
  if (records.empty()) throw EvalError("no records to sweep");
  if (spec.values.empty()) throw EvalError("sweep needs at least one value");
  std::vector<EvalReport> reports;
  for (double value : spec.values) {
    std::vector<std::array<ImageBuffer, 2>> inputs;
    for (const auto& r : records) {
      std::array<ImageBuffer, 2> pair;
      for (int cam = 0; cam < 2; ++cam) {
        const auto seed = stream_seed(spec.seed, 2 * r.id + static_cast<std::uint64_t>(cam), kNoiseSalt);
        const auto view =
            perturb(r.raw[cam], spec.axis, value, meta.cameras[cam], r.config, spec.occlusion_marker, seed);
        pair[cam] = imgproc::preprocess(view, meta.preprocess, cam);
      }
      inputs.push_back(std::move(pair));
    }
    auto report = evaluate_inputs(net, meta, records, inputs);
    report.axis = to_string(spec.axis);
    report.value = value;
    reports.push_back(std::move(report));
  }
  return reports;
}

LatencyReport latency_profile(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                              const std::array<std::filesystem::path, 2>& images, int repeats) {
  if (repeats < 10) throw EvalError("latency profiling needs at least 10 repeats");
  using clock = std::chrono::steady_clock;
  auto ms = [](clock::duration d) { return std::chrono::duration<double, std::milli>(d).count(); };
  std::vector<double> load, prep, fwd;
  for (int i = 0; i < repeats; ++i) {
    const auto t0 = clock::now();
    std::array<ImageBuffer, 2> raw{read_pnm(images[0]), read_pnm(images[1])};
    const auto t1 = clock::now();
    std::array<std::array<ImageBuffer, 2>, 1> pair{
        {{imgproc::preprocess(raw[0], meta.preprocess, 0), imgproc::preprocess(raw[1], meta.preprocess, 1)}}};
    const auto t2 = clock::now();
    const auto y = net.infer(training::make_inputs(pair));
    const auto t3 = clock::now();
    if (!y.all_finite()) throw EvalError("non-finite network output");
    load.push_back(ms(t1 - t0));
    prep.push_back(ms(t2 - t1));
    fwd.push_back(ms(t3 - t2));
  }
  LatencyReport r;
  r.repeats = repeats;
  r.load_ms = median(load);
  r.preprocess_ms = median(prep);
  r.forward_ms = median(fwd);
  r.total_ms = r.load_ms + r.preprocess_ms + r.forward_ms;
  r.hz = r.total_ms > 0.0 ? 1000.0 / r.total_ms : 0.0;
  if (r.total_ms > 0.0) {
    r.load_pct = 100.0 * r.load_ms / r.total_ms;
    r.preprocess_pct = 100.0 * r.preprocess_ms / r.total_ms;
    r.forward_pct = 100.0 * r.forward_ms / r.total_ms;
  }
  return r;
}

std::string reports_csv(std::span<const EvalReport> reports) {
  std::ostringstream os;
  os << "axis,value,point,is_tip,samples,mean_mm,std_mm,max_mm,mean_pct,std_pct,max_pct\n";
  char buf[320];
  for (const auto& r : reports) {
    for (std::size_t k = 0; k < r.points.size(); ++k) {
      const auto& p = r.points[k];
      std::snprintf(buf, sizeof buf, "%s,%.17g,%zu,%d,%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n",
                    r.axis.empty() ? "none" : r.axis.c_str(), r.value, k + 1, k + 1 == r.points.size() ? 1 : 0,
                    r.sample_count, p.mean_mm, p.std_mm, p.max_mm, p.mean_pct, p.std_pct, p.max_pct);
      os << buf;
    }
  }
  return os.str();
}

Json report_json(const EvalReport& r) {
  Json points = Json::array();
  for (const auto& p : r.points) {
    points.push_back({{"mean_mm", p.mean_mm}, {"std_mm", p.std_mm}, {"max_mm", p.max_mm},
                      {"mean_pct", p.mean_pct}, {"std_pct", p.std_pct}, {"max_pct", p.max_pct}});
  }
  Json j{{"representation", geometry::to_string(r.representation)},
         {"samples", r.sample_count},
         {"scale_mm", r.scale},
         {"points", points},
         {"tip", points.back()}};
  if (!r.axis.empty()) {
    j["axis"] = r.axis;
    j["value"] = r.value;
  }
  return j;
}

Json latency_json(const LatencyReport& r) {
  return Json{{"repeats", r.repeats},       {"load_ms", r.load_ms},         {"preprocess_ms", r.preprocess_ms},
              {"forward_ms", r.forward_ms}, {"total_ms", r.total_ms},       {"hz", r.hz},
              {"load_pct", r.load_pct},     {"preprocess_pct", r.preprocess_pct}, {"forward_pct", r.forward_pct}};
}

}  // namespace vise::eval
