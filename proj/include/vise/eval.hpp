#pragma once

// Error metrics, evaluation reports, robustness sweeps and latency timing.

#include "vise/checkpoint.hpp"
#include "vise/geometry.hpp"
#include "vise/nn/network.hpp"
#include "vise/render.hpp"
#include "vise/training.hpp"

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vise::eval {

class EvalError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Euclidean distance per key point, base to tip. Both labels must be Points.
std::vector<double> point_errors(const geometry::ShapeLabel& pred, const geometry::ShapeLabel& truth);

/// Section-endpoint errors of a PCC prediction: endpoints are rebuilt with
/// fk_chain using the truth's section lengths, so errors accumulate along
/// the arm. Negative predicted curvature is read as (|k|, phi + pi).
std::vector<double> pcc_errors(const geometry::ShapeLabel& pred, const geometry::ArmConfiguration& truth);

/// Errors for one record in the representation of `pred`.
std::vector<double> record_errors(const geometry::ShapeLabel& pred, const training::DatasetRecord& truth);

struct PointStats {
  double mean_mm = 0.0;
  double std_mm = 0.0;  // population standard deviation
  double max_mm = 0.0;
  double mean_pct = 0.0;
  double std_pct = 0.0;
  double max_pct = 0.0;
};

struct EvalReport {
  geometry::Representation representation = geometry::Representation::Points;
  std::size_t sample_count = 0;
  double scale = 1.0;
  std::vector<PointStats> points;  // base to tip
  std::string axis;                // empty for a plain evaluation
  double value = 0.0;

  const PointStats& tip() const { return points.back(); }
};

/// Aggregates per-sample error rows (all the same length) into a report.
EvalReport aggregate(std::span<const std::vector<double>> errors, double scale,
                     geometry::Representation representation);

/// Denormalized predictions for preprocessed image pairs.
std::vector<geometry::ShapeLabel> predict_labels(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                                                 std::span<const std::array<ImageBuffer, 2>> inputs);

EvalReport evaluate(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                    std::span<const training::DatasetRecord> records);

enum class SweepAxis { Brightness, Noise, Occlusion };

std::string to_string(SweepAxis axis);
SweepAxis sweep_axis_from_string(const std::string& name);

struct SweepSpec {
  SweepAxis axis = SweepAxis::Brightness;
  std::vector<double> values;
  std::size_t occlusion_marker = 1;  // 0-based section endpoint ("marker 2")
  std::uint64_t seed = 0;            // noise stream
};

/// Perturbs each record's raw views, reruns preprocessing, and evaluates.
/// The identity perturbation reproduces evaluate() exactly.
std::vector<EvalReport> sweep(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                              std::span<const training::DatasetRecord> records, const SweepSpec& spec);

/// Applies one sweep perturbation to a raw view.
ImageBuffer perturb(const ImageBuffer& raw, SweepAxis axis, double value, const camera::CameraModel& camera,
                    const geometry::ArmConfiguration& config, std::size_t marker, std::uint64_t noise_seed);

struct LatencyReport {
  int repeats = 0;
  double load_ms = 0.0;  // medians
  double preprocess_ms = 0.0;
  double forward_ms = 0.0;
  double total_ms = 0.0;
  double hz = 0.0;
  double load_pct = 0.0;
  double preprocess_pct = 0.0;
  double forward_pct = 0.0;
};

/// Times load (PNM decode from disk), preprocessing and the forward pass.
LatencyReport latency_profile(const nn::VggSBn& net, const checkpoint::Metadata& meta,
                              const std::array<std::filesystem::path, 2>& images, int repeats);

/// One row per point per report: axis,value,point,... with the tip last.
std::string reports_csv(std::span<const EvalReport> reports);
Json report_json(const EvalReport& report);
Json latency_json(const LatencyReport& report);

}  // namespace vise::eval
