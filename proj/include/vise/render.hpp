#pragma once

// Synthetic stereo silhouettes of a PCC arm, plus the image perturbations
// used by the robustness sweeps.

#include "vise/camera.hpp"
#include "vise/geometry.hpp"
#include "vise/image.hpp"

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace vise::render {

class RenderError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Stripe {
  double arc_fraction = 0.5;  // station along the backbone, 0 = base, 1 = tip
  double width_mm = 10.0;
  std::uint8_t intensity = 0;
};

struct RobotAppearance {
  double radius_base = 20.0;  // mm
  double radius_tip = 20.0;   // mm, linear taper along arc length
  std::uint8_t body_intensity = 200;
  std::uint8_t background_intensity = 40;
  std::vector<Stripe> stripes;

  void validate() const;
  double radius_at(double arc_fraction) const { return radius_base + (radius_tip - radius_base) * arc_fraction; }
};

/// Evenly spaced stripes (at fractions (k + 0.5) / count) painted in the
/// background intensity.
std::vector<Stripe> even_stripes(std::size_t count, double width_mm, std::uint8_t intensity);

struct SceneSpec {
  std::array<camera::CameraModel, 2> cameras;
  RobotAppearance appearance;
  std::size_t clutter_blob_count = 0;
  std::uint64_t clutter_seed = 0;
  std::size_t samples_per_section = 200;

  void validate() const;
};

ImageBuffer render_view(const SceneSpec& scene, int camera_index, const geometry::ArmConfiguration& config);

/// Background plus clutter only; what render_view draws before the robot.
ImageBuffer render_background(const SceneSpec& scene, int camera_index);

ImageBuffer perturb_brightness(const ImageBuffer& image, int offset);

ImageBuffer perturb_gaussian(const ImageBuffer& image, double stddev, std::uint64_t seed);

/// Full-height black strip centered on the projected column of section
/// endpoint `key_point_index` (0-based: index 1 is "marker 2").
ImageBuffer perturb_occlusion(const ImageBuffer& image, const camera::CameraModel& camera,
                              const geometry::ArmConfiguration& config, std::size_t key_point_index,
                              int strip_width_px);

/// Pixel containing a projected point (pixel centers sit on integers).
inline int pixel_index(double coordinate) { return static_cast<int>(std::floor(coordinate + 0.5)); }

}  // namespace vise::render
