#include "vise/render.hpp"

#include "vise/rng.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

namespace vise::render {

namespace {

constexpr std::uint64_t kClutterSalt = 0xc1077e4ULL;

std::uint8_t clamp_pixel(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0)); }

void fill_disk(ImageBuffer& img, double u, double v, double radius, std::uint8_t value) {
  const int x0 = std::max(0, static_cast<int>(std::floor(u - radius)));
  const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(u + radius)));
  const int y0 = std::max(0, static_cast<int>(std::floor(v - radius)));
  const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(v + radius)));
  const double r2 = radius * radius;
  for (int y = y0; y <= y1; ++y) {
    for (int x = x0; x <= x1; ++x) {
      const double dx = x - u;
      const double dy = y - v;
      if (dx * dx + dy * dy <= r2) img.at(x, y) = value;
    }
  }
  const int cx = pixel_index(u);
  const int cy = pixel_index(v);
  if (img.contains(cx, cy)) img.at(cx, cy) = value;
}

struct ProjectedSample {
  Eigen::Vector2d pixel;
  double radius_px;
  double arc_length;
};

std::vector<ProjectedSample> project_backbone(const SceneSpec& scene, int camera_index,
                                              const geometry::ArmConfiguration& config) {
  const auto& cam = scene.cameras[static_cast<std::size_t>(camera_index)];
  const auto points = geometry::sample_backbone(config, scene.samples_per_section);
  const double total = config.total_length();
  std::vector<ProjectedSample> out;
  out.reserve(points.size());
  // Arc length of sample j: section index and local fraction follow from the
  // sampling layout (n - 1 steps per section after the base point).
  const auto lengths = config.section_lengths();
  const std::size_t steps = scene.samples_per_section - 1;
  std::size_t section = 0;
  double start = 0.0;
  for (std::size_t j = 0; j < points.size(); ++j) {
    double arc = 0.0;
    if (j > 0) {
      section = (j - 1) / steps;
      start = 0.0;
      for (std::size_t i = 0; i < section; ++i) start += lengths[i];
      const std::size_t k = (j - 1) % steps + 1;
      arc = start + lengths[section] * static_cast<double>(k) / static_cast<double>(steps);
    }
    const Eigen::Vector3d pc = cam.to_camera(points[j]);
    if (!(pc.z() > 1e-9)) throw RenderError("robot outside view frustum");
    const double radius = scene.appearance.radius_at(arc / total);
    out.push_back({camera::project_camera_frame(cam.intrinsics, pc), cam.intrinsics.fx * radius / pc.z(), arc});
  }
  return out;
}

}  // namespace

void RobotAppearance::validate() const {
  if (!(radius_base > 0.0) || !(radius_tip > 0.0)) throw RenderError("robot radii must be positive");
  if (std::abs(int{body_intensity} - int{background_intensity}) < 30) {
    throw RenderError("body and background intensity must differ by at least 30");
  }
  for (const auto& s : stripes) {
    if (s.arc_fraction < 0.0 || s.arc_fraction > 1.0 || !(s.width_mm > 0.0)) {
      throw RenderError("stripe needs arc fraction in [0, 1] and positive width");
    }
  }
}

std::vector<Stripe> even_stripes(std::size_t count, double width_mm, std::uint8_t intensity) {
  std::vector<Stripe> out;
  for (std::size_t k = 0; k < count; ++k) {
    out.push_back({(static_cast<double>(k) + 0.5) / static_cast<double>(count), width_mm, intensity});
  }
  return out;
}

void SceneSpec::validate() const {
  for (const auto& cam : cameras) cam.intrinsics.validate();
  appearance.validate();
  if (samples_per_section < 2) throw RenderError("samples_per_section must be at least 2");
}

ImageBuffer render_background(const SceneSpec& scene, int camera_index) {
  if (camera_index != 0 && camera_index != 1) throw RenderError("camera index must be 0 or 1");
  const auto& k = scene.cameras[static_cast<std::size_t>(camera_index)].intrinsics;
  const auto& look = scene.appearance;
  ImageBuffer img(k.width, k.height, look.background_intensity);

  Rng rng(stream_seed(scene.clutter_seed, static_cast<std::uint64_t>(camera_index), kClutterSalt));
  const double max_axis = std::max(2.0, std::min(k.width, k.height) / 24.0);
  const double span = double{look.body_intensity} - double{look.background_intensity};
  for (std::size_t b = 0; b < scene.clutter_blob_count; ++b) {
    const double cx = rng.uniform(0.0, k.width);
    const double cy = rng.uniform(0.0, k.height);
    const double a = rng.uniform(1.5, max_axis);
    const double c = rng.uniform(1.5, max_axis);
    const double angle = rng.uniform(0.0, std::numbers::pi);
    const auto value = clamp_pixel(look.background_intensity + (0.25 + 0.25 * rng.uniform()) * span);
    const double ca = std::cos(angle);
    const double sa = std::sin(angle);
    const double reach = std::max(a, c);
    const int x0 = std::max(0, static_cast<int>(std::floor(cx - reach)));
    const int x1 = std::min(k.width - 1, static_cast<int>(std::ceil(cx + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(cy - reach)));
    const int y1 = std::min(k.height - 1, static_cast<int>(std::ceil(cy + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const double dx = x - cx;
        const double dy = y - cy;
        const double p = (ca * dx + sa * dy) / a;
        const double q = (-sa * dx + ca * dy) / c;
        if (p * p + q * q <= 1.0) img.at(x, y) = value;
      }
    }
  }
  return img;
}

ImageBuffer render_view(const SceneSpec& scene, int camera_index, const geometry::ArmConfiguration& config) {
  scene.validate();
  ImageBuffer img = render_background(scene, camera_index);
  const auto samples = project_backbone(scene, camera_index, config);
  const auto& look = scene.appearance;

  for (const auto& s : samples) fill_disk(img, s.pixel.x(), s.pixel.y(), s.radius_px, look.body_intensity);

  if (look.stripes.empty()) return img;
  const auto& cam = scene.cameras[static_cast<std::size_t>(camera_index)];
  const double total = config.total_length();
  for (const auto& stripe : look.stripes) {
    const double center_arc = stripe.arc_fraction * total;
    const double half = 0.5 * stripe.width_mm;
    const double delta = std::min(0.5, 0.25 * total);
    const Eigen::Vector3d center = cam.to_camera(geometry::backbone_point(config, center_arc));
    const Eigen::Vector2d c = camera::project_camera_frame(cam.intrinsics, center);
    const Eigen::Vector2d ahead = camera::project(cam, geometry::backbone_point(config, center_arc + delta));
    const Eigen::Vector2d behind = camera::project(cam, geometry::backbone_point(config, center_arc - delta));
    Eigen::Vector2d tangent = ahead - behind;
    const bool end_on = tangent.norm() < 1e-9;
    if (!end_on) tangent.normalize();
    const double half_px = cam.intrinsics.fx * half / center.z();

    for (const auto& s : samples) {
      const double reach = look.radius_at(s.arc_length / total);
      if (std::abs(s.arc_length - center_arc) > half + reach) continue;
      const double r = s.radius_px;
      const int x0 = std::max(0, static_cast<int>(std::floor(s.pixel.x() - r)));
      const int x1 = std::min(img.width() - 1, static_cast<int>(std::ceil(s.pixel.x() + r)));
      const int y0 = std::max(0, static_cast<int>(std::floor(s.pixel.y() - r)));
      const int y1 = std::min(img.height() - 1, static_cast<int>(std::ceil(s.pixel.y() + r)));
      for (int y = y0; y <= y1; ++y) {
        for (int x = x0; x <= x1; ++x) {
          const double dx = x - s.pixel.x();
          const double dy = y - s.pixel.y();
          if (dx * dx + dy * dy > r * r) continue;
          const double along = end_on ? 0.0 : (Eigen::Vector2d(x, y) - c).dot(tangent);
          if (std::abs(along) <= half_px) img.at(x, y) = stripe.intensity;
        }
      }
    }
  }
  return img;
}

ImageBuffer perturb_brightness(const ImageBuffer& image, int offset) {
  ImageBuffer out = image;
  for (auto& p : out.pixels()) p = static_cast<std::uint8_t>(std::clamp(int{p} + offset, 0, 255));
  return out;
}

ImageBuffer perturb_gaussian(const ImageBuffer& image, double stddev, std::uint64_t seed) {
  if (stddev < 0.0) throw RenderError("noise standard deviation must be non-negative");
  if (stddev == 0.0) return image;
  ImageBuffer out = image;
  Rng rng(seed);
  for (auto& p : out.pixels()) p = clamp_pixel(p + rng.normal(0.0, stddev));
  return out;
}

ImageBuffer perturb_occlusion(const ImageBuffer& image, const camera::CameraModel& camera,
                              const geometry::ArmConfiguration& config, std::size_t key_point_index,
                              int strip_width_px) {
  if (strip_width_px < 0) throw RenderError("strip width must be non-negative");
  if (key_point_index >= config.size()) {
    throw RenderError("key point index " + std::to_string(key_point_index) + " out of range");
  }
  const Eigen::Vector3d marker = geometry::fk_chain(config)[key_point_index].translation;
  const Eigen::Vector2d px = camera::project(camera, marker);
  if (strip_width_px == 0) return image;
  ImageBuffer out = image;
  const int first = pixel_index(px.x()) - strip_width_px / 2;
  const int x0 = std::max(0, first);
  const int x1 = std::min(out.width(), first + strip_width_px);
  for (int y = 0; y < out.height(); ++y) {
    for (int x = x0; x < x1; ++x) out.at(x, y) = 0;
  }
  return out;
}

}  // namespace vise::render
