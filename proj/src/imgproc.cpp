#include "vise/imgproc.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

namespace vise::imgproc {

namespace {

void require_odd(int kernel, const char* what) {
  if (kernel < 1 || kernel % 2 == 0) throw ImgprocError(std::string(what) + " must be a positive odd size");
}

// Resampling weights for one axis: dst[i] = sum_j w(i, j) * src[j].
struct AxisWeights {
  std::vector<int> first;
  std::vector<std::vector<double>> weights;
};

AxisWeights axis_weights(int src, int dst) {
  AxisWeights out;
  out.first.resize(static_cast<std::size_t>(dst));
  out.weights.resize(static_cast<std::size_t>(dst));
  if (dst < src) {
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
      const double lo = i * scale;
      const double hi = (i + 1) * scale;
      const int j0 = static_cast<int>(std::floor(lo));
      const int j1 = std::min(src - 1, static_cast<int>(std::ceil(hi)) - 1);
      out.first[i] = j0;
      for (int j = j0; j <= j1; ++j) {
        const double overlap = std::min(hi, j + 1.0) - std::max(lo, static_cast<double>(j));
        out.weights[i].push_back(overlap / scale);
      }
    }
  } else {
    const double scale = static_cast<double>(src) / dst;
    for (int i = 0; i < dst; ++i) {
      const double pos = std::clamp((i + 0.5) * scale - 0.5, 0.0, static_cast<double>(src - 1));
      const int j0 = std::min(static_cast<int>(std::floor(pos)), src - 1);
      const double frac = pos - j0;
      out.first[i] = j0;
      if (j0 + 1 < src && frac > 0.0) {
        out.weights[i] = {1.0 - frac, frac};
      } else {
        out.weights[i] = {1.0};
      }
    }
  }
  return out;
}

std::uint8_t quantize(double v) {
  return static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5 + 1e-9), 0.0, 255.0));
}

void require_binary(const ImageBuffer& image) {
  if (!image.is_binary()) throw ImgprocError("morphology needs a binary {0, 255} image");
}

// One pass of a k x k min (erode) or max (dilate) with edge replication,
// computed separably.
ImageBuffer morph_pass(const ImageBuffer& in, int kernel, bool take_max) {
  const int r = kernel / 2;
  const int w = in.width();
  const int h = in.height();
  ImageBuffer tmp(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = take_max ? 0 : 255;
      for (int d = -r; d <= r; ++d) {
        const std::uint8_t p = in.clamped(x + d, y);
        v = take_max ? std::max(v, p) : std::min(v, p);
      }
      tmp.at(x, y) = v;
    }
  }
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      std::uint8_t v = take_max ? 0 : 255;
      for (int d = -r; d <= r; ++d) {
        const std::uint8_t p = tmp.clamped(x, y + d);
        v = take_max ? std::max(v, p) : std::min(v, p);
      }
      out.at(x, y) = v;
    }
  }
  return out;
}

}  // namespace

void PreprocessSpec::validate() const {
  if (target_size <= 0 || target_size % 32 != 0) {
    throw ImgprocError("target size must be a positive multiple of 32, got " + std::to_string(target_size));
  }
  require_odd(median_kernel, "median kernel");
  require_odd(morph_kernel, "morphology kernel");
  require_odd(threshold_block, "threshold block");
  if (threshold_block < 3) throw ImgprocError("threshold block must be at least 3");
  if (morph_iterations < 0) throw ImgprocError("morphology iterations must be non-negative");
  for (const auto& r : crops) {
    if (r.width <= 0 || r.height <= 0 || r.x < 0 || r.y < 0) throw ImgprocError("crop rectangles must be non-empty");
  }
}

ImageBuffer crop(const ImageBuffer& image, const Rect& rect) {
  if (rect.width <= 0 || rect.height <= 0) throw ImgprocError("crop rectangle has zero area");
  if (rect.x < 0 || rect.y < 0 || rect.x + rect.width > image.width() || rect.y + rect.height > image.height()) {
    throw ImgprocError("crop rectangle outside image bounds");
  }
  ImageBuffer out(rect.width, rect.height);
  for (int y = 0; y < rect.height; ++y) {
    for (int x = 0; x < rect.width; ++x) out.at(x, y) = image.at(rect.x + x, rect.y + y);
  }
  return out;
}

ImageBuffer resize(const ImageBuffer& image, int target) {
  if (target <= 0) throw ImgprocError("resize target must be positive");
  if (image.width() == target && image.height() == target) return image;
  const auto wx = axis_weights(image.width(), target);
  const auto wy = axis_weights(image.height(), target);

  std::vector<double> rows(static_cast<std::size_t>(image.height()) * target);
  for (int y = 0; y < image.height(); ++y) {
    for (int i = 0; i < target; ++i) {
      double acc = 0.0;
      const auto& w = wx.weights[i];
      for (std::size_t k = 0; k < w.size(); ++k) acc += w[k] * image.at(wx.first[i] + static_cast<int>(k), y);
      rows[static_cast<std::size_t>(y) * target + i] = acc;
    }
  }
  ImageBuffer out(target, target);
  for (int i = 0; i < target; ++i) {
    for (int x = 0; x < target; ++x) {
      double acc = 0.0;
      const auto& w = wy.weights[i];
      for (std::size_t k = 0; k < w.size(); ++k) {
        acc += w[k] * rows[static_cast<std::size_t>(wy.first[i] + static_cast<int>(k)) * target + x];
      }
      out.at(x, i) = quantize(acc);
    }
  }
  return out;
}

ImageBuffer median_filter(const ImageBuffer& image, int kernel) {
  require_odd(kernel, "median kernel");
  const int r = kernel / 2;
  const std::size_t n = static_cast<std::size_t>(kernel) * kernel;
  std::vector<std::uint8_t> window(n);
  ImageBuffer out(image.width(), image.height());
  for (int y = 0; y < image.height(); ++y) {
    for (int x = 0; x < image.width(); ++x) {
      std::size_t k = 0;
      for (int dy = -r; dy <= r; ++dy) {
        for (int dx = -r; dx <= r; ++dx) window[k++] = image.clamped(x + dx, y + dy);
      }
      std::nth_element(window.begin(), window.begin() + static_cast<std::ptrdiff_t>(n / 2), window.end());
      out.at(x, y) = window[n / 2];
    }
  }
  return out;
}

ImageBuffer adaptive_threshold(const ImageBuffer& image, int block, int c) {
  require_odd(block, "threshold block");
  if (block < 3) throw ImgprocError("threshold block must be at least 3");
  const int r = block / 2;
  const int w = image.width();
  const int h = image.height();
  const int pw = w + 2 * r;
  const int ph = h + 2 * r;
  // Integral image of the edge-replicated padding, with a zero first row/column.
  std::vector<std::int64_t> integral(static_cast<std::size_t>(pw + 1) * (ph + 1), 0);
  auto at = [&](int x, int y) -> std::int64_t& { return integral[static_cast<std::size_t>(y) * (pw + 1) + x]; };
  for (int y = 0; y < ph; ++y) {
    std::int64_t row = 0;
    for (int x = 0; x < pw; ++x) {
      row += image.clamped(x - r, y - r);
      at(x + 1, y + 1) = at(x + 1, y) + row;
    }
  }
  const std::int64_t count = static_cast<std::int64_t>(block) * block;
  ImageBuffer out(w, h);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      // Padded window for pixel (x, y) spans [x, x + block) x [y, y + block).
      const std::int64_t sum = at(x + block, y + block) - at(x, y + block) - at(x + block, y) + at(x, y);
      const std::int64_t lhs = count * (static_cast<std::int64_t>(image.at(x, y)) + c);
      out.at(x, y) = lhs > sum ? 255 : 0;
    }
  }
  return out;
}

ImageBuffer erode(const ImageBuffer& binary, int kernel, int iterations) {
  require_odd(kernel, "morphology kernel");
  require_binary(binary);
  ImageBuffer out = binary;
  for (int i = 0; i < iterations; ++i) out = morph_pass(out, kernel, false);
  return out;
}

ImageBuffer dilate(const ImageBuffer& binary, int kernel, int iterations) {
  require_odd(kernel, "morphology kernel");
  require_binary(binary);
  ImageBuffer out = binary;
  for (int i = 0; i < iterations; ++i) out = morph_pass(out, kernel, true);
  return out;
}

ImageBuffer preprocess(const ImageBuffer& image, const PreprocessSpec& spec, int camera_index) {
  spec.validate();
  if (camera_index != 0 && camera_index != 1) throw ImgprocError("camera index must be 0 or 1");
  ImageBuffer img = crop(image, spec.crops[static_cast<std::size_t>(camera_index)]);
  img = resize(img, spec.target_size);
  img = median_filter(img, spec.median_kernel);
  img = adaptive_threshold(img, spec.threshold_block, spec.threshold_c);
  img = erode(img, spec.morph_kernel, spec.morph_iterations);
  return dilate(img, spec.morph_kernel, spec.morph_iterations);
}

}  // namespace vise::imgproc
