#pragma once

// Binary network-input preprocessing: crop, resize, median filter, adaptive
// threshold, then an opening (erosion followed by dilation).

#include "vise/image.hpp"

#include <array>
#include <stdexcept>

namespace vise::imgproc {

class ImgprocError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

struct Rect {
  int x = 0;
  int y = 0;
  int width = 0;
  int height = 0;

  friend bool operator==(const Rect&, const Rect&) = default;
};

struct PreprocessSpec {
  std::array<Rect, 2> crops;  // per camera, in source pixels
  int target_size = 256;
  int median_kernel = 7;
  int threshold_block = 31;
  int threshold_c = 5;
  int morph_kernel = 7;
  int morph_iterations = 3;

  /// Checks sizes and kernels; crops are checked against the image in preprocess.
  void validate() const;
};

ImageBuffer crop(const ImageBuffer& image, const Rect& rect);

/// Square resize: area averaging when shrinking an axis, bilinear
/// (half-pixel centers) when enlarging it, round-half-up quantization.
ImageBuffer resize(const ImageBuffer& image, int target);

ImageBuffer median_filter(const ImageBuffer& image, int kernel);

/// 255 where pixel > mean(block x block, edge-replicated) - c, else 0.
/// Evaluated in exact integer arithmetic.
ImageBuffer adaptive_threshold(const ImageBuffer& image, int block, int c);

ImageBuffer erode(const ImageBuffer& binary, int kernel, int iterations = 1);
ImageBuffer dilate(const ImageBuffer& binary, int kernel, int iterations = 1);

/// crop -> resize -> median -> adaptive threshold -> erode^n -> dilate^n.
ImageBuffer preprocess(const ImageBuffer& image, const PreprocessSpec& spec, int camera_index);

}  // namespace vise::imgproc
