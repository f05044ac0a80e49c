#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace vise {

class ImageError : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Row-major 8-bit single-channel raster.
class ImageBuffer {
public:
  ImageBuffer() = default;
  ImageBuffer(int width, int height, std::uint8_t fill = 0);
  ImageBuffer(int width, int height, std::vector<std::uint8_t> pixels);

  int width() const { return width_; }
  int height() const { return height_; }
  bool empty() const { return pixels_.empty(); }
  std::size_t size() const { return pixels_.size(); }

  std::uint8_t at(int x, int y) const { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }
  std::uint8_t& at(int x, int y) { return pixels_[static_cast<std::size_t>(y) * width_ + x]; }

  /// Edge-replicated read.
  std::uint8_t clamped(int x, int y) const;

  bool contains(int x, int y) const { return x >= 0 && y >= 0 && x < width_ && y < height_; }

  std::span<const std::uint8_t> pixels() const { return pixels_; }
  std::span<std::uint8_t> pixels() { return pixels_; }

  bool is_binary() const;
  std::size_t count_equal(std::uint8_t value) const;
  std::size_t count_nonzero() const;

  friend bool operator==(const ImageBuffer&, const ImageBuffer&) = default;

private:
  int width_ = 0;
  int height_ = 0;
  std::vector<std::uint8_t> pixels_;
};

/// ITU-R 601 luma, round-half-up.
std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b);

/// Binary PGM ("P5", maxval 255).
std::vector<std::uint8_t> encode_pgm(const ImageBuffer& image);

/// Decodes P5 (grayscale) or P6 (RGB, converted to luma) with maxval 255.
ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes);

void write_pgm(const std::filesystem::path& path, const ImageBuffer& image);
ImageBuffer read_pnm(const std::filesystem::path& path);

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);

}  // namespace vise
