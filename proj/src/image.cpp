#include "vise/image.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iterator>

namespace vise {

ImageBuffer::ImageBuffer(int width, int height, std::uint8_t fill) : width_(width), height_(height) {
  if (width <= 0 || height <= 0) throw ImageError("image dimensions must be positive");
  pixels_.assign(static_cast<std::size_t>(width) * height, fill);
}

ImageBuffer::ImageBuffer(int width, int height, std::vector<std::uint8_t> pixels)
    : width_(width), height_(height), pixels_(std::move(pixels)) {
  if (width <= 0 || height <= 0) throw ImageError("image dimensions must be positive");
  if (pixels_.size() != static_cast<std::size_t>(width) * height) {
    throw ImageError("pixel count does not match image dimensions");
  }
}

std::uint8_t ImageBuffer::clamped(int x, int y) const {
  return at(std::clamp(x, 0, width_ - 1), std::clamp(y, 0, height_ - 1));
}

bool ImageBuffer::is_binary() const {
  return std::all_of(pixels_.begin(), pixels_.end(), [](std::uint8_t p) { return p == 0 || p == 255; });
}

std::size_t ImageBuffer::count_equal(std::uint8_t value) const {
  return static_cast<std::size_t>(std::count(pixels_.begin(), pixels_.end(), value));
}

std::size_t ImageBuffer::count_nonzero() const { return pixels_.size() - count_equal(0); }

std::uint8_t luminance(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
  // Integer form of 0.299 R + 0.587 G + 0.114 B with round-half-up.
  const unsigned weighted = 299u * r + 587u * g + 114u * b;
  return static_cast<std::uint8_t>((weighted + 500u) / 1000u);
}

std::vector<std::uint8_t> encode_pgm(const ImageBuffer& image) {
  const std::string header =
      "P5\n" + std::to_string(image.width()) + " " + std::to_string(image.height()) + "\n255\n";
  std::vector<std::uint8_t> out(header.begin(), header.end());
  out.insert(out.end(), image.pixels().begin(), image.pixels().end());
  return out;
}

namespace {

class HeaderReader {
public:
  explicit HeaderReader(std::span<const std::uint8_t> bytes) : bytes_(bytes) {}

  int next_int() {
    skip_space_and_comments();
    long value = 0;
    std::size_t digits = 0;
    while (pos_ < bytes_.size() && std::isdigit(bytes_[pos_])) {
      value = value * 10 + (bytes_[pos_] - '0');
      if (value > 1'000'000) throw ImageError("PNM header value out of range");
      ++pos_;
      ++digits;
    }
    if (digits == 0) throw ImageError("malformed PNM header");
    return static_cast<int>(value);
  }

  std::string magic() {
    if (bytes_.size() < 2) throw ImageError("truncated PNM file");
    pos_ = 2;
    return {static_cast<char>(bytes_[0]), static_cast<char>(bytes_[1])};
  }

  // Exactly one whitespace byte separates maxval from the raster.
  std::size_t raster_start() {
    if (pos_ >= bytes_.size() || !std::isspace(bytes_[pos_])) throw ImageError("malformed PNM header");
    return pos_ + 1;
  }

private:
  void skip_space_and_comments() {
    while (pos_ < bytes_.size()) {
      if (std::isspace(bytes_[pos_])) {
        ++pos_;
      } else if (bytes_[pos_] == '#') {
        while (pos_ < bytes_.size() && bytes_[pos_] != '\n') ++pos_;
      } else {
        break;
      }
    }
  }

  std::span<const std::uint8_t> bytes_;
  std::size_t pos_ = 0;
};

}  // namespace

ImageBuffer decode_pnm(std::span<const std::uint8_t> bytes) {
  HeaderReader reader(bytes);
  const std::string magic = reader.magic();
  if (magic != "P5" && magic != "P6") throw ImageError("unsupported image format '" + magic + "' (need P5 or P6)");
  const int width = reader.next_int();
  const int height = reader.next_int();
  const int maxval = reader.next_int();
  if (maxval != 255) throw ImageError("only maxval 255 images are supported");
  const std::size_t start = reader.raster_start();
  const std::size_t channels = magic == "P6" ? 3 : 1;
  const std::size_t needed = static_cast<std::size_t>(width) * height * channels;
  if (bytes.size() < start + needed) throw ImageError("truncated PNM raster");

  std::vector<std::uint8_t> pixels(static_cast<std::size_t>(width) * height);
  if (channels == 1) {
    std::copy_n(bytes.begin() + static_cast<std::ptrdiff_t>(start), needed, pixels.begin());
  } else {
    for (std::size_t i = 0; i < pixels.size(); ++i) {
      const std::size_t o = start + 3 * i;
      pixels[i] = luminance(bytes[o], bytes[o + 1], bytes[o + 2]);
    }
  }
  return ImageBuffer(width, height, std::move(pixels));
}

std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ImageError("cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

void write_pgm(const std::filesystem::path& path, const ImageBuffer& image) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ImageError("cannot write " + path.string());
  const auto bytes = encode_pgm(image);
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw ImageError("failed writing " + path.string());
}

ImageBuffer read_pnm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  return decode_pnm(bytes);
}

}  // namespace vise
