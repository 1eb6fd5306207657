#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace jsnreg {

// 2D grayscale intensity grid, row-major, intensities in [0, 1].
// resolution_mm is the spatial resolution in mm per pixel.
struct JointImage {
  int width = 0;
  int height = 0;
  std::vector<double> pixels;
  double resolution_mm = 1.0;
  std::string identity;

  double at(int x, int y) const { return pixels[std::size_t(y) * width + x]; }
  double& at(int x, int y) { return pixels[std::size_t(y) * width + x]; }
  std::size_t pixel_count() const { return pixels.size(); }
};

// Per-pixel binary label: 0 = upper bone region, 1 = lower bone region.
struct SegmentationMask {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> labels;

  std::uint8_t at(int x, int y) const { return labels[std::size_t(y) * width + x]; }
  std::uint8_t& at(int x, int y) { return labels[std::size_t(y) * width + x]; }
};

// Per-pixel non-negative residual magnitudes.
struct LossSpectrum {
  int width = 0;
  int height = 0;
  std::vector<double> values;
};

// Single-label binary grid (diagnostic membership masks; unlike
// SegmentationMask it need not contain both values).
struct BinaryGrid {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> values;
};

inline JointImage make_image(int width, int height, double resolution_mm = 1.0,
                             double fill = 0.0, std::string identity = {}) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("image dimensions must be positive");
  JointImage im;
  im.width = width;
  im.height = height;
  im.resolution_mm = resolution_mm;
  im.identity = std::move(identity);
  im.pixels.assign(std::size_t(width) * height, fill);
  return im;
}

// Basic structural validity: positive dims, matching buffer, intensities in
// [0,1], resolution > 0. The >= 16 px floor is enforced only at file-I/O and
// registration boundaries so that small in-memory fixtures remain usable.
inline void validate_image(const JointImage& im) {
  if (im.width <= 0 || im.height <= 0) throw std::invalid_argument("image: empty");
  if (im.pixels.size() != std::size_t(im.width) * im.height)
    throw std::invalid_argument("image: pixel buffer size mismatch");
  if (!(im.resolution_mm > 0.0)) throw std::invalid_argument("image: resolution must be > 0");
  for (double v : im.pixels)
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("image: intensity outside [0,1]");
}

inline void require_min_extent(const JointImage& im, int min_extent = 16) {
  if (im.width < min_extent || im.height < min_extent)
    throw std::invalid_argument("image: smaller than " + std::to_string(min_extent) + " px");
}

inline void validate_mask(const SegmentationMask& m) {
  if (m.width <= 0 || m.height <= 0) throw std::invalid_argument("mask: empty");
  if (m.labels.size() != std::size_t(m.width) * m.height)
    throw std::invalid_argument("mask: label buffer size mismatch");
  bool has0 = false, has1 = false;
  for (std::uint8_t v : m.labels) {
    if (v == 0) has0 = true;
    else if (v == 1) has1 = true;
    else throw std::invalid_argument("mask: label other than 0/1");
  }
  if (!has0 || !has1) throw std::invalid_argument("mask: single-region mask");
}

inline void require_same_shape(const JointImage& a, const JointImage& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("image dimensions mismatch");
}

inline void require_same_shape(const JointImage& a, const SegmentationMask& m) {
  if (a.width != m.width || a.height != m.height)
    throw std::invalid_argument("image/mask dimensions mismatch");
}

inline void require_same_shape(const SegmentationMask& a, const SegmentationMask& b) {
  if (a.width != b.width || a.height != b.height)
    throw std::invalid_argument("mask dimensions mismatch");
}

}  // namespace jsnreg
