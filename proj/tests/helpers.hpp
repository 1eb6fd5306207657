#pragma once

// Shared fixtures for the test suites.

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>

#include "jsnreg/image.hpp"
#include "jsnreg/rng.hpp"

namespace testutil {

using jsnreg::JointImage;
using jsnreg::SegmentationMask;

// Horizontal ramp I(x, y) = x / (W - 1).
inline JointImage ramp_image(int w, int h) {
  JointImage im = jsnreg::make_image(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) im.at(x, y) = double(x) / double(w - 1);
  return im;
}

// a + b*X + c*Y + d*X*Y with X, Y in [-1/2, 1/2] (center-origin, normalized
// by extent). Bilinear interpolation reproduces such images exactly, so
// warps of them are free of interpolation error.
inline JointImage poly_image(int w, int h, double a, double b, double c, double d) {
  JointImage im = jsnreg::make_image(w, h);
  const double cx = 0.5 * (w - 1);
  const double cy = 0.5 * (h - 1);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const double X = (x - cx) / w;
      const double Y = (y - cy) / h;
      im.at(x, y) = a + b * X + c * Y + d * X * Y;
    }
  return im;
}

// Smooth band-limited random image in [base - amp, base + amp].
inline JointImage noise_image(int w, int h, std::uint64_t seed, double corr_len = 8.0,
                              double base = 0.5, double amp = 0.3) {
  JointImage im = jsnreg::make_image(w, h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      im.at(x, y) = base + amp * jsnreg::value_noise(seed, double(x), double(y), corr_len);
  return im;
}

// Top half 0, bottom half 1.
inline SegmentationMask half_mask(int w, int h) {
  SegmentationMask m;
  m.width = w;
  m.height = h;
  m.labels.resize(std::size_t(w) * h);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) m.at(x, y) = y < h / 2 ? 0 : 1;
  return m;
}

inline double rms_diff(const JointImage& a, const JointImage& b) {
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    acc += d * d;
  }
  return std::sqrt(acc / double(a.pixels.size()));
}

inline double rel_err(double got, double want, double floor = 1e-8) {
  return std::abs(got - want) / std::max({std::abs(got), std::abs(want), floor});
}

// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    dir_ = std::filesystem::temp_directory_path() /
           ("jsnreg_test_" + tag + "_" + std::to_string(counter_++));
    std::filesystem::create_directories(dir_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(dir_, ec);
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }
  const std::filesystem::path& dir() const { return dir_; }

 private:
  std::filesystem::path dir_;
  static inline int counter_ = 0;
};

inline std::string slurp(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::string s((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return s;
}

}  // namespace testutil
