#pragma once

// Translation-only phase-correlation baseline, per bone region: masked,
// raised-cosine windowed, zero-mean patches; cross-power-spectrum peak with
// quadratic 3x3 sub-pixel refinement. No rotation/scale capability, by
// construction. FFTs are backed by FFTW3.

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <complex>
#include <mutex>
#include <stdexcept>
#include <vector>

#include "jsnreg/image.hpp"

namespace jsnreg {

namespace detail {

inline std::mutex& fftw_plan_mutex() {
  static std::mutex m;
  return m;
}

// In-place 2D complex DFT, rows x cols row-major.
inline void fft2d(std::vector<std::complex<double>>& data, int rows, int cols, int sign) {
  auto* ptr = reinterpret_cast<fftw_complex*>(data.data());
  fftw_plan plan;
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    plan = fftw_plan_dft_2d(rows, cols, ptr, ptr, sign, FFTW_ESTIMATE);
  }
  fftw_execute(plan);
  {
    std::lock_guard<std::mutex> lock(fftw_plan_mutex());
    fftw_destroy_plan(plan);
  }
}

inline int next_pow2(int n) {
  int p = 8;
  while (p < n) p *= 2;
  return p;
}

inline double parabolic_offset(double l, double c, double r) {
  const double den = l - 2.0 * c + r;
  if (den == 0.0) return 0.0;
  const double off = 0.5 * (l - r) / den;
  return std::clamp(off, -0.5, 0.5);
}

}  // namespace detail

struct RegionShift {
  double dx = 0.0;
  double dy = 0.0;
  double peak_ratio = 0.0;  // main correlation peak over runner-up
};

struct BaselineResult {
  RegionShift upper;
  RegionShift lower;
  double jsn_pixels = 0.0;
};

namespace detail {

inline RegionShift phase_correlate_region(const JointImage& fixed, const JointImage& moving,
                                          const SegmentationMask& mask, int region) {
  // Bounding box of the region in the fixed mask; the same box crops both
  // images.
  int x0 = mask.width, y0 = mask.height, x1 = -1, y1 = -1;
  for (int y = 0; y < mask.height; ++y)
    for (int x = 0; x < mask.width; ++x)
      if (mask.at(x, y) == region) {
        x0 = std::min(x0, x);
        y0 = std::min(y0, y);
        x1 = std::max(x1, x);
        y1 = std::max(y1, y);
      }
  if (x1 < x0) throw std::runtime_error("phase_correlation: empty region");
  const int bw = x1 - x0 + 1;
  const int bh = y1 - y0 + 1;

  const auto region_mean = [&](const JointImage& im) {
    double sum = 0.0;
    std::size_t n = 0;
    for (int y = y0; y <= y1; ++y)
      for (int x = x0; x <= x1; ++x)
        if (mask.at(x, y) == region) {
          sum += im.at(x, y);
          ++n;
        }
    return sum / double(n);
  };
  const double mean_f = region_mean(fixed);
  const double mean_g = region_mean(moving);

  const int cols = next_pow2(bw);
  const int rows = next_pow2(bh);
  std::vector<std::complex<double>> fa(std::size_t(rows) * cols, 0.0);
  std::vector<std::complex<double>> fb(std::size_t(rows) * cols, 0.0);
  double energy = 0.0;
  for (int y = 0; y < bh; ++y)
    for (int x = 0; x < bw; ++x) {
      if (mask.at(x0 + x, y0 + y) != region) continue;
      const double wx = bw > 1 ? 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * x / (bw - 1))) : 1.0;
      const double wy = bh > 1 ? 0.5 * (1.0 - std::cos(2.0 * 3.14159265358979323846 * y / (bh - 1))) : 1.0;
      const double w = wx * wy;
      const double va = (fixed.at(x0 + x, y0 + y) - mean_f) * w;
      const double vb = (moving.at(x0 + x, y0 + y) - mean_g) * w;
      fa[std::size_t(y) * cols + x] = va;
      fb[std::size_t(y) * cols + x] = vb;
      energy += va * va + vb * vb;
    }
  if (energy <= 1e-12) throw std::runtime_error("phase_correlation: degenerate spectrum (flat region)");

  fft2d(fa, rows, cols, FFTW_FORWARD);
  fft2d(fb, rows, cols, FFTW_FORWARD);
  for (std::size_t i = 0; i < fa.size(); ++i) {
    const std::complex<double> r = fb[i] * std::conj(fa[i]);
    const double mag = std::abs(r);
    fa[i] = mag > 1e-15 ? r / mag : std::complex<double>(0.0, 0.0);
  }
  fft2d(fa, rows, cols, FFTW_BACKWARD);

  std::vector<double> corr(fa.size());
  for (std::size_t i = 0; i < fa.size(); ++i) corr[i] = fa[i].real();
  std::size_t best = 0;
  for (std::size_t i = 1; i < corr.size(); ++i)
    if (corr[i] > corr[best]) best = i;
  const int px = int(best % cols);
  const int py = int(best / cols);

  // Runner-up outside the 3x3 neighborhood of the main peak (wrap-aware).
  double second = -1e300;
  for (int y = 0; y < rows; ++y)
    for (int x = 0; x < cols; ++x) {
      int ddx = std::abs(x - px);
      int ddy = std::abs(y - py);
      ddx = std::min(ddx, cols - ddx);
      ddy = std::min(ddy, rows - ddy);
      if (ddx <= 1 && ddy <= 1) continue;
      second = std::max(second, corr[std::size_t(y) * cols + x]);
    }

  const auto at_wrap = [&](int x, int y) {
    x = (x % cols + cols) % cols;
    y = (y % rows + rows) % rows;
    return corr[std::size_t(y) * cols + x];
  };
  const double off_x = parabolic_offset(at_wrap(px - 1, py), at_wrap(px, py), at_wrap(px + 1, py));
  const double off_y = parabolic_offset(at_wrap(px, py - 1), at_wrap(px, py), at_wrap(px, py + 1));

  RegionShift s;
  double sx = px + off_x;
  double sy = py + off_y;
  if (sx > cols / 2.0) sx -= cols;
  if (sy > rows / 2.0) sy -= rows;
  s.dx = sx;
  s.dy = sy;
  s.peak_ratio = second > 0.0 ? corr[best] / second : 1e300;
  return s;
}

}  // namespace detail

// Per-region translation estimates and the resulting JSN. Shifts follow the
// motion convention: positive dy means the region moved down from fixed to
// moving.
inline BaselineResult phase_correlation_baseline(const JointImage& fixed, const JointImage& moving,
                                                 const SegmentationMask& mask) {
  require_same_shape(fixed, moving);
  require_same_shape(fixed, mask);
  validate_mask(mask);
  BaselineResult out;
  out.upper = detail::phase_correlate_region(fixed, moving, mask, 0);
  out.lower = detail::phase_correlate_region(fixed, moving, mask, 1);
  out.jsn_pixels = out.upper.dy - out.lower.dy;
  return out;
}

}  // namespace jsnreg
