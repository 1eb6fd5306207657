#pragma once

// Rigid-similarity transform parameterization and differentiable bilinear
// warping. Transforms act on center-origin coordinates: pixel (x, y) maps to
// (x - (W-1)/2, y - (H-1)/2), so rotation and scaling pivot about the image
// center and the translation parameters stay directly interpretable.

#include <algorithm>
#include <array>
#include <cmath>
#include <numbers>
#include <stdexcept>
#include <vector>

#include "jsnreg/image.hpp"

namespace jsnreg {

constexpr double deg2rad(double d) { return d * std::numbers::pi / 180.0; }
constexpr double rad2deg(double r) { return r * 180.0 / std::numbers::pi; }

// The four transform parameters: dz out-of-plane scale, dtheta rotation in
// radians, dx/dy displacement in pixels. Composition order: translate by
// (dx, dy), then rotate-scale.
struct RigidParams {
  double dz = 1.0;
  double dtheta = 0.0;
  double dx = 0.0;
  double dy = 0.0;
};

inline void validate_params(const RigidParams& p) {
  if (!(p.dz > 0.0)) throw std::invalid_argument("params: dz must be > 0");
  if (!std::isfinite(p.dz) || !std::isfinite(p.dtheta) || !std::isfinite(p.dx) ||
      !std::isfinite(p.dy))
    throw std::invalid_argument("params: non-finite value");
}

// 3x3 homogeneous matrix with bottom row (0, 0, 1).
struct TransformMatrix {
  std::array<std::array<double, 3>, 3> m{{{1, 0, 0}, {0, 1, 0}, {0, 0, 1}}};

  void apply(double x, double y, double& ox, double& oy) const {
    ox = m[0][0] * x + m[0][1] * y + m[0][2];
    oy = m[1][0] * x + m[1][1] * y + m[1][2];
  }
};

inline TransformMatrix build_matrix(const RigidParams& p) {
  validate_params(p);
  const double c = p.dz * std::cos(p.dtheta);
  const double s = p.dz * std::sin(p.dtheta);
  TransformMatrix t;
  t.m = {{{c, -s, p.dx * c - p.dy * s}, {s, c, p.dx * s + p.dy * c}, {0.0, 0.0, 1.0}}};
  return t;
}

inline TransformMatrix matmul(const TransformMatrix& a, const TransformMatrix& b) {
  TransformMatrix r;
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      r.m[i][j] = a.m[i][0] * b.m[0][j] + a.m[i][1] * b.m[1][j] + a.m[i][2] * b.m[2][j];
  return r;
}

inline TransformMatrix invert(const TransformMatrix& t) {
  const double a = t.m[0][0], b = t.m[0][1], tx = t.m[0][2];
  const double c = t.m[1][0], d = t.m[1][1], ty = t.m[1][2];
  const double det = a * d - b * c;
  if (det == 0.0 || !std::isfinite(det)) throw std::invalid_argument("invert: singular matrix");
  const double inv = 1.0 / det;
  TransformMatrix r;
  r.m[0][0] = d * inv;
  r.m[0][1] = -b * inv;
  r.m[1][0] = -c * inv;
  r.m[1][1] = a * inv;
  r.m[0][2] = -(r.m[0][0] * tx + r.m[0][1] * ty);
  r.m[1][2] = -(r.m[1][0] * tx + r.m[1][1] * ty);
  r.m[2] = {0.0, 0.0, 1.0};
  return r;
}

// Bilinear sample with zero fill outside [0, W-1] x [0, H-1]. Also returns
// the spatial derivative of the interpolant at the sample point; out of
// bounds yields zero value and zero sensitivity.
struct BilinearSample {
  double value = 0.0;
  double gx = 0.0;
  double gy = 0.0;
  bool in_bounds = false;
};

inline BilinearSample sample_bilinear(const JointImage& im, double sx, double sy) {
  BilinearSample out;
  const double xmax = double(im.width - 1);
  const double ymax = double(im.height - 1);
  if (!(sx >= 0.0 && sx <= xmax && sy >= 0.0 && sy <= ymax)) return out;
  int x0 = int(sx);
  int y0 = int(sy);
  if (x0 > im.width - 2) x0 = im.width - 2;
  if (y0 > im.height - 2) y0 = im.height - 2;
  if (x0 < 0) x0 = 0;
  if (y0 < 0) y0 = 0;
  const double fx = sx - x0;
  const double fy = sy - y0;
  const double v00 = im.at(x0, y0);
  const double v10 = im.at(x0 + 1, y0);
  const double v01 = im.at(x0, y0 + 1);
  const double v11 = im.at(x0 + 1, y0 + 1);
  out.value = (1.0 - fy) * ((1.0 - fx) * v00 + fx * v10) + fy * ((1.0 - fx) * v01 + fx * v11);
  out.gx = (1.0 - fy) * (v10 - v00) + fy * (v11 - v01);
  out.gy = (1.0 - fx) * (v01 - v00) + fx * (v11 - v10);
  out.in_bounds = true;
  return out;
}

// Inverse-warps the image: each output pixel takes the bilinear sample at
// invert(t) applied to its center-origin coordinate, so image content moves
// forward by t. Samples outside the input yield 0.
inline JointImage warp(const JointImage& image, const TransformMatrix& t) {
  validate_image(image);
  const TransformMatrix a = invert(t);
  const double cx = 0.5 * double(image.width - 1);
  const double cy = 0.5 * double(image.height - 1);
  JointImage out = make_image(image.width, image.height, image.resolution_mm, 0.0, image.identity);
  for (int y = 0; y < image.height; ++y) {
    const double uy = double(y) - cy;
    for (int x = 0; x < image.width; ++x) {
      const double ux = double(x) - cx;
      double sx, sy;
      a.apply(ux, uy, sx, sy);
      out.at(x, y) = sample_bilinear(image, sx + cx, sy + cy).value;
    }
  }
  return out;
}

// Warps a label grid with nearest-neighbor sampling through the same
// inverse map; out-of-bounds samples clamp to the nearest border label.
inline SegmentationMask warp_mask_nn(const SegmentationMask& mask, const TransformMatrix& t) {
  const TransformMatrix a = invert(t);
  const double cx = 0.5 * double(mask.width - 1);
  const double cy = 0.5 * double(mask.height - 1);
  SegmentationMask out;
  out.width = mask.width;
  out.height = mask.height;
  out.labels.resize(mask.labels.size());
  for (int y = 0; y < mask.height; ++y) {
    const double uy = double(y) - cy;
    for (int x = 0; x < mask.width; ++x) {
      const double ux = double(x) - cx;
      double sx, sy;
      a.apply(ux, uy, sx, sy);
      int ix = int(std::lround(sx + cx));
      int iy = int(std::lround(sy + cy));
      ix = std::clamp(ix, 0, mask.width - 1);
      iy = std::clamp(iy, 0, mask.height - 1);
      out.at(x, y) = mask.at(ix, iy);
    }
  }
  return out;
}

// Per-parameter sensitivity of the warped image w.r.t. {dz, dtheta, dx, dy},
// computed by the chain rule through the bilinear sampler and the
// inverse-matrix coordinate map (the same map `warp` uses).
struct WarpSensitivity {
  int width = 0;
  int height = 0;
  std::vector<double> ddz, ddtheta, ddx, ddy;
};

inline WarpSensitivity warp_gradient(const JointImage& image, const RigidParams& p) {
  validate_image(image);
  validate_params(p);
  const double cth = std::cos(p.dtheta);
  const double sth = std::sin(p.dtheta);
  const double iz = 1.0 / p.dz;
  const double cx = 0.5 * double(image.width - 1);
  const double cy = 0.5 * double(image.height - 1);
  WarpSensitivity g;
  g.width = image.width;
  g.height = image.height;
  const std::size_t n = image.pixel_count();
  g.ddz.assign(n, 0.0);
  g.ddtheta.assign(n, 0.0);
  g.ddx.assign(n, 0.0);
  g.ddy.assign(n, 0.0);
  std::size_t i = 0;
  for (int y = 0; y < image.height; ++y) {
    const double uy = double(y) - cy;
    for (int x = 0; x < image.width; ++x, ++i) {
      const double ux = double(x) - cx;
      // Inverse map: s = (1/dz) R(-theta) u - d.
      const double ar = cth * ux + sth * uy;
      const double br = -sth * ux + cth * uy;
      const double sx = ar * iz - p.dx;
      const double sy = br * iz - p.dy;
      const BilinearSample smp = sample_bilinear(image, sx + cx, sy + cy);
      if (!smp.in_bounds) continue;
      g.ddz[i] = smp.gx * (-ar * iz * iz) + smp.gy * (-br * iz * iz);
      g.ddtheta[i] = smp.gx * (br * iz) + smp.gy * (-ar * iz);
      g.ddx[i] = -smp.gx;
      g.ddy[i] = -smp.gy;
    }
  }
  return g;
}

}  // namespace jsnreg
