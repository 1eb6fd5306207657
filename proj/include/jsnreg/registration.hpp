#pragma once

// Per-pair minimization of the weighted two-region loss over the 8 rigid
// parameters (P0 upper, P1 lower). Direct first-order optimization with
// analytic gradients, coarse-to-fine pyramid, and multiple rotation seeds.
//
// Parameter semantics: RigidParams describe the bone motion from the fixed
// to the moving acquisition (positive dy = the region moved down). The
// registration aligns by resampling the moving image through t(P), i.e.
// warp(moving, invert(build_matrix(P))) in transform-module terms; perfect
// alignment therefore recovers the motion parameters themselves, and
// Eq.-style JSN = dy_upper - dy_lower is the narrowing in pixels.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "jsnreg/image.hpp"
#include "jsnreg/loss.hpp"
#include "jsnreg/transform.hpp"

namespace jsnreg {

// Serialized with every result so downstream consumers know the convention.
inline constexpr const char* kTransformConvention =
    "translate-then-rotate-scale; center-origin; params are fixed-to-moving bone motion; "
    "y axis points down";

struct ParamBounds {
  double dz_min = 0.8;
  double dz_max = 1.25;
  double theta_max = deg2rad(30.0);  // radians
  double x_max = 20.0;               // pixels at full resolution
  double y_max = 20.0;
};

struct OptimizerConfig {
  int pyramid_levels = 3;
  int max_iterations_per_level = 500;
  double step_size = 0.01;
  double step_decay = 0.5;
  int plateau_patience = 20;
  double convergence_tolerance = 1e-6;
  ParamBounds bounds;
  std::vector<double> rotation_seeds = {deg2rad(-10.0), 0.0, deg2rad(10.0)};
  std::uint64_t rng_seed = 1;
  double mismatch_dice_threshold = 0.5;
};

inline void validate_config(const OptimizerConfig& cfg) {
  if (cfg.pyramid_levels < 1) throw std::invalid_argument("config: pyramid_levels must be >= 1");
  if (cfg.max_iterations_per_level < 1)
    throw std::invalid_argument("config: max_iterations_per_level must be >= 1");
  if (!(cfg.step_size > 0.0)) throw std::invalid_argument("config: step_size must be > 0");
  if (!(cfg.step_decay > 0.0 && cfg.step_decay < 1.0))
    throw std::invalid_argument("config: step_decay must lie in (0,1)");
  if (cfg.plateau_patience < 1) throw std::invalid_argument("config: plateau_patience must be >= 1");
  if (!(cfg.convergence_tolerance > 0.0))
    throw std::invalid_argument("config: convergence_tolerance must be > 0");
  const ParamBounds& b = cfg.bounds;
  if (!(b.dz_min > 0.0 && b.dz_min <= 1.0 && b.dz_max >= 1.0))
    throw std::invalid_argument("config: dz bounds must contain 1");
  if (!(b.theta_max >= 0.0 && b.x_max >= 0.0 && b.y_max >= 0.0))
    throw std::invalid_argument("config: bounds must contain the identity");
  if (cfg.rotation_seeds.empty()) throw std::invalid_argument("config: no rotation seeds");
  for (double s : cfg.rotation_seeds)
    if (std::abs(s) > b.theta_max)
      throw std::invalid_argument("config: rotation seed outside theta bound");
}

struct RegistrationResult {
  RigidParams p_upper;
  RigidParams p_lower;
  double original_loss_regional = 0.0;
  double original_loss_global = 0.0;
  double warped_loss = 0.0;
  double warped_loss_upper = 0.0;
  double warped_loss_lower = 0.0;
  double jsn_pixels = 0.0;
  double jsn_mm = 0.0;
  std::vector<int> iterations_used;  // per pyramid level, winning seed
  bool converged = false;
  std::array<bool, 4> at_bounds_upper{};  // dz, dtheta, dx, dy
  std::array<bool, 4> at_bounds_lower{};
  bool mismatch = false;
  double mask_overlap_diagnostic = 1.0;
};

struct JsnProgression {
  double pixels = 0.0;
  double mm = 0.0;
};

inline JsnProgression jsn_progression(const RegistrationResult& r, double resolution_mm) {
  JsnProgression j;
  j.pixels = r.p_upper.dy - r.p_lower.dy;
  j.mm = j.pixels * resolution_mm;
  return j;
}

// Resamples the moving image through the motion transform: output pixel u
// takes moving at t(u). This is warp with the inverse matrix.
inline JointImage aligned_warp(const JointImage& moving, const RigidParams& p) {
  return warp(moving, invert(build_matrix(p)));
}

struct WarpedMoving {
  JointImage warped;
  BinaryGrid mask_upper;  // membership of the warped moving mask's upper region
  BinaryGrid mask_lower;
};

// Applies the two estimated motions: G0' = aligned_warp(G, p_upper) * !S,
// G1' = aligned_warp(G, p_lower) * S with S the partition (fixed) mask; the
// moving mask is warped per region with nearest-neighbor sampling for the
// diagnostic grids.
inline WarpedMoving warp_moving(const JointImage& moving, const SegmentationMask& moving_mask,
                                const SegmentationMask& partition_mask, const RigidParams& p_upper,
                                const RigidParams& p_lower) {
  require_same_shape(moving, moving_mask);
  require_same_shape(moving, partition_mask);
  const TransformMatrix t0_inv = invert(build_matrix(p_upper));
  const TransformMatrix t1_inv = invert(build_matrix(p_lower));
  const JointImage w0 = warp(moving, t0_inv);
  const JointImage w1 = warp(moving, t1_inv);
  WarpedMoving out;
  out.warped = make_image(moving.width, moving.height, moving.resolution_mm, 0.0, moving.identity);
  for (std::size_t i = 0; i < out.warped.pixels.size(); ++i)
    out.warped.pixels[i] = partition_mask.labels[i] == 0 ? w0.pixels[i] : w1.pixels[i];
  const SegmentationMask m0 = warp_mask_nn(moving_mask, t0_inv);
  const SegmentationMask m1 = warp_mask_nn(moving_mask, t1_inv);
  out.mask_upper.width = out.mask_lower.width = moving.width;
  out.mask_upper.height = out.mask_lower.height = moving.height;
  out.mask_upper.values.resize(moving_mask.labels.size());
  out.mask_lower.values.resize(moving_mask.labels.size());
  for (std::size_t i = 0; i < moving_mask.labels.size(); ++i) {
    out.mask_upper.values[i] = m0.labels[i] == 0 ? 1 : 0;
    out.mask_lower.values[i] = m1.labels[i] == 1 ? 1 : 0;
  }
  return out;
}

namespace detail {

// Pixels of one mask region with precomputed center-origin coordinates and
// fixed-image values.
struct RegionPixels {
  std::vector<double> ux, uy, f;
};

struct PyramidLevel {
  JointImage fixed;
  JointImage moving;
  SegmentationMask mask;
  RegionPixels region[2];
  double inv_mn = 0.0;
};

inline JointImage downsample2x2(const JointImage& in) {
  const int w = in.width / 2, h = in.height / 2;
  JointImage out = make_image(w, h, in.resolution_mm * 2.0, 0.0, in.identity);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      out.at(x, y) = 0.25 * (in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) +
                             in.at(2 * x, 2 * y + 1) + in.at(2 * x + 1, 2 * y + 1));
  return out;
}

inline SegmentationMask downsample_mask2x2(const SegmentationMask& in) {
  SegmentationMask out;
  out.width = in.width / 2;
  out.height = in.height / 2;
  out.labels.resize(std::size_t(out.width) * out.height);
  for (int y = 0; y < out.height; ++y)
    for (int x = 0; x < out.width; ++x) {
      const int s = in.at(2 * x, 2 * y) + in.at(2 * x + 1, 2 * y) + in.at(2 * x, 2 * y + 1) +
                    in.at(2 * x + 1, 2 * y + 1);
      out.at(x, y) = s > 2 ? 1 : 0;
    }
  return out;
}

// Separable Gaussian, sigma 1 px, radius 3; border taps renormalized.
inline JointImage gaussian_blur1(const JointImage& in) {
  static constexpr int kRadius = 3;
  std::array<double, 2 * kRadius + 1> k{};
  for (int i = -kRadius; i <= kRadius; ++i) k[i + kRadius] = std::exp(-0.5 * i * i);
  JointImage tmp = in, out = in;
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int xx = x + i;
        if (xx < 0 || xx >= in.width) continue;
        acc += k[i + kRadius] * in.at(xx, y);
        wsum += k[i + kRadius];
      }
      tmp.at(x, y) = acc / wsum;
    }
  for (int y = 0; y < in.height; ++y)
    for (int x = 0; x < in.width; ++x) {
      double acc = 0.0, wsum = 0.0;
      for (int i = -kRadius; i <= kRadius; ++i) {
        const int yy = y + i;
        if (yy < 0 || yy >= in.height) continue;
        acc += k[i + kRadius] * tmp.at(x, yy);
        wsum += k[i + kRadius];
      }
      out.at(x, y) = acc / wsum;
    }
  return out;
}

inline void collect_regions(PyramidLevel& lv) {
  const double cx = 0.5 * double(lv.fixed.width - 1);
  const double cy = 0.5 * double(lv.fixed.height - 1);
  for (int y = 0; y < lv.fixed.height; ++y)
    for (int x = 0; x < lv.fixed.width; ++x) {
      RegionPixels& r = lv.region[lv.mask.at(x, y)];
      r.ux.push_back(double(x) - cx);
      r.uy.push_back(double(y) - cy);
      r.f.push_back(lv.fixed.at(x, y));
    }
  lv.inv_mn = 1.0 / double(lv.fixed.pixel_count());
}

// Levels are ordered finest (index 0, raw intensities) to coarsest. The two
// coarsest levels are pre-blurred, standing in for the denoising convolution
// the source pipeline applies before registration; the finest level never is.
inline std::vector<PyramidLevel> build_pyramid(const JointImage& fixed, const JointImage& moving,
                                               const SegmentationMask& mask, int levels) {
  std::vector<PyramidLevel> pyr;
  pyr.push_back({fixed, moving, mask, {}, 0.0});
  for (int l = 1; l < levels; ++l) {
    const PyramidLevel& prev = pyr.back();
    if (prev.fixed.width / 2 < 16 || prev.fixed.height / 2 < 16) break;
    SegmentationMask m = downsample_mask2x2(prev.mask);
    bool has0 = false, has1 = false;
    for (std::uint8_t v : m.labels) (v ? has1 : has0) = true;
    if (!has0 || !has1) break;
    pyr.push_back({downsample2x2(prev.fixed), downsample2x2(prev.moving), std::move(m), {}, 0.0});
  }
  const int n = int(pyr.size());
  for (int l = std::max(1, n - 2); l < n; ++l) {
    pyr[l].fixed = gaussian_blur1(pyr[l].fixed);
    pyr[l].moving = gaussian_blur1(pyr[l].moving);
  }
  for (PyramidLevel& lv : pyr) collect_regions(lv);
  return pyr;
}

// Sum of squared residuals of one region under the motion p, plus its
// gradient w.r.t. {dz, dtheta, dx, dy}. The sample map is s = t(u): the
// warped value at u is the moving image at the motion-transformed point.
inline double region_sq_residual(const PyramidLevel& lv, int region, const RigidParams& p,
                                 double grad[4]) {
  const RegionPixels& r = lv.region[region];
  const double A = p.dz * std::cos(p.dtheta);
  const double B = p.dz * std::sin(p.dtheta);
  const double iz = 1.0 / p.dz;
  const double cx = 0.5 * double(lv.moving.width - 1);
  const double cy = 0.5 * double(lv.moving.height - 1);
  double acc = 0.0;
  double g0 = 0.0, g1 = 0.0, g2 = 0.0, g3 = 0.0;
  const std::size_t n = r.f.size();
  for (std::size_t i = 0; i < n; ++i) {
    const double X = r.ux[i] + p.dx;
    const double Y = r.uy[i] + p.dy;
    const double sx = A * X - B * Y;
    const double sy = B * X + A * Y;
    const BilinearSample smp = sample_bilinear(lv.moving, sx + cx, sy + cy);
    const double res = r.f[i] - smp.value;
    acc += res * res;
    if (!smp.in_bounds) continue;
    const double m2 = -2.0 * res;
    g0 += m2 * (smp.gx * sx + smp.gy * sy) * iz;
    g1 += m2 * (-smp.gx * sy + smp.gy * sx);
    g2 += m2 * (smp.gx * A + smp.gy * B);
    g3 += m2 * (-smp.gx * B + smp.gy * A);
  }
  if (grad) {
    grad[0] = g0;
    grad[1] = g1;
    grad[2] = g2;
    grad[3] = g3;
  }
  return acc;
}

inline double region_sq_residual(const PyramidLevel& lv, int region, const RigidParams& p) {
  return region_sq_residual(lv, region, p, nullptr);
}

inline PyramidLevel make_level(const JointImage& fixed, const JointImage& moving,
                               const SegmentationMask& mask) {
  PyramidLevel lv{fixed, moving, mask, {}, 0.0};
  collect_regions(lv);
  return lv;
}

}  // namespace detail

// Eq.-6 objective at the given motion parameters, full resolution, no
// pyramid. This is the function register_pair minimizes at its finest level.
inline double objective_loss(const JointImage& fixed, const JointImage& moving,
                             const SegmentationMask& mask, const LossWeights& w,
                             const RigidParams& p_upper, const RigidParams& p_lower) {
  detail::PyramidLevel lv = detail::make_level(fixed, moving, mask);
  const double s0 = detail::region_sq_residual(lv, 0, p_upper);
  const double s1 = detail::region_sq_residual(lv, 1, p_lower);
  return w.alpha * std::sqrt(s0 * lv.inv_mn) + w.beta * std::sqrt(s1 * lv.inv_mn);
}

// Analytic gradient of objective_loss w.r.t. (p_upper, p_lower), laid out as
// {dz0, dtheta0, dx0, dy0, dz1, dtheta1, dx1, dy1}.
inline std::array<double, 8> objective_gradient(const JointImage& fixed, const JointImage& moving,
                                                const SegmentationMask& mask, const LossWeights& w,
                                                const RigidParams& p_upper,
                                                const RigidParams& p_lower) {
  detail::PyramidLevel lv = detail::make_level(fixed, moving, mask);
  double g0[4], g1[4];
  const double s0 = detail::region_sq_residual(lv, 0, p_upper, g0);
  const double s1 = detail::region_sq_residual(lv, 1, p_lower, g1);
  const double l0 = std::sqrt(s0 * lv.inv_mn);
  const double l1 = std::sqrt(s1 * lv.inv_mn);
  std::array<double, 8> g{};
  const double c0 = l0 > 0.0 ? w.alpha * lv.inv_mn / (2.0 * l0) : 0.0;
  const double c1 = l1 > 0.0 ? w.beta * lv.inv_mn / (2.0 * l1) : 0.0;
  for (int k = 0; k < 4; ++k) {
    g[k] = c0 * g0[k];
    g[4 + k] = c1 * g1[k];
  }
  return g;
}

namespace detail {

// Optimization runs on scaled variables so one step size fits all:
// u = {dz-1, dtheta, dx/W, dy/H} per region, W/H the finest-level extent.
struct ScaledSpace {
  double w = 1.0, h = 1.0;
  ParamBounds bounds;

  std::array<double, 8> to_scaled(const RigidParams& p0, const RigidParams& p1) const {
    return {p0.dz - 1.0, p0.dtheta, p0.dx / w, p0.dy / h,
            p1.dz - 1.0, p1.dtheta, p1.dx / w, p1.dy / h};
  }
  void from_scaled(const std::array<double, 8>& u, RigidParams& p0, RigidParams& p1) const {
    p0 = {u[0] + 1.0, u[1], u[2] * w, u[3] * h};
    p1 = {u[4] + 1.0, u[5], u[6] * w, u[7] * h};
  }
  void project(std::array<double, 8>& u) const {
    for (int b = 0; b < 8; b += 4) {
      u[b] = std::clamp(u[b], bounds.dz_min - 1.0, bounds.dz_max - 1.0);
      u[b + 1] = std::clamp(u[b + 1], -bounds.theta_max, bounds.theta_max);
      u[b + 2] = std::clamp(u[b + 2], -bounds.x_max / w, bounds.x_max / w);
      u[b + 3] = std::clamp(u[b + 3], -bounds.y_max / h, bounds.y_max / h);
    }
  }
};

struct LevelOutcome {
  int iterations = 0;
  bool step_floor_reached = false;
};

// Adam with bound projection and plateau-triggered step decay. Exits when
// the step has decayed below step_size * 1e-4 or max iterations is reached;
// returns the best evaluated point.
inline LevelOutcome minimize_level(const PyramidLevel& lv, const ScaledSpace& space,
                                   const OptimizerConfig& cfg, const LossWeights& weights,
                                   std::array<double, 8>& u) {
  constexpr double kBeta1 = 0.9, kBeta2 = 0.999, kEps = 1e-8;
  const double lr_floor = cfg.step_size * 1e-4;
  std::array<double, 8> m{}, v{};
  double lr = cfg.step_size;
  space.project(u);

  const auto eval = [&](const std::array<double, 8>& uu, std::array<double, 8>& grad) {
    RigidParams p0, p1;
    space.from_scaled(uu, p0, p1);
    double g0[4], g1[4];
    const double s0 = region_sq_residual(lv, 0, p0, g0);
    const double s1 = region_sq_residual(lv, 1, p1, g1);
    const double l0 = std::sqrt(s0 * lv.inv_mn);
    const double l1 = std::sqrt(s1 * lv.inv_mn);
    const double c0 = l0 > 0.0 ? weights.alpha * lv.inv_mn / (2.0 * l0) : 0.0;
    const double c1 = l1 > 0.0 ? weights.beta * lv.inv_mn / (2.0 * l1) : 0.0;
    // Chain to scaled space: du = {ddz, ddtheta, W*ddx, H*ddy}.
    grad[0] = c0 * g0[0];
    grad[1] = c0 * g0[1];
    grad[2] = c0 * g0[2] * space.w;
    grad[3] = c0 * g0[3] * space.h;
    grad[4] = c1 * g1[0];
    grad[5] = c1 * g1[1];
    grad[6] = c1 * g1[2] * space.w;
    grad[7] = c1 * g1[3] * space.h;
    return weights.alpha * l0 + weights.beta * l1;
  };

  std::array<double, 8> grad{};
  double best = eval(u, grad);
  std::array<double, 8> best_u = u;
  int stall = 0;
  LevelOutcome out;
  int t = 0;
  for (int it = 0; it < cfg.max_iterations_per_level; ++it) {
    ++t;
    for (int k = 0; k < 8; ++k) {
      m[k] = kBeta1 * m[k] + (1.0 - kBeta1) * grad[k];
      v[k] = kBeta2 * v[k] + (1.0 - kBeta2) * grad[k] * grad[k];
      const double mhat = m[k] / (1.0 - std::pow(kBeta1, t));
      const double vhat = v[k] / (1.0 - std::pow(kBeta2, t));
      u[k] -= lr * mhat / (std::sqrt(vhat) + kEps);
    }
    space.project(u);
    const double l = eval(u, grad);
    ++out.iterations;
    if (l < best - cfg.convergence_tolerance) {
      best = l;
      best_u = u;
      stall = 0;
    } else {
      if (l < best) {
        best = l;
        best_u = u;
      }
      ++stall;
    }
    if (stall >= cfg.plateau_patience) {
      lr *= cfg.step_decay;
      stall = 0;
      if (lr < lr_floor) {
        out.step_floor_reached = true;
        break;
      }
    }
  }
  u = best_u;
  return out;
}

struct SeedRun {
  std::array<double, 8> u{};
  double final_loss = 0.0;
  std::vector<int> iterations;  // finest-first
  bool final_level_converged = false;
};

}  // namespace detail

// Registers moving onto fixed. For each rotation seed a full coarse-to-fine
// pyramid is optimized; the seed with the lowest finest-level loss wins
// (ties broken by smaller |dtheta|). The identity is always a candidate, so
// a non-mismatched result never has warped loss above the original loss.
inline RegistrationResult register_pair(const JointImage& fixed, const JointImage& moving,
                                        const SegmentationMask& fixed_mask,
                                        const SegmentationMask& moving_mask,
                                        const OptimizerConfig& cfg = {},
                                        const LossWeights& weights = {}) {
  validate_image(fixed);
  validate_image(moving);
  require_min_extent(fixed);
  require_min_extent(moving);
  validate_mask(fixed_mask);
  validate_mask(moving_mask);
  validate_config(cfg);
  validate_weights(weights);
  require_same_shape(fixed, moving);
  require_same_shape(fixed, fixed_mask);
  require_same_shape(moving, moving_mask);
  if (std::abs(fixed.resolution_mm - moving.resolution_mm) > 1e-12)
    throw std::invalid_argument("register_pair: resolution mismatch");

  const std::vector<detail::PyramidLevel> pyramid =
      detail::build_pyramid(fixed, moving, fixed_mask, cfg.pyramid_levels);
  detail::ScaledSpace space{double(fixed.width), double(fixed.height), cfg.bounds};

  std::vector<detail::SeedRun> runs;
  runs.reserve(cfg.rotation_seeds.size() + 1);
  {
    // The identity is always a candidate: a kept result can never be worse
    // than not warping at all.
    detail::SeedRun identity;
    identity.iterations.assign(pyramid.size(), 0);
    identity.final_level_converged = true;
    identity.final_loss =
        weights.alpha * std::sqrt(detail::region_sq_residual(pyramid[0], 0, RigidParams{}) *
                                  pyramid[0].inv_mn) +
        weights.beta * std::sqrt(detail::region_sq_residual(pyramid[0], 1, RigidParams{}) *
                                 pyramid[0].inv_mn);
    runs.push_back(std::move(identity));
  }
  for (double seed : cfg.rotation_seeds) {
    detail::SeedRun run;
    run.u = {0.0, seed, 0.0, 0.0, 0.0, seed, 0.0, 0.0};
    run.iterations.assign(pyramid.size(), 0);
    for (int l = int(pyramid.size()) - 1; l >= 0; --l) {
      const detail::LevelOutcome oc = detail::minimize_level(pyramid[l], space, cfg, weights, run.u);
      run.iterations[l] = oc.iterations;
      if (l == 0) run.final_level_converged = oc.step_floor_reached;
    }
    RigidParams p0, p1;
    space.from_scaled(run.u, p0, p1);
    run.final_loss = weights.alpha * std::sqrt(detail::region_sq_residual(pyramid[0], 0, p0) *
                                               pyramid[0].inv_mn) +
                     weights.beta * std::sqrt(detail::region_sq_residual(pyramid[0], 1, p1) *
                                              pyramid[0].inv_mn);
    runs.push_back(std::move(run));
  }

  const auto rotation_mag = [](const detail::SeedRun& r) { return std::abs(r.u[1]) + std::abs(r.u[5]); };
  const detail::SeedRun* winner = &runs.front();
  for (const detail::SeedRun& r : runs) {
    if (r.final_loss < winner->final_loss ||
        (r.final_loss == winner->final_loss && rotation_mag(r) < rotation_mag(*winner)))
      winner = &r;
  }

  RegistrationResult res;
  space.from_scaled(winner->u, res.p_upper, res.p_lower);
  res.iterations_used = winner->iterations;
  res.converged = winner->final_level_converged;

  const RegionPair original_regions = partition(moving, fixed_mask);
  res.original_loss_regional = region_loss(fixed, original_regions, fixed_mask, weights).total;
  res.original_loss_global = euclidean_loss(fixed, moving);

  const WarpedMoving wm = warp_moving(moving, moving_mask, fixed_mask, res.p_upper, res.p_lower);
  const RegionPair warped_regions = partition(wm.warped, fixed_mask);
  const RegionLoss wl = region_loss(fixed, warped_regions, fixed_mask, weights);
  res.warped_loss = wl.total;
  res.warped_loss_upper = wl.upper;
  res.warped_loss_lower = wl.lower;

  const JsnProgression j = jsn_progression(res, fixed.resolution_mm);
  res.jsn_pixels = j.pixels;
  res.jsn_mm = j.mm;

  const auto near = [](double a, double b) { return std::abs(a - b) <= 1e-9; };
  const ParamBounds& b = cfg.bounds;
  const auto flag_bounds = [&](const RigidParams& p, std::array<bool, 4>& f) {
    f[0] = near(p.dz, b.dz_min) || near(p.dz, b.dz_max);
    f[1] = b.theta_max > 0.0 && near(std::abs(p.dtheta), b.theta_max);
    f[2] = b.x_max > 0.0 && near(std::abs(p.dx), b.x_max);
    f[3] = b.y_max > 0.0 && near(std::abs(p.dy), b.y_max);
  };
  flag_bounds(res.p_upper, res.at_bounds_upper);
  flag_bounds(res.p_lower, res.at_bounds_lower);

  // Mean per-label Dice between the warped moving mask and the fixed mask.
  std::size_t inter_u = 0, inter_l = 0, warped_u = 0, warped_l = 0, fixed_u = 0, fixed_l = 0;
  for (std::size_t i = 0; i < fixed_mask.labels.size(); ++i) {
    const bool fu = fixed_mask.labels[i] == 0;
    fixed_u += fu;
    fixed_l += !fu;
    warped_u += wm.mask_upper.values[i];
    warped_l += wm.mask_lower.values[i];
    inter_u += fu && wm.mask_upper.values[i];
    inter_l += !fu && wm.mask_lower.values[i];
  }
  const double dice_u = fixed_u + warped_u > 0 ? 2.0 * double(inter_u) / double(fixed_u + warped_u) : 0.0;
  const double dice_l = fixed_l + warped_l > 0 ? 2.0 * double(inter_l) / double(fixed_l + warped_l) : 0.0;
  res.mask_overlap_diagnostic = 0.5 * (dice_u + dice_l);

  const bool any_bound =
      std::any_of(res.at_bounds_upper.begin(), res.at_bounds_upper.end(), [](bool x) { return x; }) ||
      std::any_of(res.at_bounds_lower.begin(), res.at_bounds_lower.end(), [](bool x) { return x; });
  res.mismatch = res.warped_loss > res.original_loss_regional + 1e-12 || any_bound ||
                 res.mask_overlap_diagnostic < cfg.mismatch_dice_threshold;
  return res;
}

}  // namespace jsnreg
