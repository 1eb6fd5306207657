#pragma once

// Synthetic two-bone joint phantoms with exactly known ground-truth motions.
// Bones are rounded-rectangle distance-field shapes with a bright cortical
// rim and band-limited trabecular-like texture. The moving image is produced
// transform-then-render: each bone's analytic shape is evaluated at the
// motion-transformed coordinates, so ground truth is exact and free of
// interpolation error.

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "jsnreg/image.hpp"
#include "jsnreg/registration.hpp"
#include "jsnreg/rng.hpp"
#include "jsnreg/transform.hpp"

namespace jsnreg {

struct PhantomSpec {
  int width = 256;
  int height = 256;
  double bone_half_width = 0.0;  // <= 0 selects 0.27 * width
  double gap = 24.0;             // pixels between bone ends at center
  double cortical_rim_intensity = 0.9;
  double interior_base_intensity = 0.55;
  double texture_amplitude = 0.15;
  double texture_correlation_length = 6.0;  // pixels
  double background_intensity = 0.10;
  double noise_sigma = 0.0;           // additive Gaussian, fraction of full scale
  double texture_perturbation = 0.0;  // per-image texture variation amplitude
  std::uint64_t rng_seed = 1;
  std::uint64_t noise_seed = 0;  // 0 derives the noise stream from rng_seed
  RigidParams truth_upper;
  RigidParams truth_lower;
};

struct PhantomPair {
  JointImage fixed;
  JointImage moving;
  SegmentationMask fixed_mask;
  SegmentationMask moving_mask;
  RigidParams truth_upper;
  RigidParams truth_lower;
  double truth_jsn_pixels = 0.0;
};

// Derived bone geometry in center-origin coordinates.
struct PhantomGeometry {
  double half_width = 0.0;
  double half_height = 0.0;
  double corner_radius = 0.0;
  double center_y[2] = {0.0, 0.0};  // upper, lower
};

inline PhantomGeometry phantom_geometry(const PhantomSpec& s) {
  PhantomGeometry g;
  g.half_width = s.bone_half_width > 0.0 ? s.bone_half_width : 0.27 * double(s.width);
  const double margin = std::max(8.0, double(s.height) / 8.0);
  g.half_height = (double(s.height) / 2.0 - s.gap / 2.0 - margin) / 2.0;
  if (g.half_height < 4.0 || g.half_width < 4.0)
    throw std::invalid_argument("phantom: frame too small for bone geometry");
  g.corner_radius = 0.35 * std::min(g.half_width, g.half_height);
  g.center_y[0] = -(s.gap / 2.0 + g.half_height);
  g.center_y[1] = s.gap / 2.0 + g.half_height;
  return g;
}

// Signed distance to a rounded rectangle centered at the origin.
inline double rounded_rect_sdf(double qx, double qy, double hw, double hh, double r) {
  const double ax = std::abs(qx) - (hw - r);
  const double ay = std::abs(qy) - (hh - r);
  const double mx = std::max(ax, 0.0);
  const double my = std::max(ay, 0.0);
  return std::sqrt(mx * mx + my * my) + std::min(std::max(ax, ay), 0.0) - r;
}

// Analytic footprint area of one bone (for render sanity checks).
inline double phantom_bone_area(const PhantomGeometry& g) {
  return 4.0 * g.half_width * g.half_height -
         (4.0 - 3.14159265358979323846) * g.corner_radius * g.corner_radius;
}

inline void validate_phantom_spec(const PhantomSpec& s) {
  if (s.width < 16 || s.height < 16) throw std::invalid_argument("phantom: frame smaller than 16 px");
  if (!(s.gap >= 1.0)) throw std::invalid_argument("phantom: gap must be >= 1 px");
  if (!(s.noise_sigma >= 0.0)) throw std::invalid_argument("phantom: negative noise sigma");
  for (double v : {s.cortical_rim_intensity, s.interior_base_intensity, s.background_intensity})
    if (!(v >= 0.0 && v <= 1.0)) throw std::invalid_argument("phantom: intensity outside [0,1]");
  if (!(s.texture_amplitude >= 0.0) || !(s.texture_perturbation >= 0.0))
    throw std::invalid_argument("phantom: negative texture amplitude");
  if (!(s.texture_correlation_length > 0.0))
    throw std::invalid_argument("phantom: correlation length must be > 0");
  validate_params(s.truth_upper);
  validate_params(s.truth_lower);
}

namespace detail {

inline std::uint64_t texture_seed(std::uint64_t rng_seed, int bone) {
  return splitmix64(rng_seed ^ (0x74657874ULL + std::uint64_t(bone)));
}

inline std::uint64_t perturbation_seed(std::uint64_t rng_seed, int bone, int image_tag) {
  return splitmix64(rng_seed ^ (0x70657274ULL + 2 * std::uint64_t(bone) + std::uint64_t(image_tag)));
}

// Scene intensity contribution of one bone at bone-local point q; blends a
// 2 px cortical rim into the textured interior and antialiases the outline
// over a 1 px coverage band.
inline void bone_scene_value(const PhantomSpec& s, const PhantomGeometry& g, int bone,
                             int image_tag, double qx, double qy, double& value) {
  const double d = rounded_rect_sdf(qx, qy, g.half_width, g.half_height, g.corner_radius);
  if (d >= 0.5) return;
  const double coverage = std::clamp(0.5 - d, 0.0, 1.0);
  double inner = s.cortical_rim_intensity;
  const double w = std::clamp(-(d + 2.0), 0.0, 1.0);
  if (w > 0.0) {
    double tex = s.interior_base_intensity +
                 s.texture_amplitude * value_noise(texture_seed(s.rng_seed, bone), qx, qy,
                                                   s.texture_correlation_length);
    if (s.texture_perturbation > 0.0)
      tex += s.texture_perturbation * value_noise(perturbation_seed(s.rng_seed, bone, image_tag),
                                                  qx, qy, s.texture_correlation_length);
    inner = inner + w * (tex - inner);
  }
  value = value + coverage * (inner - value);
}

// Renders the scene; inv[bone] maps image coordinates back to the bone's
// rest-frame scene coordinates (identity for the fixed image).
inline JointImage render_phantom(const PhantomSpec& s, const PhantomGeometry& g,
                                 const TransformMatrix* inv0, const TransformMatrix* inv1,
                                 int image_tag, const std::string& identity) {
  JointImage im = make_image(s.width, s.height, 1.0, s.background_intensity, identity);
  const double cx = 0.5 * double(s.width - 1);
  const double cy = 0.5 * double(s.height - 1);
  const TransformMatrix* inv[2] = {inv0, inv1};
  for (int y = 0; y < s.height; ++y) {
    const double uy = double(y) - cy;
    for (int x = 0; x < s.width; ++x) {
      const double ux = double(x) - cx;
      double v = s.background_intensity;
      for (int bone = 0; bone < 2; ++bone) {
        double sx = ux, sy = uy;
        if (inv[bone]) inv[bone]->apply(ux, uy, sx, sy);
        bone_scene_value(s, g, bone, image_tag, sx, sy - g.center_y[bone], v);
      }
      im.at(x, y) = v;
    }
  }
  if (s.noise_sigma > 0.0) {
    const std::uint64_t base = s.noise_seed ? s.noise_seed : s.rng_seed;
    Rng rng(splitmix64(base ^ (0x6e6f6973ULL + std::uint64_t(image_tag))));
    for (double& p : im.pixels) p += s.noise_sigma * rng.normal();
  }
  for (double& p : im.pixels) p = std::clamp(p, 0.0, 1.0);
  return im;
}

inline void require_bone_in_frame(const PhantomSpec& s, const PhantomGeometry& g, int bone,
                                  const TransformMatrix* motion) {
  const double hx = 0.5 * double(s.width - 1) - 1.0;
  const double hy = 0.5 * double(s.height - 1) - 1.0;
  for (int cxs : {-1, 1})
    for (int cys : {-1, 1}) {
      double px = cxs * (g.half_width + 1.0);
      double py = g.center_y[bone] + cys * (g.half_height + 1.0);
      if (motion) motion->apply(px, py, px, py);
      if (std::abs(px) > hx || std::abs(py) > hy)
        throw std::invalid_argument("phantom: bones out of frame under truth transforms");
    }
}

}  // namespace detail

// Builds the (fixed, moving) pair. Texture is shared between the two images
// and rides with each bone under its truth motion; sensor noise realizations
// are independent. Masks split at the horizontal line through the fixed
// image's gap midpoint.
inline PhantomPair generate_pair(const PhantomSpec& s) {
  validate_phantom_spec(s);
  const PhantomGeometry g = phantom_geometry(s);
  detail::require_bone_in_frame(s, g, 0, nullptr);
  detail::require_bone_in_frame(s, g, 1, nullptr);
  const TransformMatrix t0 = build_matrix(s.truth_upper);
  const TransformMatrix t1 = build_matrix(s.truth_lower);
  detail::require_bone_in_frame(s, g, 0, &t0);
  detail::require_bone_in_frame(s, g, 1, &t1);
  const TransformMatrix inv0 = invert(t0);
  const TransformMatrix inv1 = invert(t1);

  PhantomPair pair;
  const std::string tag = "phantom_" + std::to_string(s.rng_seed);
  pair.fixed = detail::render_phantom(s, g, nullptr, nullptr, 0, tag + "_fixed");
  pair.moving = detail::render_phantom(s, g, &inv0, &inv1, 1, tag + "_moving");

  SegmentationMask mask;
  mask.width = s.width;
  mask.height = s.height;
  mask.labels.resize(std::size_t(s.width) * s.height);
  const double cy = 0.5 * double(s.height - 1);
  for (int y = 0; y < s.height; ++y)
    for (int x = 0; x < s.width; ++x) mask.at(x, y) = double(y) < cy ? 0 : 1;
  pair.fixed_mask = mask;
  pair.moving_mask = mask;

  pair.truth_upper = s.truth_upper;
  pair.truth_lower = s.truth_lower;
  pair.truth_jsn_pixels = s.truth_upper.dy - s.truth_lower.dy;
  return pair;
}

}  // namespace jsnreg
