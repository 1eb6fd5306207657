#pragma once

// The registration objective: mask partition, warped-region composition, the
// root-mean-square Euclidean-distance loss, and its weighted two-region form.
// Region losses are normalized by the full image area m*n, not by region
// pixel count, so they scale with region size.

#include <cmath>
#include <stdexcept>

#include "jsnreg/image.hpp"

namespace jsnreg {

// Upper/lower region images; each is zero outside its region, and their sum
// reconstructs the masked source.
struct RegionPair {
  JointImage upper;
  JointImage lower;
};

struct LossWeights {
  double alpha = 0.5;
  double beta = 0.5;
};

inline void validate_weights(const LossWeights& w) {
  if (!(w.alpha >= 0.0 && w.alpha <= 1.0) || !(w.beta >= 0.0 && w.beta <= 1.0))
    throw std::invalid_argument("weights: alpha/beta must lie in [0,1]");
  if (std::abs(w.alpha + w.beta - 1.0) > 1e-9)
    throw std::invalid_argument("weights: alpha + beta must equal 1");
}

// F0 = F where mask = 0 (upper), F1 = F where mask = 1 (lower).
inline RegionPair partition(const JointImage& image, const SegmentationMask& mask) {
  require_same_shape(image, mask);
  RegionPair rp;
  rp.upper = make_image(image.width, image.height, image.resolution_mm, 0.0, image.identity);
  rp.lower = make_image(image.width, image.height, image.resolution_mm, 0.0, image.identity);
  for (std::size_t i = 0; i < image.pixels.size(); ++i) {
    if (mask.labels[i] == 0)
      rp.upper.pixels[i] = image.pixels[i];
    else
      rp.lower.pixels[i] = image.pixels[i];
  }
  return rp;
}

// Pixelwise sum of the two region images.
inline JointImage compose(const RegionPair& regions) {
  require_same_shape(regions.upper, regions.lower);
  JointImage out = regions.upper;
  for (std::size_t i = 0; i < out.pixels.size(); ++i) out.pixels[i] += regions.lower.pixels[i];
  return out;
}

// sqrt( (1/(m*n)) * sum (a - b)^2 ): a root-mean-square despite the source
// naming it MSE.
inline double euclidean_loss(const JointImage& a, const JointImage& b) {
  require_same_shape(a, b);
  double acc = 0.0;
  for (std::size_t i = 0; i < a.pixels.size(); ++i) {
    const double d = a.pixels[i] - b.pixels[i];
    acc += d * d;
  }
  return std::sqrt(acc / double(a.pixels.size()));
}

struct RegionLoss {
  double total = 0.0;
  double upper = 0.0;
  double lower = 0.0;
};

// total = alpha * L(F*!S, G0') + beta * L(F*S, G1'). The fixed image's mask
// extracts the regions of both operands.
inline RegionLoss region_loss(const JointImage& fixed, const RegionPair& warped_regions,
                              const SegmentationMask& mask, const LossWeights& w) {
  require_same_shape(fixed, mask);
  require_same_shape(fixed, warped_regions.upper);
  require_same_shape(fixed, warped_regions.lower);
  validate_weights(w);
  double acc_u = 0.0, acc_l = 0.0;
  for (std::size_t i = 0; i < fixed.pixels.size(); ++i) {
    const double f_u = mask.labels[i] == 0 ? fixed.pixels[i] : 0.0;
    const double f_l = mask.labels[i] == 1 ? fixed.pixels[i] : 0.0;
    const double du = f_u - warped_regions.upper.pixels[i];
    const double dl = f_l - warped_regions.lower.pixels[i];
    acc_u += du * du;
    acc_l += dl * dl;
  }
  const double inv_mn = 1.0 / double(fixed.pixels.size());
  RegionLoss out;
  out.upper = std::sqrt(acc_u * inv_mn);
  out.lower = std::sqrt(acc_l * inv_mn);
  out.total = w.alpha * out.upper + w.beta * out.lower;
  return out;
}

// Per-pixel |a - b|.
inline LossSpectrum loss_spectrum(const JointImage& a, const JointImage& b) {
  require_same_shape(a, b);
  LossSpectrum s;
  s.width = a.width;
  s.height = a.height;
  s.values.resize(a.pixels.size());
  for (std::size_t i = 0; i < a.pixels.size(); ++i)
    s.values[i] = std::abs(a.pixels[i] - b.pixels[i]);
  return s;
}

}  // namespace jsnreg
