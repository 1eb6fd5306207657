#pragma once

// Heuristic two-region segmentation for phantoms and simple crops, plus the
// confusion-matrix quality metrics (mIoU, SEN, SPC, DSC, ACC).

#include <algorithm>
#include <array>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "jsnreg/image.hpp"

namespace jsnreg {

namespace detail {

// Threshold maximizing between-class intensity variance over a 256-bin
// histogram. Returns the bin upper edge as an intensity; throws when the
// image has no two-class structure.
inline double otsu_threshold(const JointImage& im) {
  constexpr int kBins = 256;
  std::array<double, kBins> hist{};
  for (double v : im.pixels) {
    int b = int(v * kBins);
    if (b >= kBins) b = kBins - 1;
    if (b < 0) b = 0;
    hist[b] += 1.0;
  }
  const double total = double(im.pixels.size());
  double sum_all = 0.0;
  for (int b = 0; b < kBins; ++b) sum_all += b * hist[b];
  double w0 = 0.0, sum0 = 0.0, best_var = 0.0;
  int best_bin = -1;
  for (int b = 0; b < kBins - 1; ++b) {
    w0 += hist[b];
    if (w0 == 0.0) continue;
    const double w1 = total - w0;
    if (w1 == 0.0) break;
    sum0 += b * hist[b];
    const double mu0 = sum0 / w0;
    const double mu1 = (sum_all - sum0) / w1;
    const double var = w0 * w1 * (mu0 - mu1) * (mu0 - mu1);
    if (var > best_var) {
      best_var = var;
      best_bin = b;
    }
  }
  if (best_bin < 0 || best_var <= 0.0)
    throw std::runtime_error("heuristic_segment: cannot split (no intensity structure)");
  return (best_bin + 1) / double(kBins);
}

}  // namespace detail

// Binarizes by the maximum-between-class-variance threshold, then splits at
// the minimum of the row-sum profile within the middle half of the image
// (middle of the minimal plateau). Rows above the split row are labeled 0,
// the split row and below 1.
inline SegmentationMask heuristic_segment(const JointImage& image) {
  validate_image(image);
  const double thr = detail::otsu_threshold(image);
  std::vector<int> profile(image.height, 0);
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x)
      if (image.at(x, y) >= thr) ++profile[y];

  const int lo = image.height / 4;
  const int hi = 3 * image.height / 4;  // exclusive
  int min_val = profile[lo];
  for (int y = lo; y < hi; ++y) min_val = std::min(min_val, profile[y]);
  // Middle of the longest contiguous run of minimal rows (the gap).
  int best_first = lo, best_len = 0, run_first = -1;
  for (int y = lo; y <= hi; ++y) {
    if (y < hi && profile[y] == min_val) {
      if (run_first < 0) run_first = y;
    } else if (run_first >= 0) {
      if (y - run_first > best_len) {
        best_len = y - run_first;
        best_first = run_first;
      }
      run_first = -1;
    }
  }
  const int split = best_first + best_len / 2;

  int max_above = 0, max_below = 0;
  for (int y = 0; y < split; ++y) max_above = std::max(max_above, profile[y]);
  for (int y = split + 1; y < image.height; ++y) max_below = std::max(max_below, profile[y]);
  if (max_above <= min_val || max_below <= min_val)
    throw std::runtime_error("heuristic_segment: cannot split (no interior profile minimum)");

  SegmentationMask m;
  m.width = image.width;
  m.height = image.height;
  m.labels.resize(image.pixel_count());
  for (int y = 0; y < image.height; ++y)
    for (int x = 0; x < image.width; ++x) m.at(x, y) = y < split ? 0 : 1;
  return m;
}

struct SegMetrics {
  double miou = 0.0;
  double sen = 0.0;
  double spc = 0.0;
  double dsc = 0.0;
  double acc = 0.0;
};

// Confusion-matrix metrics with label 1 as the positive class; mIoU averages
// the per-class intersection-over-union of labels {0, 1}.
inline SegMetrics segmentation_metrics(const SegmentationMask& predicted,
                                       const SegmentationMask& truth) {
  require_same_shape(predicted, truth);
  double tp = 0, fp = 0, fn = 0, tn = 0;
  for (std::size_t i = 0; i < truth.labels.size(); ++i) {
    const bool p = predicted.labels[i] == 1;
    const bool t = truth.labels[i] == 1;
    tp += p && t;
    fp += p && !t;
    fn += !p && t;
    tn += !p && !t;
  }
  const auto ratio = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
  SegMetrics m;
  m.sen = ratio(tp, tp + fn);
  m.spc = ratio(tn, tn + fp);
  m.dsc = ratio(2.0 * tp, 2.0 * tp + fp + fn);
  m.acc = ratio(tp + tn, tp + tn + fp + fn);
  const double iou1 = ratio(tp, tp + fp + fn);
  const double iou0 = ratio(tn, tn + fp + fn);
  m.miou = 0.5 * (iou0 + iou1);
  return m;
}

}  // namespace jsnreg
