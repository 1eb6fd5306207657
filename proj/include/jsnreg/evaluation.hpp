#pragma once

// Reliability metrics over series and batches: consistency sigma through
// intermediate images, perturbation sigma-prime under random translations,
// and batch mismatch/warped-loss statistics.

#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "jsnreg/image.hpp"
#include "jsnreg/registration.hpp"
#include "jsnreg/rng.hpp"

namespace jsnreg {

// Time-ordered images of one joint with their masks; resolution is uniform.
struct JointSeries {
  std::string joint_id;
  std::vector<JointImage> images;
  std::vector<SegmentationMask> masks;
  double resolution_mm = 1.0;
};

inline void validate_series(const JointSeries& s) {
  if (s.images.size() != s.masks.size())
    throw std::invalid_argument("series: image/mask count mismatch");
  if (s.images.size() < 3)
    throw std::invalid_argument("series: at least 3 images required for sigma");
  for (std::size_t i = 0; i < s.images.size(); ++i) {
    require_same_shape(s.images[i], s.images[0]);
    require_same_shape(s.images[i], s.masks[i]);
  }
}

// Caches pairwise registrations of one series (pure-function memoization;
// affects runtime only).
class SeriesRegistrar {
 public:
  SeriesRegistrar(const JointSeries& series, OptimizerConfig cfg, LossWeights weights)
      : series_(series), cfg_(std::move(cfg)), weights_(weights) {
    validate_series(series_);
  }

  const RegistrationResult& at(int from, int to) {
    const auto key = std::make_pair(from, to);
    auto it = cache_.find(key);
    if (it == cache_.end()) {
      it = cache_
               .emplace(key, register_pair(series_.images[from], series_.images[to],
                                           series_.masks[from], series_.masks[to], cfg_, weights_))
               .first;
    }
    return it->second;
  }

  const JointSeries& series() const { return series_; }

 private:
  const JointSeries& series_;
  OptimizerConfig cfg_;
  LossWeights weights_;
  std::map<std::pair<int, int>, RegistrationResult> cache_;
};

struct SigmaResult {
  double sigma_pixels = 0.0;
  double sigma_mm = 0.0;
  double mean_jsn_pixels = 0.0;
  int intermediates_used = 0;
  std::vector<int> excluded;  // intermediate indices dropped as mismatches
};

// Indirect-path consistency: for each intermediate I, JSN(F,G via I) =
// JSN(F,I) + JSN(I,G); sigma is the population standard deviation of those
// values. Intermediates whose component registrations mismatch are excluded.
inline SigmaResult sigma_consistency(SeriesRegistrar& reg, int f_index, int g_index) {
  const JointSeries& s = reg.series();
  const int n = int(s.images.size());
  if (f_index < 0 || g_index < 0 || f_index >= n || g_index >= n || f_index == g_index)
    throw std::invalid_argument("sigma_consistency: bad pair indices");
  SigmaResult out;
  std::vector<double> values;
  for (int i = 0; i < n; ++i) {
    if (i == f_index || i == g_index) continue;
    const RegistrationResult& fi = reg.at(f_index, i);
    const RegistrationResult& ig = reg.at(i, g_index);
    if (fi.mismatch || ig.mismatch) {
      out.excluded.push_back(i);
      continue;
    }
    values.push_back(fi.jsn_pixels + ig.jsn_pixels);
  }
  if (values.empty())
    throw std::runtime_error("sigma_consistency: no valid intermediates remain");
  double mean = 0.0;
  for (double v : values) mean += v;
  mean /= double(values.size());
  double var = 0.0;
  for (double v : values) var += (v - mean) * (v - mean);
  var /= double(values.size());
  out.sigma_pixels = std::sqrt(var);
  out.sigma_mm = out.sigma_pixels * s.resolution_mm;
  out.mean_jsn_pixels = mean;
  out.intermediates_used = int(values.size());
  return out;
}

inline SigmaResult sigma_consistency(const JointSeries& series, int f_index, int g_index,
                                     const OptimizerConfig& cfg = {},
                                     const LossWeights& weights = {}) {
  SeriesRegistrar reg(series, cfg, weights);
  return sigma_consistency(reg, f_index, g_index);
}

struct SigmaPrimeOptions {
  int samples = 10;
  double translation_range = 3.0;  // components uniform in [-range, +range]
  double mad_factor = 3.0;
  // Deviations below a quarter pixel are within the bilinear resampling
  // phase envelope and are never treated as outliers; the MAD term dominates
  // whenever the sample spread is genuinely larger.
  double min_deviation_px = 0.25;
  int min_retained = 3;
};

struct SigmaPrimeResult {
  double sigma_pixels = 0.0;
  double sigma_mm = 0.0;
  int used = 0;
  std::vector<double> jsn_samples;  // survivors, draw order
  int mismatches = 0;
  int outliers = 0;
};

// Perturbation spread: re-registers after translating the moving image (and
// its mask) by seeded random sub-pixel translations. Registration mismatches
// are removed first, then |x - median| > max(mad_factor * MAD, deadband)
// outliers; the population standard deviation of the survivors is returned.
inline SigmaPrimeResult sigma_prime(const JointImage& fixed, const JointImage& moving,
                                    const SegmentationMask& fixed_mask,
                                    const SegmentationMask& moving_mask,
                                    const OptimizerConfig& cfg = {}, const LossWeights& weights = {},
                                    std::uint64_t rng_seed = 1, const SigmaPrimeOptions& opt = {}) {
  if (opt.samples < opt.min_retained)
    throw std::invalid_argument("sigma_prime: samples below minimum retained");
  Rng rng(rng_seed);
  std::vector<double> values;
  SigmaPrimeResult out;
  for (int j = 0; j < opt.samples; ++j) {
    const double tx = rng.uniform(-opt.translation_range, opt.translation_range);
    const double ty = rng.uniform(-opt.translation_range, opt.translation_range);
    const TransformMatrix t = build_matrix(RigidParams{1.0, 0.0, tx, ty});
    const JointImage moved = warp(moving, t);
    const SegmentationMask moved_mask = warp_mask_nn(moving_mask, t);
    const RegistrationResult r =
        register_pair(fixed, moved, fixed_mask, moved_mask, cfg, weights);
    if (r.mismatch) {
      ++out.mismatches;
      continue;
    }
    values.push_back(r.jsn_pixels);
  }
  if (int(values.size()) < opt.min_retained)
    throw std::runtime_error("sigma_prime: fewer than " + std::to_string(opt.min_retained) +
                             " survivors");
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const auto median_of = [](const std::vector<double>& v) {
    const std::size_t n = v.size();
    return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
  };
  const double med = median_of(sorted);
  std::vector<double> dev;
  dev.reserve(values.size());
  for (double v : values) dev.push_back(std::abs(v - med));
  std::sort(dev.begin(), dev.end());
  const double mad = median_of(dev);
  const double threshold = std::max(opt.mad_factor * mad, opt.min_deviation_px);
  std::vector<double> kept;
  for (double v : values) {
    if (std::abs(v - med) > threshold)
      ++out.outliers;
    else
      kept.push_back(v);
  }
  if (int(kept.size()) < opt.min_retained)
    throw std::runtime_error("sigma_prime: fewer than " + std::to_string(opt.min_retained) +
                             " survivors");
  double mean = 0.0;
  for (double v : kept) mean += v;
  mean /= double(kept.size());
  double var = 0.0;
  for (double v : kept) var += (v - mean) * (v - mean);
  var /= double(kept.size());
  out.sigma_pixels = std::sqrt(var);
  out.sigma_mm = out.sigma_pixels * fixed.resolution_mm;
  out.used = int(kept.size());
  out.jsn_samples = std::move(kept);
  return out;
}

// One registration task of a batch.
struct PairTask {
  std::string pair_id;
  JointImage fixed;
  JointImage moving;
  SegmentationMask fixed_mask;
  SegmentationMask moving_mask;
  std::optional<double> truth_jsn_pixels;
};

struct TaskResult {
  std::string pair_id;
  bool ok = false;
  std::string error;
  RegistrationResult result;
};

// Batch-level aggregate (sigma fields filled only by the ops that compute them).
struct EvaluationRecord {
  std::string pair_id;
  std::optional<double> sigma_mm;
  std::optional<double> sigma_prime_mm;
  double mismatch_ratio = 0.0;
  double mean_warped_loss = 0.0;
  double mean_original_loss = 0.0;
  double half_loss_fraction = 0.0;
};

struct BatchOutcome {
  EvaluationRecord record;
  std::vector<TaskResult> results;
};

// Registers every task (optionally across jobs threads; results are
// aggregated in task order so output is independent of scheduling).
// Individual failures become mismatches.
inline BatchOutcome batch_evaluate(const std::vector<PairTask>& tasks,
                                   const OptimizerConfig& cfg = {}, const LossWeights& weights = {},
                                   int jobs = 1, const std::string& batch_id = "batch") {
  if (tasks.empty()) throw std::invalid_argument("batch_evaluate: empty batch");
  BatchOutcome out;
  out.results.resize(tasks.size());
  const auto run_task = [&](std::size_t i) {
    TaskResult& tr = out.results[i];
    tr.pair_id = tasks[i].pair_id;
    try {
      tr.result = register_pair(tasks[i].fixed, tasks[i].moving, tasks[i].fixed_mask,
                                tasks[i].moving_mask, cfg, weights);
      tr.ok = true;
    } catch (const std::exception& e) {
      tr.ok = false;
      tr.error = e.what();
      tr.result.mismatch = true;
    }
  };
  const int n_jobs = std::max(1, jobs);
  if (n_jobs == 1 || tasks.size() == 1) {
    for (std::size_t i = 0; i < tasks.size(); ++i) run_task(i);
  } else {
    std::vector<std::thread> pool;
    for (int t = 0; t < n_jobs; ++t)
      pool.emplace_back([&, t] {
        for (std::size_t i = std::size_t(t); i < tasks.size(); i += std::size_t(n_jobs)) run_task(i);
      });
    for (std::thread& th : pool) th.join();
  }

  EvaluationRecord& rec = out.record;
  rec.pair_id = batch_id;
  std::size_t mismatched = 0, halved = 0, kept = 0;
  double warped_sum = 0.0, original_sum = 0.0;
  for (const TaskResult& tr : out.results) {
    if (tr.result.mismatch) {
      ++mismatched;
    } else {
      ++kept;
      warped_sum += tr.result.warped_loss;
      original_sum += tr.result.original_loss_regional;
    }
    if (tr.ok && tr.result.warped_loss < 0.5 * tr.result.original_loss_regional) ++halved;
  }
  rec.mismatch_ratio = double(mismatched) / double(tasks.size());
  rec.half_loss_fraction = double(halved) / double(tasks.size());
  rec.mean_warped_loss = kept ? warped_sum / double(kept) : 0.0;
  rec.mean_original_loss = kept ? original_sum / double(kept) : 0.0;
  return out;
}

}  // namespace jsnreg
