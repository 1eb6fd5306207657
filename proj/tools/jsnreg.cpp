// jsnreg: quantifies joint-space-narrowing progression between two
// radiographs of the same finger joint by estimating one 4-parameter rigid
// motion per bone region and reporting JSN as the difference of vertical
// displacements. Exit status: 0 success, 1 error, 2 completed with a
// mismatch-flagged result.

#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "jsnreg/config.hpp"
#include "jsnreg/evaluation.hpp"
#include "jsnreg/phantom.hpp"
#include "jsnreg/phase_correlation.hpp"
#include "jsnreg/pnm.hpp"
#include "jsnreg/records.hpp"
#include "jsnreg/registration.hpp"
#include "jsnreg/segmentation.hpp"

namespace {

using namespace jsnreg;

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitMismatch = 2;

struct CommonOpts {
  std::string config_path;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<double> resolution_mm;
  std::optional<int> jobs;
  bool emit_spectra = false;
  bool emit_warped = false;
};

RunConfig effective_config(const CommonOpts& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_run_config(o.config_path);
  if (o.seed) cfg.optimizer.rng_seed = *o.seed;
  if (o.resolution_mm) cfg.resolution_mm_per_px = *o.resolution_mm;
  if (o.jobs) cfg.jobs = *o.jobs;
  if (o.emit_spectra) cfg.emit_spectra = true;
  if (o.emit_warped) cfg.emit_warped = true;
  validate_config(cfg.optimizer);
  if (!(cfg.resolution_mm_per_px > 0.0)) throw std::runtime_error("resolution must be > 0");
  return cfg;
}

std::string sibling_path(const std::string& out, const std::string& suffix) {
  std::filesystem::path p(out);
  return (p.parent_path() / (p.stem().string() + suffix)).string();
}

double ms_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
}

std::string csv_num(double v) {
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

int cmd_register(const CommonOpts& opts, const std::string& fixed_path,
                 const std::string& moving_path, const std::string& fixed_mask_path,
                 const std::string& moving_mask_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(opts);
  const JointImage fixed = read_image(fixed_path, cfg.resolution_mm_per_px);
  const JointImage moving = read_image(moving_path, cfg.resolution_mm_per_px);
  const SegmentationMask fixed_mask = read_mask(fixed_mask_path);
  const SegmentationMask moving_mask = read_mask(moving_mask_path);

  const RegistrationResult res =
      register_pair(fixed, moving, fixed_mask, moving_mask, cfg.optimizer, cfg.weights);

  Json record;
  record["tool"] = "jsnreg";
  record["version"] = kToolVersion;
  record["command"] = "register";
  record["convention"] = kTransformConvention;
  record["config_digest"] = config_digest(cfg);
  record["inputs"] = Json{{"fixed", fixed_path},
                          {"moving", moving_path},
                          {"fixed_mask", fixed_mask_path},
                          {"moving_mask", moving_mask_path},
                          {"fixed_identity", fixed.identity},
                          {"moving_identity", moving.identity},
                          {"resolution_mm_per_px", cfg.resolution_mm_per_px}};
  record["result"] = result_to_json(res);
  record["meta"] = Json{{"duration_ms", ms_since(t0)}};
  append_jsonl(record, opts.out);

  if (cfg.emit_warped || cfg.emit_spectra) {
    const WarpedMoving wm = warp_moving(moving, moving_mask, fixed_mask, res.p_upper, res.p_lower);
    if (cfg.emit_warped) write_image(wm.warped, sibling_path(opts.out, "_warped.pgm"));
    if (cfg.emit_spectra) {
      render_spectrum(loss_spectrum(fixed, moving), sibling_path(opts.out, "_spectrum_original.ppm"));
      render_spectrum(loss_spectrum(fixed, wm.warped), sibling_path(opts.out, "_spectrum_warped.ppm"));
    }
  }

  std::cout << "jsn_px=" << res.jsn_pixels << " jsn_mm=" << res.jsn_mm
            << " warped_loss=" << res.warped_loss << " mismatch=" << (res.mismatch ? 1 : 0)
            << "\n";
  return res.mismatch ? kExitMismatch : kExitOk;
}

int cmd_series(const CommonOpts& opts, const std::string& manifest) {
  const RunConfig cfg = effective_config(opts);
  const JointSeries series = load_series_manifest(manifest, cfg.resolution_mm_per_px);
  SeriesRegistrar reg(series, cfg.optimizer, cfg.weights);

  std::ofstream out(opts.out);
  if (!out) throw std::runtime_error(opts.out + ": unwritable output path");
  out << "pair,jsn_px,jsn_mm,sigma_px,sigma_mm,mismatch\n";
  bool any_mismatch = false;
  const int n = int(series.images.size());
  for (int f = 0; f < n; ++f)
    for (int g = f + 1; g < n; ++g) {
      const RegistrationResult& direct = reg.at(f, g);
      const SigmaResult sig = sigma_consistency(reg, f, g);
      any_mismatch = any_mismatch || direct.mismatch;
      out << f << "-" << g << "," << csv_num(direct.jsn_pixels) << ","
          << csv_num(direct.jsn_mm) << "," << csv_num(sig.sigma_pixels) << ","
          << csv_num(sig.sigma_mm) << "," << (direct.mismatch ? 1 : 0) << "\n";
    }
  if (!out) throw std::runtime_error(opts.out + ": write failed");
  return any_mismatch ? kExitMismatch : kExitOk;
}

int cmd_sigma_prime(const CommonOpts& opts, const std::string& fixed_path,
                    const std::string& moving_path, const std::string& fixed_mask_path,
                    const std::string& moving_mask_path) {
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = effective_config(opts);
  const JointImage fixed = read_image(fixed_path, cfg.resolution_mm_per_px);
  const JointImage moving = read_image(moving_path, cfg.resolution_mm_per_px);
  const SegmentationMask fixed_mask = read_mask(fixed_mask_path);
  const SegmentationMask moving_mask = read_mask(moving_mask_path);

  const SigmaPrimeResult r = sigma_prime(fixed, moving, fixed_mask, moving_mask, cfg.optimizer,
                                         cfg.weights, cfg.optimizer.rng_seed, cfg.sigma_prime);
  Json record;
  record["tool"] = "jsnreg";
  record["version"] = kToolVersion;
  record["command"] = "sigma-prime";
  record["config_digest"] = config_digest(cfg);
  record["inputs"] = Json{{"fixed", fixed_path}, {"moving", moving_path}};
  record["result"] = Json{{"sigma_prime_px", r.sigma_pixels},
                          {"sigma_prime_mm", r.sigma_mm},
                          {"used", r.used},
                          {"mismatches", r.mismatches},
                          {"outliers", r.outliers},
                          {"jsn_samples_px", r.jsn_samples}};
  record["meta"] = Json{{"duration_ms", ms_since(t0)}};
  append_jsonl(record, opts.out);
  std::cout << "sigma_prime_px=" << r.sigma_pixels << " used=" << r.used << "\n";
  return kExitOk;
}

int cmd_phantom(const std::string& spec_path, const std::string& out_dir) {
  const PhantomSpec spec = spec_path.empty() ? PhantomSpec{} : load_phantom_spec(spec_path);
  const PhantomPair pair = generate_pair(spec);
  std::filesystem::create_directories(out_dir);
  const auto p = [&](const char* name) { return (std::filesystem::path(out_dir) / name).string(); };
  write_image(pair.fixed, p("fixed.pgm"));
  write_image(pair.moving, p("moving.pgm"));
  write_mask(pair.fixed_mask, p("fixed_mask.pgm"));
  write_mask(pair.moving_mask, p("moving_mask.pgm"));
  Json truth;
  truth["truth_upper"] = params_to_json(pair.truth_upper);
  truth["truth_lower"] = params_to_json(pair.truth_lower);
  truth["truth_jsn_pixels"] = pair.truth_jsn_pixels;
  truth["rng_seed"] = spec.rng_seed;
  truth["convention"] = kTransformConvention;
  std::ofstream out(p("truth.json"));
  if (!out) throw std::runtime_error(std::string(p("truth.json")) + ": unwritable path");
  out << truth.dump(2) << "\n";
  std::cout << "phantom written to " << out_dir << " truth_jsn_px=" << pair.truth_jsn_pixels
            << "\n";
  return kExitOk;
}

int cmd_segment(const CommonOpts& opts, const std::string& image_path) {
  const RunConfig cfg = effective_config(opts);
  const JointImage image = read_image(image_path, cfg.resolution_mm_per_px);
  const SegmentationMask mask = heuristic_segment(image);
  write_mask(mask, opts.out);
  return kExitOk;
}

int cmd_seg_metrics(const std::string& predicted_path, const std::string& truth_path,
                    const std::string& out) {
  const SegmentationMask predicted = read_mask(predicted_path);
  const SegmentationMask truth = read_mask(truth_path);
  const SegMetrics m = segmentation_metrics(predicted, truth);
  Json j{{"mIoU", m.miou}, {"SEN", m.sen}, {"SPC", m.spc}, {"DSC", m.dsc}, {"ACC", m.acc}};
  std::cout << j.dump() << "\n";
  if (!out.empty()) {
    std::ofstream f(out);
    if (!f) throw std::runtime_error(out + ": unwritable output path");
    f << j.dump(2) << "\n";
  }
  return kExitOk;
}

int cmd_spectrum(const CommonOpts& opts, const std::string& a_path, const std::string& b_path) {
  const RunConfig cfg = effective_config(opts);
  const JointImage a = read_image(a_path, cfg.resolution_mm_per_px);
  const JointImage b = read_image(b_path, cfg.resolution_mm_per_px);
  const LossSpectrum s = loss_spectrum(a, b);
  render_spectrum(s, opts.out);
  std::cout << "loss=" << euclidean_loss(a, b) << "\n";
  return kExitOk;
}

int cmd_bench(const CommonOpts& opts, const std::string& manifest, bool with_sigma_prime) {
  const RunConfig cfg = effective_config(opts);
  const std::vector<ManifestEntry> entries = load_pair_manifest(manifest);
  if (entries.empty()) throw std::runtime_error(manifest + ": empty manifest");
  std::vector<PairTask> tasks;
  tasks.reserve(entries.size());
  for (const ManifestEntry& e : entries) tasks.push_back(load_pair_task(e, cfg.resolution_mm_per_px));

  const BatchOutcome batch = batch_evaluate(tasks, cfg.optimizer, cfg.weights, cfg.jobs, "bench");

  // Translation-only phase-correlation baseline on every task.
  struct BaselineRow {
    bool ok = false;
    double jsn = 0.0;
  };
  std::vector<BaselineRow> base(tasks.size());
  std::size_t base_fail = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    try {
      const BaselineResult r =
          phase_correlation_baseline(tasks[i].fixed, tasks[i].moving, tasks[i].fixed_mask);
      base[i] = {true, r.jsn_pixels};
    } catch (const std::exception&) {
      ++base_fail;
    }
  }

  // Per-task detail.
  std::ofstream detail(sibling_path(opts.out, "_tasks.csv"));
  if (!detail) throw std::runtime_error(opts.out + ": unwritable output path");
  detail << "task,method,jsn_px,truth_jsn_px,abs_error_px,mismatch\n";
  double opt_err_sum = 0.0, base_err_sum = 0.0;
  std::size_t truth_count = 0, base_err_count = 0;
  std::size_t base_err_over = 0;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const std::optional<double>& truth = tasks[i].truth_jsn_pixels;
    const RegistrationResult& r = batch.results[i].result;
    detail << tasks[i].pair_id << ",registration," << csv_num(r.jsn_pixels) << ","
           << (truth ? csv_num(*truth) : "NA") << ","
           << (truth ? csv_num(std::abs(r.jsn_pixels - *truth)) : "NA") << ","
           << (r.mismatch ? 1 : 0) << "\n";
    detail << tasks[i].pair_id << ",phase_correlation,"
           << (base[i].ok ? csv_num(base[i].jsn) : "NA") << ","
           << (truth ? csv_num(*truth) : "NA") << ","
           << (truth && base[i].ok ? csv_num(std::abs(base[i].jsn - *truth)) : "NA") << ","
           << (base[i].ok ? 0 : 1) << "\n";
    if (truth) {
      ++truth_count;
      opt_err_sum += std::abs(r.jsn_pixels - *truth);
      if (base[i].ok) {
        base_err_sum += std::abs(base[i].jsn - *truth);
        ++base_err_count;
        if (std::abs(base[i].jsn - *truth) > 0.5) ++base_err_over;
      } else {
        ++base_err_over;
      }
    }
  }

  std::optional<double> opt_sp, base_sp;
  if (with_sigma_prime) {
    // Mean sigma-prime across tasks for each method.
    double acc = 0.0;
    int cnt = 0;
    for (const PairTask& t : tasks) {
      try {
        const SigmaPrimeResult sp = sigma_prime(t.fixed, t.moving, t.fixed_mask, t.moving_mask,
                                                cfg.optimizer, cfg.weights,
                                                cfg.optimizer.rng_seed, cfg.sigma_prime);
        acc += sp.sigma_mm;
        ++cnt;
      } catch (const std::exception&) {
      }
    }
    if (cnt) opt_sp = acc / cnt;
    Rng rng(cfg.optimizer.rng_seed);
    double bacc = 0.0;
    int bcnt = 0;
    for (const PairTask& t : tasks) {
      std::vector<double> vals;
      for (int j = 0; j < cfg.sigma_prime.samples; ++j) {
        const double tx = rng.uniform(-cfg.sigma_prime.translation_range,
                                      cfg.sigma_prime.translation_range);
        const double ty = rng.uniform(-cfg.sigma_prime.translation_range,
                                      cfg.sigma_prime.translation_range);
        try {
          const JointImage moved = warp(t.moving, build_matrix({1.0, 0.0, tx, ty}));
          vals.push_back(phase_correlation_baseline(t.fixed, moved, t.fixed_mask).jsn_pixels);
        } catch (const std::exception&) {
        }
      }
      if (int(vals.size()) < cfg.sigma_prime.min_retained) continue;
      double mean = 0.0;
      for (double v : vals) mean += v;
      mean /= double(vals.size());
      double var = 0.0;
      for (double v : vals) var += (v - mean) * (v - mean);
      bacc += std::sqrt(var / double(vals.size())) * cfg.resolution_mm_per_px;
      ++bcnt;
    }
    if (bcnt) base_sp = bacc / bcnt;
  }

  std::ofstream out(opts.out);
  if (!out) throw std::runtime_error(opts.out + ": unwritable output path");
  out << "method,tasks,sigma_mm,sigma_prime_mm,mismatch_ratio,mean_warped_loss,"
         "half_loss_fraction,mean_abs_jsn_error_px\n";
  out << "registration," << tasks.size() << ",NA,"
      << (opt_sp ? csv_num(*opt_sp) : "NA") << "," << csv_num(batch.record.mismatch_ratio) << ","
      << csv_num(batch.record.mean_warped_loss) << "," << csv_num(batch.record.half_loss_fraction)
      << "," << (truth_count ? csv_num(opt_err_sum / double(truth_count)) : "NA") << "\n";
  out << "phase_correlation," << tasks.size() << ",NA,"
      << (base_sp ? csv_num(*base_sp) : "NA") << ","
      << csv_num(double(base_fail) / double(tasks.size())) << ",NA,NA,"
      << (base_err_count ? csv_num(base_err_sum / double(base_err_count)) : "NA") << "\n";
  if (!out) throw std::runtime_error(opts.out + ": write failed");

  std::cout << "registration mismatch_ratio=" << batch.record.mismatch_ratio
            << " baseline_failed_or_gross_error=" << base_err_over << "/" << truth_count << "\n";
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"jsnreg: joint-space narrowing progression by two-region rigid registration"};
  app.require_subcommand(1);

  CommonOpts opts;
  std::string fixed, moving, fixed_mask, moving_mask, manifest, spec_path, a_path, b_path;
  std::string predicted_path, truth_path, out_dir, metrics_out;
  bool bench_sigma_prime = false;

  const auto add_common = [&](CLI::App* sub, bool with_out = true) {
    sub->add_option("--config", opts.config_path, "key=value configuration file");
    if (with_out) sub->add_option("--out", opts.out, "output path")->required();
    sub->add_option("--seed", opts.seed, "override rng seed");
    sub->add_option("--resolution-mm", opts.resolution_mm, "override mm per pixel");
    sub->add_option("--jobs", opts.jobs, "parallel registrations for batch commands");
    sub->add_flag("--emit-spectra", opts.emit_spectra, "write loss-spectrum heatmaps");
    sub->add_flag("--emit-warped", opts.emit_warped, "write the warped moving image");
  };

  CLI::App* reg = app.add_subcommand("register", "register one pair and report JSN");
  reg->add_option("fixed", fixed)->required();
  reg->add_option("moving", moving)->required();
  reg->add_option("fixed_mask", fixed_mask)->required();
  reg->add_option("moving_mask", moving_mask)->required();
  add_common(reg);

  CLI::App* ser = app.add_subcommand("series", "pairwise JSN and consistency sigma over a series");
  ser->add_option("--manifest", manifest, "series manifest (JSON lines)")->required();
  add_common(ser);

  CLI::App* sp = app.add_subcommand("sigma-prime", "perturbation standard deviation of one pair");
  sp->add_option("fixed", fixed)->required();
  sp->add_option("moving", moving)->required();
  sp->add_option("fixed_mask", fixed_mask)->required();
  sp->add_option("moving_mask", moving_mask)->required();
  add_common(sp);

  CLI::App* ph = app.add_subcommand("phantom", "generate a synthetic phantom pair");
  ph->add_option("--spec", spec_path, "phantom spec (key=value); defaults when omitted");
  ph->add_option("--out", out_dir, "output directory")->required();

  CLI::App* seg = app.add_subcommand("segment", "heuristic two-region segmentation");
  seg->add_option("image", a_path)->required();
  add_common(seg);

  CLI::App* sm = app.add_subcommand("seg-metrics", "segmentation quality metrics");
  sm->add_option("predicted", predicted_path)->required();
  sm->add_option("truth", truth_path)->required();
  sm->add_option("--out", metrics_out, "optional JSON output path");

  CLI::App* spec = app.add_subcommand("spectrum", "loss-spectrum heatmap between two images");
  spec->add_option("a", a_path)->required();
  spec->add_option("b", b_path)->required();
  add_common(spec);

  CLI::App* bench = app.add_subcommand("bench", "registration vs phase-correlation comparison");
  bench->add_option("--manifest", manifest, "pair manifest (JSON lines)")->required();
  bench->add_flag("--sigma-prime", bench_sigma_prime, "also compute sigma-prime per method");
  add_common(bench);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitError;
  }

  try {
    if (reg->parsed()) return cmd_register(opts, fixed, moving, fixed_mask, moving_mask);
    if (ser->parsed()) return cmd_series(opts, manifest);
    if (sp->parsed()) return cmd_sigma_prime(opts, fixed, moving, fixed_mask, moving_mask);
    if (ph->parsed()) return cmd_phantom(spec_path, out_dir);
    if (seg->parsed()) return cmd_segment(opts, a_path);
    if (sm->parsed()) return cmd_seg_metrics(predicted_path, truth_path, metrics_out);
    if (spec->parsed()) return cmd_spectrum(opts, a_path, b_path);
    if (bench->parsed()) return cmd_bench(opts, manifest, bench_sigma_prime);
  } catch (const std::exception& e) {
    std::cerr << "jsnreg: " << e.what() << "\n";
    return kExitError;
  }
  return kExitError;
}
