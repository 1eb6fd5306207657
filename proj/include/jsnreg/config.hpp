#pragma once

// Plain-text key=value configuration with explicit units in key names
// (degrees at the surface, radians internally; px and mm spelled out).
// Unknown keys are rejected. The canonical serialization of the effective
// configuration is hashed into a digest that identifies a run.

#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "jsnreg/evaluation.hpp"
#include "jsnreg/phantom.hpp"
#include "jsnreg/registration.hpp"

namespace jsnreg {

using KeyValues = std::map<std::string, std::string>;

namespace detail {

inline std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

inline double to_double(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const double d = std::stod(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad numeric value for '" + key + "': " + v);
  }
}

inline long to_long(const std::string& key, const std::string& v) {
  try {
    std::size_t pos = 0;
    const long n = std::stol(v, &pos);
    if (pos != v.size()) throw std::invalid_argument(v);
    return n;
  } catch (const std::exception&) {
    throw std::runtime_error("config: bad integer value for '" + key + "': " + v);
  }
}

inline bool to_bool(const std::string& key, const std::string& v) {
  if (v == "1" || v == "true" || v == "yes") return true;
  if (v == "0" || v == "false" || v == "no") return false;
  throw std::runtime_error("config: bad boolean value for '" + key + "': " + v);
}

inline std::vector<double> to_double_list(const std::string& key, const std::string& v) {
  std::vector<double> out;
  std::stringstream ss(v);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(to_double(key, item));
  }
  if (out.empty()) throw std::runtime_error("config: empty list for '" + key + "'");
  return out;
}

inline std::string format_double(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

}  // namespace detail

inline KeyValues parse_key_values(std::istream& in, const std::string& origin) {
  KeyValues kv;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.resize(hash);
    line = detail::trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = detail::trim(line.substr(0, eq));
    const std::string val = detail::trim(line.substr(eq + 1));
    if (key.empty()) throw std::runtime_error(origin + ":" + std::to_string(lineno) + ": empty key");
    kv[key] = val;
  }
  return kv;
}

inline KeyValues parse_key_value_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": unreadable config file");
  return parse_key_values(in, path);
}

struct RunConfig {
  OptimizerConfig optimizer;
  LossWeights weights;
  SigmaPrimeOptions sigma_prime;
  double resolution_mm_per_px = 0.175;
  bool emit_spectra = false;
  bool emit_warped = false;
  int jobs = 1;
};

inline RunConfig run_config_from_kv(const KeyValues& kv) {
  RunConfig c;
  for (const auto& [key, val] : kv) {
    if (key == "pyramid_levels") c.optimizer.pyramid_levels = int(detail::to_long(key, val));
    else if (key == "max_iterations_per_level")
      c.optimizer.max_iterations_per_level = int(detail::to_long(key, val));
    else if (key == "step_size") c.optimizer.step_size = detail::to_double(key, val);
    else if (key == "step_decay") c.optimizer.step_decay = detail::to_double(key, val);
    else if (key == "plateau_patience") c.optimizer.plateau_patience = int(detail::to_long(key, val));
    else if (key == "convergence_tolerance")
      c.optimizer.convergence_tolerance = detail::to_double(key, val);
    else if (key == "dz_min") c.optimizer.bounds.dz_min = detail::to_double(key, val);
    else if (key == "dz_max") c.optimizer.bounds.dz_max = detail::to_double(key, val);
    else if (key == "theta_max_deg") c.optimizer.bounds.theta_max = deg2rad(detail::to_double(key, val));
    else if (key == "x_max_px") c.optimizer.bounds.x_max = detail::to_double(key, val);
    else if (key == "y_max_px") c.optimizer.bounds.y_max = detail::to_double(key, val);
    else if (key == "rotation_seeds_deg") {
      c.optimizer.rotation_seeds.clear();
      for (double d : detail::to_double_list(key, val))
        c.optimizer.rotation_seeds.push_back(deg2rad(d));
    } else if (key == "rng_seed") c.optimizer.rng_seed = std::uint64_t(detail::to_long(key, val));
    else if (key == "mismatch_dice_threshold")
      c.optimizer.mismatch_dice_threshold = detail::to_double(key, val);
    else if (key == "alpha") c.weights.alpha = detail::to_double(key, val);
    else if (key == "beta") c.weights.beta = detail::to_double(key, val);
    else if (key == "resolution_mm_per_px") c.resolution_mm_per_px = detail::to_double(key, val);
    else if (key == "emit_spectra") c.emit_spectra = detail::to_bool(key, val);
    else if (key == "emit_warped") c.emit_warped = detail::to_bool(key, val);
    else if (key == "jobs") c.jobs = int(detail::to_long(key, val));
    else if (key == "sigma_prime_samples") c.sigma_prime.samples = int(detail::to_long(key, val));
    else if (key == "sigma_prime_translation_px")
      c.sigma_prime.translation_range = detail::to_double(key, val);
    else if (key == "sigma_prime_mad_factor") c.sigma_prime.mad_factor = detail::to_double(key, val);
    else if (key == "sigma_prime_min_deviation_px")
      c.sigma_prime.min_deviation_px = detail::to_double(key, val);
    else if (key == "sigma_prime_min_retained")
      c.sigma_prime.min_retained = int(detail::to_long(key, val));
    else
      throw std::runtime_error("config: unknown key '" + key + "'");
  }
  validate_config(c.optimizer);
  validate_weights(c.weights);
  if (!(c.resolution_mm_per_px > 0.0)) throw std::runtime_error("config: resolution must be > 0");
  if (c.jobs < 1) throw std::runtime_error("config: jobs must be >= 1");
  return c;
}

inline RunConfig load_run_config(const std::string& path) {
  return run_config_from_kv(parse_key_value_file(path));
}

// Canonical serialization of the effective configuration (sorted keys,
// full-precision values). Hashing this identifies the run setup.
inline std::string canonical_config_text(const RunConfig& c) {
  using detail::format_double;
  std::map<std::string, std::string> kv;
  kv["pyramid_levels"] = std::to_string(c.optimizer.pyramid_levels);
  kv["max_iterations_per_level"] = std::to_string(c.optimizer.max_iterations_per_level);
  kv["step_size"] = format_double(c.optimizer.step_size);
  kv["step_decay"] = format_double(c.optimizer.step_decay);
  kv["plateau_patience"] = std::to_string(c.optimizer.plateau_patience);
  kv["convergence_tolerance"] = format_double(c.optimizer.convergence_tolerance);
  kv["dz_min"] = format_double(c.optimizer.bounds.dz_min);
  kv["dz_max"] = format_double(c.optimizer.bounds.dz_max);
  kv["theta_max_deg"] = format_double(rad2deg(c.optimizer.bounds.theta_max));
  kv["x_max_px"] = format_double(c.optimizer.bounds.x_max);
  kv["y_max_px"] = format_double(c.optimizer.bounds.y_max);
  {
    std::string seeds;
    for (double s : c.optimizer.rotation_seeds) {
      if (!seeds.empty()) seeds += ",";
      seeds += format_double(rad2deg(s));
    }
    kv["rotation_seeds_deg"] = seeds;
  }
  kv["rng_seed"] = std::to_string(c.optimizer.rng_seed);
  kv["mismatch_dice_threshold"] = format_double(c.optimizer.mismatch_dice_threshold);
  kv["alpha"] = format_double(c.weights.alpha);
  kv["beta"] = format_double(c.weights.beta);
  kv["resolution_mm_per_px"] = format_double(c.resolution_mm_per_px);
  kv["emit_spectra"] = c.emit_spectra ? "1" : "0";
  kv["emit_warped"] = c.emit_warped ? "1" : "0";
  kv["jobs"] = std::to_string(c.jobs);
  kv["sigma_prime_samples"] = std::to_string(c.sigma_prime.samples);
  kv["sigma_prime_translation_px"] = format_double(c.sigma_prime.translation_range);
  kv["sigma_prime_mad_factor"] = format_double(c.sigma_prime.mad_factor);
  kv["sigma_prime_min_deviation_px"] = format_double(c.sigma_prime.min_deviation_px);
  kv["sigma_prime_min_retained"] = std::to_string(c.sigma_prime.min_retained);
  std::string out;
  for (const auto& [k, v] : kv) out += k + "=" + v + "\n";
  return out;
}

inline std::uint64_t fnv1a64(const std::string& s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string config_digest(const RunConfig& c) {
  std::ostringstream os;
  os << std::hex;
  os.width(16);
  os.fill('0');
  os << fnv1a64(canonical_config_text(c));
  return os.str();
}

inline PhantomSpec phantom_spec_from_kv(const KeyValues& kv) {
  PhantomSpec s;
  for (const auto& [key, val] : kv) {
    if (key == "width") s.width = int(detail::to_long(key, val));
    else if (key == "height") s.height = int(detail::to_long(key, val));
    else if (key == "bone_half_width_px") s.bone_half_width = detail::to_double(key, val);
    else if (key == "gap_px") s.gap = detail::to_double(key, val);
    else if (key == "cortical_rim_intensity") s.cortical_rim_intensity = detail::to_double(key, val);
    else if (key == "interior_base_intensity")
      s.interior_base_intensity = detail::to_double(key, val);
    else if (key == "texture_amplitude") s.texture_amplitude = detail::to_double(key, val);
    else if (key == "texture_correlation_length_px")
      s.texture_correlation_length = detail::to_double(key, val);
    else if (key == "background_intensity") s.background_intensity = detail::to_double(key, val);
    else if (key == "noise_sigma") s.noise_sigma = detail::to_double(key, val);
    else if (key == "texture_perturbation") s.texture_perturbation = detail::to_double(key, val);
    else if (key == "rng_seed") s.rng_seed = std::uint64_t(detail::to_long(key, val));
    else if (key == "noise_seed") s.noise_seed = std::uint64_t(detail::to_long(key, val));
    else if (key == "truth_upper_dz") s.truth_upper.dz = detail::to_double(key, val);
    else if (key == "truth_upper_dtheta_deg") s.truth_upper.dtheta = deg2rad(detail::to_double(key, val));
    else if (key == "truth_upper_dx_px") s.truth_upper.dx = detail::to_double(key, val);
    else if (key == "truth_upper_dy_px") s.truth_upper.dy = detail::to_double(key, val);
    else if (key == "truth_lower_dz") s.truth_lower.dz = detail::to_double(key, val);
    else if (key == "truth_lower_dtheta_deg") s.truth_lower.dtheta = deg2rad(detail::to_double(key, val));
    else if (key == "truth_lower_dx_px") s.truth_lower.dx = detail::to_double(key, val);
    else if (key == "truth_lower_dy_px") s.truth_lower.dy = detail::to_double(key, val);
    else
      throw std::runtime_error("phantom spec: unknown key '" + key + "'");
  }
  validate_phantom_spec(s);
  return s;
}

inline PhantomSpec load_phantom_spec(const std::string& path) {
  return phantom_spec_from_kv(parse_key_value_file(path));
}

}  // namespace jsnreg
