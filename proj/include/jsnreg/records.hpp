#pragma once

// Result-record and manifest serialization. Per-pair results are emitted as
// line-delimited JSON (append-only); manifests are consumed as JSON lines,
// one task per record, with relative paths resolved against the manifest's
// directory.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "jsnreg/evaluation.hpp"
#include "jsnreg/pnm.hpp"
#include "jsnreg/registration.hpp"

namespace jsnreg {

inline constexpr const char* kToolVersion = "0.1.0";

using Json = nlohmann::ordered_json;

inline Json params_to_json(const RigidParams& p) {
  return Json{{"dz", p.dz},
              {"dtheta_rad", p.dtheta},
              {"dtheta_deg", rad2deg(p.dtheta)},
              {"dx_px", p.dx},
              {"dy_px", p.dy}};
}

inline Json result_to_json(const RegistrationResult& r) {
  Json j;
  j["p_upper"] = params_to_json(r.p_upper);
  j["p_lower"] = params_to_json(r.p_lower);
  j["original_loss_regional"] = r.original_loss_regional;
  j["original_loss_global"] = r.original_loss_global;
  j["warped_loss"] = r.warped_loss;
  j["warped_loss_upper"] = r.warped_loss_upper;
  j["warped_loss_lower"] = r.warped_loss_lower;
  j["jsn_pixels"] = r.jsn_pixels;
  j["jsn_mm"] = r.jsn_mm;
  j["iterations_used"] = r.iterations_used;
  j["converged"] = r.converged;
  j["at_bounds_upper"] = r.at_bounds_upper;
  j["at_bounds_lower"] = r.at_bounds_lower;
  j["mismatch"] = r.mismatch;
  j["mask_overlap_diagnostic"] = r.mask_overlap_diagnostic;
  return j;
}

inline void append_jsonl(const Json& j, const std::string& path) {
  std::ofstream out(path, std::ios::app);
  if (!out) throw std::runtime_error(path + ": unwritable output path");
  out << j.dump() << "\n";
  if (!out) throw std::runtime_error(path + ": write failed");
}

// A manifest line for pair batches:
// {"pair_id":..., "fixed":..., "moving":..., "fixed_mask":..., "moving_mask":...,
//  "resolution_mm":..., "truth_jsn_pixels":...}
// (resolution and truth optional).
struct ManifestEntry {
  std::string pair_id;
  std::string fixed, moving, fixed_mask, moving_mask;
  std::optional<double> resolution_mm;
  std::optional<double> truth_jsn_pixels;
};

namespace detail {

inline std::string resolve_path(const std::filesystem::path& base, const std::string& p) {
  std::filesystem::path fp(p);
  if (fp.is_absolute()) return fp.string();
  return (base / fp).string();
}

}  // namespace detail

inline std::vector<ManifestEntry> load_pair_manifest(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": unreadable manifest");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    ManifestEntry e;
    e.pair_id = j.value("pair_id", "pair_" + std::to_string(lineno));
    for (const char* field : {"fixed", "moving", "fixed_mask", "moving_mask"})
      if (!j.contains(field))
        throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing '" +
                                 std::string(field) + "'");
    e.fixed = detail::resolve_path(base, j["fixed"].get<std::string>());
    e.moving = detail::resolve_path(base, j["moving"].get<std::string>());
    e.fixed_mask = detail::resolve_path(base, j["fixed_mask"].get<std::string>());
    e.moving_mask = detail::resolve_path(base, j["moving_mask"].get<std::string>());
    if (j.contains("resolution_mm")) e.resolution_mm = j["resolution_mm"].get<double>();
    if (j.contains("truth_jsn_pixels")) e.truth_jsn_pixels = j["truth_jsn_pixels"].get<double>();
    entries.push_back(std::move(e));
  }
  return entries;
}

inline PairTask load_pair_task(const ManifestEntry& e, double default_resolution_mm) {
  const double res = e.resolution_mm.value_or(default_resolution_mm);
  PairTask t;
  t.pair_id = e.pair_id;
  t.fixed = read_image(e.fixed, res);
  t.moving = read_image(e.moving, res);
  t.fixed_mask = read_mask(e.fixed_mask);
  t.moving_mask = read_mask(e.moving_mask);
  t.truth_jsn_pixels = e.truth_jsn_pixels;
  return t;
}

// A series manifest line: {"image":..., "mask":...}; an optional "joint_id"
// on any line names the series. Lines are time order.
inline JointSeries load_series_manifest(const std::string& path, double default_resolution_mm) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error(path + ": unreadable manifest");
  const std::filesystem::path base = std::filesystem::path(path).parent_path();
  JointSeries s;
  s.joint_id = std::filesystem::path(path).stem().string();
  s.resolution_mm = default_resolution_mm;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r\n") == std::string::npos) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": bad JSON: " + e.what());
    }
    if (j.contains("joint_id")) s.joint_id = j["joint_id"].get<std::string>();
    if (j.contains("resolution_mm")) s.resolution_mm = j["resolution_mm"].get<double>();
    if (!j.contains("image") || !j.contains("mask"))
      throw std::runtime_error(path + ":" + std::to_string(lineno) + ": missing 'image'/'mask'");
    s.images.push_back(
        read_image(detail::resolve_path(base, j["image"].get<std::string>()), s.resolution_mm));
    s.masks.push_back(read_mask(detail::resolve_path(base, j["mask"].get<std::string>())));
  }
  for (JointImage& im : s.images) im.resolution_mm = s.resolution_mm;
  return s;
}

}  // namespace jsnreg
