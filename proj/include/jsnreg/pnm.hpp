#pragma once

// Portable-anymap I/O: 8/16-bit PGM (P2/P5) for images and masks, 8-bit PPM
// (P6) for rendered heatmaps. 16-bit binary samples are big-endian per the
// PNM convention.

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "jsnreg/image.hpp"

namespace jsnreg {

namespace detail {

inline int pnm_next_token(std::istream& in, std::string& tok) {
  tok.clear();
  int c = in.get();
  while (c != EOF) {
    if (c == '#') {
      while (c != EOF && c != '\n') c = in.get();
    } else if (std::isspace(c)) {
      c = in.get();
    } else {
      break;
    }
  }
  while (c != EOF && !std::isspace(c)) {
    tok.push_back(char(c));
    c = in.get();
  }
  return tok.empty() ? EOF : 0;
}

inline long pnm_int_token(std::istream& in, const std::string& path) {
  std::string tok;
  if (pnm_next_token(in, tok) == EOF) throw std::runtime_error(path + ": truncated header");
  try {
    return std::stol(tok);
  } catch (const std::exception&) {
    throw std::runtime_error(path + ": bad header token '" + tok + "'");
  }
}

struct PnmHeader {
  std::string magic;
  int width = 0, height = 0;
  long maxval = 0;
};

inline PnmHeader read_pnm_header(std::istream& in, const std::string& path) {
  PnmHeader h;
  if (pnm_next_token(in, h.magic) == EOF) throw std::runtime_error(path + ": empty file");
  if (h.magic != "P2" && h.magic != "P5" && h.magic != "P3" && h.magic != "P6")
    throw std::runtime_error(path + ": unsupported format '" + h.magic + "'");
  h.width = int(pnm_int_token(in, path));
  h.height = int(pnm_int_token(in, path));
  h.maxval = pnm_int_token(in, path);
  if (h.width <= 0 || h.height <= 0) throw std::runtime_error(path + ": zero-sized image");
  if (h.maxval <= 0 || h.maxval > 65535) throw std::runtime_error(path + ": bad maxval");
  return h;
}

// Raw grayscale samples in file order.
inline std::vector<long> read_pgm_samples(const std::string& path, PnmHeader& h) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error(path + ": unreadable file");
  h = read_pnm_header(in, path);
  if (h.magic == "P3" || h.magic == "P6")
    throw std::runtime_error(path + ": multi-channel input, expected single-channel");
  const std::size_t n = std::size_t(h.width) * h.height;
  std::vector<long> samples(n);
  if (h.magic == "P2") {
    for (std::size_t i = 0; i < n; ++i) samples[i] = pnm_int_token(in, path);
  } else {
    // P5: one whitespace byte after maxval, then raw samples.
    const int bytes = h.maxval > 255 ? 2 : 1;
    std::vector<unsigned char> raw(n * bytes);
    in.read(reinterpret_cast<char*>(raw.data()), std::streamsize(raw.size()));
    if (std::size_t(in.gcount()) != raw.size()) throw std::runtime_error(path + ": truncated pixel data");
    for (std::size_t i = 0; i < n; ++i) {
      samples[i] = bytes == 2 ? long(raw[2 * i]) << 8 | raw[2 * i + 1] : long(raw[i]);
    }
  }
  for (long v : samples)
    if (v < 0 || v > h.maxval) throw std::runtime_error(path + ": sample outside [0,maxval]");
  return samples;
}

}  // namespace detail

// Reads an 8/16-bit single-channel PGM and rescales intensities to [0,1] by
// the file's maxval. The identity tag is taken from the filename stem
// (<patient>_<joint>_<date> by convention).
inline JointImage read_image(const std::string& path, double resolution_mm) {
  detail::PnmHeader h;
  const std::vector<long> samples = detail::read_pgm_samples(path, h);
  JointImage im = make_image(h.width, h.height, resolution_mm);
  im.identity = std::filesystem::path(path).stem().string();
  const double scale = 1.0 / double(h.maxval);
  for (std::size_t i = 0; i < samples.size(); ++i) im.pixels[i] = double(samples[i]) * scale;
  require_min_extent(im);
  validate_image(im);
  return im;
}

// Reads a bi-level single-channel raster as a segmentation mask: values at or
// below half scale map to 0 (upper region), above to 1 (lower region).
// Inputs with levels away from both extremes are rejected as ambiguous.
inline SegmentationMask read_mask(const std::string& path) {
  detail::PnmHeader h;
  const std::vector<long> samples = detail::read_pgm_samples(path, h);
  long lo = samples[0], hi = samples[0];
  for (long v : samples) {
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  const long tol = std::max(1L, h.maxval / 100);
  for (long v : samples)
    if (v > lo + tol && v < hi - tol)
      throw std::runtime_error(path + ": not bi-level (intermediate gray levels present)");
  SegmentationMask m;
  m.width = h.width;
  m.height = h.height;
  m.labels.resize(samples.size());
  const long half = h.maxval / 2;
  for (std::size_t i = 0; i < samples.size(); ++i) m.labels[i] = samples[i] > half ? 1 : 0;
  try {
    validate_mask(m);
  } catch (const std::invalid_argument& e) {
    throw std::runtime_error(path + ": " + e.what());
  }
  return m;
}

// Writes a binary PGM; bits must be 8 or 16.
inline void write_image(const JointImage& im, const std::string& path, int bits = 16) {
  validate_image(im);
  if (bits != 8 && bits != 16) throw std::invalid_argument("write_image: bits must be 8 or 16");
  const long maxval = bits == 16 ? 65535 : 255;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": unwritable path");
  out << "P5\n" << im.width << " " << im.height << "\n" << maxval << "\n";
  for (double v : im.pixels) {
    const long q = std::lround(v * double(maxval));
    if (bits == 16) {
      out.put(char((q >> 8) & 0xff));
      out.put(char(q & 0xff));
    } else {
      out.put(char(q & 0xff));
    }
  }
  if (!out) throw std::runtime_error(path + ": write failed");
}

inline void write_mask(const SegmentationMask& m, const std::string& path) {
  validate_mask(m);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": unwritable path");
  out << "P5\n" << m.width << " " << m.height << "\n255\n";
  for (std::uint8_t v : m.labels) out.put(v ? char(255) : char(0));
  if (!out) throw std::runtime_error(path + ": write failed");
}

// Monotone black-red-yellow-white colormap. t in [0,1].
inline void colormap_hot(double t, std::uint8_t rgb[3]) {
  const auto chan = [](double v) {
    return std::uint8_t(std::lround(std::clamp(v, 0.0, 1.0) * 255.0));
  };
  rgb[0] = chan(3.0 * t);
  rgb[1] = chan(3.0 * t - 1.0);
  rgb[2] = chan(3.0 * t - 2.0);
}

// Maps a spectrum to RGB: zero residual is the coldest color, the
// 99th-percentile value (nearest rank) the hottest; larger values clamp.
// Falls back to max normalization when the 99th percentile is zero so a
// single hot pixel stays visible.
inline std::vector<std::uint8_t> spectrum_to_rgb(const LossSpectrum& s) {
  if (s.width <= 0 || s.height <= 0 || s.values.size() != std::size_t(s.width) * s.height)
    throw std::invalid_argument("spectrum: bad dimensions");
  for (double v : s.values)
    if (!(v >= 0.0)) throw std::invalid_argument("spectrum: negative value");
  std::vector<double> sorted(s.values);
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  const std::size_t rank = std::size_t(std::ceil(0.99 * double(n)));
  double scale = sorted[rank == 0 ? 0 : rank - 1];
  if (scale <= 0.0) scale = sorted.back();
  std::vector<std::uint8_t> rgb(n * 3);
  for (std::size_t i = 0; i < n; ++i) {
    const double t = scale > 0.0 ? std::min(s.values[i] / scale, 1.0) : 0.0;
    colormap_hot(t, &rgb[3 * i]);
  }
  return rgb;
}

// Renders the spectrum heatmap as an 8-bit 3-channel PPM.
inline void render_spectrum(const LossSpectrum& s, const std::string& path) {
  const std::vector<std::uint8_t> rgb = spectrum_to_rgb(s);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error(path + ": unwritable path");
  out << "P6\n" << s.width << " " << s.height << "\n255\n";
  out.write(reinterpret_cast<const char*>(rgb.data()), std::streamsize(rgb.size()));
  if (!out) throw std::runtime_error(path + ": write failed");
}

}  // namespace jsnreg
