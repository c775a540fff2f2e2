#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hydemic/spectral_data.hpp"

namespace hydemic {

struct RegionSpec {
  std::string class_name;
  std::vector<std::array<double, 2>> polygon;  // (x, y) vertices, pixel coords
  int priority = 0;

  // >= 3 vertices and no self-intersection (segment-pair check).
  void validate() const;
};

struct SceneSpec {
  int width = 0;
  int height = 0;
  std::vector<RegionSpec> regions;
  std::string background_class = "ground";
  double background_reflectance = 0.05;
  double noise_level = 0.0;
  uint64_t seed = 0;

  void validate() const;
  static SceneSpec from_json_text(const std::string& text);
  std::string to_json_text() const;
};

struct HyperCube {
  int height = 0;
  int width = 0;
  int bands = 0;
  std::vector<double> data;  // (y, x, band) order
  std::vector<int> truth;    // H*W class indices; empty when absent

  double& at(int y, int x, int b) {
    return data[(static_cast<size_t>(y) * width + x) * bands + b];
  }
  double at(int y, int x, int b) const {
    return data[(static_cast<size_t>(y) * width + x) * bands + b];
  }
  const double* pixel(int index) const {
    return data.data() + static_cast<size_t>(index) * bands;
  }
  bool has_truth() const { return !truth.empty(); }
  int64_t pixel_count() const { return static_cast<int64_t>(height) * width; }
};

// Even-odd (ray crossing) membership; points on the boundary count as
// inside. Throws on degenerate polygons.
bool point_in_polygon(double x, double y,
                      std::span<const std::array<double, 2>> polygon);

// Assigns each pixel (tested at its center) the clean base signature of the
// highest-priority region containing it, or the constant background.
// Overlap ties resolve to the earlier region. Pure in (spec, library).
HyperCube build_scene(const SceneSpec& spec, const SpectralLibrary& library);

// Relative Gaussian noise: each value r becomes clip(r + level*r*z, 0, 1)
// with an independent draw per (pixel, band), keyed by a counter-based
// hash of (seed, pixel, band). The truth grid is untouched.
HyperCube inject_noise(const HyperCube& cube, double level, uint64_t seed);

struct PixelSpectrum {
  int pixel_index = 0;
  std::span<const double> spectrum;
  int truth = -1;  // -1 when the cube carries no truth grid
};

// Row-major (y*W + x) enumeration; spans view into the cube.
std::vector<PixelSpectrum> flatten_pixels(const HyperCube& cube);

// HCUB1 container: text header "HCUB1 <H> <W> <B> <has_truth>\n", then
// float32 little-endian data in (y, x, band) order, then H*W uint16
// class indices when has_truth is 1.
void write_hypercube(const HyperCube& cube, const std::filesystem::path& path);
HyperCube read_hypercube(const std::filesystem::path& path);

}  // namespace hydemic
