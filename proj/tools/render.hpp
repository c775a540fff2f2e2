#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "hydemic/evaluation.hpp"

namespace hydemic::render {

struct Rgb {
  uint8_t r = 0, g = 0, b = 0;
};

// Deterministic golden-angle HSV wheel; the ground class is fixed dark gray.
Rgb class_color(int class_index, int ground_index);
std::string color_hex(Rgb c);

void write_ppm(std::span<const int> classes, int width, int height,
               int ground_index, const std::filesystem::path& path);

// Figure-style panels, emitted as standalone SVG documents.
std::string svg_class_map(std::span<const int> classes, int width, int height,
                          int ground_index);
std::string svg_summary(int64_t n_correct, int64_t n_incorrect);
std::string svg_confidence_scatter(std::span<const ConfidenceRecord> records);
std::string svg_confidence_histograms(const DensityHistogram& correct,
                                      const DensityHistogram& incorrect);

}  // namespace hydemic::render
