#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "hydemic/errors.hpp"

namespace hydemic {

// Reflectance magnitudes beyond this are "deleted band" sentinels
// (e.g. -1.23e34) and get masked rather than ingested.
inline constexpr double kSentinelThreshold = 1e32;

// Values in (1, kMaxReflectance] are accepted (lab spectra can exceed 1);
// anything larger is rejected at load time.
inline constexpr double kMaxReflectance = 1.5;

struct Spectrum {
  std::string mineral_name;
  std::string spectrum_id;
  int class_index = -1;
  std::vector<double> reflectance;       // masked bands hold 0.0
  std::vector<uint8_t> band_valid;
  std::vector<double> wavelengths_um;    // optional; empty when absent

  int bands() const { return static_cast<int>(reflectance.size()); }
};

// Bijection between class names and indices; "ground" is always the last
// index regardless of whether the source data mentions it.
class LabelCodec {
 public:
  LabelCodec() = default;

  // Dedupes in first-appearance order, drops any literal "ground", then
  // appends "ground" as the final class.
  static LabelCodec from_mineral_names(const std::vector<std::string>& names);

  int encode(const std::string& name) const;
  const std::string& decode(int index) const;

  int size() const { return static_cast<int>(names_.size()); }
  int ground_index() const { return size() - 1; }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int> to_index_;
};

struct SpectralLibrary {
  std::vector<Spectrum> spectra;
  LabelCodec codec;
  std::string source;

  int bands() const { return spectra.empty() ? 0 : spectra.front().bands(); }
  const Spectrum* first_of_class(int class_index) const;
};

struct ValidationReport {
  int n_sentinel_masked = 0;
  int n_out_of_range = 0;
  int n_nonfinite = 0;
  bool ok = true;
};

enum class LibraryFormat { csv, usgs_ascii };

// CSV: header "mineral_name,spectrum_id,b000,...", one spectrum per row.
// usgs_ascii: a manifest of "path,mineral_name" lines; each referenced file
// holds a title line followed by one reflectance per line.
SpectralLibrary load_spectral_library(const std::filesystem::path& path,
                                      LibraryFormat format);

void write_library_csv(const SpectralLibrary& library,
                       const std::filesystem::path& path);

ValidationReport validate_spectrum(const Spectrum& s);

// Deterministic stand-in for laboratory library data: smooth per-class base
// curves with class-specific absorption features, small jitter between
// copies of the same class. Values always land in [0, 1].
SpectralLibrary generate_synthetic_library(int n_classes, int n_spectra_per_class,
                                           int n_bands, uint64_t seed);

// Masked bands filled by linear interpolation between the nearest valid
// neighbors (endpoint extension at the edges); this is the fixed-width
// vector the classifier consumes.
std::vector<double> model_input(const Spectrum& s);

}  // namespace hydemic
