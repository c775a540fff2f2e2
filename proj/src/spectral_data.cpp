#include "hydemic/spectral_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "hydemic/io_util.hpp"
#include "hydemic/rng.hpp"

namespace hydemic {

namespace {

constexpr double kCanonicalSentinel = -1.23e34;

const char* kMineralNames[] = {
    "Cuprite",     "Malachite", "Chalcopyrite", "Azurite",   "Bornite",
    "Chrysocolla", "Hematite",  "Goethite",     "Magnetite", "Kaolinite",
    "Montmorillonite", "Illite", "Muscovite",   "Biotite",   "Quartz",
    "Calcite",     "Dolomite",  "Gypsum",       "Alunite",   "Jarosite",
    "Epidote",     "Chlorite",  "Actinolite",   "Olivine"};

std::string synthetic_class_name(int index) {
  constexpr int known = static_cast<int>(std::size(kMineralNames));
  if (index < known) return kMineralNames[index];
  char buf[32];
  std::snprintf(buf, sizeof(buf), "mineral_%03d", index);
  return buf;
}

}  // namespace

// -------------------------------------------------------------- LabelCodec

LabelCodec LabelCodec::from_mineral_names(const std::vector<std::string>& names) {
  LabelCodec codec;
  for (const auto& name : names) {
    if (name == "ground") continue;
    if (codec.to_index_.contains(name)) continue;
    codec.to_index_.emplace(name, static_cast<int>(codec.names_.size()));
    codec.names_.push_back(name);
  }
  codec.to_index_.emplace("ground", static_cast<int>(codec.names_.size()));
  codec.names_.emplace_back("ground");
  return codec;
}

int LabelCodec::encode(const std::string& name) const {
  const auto it = to_index_.find(name);
  if (it == to_index_.end()) {
    throw LookupError("unknown class name: " + name);
  }
  return it->second;
}

const std::string& LabelCodec::decode(int index) const {
  if (index < 0 || index >= size()) {
    throw LookupError("class index " + std::to_string(index) +
                      " out of range [0, " + std::to_string(size()) + ")");
  }
  return names_[static_cast<size_t>(index)];
}

// --------------------------------------------------------- SpectralLibrary

const Spectrum* SpectralLibrary::first_of_class(int class_index) const {
  for (const auto& s : spectra) {
    if (s.class_index == class_index) return &s;
  }
  return nullptr;
}

// ------------------------------------------------------------------ loading

namespace {

void assign_classes(SpectralLibrary& lib) {
  std::vector<std::string> names;
  names.reserve(lib.spectra.size());
  for (const auto& s : lib.spectra) names.push_back(s.mineral_name);
  lib.codec = LabelCodec::from_mineral_names(names);
  for (auto& s : lib.spectra) s.class_index = lib.codec.encode(s.mineral_name);
}

// Shared per-value ingestion: sentinel masking plus the 1.5 ceiling.
void ingest_value(double v, long line, Spectrum& s) {
  if (std::abs(v) > kSentinelThreshold) {
    s.reflectance.push_back(0.0);
    s.band_valid.push_back(0);
    return;
  }
  if (v > kMaxReflectance) {
    throw ParseError("reflectance " + format_double(v) + " exceeds " +
                         format_double(kMaxReflectance),
                     line);
  }
  s.reflectance.push_back(v);
  s.band_valid.push_back(1);
}

SpectralLibrary load_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open library file: " + path.string());

  SpectralLibrary lib;
  lib.source = "csv:" + path.string();

  std::string line;
  if (!std::getline(in, line)) throw DataError("empty library file: " + path.string());
  const auto header = split_csv_line(strip_eol(line));
  if (header.size() < 3 || header[0] != "mineral_name" || header[1] != "spectrum_id") {
    throw ParseError("expected header mineral_name,spectrum_id,b000,...", 1);
  }
  const size_t bands = header.size() - 2;

  std::set<std::pair<std::string, std::string>> seen;
  long line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = strip_eol(line);
    if (stripped.empty()) continue;
    const auto fields = split_csv_line(stripped);
    if (fields.size() < 2 || fields[0].empty()) {
      throw ParseError("malformed row", line_no);
    }
    if (fields.size() - 2 != bands) {
      throw DimensionError("row " + std::to_string(line_no) + " has " +
                           std::to_string(fields.size() - 2) + " bands, header declares " +
                           std::to_string(bands));
    }

    Spectrum s;
    s.mineral_name = fields[0];
    s.spectrum_id = fields[1];
    if (!seen.emplace(s.mineral_name, s.spectrum_id).second) {
      throw DuplicateRecordError("duplicate record (" + s.mineral_name + ", " +
                                 s.spectrum_id + ") at line " + std::to_string(line_no));
    }
    s.reflectance.reserve(bands);
    s.band_valid.reserve(bands);
    for (size_t i = 2; i < fields.size(); ++i) {
      double v = 0.0;
      if (!parse_double(fields[i], v)) {
        throw ParseError("cannot parse reflectance value '" + fields[i] + "'", line_no);
      }
      ingest_value(v, line_no, s);
    }
    lib.spectra.push_back(std::move(s));
  }

  if (lib.spectra.empty()) throw DataError("library has no spectra: " + path.string());
  assign_classes(lib);
  return lib;
}

SpectralLibrary load_usgs_ascii(const std::filesystem::path& manifest_path) {
  std::ifstream manifest(manifest_path, std::ios::binary);
  if (!manifest) {
    throw ArgumentError("cannot open manifest: " + manifest_path.string());
  }

  SpectralLibrary lib;
  lib.source = "usgs_ascii:" + manifest_path.string();
  const auto base_dir = manifest_path.parent_path();

  std::set<std::pair<std::string, std::string>> seen;
  std::string line;
  long manifest_line = 0;
  while (std::getline(manifest, line)) {
    ++manifest_line;
    const std::string stripped = strip_eol(line);
    if (stripped.empty() || stripped.front() == '#') continue;
    const auto fields = split_csv_line(stripped);
    if (fields.size() != 2 || fields[0].empty() || fields[1].empty()) {
      throw ParseError("manifest line must be 'path,mineral_name'", manifest_line);
    }

    std::filesystem::path file = fields[0];
    if (file.is_relative()) file = base_dir / file;

    std::ifstream data(file, std::ios::binary);
    if (!data) throw ArgumentError("cannot open spectrum file: " + file.string());

    Spectrum s;
    s.mineral_name = fields[1];
    s.spectrum_id = file.stem().string();
    if (!seen.emplace(s.mineral_name, s.spectrum_id).second) {
      throw DuplicateRecordError("duplicate record (" + s.mineral_name + ", " +
                                 s.spectrum_id + ")");
    }

    std::string row;
    long file_line = 0;
    if (!std::getline(data, row)) {
      throw DataError("spectrum file missing title line: " + file.string());
    }
    ++file_line;
    while (std::getline(data, row)) {
      ++file_line;
      const std::string value_text = strip_eol(row);
      if (value_text.empty()) continue;
      double v = 0.0;
      if (!parse_double(value_text, v)) {
        throw ParseError("cannot parse reflectance value '" + value_text + "' in " +
                             file.string(),
                         file_line);
      }
      ingest_value(v, file_line, s);
    }
    if (s.reflectance.empty()) {
      throw DataError("spectrum file has no values: " + file.string());
    }
    if (!lib.spectra.empty() && s.bands() != lib.spectra.front().bands()) {
      throw DimensionError("spectrum " + file.string() + " has " +
                           std::to_string(s.bands()) + " bands, expected " +
                           std::to_string(lib.spectra.front().bands()));
    }
    lib.spectra.push_back(std::move(s));
  }

  if (lib.spectra.empty()) {
    throw DataError("manifest lists no spectra: " + manifest_path.string());
  }
  assign_classes(lib);
  return lib;
}

}  // namespace

SpectralLibrary load_spectral_library(const std::filesystem::path& path,
                                      LibraryFormat format) {
  switch (format) {
    case LibraryFormat::csv:
      return load_csv(path);
    case LibraryFormat::usgs_ascii:
      return load_usgs_ascii(path);
  }
  throw ArgumentError("unknown library format");
}

void write_library_csv(const SpectralLibrary& library,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << "mineral_name,spectrum_id";
  const int bands = library.bands();
  for (int b = 0; b < bands; ++b) {
    char col[16];
    std::snprintf(col, sizeof(col), ",b%03d", b);
    out << col;
  }
  out << "\n";
  for (const auto& s : library.spectra) {
    out << s.mineral_name << ',' << s.spectrum_id;
    for (int b = 0; b < bands; ++b) {
      out << ',';
      out << (s.band_valid[static_cast<size_t>(b)] ? format_double(s.reflectance[static_cast<size_t>(b)])
                                                   : format_double(kCanonicalSentinel));
    }
    out << "\n";
  }
  write_text_file(path, out.str());
}

// --------------------------------------------------------------- validate

ValidationReport validate_spectrum(const Spectrum& s) {
  ValidationReport report;
  for (size_t i = 0; i < s.reflectance.size(); ++i) {
    if (!s.band_valid[i]) {
      ++report.n_sentinel_masked;
      continue;
    }
    const double v = s.reflectance[i];
    if (!std::isfinite(v)) {
      ++report.n_nonfinite;
      continue;
    }
    if (v < 0.0 || v > kMaxReflectance) ++report.n_out_of_range;
  }
  report.ok = report.n_nonfinite == 0;
  return report;
}

// ------------------------------------------------------ synthetic library

namespace {

struct GaussianFeature {
  double center;  // in [0, 1] along the band axis
  double width;
  double depth;
};

double absorption(double t, const GaussianFeature& f) {
  const double d = (t - f.center) / f.width;
  return 1.0 - f.depth * std::exp(-0.5 * d * d);
}

}  // namespace

SpectralLibrary generate_synthetic_library(int n_classes, int n_spectra_per_class,
                                           int n_bands, uint64_t seed) {
  if (n_classes < 2) throw ArgumentError("generate_synthetic_library: need >= 2 classes");
  if (n_bands < 16) throw ArgumentError("generate_synthetic_library: need >= 16 bands");
  if (n_spectra_per_class < 1) {
    throw ArgumentError("generate_synthetic_library: need >= 1 spectrum per class");
  }

  SpectralLibrary lib;
  lib.source = "synthetic:seed=" + std::to_string(seed);

  // Classes are grouped into families that share a smooth base curve and a
  // set of anchor absorption features; classes inside a family differ in
  // anchor depths plus one class-unique feature. Families make some class
  // pairs spectrally close, the way related minerals are.
  const int family_size = 8;
  const int n_families = (n_classes + family_size - 1) / family_size;

  struct Family {
    double base_level, slope;
    GaussianFeature bumps[2];
    GaussianFeature anchors[3];
  };
  std::vector<Family> families(static_cast<size_t>(n_families));
  for (int f = 0; f < n_families; ++f) {
    Rng rng(mix_seed(seed, 0xFA0ull, static_cast<uint64_t>(f)));
    Family& fam = families[static_cast<size_t>(f)];
    fam.base_level = 0.30 + 0.30 * uniform01(rng);
    fam.slope = -0.10 + 0.30 * uniform01(rng);
    for (auto& bump : fam.bumps) {
      bump.center = uniform01(rng);
      bump.width = 0.15 + 0.25 * uniform01(rng);
      bump.depth = -(0.18 * uniform01(rng) - 0.08);  // sign folded into depth
    }
    for (auto& anchor : fam.anchors) {
      anchor.center = 0.08 + 0.84 * uniform01(rng);
      anchor.width = 0.02 + 0.04 * uniform01(rng);
      anchor.depth = 0.10 + 0.18 * uniform01(rng);
    }
  }

  std::vector<std::string> class_names;
  class_names.reserve(static_cast<size_t>(n_classes));
  for (int c = 0; c < n_classes; ++c) class_names.push_back(synthetic_class_name(c));
  lib.codec = LabelCodec::from_mineral_names(class_names);

  for (int c = 0; c < n_classes; ++c) {
    const Family& fam = families[static_cast<size_t>(c / family_size)];
    Rng class_rng(mix_seed(seed, 0xC1A55ull, static_cast<uint64_t>(c)));

    GaussianFeature anchors[3];
    for (int a = 0; a < 3; ++a) {
      anchors[a] = fam.anchors[a];
      anchors[a].depth *= 1.0 + 0.5 * (uniform01(class_rng) - 0.5);
    }
    GaussianFeature unique;
    unique.center = 0.08 + 0.84 * uniform01(class_rng);
    unique.width = 0.015 + 0.025 * uniform01(class_rng);
    unique.depth = 0.12 + 0.18 * uniform01(class_rng);

    auto clean_value = [&](double t) {
      double v = fam.base_level + fam.slope * t;
      for (const auto& bump : fam.bumps) {
        const double d = (t - bump.center) / bump.width;
        v += bump.depth * std::exp(-0.5 * d * d);
      }
      v *= absorption(t, anchors[0]) * absorption(t, anchors[1]) *
           absorption(t, anchors[2]) * absorption(t, unique);
      return std::clamp(v, 0.0, 1.0);
    };

    for (int k = 0; k < n_spectra_per_class; ++k) {
      Spectrum s;
      s.mineral_name = class_names[static_cast<size_t>(c)];
      {
        char id[32];
        std::snprintf(id, sizeof(id), "syn%05d", c * n_spectra_per_class + k);
        s.spectrum_id = id;
      }
      s.class_index = c;
      s.reflectance.reserve(static_cast<size_t>(n_bands));
      s.band_valid.assign(static_cast<size_t>(n_bands), 1);

      if (k == 0) {
        // copy 0 is the clean base signature used for scene pixels
        for (int b = 0; b < n_bands; ++b) {
          const double t = static_cast<double>(b) / (n_bands - 1);
          s.reflectance.push_back(clean_value(t));
        }
      } else {
        Rng copy_rng(mix_seed(seed, 0xC0B1ull,
                              static_cast<uint64_t>(c) * 100003ull + static_cast<uint64_t>(k)));
        const double gain = 1.0 + 0.04 * (uniform01(copy_rng) - 0.5);
        GaussianFeature wobble;
        wobble.center = uniform01(copy_rng);
        wobble.width = 0.08 + 0.15 * uniform01(copy_rng);
        wobble.depth = 0.02 * (uniform01(copy_rng) - 0.5);
        for (int b = 0; b < n_bands; ++b) {
          const double t = static_cast<double>(b) / (n_bands - 1);
          const double d = (t - wobble.center) / wobble.width;
          double v = clean_value(t) * gain + wobble.depth * std::exp(-0.5 * d * d);
          v += 0.004 * standard_normal(copy_rng);
          s.reflectance.push_back(std::clamp(v, 0.0, 1.0));
        }
      }
      lib.spectra.push_back(std::move(s));
    }
  }
  return lib;
}

// ------------------------------------------------------------- model input

std::vector<double> model_input(const Spectrum& s) {
  const int n = s.bands();
  std::vector<double> out(static_cast<size_t>(n), 0.0);

  int first_valid = -1;
  for (int i = 0; i < n; ++i) {
    if (s.band_valid[static_cast<size_t>(i)]) {
      first_valid = i;
      break;
    }
  }
  if (first_valid < 0) {
    throw DataError("spectrum '" + s.spectrum_id + "' has no valid bands");
  }

  int prev_valid = -1;
  for (int i = 0; i < n; ++i) {
    if (!s.band_valid[static_cast<size_t>(i)]) continue;
    const double v = s.reflectance[static_cast<size_t>(i)];
    if (prev_valid < 0) {
      // endpoint extension on the left
      for (int j = 0; j <= i; ++j) out[static_cast<size_t>(j)] = v;
    } else if (i == prev_valid + 1) {
      out[static_cast<size_t>(i)] = v;
    } else {
      const double left = out[static_cast<size_t>(prev_valid)];
      const double span = static_cast<double>(i - prev_valid);
      for (int j = prev_valid + 1; j <= i; ++j) {
        const double w = static_cast<double>(j - prev_valid) / span;
        out[static_cast<size_t>(j)] = left + w * (v - left);
      }
    }
    prev_valid = i;
  }
  // endpoint extension on the right
  for (int j = prev_valid + 1; j < n; ++j) {
    out[static_cast<size_t>(j)] = out[static_cast<size_t>(prev_valid)];
  }
  return out;
}

}  // namespace hydemic
