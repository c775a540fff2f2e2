#include "hydemic/scene.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "hydemic/parallel.hpp"
#include "hydemic/rng.hpp"

namespace hydemic {

namespace {

using Point = std::array<double, 2>;

double cross(const Point& o, const Point& a, const Point& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

bool on_segment(const Point& p, const Point& a, const Point& b) {
  constexpr double eps = 1e-12;
  if (std::abs(cross(a, b, p)) > eps) return false;
  return p[0] >= std::min(a[0], b[0]) - eps && p[0] <= std::max(a[0], b[0]) + eps &&
         p[1] >= std::min(a[1], b[1]) - eps && p[1] <= std::max(a[1], b[1]) + eps;
}

// Proper or endpoint intersection of segments ab and cd.
bool segments_intersect(const Point& a, const Point& b, const Point& c,
                        const Point& d) {
  const double d1 = cross(c, d, a);
  const double d2 = cross(c, d, b);
  const double d3 = cross(a, b, c);
  const double d4 = cross(a, b, d);
  if (((d1 > 0 && d2 < 0) || (d1 < 0 && d2 > 0)) &&
      ((d3 > 0 && d4 < 0) || (d3 < 0 && d4 > 0))) {
    return true;
  }
  if (d1 == 0 && on_segment(a, c, d)) return true;
  if (d2 == 0 && on_segment(b, c, d)) return true;
  if (d3 == 0 && on_segment(c, a, b)) return true;
  if (d4 == 0 && on_segment(d, a, b)) return true;
  return false;
}

}  // namespace

void RegionSpec::validate() const {
  if (polygon.size() < 3) {
    throw ArgumentError("region '" + class_name + "': polygon needs >= 3 vertices");
  }
  const size_t n = polygon.size();
  for (size_t i = 0; i < n; ++i) {
    const Point& a = polygon[i];
    const Point& b = polygon[(i + 1) % n];
    if (a == b) {
      throw ArgumentError("region '" + class_name + "': zero-length edge");
    }
    for (size_t j = i + 1; j < n; ++j) {
      // skip edges that share an endpoint with edge i
      if (j == i || (j + 1) % n == i || (i + 1) % n == j) continue;
      const Point& c = polygon[j];
      const Point& d = polygon[(j + 1) % n];
      if (segments_intersect(a, b, c, d)) {
        throw ArgumentError("region '" + class_name + "': self-intersecting polygon");
      }
    }
  }
}

void SceneSpec::validate() const {
  if (width < 1 || height < 1) {
    throw ArgumentError("scene dimensions must be positive");
  }
  if (noise_level < 0.0) {
    throw ArgumentError("noise level must be non-negative");
  }
  if (!(background_reflectance >= 0.0 && background_reflectance <= 1.0)) {
    throw ArgumentError("background reflectance must lie in [0, 1]");
  }
  for (const auto& region : regions) region.validate();
}

SceneSpec SceneSpec::from_json_text(const std::string& text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("scene json: ") + e.what());
  }
  try {
    SceneSpec spec;
    spec.width = j.at("width").get<int>();
    spec.height = j.at("height").get<int>();
    spec.background_class = j.value("background_class", std::string("ground"));
    spec.background_reflectance = j.value("background_reflectance", 0.05);
    spec.noise_level = j.value("noise_level", 0.0);
    spec.seed = j.value("seed", uint64_t{0});
    for (const auto& jr : j.value("regions", nlohmann::json::array())) {
      RegionSpec region;
      region.class_name = jr.at("class_name").get<std::string>();
      region.priority = jr.value("priority", 0);
      for (const auto& jp : jr.at("polygon")) {
        region.polygon.push_back({jp.at(0).get<double>(), jp.at(1).get<double>()});
      }
      spec.regions.push_back(std::move(region));
    }
    spec.validate();
    return spec;
  } catch (const nlohmann::json::exception& e) {
    throw DataError(std::string("scene json: ") + e.what());
  }
}

std::string SceneSpec::to_json_text() const {
  nlohmann::json j;
  j["width"] = width;
  j["height"] = height;
  j["background_class"] = background_class;
  j["background_reflectance"] = background_reflectance;
  j["noise_level"] = noise_level;
  j["seed"] = seed;
  j["regions"] = nlohmann::json::array();
  for (const auto& region : regions) {
    nlohmann::json jr;
    jr["class_name"] = region.class_name;
    jr["priority"] = region.priority;
    jr["polygon"] = nlohmann::json::array();
    for (const auto& p : region.polygon) {
      jr["polygon"].push_back({p[0], p[1]});
    }
    j["regions"].push_back(std::move(jr));
  }
  return j.dump(2) + "\n";
}

bool point_in_polygon(double x, double y,
                      std::span<const std::array<double, 2>> polygon) {
  if (polygon.size() < 3) {
    throw ArgumentError("point_in_polygon: polygon needs >= 3 vertices");
  }
  const Point p{x, y};
  const size_t n = polygon.size();

  bool inside = false;
  for (size_t i = 0, j = n - 1; i < n; j = i++) {
    const Point& a = polygon[i];
    const Point& b = polygon[j];
    if (on_segment(p, a, b)) return true;  // boundary counts as inside
    const bool crosses = (a[1] > y) != (b[1] > y);
    if (crosses) {
      const double x_at = (b[0] - a[0]) * (y - a[1]) / (b[1] - a[1]) + a[0];
      if (x < x_at) inside = !inside;
    }
  }
  return inside;
}

HyperCube build_scene(const SceneSpec& spec, const SpectralLibrary& library) {
  spec.validate();
  const int bands = library.bands();
  if (bands < 1) throw ArgumentError("build_scene: library is empty");

  const int background_index = library.codec.encode(spec.background_class);

  struct ResolvedRegion {
    const RegionSpec* region;
    int class_index;
    std::vector<double> signature;
  };
  std::vector<ResolvedRegion> resolved;
  resolved.reserve(spec.regions.size());
  for (const auto& region : spec.regions) {
    ResolvedRegion r;
    r.region = &region;
    r.class_index = library.codec.encode(region.class_name);
    if (region.class_name == spec.background_class) {
      r.signature.assign(static_cast<size_t>(bands), spec.background_reflectance);
    } else {
      const Spectrum* s = library.first_of_class(r.class_index);
      if (s == nullptr) {
        throw LookupError("no spectrum in library for class '" + region.class_name + "'");
      }
      r.signature = model_input(*s);
      for (double& v : r.signature) v = std::clamp(v, 0.0, 1.0);
    }
    resolved.push_back(std::move(r));
  }

  HyperCube cube;
  cube.height = spec.height;
  cube.width = spec.width;
  cube.bands = bands;
  cube.data.assign(static_cast<size_t>(spec.height) * spec.width * bands, 0.0);
  cube.truth.assign(static_cast<size_t>(spec.height) * spec.width, background_index);

  parallel_for(static_cast<int64_t>(spec.height) * spec.width, [&](int64_t p) {
    const int y = static_cast<int>(p / spec.width);
    const int x = static_cast<int>(p % spec.width);
    const double cx = x + 0.5;
    const double cy = y + 0.5;

    const ResolvedRegion* chosen = nullptr;
    for (const auto& r : resolved) {
      if (chosen != nullptr && r.region->priority <= chosen->region->priority) {
        continue;  // ties resolve to the earlier region
      }
      if (point_in_polygon(cx, cy, r.region->polygon)) chosen = &r;
    }

    double* dst = cube.data.data() + static_cast<size_t>(p) * bands;
    if (chosen != nullptr) {
      std::copy(chosen->signature.begin(), chosen->signature.end(), dst);
      cube.truth[static_cast<size_t>(p)] = chosen->class_index;
    } else {
      std::fill(dst, dst + bands, spec.background_reflectance);
    }
  });
  return cube;
}

HyperCube inject_noise(const HyperCube& cube, double level, uint64_t seed) {
  if (level < 0.0) throw ArgumentError("inject_noise: level must be non-negative");
  HyperCube out = cube;
  parallel_for(cube.pixel_count(), [&](int64_t p) {
    double* dst = out.data.data() + static_cast<size_t>(p) * cube.bands;
    for (int b = 0; b < cube.bands; ++b) {
      const double z = counter_normal(seed, static_cast<uint64_t>(p),
                                      static_cast<uint64_t>(b));
      dst[b] = std::clamp(dst[b] + level * dst[b] * z, 0.0, 1.0);
    }
  });
  return out;
}

std::vector<PixelSpectrum> flatten_pixels(const HyperCube& cube) {
  std::vector<PixelSpectrum> out;
  out.reserve(static_cast<size_t>(cube.pixel_count()));
  for (int64_t p = 0; p < cube.pixel_count(); ++p) {
    PixelSpectrum px;
    px.pixel_index = static_cast<int>(p);
    px.spectrum = std::span<const double>(cube.pixel(static_cast<int>(p)),
                                          static_cast<size_t>(cube.bands));
    px.truth = cube.has_truth() ? cube.truth[static_cast<size_t>(p)] : -1;
    out.push_back(px);
  }
  return out;
}

void write_hypercube(const HyperCube& cube, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write cube file: " + path.string());

  out << "HCUB1 " << cube.height << ' ' << cube.width << ' ' << cube.bands << ' '
      << (cube.has_truth() ? 1 : 0) << '\n';

  std::vector<float> row(cube.data.size());
  for (size_t i = 0; i < cube.data.size(); ++i) {
    row[i] = static_cast<float>(cube.data[i]);
  }
  out.write(reinterpret_cast<const char*>(row.data()),
            static_cast<std::streamsize>(row.size() * sizeof(float)));

  if (cube.has_truth()) {
    std::vector<uint16_t> truth(cube.truth.size());
    for (size_t i = 0; i < cube.truth.size(); ++i) {
      truth[i] = static_cast<uint16_t>(cube.truth[i]);
    }
    out.write(reinterpret_cast<const char*>(truth.data()),
              static_cast<std::streamsize>(truth.size() * sizeof(uint16_t)));
  }
  if (!out) throw DataError("short write: " + path.string());
}

HyperCube read_hypercube(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open cube file: " + path.string());

  std::string header;
  if (!std::getline(in, header)) throw DataError("empty cube file: " + path.string());
  std::string magic;
  int h = 0, w = 0, b = 0, has_truth = 0;
  {
    std::istringstream hs(header);
    hs >> magic >> h >> w >> b >> has_truth;
    if (!hs || magic != "HCUB1") {
      throw VersionError("not an HCUB1 file: " + path.string());
    }
  }
  if (h < 1 || w < 1 || b < 1 || (has_truth != 0 && has_truth != 1)) {
    throw DataError("invalid cube header: " + path.string());
  }

  HyperCube cube;
  cube.height = h;
  cube.width = w;
  cube.bands = b;
  const size_t n = static_cast<size_t>(h) * w * b;
  std::vector<float> raw(n);
  in.read(reinterpret_cast<char*>(raw.data()),
          static_cast<std::streamsize>(n * sizeof(float)));
  if (static_cast<size_t>(in.gcount()) != n * sizeof(float)) {
    throw DataError("truncated cube file: " + path.string());
  }
  cube.data.resize(n);
  for (size_t i = 0; i < n; ++i) cube.data[i] = raw[i];

  if (has_truth == 1) {
    const size_t np = static_cast<size_t>(h) * w;
    std::vector<uint16_t> truth(np);
    in.read(reinterpret_cast<char*>(truth.data()),
            static_cast<std::streamsize>(np * sizeof(uint16_t)));
    if (static_cast<size_t>(in.gcount()) != np * sizeof(uint16_t)) {
      throw DataError("truncated cube truth grid: " + path.string());
    }
    cube.truth.resize(np);
    for (size_t i = 0; i < np; ++i) cube.truth[i] = truth[i];
  }
  return cube;
}

}  // namespace hydemic
