#include "render.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "hydemic/errors.hpp"
#include "hydemic/io_util.hpp"

namespace hydemic::render {

namespace {

Rgb hsv_to_rgb(double h, double s, double v) {
  const double c = v * s;
  const double hp = h / 60.0;
  const double x = c * (1.0 - std::abs(std::fmod(hp, 2.0) - 1.0));
  double r = 0, g = 0, b = 0;
  if (hp < 1)      { r = c; g = x; }
  else if (hp < 2) { r = x; g = c; }
  else if (hp < 3) { g = c; b = x; }
  else if (hp < 4) { g = x; b = c; }
  else if (hp < 5) { r = x; b = c; }
  else             { r = c; b = x; }
  const double m = v - c;
  return {static_cast<uint8_t>(std::lround(255.0 * (r + m))),
          static_cast<uint8_t>(std::lround(255.0 * (g + m))),
          static_cast<uint8_t>(std::lround(255.0 * (b + m)))};
}

}  // namespace

Rgb class_color(int class_index, int ground_index) {
  if (class_index == ground_index) return {64, 64, 64};
  const double hue = std::fmod(static_cast<double>(class_index) * 137.50776405283851, 360.0);
  return hsv_to_rgb(hue, 0.72, 0.90);
}

std::string color_hex(Rgb c) {
  char buf[8];
  std::snprintf(buf, sizeof(buf), "#%02x%02x%02x", c.r, c.g, c.b);
  return buf;
}

void write_ppm(std::span<const int> classes, int width, int height,
               int ground_index, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ArgumentError("cannot write image: " + path.string());
  out << "P6\n" << width << ' ' << height << "\n255\n";
  std::string row;
  row.reserve(static_cast<size_t>(width) * 3);
  for (int y = 0; y < height; ++y) {
    row.clear();
    for (int x = 0; x < width; ++x) {
      const Rgb c = class_color(classes[static_cast<size_t>(y) * width + x], ground_index);
      row.push_back(static_cast<char>(c.r));
      row.push_back(static_cast<char>(c.g));
      row.push_back(static_cast<char>(c.b));
    }
    out.write(row.data(), static_cast<std::streamsize>(row.size()));
  }
  if (!out) throw DataError("short write: " + path.string());
}

namespace {

constexpr int kCell = 5;

std::string svg_open(int width, int height) {
  std::ostringstream s;
  s << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << width
    << "\" height=\"" << height << "\" viewBox=\"0 0 " << width << ' ' << height
    << "\">\n";
  return s.str();
}

}  // namespace

std::string svg_class_map(std::span<const int> classes, int width, int height,
                          int ground_index) {
  std::ostringstream s;
  s << svg_open(width * kCell, height * kCell);
  // one rect per horizontal run of equal class, to keep the file small
  for (int y = 0; y < height; ++y) {
    int run_start = 0;
    int run_class = classes[static_cast<size_t>(y) * width];
    for (int x = 1; x <= width; ++x) {
      const int cls =
          x < width ? classes[static_cast<size_t>(y) * width + x] : -1;
      if (cls != run_class) {
        s << "<rect x=\"" << run_start * kCell << "\" y=\"" << y * kCell
          << "\" width=\"" << (x - run_start) * kCell << "\" height=\"" << kCell
          << "\" fill=\"" << color_hex(class_color(run_class, ground_index))
          << "\"/>\n";
        run_start = x;
        run_class = cls;
      }
    }
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_summary(int64_t n_correct, int64_t n_incorrect) {
  const int w = 360, h = 260, base = 220, bar_w = 100;
  const int64_t max_n = std::max<int64_t>(1, std::max(n_correct, n_incorrect));
  const auto bar_h = [&](int64_t n) {
    return static_cast<int>(180.0 * static_cast<double>(n) / static_cast<double>(max_n));
  };
  std::ostringstream s;
  s << svg_open(w, h);
  const int h1 = bar_h(n_correct), h2 = bar_h(n_incorrect);
  s << "<rect x=\"60\" y=\"" << base - h1 << "\" width=\"" << bar_w
    << "\" height=\"" << h1 << "\" fill=\"#2e7d32\"/>\n";
  s << "<rect x=\"200\" y=\"" << base - h2 << "\" width=\"" << bar_w
    << "\" height=\"" << h2 << "\" fill=\"#c62828\"/>\n";
  s << "<text x=\"110\" y=\"" << base + 18 << "\" text-anchor=\"middle\" font-size=\"13\">correct: "
    << n_correct << "</text>\n";
  s << "<text x=\"250\" y=\"" << base + 18 << "\" text-anchor=\"middle\" font-size=\"13\">incorrect: "
    << n_incorrect << "</text>\n";
  s << "</svg>\n";
  return s.str();
}

std::string svg_confidence_scatter(std::span<const ConfidenceRecord> records) {
  const int w = 900, h = 320;
  const int left = 50, bottom = 290, plot_w = 820, plot_h = 260;
  const double n = std::max<size_t>(1, records.size());
  std::ostringstream s;
  s << svg_open(w, h);
  s << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << left + plot_w
    << "\" y2=\"" << bottom << "\" stroke=\"#444\"/>\n";
  s << "<line x1=\"" << left << "\" y1=\"" << bottom - plot_h << "\" x2=\"" << left
    << "\" y2=\"" << bottom << "\" stroke=\"#444\"/>\n";
  s << "<text x=\"20\" y=\"" << bottom - plot_h + 10
    << "\" font-size=\"11\">100%</text>\n";
  s << "<text x=\"32\" y=\"" << bottom << "\" font-size=\"11\">0%</text>\n";
  for (const auto& r : records) {
    const double x = left + plot_w * (static_cast<double>(r.pixel_index) / n);
    const double y = bottom - plot_h * (r.confidence_percent / 100.0);
    s << "<circle cx=\"" << x << "\" cy=\"" << y << "\" r=\"1.2\" fill=\""
      << (r.correct ? "#2e7d32" : "#c62828") << "\"/>\n";
  }
  s << "</svg>\n";
  return s.str();
}

std::string svg_confidence_histograms(const DensityHistogram& correct,
                                      const DensityHistogram& incorrect) {
  const int w = 640, h = 360;
  const int left = 60, bottom = 320, plot_w = 540, plot_h = 280;

  double max_density = 1e-12;
  double lo = 100.0, hi = 0.0;
  for (const auto* hist : {&correct, &incorrect}) {
    for (double d : hist->densities) max_density = std::max(max_density, d);
    if (!hist->bin_edges.empty()) {
      lo = std::min(lo, hist->bin_edges.front());
      hi = std::max(hi, hist->bin_edges.back());
    }
  }
  if (hi <= lo) hi = lo + 1.0;

  std::ostringstream s;
  s << svg_open(w, h);
  const auto draw = [&](const DensityHistogram& hist, const char* fill) {
    for (size_t i = 0; i + 1 < hist.bin_edges.size(); ++i) {
      const double x0 = left + plot_w * (hist.bin_edges[i] - lo) / (hi - lo);
      const double x1 = left + plot_w * (hist.bin_edges[i + 1] - lo) / (hi - lo);
      const double bar = plot_h * hist.densities[i] / max_density;
      s << "<rect x=\"" << x0 << "\" y=\"" << bottom - bar << "\" width=\""
        << x1 - x0 << "\" height=\"" << bar << "\" fill=\"" << fill
        << "\" fill-opacity=\"0.55\"/>\n";
    }
  };
  draw(correct, "#2e7d32");
  draw(incorrect, "#c62828");
  s << "<line x1=\"" << left << "\" y1=\"" << bottom << "\" x2=\"" << left + plot_w
    << "\" y2=\"" << bottom << "\" stroke=\"#444\"/>\n";
  s << "<text x=\"" << left << "\" y=\"" << bottom + 20 << "\" font-size=\"12\">"
    << format_double(lo) << "%</text>\n";
  s << "<text x=\"" << left + plot_w - 30 << "\" y=\"" << bottom + 20
    << "\" font-size=\"12\">" << format_double(hi) << "%</text>\n";
  s << "<text x=\"" << left << "\" y=\"24\" font-size=\"12\" fill=\"#2e7d32\">"
    << "correct (n=" << correct.n << ")</text>\n";
  s << "<text x=\"" << left << "\" y=\"40\" font-size=\"12\" fill=\"#c62828\">"
    << "incorrect (n=" << incorrect.n << ")</text>\n";
  s << "</svg>\n";
  return s.str();
}

}  // namespace hydemic::render
