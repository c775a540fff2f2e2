#include <chrono>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "hydemic/evaluation.hpp"
#include "hydemic/io_util.hpp"
#include "hydemic/model.hpp"
#include "hydemic/rng.hpp"
#include "hydemic/scene.hpp"
#include "hydemic/spectral_data.hpp"
#include "hydemic/training.hpp"
#include "render.hpp"

namespace {

using namespace hydemic;
using nlohmann::json;
namespace fs = std::filesystem;

constexpr const char* kToolVersion = "0.1.0";

class ManifestWriter {
 public:
  ManifestWriter(std::string command, const fs::path& primary_output)
      : command_(std::move(command)),
        path_(primary_output.string() + ".manifest.json"),
        start_(std::chrono::steady_clock::now()) {
    doc_["tool"] = "hydemic";
    doc_["version"] = kToolVersion;
    doc_["command"] = command_;
  }

  json& doc() { return doc_; }

  void finish() {
    const auto elapsed = std::chrono::steady_clock::now() - start_;
    doc_["duration_seconds"] =
        std::chrono::duration<double>(elapsed).count();
    write_text_file(path_, doc_.dump(2) + "\n");
  }

 private:
  std::string command_;
  fs::path path_;
  std::chrono::steady_clock::time_point start_;
  json doc_;
};

LibraryFormat parse_format(const std::string& name) {
  if (name == "csv") return LibraryFormat::csv;
  if (name == "usgs_ascii") return LibraryFormat::usgs_ascii;
  throw ArgumentError("unknown library format '" + name + "' (csv, usgs_ascii)");
}

json load_json_file(const fs::path& path) {
  try {
    return json::parse(read_text_file(path));
  } catch (const json::parse_error& e) {
    throw DataError(path.string() + ": " + e.what());
  }
}

TrainConfig train_config_from_json(const json& j) {
  TrainConfig tc;
  tc.epochs = j.value("epochs", tc.epochs);
  tc.batch_size = j.value("batch_size", tc.batch_size);
  tc.lr_max = j.value("lr_max", tc.lr_max);
  tc.lr_min = j.value("lr_min", tc.lr_min);
  tc.weight_decay = j.value("weight_decay", tc.weight_decay);
  tc.seed = j.value("seed", tc.seed);
  tc.val_fraction = j.value("val_fraction", tc.val_fraction);
  tc.early_report_interval = j.value("early_report_interval", tc.early_report_interval);
  tc.ground_augment_count = j.value("ground_augment_count", tc.ground_augment_count);
  tc.early_stop_loss = j.value("early_stop_loss", tc.early_stop_loss);
  tc.validate();
  return tc;
}

void apply_model_overrides(ModelConfig& mc, const json& j) {
  if (j.contains("conv_filters")) {
    mc.conv_filters = {j["conv_filters"].at(0).get<int>(),
                       j["conv_filters"].at(1).get<int>()};
  }
  mc.kernel = j.value("kernel", mc.kernel);
  mc.pool = j.value("pool", mc.pool);
  if (j.contains("dense_units")) {
    mc.dense_units = {j["dense_units"].at(0).get<int>(),
                      j["dense_units"].at(1).get<int>()};
  }
  if (j.contains("dropout_rates")) {
    for (int i = 0; i < 4; ++i) {
      mc.dropout_rates[static_cast<size_t>(i)] = j["dropout_rates"].at(i).get<double>();
    }
  }
  mc.leaky_alpha = j.value("leaky_alpha", mc.leaky_alpha);
}

// ------------------------------------------------------------------ train

int cmd_train(const std::string& library_path, const std::string& format,
              const std::string& out_path, const std::string& config_path,
              const std::string& history_path) {
  ManifestWriter manifest("train", out_path);

  json config_json = json::object();
  if (!config_path.empty()) config_json = load_json_file(config_path);
  TrainConfig tc = train_config_from_json(config_json);

  SpectralLibrary library = load_spectral_library(library_path, parse_format(format));

  ModelConfig mc;
  mc.n_bands = library.bands();
  mc.n_classes = library.codec.size();
  if (config_json.contains("model")) apply_model_overrides(mc, config_json["model"]);

  const uint64_t init_seed = mix_seed(tc.seed, 0x131Cull);
  Model model = build_model(mc, library.codec.names(), init_seed);

  TrainHistory history = train(model, library, tc, [&](int epoch, const EpochStats& s) {
    std::fprintf(stderr, "epoch %d  train %.6g  val %.6g  lr %.3g\n", epoch,
                 s.train_loss, s.val_loss, s.lr);
  });

  save_model(model, out_path);
  if (!history_path.empty()) write_history_csv(history, history_path);

  manifest.doc()["config"] = config_json;
  manifest.doc()["resolved_config"] = {
      {"epochs", tc.epochs},
      {"batch_size", tc.batch_size},
      {"lr_max", tc.lr_max},
      {"lr_min", tc.lr_min},
      {"weight_decay", tc.weight_decay},
      {"val_fraction", tc.val_fraction},
      {"ground_augment_count", tc.ground_augment_count},
      {"early_stop_loss", tc.early_stop_loss},
      {"n_bands", mc.n_bands},
      {"n_classes", mc.n_classes}};
  manifest.doc()["seeds"] = {{"train", tc.seed}, {"init", init_seed}};
  manifest.doc()["inputs"] = {{"library", library_path}, {"format", format}};
  manifest.doc()["outputs"] = {{"model", out_path}, {"history", history_path}};
  manifest.doc()["epochs_trained"] = model.training_meta().epochs_trained;
  manifest.doc()["final_train_loss"] = model.training_meta().final_train_loss;
  manifest.finish();

  std::fprintf(stderr, "trained %d epochs, model written to %s\n",
               model.training_meta().epochs_trained, out_path.c_str());
  return 0;
}

// -------------------------------------------------------------- gen-scene

int cmd_gen_scene(const std::string& scene_path, const std::string& library_path,
                  const std::string& format, const std::string& out_path) {
  ManifestWriter manifest("gen-scene", out_path);

  SceneSpec spec = SceneSpec::from_json_text(read_text_file(scene_path));
  SpectralLibrary library = load_spectral_library(library_path, parse_format(format));

  HyperCube clean = build_scene(spec, library);
  HyperCube cube = inject_noise(clean, spec.noise_level, spec.seed);
  write_hypercube(cube, out_path);

  manifest.doc()["inputs"] = {{"scene", scene_path}, {"library", library_path}};
  manifest.doc()["outputs"] = {{"cube", out_path}};
  manifest.doc()["seeds"] = {{"scene", spec.seed}};
  manifest.doc()["noise_level"] = spec.noise_level;
  manifest.doc()["dimensions"] = {spec.height, spec.width, library.bands()};
  manifest.finish();
  return 0;
}

// ---------------------------------------------------------------- predict

void write_prediction_csv(const MineralMap& map,
                          const std::vector<std::string>& class_names,
                          const fs::path& path) {
  std::ostringstream out;
  out << "pixel_index,x,y,class_index,class_name,confidence_percent\n";
  for (int y = 0; y < map.height; ++y) {
    for (int x = 0; x < map.width; ++x) {
      const size_t i = static_cast<size_t>(y) * map.width + x;
      const int cls = map.classes[i];
      out << i << ',' << x << ',' << y << ',' << cls << ','
          << class_names[static_cast<size_t>(cls)] << ','
          << format_double(map.confidence[i]) << "\n";
    }
  }
  write_text_file(path, out.str());
}

int cmd_predict(const std::string& model_path, const std::string& cube_path,
                const std::string& map_path, const std::string& csv_path) {
  ManifestWriter manifest("predict", csv_path);

  Model model = load_model(model_path);
  HyperCube cube = read_hypercube(cube_path);
  MineralMap map = predict_pixelwise(model, cube);

  const int ground_index = model.config().n_classes - 1;
  write_prediction_csv(map, model.class_names(), csv_path);
  if (!map_path.empty()) {
    render::write_ppm(map.classes, map.width, map.height, ground_index, map_path);
  }

  json palette = json::object();
  for (int c = 0; c < model.config().n_classes; ++c) {
    palette[model.class_names()[static_cast<size_t>(c)]] =
        render::color_hex(render::class_color(c, ground_index));
  }
  manifest.doc()["inputs"] = {{"model", model_path}, {"cube", cube_path}};
  manifest.doc()["outputs"] = {{"csv", csv_path}, {"map", map_path}};
  manifest.doc()["palette"] = std::move(palette);
  manifest.finish();
  return 0;
}

// --------------------------------------------------------------- evaluate

struct PredCsv {
  MineralMap map;
  std::vector<std::string> class_names;  // indexed by class where known
};

PredCsv read_prediction_csv(const fs::path& path, int height, int width) {
  std::istringstream in(read_text_file(path));
  std::string line;
  if (!std::getline(in, line)) throw DataError("empty prediction csv: " + path.string());

  PredCsv result;
  result.map.height = height;
  result.map.width = width;
  const size_t n = static_cast<size_t>(height) * width;
  result.map.classes.assign(n, 0);
  result.map.confidence.assign(n, 0.0);

  long line_no = 1;
  size_t rows = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string stripped = strip_eol(line);
    if (stripped.empty()) continue;
    const auto fields = split_csv_line(stripped);
    if (fields.size() != 6) throw ParseError("expected 6 fields", line_no);
    long long pixel = 0, cls = 0;
    double conf = 0.0;
    if (!parse_int(fields[0], pixel) || !parse_int(fields[3], cls) ||
        !parse_double(fields[5], conf)) {
      throw ParseError("malformed prediction row", line_no);
    }
    if (pixel < 0 || static_cast<size_t>(pixel) >= n) {
      throw DimensionError("pixel index " + std::to_string(pixel) +
                           " outside " + std::to_string(height) + "x" +
                           std::to_string(width) + " map");
    }
    result.map.classes[static_cast<size_t>(pixel)] = static_cast<int>(cls);
    result.map.confidence[static_cast<size_t>(pixel)] = conf;
    if (static_cast<size_t>(cls) >= result.class_names.size()) {
      result.class_names.resize(static_cast<size_t>(cls) + 1);
    }
    result.class_names[static_cast<size_t>(cls)] = fields[4];
    ++rows;
  }
  if (rows != n) {
    throw DimensionError("prediction csv has " + std::to_string(rows) +
                         " rows, cube has " + std::to_string(n) + " pixels");
  }
  return result;
}

void write_plot_files(const EvaluationReport& report, const MineralMap& map,
                      int ground_index, const fs::path& dir) {
  fs::create_directories(dir);

  std::ostringstream scatter;
  scatter << "pixel_index,confidence_percent,correct\n";
  for (const auto& r : report.records) {
    scatter << r.pixel_index << ',' << format_double(r.confidence_percent) << ','
            << (r.correct ? 1 : 0) << "\n";
  }
  write_text_file(dir / "confidence_scatter.csv", scatter.str());

  const auto hist_csv = [&](const DensityHistogram& h, const fs::path& path) {
    std::ostringstream out;
    out << "bin_left,bin_right,density\n";
    for (size_t i = 0; i + 1 < h.bin_edges.size(); ++i) {
      out << format_double(h.bin_edges[i]) << ',' << format_double(h.bin_edges[i + 1])
          << ',' << format_double(h.densities[i]) << "\n";
    }
    write_text_file(path, out.str());
  };
  hist_csv(report.hist_correct, dir / "confidence_hist_correct.csv");
  hist_csv(report.hist_incorrect, dir / "confidence_hist_incorrect.csv");

  write_text_file(dir / "summary.csv",
                  "n_correct,n_incorrect\n" + std::to_string(report.n_correct) + "," +
                      std::to_string(report.n_incorrect) + "\n");

  write_text_file(dir / "class_map.svg",
                  render::svg_class_map(map.classes, map.width, map.height, ground_index));
  write_text_file(dir / "summary.svg",
                  render::svg_summary(report.n_correct, report.n_incorrect));
  write_text_file(dir / "confidence_scatter.svg",
                  render::svg_confidence_scatter(report.records));
  write_text_file(dir / "confidence_hist.svg",
                  render::svg_confidence_histograms(report.hist_correct,
                                                    report.hist_incorrect));
}

int cmd_evaluate(const std::string& pred_path, const std::string& cube_path,
                 const std::string& report_path, const std::string& plots_dir) {
  ManifestWriter manifest("evaluate", report_path);

  HyperCube cube = read_hypercube(cube_path);
  if (!cube.has_truth()) {
    throw DataError("cube has no truth grid: " + cube_path);
  }
  PredCsv pred = read_prediction_csv(pred_path, cube.height, cube.width);

  int n_classes = 1;
  for (int c : cube.truth) n_classes = std::max(n_classes, c + 1);
  for (int c : pred.map.classes) n_classes = std::max(n_classes, c + 1);

  EvaluationReport report = evaluation_report(pred.map, cube.truth, n_classes);
  write_text_file(report_path, report_to_json_text(report));

  if (!plots_dir.empty()) {
    // ground is the last named class when present
    int ground_index = n_classes - 1;
    for (size_t c = 0; c < pred.class_names.size(); ++c) {
      if (pred.class_names[c] == "ground") ground_index = static_cast<int>(c);
    }
    write_plot_files(report, pred.map, ground_index, plots_dir);
  }

  manifest.doc()["inputs"] = {{"pred", pred_path}, {"truth", cube_path}};
  manifest.doc()["outputs"] = {{"report", report_path}, {"plots", plots_dir}};
  manifest.doc()["mcc"] = report.mcc;
  manifest.doc()["tpr"] = report.tpr;
  manifest.finish();
  return 0;
}

// ------------------------------------------------------------ noise-sweep

int cmd_noise_sweep(const std::string& model_path, const std::string& scene_path,
                    const std::string& levels_text, const std::string& library_path,
                    const std::string& format, const std::string& out_path) {
  ManifestWriter manifest("noise-sweep", out_path);

  std::vector<double> levels;
  for (const auto& field : split_csv_line(levels_text)) {
    double v = 0.0;
    if (field.empty() || !parse_double(field, v) || v < 0.0) {
      throw ArgumentError("bad noise level list: '" + levels_text + "'");
    }
    levels.push_back(v);
  }
  if (levels.empty()) throw ArgumentError("empty noise level list");

  Model model = load_model(model_path);
  SceneSpec spec = SceneSpec::from_json_text(read_text_file(scene_path));
  SpectralLibrary library = load_spectral_library(library_path, parse_format(format));
  HyperCube clean = build_scene(spec, library);

  std::ostringstream table;
  table << "noise_level,mcc,tpr,mean_pc,median_pc\n";
  for (double level : levels) {
    HyperCube noisy = inject_noise(clean, level, spec.seed);
    MineralMap map = predict_pixelwise(model, noisy);
    EvaluationReport report =
        evaluation_report(map, clean.truth, model.config().n_classes);
    table << format_double(level) << ',' << format_double(report.mcc) << ','
          << format_double(report.tpr) << ',' << format_double(report.mean_confidence)
          << ',' << format_double(report.median_confidence) << "\n";
    std::fprintf(stderr, "noise %.3g: mcc %.4f tpr %.4f\n", level, report.mcc,
                 report.tpr);
  }
  write_text_file(out_path, table.str());

  manifest.doc()["inputs"] = {{"model", model_path},
                              {"scene_template", scene_path},
                              {"library", library_path}};
  manifest.doc()["outputs"] = {{"table", out_path}};
  manifest.doc()["levels"] = levels;
  manifest.doc()["seeds"] = {{"scene", spec.seed}};
  manifest.finish();
  return 0;
}

// ------------------------------------------------------------ gen-library

int cmd_gen_library(int classes, int per_class, int bands, uint64_t seed,
                    const std::string& out_path) {
  ManifestWriter manifest("gen-library", out_path);
  SpectralLibrary library = generate_synthetic_library(classes, per_class, bands, seed);
  write_library_csv(library, out_path);
  manifest.doc()["outputs"] = {{"library", out_path}};
  manifest.doc()["seeds"] = {{"library", seed}};
  manifest.doc()["counts"] = {{"classes", classes},
                              {"spectra", library.spectra.size()},
                              {"bands", bands}};
  manifest.finish();
  return 0;
}

template <typename F>
int guarded(F&& fn) {
  try {
    return fn();
  } catch (const ArgumentError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  } catch (const TrainingDivergedError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 4;
  } catch (const DataError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 3;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hyperspectral mineral classification toolkit"};
  app.require_subcommand(1);

  std::string library_path, format = "csv", out_path, config_path, history_path;
  std::string scene_path, model_path, cube_path, map_path, csv_path;
  std::string pred_path, report_path, plots_dir, levels = "0,0.01,0.02,0.05,0.10";
  int classes = 115, per_class = 4, bands = 224;
  uint64_t seed = 0;

  auto* train_cmd = app.add_subcommand("train", "train a model on a spectral library");
  train_cmd->add_option("--library", library_path, "library file")->required();
  train_cmd->add_option("--format", format, "library format (csv, usgs_ascii)");
  train_cmd->add_option("--out", out_path, "output model (.hdm1)")->required();
  train_cmd->add_option("--config", config_path, "training config json");
  train_cmd->add_option("--history", history_path, "per-epoch loss csv");

  auto* scene_cmd = app.add_subcommand("gen-scene", "build a synthetic noisy cube");
  scene_cmd->add_option("--scene", scene_path, "scene spec json")->required();
  scene_cmd->add_option("--library", library_path, "library file")->required();
  scene_cmd->add_option("--format", format, "library format");
  scene_cmd->add_option("--out", out_path, "output cube (.hcub)")->required();

  auto* predict_cmd = app.add_subcommand("predict", "pixel-wise classification of a cube");
  predict_cmd->add_option("--model", model_path, "model file")->required();
  predict_cmd->add_option("--cube", cube_path, "cube file")->required();
  predict_cmd->add_option("--out-map", map_path, "class map image (.ppm)");
  predict_cmd->add_option("--out-csv", csv_path, "per-pixel csv")->required();

  auto* eval_cmd = app.add_subcommand("evaluate", "score predictions against truth");
  eval_cmd->add_option("--pred", pred_path, "prediction csv")->required();
  eval_cmd->add_option("--truth", cube_path, "cube with truth grid")->required();
  eval_cmd->add_option("--report", report_path, "output report json")->required();
  eval_cmd->add_option("--plots", plots_dir, "directory for plot artifacts");

  auto* sweep_cmd = app.add_subcommand("noise-sweep", "evaluate across noise levels");
  sweep_cmd->add_option("--model", model_path, "model file")->required();
  sweep_cmd->add_option("--scene-template", scene_path, "scene spec json")->required();
  sweep_cmd->add_option("--levels", levels, "comma-separated noise levels");
  sweep_cmd->add_option("--library", library_path, "library file")->required();
  sweep_cmd->add_option("--format", format, "library format");
  sweep_cmd->add_option("--out", out_path, "output table csv")->required();

  auto* gen_lib_cmd = app.add_subcommand("gen-library", "write a synthetic library csv");
  gen_lib_cmd->add_option("--classes", classes, "mineral class count");
  gen_lib_cmd->add_option("--per-class", per_class, "spectra per class");
  gen_lib_cmd->add_option("--bands", bands, "band count");
  gen_lib_cmd->add_option("--seed", seed, "generator seed");
  gen_lib_cmd->add_option("--out", out_path, "output library csv")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  if (train_cmd->parsed()) {
    return guarded([&] {
      return cmd_train(library_path, format, out_path, config_path, history_path);
    });
  }
  if (scene_cmd->parsed()) {
    return guarded([&] {
      return cmd_gen_scene(scene_path, library_path, format, out_path);
    });
  }
  if (predict_cmd->parsed()) {
    return guarded([&] {
      return cmd_predict(model_path, cube_path, map_path, csv_path);
    });
  }
  if (eval_cmd->parsed()) {
    return guarded([&] {
      return cmd_evaluate(pred_path, cube_path, report_path, plots_dir);
    });
  }
  if (sweep_cmd->parsed()) {
    return guarded([&] {
      return cmd_noise_sweep(model_path, scene_path, levels, library_path, format,
                             out_path);
    });
  }
  if (gen_lib_cmd->parsed()) {
    return guarded([&] {
      return cmd_gen_library(classes, per_class, bands, seed, out_path);
    });
  }
  return 2;
}
