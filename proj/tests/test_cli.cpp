#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include "hydemic/io_util.hpp"
#include "hydemic/scene.hpp"
#include "hydemic/spectral_data.hpp"

using namespace hydemic;
namespace fs = std::filesystem;

namespace {

std::string cli_binary() {
  const char* bin = std::getenv("HYDEMIC_BIN");
  REQUIRE_MESSAGE(bin != nullptr, "HYDEMIC_BIN must point at the cli binary");
  return bin;
}

int run_cli(const std::string& args) {
  const std::string cmd = cli_binary() + " " + args + " 2>/dev/null";
  const int status = std::system(cmd.c_str());
  return WEXITSTATUS(status);
}

fs::path work_dir() {
  static const fs::path dir = [] {
    const fs::path d = fs::temp_directory_path() / "hydemic_cli_test";
    fs::remove_all(d);
    fs::create_directories(d);
    return d;
  }();
  return dir;
}

std::string quoted(const fs::path& p) { return "\"" + p.string() + "\""; }

const char* kTrainConfig = R"({
  "epochs": 12,
  "batch_size": 4,
  "seed": 9,
  "val_fraction": 0.25,
  "ground_augment_count": 3,
  "early_report_interval": 0,
  "model": {
    "conv_filters": [6, 8],
    "kernel": 5,
    "pool": 2,
    "dense_units": [16, 8],
    "dropout_rates": [0.0, 0.0, 0.0, 0.0]
  }
})";

const char* kSceneJson = R"({
  "width": 12,
  "height": 10,
  "background_class": "ground",
  "background_reflectance": 0.05,
  "noise_level": 0.02,
  "seed": 31,
  "regions": [
    {"class_name": "Cuprite", "priority": 0,
     "polygon": [[1, 1], [6, 1], [6, 5], [1, 5]]},
    {"class_name": "Malachite", "priority": 0,
     "polygon": [[7, 4], [11, 4], [11, 9], [7, 9]]}
  ]
})";

std::string file_bytes(const fs::path& p) { return read_text_file(p); }

}  // namespace

TEST_CASE("cli pipeline: gen-library, train, gen-scene, predict, evaluate, sweep") {
  const fs::path dir = work_dir();
  const fs::path lib = dir / "lib.csv";
  const fs::path model = dir / "model.hdm1";
  const fs::path history = dir / "history.csv";
  const fs::path config = dir / "train.json";
  const fs::path scene = dir / "scene.json";
  const fs::path cube = dir / "cube.hcub";
  const fs::path pred_csv = dir / "map.csv";
  const fs::path pred_ppm = dir / "map.ppm";
  const fs::path report = dir / "report.json";
  const fs::path table = dir / "table.csv";

  write_text_file(config, kTrainConfig);
  write_text_file(scene, kSceneJson);

  SUBCASE("full pipeline runs clean") {
    CHECK(run_cli("gen-library --classes 3 --per-class 3 --bands 32 --seed 5 --out " +
                  quoted(lib)) == 0);
    CHECK(fs::exists(lib));
    CHECK(fs::exists(dir / "lib.csv.manifest.json"));
    SpectralLibrary loaded = load_spectral_library(lib, LibraryFormat::csv);
    CHECK(loaded.spectra.size() == 9);
    CHECK(loaded.codec.size() == 4);

    CHECK(run_cli("train --library " + quoted(lib) + " --out " + quoted(model) +
                  " --config " + quoted(config) + " --history " + quoted(history)) == 0);
    CHECK(fs::exists(model));
    std::ifstream hist(history);
    std::string line;
    int rows = -1;  // header
    while (std::getline(hist, line)) ++rows;
    CHECK(rows == 12);

    CHECK(run_cli("gen-scene --scene " + quoted(scene) + " --library " + quoted(lib) +
                  " --out " + quoted(cube)) == 0);
    HyperCube loaded_cube = read_hypercube(cube);
    CHECK(loaded_cube.height == 10);
    CHECK(loaded_cube.width == 12);
    CHECK(loaded_cube.bands == 32);
    CHECK(loaded_cube.has_truth());
    {
      std::ifstream in(cube, std::ios::binary);
      std::string header;
      std::getline(in, header);
      CHECK(header == "HCUB1 10 12 32 1");
    }

    CHECK(run_cli("predict --model " + quoted(model) + " --cube " + quoted(cube) +
                  " --out-map " + quoted(pred_ppm) + " --out-csv " + quoted(pred_csv)) == 0);
    {
      std::ifstream in(pred_csv);
      std::string line2;
      int rows2 = -1;
      while (std::getline(in, line2)) ++rows2;
      CHECK(rows2 == 120);
    }
    CHECK(fs::exists(pred_ppm));

    CHECK(run_cli("evaluate --pred " + quoted(pred_csv) + " --truth " + quoted(cube) +
                  " --report " + quoted(report) + " --plots " +
                  quoted(dir / "plots")) == 0);
    CHECK(fs::exists(report));
    CHECK(fs::exists(dir / "plots" / "confidence_scatter.csv"));
    CHECK(fs::exists(dir / "plots" / "class_map.svg"));
    CHECK(fs::exists(dir / "plots" / "confidence_hist.svg"));

    CHECK(run_cli("noise-sweep --model " + quoted(model) + " --scene-template " +
                  quoted(scene) + " --levels 0,0.01,0.02 --library " + quoted(lib) +
                  " --out " + quoted(table)) == 0);
    {
      std::ifstream in(table);
      std::string line3;
      int rows3 = -1;
      while (std::getline(in, line3)) ++rows3;
      CHECK(rows3 == 3);
      in.clear();
    }
    const std::string table_text = file_bytes(table);
    CHECK(table_text.find("noise_level,mcc,tpr,mean_pc,median_pc") == 0);

    SUBCASE("commands are idempotent on their outputs") {
      const std::string cube_before = file_bytes(cube);
      CHECK(run_cli("gen-scene --scene " + quoted(scene) + " --library " + quoted(lib) +
                    " --out " + quoted(cube)) == 0);
      CHECK(file_bytes(cube) == cube_before);

      const std::string csv_before = file_bytes(pred_csv);
      const std::string ppm_before = file_bytes(pred_ppm);
      CHECK(run_cli("predict --model " + quoted(model) + " --cube " + quoted(cube) +
                    " --out-map " + quoted(pred_ppm) + " --out-csv " +
                    quoted(pred_csv)) == 0);
      CHECK(file_bytes(pred_csv) == csv_before);
      CHECK(file_bytes(pred_ppm) == ppm_before);
    }

    SUBCASE("a hand-built perfect prediction scores mcc 1") {
      // rewrite the prediction csv to match the truth grid exactly
      std::ostringstream out;
      out << "pixel_index,x,y,class_index,class_name,confidence_percent\n";
      for (int y = 0; y < loaded_cube.height; ++y) {
        for (int x = 0; x < loaded_cube.width; ++x) {
          const size_t i = static_cast<size_t>(y) * loaded_cube.width + x;
          out << i << ',' << x << ',' << y << ',' << loaded_cube.truth[i] << ','
              << loaded.codec.decode(loaded_cube.truth[i]) << ",99.5\n";
        }
      }
      const fs::path perfect = dir / "perfect.csv";
      write_text_file(perfect, out.str());
      const fs::path perfect_report = dir / "perfect_report.json";
      CHECK(run_cli("evaluate --pred " + quoted(perfect) + " --truth " + quoted(cube) +
                    " --report " + quoted(perfect_report)) == 0);
      const std::string text = file_bytes(perfect_report);
      CHECK(text.find("\"mcc\": 1.0") != std::string::npos);
      CHECK(text.find("\"tpr\": 1.0") != std::string::npos);
      CHECK(text.find("\"n_incorrect\": 0") != std::string::npos);
    }

    SUBCASE("band mismatch between model and cube exits 3") {
      const fs::path lib64 = dir / "lib64.csv";
      const fs::path cube64 = dir / "cube64.hcub";
      CHECK(run_cli("gen-library --classes 3 --per-class 1 --bands 64 --seed 5 --out " +
                    quoted(lib64)) == 0);
      CHECK(run_cli("gen-scene --scene " + quoted(scene) + " --library " + quoted(lib64) +
                    " --out " + quoted(cube64)) == 0);
      CHECK(run_cli("predict --model " + quoted(model) + " --cube " + quoted(cube64) +
                    " --out-csv " + quoted(dir / "bad.csv")) == 3);
    }

    SUBCASE("cube without truth grid cannot be evaluated") {
      HyperCube no_truth = loaded_cube;
      no_truth.truth.clear();
      const fs::path stripped = dir / "no_truth.hcub";
      write_hypercube(no_truth, stripped);
      CHECK(run_cli("evaluate --pred " + quoted(pred_csv) + " --truth " +
                    quoted(stripped) + " --report " + quoted(dir / "r.json")) == 3);
    }
  }
}

TEST_CASE("cli error codes") {
  const fs::path dir = work_dir();

  SUBCASE("missing library path exits 2") {
    CHECK(run_cli("train --library " + quoted(dir / "missing.csv") + " --out " +
                  quoted(dir / "m.hdm1")) == 2);
  }
  SUBCASE("missing required flags exit 2") {
    CHECK(run_cli("train") == 2);
    CHECK(run_cli("predict") == 2);
  }
  SUBCASE("unknown subcommand exits 2") {
    CHECK(run_cli("transmogrify") == 2);
  }
  SUBCASE("two-vertex polygon exits 2") {
    const fs::path lib = dir / "lib_err.csv";
    REQUIRE(run_cli("gen-library --classes 3 --per-class 1 --bands 32 --seed 5 --out " +
                    quoted(lib)) == 0);
    const fs::path bad_scene = dir / "bad_scene.json";
    write_text_file(bad_scene, R"({"width": 8, "height": 8, "seed": 1,
      "regions": [{"class_name": "Cuprite", "polygon": [[0, 0], [4, 4]]}]})");
    CHECK(run_cli("gen-scene --scene " + quoted(bad_scene) + " --library " + quoted(lib) +
                  " --out " + quoted(dir / "bad.hcub")) == 2);
  }
  SUBCASE("unresolvable scene class exits 3") {
    const fs::path lib = dir / "lib_err2.csv";
    REQUIRE(run_cli("gen-library --classes 3 --per-class 1 --bands 32 --seed 5 --out " +
                    quoted(lib)) == 0);
    const fs::path bad_scene = dir / "bad_scene2.json";
    write_text_file(bad_scene, R"({"width": 8, "height": 8, "seed": 1,
      "regions": [{"class_name": "Unobtainium",
                   "polygon": [[0, 0], [4, 0], [4, 4], [0, 4]]}]})");
    CHECK(run_cli("gen-scene --scene " + quoted(bad_scene) + " --library " + quoted(lib) +
                  " --out " + quoted(dir / "bad2.hcub")) == 3);
  }
  SUBCASE("empty noise level list exits 2") {
    CHECK(run_cli("noise-sweep --model " + quoted(dir / "nope.hdm1") +
                  " --scene-template " + quoted(dir / "nope.json") + " --levels '' " +
                  "--library " + quoted(dir / "nope.csv") + " --out " +
                  quoted(dir / "t.csv")) == 2);
  }
  SUBCASE("epochs 0 still writes an unchanged initialized model") {
    const fs::path lib = dir / "lib_e0.csv";
    REQUIRE(run_cli("gen-library --classes 3 --per-class 2 --bands 32 --seed 5 --out " +
                    quoted(lib)) == 0);
    const fs::path config = dir / "zero_epochs.json";
    write_text_file(config, R"({"epochs": 0, "seed": 4,
      "model": {"kernel": 5, "pool": 2, "conv_filters": [6, 8],
                "dense_units": [16, 8]}})");
    const fs::path model = dir / "zero.hdm1";
    CHECK(run_cli("train --library " + quoted(lib) + " --out " + quoted(model) +
                  " --config " + quoted(config)) == 0);
    CHECK(fs::exists(model));
  }
}
