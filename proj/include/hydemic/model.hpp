#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "hydemic/nn.hpp"
#include "hydemic/scene.hpp"

namespace hydemic {

struct ModelConfig {
  int n_bands = 224;
  int n_classes = 116;
  std::array<int, 2> conv_filters{64, 128};
  int kernel = 7;
  int pool = 3;
  std::array<int, 2> dense_units{128, 64};
  // after pool1, after pool2, after dense1, after dense2
  std::array<double, 4> dropout_rates{0.3, 0.3, 0.4, 0.4};
  double leaky_alpha = 0.01;
  double bn_epsilon = 1e-5;
  double bn_momentum = 0.9;

  // Valid-padding pipeline: bands -> conv -> pool -> conv -> pool.
  int conv1_len() const { return n_bands - kernel + 1; }
  int pool1_len() const { return conv1_len() / pool; }
  int conv2_len() const { return pool1_len() - kernel + 1; }
  int pool2_len() const { return conv2_len() / pool; }
  int flatten_width() const { return pool2_len() * conv_filters[1]; }

  void validate() const;  // throws ArgumentError on inconsistent sizes
};

struct TrainingMeta {
  int epochs_trained = 0;
  double final_train_loss = 0.0;
  double final_val_loss = 0.0;
  uint64_t seed = 0;
};

// The full classifier: conv(7,f1)-BN-LeakyReLU-pool-dropout, twice, then
// dense(u1)-LeakyReLU-dropout, dense(u2)-LeakyReLU-dropout, dense(classes).
class Model {
 public:
  Model(const ModelConfig& config, std::vector<std::string> class_names,
        uint64_t init_seed);

  // Input (batch, 1, n_bands); returns class probabilities (batch,
  // n_classes, 1). Training mode uses batch statistics and live dropout.
  nn::FeatureMap forward(const nn::FeatureMap& input, nn::Mode mode,
                         nn::Rng* rng = nullptr,
                         nn::FeatureMap* logits_out = nullptr);

  const ModelConfig& config() const { return config_; }
  const std::vector<std::string>& class_names() const { return class_names_; }
  TrainingMeta& training_meta() { return meta_; }
  const TrainingMeta& training_meta() const { return meta_; }
  uint64_t init_seed() const { return init_seed_; }

  nn::Stack& stack() { return stack_; }
  std::vector<nn::ParamView> params() { return stack_.params(); }

  // Copies of every learnable array and batchnorm running statistic, in
  // stack order; restore() must receive a snapshot from the same config.
  std::vector<std::vector<double>> snapshot() const;
  void restore(const std::vector<std::vector<double>>& snapshot);

 private:
  ModelConfig config_;
  std::vector<std::string> class_names_;
  TrainingMeta meta_;
  uint64_t init_seed_ = 0;
  nn::Stack stack_;
};

Model build_model(const ModelConfig& config, std::vector<std::string> class_names,
                  uint64_t init_seed);

struct MineralMap {
  int height = 0;
  int width = 0;
  std::vector<int> classes;         // H*W predicted class indices
  std::vector<double> confidence;   // H*W percent, 100 * max probability
};

// Classifies every pixel spectrum independently in inference mode.
MineralMap predict_pixelwise(Model& model, const HyperCube& cube);

// HDM1 container: "HDM1" magic, uint32 header length, JSON header (version,
// config, class names, training meta), float64 parameter blobs in fixed
// layer order, trailing CRC-32 of everything before it.
void save_model(const Model& model, const std::filesystem::path& path);
Model load_model(const std::filesystem::path& path);

}  // namespace hydemic
