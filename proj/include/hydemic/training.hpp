#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "hydemic/model.hpp"
#include "hydemic/spectral_data.hpp"

namespace hydemic {

struct TrainConfig {
  int epochs = 2000;
  int batch_size = 16;
  double lr_max = 1e-3;
  double lr_min = 0.0;
  double weight_decay = 1e-4;
  uint64_t seed = 0;
  double val_fraction = 0.2;
  int early_report_interval = 50;
  int ground_augment_count = 50;
  // Stop once train and validation loss both fall to this level; 0 keeps
  // the full epoch budget.
  double early_stop_loss = 0.0;

  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_epsilon = 1e-8;

  void validate() const;
};

// Half-cosine decay from lr_max at t=0 to lr_min at t=epochs.
double cosine_lr(int epoch, const TrainConfig& config);

// Decoupled weight decay: theta -= lr * (m_hat / (sqrt(v_hat) + eps)
// + weight_decay * theta).
class AdamW {
 public:
  AdamW(double beta1, double beta2, double epsilon, double weight_decay);

  void step(std::span<const nn::ParamView> params, double lr);

  int64_t steps_taken() const { return t_; }

 private:
  double beta1_, beta2_, epsilon_, weight_decay_;
  int64_t t_ = 0;
  std::vector<std::vector<double>> m_;
  std::vector<std::vector<double>> v_;
};

struct Sample {
  std::vector<double> input;
  int label = 0;
};

struct DatasetSplit {
  std::vector<Sample> train;
  std::vector<Sample> val;
};

// Stratified by class when a class has >= 2 samples; singleton classes stay
// in training. Deterministic in (input order, seed); the two parts are a
// disjoint partition of the input.
DatasetSplit split_dataset(const std::vector<Sample>& samples, double val_fraction,
                           uint64_t seed);

struct EpochStats {
  double train_loss = 0.0;
  double val_loss = 0.0;  // NaN when there is no validation set
  double lr = 0.0;
};

struct TrainHistory {
  std::vector<EpochStats> epochs;
  int best_epoch_train = -1;
  int best_epoch_val = -1;
  std::string checkpoint_path;  // set by callers that persist checkpoints
};

using EpochCallback = std::function<void(int epoch, const EpochStats&)>;

// Full training loop: seeded shuffles, train-mode forward, backprop, AdamW
// with the cosine schedule, per-epoch losses, best-validation checkpoint.
// The model is left at the best checkpoint. The ground class is augmented
// with noisy constant-reflectance spectra so the reserved output unit is
// trainable.
TrainHistory train(Model& model, const SpectralLibrary& library,
                   const TrainConfig& config, const EpochCallback& on_report = {});

// Inference-mode mean cross-entropy; does not mutate the model.
double evaluate_epoch(Model& model, std::span<const Sample> samples);

void write_history_csv(const TrainHistory& history, const std::filesystem::path& path);

}  // namespace hydemic
