#include "hydemic/training.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <numbers>
#include <sstream>

#include "hydemic/io_util.hpp"
#include "hydemic/rng.hpp"

namespace hydemic {

void TrainConfig::validate() const {
  if (epochs < 0) throw ArgumentError("train config: epochs must be >= 0");
  if (batch_size < 1) throw ArgumentError("train config: batch size must be positive");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ArgumentError("train config: val fraction must lie in [0, 1)");
  }
  if (lr_min > lr_max) throw ArgumentError("train config: lr_min must be <= lr_max");
  if (lr_max < 0.0 || weight_decay < 0.0 || early_stop_loss < 0.0) {
    throw ArgumentError("train config: rates must be non-negative");
  }
  if (ground_augment_count < 0) {
    throw ArgumentError("train config: ground augment count must be >= 0");
  }
}

double cosine_lr(int epoch, const TrainConfig& config) {
  if (epoch < 0 || epoch > config.epochs) {
    throw ArgumentError("cosine_lr: epoch " + std::to_string(epoch) +
                        " outside [0, " + std::to_string(config.epochs) + "]");
  }
  if (config.epochs == 0) return config.lr_max;
  const double phase = std::numbers::pi * static_cast<double>(epoch) /
                       static_cast<double>(config.epochs);
  return config.lr_min +
         0.5 * (config.lr_max - config.lr_min) * (1.0 + std::cos(phase));
}

// ------------------------------------------------------------------ AdamW

AdamW::AdamW(double beta1, double beta2, double epsilon, double weight_decay)
    : beta1_(beta1), beta2_(beta2), epsilon_(epsilon), weight_decay_(weight_decay) {
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0)) {
    throw ArgumentError("adamw: betas must lie in [0, 1)");
  }
  if (epsilon <= 0.0 || weight_decay < 0.0) {
    throw ArgumentError("adamw: epsilon must be positive, decay non-negative");
  }
}

void AdamW::step(std::span<const nn::ParamView> params, double lr) {
  if (lr < 0.0) throw ArgumentError("adamw: learning rate must be non-negative");
  if (m_.empty()) {
    m_.resize(params.size());
    v_.resize(params.size());
    for (size_t p = 0; p < params.size(); ++p) {
      m_[p].assign(params[p].value->size(), 0.0);
      v_[p].assign(params[p].value->size(), 0.0);
    }
  }
  if (m_.size() != params.size()) {
    throw ArgumentError("adamw: parameter list changed between steps");
  }

  ++t_;
  const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));

  for (size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& theta = *params[p].value;
    const std::vector<double>& grad = *params[p].grad;
    if (theta.size() != m_[p].size() || grad.size() != theta.size()) {
      throw ArgumentError("adamw: shape mismatch for " + params[p].name);
    }
    std::vector<double>& m = m_[p];
    std::vector<double>& v = v_[p];
    for (size_t i = 0; i < theta.size(); ++i) {
      const double g = grad[i];
      if (!std::isfinite(g)) {
        throw TrainingDivergedError("non-finite gradient in " + params[p].name);
      }
      m[i] = beta1_ * m[i] + (1.0 - beta1_) * g;
      v[i] = beta2_ * v[i] + (1.0 - beta2_) * g * g;
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      theta[i] -= lr * (m_hat / (std::sqrt(v_hat) + epsilon_) +
                        weight_decay_ * theta[i]);
    }
  }
}

// ------------------------------------------------------------------ split

DatasetSplit split_dataset(const std::vector<Sample>& samples, double val_fraction,
                           uint64_t seed) {
  if (samples.empty()) throw ArgumentError("split_dataset: empty input");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw ArgumentError("split_dataset: val fraction must lie in [0, 1)");
  }

  std::map<int, std::vector<size_t>> by_class;
  for (size_t i = 0; i < samples.size(); ++i) {
    by_class[samples[i].label].push_back(i);
  }

  std::vector<uint8_t> to_val(samples.size(), 0);
  for (auto& [label, indices] : by_class) {
    const size_t n = indices.size();
    if (n < 2) continue;  // singleton classes stay in training
    const auto n_val = static_cast<size_t>(
        std::floor(val_fraction * static_cast<double>(n)));
    if (n_val == 0) continue;
    Rng rng(mix_seed(seed, 0x5B117ull, static_cast<uint64_t>(label)));
    std::vector<size_t> shuffled = indices;
    for (size_t i = shuffled.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(rng() % (i + 1));
      std::swap(shuffled[i], shuffled[j]);
    }
    for (size_t i = 0; i < n_val; ++i) to_val[shuffled[i]] = 1;
  }

  DatasetSplit split;
  for (size_t i = 0; i < samples.size(); ++i) {
    (to_val[i] ? split.val : split.train).push_back(samples[i]);
  }
  return split;
}

// ------------------------------------------------------------------ train

namespace {

std::vector<Sample> library_samples(const SpectralLibrary& library,
                                    const Model& model) {
  std::vector<Sample> samples;
  samples.reserve(library.spectra.size());
  for (const auto& s : library.spectra) {
    if (s.class_index < 0 || s.class_index >= model.config().n_classes) {
      throw ArgumentError("training: library class " + s.mineral_name +
                          " outside the model's class range");
    }
    samples.push_back({model_input(s), s.class_index});
  }
  return samples;
}

// The library provides no spectra for the reserved background class, so the
// 116th unit would be untrainable; synthesize flat low-reflectance spectra
// with a little relative noise.
void augment_ground(std::vector<Sample>& samples, const Model& model,
                    const TrainConfig& config) {
  if (config.ground_augment_count == 0) return;
  const int ground = model.config().n_classes - 1;
  const int bands = model.config().n_bands;
  Rng rng(mix_seed(config.seed, 0x6B0D7ull));
  for (int i = 0; i < config.ground_augment_count; ++i) {
    Sample sample;
    sample.label = ground;
    sample.input.reserve(static_cast<size_t>(bands));
    for (int b = 0; b < bands; ++b) {
      const double v = 0.05 * (1.0 + 0.02 * standard_normal(rng));
      sample.input.push_back(std::clamp(v, 0.0, 1.0));
    }
    samples.push_back(std::move(sample));
  }
}

nn::FeatureMap make_batch(std::span<const Sample> samples,
                          std::span<const size_t> order, size_t begin, size_t end,
                          int bands, std::vector<int>& targets) {
  const int count = static_cast<int>(end - begin);
  nn::FeatureMap batch(count, 1, bands);
  targets.resize(static_cast<size_t>(count));
  for (int i = 0; i < count; ++i) {
    const Sample& s = samples[order[begin + static_cast<size_t>(i)]];
    std::copy(s.input.begin(), s.input.end(), batch.row(i, 0));
    targets[static_cast<size_t>(i)] = s.label;
  }
  return batch;
}

}  // namespace

double evaluate_epoch(Model& model, std::span<const Sample> samples) {
  if (samples.empty()) throw ArgumentError("evaluate_epoch: empty sample set");
  const int bands = model.config().n_bands;
  const int chunk = 64;
  double total = 0.0;
  std::vector<int> targets;
  std::vector<size_t> order(samples.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (size_t start = 0; start < samples.size(); start += chunk) {
    const size_t end = std::min(samples.size(), start + chunk);
    nn::FeatureMap batch = make_batch(samples, order, start, end, bands, targets);
    nn::FeatureMap logits;
    model.forward(batch, nn::Mode::infer, nullptr, &logits);
    total += nn::softmax_cross_entropy(logits, targets).loss *
             static_cast<double>(end - start);
  }
  return total / static_cast<double>(samples.size());
}

TrainHistory train(Model& model, const SpectralLibrary& library,
                   const TrainConfig& config, const EpochCallback& on_report) {
  config.validate();

  std::vector<Sample> samples = library_samples(library, model);
  augment_ground(samples, model, config);
  DatasetSplit split = split_dataset(samples, config.val_fraction,
                                     mix_seed(config.seed, 0xDA7Aull));
  if (split.train.empty()) throw ArgumentError("training: empty training split");

  const int bands = model.config().n_bands;
  AdamW optimizer(config.beta1, config.beta2, config.adam_epsilon,
                  config.weight_decay);
  nn::Rng dropout_rng(mix_seed(config.seed, 0xD80Full));
  auto params = model.params();

  TrainHistory history;
  double best_train = std::numeric_limits<double>::infinity();
  double best_val = std::numeric_limits<double>::infinity();
  std::vector<std::vector<double>> best_checkpoint = model.snapshot();

  std::vector<size_t> order(split.train.size());
  for (size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::vector<int> targets;

  model.training_meta().seed = config.seed;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    const double lr = cosine_lr(epoch, config);

    // per-epoch shuffle from its own stream, so batch composition does not
    // depend on how earlier epochs consumed randomness
    Rng shuffle_rng(mix_seed(config.seed, 0x0EACull, static_cast<uint64_t>(epoch)));
    for (size_t i = order.size() - 1; i > 0; --i) {
      const size_t j = static_cast<size_t>(shuffle_rng() % (i + 1));
      std::swap(order[i], order[j]);
    }

    double loss_sum = 0.0;
    int batch_count = 0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end =
          std::min(order.size(), start + static_cast<size_t>(config.batch_size));
      nn::FeatureMap batch =
          make_batch(split.train, order, start, end, bands, targets);

      nn::FeatureMap logits;
      model.forward(batch, nn::Mode::train, &dropout_rng, &logits);
      nn::LossResult loss = nn::softmax_cross_entropy(logits, targets);
      if (!std::isfinite(loss.loss)) {
        throw TrainingDivergedError("non-finite loss at epoch " +
                                    std::to_string(epoch));
      }
      model.stack().backward(loss.grad_logits);
      optimizer.step(params, lr);

      loss_sum += loss.loss;
      ++batch_count;
    }

    EpochStats stats;
    stats.lr = lr;
    stats.train_loss = loss_sum / static_cast<double>(batch_count);
    stats.val_loss = split.val.empty()
                         ? std::numeric_limits<double>::quiet_NaN()
                         : evaluate_epoch(model, split.val);
    history.epochs.push_back(stats);

    if (stats.train_loss < best_train) {
      best_train = stats.train_loss;
      history.best_epoch_train = epoch;
    }
    const bool val_improved = !split.val.empty() && stats.val_loss < best_val;
    if (val_improved) {
      best_val = stats.val_loss;
      history.best_epoch_val = epoch;
      best_checkpoint = model.snapshot();
    } else if (split.val.empty() && stats.train_loss == best_train) {
      best_checkpoint = model.snapshot();
    }

    if (on_report && (config.early_report_interval > 0 &&
                          (epoch % config.early_report_interval == 0 ||
                           epoch + 1 == config.epochs))) {
      on_report(epoch, stats);
    }

    if (config.early_stop_loss > 0.0 && stats.train_loss <= config.early_stop_loss &&
        (split.val.empty() || stats.val_loss <= config.early_stop_loss)) {
      break;
    }
  }

  if (!history.epochs.empty()) {
    model.restore(best_checkpoint);
    model.training_meta().epochs_trained = static_cast<int>(history.epochs.size());
    model.training_meta().final_train_loss = history.epochs.back().train_loss;
    model.training_meta().final_val_loss = history.epochs.back().val_loss;
  }
  return history;
}

void write_history_csv(const TrainHistory& history,
                       const std::filesystem::path& path) {
  std::ostringstream out;
  out << "epoch,train_loss,val_loss,lr\n";
  for (size_t i = 0; i < history.epochs.size(); ++i) {
    const EpochStats& e = history.epochs[i];
    out << i << ',' << format_double(e.train_loss) << ','
        << (std::isnan(e.val_loss) ? std::string("nan") : format_double(e.val_loss))
        << ',' << format_double(e.lr) << "\n";
  }
  write_text_file(path, out.str());
}

}  // namespace hydemic
