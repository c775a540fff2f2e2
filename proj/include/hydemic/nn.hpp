#pragma once

#include <cstdint>
#include <limits>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "hydemic/errors.hpp"
#include "hydemic/rng.hpp"

namespace hydemic::nn {

enum class Mode { train, infer };

using Rng = ::hydemic::Rng;

// Batch-major dense tensor; value (b, c, i) lives at [(b*channels + c)*length + i].
// Dense layers use the convention channels == feature count, length == 1.
struct FeatureMap {
  int batch = 0;
  int channels = 0;
  int length = 0;
  std::vector<double> values;

  FeatureMap() = default;
  FeatureMap(int b, int c, int l)
      : batch(b), channels(c), length(l),
        values(static_cast<size_t>(b) * c * l, 0.0) {}

  double& at(int b, int c, int i) {
    return values[(static_cast<size_t>(b) * channels + c) * length + i];
  }
  double at(int b, int c, int i) const {
    return values[(static_cast<size_t>(b) * channels + c) * length + i];
  }
  double* row(int b, int c) {
    return values.data() + (static_cast<size_t>(b) * channels + c) * length;
  }
  const double* row(int b, int c) const {
    return values.data() + (static_cast<size_t>(b) * channels + c) * length;
  }
  size_t size() const { return values.size(); }
  bool same_shape(const FeatureMap& o) const {
    return batch == o.batch && channels == o.channels && length == o.length;
  }
};

// Named view onto one learnable array and its gradient.
struct ParamView {
  std::string name;
  std::vector<double>* value = nullptr;
  std::vector<double>* grad = nullptr;
};

class Layer {
 public:
  virtual ~Layer() = default;

  // Forward pass. Training mode caches whatever the exact backward pass
  // needs (inputs, masks, batch statistics); rng is only consumed by
  // dropout in training mode.
  virtual FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) = 0;

  // Exact adjoint of the most recent forward; fills parameter gradients
  // and returns the gradient w.r.t. the layer input.
  virtual FeatureMap backward(const FeatureMap& grad_out) = 0;

  virtual void collect_params(std::vector<ParamView>& out) { (void)out; }

  // Non-learnable state that still belongs to a trained model
  // (batchnorm running statistics).
  virtual void collect_state(std::vector<std::vector<double>*>& out) { (void)out; }

  // Distance of the cached forward pass to the nearest non-differentiable
  // flip (LeakyReLU kink, max-pool argmax change); +inf for smooth layers.
  // The gradient-check harness resamples inputs that sit too close.
  virtual double kink_margin() const {
    return std::numeric_limits<double>::infinity();
  }

  virtual const char* kind() const = 0;
};

// Valid padding, stride 1, cross-correlation semantics. Layers that feed a
// batchnorm are built without a learnable bias: the normalization cancels
// any per-channel shift, so the parameter would have an exactly-zero
// gradient.
class Conv1d final : public Layer {
 public:
  Conv1d(std::string name, int in_channels, int out_channels, int kernel,
         bool with_bias = true);

  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) override;
  FeatureMap backward(const FeatureMap& grad_out) override;
  void collect_params(std::vector<ParamView>& out) override;
  const char* kind() const override { return "conv1d"; }

  int in_channels() const { return in_ch_; }
  int out_channels() const { return out_ch_; }
  int kernel() const { return kernel_; }
  bool with_bias() const { return with_bias_; }

  std::vector<double> weights;  // [out_ch][in_ch][kernel]
  std::vector<double> bias;     // [out_ch]; fixed at zero when !with_bias
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;

 private:
  std::string name_;
  int in_ch_;
  int out_ch_;
  int kernel_;
  bool with_bias_;
  FeatureMap input_;
};

// Per-channel normalization; statistics are taken over (batch, length).
class BatchNorm1d final : public Layer {
 public:
  BatchNorm1d(std::string name, int channels, double epsilon = 1e-5,
              double momentum = 0.9);

  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) override;
  FeatureMap backward(const FeatureMap& grad_out) override;
  void collect_params(std::vector<ParamView>& out) override;
  void collect_state(std::vector<std::vector<double>*>& out) override;
  const char* kind() const override { return "batchnorm1d"; }

  int channels() const { return channels_; }
  double epsilon() const { return epsilon_; }

  std::vector<double> gamma;
  std::vector<double> beta;
  std::vector<double> running_mean;
  std::vector<double> running_var;
  std::vector<double> grad_gamma;
  std::vector<double> grad_beta;

 private:
  std::string name_;
  int channels_;
  double epsilon_;
  double momentum_;
  Mode last_mode_ = Mode::infer;
  FeatureMap normalized_;          // cached x-hat (train mode)
  std::vector<double> inv_std_;    // per channel, for the cached pass
};

class LeakyReLU final : public Layer {
 public:
  explicit LeakyReLU(double alpha);

  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) override;
  FeatureMap backward(const FeatureMap& grad_out) override;
  double kink_margin() const override;
  const char* kind() const override { return "leaky_relu"; }

  double alpha() const { return alpha_; }

 private:
  double alpha_;
  FeatureMap input_;
};

// Non-overlapping windows, stride == pool, trailing remainder dropped.
// Backward routes the gradient to the first maximal index per window.
class MaxPool1d final : public Layer {
 public:
  explicit MaxPool1d(int pool);

  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) override;
  FeatureMap backward(const FeatureMap& grad_out) override;
  double kink_margin() const override { return min_gap_; }
  const char* kind() const override { return "maxpool1d"; }

  int pool() const { return pool_; }

 private:
  int pool_;
  int in_length_ = 0;
  FeatureMap grad_template_;       // shape of the input
  std::vector<int> argmax_;        // per output element
  double min_gap_ = std::numeric_limits<double>::infinity();
};

// Inverted dropout: survivors are scaled by 1/(1-rate) at train time so
// inference is a plain identity.
class Dropout final : public Layer {
 public:
  explicit Dropout(double rate);

  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) override;
  FeatureMap backward(const FeatureMap& grad_out) override;
  const char* kind() const override { return "dropout"; }

  double rate() const { return rate_; }

 private:
  double rate_;
  bool identity_ = true;
  std::vector<double> mask_;
};

// (b, C, L) -> (b, C*L, 1). Values are already contiguous in (c, i) order.
class Flatten final : public Layer {
 public:
  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) override;
  FeatureMap backward(const FeatureMap& grad_out) override;
  const char* kind() const override { return "flatten"; }

 private:
  int in_channels_ = 0;
  int in_length_ = 0;
};

// Fully connected layer on flat features (length must be 1).
class Dense final : public Layer {
 public:
  Dense(std::string name, int in_features, int out_features);

  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng) override;
  FeatureMap backward(const FeatureMap& grad_out) override;
  void collect_params(std::vector<ParamView>& out) override;
  const char* kind() const override { return "dense"; }

  int in_features() const { return in_; }
  int out_features() const { return out_; }

  std::vector<double> weights;  // [out][in]
  std::vector<double> bias;     // [out]
  std::vector<double> grad_weights;
  std::vector<double> grad_bias;

 private:
  std::string name_;
  int in_;
  int out_;
  FeatureMap input_;
};

// Owning sequential container.
class Stack {
 public:
  Layer& push(std::unique_ptr<Layer> layer);

  FeatureMap forward(const FeatureMap& x, Mode mode, Rng* rng = nullptr);
  FeatureMap backward(const FeatureMap& grad_out);

  std::vector<ParamView> params();
  std::vector<std::vector<double>*> state();
  void zero_grads();

  size_t size() const { return layers_.size(); }
  Layer& at(size_t i) { return *layers_[i]; }
  const Layer& at(size_t i) const { return *layers_[i]; }
  double kink_margin() const;

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct LossResult {
  double loss = 0.0;          // mean over the batch
  FeatureMap grad_logits;     // (softmax - onehot) / batch
  FeatureMap probabilities;
};

// Numerically stable softmax over channels; logits shape (b, C, 1).
FeatureMap softmax(const FeatureMap& logits);

LossResult softmax_cross_entropy(const FeatureMap& logits,
                                 std::span<const int> targets);

// Central-difference check (fourth-order Richardson stencil) of every
// parameter gradient against the analytic backward pass. Requires dropout
// rates of 0 and a kink-free forward pass (see sample_kink_free_input).
// Returns the max over parameters of |a-n| / max(|a|, |n|, 1e-8). Networks
// containing batchnorm have parameters whose exact gradient is zero (a
// conv bias ahead of the normalization), so callers should pick epsilon
// large enough that difference roundoff stays under 1e-12, e.g. 3e-4.
double gradient_check(Stack& net, const FeatureMap& input,
                      std::span<const int> targets, double epsilon = 1e-5);

// Draws inputs in [0,1) until the train-mode forward pass keeps at least
// `margin` clear of LeakyReLU kinks and max-pool ties, so the probe steps
// of gradient_check cannot cross one. Throws after too many attempts.
FeatureMap sample_kink_free_input(Stack& net, int batch, int channels,
                                  int length, Rng& rng, double margin = 1.5e-3,
                                  int max_attempts = 512);

}  // namespace hydemic::nn
