#include "hydemic/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "hydemic/parallel.hpp"

namespace hydemic::nn {

namespace {

void check_finite_targets(std::span<const int> targets, int n_classes) {
  for (int t : targets) {
    if (t < 0 || t >= n_classes) {
      throw ArgumentError("target class " + std::to_string(t) +
                          " out of range [0, " + std::to_string(n_classes) + ")");
    }
  }
}

}  // namespace

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(std::string name, int in_channels, int out_channels, int kernel,
               bool with_bias)
    : name_(std::move(name)), in_ch_(in_channels), out_ch_(out_channels),
      kernel_(kernel), with_bias_(with_bias) {
  if (in_ch_ < 1 || out_ch_ < 1 || kernel_ < 1) {
    throw ArgumentError("conv1d: channel counts and kernel must be positive");
  }
  weights.assign(static_cast<size_t>(out_ch_) * in_ch_ * kernel_, 0.0);
  bias.assign(out_ch_, 0.0);
  grad_weights.assign(weights.size(), 0.0);
  grad_bias.assign(bias.size(), 0.0);
}

FeatureMap Conv1d::forward(const FeatureMap& x, Mode mode, Rng*) {
  if (x.channels != in_ch_) {
    throw DimensionError(name_ + ": expected " + std::to_string(in_ch_) +
                         " input channels, got " + std::to_string(x.channels));
  }
  if (x.length < kernel_) {
    throw DimensionError(name_ + ": input length " + std::to_string(x.length) +
                         " shorter than kernel " + std::to_string(kernel_));
  }
  if (mode == Mode::train) input_ = x;

  const int out_len = x.length - kernel_ + 1;
  FeatureMap y(x.batch, out_ch_, out_len);
  parallel_for(static_cast<int64_t>(x.batch) * out_ch_, [&](int64_t job) {
    const int b = static_cast<int>(job / out_ch_);
    const int oc = static_cast<int>(job % out_ch_);
    double* out = y.row(b, oc);
    std::fill(out, out + out_len, bias[oc]);
    for (int ic = 0; ic < in_ch_; ++ic) {
      const double* in = x.row(b, ic);
      const double* w = &weights[(static_cast<size_t>(oc) * in_ch_ + ic) * kernel_];
      for (int k = 0; k < kernel_; ++k) {
        const double wk = w[k];
        const double* shifted = in + k;
        for (int i = 0; i < out_len; ++i) out[i] += wk * shifted[i];
      }
    }
  });
  return y;
}

FeatureMap Conv1d::backward(const FeatureMap& g) {
  const int out_len = input_.length - kernel_ + 1;
  if (g.batch != input_.batch || g.channels != out_ch_ || g.length != out_len) {
    throw DimensionError(name_ + ": gradient shape does not match forward pass");
  }

  std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
  std::fill(grad_bias.begin(), grad_bias.end(), 0.0);

  parallel_for(static_cast<int64_t>(out_ch_) * in_ch_, [&](int64_t job) {
    const int oc = static_cast<int>(job / in_ch_);
    const int ic = static_cast<int>(job % in_ch_);
    double* gw = &grad_weights[(static_cast<size_t>(oc) * in_ch_ + ic) * kernel_];
    for (int b = 0; b < input_.batch; ++b) {
      const double* gr = g.row(b, oc);
      const double* in = input_.row(b, ic);
      for (int k = 0; k < kernel_; ++k) {
        const double* shifted = in + k;
        double acc = 0.0;
        for (int i = 0; i < out_len; ++i) acc += gr[i] * shifted[i];
        gw[k] += acc;
      }
    }
  });

  for (int oc = 0; oc < out_ch_; ++oc) {
    double acc = 0.0;
    for (int b = 0; b < input_.batch; ++b) {
      const double* gr = g.row(b, oc);
      for (int i = 0; i < out_len; ++i) acc += gr[i];
    }
    grad_bias[oc] = acc;
  }

  FeatureMap gx(input_.batch, in_ch_, input_.length);
  parallel_for(static_cast<int64_t>(input_.batch) * in_ch_, [&](int64_t job) {
    const int b = static_cast<int>(job / in_ch_);
    const int ic = static_cast<int>(job % in_ch_);
    double* dst = gx.row(b, ic);
    for (int oc = 0; oc < out_ch_; ++oc) {
      const double* gr = g.row(b, oc);
      const double* w = &weights[(static_cast<size_t>(oc) * in_ch_ + ic) * kernel_];
      for (int k = 0; k < kernel_; ++k) {
        const double wk = w[k];
        double* d = dst + k;
        for (int i = 0; i < out_len; ++i) d[i] += wk * gr[i];
      }
    }
  });
  return gx;
}

void Conv1d::collect_params(std::vector<ParamView>& out) {
  out.push_back({name_ + ".weights", &weights, &grad_weights});
  if (with_bias_) out.push_back({name_ + ".bias", &bias, &grad_bias});
}

// ----------------------------------------------------------- BatchNorm1d

BatchNorm1d::BatchNorm1d(std::string name, int channels, double epsilon,
                         double momentum)
    : name_(std::move(name)), channels_(channels), epsilon_(epsilon),
      momentum_(momentum) {
  if (channels_ < 1) throw ArgumentError("batchnorm1d: channels must be positive");
  if (epsilon_ <= 0.0) throw ArgumentError("batchnorm1d: epsilon must be positive");
  gamma.assign(channels_, 1.0);
  beta.assign(channels_, 0.0);
  running_mean.assign(channels_, 0.0);
  running_var.assign(channels_, 1.0);
  grad_gamma.assign(channels_, 0.0);
  grad_beta.assign(channels_, 0.0);
}

FeatureMap BatchNorm1d::forward(const FeatureMap& x, Mode mode, Rng*) {
  if (x.channels != channels_) {
    throw DimensionError(name_ + ": expected " + std::to_string(channels_) +
                         " channels, got " + std::to_string(x.channels));
  }
  last_mode_ = mode;
  FeatureMap y(x.batch, x.channels, x.length);

  if (mode == Mode::infer) {
    parallel_for(channels_, [&](int64_t c) {
      const double scale = gamma[c] / std::sqrt(running_var[c] + epsilon_);
      const double shift = beta[c] - scale * running_mean[c];
      for (int b = 0; b < x.batch; ++b) {
        const double* in = x.row(b, static_cast<int>(c));
        double* out = y.row(b, static_cast<int>(c));
        for (int i = 0; i < x.length; ++i) out[i] = scale * in[i] + shift;
      }
    });
    return y;
  }

  const int64_t n = static_cast<int64_t>(x.batch) * x.length;
  if (n <= 1) {
    throw ArgumentError(name_ +
                        ": degenerate statistics, batch*length must exceed 1 "
                        "in training mode");
  }

  normalized_ = FeatureMap(x.batch, x.channels, x.length);
  inv_std_.assign(channels_, 0.0);

  parallel_for(channels_, [&](int64_t cj) {
    const int c = static_cast<int>(cj);
    double sum = 0.0;
    for (int b = 0; b < x.batch; ++b) {
      const double* in = x.row(b, c);
      for (int i = 0; i < x.length; ++i) sum += in[i];
    }
    const double mean = sum / static_cast<double>(n);

    double sq = 0.0;
    for (int b = 0; b < x.batch; ++b) {
      const double* in = x.row(b, c);
      for (int i = 0; i < x.length; ++i) {
        const double d = in[i] - mean;
        sq += d * d;
      }
    }
    const double var = sq / static_cast<double>(n);  // biased
    const double inv = 1.0 / std::sqrt(var + epsilon_);
    inv_std_[c] = inv;

    for (int b = 0; b < x.batch; ++b) {
      const double* in = x.row(b, c);
      double* xn = normalized_.row(b, c);
      double* out = y.row(b, c);
      for (int i = 0; i < x.length; ++i) {
        xn[i] = (in[i] - mean) * inv;
        out[i] = gamma[c] * xn[i] + beta[c];
      }
    }

    running_mean[c] = momentum_ * running_mean[c] + (1.0 - momentum_) * mean;
    running_var[c] = momentum_ * running_var[c] + (1.0 - momentum_) * var;
  });
  return y;
}

FeatureMap BatchNorm1d::backward(const FeatureMap& g) {
  if (last_mode_ == Mode::infer) {
    FeatureMap gx(g.batch, g.channels, g.length);
    for (int c = 0; c < channels_; ++c) {
      const double scale = gamma[c] / std::sqrt(running_var[c] + epsilon_);
      for (int b = 0; b < g.batch; ++b) {
        const double* gr = g.row(b, c);
        double* dst = gx.row(b, c);
        for (int i = 0; i < g.length; ++i) dst[i] = scale * gr[i];
      }
    }
    return gx;
  }

  if (!g.same_shape(normalized_)) {
    throw DimensionError(name_ + ": gradient shape does not match forward pass");
  }
  const double n = static_cast<double>(static_cast<int64_t>(g.batch) * g.length);
  FeatureMap gx(g.batch, g.channels, g.length);

  parallel_for(channels_, [&](int64_t cj) {
    const int c = static_cast<int>(cj);
    double sum_g = 0.0;
    double sum_gx = 0.0;
    for (int b = 0; b < g.batch; ++b) {
      const double* gr = g.row(b, c);
      const double* xn = normalized_.row(b, c);
      for (int i = 0; i < g.length; ++i) {
        sum_g += gr[i];
        sum_gx += gr[i] * xn[i];
      }
    }
    grad_beta[c] = sum_g;
    grad_gamma[c] = sum_gx;

    // dx = gamma * inv_std * (g - mean(g) - xhat * mean(g * xhat))
    const double scale = gamma[c] * inv_std_[c];
    const double mean_g = sum_g / n;
    const double mean_gx = sum_gx / n;
    for (int b = 0; b < g.batch; ++b) {
      const double* gr = g.row(b, c);
      const double* xn = normalized_.row(b, c);
      double* dst = gx.row(b, c);
      for (int i = 0; i < g.length; ++i) {
        dst[i] = scale * (gr[i] - mean_g - xn[i] * mean_gx);
      }
    }
  });
  return gx;
}

void BatchNorm1d::collect_params(std::vector<ParamView>& out) {
  out.push_back({name_ + ".gamma", &gamma, &grad_gamma});
  out.push_back({name_ + ".beta", &beta, &grad_beta});
}

void BatchNorm1d::collect_state(std::vector<std::vector<double>*>& out) {
  out.push_back(&running_mean);
  out.push_back(&running_var);
}

// ------------------------------------------------------------- LeakyReLU

LeakyReLU::LeakyReLU(double alpha) : alpha_(alpha) {
  if (!(alpha > 0.0 && alpha < 1.0)) {
    throw ArgumentError("leaky_relu: alpha must lie in (0, 1)");
  }
}

FeatureMap LeakyReLU::forward(const FeatureMap& x, Mode mode, Rng*) {
  if (mode == Mode::train) input_ = x;
  FeatureMap y(x.batch, x.channels, x.length);
  for (size_t i = 0; i < x.values.size(); ++i) {
    const double v = x.values[i];
    y.values[i] = v > 0.0 ? v : alpha_ * v;
  }
  return y;
}

FeatureMap LeakyReLU::backward(const FeatureMap& g) {
  if (!g.same_shape(input_)) {
    throw DimensionError("leaky_relu: gradient shape does not match forward pass");
  }
  FeatureMap gx(g.batch, g.channels, g.length);
  for (size_t i = 0; i < g.values.size(); ++i) {
    // subgradient 1 at exactly 0
    gx.values[i] = input_.values[i] >= 0.0 ? g.values[i] : alpha_ * g.values[i];
  }
  return gx;
}

double LeakyReLU::kink_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (double v : input_.values) margin = std::min(margin, std::abs(v));
  return margin;
}

// ------------------------------------------------------------- MaxPool1d

MaxPool1d::MaxPool1d(int pool) : pool_(pool) {
  if (pool_ < 1) throw ArgumentError("maxpool1d: pool size must be positive");
}

FeatureMap MaxPool1d::forward(const FeatureMap& x, Mode mode, Rng*) {
  if (x.length < pool_) {
    throw DimensionError("maxpool1d: input length " + std::to_string(x.length) +
                         " shorter than pool " + std::to_string(pool_));
  }
  const int out_len = x.length / pool_;
  in_length_ = x.length;
  min_gap_ = std::numeric_limits<double>::infinity();
  FeatureMap y(x.batch, x.channels, out_len);
  const bool caching = mode == Mode::train;
  if (caching) {
    grad_template_ = FeatureMap(x.batch, x.channels, x.length);
    argmax_.assign(y.size(), 0);
  }

  size_t out_idx = 0;
  for (int b = 0; b < x.batch; ++b) {
    for (int c = 0; c < x.channels; ++c) {
      const double* in = x.row(b, c);
      double* out = y.row(b, c);
      for (int w = 0; w < out_len; ++w) {
        const int base = w * pool_;
        int best = base;
        double best_v = in[base];
        double second = -std::numeric_limits<double>::infinity();
        for (int k = 1; k < pool_; ++k) {
          const double v = in[base + k];
          if (v > best_v) {
            second = best_v;
            best_v = v;
            best = base + k;
          } else if (v > second) {
            second = v;
          }
        }
        if (pool_ > 1) min_gap_ = std::min(min_gap_, best_v - second);
        out[w] = best_v;
        if (caching) argmax_[out_idx] = best;
        ++out_idx;
      }
    }
  }
  return y;
}

FeatureMap MaxPool1d::backward(const FeatureMap& g) {
  if (g.batch != grad_template_.batch || g.channels != grad_template_.channels ||
      g.size() != argmax_.size()) {
    throw DimensionError("maxpool1d: gradient shape does not match forward pass");
  }
  FeatureMap gx(grad_template_.batch, grad_template_.channels, in_length_);
  size_t out_idx = 0;
  for (int b = 0; b < g.batch; ++b) {
    for (int c = 0; c < g.channels; ++c) {
      const double* gr = g.row(b, c);
      double* dst = gx.row(b, c);
      for (int w = 0; w < g.length; ++w) {
        dst[argmax_[out_idx]] += gr[w];
        ++out_idx;
      }
    }
  }
  return gx;
}

// --------------------------------------------------------------- Dropout

Dropout::Dropout(double rate) : rate_(rate) {
  if (!(rate >= 0.0 && rate < 1.0)) {
    throw ArgumentError("dropout: rate must lie in [0, 1)");
  }
}

FeatureMap Dropout::forward(const FeatureMap& x, Mode mode, Rng* rng) {
  if (mode == Mode::infer || rate_ == 0.0) {
    identity_ = true;
    return x;
  }
  if (rng == nullptr) {
    throw ArgumentError("dropout: rng required in training mode");
  }
  identity_ = false;
  const double keep = 1.0 - rate_;
  const double scale = 1.0 / keep;
  mask_.assign(x.values.size(), 0.0);
  FeatureMap y(x.batch, x.channels, x.length);
  for (size_t i = 0; i < x.values.size(); ++i) {
    if (uniform01(*rng) < keep) {
      mask_[i] = scale;
      y.values[i] = x.values[i] * scale;
    }
  }
  return y;
}

FeatureMap Dropout::backward(const FeatureMap& g) {
  if (identity_) return g;
  if (g.values.size() != mask_.size()) {
    throw DimensionError("dropout: gradient shape does not match forward pass");
  }
  FeatureMap gx(g.batch, g.channels, g.length);
  for (size_t i = 0; i < g.values.size(); ++i) {
    gx.values[i] = g.values[i] * mask_[i];
  }
  return gx;
}

// --------------------------------------------------------------- Flatten

FeatureMap Flatten::forward(const FeatureMap& x, Mode, Rng*) {
  in_channels_ = x.channels;
  in_length_ = x.length;
  FeatureMap y(x.batch, x.channels * x.length, 1);
  y.values = x.values;
  return y;
}

FeatureMap Flatten::backward(const FeatureMap& g) {
  if (g.channels != in_channels_ * in_length_ || g.length != 1) {
    throw DimensionError("flatten: gradient shape does not match forward pass");
  }
  FeatureMap gx(g.batch, in_channels_, in_length_);
  gx.values = g.values;
  return gx;
}

// ----------------------------------------------------------------- Dense

Dense::Dense(std::string name, int in_features, int out_features)
    : name_(std::move(name)), in_(in_features), out_(out_features) {
  if (in_ < 1 || out_ < 1) {
    throw ArgumentError("dense: feature counts must be positive");
  }
  weights.assign(static_cast<size_t>(out_) * in_, 0.0);
  bias.assign(out_, 0.0);
  grad_weights.assign(weights.size(), 0.0);
  grad_bias.assign(bias.size(), 0.0);
}

FeatureMap Dense::forward(const FeatureMap& x, Mode mode, Rng*) {
  if (x.channels != in_ || x.length != 1) {
    throw DimensionError(name_ + ": expected flat input of width " +
                         std::to_string(in_) + ", got " +
                         std::to_string(x.channels) + "x" +
                         std::to_string(x.length));
  }
  if (mode == Mode::train) input_ = x;
  FeatureMap y(x.batch, out_, 1);
  parallel_for(static_cast<int64_t>(x.batch) * out_, [&](int64_t job) {
    const int b = static_cast<int>(job / out_);
    const int o = static_cast<int>(job % out_);
    const double* in = x.row(b, 0);
    const double* w = &weights[static_cast<size_t>(o) * in_];
    double acc = bias[o];
    for (int i = 0; i < in_; ++i) acc += w[i] * in[i];
    y.values[static_cast<size_t>(b) * out_ + o] = acc;
  });
  return y;
}

FeatureMap Dense::backward(const FeatureMap& g) {
  if (g.batch != input_.batch || g.channels != out_ || g.length != 1) {
    throw DimensionError(name_ + ": gradient shape does not match forward pass");
  }
  std::fill(grad_weights.begin(), grad_weights.end(), 0.0);
  parallel_for(out_, [&](int64_t oj) {
    const int o = static_cast<int>(oj);
    double* gw = &grad_weights[static_cast<size_t>(o) * in_];
    double gb = 0.0;
    for (int b = 0; b < g.batch; ++b) {
      const double go = g.values[static_cast<size_t>(b) * out_ + o];
      gb += go;
      const double* in = input_.row(b, 0);
      for (int i = 0; i < in_; ++i) gw[i] += go * in[i];
    }
    grad_bias[o] = gb;
  });

  FeatureMap gx(g.batch, in_, 1);
  parallel_for(g.batch, [&](int64_t bj) {
    const int b = static_cast<int>(bj);
    double* dst = gx.row(b, 0);
    for (int o = 0; o < out_; ++o) {
      const double go = g.values[static_cast<size_t>(b) * out_ + o];
      const double* w = &weights[static_cast<size_t>(o) * in_];
      for (int i = 0; i < in_; ++i) dst[i] += go * w[i];
    }
  });
  return gx;
}

void Dense::collect_params(std::vector<ParamView>& out) {
  out.push_back({name_ + ".weights", &weights, &grad_weights});
  out.push_back({name_ + ".bias", &bias, &grad_bias});
}

// ----------------------------------------------------------------- Stack

Layer& Stack::push(std::unique_ptr<Layer> layer) {
  layers_.push_back(std::move(layer));
  return *layers_.back();
}

FeatureMap Stack::forward(const FeatureMap& x, Mode mode, Rng* rng) {
  FeatureMap cur = x;
  for (auto& layer : layers_) {
    cur = layer->forward(cur, mode, rng);
  }
  return cur;
}

FeatureMap Stack::backward(const FeatureMap& grad_out) {
  FeatureMap cur = grad_out;
  for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) {
    cur = (*it)->backward(cur);
  }
  return cur;
}

std::vector<ParamView> Stack::params() {
  std::vector<ParamView> out;
  for (auto& layer : layers_) layer->collect_params(out);
  return out;
}

std::vector<std::vector<double>*> Stack::state() {
  std::vector<std::vector<double>*> out;
  for (auto& layer : layers_) layer->collect_state(out);
  return out;
}

void Stack::zero_grads() {
  for (auto view : params()) {
    std::fill(view.grad->begin(), view.grad->end(), 0.0);
  }
}

double Stack::kink_margin() const {
  double margin = std::numeric_limits<double>::infinity();
  for (const auto& layer : layers_) {
    margin = std::min(margin, layer->kink_margin());
  }
  return margin;
}

// --------------------------------------------------------------- softmax

FeatureMap softmax(const FeatureMap& logits) {
  if (logits.length != 1) {
    throw DimensionError("softmax: expected flat logits (length 1)");
  }
  FeatureMap p(logits.batch, logits.channels, 1);
  const int c = logits.channels;
  for (int b = 0; b < logits.batch; ++b) {
    const double* in = logits.row(b, 0);
    double* out = p.row(b, 0);
    double max_v = in[0];
    for (int i = 1; i < c; ++i) max_v = std::max(max_v, in[i]);
    double sum = 0.0;
    for (int i = 0; i < c; ++i) {
      out[i] = std::exp(in[i] - max_v);
      sum += out[i];
    }
    for (int i = 0; i < c; ++i) out[i] /= sum;
  }
  return p;
}

LossResult softmax_cross_entropy(const FeatureMap& logits,
                                 std::span<const int> targets) {
  if (logits.length != 1) {
    throw DimensionError("softmax_cross_entropy: expected flat logits");
  }
  if (static_cast<size_t>(logits.batch) != targets.size()) {
    throw ArgumentError("softmax_cross_entropy: batch/target count mismatch");
  }
  const int c = logits.channels;
  check_finite_targets(targets, c);

  LossResult result;
  result.probabilities = FeatureMap(logits.batch, c, 1);
  result.grad_logits = FeatureMap(logits.batch, c, 1);
  const double inv_batch = 1.0 / static_cast<double>(logits.batch);

  double total = 0.0;
  for (int b = 0; b < logits.batch; ++b) {
    const double* in = logits.row(b, 0);
    double* prob = result.probabilities.row(b, 0);
    double* grad = result.grad_logits.row(b, 0);

    double max_v = in[0];
    for (int i = 1; i < c; ++i) max_v = std::max(max_v, in[i]);
    double sum = 0.0;
    for (int i = 0; i < c; ++i) {
      prob[i] = std::exp(in[i] - max_v);
      sum += prob[i];
    }
    for (int i = 0; i < c; ++i) prob[i] /= sum;

    const int t = targets[b];
    // log(p_t) computed from logits directly for stability
    total += -(in[t] - max_v - std::log(sum));
    for (int i = 0; i < c; ++i) {
      grad[i] = (prob[i] - (i == t ? 1.0 : 0.0)) * inv_batch;
    }
  }
  result.loss = total * inv_batch;
  return result;
}

// -------------------------------------------------------- gradient check

namespace {

double loss_only(Stack& net, const FeatureMap& input,
                 std::span<const int> targets) {
  FeatureMap logits = net.forward(input, Mode::train, nullptr);
  return softmax_cross_entropy(logits, targets).loss;
}

}  // namespace

double gradient_check(Stack& net, const FeatureMap& input,
                      std::span<const int> targets, double epsilon) {
  for (size_t i = 0; i < net.size(); ++i) {
    if (const auto* d = dynamic_cast<const Dropout*>(&net.at(i))) {
      if (d->rate() > 0.0) {
        throw ArgumentError("gradient_check: dropout must be disabled");
      }
    }
  }

  // Batchnorm running statistics drift across probe passes; snapshot and
  // restore so the check leaves the network untouched.
  auto state = net.state();
  std::vector<std::vector<double>> saved;
  saved.reserve(state.size());
  for (auto* v : state) saved.push_back(*v);

  FeatureMap logits = net.forward(input, Mode::train, nullptr);
  LossResult loss = softmax_cross_entropy(logits, targets);
  net.backward(loss.grad_logits);

  auto params = net.params();
  std::vector<std::vector<double>> analytic;
  analytic.reserve(params.size());
  for (auto& view : params) analytic.push_back(*view.grad);

  double max_rel = 0.0;
  for (size_t p = 0; p < params.size(); ++p) {
    std::vector<double>& theta = *params[p].value;
    for (size_t i = 0; i < theta.size(); ++i) {
      const double orig = theta[i];
      const auto probe = [&](double step) {
        theta[i] = orig + step;
        const double value = loss_only(net, input, targets);
        theta[i] = orig;
        return value;
      };
      // fourth-order central stencil; truncation falls as epsilon^4
      const double numeric = (8.0 * (probe(epsilon) - probe(-epsilon)) -
                              (probe(2.0 * epsilon) - probe(-2.0 * epsilon))) /
                             (12.0 * epsilon);
      const double a = analytic[p][i];
      const double rel = std::abs(a - numeric) /
                         std::max({std::abs(a), std::abs(numeric), 1e-8});
      max_rel = std::max(max_rel, rel);
    }
  }

  for (size_t i = 0; i < state.size(); ++i) *state[i] = saved[i];
  return max_rel;
}

FeatureMap sample_kink_free_input(Stack& net, int batch, int channels,
                                  int length, Rng& rng, double margin,
                                  int max_attempts) {
  for (int attempt = 0; attempt < max_attempts; ++attempt) {
    FeatureMap input(batch, channels, length);
    for (double& v : input.values) v = uniform01(rng);
    net.forward(input, Mode::train, nullptr);
    if (net.kink_margin() >= margin) return input;
  }
  throw DataError("sample_kink_free_input: no kink-free input found");
}

}  // namespace hydemic::nn
