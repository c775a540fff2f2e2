#include "hydemic/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "hydemic/io_util.hpp"
#include "hydemic/parallel.hpp"

namespace hydemic {

void ModelConfig::validate() const {
  if (n_bands < 1 || n_classes < 2) {
    throw ArgumentError("model config: need n_bands >= 1 and n_classes >= 2");
  }
  if (conv_filters[0] < 1 || conv_filters[1] < 1 || kernel < 1 || pool < 1 ||
      dense_units[0] < 1 || dense_units[1] < 1) {
    throw ArgumentError("model config: layer sizes must be positive");
  }
  for (double rate : dropout_rates) {
    if (!(rate >= 0.0 && rate < 1.0)) {
      throw ArgumentError("model config: dropout rates must lie in [0, 1)");
    }
  }
  if (!(leaky_alpha > 0.0 && leaky_alpha < 1.0)) {
    throw ArgumentError("model config: leaky alpha must lie in (0, 1)");
  }
  if (conv1_len() < 1 || pool1_len() < 1 || conv2_len() < 1 || pool2_len() < 1) {
    throw ArgumentError(
        "model config: valid-padding pipeline collapses to zero width "
        "(bands too short for kernel/pool)");
  }
}

namespace {

// He-style uniform init: +-sqrt(6 / fan_in), biases zero.
void init_uniform(std::vector<double>& weights, int fan_in, nn::Rng& rng) {
  const double bound = std::sqrt(6.0 / static_cast<double>(fan_in));
  for (double& w : weights) w = (2.0 * uniform01(rng) - 1.0) * bound;
}

std::vector<std::string> default_class_names(int n_classes) {
  std::vector<std::string> names;
  names.reserve(static_cast<size_t>(n_classes));
  for (int i = 0; i < n_classes - 1; ++i) {
    char buf[24];
    std::snprintf(buf, sizeof(buf), "class_%03d", i);
    names.emplace_back(buf);
  }
  names.emplace_back("ground");
  return names;
}

}  // namespace

Model::Model(const ModelConfig& config, std::vector<std::string> class_names,
             uint64_t init_seed)
    : config_(config), class_names_(std::move(class_names)), init_seed_(init_seed) {
  config_.validate();
  if (class_names_.empty()) {
    class_names_ = default_class_names(config_.n_classes);
  }
  if (static_cast<int>(class_names_.size()) != config_.n_classes) {
    throw ArgumentError("model: class name count does not match n_classes");
  }

  using namespace nn;
  auto& conv1 = static_cast<Conv1d&>(
      stack_.push(std::make_unique<Conv1d>("conv1", 1, config_.conv_filters[0],
                                           config_.kernel, /*with_bias=*/false)));
  stack_.push(std::make_unique<BatchNorm1d>("bn1", config_.conv_filters[0],
                                            config_.bn_epsilon, config_.bn_momentum));
  stack_.push(std::make_unique<LeakyReLU>(config_.leaky_alpha));
  stack_.push(std::make_unique<MaxPool1d>(config_.pool));
  stack_.push(std::make_unique<Dropout>(config_.dropout_rates[0]));

  auto& conv2 = static_cast<Conv1d&>(stack_.push(
      std::make_unique<Conv1d>("conv2", config_.conv_filters[0],
                               config_.conv_filters[1], config_.kernel,
                               /*with_bias=*/false)));
  stack_.push(std::make_unique<BatchNorm1d>("bn2", config_.conv_filters[1],
                                            config_.bn_epsilon, config_.bn_momentum));
  stack_.push(std::make_unique<LeakyReLU>(config_.leaky_alpha));
  stack_.push(std::make_unique<MaxPool1d>(config_.pool));
  stack_.push(std::make_unique<Dropout>(config_.dropout_rates[1]));

  stack_.push(std::make_unique<Flatten>());

  auto& dense1 = static_cast<Dense&>(stack_.push(std::make_unique<Dense>(
      "dense1", config_.flatten_width(), config_.dense_units[0])));
  stack_.push(std::make_unique<LeakyReLU>(config_.leaky_alpha));
  stack_.push(std::make_unique<Dropout>(config_.dropout_rates[2]));

  auto& dense2 = static_cast<Dense&>(stack_.push(std::make_unique<Dense>(
      "dense2", config_.dense_units[0], config_.dense_units[1])));
  stack_.push(std::make_unique<LeakyReLU>(config_.leaky_alpha));
  stack_.push(std::make_unique<Dropout>(config_.dropout_rates[3]));

  auto& dense_out = static_cast<Dense&>(stack_.push(std::make_unique<Dense>(
      "dense_out", config_.dense_units[1], config_.n_classes)));

  nn::Rng rng(mix_seed(init_seed, 0x1417ull));
  init_uniform(conv1.weights, config_.kernel, rng);
  init_uniform(conv2.weights, config_.conv_filters[0] * config_.kernel, rng);
  init_uniform(dense1.weights, config_.flatten_width(), rng);
  init_uniform(dense2.weights, config_.dense_units[0], rng);
  init_uniform(dense_out.weights, config_.dense_units[1], rng);
}

nn::FeatureMap Model::forward(const nn::FeatureMap& input, nn::Mode mode,
                              nn::Rng* rng, nn::FeatureMap* logits_out) {
  if (input.channels != 1 || input.length != config_.n_bands) {
    throw DimensionError("model: expected input of width " +
                         std::to_string(config_.n_bands) + ", got " +
                         std::to_string(input.channels) + "x" +
                         std::to_string(input.length));
  }
  nn::FeatureMap logits = stack_.forward(input, mode, rng);
  nn::FeatureMap probs = nn::softmax(logits);
  if (logits_out != nullptr) *logits_out = std::move(logits);
  return probs;
}

std::vector<std::vector<double>> Model::snapshot() const {
  auto& self = const_cast<Model&>(*this);
  std::vector<std::vector<double>> out;
  for (auto view : self.stack_.params()) out.push_back(*view.value);
  for (auto* state : self.stack_.state()) out.push_back(*state);
  return out;
}

void Model::restore(const std::vector<std::vector<double>>& snapshot) {
  auto params = stack_.params();
  auto state = stack_.state();
  if (snapshot.size() != params.size() + state.size()) {
    throw ArgumentError("model restore: snapshot layout mismatch");
  }
  size_t i = 0;
  for (auto view : params) *view.value = snapshot[i++];
  for (auto* s : state) *s = snapshot[i++];
}

Model build_model(const ModelConfig& config, std::vector<std::string> class_names,
                  uint64_t init_seed) {
  return Model(config, std::move(class_names), init_seed);
}

// --------------------------------------------------------------- predict

MineralMap predict_pixelwise(Model& model, const HyperCube& cube) {
  if (cube.bands != model.config().n_bands) {
    throw DimensionError("predict: cube has " + std::to_string(cube.bands) +
                         " bands, model expects " +
                         std::to_string(model.config().n_bands));
  }
  MineralMap map;
  map.height = cube.height;
  map.width = cube.width;
  const int64_t n = cube.pixel_count();
  map.classes.assign(static_cast<size_t>(n), 0);
  map.confidence.assign(static_cast<size_t>(n), 0.0);

  const int chunk = 64;
  const int bands = cube.bands;
  const int classes = model.config().n_classes;
  for (int64_t start = 0; start < n; start += chunk) {
    const int count = static_cast<int>(std::min<int64_t>(chunk, n - start));
    nn::FeatureMap batch(count, 1, bands);
    for (int i = 0; i < count; ++i) {
      std::memcpy(batch.row(i, 0), cube.pixel(static_cast<int>(start + i)),
                  static_cast<size_t>(bands) * sizeof(double));
    }
    nn::FeatureMap probs = model.forward(batch, nn::Mode::infer);
    for (int i = 0; i < count; ++i) {
      const double* row = probs.row(i, 0);
      int best = 0;
      for (int c = 1; c < classes; ++c) {
        if (row[c] > row[best]) best = c;
      }
      map.classes[static_cast<size_t>(start + i)] = best;
      map.confidence[static_cast<size_t>(start + i)] = 100.0 * row[best];
    }
  }
  return map;
}

// --------------------------------------------------------- serialization

namespace {

constexpr char kMagic[4] = {'H', 'D', 'M', '1'};
constexpr int kFormatVersion = 1;

nlohmann::json config_to_json(const ModelConfig& c) {
  return nlohmann::json{
      {"n_bands", c.n_bands},
      {"n_classes", c.n_classes},
      {"conv_filters", {c.conv_filters[0], c.conv_filters[1]}},
      {"kernel", c.kernel},
      {"pool", c.pool},
      {"dense_units", {c.dense_units[0], c.dense_units[1]}},
      {"dropout_rates",
       {c.dropout_rates[0], c.dropout_rates[1], c.dropout_rates[2], c.dropout_rates[3]}},
      {"leaky_alpha", c.leaky_alpha},
      {"bn_epsilon", c.bn_epsilon},
      {"bn_momentum", c.bn_momentum}};
}

ModelConfig config_from_json(const nlohmann::json& j) {
  ModelConfig c;
  c.n_bands = j.at("n_bands").get<int>();
  c.n_classes = j.at("n_classes").get<int>();
  c.conv_filters = {j.at("conv_filters").at(0).get<int>(),
                    j.at("conv_filters").at(1).get<int>()};
  c.kernel = j.at("kernel").get<int>();
  c.pool = j.at("pool").get<int>();
  c.dense_units = {j.at("dense_units").at(0).get<int>(),
                   j.at("dense_units").at(1).get<int>()};
  for (int i = 0; i < 4; ++i) {
    c.dropout_rates[static_cast<size_t>(i)] = j.at("dropout_rates").at(i).get<double>();
  }
  c.leaky_alpha = j.at("leaky_alpha").get<double>();
  c.bn_epsilon = j.at("bn_epsilon").get<double>();
  c.bn_momentum = j.at("bn_momentum").get<double>();
  return c;
}

}  // namespace

void save_model(const Model& model, const std::filesystem::path& path) {
  auto& self = const_cast<Model&>(model);

  nlohmann::json header;
  header["version"] = kFormatVersion;
  header["config"] = config_to_json(model.config());
  header["class_names"] = model.class_names();
  header["init_seed"] = model.init_seed();
  header["training_meta"] = {
      {"epochs_trained", model.training_meta().epochs_trained},
      {"final_train_loss", model.training_meta().final_train_loss},
      {"final_val_loss", model.training_meta().final_val_loss},
      {"seed", model.training_meta().seed}};
  const std::string header_text = header.dump();

  std::string buffer;
  buffer.append(kMagic, sizeof(kMagic));
  const uint32_t header_len = static_cast<uint32_t>(header_text.size());
  buffer.append(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  buffer.append(header_text);

  std::vector<nn::ParamView> params = self.stack().params();
  std::vector<std::vector<double>*> blobs;
  for (auto view : params) blobs.push_back(view.value);
  for (auto* state : self.stack().state()) blobs.push_back(state);
  for (const auto* blob : blobs) {
    buffer.append(reinterpret_cast<const char*>(blob->data()),
                  blob->size() * sizeof(double));
  }

  const uint32_t crc = crc32({reinterpret_cast<const unsigned char*>(buffer.data()),
                              buffer.size()});
  buffer.append(reinterpret_cast<const char*>(&crc), sizeof(crc));

  write_text_file(path, buffer);
}

Model load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ArgumentError("cannot open model file: " + path.string());
  std::string buffer((std::istreambuf_iterator<char>(in)),
                     std::istreambuf_iterator<char>());

  if (buffer.size() < sizeof(kMagic) + sizeof(uint32_t) * 2) {
    throw DataError("truncated model file: " + path.string());
  }
  if (std::memcmp(buffer.data(), kMagic, sizeof(kMagic)) != 0) {
    throw VersionError("not an HDM1 model file: " + path.string());
  }

  const uint32_t stored_crc = [&] {
    uint32_t v = 0;
    std::memcpy(&v, buffer.data() + buffer.size() - sizeof(uint32_t), sizeof(v));
    return v;
  }();
  const uint32_t actual_crc =
      crc32({reinterpret_cast<const unsigned char*>(buffer.data()),
             buffer.size() - sizeof(uint32_t)});
  if (stored_crc != actual_crc) {
    throw ChecksumError("model checksum mismatch: " + path.string());
  }

  uint32_t header_len = 0;
  std::memcpy(&header_len, buffer.data() + sizeof(kMagic), sizeof(header_len));
  const size_t header_start = sizeof(kMagic) + sizeof(uint32_t);
  if (header_start + header_len + sizeof(uint32_t) > buffer.size()) {
    throw DataError("truncated model header: " + path.string());
  }

  nlohmann::json header;
  try {
    header = nlohmann::json::parse(buffer.substr(header_start, header_len));
  } catch (const nlohmann::json::parse_error& e) {
    throw DataError(std::string("model header: ") + e.what());
  }
  if (header.value("version", -1) != kFormatVersion) {
    throw VersionError("unsupported model version in " + path.string());
  }

  ModelConfig config = config_from_json(header.at("config"));
  std::vector<std::string> names =
      header.at("class_names").get<std::vector<std::string>>();
  Model model(config, std::move(names), header.value("init_seed", uint64_t{0}));
  const auto& meta = header.at("training_meta");
  // json encodes NaN losses (e.g. no validation split) as null
  const auto number_or_nan = [](const nlohmann::json& v) {
    return v.is_number() ? v.get<double>()
                         : std::numeric_limits<double>::quiet_NaN();
  };
  model.training_meta().epochs_trained = meta.at("epochs_trained").get<int>();
  model.training_meta().final_train_loss = number_or_nan(meta.at("final_train_loss"));
  model.training_meta().final_val_loss = number_or_nan(meta.at("final_val_loss"));
  model.training_meta().seed = meta.at("seed").get<uint64_t>();

  size_t offset = header_start + header_len;
  const size_t end = buffer.size() - sizeof(uint32_t);
  std::vector<std::vector<double>*> blobs;
  for (auto view : model.stack().params()) blobs.push_back(view.value);
  for (auto* state : model.stack().state()) blobs.push_back(state);
  for (auto* blob : blobs) {
    const size_t bytes = blob->size() * sizeof(double);
    if (offset + bytes > end) {
      throw DataError("truncated model parameters: " + path.string());
    }
    std::memcpy(blob->data(), buffer.data() + offset, bytes);
    offset += bytes;
  }
  if (offset != end) {
    throw DataError("trailing bytes in model file: " + path.string());
  }
  return model;
}

}  // namespace hydemic
