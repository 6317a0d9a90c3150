#include "jmvae/networks.hpp"

#include <cmath>
#include <stdexcept>

namespace jmvae {

void validate(const ModalitySpec& spec) {
  if (spec.dimension == 0) throw std::invalid_argument("modality '" + spec.name + "': dimension must be positive");
  if (!spec.input_shape.empty() && element_count(spec.input_shape) != spec.dimension) {
    throw std::invalid_argument("modality '" + spec.name + "': input shape " + to_string(spec.input_shape) +
                                " does not hold " + std::to_string(spec.dimension) + " values");
  }
}

// ---------------------------------------------------------------------------

template <typename T>
Linear<T>::Linear(std::string name, std::size_t in, std::size_t out, Engine& engine) {
  const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
  std::uniform_real_distribution<double> uniform(-limit, limit);
  weight_ = {name + ".weight", Tensor<T>(Shape{in, out})};
  for (auto& v : weight_.value.values()) v = static_cast<T>(uniform(engine));
  bias_ = {name + ".bias", Tensor<T>(Shape{1, out})};
}

template <typename T>
Var<T> Linear<T>::forward(Tape<T>& tape, Var<T> x) const {
  return matmul(x, tape.parameter(weight_)) + tape.parameter(bias_);
}

// ---------------------------------------------------------------------------

void validate(const MlpConfig& config) {
  if (config.input == 0 || config.output == 0) throw std::invalid_argument("mlp: input and output widths must be positive");
  if (config.hidden.empty()) throw std::invalid_argument("mlp: at least one hidden layer is required");
  for (std::size_t w : config.hidden) {
    if (w == 0) throw std::invalid_argument("mlp: hidden widths must be positive");
  }
  if (!(config.leaky_slope >= 0.0)) throw std::invalid_argument("mlp: leaky slope must be non-negative");
}

std::size_t parameter_count(const MlpConfig& config) {
  std::size_t total = 0, in = config.input;
  for (std::size_t w : config.hidden) {
    total += in * w + w;
    in = w;
  }
  return total + in * config.output + config.output;
}

template <typename T>
Mlp<T>::Mlp(const std::string& name, const MlpConfig& config, Engine& engine) : config_(config) {
  validate(config);
  std::size_t in = config.input;
  for (std::size_t i = 0; i < config.hidden.size(); ++i) {
    layers_.emplace_back(name + ".layer" + std::to_string(i), in, config.hidden[i], engine);
    in = config.hidden[i];
  }
  layers_.emplace_back(name + ".out", in, config.output, engine);
}

template <typename T>
Var<T> Mlp<T>::forward(Tape<T>& tape, Var<T> x) const {
  if (x.value().cols() != config_.input) {
    throw ShapeError("mlp", "expected " + std::to_string(config_.input) + " input columns, got shape " +
                                to_string(x.shape()));
  }
  const T slope = static_cast<T>(config_.leaky_slope);
  Var<T> h = x;
  for (std::size_t i = 0; i + 1 < layers_.size(); ++i) h = leaky_relu(layers_[i].forward(tape, h), slope);
  return layers_.back().forward(tape, h);
}

// ---------------------------------------------------------------------------

void validate(const EncoderConfig& config) {
  if (config.branch_inputs.empty() || config.branch_inputs.size() > 2) {
    throw std::invalid_argument("encoder: one or two input branches are supported");
  }
  if (config.shared_top == 0 || config.latent == 0) {
    throw std::invalid_argument("encoder: shared top and latent widths must be positive");
  }
  for (std::size_t in : config.branch_inputs) validate(MlpConfig{in, config.hidden, config.shared_top, config.leaky_slope});
}

std::string_view to_string(Fusion fusion) { return fusion == Fusion::sum ? "sum" : "concat"; }

Fusion parse_fusion(std::string_view name) {
  if (name == "sum") return Fusion::sum;
  if (name == "concat") return Fusion::concat;
  throw std::invalid_argument("unknown fusion '" + std::string(name) + "'");
}

namespace {

std::size_t fused_width(const EncoderConfig& config) {
  return config.fusion == Fusion::sum ? config.shared_top : config.shared_top * config.branch_inputs.size();
}

}  // namespace

std::size_t parameter_count(const EncoderConfig& config) {
  std::size_t total = 0;
  for (std::size_t in : config.branch_inputs) total += parameter_count(MlpConfig{in, config.hidden, config.shared_top});
  const std::size_t fused = fused_width(config);
  return total + 2 * (fused * config.latent + config.latent);
}

template <typename T>
Encoder<T>::Encoder(const std::string& name, const EncoderConfig& config, Engine& engine) : config_(config) {
  validate(config);
  for (std::size_t b = 0; b < config.branch_inputs.size(); ++b) {
    branches_.emplace_back(name + ".branch" + std::to_string(b),
                           MlpConfig{config.branch_inputs[b], config.hidden, config.shared_top, config.leaky_slope},
                           engine);
  }
  mean_head_ = Linear<T>(name + ".mean", fused_width(config), config.latent, engine);
  log_var_head_ = Linear<T>(name + ".log_var", fused_width(config), config.latent, engine);
}

template <typename T>
DiagGaussian<T> Encoder<T>::forward(Tape<T>& tape, std::span<const Var<T>> inputs) const {
  if (inputs.size() != branches_.size()) {
    throw ShapeError("encoder", "expected " + std::to_string(branches_.size()) + " inputs, got " +
                                    std::to_string(inputs.size()));
  }
  Var<T> fused = branches_[0].forward(tape, inputs[0]);
  for (std::size_t b = 1; b < branches_.size(); ++b) {
    Var<T> h = branches_[b].forward(tape, inputs[b]);
    fused = config_.fusion == Fusion::sum ? fused + h : concat_cols(fused, h);
  }
  Var<T> top = leaky_relu(fused, static_cast<T>(config_.leaky_slope));
  return {mean_head_.forward(tape, top), log_var_head_.forward(tape, top)};
}

template <typename T>
std::vector<Parameter<T>*> Encoder<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& branch : branches_) {
    for (auto& layer : branch.layers()) {
      out.push_back(&layer.weight());
      out.push_back(&layer.bias());
    }
  }
  for (Linear<T>* head : {&mean_head_, &log_var_head_}) {
    out.push_back(&head->weight());
    out.push_back(&head->bias());
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Encoder<T>::parameters() const {
  auto mutable_params = const_cast<Encoder*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

// ---------------------------------------------------------------------------

void validate(const DecoderConfig& config) {
  validate(config.modality);
  validate(MlpConfig{config.input, config.hidden, config.modality.dimension, config.leaky_slope});
}

std::size_t parameter_count(const DecoderConfig& config) {
  return parameter_count(MlpConfig{config.input, config.hidden, config.modality.dimension});
}

template <typename T>
Decoder<T>::Decoder(const std::string& name, const DecoderConfig& config, Engine& engine) : config_(config) {
  validate(config);
  net_ = Mlp<T>(name, MlpConfig{config.input, config.hidden, config.modality.dimension, config.leaky_slope}, engine);
}

template <typename T>
LikelihoodParams<T> Decoder<T>::forward(Tape<T>& tape, Var<T> z) const {
  return {config_.modality.family, net_.forward(tape, z)};
}

template <typename T>
std::vector<Parameter<T>*> Decoder<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (auto& layer : net_.layers()) {
    out.push_back(&layer.weight());
    out.push_back(&layer.bias());
  }
  return out;
}

template <typename T>
std::vector<const Parameter<T>*> Decoder<T>::parameters() const {
  auto mutable_params = const_cast<Decoder*>(this)->parameters();
  return {mutable_params.begin(), mutable_params.end()};
}

template class Linear<float>;
template class Linear<double>;
template class Mlp<float>;
template class Mlp<double>;
template class Encoder<float>;
template class Encoder<double>;
template class Decoder<float>;
template class Decoder<double>;

}  // namespace jmvae
