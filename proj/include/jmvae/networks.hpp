#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jmvae/autodiff.hpp"
#include "jmvae/distributions.hpp"
#include "jmvae/modality.hpp"
#include "jmvae/rng.hpp"

namespace jmvae {

/// Fully connected layer y = x W + b with W stored input x output.
template <typename T>
class Linear {
 public:
  Linear() = default;
  /// Glorot-uniform weights, zero bias.
  Linear(std::string name, std::size_t in, std::size_t out, Engine& engine);

  Var<T> forward(Tape<T>& tape, Var<T> x) const;

  std::size_t in() const { return weight_.value.rows(); }
  std::size_t out() const { return weight_.value.cols(); }

  Parameter<T>& weight() { return weight_; }
  Parameter<T>& bias() { return bias_; }
  const Parameter<T>& weight() const { return weight_; }
  const Parameter<T>& bias() const { return bias_; }

 private:
  Parameter<T> weight_;
  Parameter<T> bias_;
};

/// Stack of dense layers: leaky-rectified hidden layers, linear output.
struct MlpConfig {
  std::size_t input = 0;
  std::vector<std::size_t> hidden;
  std::size_t output = 0;
  double leaky_slope = 0.01;
};

void validate(const MlpConfig& config);
/// Closed-form weight + bias count.
std::size_t parameter_count(const MlpConfig& config);

template <typename T>
class Mlp {
 public:
  Mlp() = default;
  Mlp(const std::string& name, const MlpConfig& config, Engine& engine);

  Var<T> forward(Tape<T>& tape, Var<T> x) const;

  const MlpConfig& config() const { return config_; }
  std::vector<Linear<T>>& layers() { return layers_; }
  const std::vector<Linear<T>>& layers() const { return layers_; }

 private:
  MlpConfig config_;
  std::vector<Linear<T>> layers_;
};

enum class Fusion { sum, concat };

std::string_view to_string(Fusion fusion);
Fusion parse_fusion(std::string_view name);

/// Encoder with one or two input branches meeting at a shared top layer.
/// Each branch is an MLP ending (linearly) at `shared_top` units; branch
/// outputs are fused, leaky-rectified, and mapped to mean / log-variance.
struct EncoderConfig {
  std::vector<std::size_t> branch_inputs;
  std::vector<std::size_t> hidden;
  std::size_t shared_top = 0;
  std::size_t latent = 0;
  Fusion fusion = Fusion::sum;
  double leaky_slope = 0.01;
};

void validate(const EncoderConfig& config);
std::size_t parameter_count(const EncoderConfig& config);

template <typename T>
class Encoder {
 public:
  Encoder() = default;
  Encoder(const std::string& name, const EncoderConfig& config, Engine& engine);

  /// One input per branch, in branch order. Missing modalities are passed
  /// as zero-filled inputs by the caller.
  DiagGaussian<T> forward(Tape<T>& tape, std::span<const Var<T>> inputs) const;

  const EncoderConfig& config() const { return config_; }
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

 private:
  EncoderConfig config_;
  std::vector<Mlp<T>> branches_;
  Linear<T> mean_head_;
  Linear<T> log_var_head_;
};

struct DecoderConfig {
  std::size_t input = 0;  // latent dimension, plus conditioning width for CVAE
  std::vector<std::size_t> hidden;
  ModalitySpec modality;
  double leaky_slope = 0.01;
};

void validate(const DecoderConfig& config);
std::size_t parameter_count(const DecoderConfig& config);

template <typename T>
class Decoder {
 public:
  Decoder() = default;
  Decoder(const std::string& name, const DecoderConfig& config, Engine& engine);

  LikelihoodParams<T> forward(Tape<T>& tape, Var<T> z) const;

  const DecoderConfig& config() const { return config_; }
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;

 private:
  DecoderConfig config_;
  Mlp<T> net_;
};

}  // namespace jmvae
