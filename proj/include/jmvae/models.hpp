#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "jmvae/autodiff.hpp"
#include "jmvae/distributions.hpp"
#include "jmvae/modality.hpp"
#include "jmvae/networks.hpp"

namespace jmvae {

enum class Variant { vae, cvae, jmvae_zero, jmvae_kl };

std::string_view to_string(Variant variant);
/// Accepts "vae", "cvae", "jmvae-zero", "jmvae-kl".
Variant parse_variant(std::string_view name);

enum class Modality { x, w };

struct ModelConfig {
  Variant variant = Variant::jmvae_kl;
  ModalitySpec x{"x", 784, Family::bernoulli, {28, 28}};
  ModalitySpec w{"w", 10, Family::categorical, {10}};
  std::vector<std::size_t> encoder_hidden{512, 512};
  std::size_t shared_top = 64;
  std::size_t latent = 64;
  std::vector<std::size_t> decoder_hidden{512, 512, 512};
  /// Weight of the two single-encoder KL terms (jmvae-kl only).
  double alpha = 0.01;
  double leaky_slope = 0.01;
  Fusion fusion = Fusion::sum;

  bool operator==(const ModelConfig&) const = default;
};

void validate(const ModelConfig& config);

/// A model variant and its parameter groups:
///   vae         theta_x, phi_x
///   cvae        theta_x (decoder sees [z, w]), phi (encoder sees [x, w])
///   jmvae-zero  theta_x, theta_w, phi
///   jmvae-kl    theta_x, theta_w, phi, phi_x, phi_w
///
/// Forward passes hold pointers into the model's parameters, so a model must
/// stay put while a tape that used it is alive.
template <typename T>
class Model {
 public:
  Model(const ModelConfig& config, std::uint64_t seed);

  const ModelConfig& config() const noexcept { return config_; }
  Variant variant() const noexcept { return config_.variant; }
  double alpha() const noexcept { return config_.alpha; }
  void set_alpha(double alpha);

  /// Group names present in this variant, in serialisation order.
  std::vector<std::string> group_names() const;
  std::vector<const Parameter<T>*> group(std::string_view name) const;
  std::vector<Parameter<T>*> parameters();
  std::vector<const Parameter<T>*> parameters() const;
  std::size_t parameter_count() const;

  const Encoder<T>* joint_encoder() const { return phi_ ? &*phi_ : nullptr; }
  const Encoder<T>* x_encoder() const { return phi_x_ ? &*phi_x_ : nullptr; }
  const Encoder<T>* w_encoder() const { return phi_w_ ? &*phi_w_ : nullptr; }
  const Decoder<T>& x_decoder() const { return theta_x_; }
  const Decoder<T>* w_decoder() const { return theta_w_ ? &*theta_w_ : nullptr; }

 private:
  ModelConfig config_;
  std::optional<Encoder<T>> phi_;
  std::optional<Encoder<T>> phi_x_;
  std::optional<Encoder<T>> phi_w_;
  Decoder<T> theta_x_;
  std::optional<Decoder<T>> theta_w_;
};

/// Copy of `model` with every parameter converted to U.
template <typename U, typename T>
Model<U> model_cast(const Model<T>& model) {
  Model<U> out(model.config(), 0);
  auto dst = out.parameters();
  auto src = model.parameters();
  for (std::size_t i = 0; i < src.size(); ++i) dst[i]->value = src[i]->value.template cast<U>();
  return out;
}

/// Batch means of each term of an objective. `total` is the objective value
/// (higher is better):
///   vae/cvae    total = recon_x - beta * kl_prior
///   jmvae-zero  total = recon_x + recon_w - beta * kl_prior
///   jmvae-kl    total = recon_x + recon_w - beta * kl_prior - alpha * (kl_sx + kl_sw)
struct LossBreakdown {
  double total = 0;
  double kl_prior = 0;
  double recon_x = 0;
  double recon_w = 0;
  double kl_single_x = 0;
  double kl_single_w = 0;
  double beta = 1;
};

template <typename T>
struct Objective {
  Var<T> value;    // scalar batch mean, differentiable
  Var<T> per_datum;  // rows x 1
  LossBreakdown parts;
};

template <typename T>
struct ObjectiveOptions {
  /// Warm-up coefficient on the prior KL term.
  double beta = 1.0;
  /// Encoder inputs when they differ from the reconstruction targets
  /// (training-time modality dropout). Null means "same as the target".
  const Tensor<T>* x_input = nullptr;
  const Tensor<T>* w_input = nullptr;
};

/// Single-sample SGVB objectives; `noise` is standard normal, batch x latent.
template <typename T>
Objective<T> elbo_vae(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& noise,
                      const ObjectiveOptions<T>& options = {});
template <typename T>
Objective<T> elbo_jm(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& noise, const ObjectiveOptions<T>& options = {});
template <typename T>
Objective<T> objective_jmkl(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                            const Tensor<T>& noise, const ObjectiveOptions<T>& options = {});
template <typename T>
Objective<T> elbo_cvae(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& noise, const ObjectiveOptions<T>& options = {});

/// The training objective of the model's variant.
template <typename T>
Objective<T> objective(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& noise, const ObjectiveOptions<T>& options = {});

/// Approximate posterior from whichever modalities are present (null = missing).
///   both present    q_phi(z|x,w)  (vae: q(z|x))
///   one present     jmvae-zero: q_phi with the other input zero-filled;
///                   jmvae-kl / vae: the single-modality encoder
template <typename T>
DiagGaussian<T> encode(Tape<T>& tape, const Model<T>& model, const Tensor<T>* x, const Tensor<T>* w);

/// Decoder output for `modality` at latent `z`. CVAE's x decoder needs the
/// conditioning label in `condition`.
template <typename T>
LikelihoodParams<T> generate(Tape<T>& tape, const Model<T>& model, Var<T> z, Modality modality,
                             const Tensor<T>* condition = nullptr);

}  // namespace jmvae
