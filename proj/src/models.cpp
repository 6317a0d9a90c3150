#include "jmvae/models.hpp"

#include <stdexcept>
#include <utility>

#include "jmvae/rng.hpp"

namespace jmvae {

std::string_view to_string(Variant variant) {
  switch (variant) {
    case Variant::vae: return "vae";
    case Variant::cvae: return "cvae";
    case Variant::jmvae_zero: return "jmvae-zero";
    case Variant::jmvae_kl: return "jmvae-kl";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "vae") return Variant::vae;
  if (name == "cvae") return Variant::cvae;
  if (name == "jmvae-zero") return Variant::jmvae_zero;
  if (name == "jmvae-kl") return Variant::jmvae_kl;
  throw std::invalid_argument("unknown model variant '" + std::string(name) + "'");
}

void validate(const ModelConfig& config) {
  validate(config.x);
  validate(config.w);
  if (config.latent == 0) throw std::invalid_argument("model: latent dimension must be positive");
  if (!(config.alpha >= 0.0)) throw std::invalid_argument("model: alpha must be non-negative");
}

namespace {

EncoderConfig encoder_config(const ModelConfig& c, std::vector<std::size_t> inputs) {
  return {std::move(inputs), c.encoder_hidden, c.shared_top, c.latent, c.fusion, c.leaky_slope};
}

DecoderConfig decoder_config(const ModelConfig& c, std::size_t input, const ModalitySpec& modality) {
  return {input, c.decoder_hidden, modality, c.leaky_slope};
}

}  // namespace

template <typename T>
Model<T>::Model(const ModelConfig& config, std::uint64_t seed) : config_(config) {
  validate(config);
  Engine engine = make_engine(seed, Stream::init);
  const std::size_t dx = config.x.dimension, dw = config.w.dimension;
  switch (config.variant) {
    case Variant::vae:
      phi_x_.emplace("phi_x", encoder_config(config, {dx}), engine);
      break;
    case Variant::cvae:
      phi_.emplace("phi", encoder_config(config, {dx + dw}), engine);
      break;
    case Variant::jmvae_zero:
      phi_.emplace("phi", encoder_config(config, {dx, dw}), engine);
      break;
    case Variant::jmvae_kl:
      phi_.emplace("phi", encoder_config(config, {dx, dw}), engine);
      phi_x_.emplace("phi_x", encoder_config(config, {dx}), engine);
      phi_w_.emplace("phi_w", encoder_config(config, {dw}), engine);
      break;
  }
  const std::size_t decoder_input = config.latent + (config.variant == Variant::cvae ? dw : 0);
  theta_x_ = Decoder<T>("theta_x", decoder_config(config, decoder_input, config.x), engine);
  if (config.variant == Variant::jmvae_zero || config.variant == Variant::jmvae_kl) {
    theta_w_.emplace("theta_w", decoder_config(config, config.latent, config.w), engine);
  }
}

template <typename T>
void Model<T>::set_alpha(double alpha) {
  if (!(alpha >= 0.0)) throw std::invalid_argument("model: alpha must be non-negative");
  config_.alpha = alpha;
}

template <typename T>
std::vector<std::string> Model<T>::group_names() const {
  std::vector<std::string> names{"theta_x"};
  if (theta_w_) names.emplace_back("theta_w");
  if (phi_) names.emplace_back("phi");
  if (phi_x_) names.emplace_back("phi_x");
  if (phi_w_) names.emplace_back("phi_w");
  return names;
}

template <typename T>
std::vector<const Parameter<T>*> Model<T>::group(std::string_view name) const {
  if (name == "theta_x") return theta_x_.parameters();
  if (name == "theta_w" && theta_w_) return theta_w_->parameters();
  if (name == "phi" && phi_) return phi_->parameters();
  if (name == "phi_x" && phi_x_) return phi_x_->parameters();
  if (name == "phi_w" && phi_w_) return phi_w_->parameters();
  throw std::invalid_argument("model " + std::string(to_string(variant())) + " has no parameter group '" +
                              std::string(name) + "'");
}

template <typename T>
std::vector<const Parameter<T>*> Model<T>::parameters() const {
  std::vector<const Parameter<T>*> out;
  for (const auto& name : group_names()) {
    auto g = group(name);
    out.insert(out.end(), g.begin(), g.end());
  }
  return out;
}

template <typename T>
std::vector<Parameter<T>*> Model<T>::parameters() {
  std::vector<Parameter<T>*> out;
  for (const Parameter<T>* p : std::as_const(*this).parameters()) out.push_back(const_cast<Parameter<T>*>(p));
  return out;
}

template <typename T>
std::size_t Model<T>::parameter_count() const {
  std::size_t total = 0;
  for (const Parameter<T>* p : parameters()) total += p->value.size();
  return total;
}

// ---------------------------------------------------------------------------

namespace {

template <typename T>
void require_variant(const char* op, const Model<T>& model, std::initializer_list<Variant> allowed) {
  for (Variant v : allowed) {
    if (model.variant() == v) return;
  }
  throw std::invalid_argument(std::string(op) + ": not defined for variant " + std::string(to_string(model.variant())));
}

template <typename T>
void require_batch(const char* op, const Model<T>& model, const Tensor<T>& x, const Tensor<T>* w,
                   const Tensor<T>& noise) {
  if (x.cols() != model.config().x.dimension) {
    throw ShapeError(op, "x has " + std::to_string(x.cols()) + " columns, model expects " +
                             std::to_string(model.config().x.dimension));
  }
  if (w) {
    if (w->rows() != x.rows()) throw ShapeError(op, "batch size mismatch between modalities: " + to_string(x.shape()) +
                                                        " vs " + to_string(w->shape()));
    if (w->cols() != model.config().w.dimension) {
      throw ShapeError(op, "w has " + std::to_string(w->cols()) + " columns, model expects " +
                               std::to_string(model.config().w.dimension));
    }
  }
  if (noise.rows() != x.rows() || noise.cols() != model.config().latent) {
    throw ShapeError(op, x.shape(), noise.shape());
  }
}

template <typename T>
double column_mean(Var<T> v) {
  return static_cast<double>(v.value().array().mean());
}

template <typename T>
Objective<T> finish(Var<T> per_datum, LossBreakdown parts) {
  Var<T> value = mean(per_datum);
  parts.total = static_cast<double>(value.value().item());
  return {value, per_datum, parts};
}

}  // namespace

template <typename T>
Objective<T> elbo_vae(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& noise,
                      const ObjectiveOptions<T>& options) {
  require_variant("elbo_vae", model, {Variant::vae});
  require_batch<T>("elbo_vae", model, x, nullptr, noise);
  Var<T> xin = tape.constant(options.x_input ? *options.x_input : x);
  DiagGaussian<T> q = model.x_encoder()->forward(tape, std::span<const Var<T>>(&xin, 1));
  Var<T> z = rsample(q, tape.constant(noise));
  Var<T> kl = kl_to_standard_normal(q);
  Var<T> rx = log_likelihood(model.x_decoder().forward(tape, z), x);
  LossBreakdown parts;
  parts.beta = options.beta;
  parts.kl_prior = column_mean(kl);
  parts.recon_x = column_mean(rx);
  return finish(rx - scale(kl, static_cast<T>(options.beta)), parts);
}

namespace {

template <typename T>
struct JointPass {
  DiagGaussian<T> q;
  Var<T> per_datum;
  LossBreakdown parts;
};

template <typename T>
JointPass<T> joint_pass(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                        const Tensor<T>& noise, const ObjectiveOptions<T>& options) {
  const Var<T> inputs[2] = {tape.constant(options.x_input ? *options.x_input : x),
                            tape.constant(options.w_input ? *options.w_input : w)};
  DiagGaussian<T> q = model.joint_encoder()->forward(tape, inputs);
  Var<T> z = rsample(q, tape.constant(noise));
  Var<T> kl = kl_to_standard_normal(q);
  Var<T> rx = log_likelihood(model.x_decoder().forward(tape, z), x);
  Var<T> rw = log_likelihood(model.w_decoder()->forward(tape, z), w);
  LossBreakdown parts;
  parts.beta = options.beta;
  parts.kl_prior = column_mean(kl);
  parts.recon_x = column_mean(rx);
  parts.recon_w = column_mean(rw);
  return {q, rx + rw - scale(kl, static_cast<T>(options.beta)), parts};
}

}  // namespace

template <typename T>
Objective<T> elbo_jm(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                     const Tensor<T>& noise, const ObjectiveOptions<T>& options) {
  require_variant("elbo_jm", model, {Variant::jmvae_zero, Variant::jmvae_kl});
  require_batch("elbo_jm", model, x, &w, noise);
  JointPass<T> pass = joint_pass(tape, model, x, w, noise, options);
  return finish(pass.per_datum, pass.parts);
}

template <typename T>
Objective<T> objective_jmkl(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                            const Tensor<T>& noise, const ObjectiveOptions<T>& options) {
  require_variant("objective_jmkl", model, {Variant::jmvae_kl});
  require_batch("objective_jmkl", model, x, &w, noise);
  JointPass<T> pass = joint_pass(tape, model, x, w, noise, options);
  Var<T> xin = tape.constant(options.x_input ? *options.x_input : x);
  Var<T> win = tape.constant(options.w_input ? *options.w_input : w);
  DiagGaussian<T> qx = model.x_encoder()->forward(tape, std::span<const Var<T>>(&xin, 1));
  DiagGaussian<T> qw = model.w_encoder()->forward(tape, std::span<const Var<T>>(&win, 1));
  Var<T> kl_sx = kl_between(pass.q, qx);
  Var<T> kl_sw = kl_between(pass.q, qw);
  pass.parts.kl_single_x = column_mean(kl_sx);
  pass.parts.kl_single_w = column_mean(kl_sw);
  Var<T> per = pass.per_datum - scale(kl_sx + kl_sw, static_cast<T>(model.alpha()));
  return finish(per, pass.parts);
}

template <typename T>
Objective<T> elbo_cvae(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& noise, const ObjectiveOptions<T>& options) {
  require_variant("elbo_cvae", model, {Variant::cvae});
  require_batch("elbo_cvae", model, x, &w, noise);
  Var<T> wc = tape.constant(w);
  Var<T> input = concat_cols(tape.constant(options.x_input ? *options.x_input : x),
                             options.w_input ? tape.constant(*options.w_input) : wc);
  DiagGaussian<T> q = model.joint_encoder()->forward(tape, std::span<const Var<T>>(&input, 1));
  Var<T> z = rsample(q, tape.constant(noise));
  Var<T> kl = kl_to_standard_normal(q);
  Var<T> rx = log_likelihood(model.x_decoder().forward(tape, concat_cols(z, wc)), x);
  LossBreakdown parts;
  parts.beta = options.beta;
  parts.kl_prior = column_mean(kl);
  parts.recon_x = column_mean(rx);
  return finish(rx - scale(kl, static_cast<T>(options.beta)), parts);
}

template <typename T>
Objective<T> objective(Tape<T>& tape, const Model<T>& model, const Tensor<T>& x, const Tensor<T>& w,
                       const Tensor<T>& noise, const ObjectiveOptions<T>& options) {
  switch (model.variant()) {
    case Variant::vae: return elbo_vae(tape, model, x, noise, options);
    case Variant::cvae: return elbo_cvae(tape, model, x, w, noise, options);
    case Variant::jmvae_zero: return elbo_jm(tape, model, x, w, noise, options);
    case Variant::jmvae_kl: return objective_jmkl(tape, model, x, w, noise, options);
  }
  throw std::logic_error("unreachable");
}

template <typename T>
DiagGaussian<T> encode(Tape<T>& tape, const Model<T>& model, const Tensor<T>* x, const Tensor<T>* w) {
  if (!x && !w) throw std::invalid_argument("encode: at least one modality is required");
  const ModelConfig& c = model.config();
  auto single = [&](const Encoder<T>& encoder, const Tensor<T>& input) {
    Var<T> v = tape.constant(input);
    return encoder.forward(tape, std::span<const Var<T>>(&v, 1));
  };
  switch (model.variant()) {
    case Variant::vae:
      if (!x) throw std::invalid_argument("encode: vae has no encoder for w alone");
      return single(*model.x_encoder(), *x);
    case Variant::cvae: {
      if (!x || !w) throw std::invalid_argument("encode: cvae needs both x and w");
      Var<T> input = concat_cols(tape.constant(*x), tape.constant(*w));
      return model.joint_encoder()->forward(tape, std::span<const Var<T>>(&input, 1));
    }
    case Variant::jmvae_zero: {
      const std::size_t rows = x ? x->rows() : w->rows();
      const Var<T> inputs[2] = {tape.constant(x ? *x : zero_fill_input<T>(c.x, rows)),
                                tape.constant(w ? *w : zero_fill_input<T>(c.w, rows))};
      return model.joint_encoder()->forward(tape, inputs);
    }
    case Variant::jmvae_kl: {
      if (x && w) {
        const Var<T> inputs[2] = {tape.constant(*x), tape.constant(*w)};
        return model.joint_encoder()->forward(tape, inputs);
      }
      return x ? single(*model.x_encoder(), *x) : single(*model.w_encoder(), *w);
    }
  }
  throw std::logic_error("unreachable");
}

template <typename T>
LikelihoodParams<T> generate(Tape<T>& tape, const Model<T>& model, Var<T> z, Modality modality,
                             const Tensor<T>* condition) {
  if (z.value().cols() != model.config().latent) {
    throw ShapeError("generate", "z has " + std::to_string(z.value().cols()) + " columns, latent dimension is " +
                                     std::to_string(model.config().latent));
  }
  if (modality == Modality::w) {
    if (!model.w_decoder()) {
      throw std::invalid_argument("generate: variant " + std::string(to_string(model.variant())) + " has no w decoder");
    }
    return model.w_decoder()->forward(tape, z);
  }
  if (model.variant() != Variant::cvae) return model.x_decoder().forward(tape, z);
  if (!condition) throw std::invalid_argument("generate: cvae needs the conditioning w");
  const std::size_t rows = z.value().rows();
  Tensor<T> cond = condition->rows() == rows ? *condition : repeat_rows(condition->row(0), rows);
  return model.x_decoder().forward(tape, concat_cols(z, tape.constant(std::move(cond))));
}

#define JMVAE_INSTANTIATE_MODELS(T)                                                                              \
  template class Model<T>;                                                                                       \
  template Objective<T> elbo_vae<T>(Tape<T>&, const Model<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                    const ObjectiveOptions<T>&);                                                 \
  template Objective<T> elbo_jm<T>(Tape<T>&, const Model<T>&, const Tensor<T>&, const Tensor<T>&,               \
                                   const Tensor<T>&, const ObjectiveOptions<T>&);                                \
  template Objective<T> objective_jmkl<T>(Tape<T>&, const Model<T>&, const Tensor<T>&, const Tensor<T>&,        \
                                          const Tensor<T>&, const ObjectiveOptions<T>&);                         \
  template Objective<T> elbo_cvae<T>(Tape<T>&, const Model<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                     const Tensor<T>&, const ObjectiveOptions<T>&);                              \
  template Objective<T> objective<T>(Tape<T>&, const Model<T>&, const Tensor<T>&, const Tensor<T>&,             \
                                     const Tensor<T>&, const ObjectiveOptions<T>&);                              \
  template DiagGaussian<T> encode<T>(Tape<T>&, const Model<T>&, const Tensor<T>*, const Tensor<T>*);            \
  template LikelihoodParams<T> generate<T>(Tape<T>&, const Model<T>&, Var<T>, Modality, const Tensor<T>*);

JMVAE_INSTANTIATE_MODELS(float)
JMVAE_INSTANTIATE_MODELS(double)

#undef JMVAE_INSTANTIATE_MODELS

}  // namespace jmvae
