#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "jmvae/data.hpp"
#include "jmvae/models.hpp"
#include "jmvae/rng.hpp"

namespace jmvae {

enum class Target { marginal_x, marginal_w, conditional_x_given_w, joint_xw };
enum class EncoderPath { single_x, single_w, multiple };

std::string_view to_string(Target target);
std::string_view to_string(EncoderPath path);
/// "marginal-x", "marginal-w", "conditional" (or "conditional-x-given-w"), "joint".
Target parse_target(std::string_view name);
/// "single-x", "single-w", "multiple".
EncoderPath parse_path(std::string_view name);

struct BoundSpec {
  Target target = Target::marginal_x;
  EncoderPath path = EncoderPath::single_x;
  std::size_t k = 1;
  /// Prior samples behind the log p(w) estimate (conditional target only).
  std::size_t n_w = 5000;
};

/// Throws std::invalid_argument when the variant cannot form this bound:
/// vae has no w and no joint encoder, cvae only models x given w through
/// its joint encoder, and jmvae-zero forms single paths by zero-filling.
void validate(const BoundSpec& spec, Variant variant);

/// Importance-weighted bound log(1/k sum_i p(target, z_i) / q(z_i)) for one
/// datum (x and w are 1-row tensors; w may be null when unused). For the
/// conditional target `log_pw` (see log_p_w) is subtracted; CVAE models
/// p(x|w) directly and ignores it. All arithmetic in double.
double iw_bound(const Model<double>& model, const BoundSpec& spec, const Tensor<double>& x, const Tensor<double>* w,
                Engine& engine, double log_pw = 0.0);

/// log(1/N sum_i p(w | z_i)), z_i ~ N(0, I).
double log_p_w(const Model<double>& model, const Tensor<double>& w, std::size_t n_w, Engine& engine);

struct QuadratureGrid {
  std::size_t points_1d = 20001;
  std::size_t points_2d = 801;
  double limit = 10.0;
};

/// Trapezoid-rule log-likelihood over z in [-limit, limit]^d, d <= 2.
/// Conditional targets are log p(x, w) - log p(w) (CVAE: log p(x | w)).
double quadrature_oracle(const Model<double>& model, Target target, const Tensor<double>* x, const Tensor<double>* w,
                         const QuadratureGrid& grid = {});

struct ConvergenceRow {
  std::size_t k;
  double single;
  double multiple;
  double gap;
};

/// Single vs multiple bounds for each k, both paths driven by the same noise.
/// The single path is single-x for marginal-x and single-w otherwise.
std::vector<ConvergenceRow> bound_convergence_report(const Model<double>& model, Target target,
                                                     const Tensor<double>& x, const Tensor<double>& w,
                                                     std::span<const std::size_t> k_schedule, std::size_t n_w,
                                                     std::uint64_t seed);

struct BoundReport {
  std::vector<double> values;
  double mean = 0;
  double standard_error = 0;
  std::size_t k = 0;
  double seconds = 0;
};

/// Per-datum bounds over a dataset. Datum i draws from its own stream
/// (seed, i), log p(w) estimates are shared between identical labels, and
/// work is sharded over `threads` with results kept in dataset order.
/// Bernoulli images that are not already binary are binarised once with a
/// stream derived from `seed`.
BoundReport evaluate(const Model<double>& model, const BimodalDataset& data, const BoundSpec& spec,
                     std::uint64_t seed, unsigned threads = 1);

void write_bounds_csv(const std::filesystem::path& path, const BoundReport& report, const BoundSpec& spec);

/// Fixed binarisation used for evaluation inputs (identity on binary data).
Tensor<float> evaluation_images(const BimodalDataset& data, std::uint64_t seed);

/// Posterior means for every row, from the encoder selected by `path`.
Tensor<double> latent_means(const Model<double>& model, const BimodalDataset& data, EncoderPath path,
                            std::uint64_t seed = 0);

/// Mean distance between class centroids divided by the mean distance of
/// points to their own class centroid.
double centroid_separation(const Tensor<double>& latents, std::span<const std::uint32_t> labels);

struct GenerationOptions {
  std::size_t count = 1;
  /// Perturb the posterior mean: z = mean + zeta * sigma * eps.
  bool sample = false;
  double zeta = 1.0;
  std::uint64_t seed = 0;
};

/// Decoder mean of x for `count` latents. z comes from q(z|w) for a class
/// index (one-hot w), from q(z|x) for an image, or from the prior.
Tensor<double> generate_x_from_w(const Model<double>& model, std::size_t label, const GenerationOptions& options);
Tensor<double> generate_w_from_x(const Model<double>& model, const Tensor<double>& x, const GenerationOptions& options);
Tensor<double> generate_from_prior(const Model<double>& model, Modality modality, const GenerationOptions& options,
                                   const Tensor<double>* condition = nullptr);

/// Fraction of generated images whose nearest prototype is `label`.
double prototype_accuracy(const Tensor<double>& images, const Tensor<float>& prototypes, std::size_t label);

}  // namespace jmvae
