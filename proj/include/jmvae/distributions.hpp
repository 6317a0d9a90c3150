#pragma once

#include <string>
#include <string_view>

#include "jmvae/autodiff.hpp"

namespace jmvae {

/// Likelihood family of a modality. Decoders always emit unconstrained
/// parameters: logits for the discrete families, means for the Gaussian.
enum class Family { bernoulli, categorical, gaussian_unit };

std::string_view to_string(Family family);
/// Throws std::invalid_argument on an unknown name.
Family parse_family(std::string_view name);

/// Diagonal Gaussian N(mean, diag(exp(log_var))), one distribution per row.
template <typename T>
struct DiagGaussian {
  Var<T> mean;
  Var<T> log_var;

  DiagGaussian(Var<T> mean_, Var<T> log_var_);

  std::size_t rows() const { return mean.value().rows(); }
  std::size_t dim() const { return mean.value().cols(); }
};

template <typename T>
struct LikelihoodParams {
  Family family;
  Var<T> params;
};

/// z = mean + exp(log_var / 2) * noise. `noise` may have more rows than `q`
/// when q is a single row (k samples from one distribution).
template <typename T>
Var<T> rsample(const DiagGaussian<T>& q, Var<T> noise);

/// KL(q || N(0, I)) per row, rows x 1.
template <typename T>
Var<T> kl_to_standard_normal(const DiagGaussian<T>& q);

/// KL(q1 || q2) per row, rows x 1.
template <typename T>
Var<T> kl_between(const DiagGaussian<T>& q1, const DiagGaussian<T>& q2);

/// log N(z; q) summed over dimensions, one value per row of z.
template <typename T>
Var<T> log_density(const DiagGaussian<T>& q, Var<T> z);

/// log N(z; 0, I) per row.
template <typename T>
Var<T> standard_normal_log_density(Var<T> z);

/// log p(observation | params) per row, computed in log space.
///
/// Bernoulli: observations must be 0 or 1. Under 32-bit precision logits are
/// clamped to +-16.118, i.e. probabilities to [1e-7, 1 - 1e-7].
/// Categorical: each observation row must be one-hot.
/// Gaussian: unit variance, -1/2 |x - mean|^2 - D/2 log(2 pi).
/// Out-of-support observations throw DomainError.
template <typename T>
Var<T> log_likelihood(const LikelihoodParams<T>& params, const Tensor<T>& observation);

/// Mean of the observation distribution (probabilities or Gaussian means).
template <typename T>
Tensor<T> observation_mean(const LikelihoodParams<T>& params);

}  // namespace jmvae
