#include "jmvae/distributions.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace jmvae {

std::string_view to_string(Family family) {
  switch (family) {
    case Family::bernoulli: return "bernoulli";
    case Family::categorical: return "categorical";
    case Family::gaussian_unit: return "gaussian";
  }
  return "?";
}

Family parse_family(std::string_view name) {
  if (name == "bernoulli") return Family::bernoulli;
  if (name == "categorical") return Family::categorical;
  if (name == "gaussian") return Family::gaussian_unit;
  throw std::invalid_argument("unknown likelihood family '" + std::string(name) + "'");
}

template <typename T>
DiagGaussian<T>::DiagGaussian(Var<T> mean_, Var<T> log_var_) : mean(mean_), log_var(log_var_) {
  if (mean.shape() != log_var.shape()) throw ShapeError("DiagGaussian", mean.shape(), log_var.shape());
}

template <typename T>
Var<T> rsample(const DiagGaussian<T>& q, Var<T> noise) {
  if (noise.value().cols() != q.dim() || (q.rows() != 1 && noise.value().rows() != q.rows())) {
    throw ShapeError("rsample", q.mean.shape(), noise.shape());
  }
  return q.mean + exp(scale(q.log_var, T(0.5))) * noise;
}

template <typename T>
Var<T> kl_to_standard_normal(const DiagGaussian<T>& q) {
  auto terms = add_scalar(exp(q.log_var) + square(q.mean) - q.log_var, T(-1));
  return scale(sum_rows(terms), T(0.5));
}

template <typename T>
Var<T> kl_between(const DiagGaussian<T>& q1, const DiagGaussian<T>& q2) {
  if (q1.dim() != q2.dim() || q1.rows() != q2.rows()) throw ShapeError("kl_between", q1.mean.shape(), q2.mean.shape());
  auto ratio = (exp(q1.log_var) + square(q1.mean - q2.mean)) * exp(neg(q2.log_var));
  auto terms = add_scalar(q2.log_var - q1.log_var + ratio, T(-1));
  return scale(sum_rows(terms), T(0.5));
}

template <typename T>
Var<T> log_density(const DiagGaussian<T>& q, Var<T> z) {
  const T log_two_pi = static_cast<T>(std::log(2.0 * std::numbers::pi));
  auto mahalanobis = square(z - q.mean) * exp(neg(q.log_var));
  auto terms = add_scalar(q.log_var + mahalanobis, log_two_pi);
  return scale(sum_rows(terms), T(-0.5));
}

template <typename T>
Var<T> standard_normal_log_density(Var<T> z) {
  const T log_two_pi = static_cast<T>(std::log(2.0 * std::numbers::pi));
  return scale(sum_rows(add_scalar(square(z), log_two_pi)), T(-0.5));
}

namespace {

// Logit bound matching probabilities in [1e-7, 1 - 1e-7].
constexpr double kFloatLogitLimit = 16.118095651;

template <typename T>
Var<T> bernoulli_log_prob(Var<T> logits, const Tensor<T>& x) {
  const Tensor<T>& l = logits.value();
  const std::size_t rows = l.rows(), cols = l.cols();
  Tensor<T> out(Shape{rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      T v = l[r * cols + c];
      if constexpr (std::is_same_v<T, float>) v = std::clamp(v, T(-kFloatLogitLimit), T(kFloatLogitLimit));
      // x*v - softplus(v)
      total += x[r * cols + c] * v - (std::max(v, T(0)) + std::log1p(std::exp(-std::abs(v))));
    }
    out[r] = total;
  }
  return logits.tape().record("bernoulli_log_prob", std::move(out), {logits}, [x](Tape<T>& tape, NodeId self) {
    const NodeId il = tape.parent(self, 0);
    if (!tape.requires_grad(il)) return;
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& l = tape.value(il);
    Tensor<T>& gl = tape.grad_buffer(il);
    const std::size_t cols = l.cols();
    for (std::size_t r = 0; r < l.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) {
        const T v = l[r * cols + c];
        if constexpr (std::is_same_v<T, float>) {
          if (std::abs(v) > T(kFloatLogitLimit)) continue;
        }
        const T p = v >= 0 ? T(1) / (T(1) + std::exp(-v)) : std::exp(v) / (T(1) + std::exp(v));
        gl[r * cols + c] += g[r] * (x[r * cols + c] - p);
      }
    }
  });
}

template <typename T>
Var<T> categorical_log_prob(Var<T> logits, const Tensor<T>& onehot) {
  const Tensor<T>& l = logits.value();
  const std::size_t rows = l.rows(), cols = l.cols();
  Tensor<T> out(Shape{rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    const T lse = logsumexp(std::span<const T>(l.data() + r * cols, cols));
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) total += onehot[r * cols + c] * (l[r * cols + c] - lse);
    out[r] = total;
  }
  return logits.tape().record("categorical_log_prob", std::move(out), {logits}, [onehot](Tape<T>& tape, NodeId self) {
    const NodeId il = tape.parent(self, 0);
    if (!tape.requires_grad(il)) return;
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& l = tape.value(il);
    Tensor<T>& gl = tape.grad_buffer(il);
    const std::size_t cols = l.cols();
    for (std::size_t r = 0; r < l.rows(); ++r) {
      const T* row = l.data() + r * cols;
      const T lse = logsumexp(std::span<const T>(row, cols));
      T mass = 0;
      for (std::size_t c = 0; c < cols; ++c) mass += onehot[r * cols + c];
      for (std::size_t c = 0; c < cols; ++c) {
        gl[r * cols + c] += g[r] * (onehot[r * cols + c] - std::exp(row[c] - lse) * mass);
      }
    }
  });
}

template <typename T>
Var<T> gaussian_unit_log_prob(Var<T> means, const Tensor<T>& x) {
  const Tensor<T>& m = means.value();
  const std::size_t rows = m.rows(), cols = m.cols();
  const T offset = static_cast<T>(0.5 * static_cast<double>(cols) * std::log(2.0 * std::numbers::pi));
  Tensor<T> out(Shape{rows, 1});
  for (std::size_t r = 0; r < rows; ++r) {
    T total = 0;
    for (std::size_t c = 0; c < cols; ++c) {
      const T d = x[r * cols + c] - m[r * cols + c];
      total += d * d;
    }
    out[r] = T(-0.5) * total - offset;
  }
  return means.tape().record("gaussian_unit_log_prob", std::move(out), {means}, [x](Tape<T>& tape, NodeId self) {
    const NodeId im = tape.parent(self, 0);
    if (!tape.requires_grad(im)) return;
    const Tensor<T>& g = *tape.grad(self);
    const Tensor<T>& m = tape.value(im);
    Tensor<T>& gm = tape.grad_buffer(im);
    const std::size_t cols = m.cols();
    for (std::size_t r = 0; r < m.rows(); ++r) {
      for (std::size_t c = 0; c < cols; ++c) gm[r * cols + c] += g[r] * (x[r * cols + c] - m[r * cols + c]);
    }
  });
}

template <typename T>
void check_support(Family family, const Tensor<T>& obs) {
  switch (family) {
    case Family::bernoulli:
      for (std::size_t i = 0; i < obs.size(); ++i) {
        if (obs[i] != T(0) && obs[i] != T(1)) {
          throw DomainError("bernoulli: observation " + std::to_string(obs[i]) + " at index " + std::to_string(i) +
                            " is not binary");
        }
      }
      break;
    case Family::categorical: {
      const std::size_t cols = obs.cols();
      for (std::size_t r = 0; r < obs.rows(); ++r) {
        std::size_t ones = 0;
        for (std::size_t c = 0; c < cols; ++c) {
          const T v = obs[r * cols + c];
          if (v == T(1)) ++ones;
          else if (v != T(0)) ones = cols + 1;
        }
        if (ones != 1) throw DomainError("categorical: observation row " + std::to_string(r) + " is not one-hot");
      }
      break;
    }
    case Family::gaussian_unit:
      if (!obs.all_finite()) throw DomainError("gaussian: observation contains non-finite values");
      break;
  }
}

}  // namespace

template <typename T>
Var<T> log_likelihood(const LikelihoodParams<T>& params, const Tensor<T>& observation) {
  const Tensor<T>& p = params.params.value();
  if (p.rows() != observation.rows() || p.cols() != observation.cols()) {
    throw ShapeError("log_likelihood", p.shape(), observation.shape());
  }
  check_support(params.family, observation);
  switch (params.family) {
    case Family::bernoulli: return bernoulli_log_prob(params.params, observation);
    case Family::categorical: return categorical_log_prob(params.params, observation);
    case Family::gaussian_unit: return gaussian_unit_log_prob(params.params, observation);
  }
  throw std::logic_error("unreachable");
}

template <typename T>
Tensor<T> observation_mean(const LikelihoodParams<T>& params) {
  const Tensor<T>& p = params.params.value();
  switch (params.family) {
    case Family::bernoulli: {
      Tensor<T> out(p.shape());
      for (std::size_t i = 0; i < p.size(); ++i) out[i] = T(1) / (T(1) + std::exp(-p[i]));
      return out;
    }
    case Family::categorical: {
      Tensor<T> out(p.shape());
      const std::size_t cols = p.cols();
      for (std::size_t r = 0; r < p.rows(); ++r) {
        const T lse = logsumexp(std::span<const T>(p.data() + r * cols, cols));
        for (std::size_t c = 0; c < cols; ++c) out[r * cols + c] = std::exp(p[r * cols + c] - lse);
      }
      return out;
    }
    case Family::gaussian_unit: return p;
  }
  throw std::logic_error("unreachable");
}

#define JMVAE_INSTANTIATE_DISTRIBUTIONS(T)                                              \
  template struct DiagGaussian<T>;                                                      \
  template Var<T> rsample<T>(const DiagGaussian<T>&, Var<T>);                           \
  template Var<T> kl_to_standard_normal<T>(const DiagGaussian<T>&);                     \
  template Var<T> kl_between<T>(const DiagGaussian<T>&, const DiagGaussian<T>&);        \
  template Var<T> log_density<T>(const DiagGaussian<T>&, Var<T>);                       \
  template Var<T> standard_normal_log_density<T>(Var<T>);                               \
  template Var<T> log_likelihood<T>(const LikelihoodParams<T>&, const Tensor<T>&);      \
  template Tensor<T> observation_mean<T>(const LikelihoodParams<T>&);

JMVAE_INSTANTIATE_DISTRIBUTIONS(float)
JMVAE_INSTANTIATE_DISTRIBUTIONS(double)

#undef JMVAE_INSTANTIATE_DISTRIBUTIONS

}  // namespace jmvae
