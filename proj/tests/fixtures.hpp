#pragma once

#include <random>

#include "jmvae/data.hpp"
#include "jmvae/models.hpp"
#include "jmvae/rng.hpp"

namespace fixtures {

using namespace jmvae;

// 4-pixel Bernoulli image, 2-class label, 1-D latent: small enough for
// quadrature ground truth.
inline ModelConfig tiny_config(Variant variant, double alpha = 0.1) {
  ModelConfig c;
  c.variant = variant;
  c.x = {"x", 4, Family::bernoulli, {2, 2}};
  c.w = {"w", 2, Family::categorical, {2}};
  c.encoder_hidden = {16};
  c.shared_top = 16;
  c.latent = 1;
  c.decoder_hidden = {16};
  c.alpha = alpha;
  return c;
}

inline ModelConfig small_config(Variant variant, std::size_t latent = 2) {
  ModelConfig c;
  c.variant = variant;
  c.x = {"x", 6, Family::bernoulli, {2, 3}};
  c.w = {"w", 3, Family::categorical, {3}};
  c.encoder_hidden = {5, 4};
  c.shared_top = 4;
  c.latent = latent;
  c.decoder_hidden = {5};
  c.alpha = 0.3;
  return c;
}

// Toy model sized for the 64-pixel, 10-class fixture.
inline ModelConfig toy_config(Variant variant, std::size_t latent = 16, double alpha = 0.1) {
  ModelConfig c;
  c.variant = variant;
  c.x = {"x", 64, Family::bernoulli, {8, 8}};
  c.w = {"w", 10, Family::categorical, {10}};
  c.encoder_hidden = {128, 128};
  c.shared_top = 64;
  c.latent = latent;
  c.decoder_hidden = {128, 128, 128};
  c.alpha = alpha;
  return c;
}

inline ToyConfig toy_fixture() { return {10, 64, 600, 0.05, 7}; }

inline std::pair<BimodalDataset, BimodalDataset> toy_split() {
  return split(make_toy(toy_fixture()), 5.0 / 6.0, 3);
}

inline std::pair<BimodalDataset, BimodalDataset> tiny_split() {
  return split(make_toy({2, 4, 500, 0.1, 11}), 0.8, 5);
}

template <typename T>
Tensor<T> random_binary(std::size_t rows, std::size_t cols, Engine& engine) {
  std::bernoulli_distribution coin(0.5);
  Tensor<T> out(Shape{rows, cols});
  for (auto& v : out.values()) v = coin(engine) ? T(1) : T(0);
  return out;
}

template <typename T>
Tensor<T> random_one_hot(std::size_t rows, std::size_t cols, Engine& engine) {
  std::uniform_int_distribution<std::size_t> pick(0, cols - 1);
  Tensor<T> out(Shape{rows, cols});
  for (std::size_t r = 0; r < rows; ++r) out.at(r, pick(engine)) = T(1);
  return out;
}

inline Tensor<double> uniform(std::size_t rows, std::size_t cols, Engine& engine, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor<double> out(Shape{rows, cols});
  for (auto& v : out.values()) v = u(engine);
  return out;
}

}  // namespace fixtures
