#pragma once

#include <cstdint>
#include <random>

#include "jmvae/tensor.hpp"

namespace jmvae {

using Engine = std::mt19937_64;

/// Independent purposes drawn from one master seed. Each gets its own
/// stream so that toggling one feature leaves the others' draws unchanged.
enum class Stream : std::uint64_t {
  init = 1,
  noise = 2,
  binarization = 3,
  shuffle = 4,
  evaluation = 5,
  generation = 6,
  toy_data = 7,
  split = 8,
  prior = 9,
  dropout = 10,
};

/// Engine for (seed, purpose, index). `index` distinguishes epochs, data
/// points or any other sub-stream.
inline Engine make_engine(std::uint64_t seed, Stream stream, std::uint64_t index = 0) {
  const auto s = static_cast<std::uint64_t>(stream);
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(s), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return Engine(seq);
}

template <typename T>
Tensor<T> standard_normal(std::size_t rows, std::size_t cols, Engine& engine) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Tensor<T> out(Shape{rows, cols});
  for (auto& v : out.values()) v = static_cast<T>(normal(engine));
  return out;
}

}  // namespace jmvae
