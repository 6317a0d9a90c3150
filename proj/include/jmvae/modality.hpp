#pragma once

#include <cstddef>
#include <string>

#include "jmvae/distributions.hpp"
#include "jmvae/tensor.hpp"

namespace jmvae {

/// One observed channel: its flat dimension (class count for categorical),
/// likelihood family and the shape it is displayed/serialised with.
struct ModalitySpec {
  std::string name;
  std::size_t dimension = 0;
  Family family = Family::bernoulli;
  Shape input_shape;

  bool operator==(const ModalitySpec&) const = default;
};

/// Throws std::invalid_argument if the spec is unusable.
void validate(const ModalitySpec& spec);

/// All-zeros input standing in for a missing modality.
template <typename T>
Tensor<T> zero_fill_input(const ModalitySpec& spec, std::size_t rows = 1) {
  return Tensor<T>(Shape{rows, spec.dimension});
}

}  // namespace jmvae
