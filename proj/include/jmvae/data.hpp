#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "jmvae/modality.hpp"
#include "jmvae/tensor.hpp"

namespace jmvae {

/// Paired images and labels. Images are stored continuous in [0, 1] and are
/// binarised (or not) by the consumer; labels are one-hot rows.
struct BimodalDataset {
  ModalitySpec x_spec;
  ModalitySpec w_spec;
  Tensor<float> x;
  Tensor<float> w;
  std::vector<std::uint32_t> labels;
  std::string split = "all";

  std::size_t size() const noexcept { return labels.size(); }
  BimodalDataset subset(std::span<const std::size_t> rows, std::string split_name) const;
};

/// Throws std::invalid_argument when counts, ranges or one-hot rows are off.
void validate(const BimodalDataset& data);

class IdxError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, truncated, count_mismatch, bad_label };
  IdxError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

/// Reads an IDX image file (magic 2051, unsigned bytes, dims N x rows x cols)
/// and an IDX label file (magic 2049, N bytes). Pixels are scaled by 1/255,
/// labels one-hot encoded over `classes`.
BimodalDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t classes = 10);

/// Inverse of load_idx: pixels are written as round(255 * p).
void write_idx(const BimodalDataset& data, const std::filesystem::path& images, const std::filesystem::path& labels);

struct ToyConfig {
  std::size_t classes = 10;
  std::size_t dim = 64;
  std::size_t per_class = 500;
  double noise = 0.05;
  std::uint64_t seed = 0;

  bool operator==(const ToyConfig&) const = default;
};

/// Binary class prototypes (classes x dim). Class c lights pixel i when
/// (i / block) % classes == c, with block = dim / classes.
Tensor<float> toy_prototypes(std::size_t classes, std::size_t dim);

/// Each datum is its class prototype with every pixel flipped independently
/// with probability `noise`.
BimodalDataset make_toy(const ToyConfig& config);

/// Disjoint, exhaustive, seed-deterministic split; rows keep their original
/// relative order. The train part holds round(fraction * N) rows.
std::pair<BimodalDataset, BimodalDataset> split(const BimodalDataset& data, double train_fraction, std::uint64_t seed);

/// Binary greymap (P5, maxval 255). Values in [0, 1] are scaled by 255.
void write_pgm(const std::filesystem::path& path, const Tensor<double>& pixels, std::size_t rows, std::size_t cols);
/// Reads a P5 image with maxval <= 255 as a 1 x (rows * cols) tensor in [0, 1].
Tensor<double> read_pgm(const std::filesystem::path& path, std::size_t* rows = nullptr, std::size_t* cols = nullptr);

/// Index of the prototype row closest in squared distance to `image`.
std::size_t nearest_prototype(std::span<const float> image, const Tensor<float>& prototypes);

}  // namespace jmvae
