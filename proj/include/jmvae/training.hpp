#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "jmvae/data.hpp"
#include "jmvae/models.hpp"
#include "jmvae/rng.hpp"

namespace jmvae {

/// min(1, (epoch + 1) / warmup_epochs).
double warmup_beta(std::size_t epoch, std::size_t warmup_epochs);

template <typename T>
struct AdamState {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Tensor<T>> m;
  std::vector<Tensor<T>> v;
};

/// One bias-corrected Adam step that decreases the loss whose gradients are
/// `grads` (aligned with `params`). Moments are created on the first call.
template <typename T>
void adam_step(AdamState<T>& state, std::span<Parameter<T>* const> params, std::span<const Tensor<T>> grads,
               double learning_rate);

/// Each pixel becomes 1 with probability equal to its value.
Tensor<float> resample_binarization(const Tensor<float>& images, Engine& engine);

enum class Precision { f32, f64 };

struct TrainConfig {
  std::size_t epochs = 20;
  std::size_t batch_size = 100;
  double learning_rate = 1e-3;
  std::size_t warmup_epochs = 1;
  std::uint64_t seed = 0;
  Precision precision = Precision::f32;
  /// Fresh binarisation every epoch; otherwise one draw is reused.
  bool resample_binarization = true;
  /// Checkpoint every this many epochs (0: final epoch only). Needs checkpoint_dir.
  std::size_t eval_every = 0;
  std::filesystem::path checkpoint_dir;
  /// JMVAE only: per datum, hide x from the encoder with probability 1/4 and
  /// w with probability 1/4 (reconstruction targets stay complete).
  bool modality_dropout = false;

  bool operator==(const TrainConfig&) const = default;
};

void validate(const TrainConfig& config);

struct EpochMetrics {
  std::size_t epoch = 0;
  LossBreakdown parts;  // batch means averaged over the epoch
  double seconds = 0;

  /// The objective with beta = 1: recon_x + recon_w - kl_prior.
  double elbo() const { return parts.recon_x + parts.recon_w - parts.kl_prior; }
};

class TrainingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

template <typename T>
using EpochCallback = std::function<void(const EpochMetrics&, const Model<T>&)>;

/// Minimises -objective with Adam. Throws TrainingError when a loss or
/// gradient goes non-finite, naming the first offending tape node.
template <typename T>
std::vector<EpochMetrics> train(Model<T>& model, const BimodalDataset& data, const TrainConfig& config,
                                const EpochCallback<T>& on_epoch = {});

std::string metrics_csv_header();
std::string metrics_csv_row(const EpochMetrics& row);
void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows);

/// Name of the checkpoint written after `epoch` (0-based).
std::string checkpoint_name(std::size_t epoch);

}  // namespace jmvae
