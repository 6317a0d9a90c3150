#pragma once

#include <filesystem>
#include <stdexcept>
#include <string>
#include <utility>

#include "jmvae/data.hpp"
#include "jmvae/models.hpp"
#include "jmvae/training.hpp"

namespace jmvae {

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

enum class DatasetKind { toy, idx };

struct DatasetSource {
  DatasetKind kind = DatasetKind::toy;
  ToyConfig toy;
  std::filesystem::path train_images;
  std::filesystem::path train_labels;
  /// Optional; without them the test split is carved out of the training files.
  std::filesystem::path test_images;
  std::filesystem::path test_labels;
  double train_fraction = 5.0 / 6.0;
  std::uint64_t split_seed = 0;

  bool operator==(const DatasetSource&) const = default;
};

/// A training run as read from a `key = value` file.
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  DatasetSource dataset;
  std::filesystem::path output_dir;

  bool operator==(const RunConfig&) const = default;
};

/// Parses the text of a run configuration. Blank lines and text after '#'
/// are ignored; unknown or repeated keys and malformed values throw
/// ConfigError naming the line. Relative paths resolve against `base_dir`.
RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir = {});
RunConfig load_run_config(const std::filesystem::path& path);

/// Checks value ranges and that every input file exists; throws ConfigError.
void validate(const RunConfig& config);

/// Canonical text form; parse_run_config(to_text(c)) == c.
std::string to_text(const RunConfig& config);

/// Loads or generates the data and returns (train, test). The model's
/// modality specs are overwritten with the dataset's.
std::pair<BimodalDataset, BimodalDataset> load_datasets(RunConfig& config);

}  // namespace jmvae
