#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "jmvae/models.hpp"

namespace jmvae {

class CheckpointError : public std::runtime_error {
 public:
  enum class Kind { io, bad_magic, bad_version, bad_manifest, inconsistent, unknown_variant };
  CheckpointError(Kind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  Kind kind() const noexcept { return kind_; }

 private:
  Kind kind_;
};

inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Run metadata stored next to the weights.
struct CheckpointInfo {
  std::uint64_t seed = 0;
  std::size_t epoch = 0;
};

/// Layout: "JMCK", u32 version, u64 manifest length, manifest text,
/// payload. All integers and floats little-endian; the payload is every
/// parameter as 32-bit floats, in the order of the manifest's tensor table.
/// Double-precision models are rounded to float on the way out.
template <typename T>
std::vector<char> serialize(const Model<T>& model, const CheckpointInfo& info = {});

template <typename T>
void save(const Model<T>& model, const std::filesystem::path& path, const CheckpointInfo& info = {});

struct LoadedCheckpoint {
  Model<float> model;
  CheckpointInfo info;
};

LoadedCheckpoint deserialize(const std::vector<char>& bytes);
LoadedCheckpoint load(const std::filesystem::path& path);

}  // namespace jmvae
