#include "jmvae/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>
#include <map>
#include <sstream>

namespace jmvae {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

namespace {

constexpr char kMagic[4] = {'J', 'M', 'C', 'K'};

std::string join(const std::vector<std::size_t>& values, char sep) {
  if (values.empty()) return "-";
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out += sep;
    out += std::to_string(values[i]);
  }
  return out;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

CheckpointError manifest_error(const std::string& what) {
  return CheckpointError(CheckpointError::Kind::bad_manifest, "checkpoint manifest: " + what);
}

std::vector<std::size_t> split_sizes(const std::string& text, char sep) {
  std::vector<std::size_t> out;
  if (text == "-") return out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t end = std::min(text.find(sep, start), text.size());
    const std::string item = text.substr(start, end - start);
    std::size_t used = 0;
    unsigned long long v = 0;
    try {
      v = std::stoull(item, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (item.empty() || used != item.size()) throw manifest_error("bad size list '" + text + "'");
    out.push_back(static_cast<std::size_t>(v));
    start = end + 1;
  }
  return out;
}

std::string modality_line(const ModalitySpec& m) {
  return m.name + " " + std::to_string(m.dimension) + " " + std::string(to_string(m.family)) + " " +
         join(m.input_shape, 'x');
}

ModalitySpec parse_modality(std::istringstream& in) {
  ModalitySpec m;
  std::string family, shape;
  if (!(in >> m.name >> m.dimension >> family >> shape)) throw manifest_error("bad modality entry");
  try {
    m.family = parse_family(family);
  } catch (const std::invalid_argument& e) {
    throw manifest_error(e.what());
  }
  m.input_shape = split_sizes(shape, 'x');
  return m;
}

template <typename V>
void put(std::vector<char>& out, V v) {
  char bytes[sizeof(V)];
  std::memcpy(bytes, &v, sizeof(V));
  out.insert(out.end(), bytes, bytes + sizeof(V));
}

template <typename V>
V get(const std::vector<char>& in, std::size_t offset) {
  V v;
  std::memcpy(&v, in.data() + offset, sizeof(V));
  return v;
}

struct TensorEntry {
  std::string name;
  Shape shape;
  std::size_t offset;
};

}  // namespace

template <typename T>
std::vector<char> serialize(const Model<T>& model, const CheckpointInfo& info) {
  const ModelConfig& c = model.config();
  std::ostringstream manifest;
  manifest << "variant " << to_string(c.variant) << '\n'
           << "x " << modality_line(c.x) << '\n'
           << "w " << modality_line(c.w) << '\n'
           << "encoder_hidden " << join(c.encoder_hidden, ',') << '\n'
           << "decoder_hidden " << join(c.decoder_hidden, ',') << '\n'
           << "shared_top " << c.shared_top << '\n'
           << "latent " << c.latent << '\n'
           << "alpha " << exact(c.alpha) << '\n'
           << "leaky_slope " << exact(c.leaky_slope) << '\n'
           << "fusion " << to_string(c.fusion) << '\n'
           << "seed " << info.seed << '\n'
           << "epoch " << info.epoch << '\n';
  const auto params = model.parameters();
  manifest << "tensors " << params.size() << '\n';
  std::size_t offset = 0;
  for (const Parameter<T>* p : params) {
    manifest << "tensor " << p->name << ' ' << join(p->value.shape(), 'x') << ' ' << offset << '\n';
    offset += p->value.size() * sizeof(float);
  }
  const std::string text = manifest.str();

  std::vector<char> out(kMagic, kMagic + 4);
  put<std::uint32_t>(out, kCheckpointVersion);
  put<std::uint64_t>(out, text.size());
  out.insert(out.end(), text.begin(), text.end());
  out.reserve(out.size() + offset);
  for (const Parameter<T>* p : params) {
    for (T v : p->value.values()) put<float>(out, static_cast<float>(v));
  }
  return out;
}

template <typename T>
void save(const Model<T>& model, const std::filesystem::path& path, const CheckpointInfo& info) {
  const std::vector<char> bytes = serialize(model, info);
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "cannot write " + tmp.string());
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw CheckpointError(CheckpointError::Kind::io, "short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

LoadedCheckpoint deserialize(const std::vector<char>& bytes) {
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 4) != 0) {
    throw CheckpointError(CheckpointError::Kind::bad_magic, "not a checkpoint (magic mismatch)");
  }
  const auto version = get<std::uint32_t>(bytes, 4);
  if (version != kCheckpointVersion) {
    throw CheckpointError(CheckpointError::Kind::bad_version, "unsupported checkpoint version " +
                                                                  std::to_string(version));
  }
  const auto manifest_size = get<std::uint64_t>(bytes, 8);
  if (manifest_size > bytes.size() - 16) throw manifest_error("length exceeds file size");
  std::istringstream manifest(std::string(bytes.data() + 16, manifest_size));
  const std::size_t payload_start = 16 + manifest_size;
  const std::size_t payload_size = bytes.size() - payload_start;

  ModelConfig config;
  CheckpointInfo info;
  std::vector<TensorEntry> table;
  std::size_t declared = 0;
  std::map<std::string, bool> seen;
  std::string line;
  while (std::getline(manifest, line)) {
    if (line.empty()) continue;
    std::istringstream in(line);
    std::string key;
    in >> key;
    if (seen[key] && key != "tensor") throw manifest_error("duplicate key '" + key + "'");
    seen[key] = true;
    std::string value;
    if (key == "variant") {
      in >> value;
      try {
        config.variant = parse_variant(value);
      } catch (const std::invalid_argument& e) {
        throw CheckpointError(CheckpointError::Kind::unknown_variant, e.what());
      }
    } else if (key == "x") {
      config.x = parse_modality(in);
    } else if (key == "w") {
      config.w = parse_modality(in);
    } else if (key == "encoder_hidden") {
      in >> value;
      config.encoder_hidden = split_sizes(value, ',');
    } else if (key == "decoder_hidden") {
      in >> value;
      config.decoder_hidden = split_sizes(value, ',');
    } else if (key == "shared_top") {
      in >> config.shared_top;
    } else if (key == "latent") {
      in >> config.latent;
    } else if (key == "alpha") {
      in >> value;
      config.alpha = std::strtod(value.c_str(), nullptr);
    } else if (key == "leaky_slope") {
      in >> value;
      config.leaky_slope = std::strtod(value.c_str(), nullptr);
    } else if (key == "fusion") {
      in >> value;
      try {
        config.fusion = parse_fusion(value);
      } catch (const std::invalid_argument& e) {
        throw manifest_error(e.what());
      }
    } else if (key == "seed") {
      in >> info.seed;
    } else if (key == "epoch") {
      in >> info.epoch;
    } else if (key == "tensors") {
      in >> declared;
    } else if (key == "tensor") {
      TensorEntry entry;
      std::string shape;
      in >> entry.name >> shape >> entry.offset;
      entry.shape = split_sizes(shape, 'x');
      table.push_back(std::move(entry));
    } else {
      throw manifest_error("unknown key '" + key + "'");
    }
    if (in.fail()) throw manifest_error("malformed line '" + line + "'");
  }
  for (const char* required : {"variant", "x", "w", "encoder_hidden", "decoder_hidden", "shared_top", "latent",
                               "alpha", "leaky_slope", "fusion", "tensors"}) {
    if (!seen[required]) throw manifest_error(std::string("missing key '") + required + "'");
  }
  if (declared != table.size()) {
    throw CheckpointError(CheckpointError::Kind::inconsistent, "tensor table lists " + std::to_string(table.size()) +
                                                                   " entries, header declares " +
                                                                   std::to_string(declared));
  }

  std::optional<Model<float>> model;
  try {
    model.emplace(config, 0);
  } catch (const std::invalid_argument& e) {
    throw manifest_error(e.what());
  }
  auto params = model->parameters();
  if (params.size() != table.size()) {
    throw CheckpointError(CheckpointError::Kind::inconsistent,
                          "variant " + std::string(to_string(config.variant)) + " has " +
                              std::to_string(params.size()) + " tensors, file has " + std::to_string(table.size()));
  }
  std::size_t expected_offset = 0;
  for (std::size_t i = 0; i < table.size(); ++i) {
    const TensorEntry& e = table[i];
    Parameter<float>& p = *params[i];
    if (e.name != p.name || e.shape != p.value.shape()) {
      throw CheckpointError(CheckpointError::Kind::inconsistent,
                            "tensor " + std::to_string(i) + " is " + e.name + " " + to_string(e.shape) +
                                ", architecture expects " + p.name + " " + to_string(p.value.shape()));
    }
    const std::size_t nbytes = p.value.size() * sizeof(float);
    if (e.offset != expected_offset || e.offset + nbytes > payload_size) {
      throw CheckpointError(CheckpointError::Kind::inconsistent, "tensor " + e.name + " has a bad offset");
    }
    std::memcpy(p.value.data(), bytes.data() + payload_start + e.offset, nbytes);
    expected_offset += nbytes;
  }
  if (expected_offset != payload_size) {
    throw CheckpointError(CheckpointError::Kind::inconsistent,
                          "payload holds " + std::to_string(payload_size) + " bytes, tensor table covers " +
                              std::to_string(expected_offset));
  }
  return {std::move(*model), info};
}

LoadedCheckpoint load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw CheckpointError(CheckpointError::Kind::io, "cannot open " + path.string());
  std::vector<char> bytes{std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  return deserialize(bytes);
}

template std::vector<char> serialize(const Model<float>&, const CheckpointInfo&);
template std::vector<char> serialize(const Model<double>&, const CheckpointInfo&);
template void save(const Model<float>&, const std::filesystem::path&, const CheckpointInfo&);
template void save(const Model<double>&, const std::filesystem::path&, const CheckpointInfo&);

}  // namespace jmvae
