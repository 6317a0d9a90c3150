#include "jmvae/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

namespace jmvae {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename N>
N parse_number(const std::string& text) {
  N v{};
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), v);
  if (ec != std::errc() || ptr != text.data() + text.size()) throw std::invalid_argument("bad number '" + text + "'");
  return v;
}

bool parse_bool(const std::string& text) {
  if (text == "true" || text == "1" || text == "yes") return true;
  if (text == "false" || text == "0" || text == "no") return false;
  throw std::invalid_argument("bad boolean '" + text + "'");
}

std::vector<std::size_t> parse_widths(const std::string& text) {
  std::vector<std::size_t> out;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) out.push_back(parse_number<std::size_t>(trim(item)));
  if (out.empty()) throw std::invalid_argument("empty width list");
  return out;
}

std::string widths(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string exact(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

Precision parse_precision(const std::string& text) {
  if (text == "f32" || text == "float32") return Precision::f32;
  if (text == "f64" || text == "float64") return Precision::f64;
  throw std::invalid_argument("precision must be f32 or f64, got '" + text + "'");
}

using Setter = std::function<void(RunConfig&, const std::string&, const std::filesystem::path&)>;

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& value) {
  std::filesystem::path p(value);
  return p.is_relative() && !base.empty() ? base / p : p;
}

const std::map<std::string, Setter>& setters() {
  using P = const std::filesystem::path&;
  using S = const std::string&;
  static const std::map<std::string, Setter> table = {
      {"variant", [](RunConfig& c, S v, P) { c.model.variant = parse_variant(v); }},
      {"alpha", [](RunConfig& c, S v, P) { c.model.alpha = parse_number<double>(v); }},
      {"latent", [](RunConfig& c, S v, P) { c.model.latent = parse_number<std::size_t>(v); }},
      {"shared_top", [](RunConfig& c, S v, P) { c.model.shared_top = parse_number<std::size_t>(v); }},
      {"encoder_hidden", [](RunConfig& c, S v, P) { c.model.encoder_hidden = parse_widths(v); }},
      {"decoder_hidden", [](RunConfig& c, S v, P) { c.model.decoder_hidden = parse_widths(v); }},
      {"leaky_slope", [](RunConfig& c, S v, P) { c.model.leaky_slope = parse_number<double>(v); }},
      {"fusion", [](RunConfig& c, S v, P) { c.model.fusion = parse_fusion(v); }},
      {"epochs", [](RunConfig& c, S v, P) { c.train.epochs = parse_number<std::size_t>(v); }},
      {"batch_size", [](RunConfig& c, S v, P) { c.train.batch_size = parse_number<std::size_t>(v); }},
      {"learning_rate", [](RunConfig& c, S v, P) { c.train.learning_rate = parse_number<double>(v); }},
      {"warmup_epochs", [](RunConfig& c, S v, P) { c.train.warmup_epochs = parse_number<std::size_t>(v); }},
      {"seed", [](RunConfig& c, S v, P) { c.train.seed = parse_number<std::uint64_t>(v); }},
      {"precision", [](RunConfig& c, S v, P) { c.train.precision = parse_precision(v); }},
      {"resample_binarization", [](RunConfig& c, S v, P) { c.train.resample_binarization = parse_bool(v); }},
      {"eval_every", [](RunConfig& c, S v, P) { c.train.eval_every = parse_number<std::size_t>(v); }},
      {"modality_dropout", [](RunConfig& c, S v, P) { c.train.modality_dropout = parse_bool(v); }},
      {"dataset",
       [](RunConfig& c, S v, P) {
         if (v == "toy") {
           c.dataset.kind = DatasetKind::toy;
         } else if (v == "idx") {
           c.dataset.kind = DatasetKind::idx;
         } else {
           throw std::invalid_argument("dataset must be toy or idx, got '" + v + "'");
         }
       }},
      {"toy_classes", [](RunConfig& c, S v, P) { c.dataset.toy.classes = parse_number<std::size_t>(v); }},
      {"toy_dim", [](RunConfig& c, S v, P) { c.dataset.toy.dim = parse_number<std::size_t>(v); }},
      {"toy_per_class", [](RunConfig& c, S v, P) { c.dataset.toy.per_class = parse_number<std::size_t>(v); }},
      {"toy_noise", [](RunConfig& c, S v, P) { c.dataset.toy.noise = parse_number<double>(v); }},
      {"toy_seed", [](RunConfig& c, S v, P) { c.dataset.toy.seed = parse_number<std::uint64_t>(v); }},
      {"train_images", [](RunConfig& c, S v, P b) { c.dataset.train_images = resolve(b, v); }},
      {"train_labels", [](RunConfig& c, S v, P b) { c.dataset.train_labels = resolve(b, v); }},
      {"test_images", [](RunConfig& c, S v, P b) { c.dataset.test_images = resolve(b, v); }},
      {"test_labels", [](RunConfig& c, S v, P b) { c.dataset.test_labels = resolve(b, v); }},
      {"train_fraction", [](RunConfig& c, S v, P) { c.dataset.train_fraction = parse_number<double>(v); }},
      {"split_seed", [](RunConfig& c, S v, P) { c.dataset.split_seed = parse_number<std::uint64_t>(v); }},
      {"output_dir", [](RunConfig& c, S v, P b) { c.output_dir = resolve(b, v); }},
  };
  return table;
}

}  // namespace

RunConfig parse_run_config(const std::string& text, const std::filesystem::path& base_dir) {
  RunConfig config;
  std::set<std::string> seen;
  std::istringstream in(text);
  std::string raw;
  for (std::size_t line_no = 1; std::getline(in, raw); ++line_no) {
    const std::string line = trim(raw.substr(0, raw.find('#')));
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no) + ": ";
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError(where + "expected 'key = value'");
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    const auto it = setters().find(key);
    if (it == setters().end()) throw ConfigError(where + "unknown key '" + key + "'");
    if (!seen.insert(key).second) throw ConfigError(where + "key '" + key + "' given twice");
    if (value.empty()) throw ConfigError(where + "key '" + key + "' has no value");
    try {
      it->second(config, value, base_dir);
    } catch (const std::invalid_argument& e) {
      throw ConfigError(where + key + ": " + e.what());
    }
  }
  if (!config.output_dir.empty()) config.train.checkpoint_dir = config.output_dir / "checkpoints";
  return config;
}

RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot read config file " + path.string());
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_run_config(buffer.str(), path.parent_path());
}

void validate(const RunConfig& c) {
  try {
    validate(c.model);
    validate(c.train);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (c.output_dir.empty()) throw ConfigError("output_dir is required");
  const DatasetSource& d = c.dataset;
  if (!(d.train_fraction > 0.0 && d.train_fraction < 1.0)) throw ConfigError("train_fraction must lie in (0, 1)");
  if (d.kind == DatasetKind::toy) {
    if (d.toy.classes < 2 || d.toy.dim < d.toy.classes) throw ConfigError("toy data needs classes >= 2 and dim >= classes");
    if (d.toy.per_class == 0) throw ConfigError("toy_per_class must be positive");
    if (!(d.toy.noise >= 0.0 && d.toy.noise <= 1.0)) throw ConfigError("toy_noise must lie in [0, 1]");
    return;
  }
  auto require_file = [](const std::filesystem::path& p, const char* key) {
    if (p.empty()) throw ConfigError(std::string(key) + " is required for dataset = idx");
    if (!std::filesystem::is_regular_file(p)) throw ConfigError(std::string(key) + ": no such file " + p.string());
  };
  require_file(d.train_images, "train_images");
  require_file(d.train_labels, "train_labels");
  if (d.test_images.empty() != d.test_labels.empty()) {
    throw ConfigError("test_images and test_labels must be given together");
  }
  if (!d.test_images.empty()) {
    require_file(d.test_images, "test_images");
    require_file(d.test_labels, "test_labels");
  }
}

std::string to_text(const RunConfig& c) {
  std::ostringstream out;
  const ModelConfig& m = c.model;
  const TrainConfig& t = c.train;
  const DatasetSource& d = c.dataset;
  out << "variant = " << to_string(m.variant) << '\n'
      << "alpha = " << exact(m.alpha) << '\n'
      << "latent = " << m.latent << '\n'
      << "shared_top = " << m.shared_top << '\n'
      << "encoder_hidden = " << widths(m.encoder_hidden) << '\n'
      << "decoder_hidden = " << widths(m.decoder_hidden) << '\n'
      << "leaky_slope = " << exact(m.leaky_slope) << '\n'
      << "fusion = " << to_string(m.fusion) << '\n'
      << "epochs = " << t.epochs << '\n'
      << "batch_size = " << t.batch_size << '\n'
      << "learning_rate = " << exact(t.learning_rate) << '\n'
      << "warmup_epochs = " << t.warmup_epochs << '\n'
      << "seed = " << t.seed << '\n'
      << "precision = " << (t.precision == Precision::f32 ? "f32" : "f64") << '\n'
      << "resample_binarization = " << (t.resample_binarization ? "true" : "false") << '\n'
      << "eval_every = " << t.eval_every << '\n'
      << "modality_dropout = " << (t.modality_dropout ? "true" : "false") << '\n'
      << "dataset = " << (d.kind == DatasetKind::toy ? "toy" : "idx") << '\n';
  if (d.kind == DatasetKind::toy) {
    out << "toy_classes = " << d.toy.classes << '\n'
        << "toy_dim = " << d.toy.dim << '\n'
        << "toy_per_class = " << d.toy.per_class << '\n'
        << "toy_noise = " << exact(d.toy.noise) << '\n'
        << "toy_seed = " << d.toy.seed << '\n';
  } else {
    out << "train_images = " << d.train_images.string() << '\n' << "train_labels = " << d.train_labels.string() << '\n';
    if (!d.test_images.empty()) {
      out << "test_images = " << d.test_images.string() << '\n' << "test_labels = " << d.test_labels.string() << '\n';
    }
  }
  out << "train_fraction = " << exact(d.train_fraction) << '\n'
      << "split_seed = " << d.split_seed << '\n'
      << "output_dir = " << c.output_dir.string() << '\n';
  return out.str();
}

std::pair<BimodalDataset, BimodalDataset> load_datasets(RunConfig& config) {
  const DatasetSource& d = config.dataset;
  std::pair<BimodalDataset, BimodalDataset> out;
  if (d.kind == DatasetKind::toy) {
    out = split(make_toy(d.toy), d.train_fraction, d.split_seed);
  } else if (!d.test_images.empty()) {
    out.first = load_idx(d.train_images, d.train_labels);
    out.first.split = "train";
    out.second = load_idx(d.test_images, d.test_labels);
    out.second.split = "test";
  } else {
    out = split(load_idx(d.train_images, d.train_labels), d.train_fraction, d.split_seed);
  }
  config.model.x = out.first.x_spec;
  config.model.w = out.first.w_spec;
  return out;
}

}  // namespace jmvae
