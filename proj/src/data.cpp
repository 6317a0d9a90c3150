#include "jmvae/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iterator>
#include <limits>
#include <numeric>
#include <random>

#include "jmvae/rng.hpp"

namespace jmvae {

namespace {

constexpr std::uint32_t kImageMagic = 2051;
constexpr std::uint32_t kLabelMagic = 2049;

std::vector<unsigned char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IdxError(IdxError::Kind::io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::uint32_t read_be32(const std::vector<unsigned char>& bytes, std::size_t offset, const std::filesystem::path& path) {
  if (bytes.size() < offset + 4) throw IdxError(IdxError::Kind::truncated, path.string() + ": header is truncated");
  return (std::uint32_t{bytes[offset]} << 24) | (std::uint32_t{bytes[offset + 1]} << 16) |
         (std::uint32_t{bytes[offset + 2]} << 8) | std::uint32_t{bytes[offset + 3]};
}

void write_be32(std::ofstream& out, std::uint32_t v) {
  const char bytes[4] = {static_cast<char>(v >> 24), static_cast<char>(v >> 16), static_cast<char>(v >> 8),
                         static_cast<char>(v)};
  out.write(bytes, 4);
}

}  // namespace

BimodalDataset BimodalDataset::subset(std::span<const std::size_t> rows, std::string split_name) const {
  BimodalDataset out;
  out.x_spec = x_spec;
  out.w_spec = w_spec;
  out.x = gather_rows(x, rows);
  out.w = gather_rows(w, rows);
  out.labels.reserve(rows.size());
  for (std::size_t r : rows) out.labels.push_back(labels[r]);
  out.split = std::move(split_name);
  return out;
}

void validate(const BimodalDataset& data) {
  const std::size_t n = data.labels.size();
  if (data.x.rows() != n || data.w.rows() != n) {
    throw std::invalid_argument("dataset: record counts differ (x " + std::to_string(data.x.rows()) + ", w " +
                                std::to_string(data.w.rows()) + ", labels " + std::to_string(n) + ")");
  }
  if (data.x.cols() != data.x_spec.dimension || data.w.cols() != data.w_spec.dimension) {
    throw std::invalid_argument("dataset: tensor widths do not match modality specs");
  }
  for (float v : data.x.values()) {
    if (!(v >= 0.0f && v <= 1.0f)) throw std::invalid_argument("dataset: image values must lie in [0, 1]");
  }
  if (data.w_spec.family == Family::categorical) {
    for (std::size_t r = 0; r < n; ++r) {
      float total = 0;
      for (std::size_t c = 0; c < data.w.cols(); ++c) total += data.w.at(r, c);
      if (total != 1.0f || data.w.at(r, data.labels[r]) != 1.0f) {
        throw std::invalid_argument("dataset: label row " + std::to_string(r) + " is not one-hot");
      }
    }
  }
}

BimodalDataset load_idx(const std::filesystem::path& images, const std::filesystem::path& labels,
                        std::size_t classes) {
  const auto image_bytes = read_file(images);
  const auto label_bytes = read_file(labels);

  const std::uint32_t image_magic = read_be32(image_bytes, 0, images);
  if (image_magic != kImageMagic) {
    throw IdxError(IdxError::Kind::bad_magic,
                   images.string() + ": magic " + std::to_string(image_magic) + ", expected 2051");
  }
  const std::uint32_t label_magic = read_be32(label_bytes, 0, labels);
  if (label_magic != kLabelMagic) {
    throw IdxError(IdxError::Kind::bad_magic,
                   labels.string() + ": magic " + std::to_string(label_magic) + ", expected 2049");
  }

  const std::size_t n = read_be32(image_bytes, 4, images);
  const std::size_t rows = read_be32(image_bytes, 8, images);
  const std::size_t cols = read_be32(image_bytes, 12, images);
  const std::size_t n_labels = read_be32(label_bytes, 4, labels);
  if (n != n_labels) {
    throw IdxError(IdxError::Kind::count_mismatch, images.string() + " holds " + std::to_string(n) + " images but " +
                                                       labels.string() + " holds " + std::to_string(n_labels) +
                                                       " labels");
  }
  const std::size_t pixels = rows * cols;
  if (image_bytes.size() < 16 + n * pixels) {
    throw IdxError(IdxError::Kind::truncated, images.string() + ": payload is truncated");
  }
  if (label_bytes.size() < 8 + n) throw IdxError(IdxError::Kind::truncated, labels.string() + ": payload is truncated");

  BimodalDataset data;
  data.x_spec = {"x", pixels, Family::bernoulli, {rows, cols}};
  data.w_spec = {"w", classes, Family::categorical, {classes}};
  data.x = Tensor<float>(Shape{n, pixels});
  data.w = Tensor<float>(Shape{n, classes});
  data.labels.resize(n);
  for (std::size_t i = 0; i < n * pixels; ++i) data.x[i] = static_cast<float>(image_bytes[16 + i]) / 255.0f;
  for (std::size_t i = 0; i < n; ++i) {
    const std::uint32_t label = label_bytes[8 + i];
    if (label >= classes) {
      throw IdxError(IdxError::Kind::bad_label, labels.string() + ": label " + std::to_string(label) + " at record " +
                                                    std::to_string(i) + " is out of range");
    }
    data.labels[i] = label;
    data.w.at(i, label) = 1.0f;
  }
  return data;
}

void write_idx(const BimodalDataset& data, const std::filesystem::path& images, const std::filesystem::path& labels) {
  const Shape& shape = data.x_spec.input_shape;
  const std::size_t rows = shape.size() == 2 ? shape[0] : 1;
  const std::size_t cols = shape.size() == 2 ? shape[1] : data.x_spec.dimension;

  std::ofstream img(images, std::ios::binary);
  if (!img) throw IdxError(IdxError::Kind::io, "cannot write " + images.string());
  write_be32(img, kImageMagic);
  write_be32(img, static_cast<std::uint32_t>(data.size()));
  write_be32(img, static_cast<std::uint32_t>(rows));
  write_be32(img, static_cast<std::uint32_t>(cols));
  std::vector<char> payload(data.x.size());
  for (std::size_t i = 0; i < payload.size(); ++i) {
    payload[i] = static_cast<char>(static_cast<unsigned char>(std::lround(data.x[i] * 255.0f)));
  }
  img.write(payload.data(), static_cast<std::streamsize>(payload.size()));

  std::ofstream lab(labels, std::ios::binary);
  if (!lab) throw IdxError(IdxError::Kind::io, "cannot write " + labels.string());
  write_be32(lab, kLabelMagic);
  write_be32(lab, static_cast<std::uint32_t>(data.size()));
  for (std::uint32_t label : data.labels) lab.put(static_cast<char>(label));
}

Tensor<float> toy_prototypes(std::size_t classes, std::size_t dim) {
  if (classes < 2 || dim < classes) throw std::invalid_argument("toy data: need classes >= 2 and dim >= classes");
  const std::size_t block = dim / classes;
  Tensor<float> out(Shape{classes, dim});
  for (std::size_t c = 0; c < classes; ++c) {
    for (std::size_t i = 0; i < dim; ++i) out.at(c, i) = (i / block) % classes == c ? 1.0f : 0.0f;
  }
  return out;
}

BimodalDataset make_toy(const ToyConfig& config) {
  if (config.per_class == 0) throw std::invalid_argument("toy data: per_class must be positive");
  if (!(config.noise >= 0.0 && config.noise <= 1.0)) throw std::invalid_argument("toy data: noise must lie in [0, 1]");
  const Tensor<float> prototypes = toy_prototypes(config.classes, config.dim);
  const std::size_t n = config.classes * config.per_class;

  BimodalDataset data;
  const auto side = static_cast<std::size_t>(std::lround(std::sqrt(static_cast<double>(config.dim))));
  const Shape image_shape = side * side == config.dim ? Shape{side, side} : Shape{config.dim};
  data.x_spec = {"x", config.dim, Family::bernoulli, image_shape};
  data.w_spec = {"w", config.classes, Family::categorical, {config.classes}};
  data.x = Tensor<float>(Shape{n, config.dim});
  data.w = Tensor<float>(Shape{n, config.classes});
  data.labels.resize(n);

  Engine engine = make_engine(config.seed, Stream::toy_data);
  std::bernoulli_distribution flip(config.noise);
  for (std::size_t c = 0, r = 0; c < config.classes; ++c) {
    for (std::size_t k = 0; k < config.per_class; ++k, ++r) {
      for (std::size_t i = 0; i < config.dim; ++i) {
        const float bit = prototypes.at(c, i);
        data.x.at(r, i) = flip(engine) ? 1.0f - bit : bit;
      }
      data.w.at(r, c) = 1.0f;
      data.labels[r] = static_cast<std::uint32_t>(c);
    }
  }
  return data;
}

std::pair<BimodalDataset, BimodalDataset> split(const BimodalDataset& data, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("split: train fraction must lie in (0, 1)");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  Engine engine = make_engine(seed, Stream::split);
  std::shuffle(order.begin(), order.end(), engine);
  const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(data.size())));
  std::vector<std::size_t> train(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::vector<std::size_t> test(order.begin() + static_cast<std::ptrdiff_t>(n_train), order.end());
  std::sort(train.begin(), train.end());
  std::sort(test.begin(), test.end());
  return {data.subset(train, "train"), data.subset(test, "test")};
}

void write_pgm(const std::filesystem::path& path, const Tensor<double>& pixels, std::size_t rows, std::size_t cols) {
  if (pixels.size() != rows * cols) {
    throw ShapeError("write_pgm", std::to_string(pixels.size()) + " values for a " + std::to_string(rows) + "x" +
                                      std::to_string(cols) + " image");
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "P5\n" << cols << ' ' << rows << "\n255\n";
  for (double p : pixels.values()) {
    out.put(static_cast<char>(static_cast<unsigned char>(std::lround(std::clamp(p, 0.0, 1.0) * 255.0))));
  }
}

Tensor<double> read_pgm(const std::filesystem::path& path, std::size_t* rows, std::size_t* cols) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  auto token = [&]() {
    std::string t;
    while (in >> std::ws && in.peek() == '#') in.ignore(std::numeric_limits<std::streamsize>::max(), '\n');
    in >> t;
    return t;
  };
  if (token() != "P5") throw std::invalid_argument(path.string() + ": not a binary PGM (P5)");
  std::size_t width = 0, height = 0, maxval = 0;
  try {
    width = std::stoul(token());
    height = std::stoul(token());
    maxval = std::stoul(token());
  } catch (const std::exception&) {
    throw std::invalid_argument(path.string() + ": malformed PGM header");
  }
  if (maxval == 0 || maxval > 255) throw std::invalid_argument(path.string() + ": only 8-bit PGM is supported");
  in.get();
  std::vector<char> bytes(width * height);
  in.read(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (in.gcount() != static_cast<std::streamsize>(bytes.size())) {
    throw std::invalid_argument(path.string() + ": truncated PGM payload");
  }
  Tensor<double> out(Shape{1, width * height});
  for (std::size_t i = 0; i < bytes.size(); ++i) {
    out[i] = static_cast<double>(static_cast<unsigned char>(bytes[i])) / static_cast<double>(maxval);
  }
  if (rows) *rows = height;
  if (cols) *cols = width;
  return out;
}

std::size_t nearest_prototype(std::span<const float> image, const Tensor<float>& prototypes) {
  std::size_t best = 0;
  double best_distance = std::numeric_limits<double>::infinity();
  for (std::size_t c = 0; c < prototypes.rows(); ++c) {
    double d = 0;
    for (std::size_t i = 0; i < image.size(); ++i) {
      const double diff = image[i] - prototypes.at(c, i);
      d += diff * diff;
    }
    if (d < best_distance) {
      best_distance = d;
      best = c;
    }
  }
  return best;
}

}  // namespace jmvae
