#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "jmvae/checkpoint.hpp"
#include "jmvae/config.hpp"
#include "jmvae/evaluation.hpp"
#include "jmvae/training.hpp"

namespace fs = std::filesystem;
using namespace jmvae;

namespace {

struct UsageError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

template <typename T>
void run_training(RunConfig& config, const BimodalDataset& train_set) {
  Model<T> model(config.model, config.train.seed);
  std::ofstream metrics(config.output_dir / "metrics.csv");
  if (!metrics) throw std::runtime_error("cannot write " + (config.output_dir / "metrics.csv").string());
  metrics << metrics_csv_header() << '\n';
  std::printf("%s: %zu parameters, %zu training pairs\n", std::string(to_string(model.variant())).c_str(),
              model.parameter_count(), train_set.size());
  train<T>(model, train_set, config.train, [&](const EpochMetrics& row, const Model<T>&) {
    metrics << metrics_csv_row(row) << '\n' << std::flush;
    std::printf("epoch %4zu  beta %.3f  objective %10.4f  elbo %10.4f  (%.1fs)\n", row.epoch + 1, row.parts.beta,
                row.parts.total, row.elbo(), row.seconds);
    std::fflush(stdout);
  });
  save(model, config.output_dir / "model.jmck", CheckpointInfo{config.train.seed, config.train.epochs});
}

int cmd_train(const fs::path& config_path) {
  RunConfig config = load_run_config(config_path);
  validate(config);
  auto [train_set, test_set] = load_datasets(config);
  validate(config.model);

  fs::create_directories(config.output_dir);
  {
    std::ofstream frozen(config.output_dir / "config.resolved");
    frozen << to_text(config);
  }
  const bool derived_test = config.dataset.kind == DatasetKind::toy || config.dataset.test_images.empty();
  if (derived_test) {
    write_idx(test_set, config.output_dir / "test-images.idx", config.output_dir / "test-labels.idx");
    write_idx(train_set, config.output_dir / "train-images.idx", config.output_dir / "train-labels.idx");
  }
  if (config.train.precision == Precision::f64) {
    run_training<double>(config, train_set);
  } else {
    run_training<float>(config, train_set);
  }
  std::printf("wrote %s\n", (config.output_dir / "model.jmck").string().c_str());
  return 0;
}

BimodalDataset load_for(const Model<double>& model, const fs::path& images, const fs::path& labels) {
  BimodalDataset data = load_idx(images, labels, model.config().w.dimension);
  if (data.x_spec.dimension != model.config().x.dimension) {
    throw UsageError("dataset images have " + std::to_string(data.x_spec.dimension) +
                     " pixels, checkpoint expects " + std::to_string(model.config().x.dimension));
  }
  return data;
}

struct EvalArgs {
  fs::path checkpoint, images, labels, out;
  std::string target = "marginal-x", path = "single-x";
  std::size_t k = 1, n_w = 5000;
  std::uint64_t seed = 0;
  unsigned threads = 1;
};

int cmd_eval(const EvalArgs& a) {
  const Model<double> model = model_cast<double>(load(a.checkpoint).model);
  const BimodalDataset data = load_for(model, a.images, a.labels);
  const BoundSpec spec{parse_target(a.target), parse_path(a.path), a.k, a.n_w};
  validate(spec, model.variant());
  const BoundReport report = evaluate(model, data, spec, a.seed, a.threads);
  if (!a.out.empty()) write_bounds_csv(a.out, report, spec);
  std::printf("%s %s %s k=%zu n=%zu: %.4f +- %.4f (%.1fs)\n", std::string(to_string(model.variant())).c_str(),
              a.target.c_str(), a.path.c_str(), a.k, report.values.size(), report.mean, report.standard_error,
              report.seconds);
  return 0;
}

struct GenerateArgs {
  fs::path checkpoint, out_dir, image;
  std::string mode;
  std::optional<std::size_t> label;
  std::size_t count = 16;
  std::uint64_t seed = 0;
  bool sample = false;
  double zeta = 1.0;
};

void write_images(const Model<double>& model, const Tensor<double>& images, const fs::path& dir) {
  const Shape& shape = model.config().x.input_shape;
  const std::size_t rows = shape.size() == 2 ? shape[0] : 1;
  const std::size_t cols = shape.size() == 2 ? shape[1] : model.config().x.dimension;
  for (std::size_t i = 0; i < images.rows(); ++i) {
    char name[32];
    std::snprintf(name, sizeof name, "x-%03zu.pgm", i);
    write_pgm(dir / name, images.row(i), rows, cols);
  }
}

void write_probabilities(const Tensor<double>& probs, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "sample";
  for (std::size_t c = 0; c < probs.cols(); ++c) out << ",p" << c;
  out << '\n';
  char buf[32];
  for (std::size_t r = 0; r < probs.rows(); ++r) {
    out << r;
    for (std::size_t c = 0; c < probs.cols(); ++c) {
      std::snprintf(buf, sizeof buf, "%.9g", probs.at(r, c));
      out << ',' << buf;
    }
    out << '\n';
  }
}

int cmd_generate(const GenerateArgs& a) {
  const Model<double> model = model_cast<double>(load(a.checkpoint).model);
  const GenerationOptions options{a.count, a.sample, a.zeta, a.seed};
  const std::size_t classes = model.config().w.dimension;
  if (a.label && *a.label >= classes) throw UsageError("--class must be below " + std::to_string(classes));

  if (a.mode == "prior-sample") {
    std::optional<Tensor<double>> condition;
    if (model.variant() == Variant::cvae) {
      if (!a.label) throw UsageError("prior-sample on a cvae checkpoint needs --class");
      condition = Tensor<double>(Shape{1, classes});
      condition->at(0, *a.label) = 1.0;
    }
    const Tensor<double> x = generate_from_prior(model, Modality::x, options, condition ? &*condition : nullptr);
    std::optional<Tensor<double>> w;
    if (model.w_decoder()) w = generate_from_prior(model, Modality::w, options);
    fs::create_directories(a.out_dir);
    write_images(model, x, a.out_dir);
    if (w) write_probabilities(*w, a.out_dir / "w.csv");
  } else if (a.mode == "from-w") {
    if (!a.label) throw UsageError("from-w needs --class");
    const Tensor<double> x = generate_x_from_w(model, *a.label, options);
    fs::create_directories(a.out_dir);
    write_images(model, x, a.out_dir);
  } else if (a.mode == "from-x") {
    if (a.image.empty()) throw UsageError("from-x needs --image");
    const Tensor<double> x = read_pgm(a.image);
    if (x.cols() != model.config().x.dimension) {
      throw UsageError("image has " + std::to_string(x.cols()) + " pixels, checkpoint expects " +
                       std::to_string(model.config().x.dimension));
    }
    const Tensor<double> w = generate_w_from_x(model, x, options);
    fs::create_directories(a.out_dir);
    write_probabilities(w, a.out_dir / "w.csv");
  } else {
    throw UsageError("unknown mode '" + a.mode + "'");
  }
  std::printf("wrote %zu samples to %s\n", a.count, a.out_dir.string().c_str());
  return 0;
}

struct LatentArgs {
  fs::path checkpoint, images, labels, out;
  std::string path;
};

int cmd_latent_dump(const LatentArgs& a) {
  const Model<double> model = model_cast<double>(load(a.checkpoint).model);
  const BimodalDataset data = load_for(model, a.images, a.labels);
  EncoderPath path = model.variant() == Variant::vae ? EncoderPath::single_x : EncoderPath::multiple;
  if (!a.path.empty()) path = parse_path(a.path);
  const Tensor<double> z = latent_means(model, data, path);
  std::ofstream out(a.out);
  if (!out) throw std::runtime_error("cannot write " + a.out.string());
  out << "label";
  for (std::size_t j = 0; j < z.cols(); ++j) out << ",z" << j + 1;
  out << '\n';
  char buf[32];
  for (std::size_t i = 0; i < z.rows(); ++i) {
    out << data.labels[i];
    for (std::size_t j = 0; j < z.cols(); ++j) {
      std::snprintf(buf, sizeof buf, "%.9g", z.at(i, j));
      out << ',' << buf;
    }
    out << '\n';
  }
  std::printf("wrote %zu rows to %s\n", z.rows(), a.out.string().c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Joint multimodal variational autoencoders: training, evaluation and generation"};
  app.require_subcommand(1);

  fs::path config_path;
  auto* train_cmd = app.add_subcommand("train", "Train a model from a key = value config file");
  train_cmd->add_option("config", config_path, "Run configuration")->required();

  EvalArgs eval;
  auto* eval_cmd = app.add_subcommand("eval", "Importance-weighted log-likelihood bounds on a dataset");
  eval_cmd->add_option("--checkpoint", eval.checkpoint)->required();
  eval_cmd->add_option("--images", eval.images, "IDX image file")->required();
  eval_cmd->add_option("--labels", eval.labels, "IDX label file")->required();
  eval_cmd->add_option("--target", eval.target, "marginal-x | marginal-w | conditional | joint")->capture_default_str();
  eval_cmd->add_option("--path", eval.path, "single-x | single-w | multiple")->capture_default_str();
  eval_cmd->add_option("-k", eval.k, "Importance samples")->capture_default_str();
  eval_cmd->add_option("--n-w", eval.n_w, "Prior samples for log p(w)")->capture_default_str();
  eval_cmd->add_option("--seed", eval.seed)->capture_default_str();
  eval_cmd->add_option("--threads", eval.threads)->capture_default_str();
  eval_cmd->add_option("--out", eval.out, "Per-datum CSV");

  GenerateArgs gen;
  auto* gen_cmd = app.add_subcommand("generate", "Sample images (PGM) or label probabilities (CSV)");
  gen_cmd->add_option("--checkpoint", gen.checkpoint)->required();
  gen_cmd->add_option("--mode", gen.mode, "prior-sample | from-w | from-x")->required();
  gen_cmd->add_option("--out-dir", gen.out_dir)->required();
  gen_cmd->add_option("--class", gen.label, "Conditioning class index");
  gen_cmd->add_option("--image", gen.image, "Conditioning image (binary PGM)");
  gen_cmd->add_option("--count", gen.count)->capture_default_str();
  gen_cmd->add_option("--seed", gen.seed)->capture_default_str();
  gen_cmd->add_flag("--sample", gen.sample, "Perturb the posterior mean instead of decoding it directly");
  gen_cmd->add_option("--zeta", gen.zeta, "Scale of the perturbation")->capture_default_str();

  LatentArgs latent;
  auto* latent_cmd = app.add_subcommand("latent-dump", "Write posterior means and labels as CSV");
  latent_cmd->add_option("--checkpoint", latent.checkpoint)->required();
  latent_cmd->add_option("--images", latent.images)->required();
  latent_cmd->add_option("--labels", latent.labels)->required();
  latent_cmd->add_option("--out", latent.out)->required();
  latent_cmd->add_option("--path", latent.path, "Encoder: single-x | single-w | multiple");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e) == 0 ? 0 : 2;
  }

  try {
    if (*train_cmd) return cmd_train(config_path);
    if (*eval_cmd) return cmd_eval(eval);
    if (*gen_cmd) return cmd_generate(gen);
    if (*latent_cmd) return cmd_latent_dump(latent);
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
