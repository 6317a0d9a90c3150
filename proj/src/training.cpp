#include "jmvae/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "jmvae/checkpoint.hpp"

namespace jmvae {

double warmup_beta(std::size_t epoch, std::size_t warmup_epochs) {
  if (warmup_epochs == 0) throw std::invalid_argument("warm-up epochs must be at least 1");
  if (epoch + 1 >= warmup_epochs) return 1.0;
  return static_cast<double>(epoch + 1) / static_cast<double>(warmup_epochs);
}

template <typename T>
void adam_step(AdamState<T>& state, std::span<Parameter<T>* const> params, std::span<const Tensor<T>> grads,
               double learning_rate) {
  if (params.size() != grads.size()) {
    throw ShapeError("adam_step", std::to_string(params.size()) + " parameters but " + std::to_string(grads.size()) +
                                      " gradients");
  }
  if (state.m.empty()) {
    for (const Parameter<T>* p : params) {
      state.m.emplace_back(p->value.shape());
      state.v.emplace_back(p->value.shape());
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step", "optimizer state belongs to another model");
  for (std::size_t i = 0; i < params.size(); ++i) {
    if (grads[i].shape() != params[i]->value.shape()) {
      throw ShapeError("adam_step", params[i]->value.shape(), grads[i].shape());
    }
  }

  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t i = 0; i < params.size(); ++i) {
    T* p = params[i]->value.data();
    T* m = state.m[i].data();
    T* v = state.v[i].data();
    const T* g = grads[i].data();
    for (std::size_t j = 0; j < grads[i].size(); ++j) {
      const double gj = g[j];
      const double mj = state.beta1 * m[j] + (1.0 - state.beta1) * gj;
      const double vj = state.beta2 * v[j] + (1.0 - state.beta2) * gj * gj;
      m[j] = static_cast<T>(mj);
      v[j] = static_cast<T>(vj);
      const double update = learning_rate * (mj / c1) / (std::sqrt(vj / c2) + state.epsilon);
      p[j] = static_cast<T>(p[j] - update);
    }
  }
}

Tensor<float> resample_binarization(const Tensor<float>& images, Engine& engine) {
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  Tensor<float> out(images.shape());
  for (std::size_t i = 0; i < images.size(); ++i) {
    const float p = images[i];
    if (!(p >= 0.0f && p <= 1.0f)) throw DomainError("resample_binarization: pixel value outside [0, 1]");
    out[i] = uniform(engine) < p ? 1.0f : 0.0f;
  }
  return out;
}

void validate(const TrainConfig& c) {
  if (c.epochs == 0) throw std::invalid_argument("train: epochs must be at least 1");
  if (c.batch_size == 0) throw std::invalid_argument("train: batch size must be at least 1");
  if (!(c.learning_rate > 0.0)) throw std::invalid_argument("train: learning rate must be positive");
  if (c.warmup_epochs == 0) throw std::invalid_argument("train: warm-up epochs must be at least 1");
}

namespace {

template <typename T>
Tensor<T> rows_as(const Tensor<float>& source, std::span<const std::size_t> rows) {
  if constexpr (std::is_same_v<T, float>) {
    return gather_rows(source, rows);
  } else {
    return gather_rows(source, rows).template cast<T>();
  }
}

template <typename T>
std::string non_finite_report(const Tape<T>& tape, const std::string& where) {
  std::string msg = "non-finite " + where;
  if (auto id = tape.first_non_finite()) {
    msg += "; first non-finite tensor is node " + std::to_string(*id) + " (" + tape.op(*id) + ", shape " +
           to_string(tape.value(*id).shape()) + ")";
  }
  return msg;
}

void accumulate(LossBreakdown& total, const LossBreakdown& part, double weight) {
  total.total += weight * part.total;
  total.kl_prior += weight * part.kl_prior;
  total.recon_x += weight * part.recon_x;
  total.recon_w += weight * part.recon_w;
  total.kl_single_x += weight * part.kl_single_x;
  total.kl_single_w += weight * part.kl_single_w;
}

bool is_jmvae(Variant v) { return v == Variant::jmvae_zero || v == Variant::jmvae_kl; }

}  // namespace

template <typename T>
std::vector<EpochMetrics> train(Model<T>& model, const BimodalDataset& data, const TrainConfig& config,
                                const EpochCallback<T>& on_epoch) {
  validate(config);
  validate(data);
  if (!(data.x_spec.dimension == model.config().x.dimension && data.x_spec.family == model.config().x.family &&
        data.w_spec.dimension == model.config().w.dimension && data.w_spec.family == model.config().w.family)) {
    throw std::invalid_argument("train: dataset modalities do not match the model");
  }
  if (data.size() == 0) throw std::invalid_argument("train: dataset is empty");
  const bool binarize = data.x_spec.family == Family::bernoulli;
  const bool dropout = config.modality_dropout && is_jmvae(model.variant());
  const bool checkpoints = !config.checkpoint_dir.empty();
  if (checkpoints) std::filesystem::create_directories(config.checkpoint_dir);

  const std::size_t n = data.size();
  const std::size_t latent = model.config().latent;
  AdamState<T> adam;
  std::vector<Parameter<T>*> params = model.parameters();
  std::vector<Tensor<T>> grads(params.size());
  std::vector<EpochMetrics> history;
  Tensor<float> fixed_x;
  if (binarize && !config.resample_binarization) {
    Engine engine = make_engine(config.seed, Stream::binarization, 0);
    fixed_x = resample_binarization(data.x, engine);
  }

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    const double beta = warmup_beta(epoch, config.warmup_epochs);

    Tensor<float> epoch_x;
    if (binarize && config.resample_binarization) {
      Engine engine = make_engine(config.seed, Stream::binarization, epoch);
      epoch_x = resample_binarization(data.x, engine);
    }
    const Tensor<float>& xs = !binarize ? data.x : config.resample_binarization ? epoch_x : fixed_x;

    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    Engine shuffle = make_engine(config.seed, Stream::shuffle, epoch);
    std::shuffle(order.begin(), order.end(), shuffle);
    Engine noise_engine = make_engine(config.seed, Stream::noise, epoch);
    Engine dropout_engine = make_engine(config.seed, Stream::dropout, epoch);
    std::uniform_int_distribution<int> quarter(0, 3);

    EpochMetrics metrics;
    metrics.epoch = epoch;
    metrics.parts.beta = beta;
    for (std::size_t begin = 0; begin < n; begin += config.batch_size) {
      const std::size_t end = std::min(n, begin + config.batch_size);
      std::span<const std::size_t> rows(order.data() + begin, end - begin);
      const Tensor<T> x = rows_as<T>(xs, rows);
      const Tensor<T> w = rows_as<T>(data.w, rows);
      const Tensor<T> noise = standard_normal<T>(rows.size(), latent, noise_engine);

      ObjectiveOptions<T> options;
      options.beta = beta;
      Tensor<T> x_in, w_in;
      if (dropout) {
        x_in = x;
        w_in = w;
        for (std::size_t r = 0; r < rows.size(); ++r) {
          const int draw = quarter(dropout_engine);
          Tensor<T>& hidden = draw == 0 ? x_in : w_in;
          if (draw <= 1) {
            for (std::size_t c = 0; c < hidden.cols(); ++c) hidden.at(r, c) = T(0);
          }
        }
        options.x_input = &x_in;
        options.w_input = &w_in;
      }

      Tape<T> tape;
      Objective<T> obj = objective(tape, model, x, w, noise, options);
      if (!std::isfinite(obj.parts.total)) throw TrainingError(non_finite_report(tape, "loss at epoch " + std::to_string(epoch)));
      Var<T> loss = -obj.value;
      Gradients<T> g = tape.backward(loss);
      for (std::size_t i = 0; i < params.size(); ++i) {
        grads[i] = g.of(*params[i]);
        if (!grads[i].all_finite()) {
          throw TrainingError("non-finite gradient for " + params[i]->name + " at epoch " + std::to_string(epoch));
        }
      }
      adam_step<T>(adam, params, grads, config.learning_rate);
      accumulate(metrics.parts, obj.parts, static_cast<double>(rows.size()) / static_cast<double>(n));
    }
    metrics.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    history.push_back(metrics);

    const bool last = epoch + 1 == config.epochs;
    if (checkpoints && (last || (config.eval_every > 0 && (epoch + 1) % config.eval_every == 0))) {
      save(model, config.checkpoint_dir / checkpoint_name(epoch), CheckpointInfo{config.seed, epoch + 1});
    }
    if (on_epoch) on_epoch(metrics, model);
  }
  return history;
}

std::string metrics_csv_header() { return "epoch,beta,total,kl_prior,recon_x,recon_w,kl_sx,kl_sw,seconds"; }

std::string metrics_csv_row(const EpochMetrics& row) {
  char buf[512];
  const LossBreakdown& p = row.parts;
  std::snprintf(buf, sizeof buf, "%zu,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g,%.6f", row.epoch + 1, p.beta, p.total,
                p.kl_prior, p.recon_x, p.recon_w, p.kl_single_x, p.kl_single_w, row.seconds);
  return buf;
}

void write_metrics_csv(const std::filesystem::path& path, std::span<const EpochMetrics> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << metrics_csv_header() << '\n';
  for (const EpochMetrics& row : rows) out << metrics_csv_row(row) << '\n';
}

std::string checkpoint_name(std::size_t epoch) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "epoch-%04zu.jmck", epoch + 1);
  return buf;
}

template void adam_step(AdamState<float>&, std::span<Parameter<float>* const>, std::span<const Tensor<float>>, double);
template void adam_step(AdamState<double>&, std::span<Parameter<double>* const>, std::span<const Tensor<double>>,
                        double);
template std::vector<EpochMetrics> train(Model<float>&, const BimodalDataset&, const TrainConfig&,
                                         const EpochCallback<float>&);
template std::vector<EpochMetrics> train(Model<double>&, const BimodalDataset&, const TrainConfig&,
                                         const EpochCallback<double>&);

}  // namespace jmvae
