#include "jmvae/evaluation.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <map>
#include <thread>

namespace jmvae {

std::string_view to_string(Target target) {
  switch (target) {
    case Target::marginal_x: return "marginal-x";
    case Target::marginal_w: return "marginal-w";
    case Target::conditional_x_given_w: return "conditional";
    case Target::joint_xw: return "joint";
  }
  return "?";
}

std::string_view to_string(EncoderPath path) {
  switch (path) {
    case EncoderPath::single_x: return "single-x";
    case EncoderPath::single_w: return "single-w";
    case EncoderPath::multiple: return "multiple";
  }
  return "?";
}

Target parse_target(std::string_view name) {
  if (name == "marginal-x") return Target::marginal_x;
  if (name == "marginal-w") return Target::marginal_w;
  if (name == "conditional" || name == "conditional-x-given-w") return Target::conditional_x_given_w;
  if (name == "joint" || name == "joint-xw") return Target::joint_xw;
  throw std::invalid_argument("unknown bound target '" + std::string(name) + "'");
}

EncoderPath parse_path(std::string_view name) {
  if (name == "single-x") return EncoderPath::single_x;
  if (name == "single-w") return EncoderPath::single_w;
  if (name == "multiple") return EncoderPath::multiple;
  throw std::invalid_argument("unknown encoder path '" + std::string(name) + "'");
}

void validate(const BoundSpec& spec, Variant variant) {
  if (spec.k == 0) throw std::invalid_argument("bound: k must be at least 1");
  const std::string pair = std::string(to_string(spec.target)) + "/" + std::string(to_string(spec.path));
  switch (variant) {
    case Variant::vae:
      if (spec.target != Target::marginal_x || spec.path != EncoderPath::single_x) {
        throw std::invalid_argument("bound " + pair + " is undefined for vae (only marginal-x/single-x)");
      }
      break;
    case Variant::cvae:
      if (spec.target != Target::conditional_x_given_w || spec.path != EncoderPath::multiple) {
        throw std::invalid_argument("bound " + pair + " is undefined for cvae (only conditional/multiple)");
      }
      break;
    case Variant::jmvae_zero:
    case Variant::jmvae_kl:
      if (spec.target == Target::conditional_x_given_w && spec.n_w == 0) {
        throw std::invalid_argument("bound: N_w must be at least 1 for the conditional target");
      }
      break;
  }
}

namespace {

using Tape64 = Tape<double>;
using V = Var<double>;

bool needs_w(const BoundSpec& spec) {
  return spec.target != Target::marginal_x || spec.path != EncoderPath::single_x;
}

DiagGaussian<double> proposal(Tape64& tape, const Model<double>& model, EncoderPath path, const Tensor<double>& x,
                              const Tensor<double>* w) {
  switch (path) {
    case EncoderPath::single_x: return encode(tape, model, &x, static_cast<const Tensor<double>*>(nullptr));
    case EncoderPath::single_w: return encode(tape, model, static_cast<const Tensor<double>*>(nullptr), w);
    case EncoderPath::multiple: return encode(tape, model, &x, w);
  }
  throw std::logic_error("unreachable");
}

// log p(target | z) per row of z, without the prior term. For the
// conditional target of JMVAE this is the joint p(x, w | z).
V log_lik(Tape64& tape, const Model<double>& model, Target target, const Tensor<double>* xk,
          const Tensor<double>* wk, V z) {
  if (model.variant() == Variant::cvae) return log_likelihood(generate(tape, model, z, Modality::x, wk), *xk);
  switch (target) {
    case Target::marginal_x: return log_likelihood(generate(tape, model, z, Modality::x), *xk);
    case Target::marginal_w: return log_likelihood(generate(tape, model, z, Modality::w), *wk);
    case Target::conditional_x_given_w:
    case Target::joint_xw:
      return log_likelihood(generate(tape, model, z, Modality::x), *xk) +
             log_likelihood(generate(tape, model, z, Modality::w), *wk);
  }
  throw std::logic_error("unreachable");
}

double logmeanexp(std::span<const double> values) {
  return logsumexp(values) - std::log(static_cast<double>(values.size()));
}

void require_row(const char* what, const Tensor<double>* t, std::size_t cols) {
  if (t && (t->rows() != 1 || t->cols() != cols)) {
    throw ShapeError(what, "expected a single row of " + std::to_string(cols) + " values, got " +
                               to_string(t->shape()));
  }
}

std::uint64_t fnv1a(std::span<const float> values) {
  std::uint64_t h = 1469598103934665603ull;
  for (float v : values) {
    unsigned char bytes[sizeof(float)];
    std::memcpy(bytes, &v, sizeof v);
    for (unsigned char b : bytes) h = (h ^ b) * 1099511628211ull;
  }
  return h;
}

}  // namespace

double iw_bound(const Model<double>& model, const BoundSpec& spec, const Tensor<double>& x, const Tensor<double>* w,
                Engine& engine, double log_pw) {
  validate(spec, model.variant());
  if (needs_w(spec) && !w) throw std::invalid_argument("bound: this target/path needs w");
  require_row("iw_bound x", &x, model.config().x.dimension);
  require_row("iw_bound w", w, model.config().w.dimension);

  Tape64 tape;
  tape.set_recording(false);
  DiagGaussian<double> q = proposal(tape, model, spec.path, x, w);
  V z = rsample(q, tape.constant(standard_normal<double>(spec.k, model.config().latent, engine)));
  const Tensor<double> xk = repeat_rows(x, spec.k);
  const Tensor<double> wk = w ? repeat_rows(*w, spec.k) : Tensor<double>();
  V log_w = standard_normal_log_density(z) + log_lik(tape, model, spec.target, &xk, w ? &wk : nullptr, z) -
            log_density(q, z);
  double bound = logmeanexp(log_w.value().values());
  if (spec.target == Target::conditional_x_given_w && model.variant() != Variant::cvae) bound -= log_pw;
  return bound;
}

double log_p_w(const Model<double>& model, const Tensor<double>& w, std::size_t n_w, Engine& engine) {
  if (n_w == 0) throw std::invalid_argument("log_p_w: N_w must be at least 1");
  require_row("log_p_w", &w, model.config().w.dimension);
  Tape64 tape;
  tape.set_recording(false);
  V z = tape.constant(standard_normal<double>(n_w, model.config().latent, engine));
  V ll = log_likelihood(generate(tape, model, z, Modality::w), repeat_rows(w, n_w));
  return logmeanexp(ll.value().values());
}

namespace {

double log_integral(const Model<double>& model, Target target, const Tensor<double>* x, const Tensor<double>* w,
                    const QuadratureGrid& grid) {
  const std::size_t d = model.config().latent;
  if (d > 2) throw std::invalid_argument("quadrature: latent dimension " + std::to_string(d) + " exceeds 2");
  const std::size_t n = d == 1 ? grid.points_1d : grid.points_2d;
  if (n < 3) throw std::invalid_argument("quadrature: grid needs at least 3 points per axis");
  const double h = 2.0 * grid.limit / static_cast<double>(n - 1);
  std::vector<double> nodes(n), log_weights(n);
  for (std::size_t i = 0; i < n; ++i) {
    nodes[i] = -grid.limit + h * static_cast<double>(i);
    log_weights[i] = std::log(i == 0 || i + 1 == n ? h / 2 : h);
  }
  const std::size_t total = d == 1 ? n : n * n;
  constexpr std::size_t kChunk = 8192;
  std::vector<double> terms;
  terms.reserve(total);
  for (std::size_t begin = 0; begin < total; begin += kChunk) {
    const std::size_t rows = std::min(kChunk, total - begin);
    Tensor<double> z(Shape{rows, d});
    std::vector<double> lw(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      const std::size_t idx = begin + r;
      if (d == 1) {
        z.at(r, 0) = nodes[idx];
        lw[r] = log_weights[idx];
      } else {
        z.at(r, 0) = nodes[idx / n];
        z.at(r, 1) = nodes[idx % n];
        lw[r] = log_weights[idx / n] + log_weights[idx % n];
      }
    }
    Tape64 tape;
    tape.set_recording(false);
    const Tensor<double> xk = x ? repeat_rows(*x, rows) : Tensor<double>();
    const Tensor<double> wk = w ? repeat_rows(*w, rows) : Tensor<double>();
    V zv = tape.constant(std::move(z));
    V f = standard_normal_log_density(zv) + log_lik(tape, model, target, x ? &xk : nullptr, w ? &wk : nullptr, zv);
    const auto& values = f.value().values();
    for (std::size_t r = 0; r < rows; ++r) terms.push_back(values[r] + lw[r]);
  }
  return logsumexp(std::span<const double>(terms));
}

}  // namespace

double quadrature_oracle(const Model<double>& model, Target target, const Tensor<double>* x, const Tensor<double>* w,
                         const QuadratureGrid& grid) {
  require_row("quadrature x", x, model.config().x.dimension);
  require_row("quadrature w", w, model.config().w.dimension);
  const bool want_x = target != Target::marginal_w;
  const bool want_w = target != Target::marginal_x || model.variant() == Variant::cvae;
  if ((want_x && !x) || (want_w && !w)) throw std::invalid_argument("quadrature: missing modality for this target");
  if (model.variant() == Variant::cvae) {
    if (target != Target::conditional_x_given_w) throw std::invalid_argument("quadrature: cvae only models x given w");
    return log_integral(model, target, x, w, grid);
  }
  if (model.variant() == Variant::vae && target != Target::marginal_x) {
    throw std::invalid_argument("quadrature: vae only models x");
  }
  if (target == Target::conditional_x_given_w) {
    return log_integral(model, Target::joint_xw, x, w, grid) - log_integral(model, Target::marginal_w, x, w, grid);
  }
  return log_integral(model, target, x, w, grid);
}

std::vector<ConvergenceRow> bound_convergence_report(const Model<double>& model, Target target,
                                                     const Tensor<double>& x, const Tensor<double>& w,
                                                     std::span<const std::size_t> k_schedule, std::size_t n_w,
                                                     std::uint64_t seed) {
  if (model.variant() == Variant::vae || model.variant() == Variant::cvae) {
    throw std::invalid_argument("convergence report needs both single and joint encoders");
  }
  const EncoderPath single = target == Target::marginal_x ? EncoderPath::single_x : EncoderPath::single_w;
  double lpw = 0;
  if (target == Target::conditional_x_given_w) {
    Engine prior = make_engine(seed, Stream::prior);
    lpw = log_p_w(model, w, n_w, prior);
  }
  std::vector<ConvergenceRow> rows;
  for (std::size_t k : k_schedule) {
    Engine e1 = make_engine(seed, Stream::evaluation, k);
    Engine e2 = make_engine(seed, Stream::evaluation, k);
    const double s = iw_bound(model, {target, single, k, n_w}, x, &w, e1, lpw);
    const double m = iw_bound(model, {target, EncoderPath::multiple, k, n_w}, x, &w, e2, lpw);
    rows.push_back({k, s, m, std::abs(s - m)});
  }
  return rows;
}

Tensor<float> evaluation_images(const BimodalDataset& data, std::uint64_t seed) {
  if (data.x_spec.family != Family::bernoulli) return data.x;
  const bool binary = std::all_of(data.x.values().begin(), data.x.values().end(),
                                  [](float v) { return v == 0.0f || v == 1.0f; });
  if (binary) return data.x;
  Engine engine = make_engine(seed, Stream::binarization, 0xE7A1ull);
  std::uniform_real_distribution<float> uniform(0.0f, 1.0f);
  Tensor<float> out(data.x.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = uniform(engine) < data.x[i] ? 1.0f : 0.0f;
  return out;
}

BoundReport evaluate(const Model<double>& model, const BimodalDataset& data, const BoundSpec& spec,
                     std::uint64_t seed, unsigned threads) {
  validate(spec, model.variant());
  if (data.x_spec.dimension != model.config().x.dimension || data.w_spec.dimension != model.config().w.dimension ||
      data.x_spec.family != model.config().x.family || data.w_spec.family != model.config().w.family) {
    throw std::invalid_argument("evaluate: dataset modalities do not match the checkpoint");
  }
  const auto start = std::chrono::steady_clock::now();
  const Tensor<float> images = evaluation_images(data, seed);
  const std::size_t n = data.size();

  std::vector<double> log_pw(n, 0.0);
  if (spec.target == Target::conditional_x_given_w && model.variant() != Variant::cvae) {
    std::map<std::uint64_t, double> cache;
    for (std::size_t i = 0; i < n; ++i) {
      const Tensor<float> row = data.w.row(i);
      const std::uint64_t key = fnv1a(row.values());
      auto it = cache.find(key);
      if (it == cache.end()) {
        Engine prior = make_engine(seed, Stream::prior, key);
        it = cache.emplace(key, log_p_w(model, row.cast<double>(), spec.n_w, prior)).first;
      }
      log_pw[i] = it->second;
    }
  }

  BoundReport report;
  report.k = spec.k;
  report.values.assign(n, 0.0);
  auto work = [&](std::size_t shard, std::size_t shards) {
    for (std::size_t i = shard; i < n; i += shards) {
      Engine engine = make_engine(seed, Stream::evaluation, i);
      const Tensor<double> x = images.row(i).cast<double>();
      const Tensor<double> w = data.w.row(i).cast<double>();
      report.values[i] = iw_bound(model, spec, x, &w, engine, log_pw[i]);
    }
  };
  const std::size_t shards = std::max<std::size_t>(1, std::min<std::size_t>(threads, n));
  if (shards == 1) {
    work(0, 1);
  } else {
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(shards);
    for (std::size_t s = 0; s < shards; ++s) {
      pool.emplace_back([&, s] {
        try {
          work(s, shards);
        } catch (...) {
          errors[s] = std::current_exception();
        }
      });
    }
    for (auto& t : pool) t.join();
    for (auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }

  double sum = 0;
  for (double v : report.values) sum += v;
  report.mean = n ? sum / static_cast<double>(n) : 0.0;
  if (n > 1) {
    double ss = 0;
    for (double v : report.values) ss += (v - report.mean) * (v - report.mean);
    report.standard_error = std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n));
  }
  report.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return report;
}

void write_bounds_csv(const std::filesystem::path& path, const BoundReport& report, const BoundSpec& spec) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << "index,bound,k,target,path\n";
  char buf[64];
  for (std::size_t i = 0; i < report.values.size(); ++i) {
    std::snprintf(buf, sizeof buf, "%.17g", report.values[i]);
    out << i << ',' << buf << ',' << report.k << ',' << to_string(spec.target) << ',' << to_string(spec.path) << '\n';
  }
}

Tensor<double> latent_means(const Model<double>& model, const BimodalDataset& data, EncoderPath path,
                            std::uint64_t seed) {
  const Tensor<float> images = evaluation_images(data, seed);
  const std::size_t n = data.size(), d = model.config().latent;
  Tensor<double> out(Shape{n, d});
  constexpr std::size_t kBatch = 500;
  std::vector<std::size_t> rows;
  for (std::size_t begin = 0; begin < n; begin += kBatch) {
    rows.clear();
    for (std::size_t i = begin; i < std::min(n, begin + kBatch); ++i) rows.push_back(i);
    const Tensor<double> x = gather_rows(images, rows).cast<double>();
    const Tensor<double> w = gather_rows(data.w, rows).cast<double>();
    Tape64 tape;
    tape.set_recording(false);
    const Tensor<double>& mean = proposal(tape, model, path, x, &w).mean.value();
    std::copy(mean.values().begin(), mean.values().end(), out.data() + begin * d);
  }
  return out;
}

double centroid_separation(const Tensor<double>& latents, std::span<const std::uint32_t> labels) {
  if (latents.rows() != labels.size() || labels.empty()) {
    throw std::invalid_argument("centroid_separation: one label per latent row is required");
  }
  const std::size_t d = latents.cols();
  std::map<std::uint32_t, std::pair<std::vector<double>, std::size_t>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto& [sum, count] = groups[labels[i]];
    sum.resize(d, 0.0);
    for (std::size_t j = 0; j < d; ++j) sum[j] += latents.at(i, j);
    ++count;
  }
  if (groups.size() < 2) throw std::invalid_argument("centroid_separation: at least two classes are required");
  std::map<std::uint32_t, std::vector<double>> centroids;
  for (auto& [label, group] : groups) {
    auto c = group.first;
    for (double& v : c) v /= static_cast<double>(group.second);
    centroids[label] = std::move(c);
  }
  auto distance = [d](const double* a, const double* b) {
    double s = 0;
    for (std::size_t j = 0; j < d; ++j) s += (a[j] - b[j]) * (a[j] - b[j]);
    return std::sqrt(s);
  };
  double inter = 0;
  std::size_t pairs = 0;
  for (auto a = centroids.begin(); a != centroids.end(); ++a) {
    for (auto b = std::next(a); b != centroids.end(); ++b, ++pairs) inter += distance(a->second.data(), b->second.data());
  }
  double intra = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) intra += distance(&latents.at(i, 0), centroids[labels[i]].data());
  inter /= static_cast<double>(pairs);
  intra /= static_cast<double>(labels.size());
  return inter / intra;
}

namespace {

Tensor<double> latents_around(const DiagGaussian<double>& q, const GenerationOptions& options) {
  const std::size_t d = q.dim();
  Tensor<double> z = repeat_rows(q.mean.value(), options.count);
  if (options.sample) {
    Engine engine = make_engine(options.seed, Stream::generation);
    const Tensor<double> eps = standard_normal<double>(options.count, d, engine);
    for (std::size_t r = 0; r < options.count; ++r) {
      for (std::size_t j = 0; j < d; ++j) {
        z.at(r, j) += options.zeta * std::exp(0.5 * q.log_var.value().at(0, j)) * eps.at(r, j);
      }
    }
  }
  return z;
}

Tensor<double> decode_mean(const Model<double>& model, Tensor<double> z, Modality modality,
                           const Tensor<double>* condition) {
  Tape64 tape;
  tape.set_recording(false);
  return observation_mean(generate(tape, model, tape.constant(std::move(z)), modality, condition));
}

Tensor<double> one_hot(std::size_t label, std::size_t classes) {
  if (label >= classes) throw std::invalid_argument("class index " + std::to_string(label) + " is out of range");
  Tensor<double> w(Shape{1, classes});
  w[label] = 1.0;
  return w;
}

}  // namespace

Tensor<double> generate_x_from_w(const Model<double>& model, std::size_t label, const GenerationOptions& options) {
  const Tensor<double> w = one_hot(label, model.config().w.dimension);
  if (model.variant() == Variant::vae) throw std::invalid_argument("generate from w: vae has no encoder for w");
  if (model.variant() == Variant::cvae) {
    Tensor<double> z(Shape{options.count, model.config().latent});
    if (options.sample) {
      Engine engine = make_engine(options.seed, Stream::generation);
      z = standard_normal<double>(options.count, model.config().latent, engine);
      for (auto& v : z.values()) v *= options.zeta;
    }
    return decode_mean(model, std::move(z), Modality::x, &w);
  }
  Tape64 tape;
  tape.set_recording(false);
  const DiagGaussian<double> q = encode(tape, model, static_cast<const Tensor<double>*>(nullptr), &w);
  return decode_mean(model, latents_around(q, options), Modality::x, nullptr);
}

Tensor<double> generate_w_from_x(const Model<double>& model, const Tensor<double>& x, const GenerationOptions& options) {
  if (!model.w_decoder()) {
    throw std::invalid_argument("generate from x: variant " + std::string(to_string(model.variant())) +
                                " has no w decoder");
  }
  require_row("generate from x", &x, model.config().x.dimension);
  Tape64 tape;
  tape.set_recording(false);
  const DiagGaussian<double> q = encode(tape, model, &x, static_cast<const Tensor<double>*>(nullptr));
  return decode_mean(model, latents_around(q, options), Modality::w, nullptr);
}

Tensor<double> generate_from_prior(const Model<double>& model, Modality modality, const GenerationOptions& options,
                                   const Tensor<double>* condition) {
  Engine engine = make_engine(options.seed, Stream::generation);
  return decode_mean(model, standard_normal<double>(options.count, model.config().latent, engine), modality,
                     condition);
}

double prototype_accuracy(const Tensor<double>& images, const Tensor<float>& prototypes, std::size_t label) {
  if (images.rows() == 0) return 0.0;
  std::size_t hits = 0;
  for (std::size_t r = 0; r < images.rows(); ++r) {
    const Tensor<float> row = images.row(r).cast<float>();
    hits += nearest_prototype(row.values(), prototypes) == label;
  }
  return static_cast<double>(hits) / static_cast<double>(images.rows());
}

}  // namespace jmvae
