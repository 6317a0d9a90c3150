// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any
// criterion fails. Tolerances are fixed here and printed with each result.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <map>
#include <numbers>
#include <string>
#include <thread>
#include <vector>

#include "fixtures.hpp"
#include "jmvae/checkpoint.hpp"
#include "jmvae/evaluation.hpp"
#include "jmvae/training.hpp"

using namespace jmvae;
using fixtures::uniform;

namespace {

// ---- pinned tolerances ----------------------------------------------------
constexpr double kGradTolerance = 1e-4;
constexpr int kGradConfigs = 20;
constexpr double kGradSeconds = 120;

constexpr int kKlPairs = 100;
constexpr std::size_t kKlSamples = 100000;
constexpr double kKlStandardErrors = 3.0;
constexpr double kKlSelfTolerance = 1e-12;

constexpr std::size_t kOracleK = 5000;
constexpr std::size_t kOracleNw = 5000;
constexpr double kOracleTolerance = 0.05;
constexpr double kOracleGap = 0.1;
constexpr double kOracleSeconds = 300;

constexpr int kJensenDraws = 100;
constexpr double kJensenSlack = 1e-6;
constexpr int kTighteningSeeds = 50;
const std::vector<std::size_t> kTighteningK = {1, 2, 5, 10, 20, 50, 100};

constexpr std::size_t kVariationSamples = 2000;
constexpr double kVariationStandardErrors = 3.0;

constexpr std::size_t kToyK = 100;
constexpr std::size_t kToyNw = 5000;
constexpr double kSingleGapMin = 20.0;
constexpr double kMultipleAgreement = 5.0;
constexpr double kGenerationGapMin = 0.30;
constexpr std::size_t kGenerationCount = 100;
constexpr double kToySeconds = 600;

// ---------------------------------------------------------------------------

using Clock = std::chrono::steady_clock;
double since(Clock::time_point t) { return std::chrono::duration<double>(Clock::now() - t).count(); }

int failures = 0;

void verdict(int id, const char* name, bool pass, const std::string& detail) {
  std::printf("%s %d %s: %s\n", pass ? "PASS" : "FAIL", id, name, detail.c_str());
  std::fflush(stdout);
  if (!pass) ++failures;
}

void note(const std::string& text) {
  std::printf("     %s\n", text.c_str());
  std::fflush(stdout);
}

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

unsigned threads() { return std::max(1u, std::thread::hardware_concurrency()); }

// ---- 1. gradient suite -----------------------------------------------------

using V = Var<double>;
using Op = std::function<V(Tape<double>&, V)>;

// max relative error of d/dx sum(op(x) * R) with a random R
double check_op(const Op& op, const Tensor<double>& point, Engine& engine) {
  Tape<double> probe;
  probe.set_recording(false);
  Tensor<double> r(op(probe, probe.constant(point)).shape());
  std::uniform_real_distribution<double> u(-1, 1);
  for (auto& v : r.values()) v = u(engine);
  return grad_check([&](Tape<double>& t, V x) { return sum(op(t, x) * t.constant(r)); }, point);
}

struct Worst {
  double error = 0;
  std::string where;
  std::size_t checks = 0;
  void add(const std::string& name, double e) {
    ++checks;
    if (e > error || !std::isfinite(e)) {
      error = std::isfinite(e) ? e : INFINITY;
      where = name;
    }
  }
};

ModelConfig random_model(Variant v, Engine& e) {
  std::uniform_int_distribution<std::size_t> width(2, 6), depth(1, 2), latent(1, 3), dim(2, 5);
  ModelConfig c;
  c.variant = v;
  const std::size_t dx = dim(e), dw = dim(e);
  c.x = {"x", dx, Family::bernoulli, {dx}};
  c.w = {"w", dw, Family::categorical, {dw}};
  c.encoder_hidden.assign(depth(e), 0);
  for (auto& h : c.encoder_hidden) h = width(e);
  c.decoder_hidden.assign(depth(e), 0);
  for (auto& h : c.decoder_hidden) h = width(e);
  c.shared_top = width(e);
  c.latent = latent(e);
  c.alpha = std::uniform_real_distribution<double>(0.01, 1.0)(e);
  c.leaky_slope = std::uniform_real_distribution<double>(0.0, 0.3)(e);
  c.fusion = std::bernoulli_distribution(0.5)(e) ? Fusion::sum : Fusion::concat;
  return c;
}

void criterion_gradients() {
  const auto start = Clock::now();
  Worst worst;
  std::uniform_int_distribution<std::size_t> rows_d(1, 4), cols_d(1, 5);

  for (int cfg = 0; cfg < kGradConfigs; ++cfg) {
    Engine e = make_engine(1000 + cfg, Stream::init);
    const std::size_t r = rows_d(e), c = cols_d(e), m = cols_d(e);
    const auto x = uniform(r, c, e, -2, 2);
    const auto other = uniform(r, c, e, -2, 2);
    const auto positive = uniform(r, c, e, 0.3, 2.0);
    const double s = std::uniform_real_distribution<double>(-2, 2)(e);
    const double slope = std::uniform_real_distribution<double>(0.0, 0.5)(e);
    auto k = [](const Tensor<double>& t) { return [t](Tape<double>& tape) { return tape.constant(t); }; };

    // binary elementwise ops in five broadcasting layouts
    const int layout = cfg % 5;
    Tensor<double> xb = layout == 4 ? uniform(1, c, e, -2, 2) : x;
    Tensor<double> ob = layout == 1   ? uniform(1, c, e, -2, 2)
                        : layout == 2 ? uniform(r, 1, e, -2, 2)
                        : layout == 3 ? Tensor<double>::scalar(std::uniform_real_distribution<double>(0.5, 2)(e))
                                      : other;
    Tensor<double> ob_pos = ob;
    for (auto& v : ob_pos.values()) v = std::abs(v) + 0.3;
    Tensor<double> xb_pos = xb;
    for (auto& v : xb_pos.values()) v = std::abs(v) + 0.3;
    auto O = k(ob), Op_ = k(ob_pos);

    const std::vector<std::tuple<std::string, Op, Tensor<double>>> cases = {
        {"matmul/lhs", [&, B = uniform(c, m, e)](Tape<double>& t, V v) { return matmul(v, t.constant(B)); }, x},
        {"matmul/rhs", [&, A = uniform(r, c, e)](Tape<double>& t, V v) { return matmul(t.constant(A), v); },
         uniform(c, m, e)},
        {"add/lhs", [&](Tape<double>& t, V v) { return v + O(t); }, xb},
        {"add/rhs", [&](Tape<double>& t, V v) { return k(xb)(t) + v; }, ob},
        {"sub/lhs", [&](Tape<double>& t, V v) { return v - O(t); }, xb},
        {"sub/rhs", [&](Tape<double>& t, V v) { return k(xb)(t) - v; }, ob},
        {"mul/lhs", [&](Tape<double>& t, V v) { return v * O(t); }, xb},
        {"mul/rhs", [&](Tape<double>& t, V v) { return k(xb)(t) * v; }, ob},
        {"div/lhs", [&](Tape<double>& t, V v) { return v / Op_(t); }, xb},
        {"div/rhs", [&](Tape<double>& t, V v) { return k(xb)(t) / v; }, ob_pos},
        {"div/rhs-broadcast-x", [&](Tape<double>& t, V v) { return v / k(ob_pos)(t); }, xb_pos},
        {"scale", [s](Tape<double>&, V v) { return scale(v, s); }, x},
        {"add_scalar", [s](Tape<double>&, V v) { return add_scalar(v, s); }, x},
        {"neg", [](Tape<double>&, V v) { return -v; }, x},
        {"square", [](Tape<double>&, V v) { return square(v); }, x},
        {"exp", [](Tape<double>&, V v) { return exp(v); }, x},
        {"log", [](Tape<double>&, V v) { return log(v); }, positive},
        {"sigmoid", [](Tape<double>&, V v) { return sigmoid(v); }, x},
        {"log_sigmoid", [](Tape<double>&, V v) { return log_sigmoid(v); }, x},
        {"softplus", [](Tape<double>&, V v) { return softplus(v); }, x},
        {"leaky_relu", [slope](Tape<double>&, V v) { return leaky_relu(v, slope); }, x},
        {"softmax", [](Tape<double>&, V v) { return softmax(v); }, x},
        {"log_softmax", [](Tape<double>&, V v) { return log_softmax(v); }, x},
        {"logsumexp_rows", [](Tape<double>&, V v) { return logsumexp_rows(v); }, x},
        {"sum_rows", [](Tape<double>&, V v) { return sum_rows(v); }, x},
        {"sum", [](Tape<double>&, V v) { return sum(v); }, x},
        {"mean", [](Tape<double>&, V v) { return mean(v); }, x},
        {"concat_cols/lhs", [&, B = uniform(r, m, e)](Tape<double>& t, V v) { return concat_cols(v, t.constant(B)); },
         x},
        {"concat_cols/rhs", [&, A = uniform(r, c, e)](Tape<double>& t, V v) { return concat_cols(t.constant(A), v); },
         uniform(r, m, e)},
    };
    for (const auto& [name, op, point] : cases) worst.add(name, check_op(op, point, e));

    // distributions, d = c latent dimensions, r rows
    const auto mu = uniform(r, c, e, -2, 2), lv = uniform(r, c, e, -1.5, 1.5);
    const auto mu2 = uniform(r, c, e, -2, 2), lv2 = uniform(r, c, e, -1.5, 1.5);
    const auto noise = standard_normal<double>(r, c, e);
    const auto z = uniform(r, c, e, -3, 3);
    const auto mu_row = uniform(1, c, e), lv_row = uniform(1, c, e);
    auto G = [](Tape<double>& t, const Tensor<double>& a, const Tensor<double>& b) {
      return DiagGaussian<double>(t.constant(a), t.constant(b));
    };
    const std::vector<std::tuple<std::string, Op, Tensor<double>>> dist = {
        {"rsample/mean", [&](Tape<double>& t, V v) { return rsample<double>({v, t.constant(lv)}, t.constant(noise)); },
         mu},
        {"rsample/log_var",
         [&](Tape<double>& t, V v) { return rsample<double>({t.constant(mu), v}, t.constant(noise)); }, lv},
        {"rsample/broadcast",
         [&](Tape<double>& t, V v) { return rsample<double>({v, t.constant(lv_row)}, t.constant(noise)); }, mu_row},
        {"kl_std/mean", [&](Tape<double>& t, V v) { return kl_to_standard_normal<double>({v, t.constant(lv)}); }, mu},
        {"kl_std/log_var", [&](Tape<double>& t, V v) { return kl_to_standard_normal<double>({t.constant(mu), v}); },
         lv},
        {"kl/mean1", [&](Tape<double>& t, V v) { return kl_between<double>({v, t.constant(lv)}, G(t, mu2, lv2)); }, mu},
        {"kl/log_var1",
         [&](Tape<double>& t, V v) { return kl_between<double>({t.constant(mu), v}, G(t, mu2, lv2)); }, lv},
        {"kl/mean2", [&](Tape<double>& t, V v) { return kl_between<double>(G(t, mu, lv), {v, t.constant(lv2)}); },
         mu2},
        {"kl/log_var2",
         [&](Tape<double>& t, V v) { return kl_between<double>(G(t, mu, lv), {t.constant(mu2), v}); }, lv2},
        {"log_density/mean", [&](Tape<double>& t, V v) { return log_density<double>({v, t.constant(lv)}, t.constant(z)); },
         mu},
        {"log_density/log_var",
         [&](Tape<double>& t, V v) { return log_density<double>({t.constant(mu), v}, t.constant(z)); }, lv},
        {"log_density/z", [&](Tape<double>& t, V v) { return log_density(G(t, mu, lv), v); }, z},
        {"std_normal_log_density", [](Tape<double>&, V v) { return standard_normal_log_density(v); }, z},
        {"log_lik/bernoulli",
         [&, obs = fixtures::random_binary<double>(r, c, e)](Tape<double>&, V v) {
           return log_likelihood<double>({Family::bernoulli, v}, obs);
         },
         uniform(r, c, e, -5, 5)},
        {"log_lik/categorical",
         [&, obs = fixtures::random_one_hot<double>(r, c, e)](Tape<double>&, V v) {
           return log_likelihood<double>({Family::categorical, v}, obs);
         },
         uniform(r, c, e, -5, 5)},
        {"log_lik/gaussian",
         [&, obs = uniform(r, c, e, -2, 2)](Tape<double>&, V v) {
           return log_likelihood<double>({Family::gaussian_unit, v}, obs);
         },
         uniform(r, c, e, -2, 2)},
    };
    for (const auto& [name, op, point] : dist) worst.add(name, check_op(op, point, e));

    // full objectives
    for (Variant v : {Variant::vae, Variant::jmvae_zero, Variant::jmvae_kl, Variant::cvae}) {
      const ModelConfig mc = random_model(v, e);
      Model<double> model(mc, 5000 + cfg);
      // zero biases put leaky units exactly on the kink for zero inputs
      for (auto* p : model.parameters()) {
        for (auto& val : p->value.values()) val += std::normal_distribution<double>(0, 0.1)(e);
      }
      const std::size_t b = rows_d(e);
      const auto xs = fixtures::random_binary<double>(b, mc.x.dimension, e);
      const auto ws = fixtures::random_one_hot<double>(b, mc.w.dimension, e);
      const auto eps = standard_normal<double>(b, mc.latent, e);
      ObjectiveOptions<double> opts;
      opts.beta = std::uniform_real_distribution<double>(0.05, 1.0)(e);
      auto params = model.parameters();
      const std::string name = std::string("objective/") + std::string(to_string(v));
      worst.add(name, grad_check_parameters(
                          [&](Tape<double>& t) {
                            switch (v) {
                              case Variant::vae: return elbo_vae(t, model, xs, eps, opts).value;
                              case Variant::jmvae_zero: return elbo_jm(t, model, xs, ws, eps, opts).value;
                              case Variant::jmvae_kl: return objective_jmkl(t, model, xs, ws, eps, opts).value;
                              case Variant::cvae: return elbo_cvae(t, model, xs, ws, eps, opts).value;
                            }
                            throw std::logic_error("unreachable");
                          },
                          params));
    }
  }
  const double seconds = since(start);
  verdict(1, "gradient suite", worst.error < kGradTolerance && seconds < kGradSeconds,
          fmt("%zu checks over %d configurations, max rel err %.2e at %s (limit %.0e), %.1fs (limit %.0fs)",
              worst.checks, kGradConfigs, worst.error, worst.where.c_str(), kGradTolerance, seconds, kGradSeconds));
}

// ---- 2. distribution identities ------------------------------------------

void criterion_kl() {
  int within = 0;
  double worst_z = 0, worst_self = 0;
  for (int i = 0; i < kKlPairs; ++i) {
    Engine e = make_engine(2000 + i, Stream::init);
    const std::size_t d = std::uniform_int_distribution<std::size_t>(1, 4)(e);
    Tape<double> t;
    t.set_recording(false);
    DiagGaussian<double> q1(t.constant(uniform(1, d, e, -2, 2)), t.constant(uniform(1, d, e, -1.5, 1.5)));
    DiagGaussian<double> q2(t.constant(uniform(1, d, e, -2, 2)), t.constant(uniform(1, d, e, -1.5, 1.5)));
    const V z = rsample(q1, t.constant(standard_normal<double>(kKlSamples, d, e)));
    const auto ratio = (log_density(q1, z) - log_density(q2, z)).value();
    double s = 0, s2 = 0;
    for (double v : ratio.values()) s += v, s2 += v * v;
    const double n = static_cast<double>(kKlSamples);
    const double mc = s / n, se = std::sqrt((s2 / n - mc * mc) / (n - 1));
    const double exact = kl_between(q1, q2).value().item();
    const double zscore = std::abs(mc - exact) / se;
    worst_z = std::max(worst_z, zscore);
    within += zscore <= kKlStandardErrors;
    worst_self = std::max({worst_self, std::abs(kl_between(q1, q1).value().item()),
                           std::abs(kl_between(q2, q2).value().item())});
    DiagGaussian<double> prior(t.constant(Tensor<double>(Shape{1, d})), t.constant(Tensor<double>(Shape{1, d})));
    worst_self = std::max(worst_self, std::abs(kl_to_standard_normal(prior).value().item()));
  }
  verdict(2, "distribution identities", within == kKlPairs && worst_self <= kKlSelfTolerance,
          fmt("%d/%d pairs within %.0f SE (worst %.2f SE, %zu samples); max |KL(q||q)| %.1e (limit %.0e)", within,
              kKlPairs, kKlStandardErrors, worst_z, kKlSamples, worst_self, kKlSelfTolerance));
}

// ---- shared tiny model -----------------------------------------------------

struct Tiny {
  Model<double> model{fixtures::tiny_config(Variant::jmvae_kl), 1};
  BimodalDataset test;
  std::vector<std::pair<Tensor<double>, Tensor<double>>> pairs;  // distinct test pairs
  double seconds = 0;
};

const Tiny& tiny() {
  static const Tiny t = [] {
    Tiny out;
    const auto start = Clock::now();
    auto [train_set, test_set] = fixtures::tiny_split();
    TrainConfig tc;
    tc.epochs = 200;
    tc.batch_size = 100;
    tc.warmup_epochs = 10;
    tc.seed = 1;
    tc.precision = Precision::f64;
    train<double>(out.model, train_set, tc);
    out.test = test_set;
    std::map<std::vector<float>, bool> seen;
    for (std::size_t i = 0; i < test_set.size(); ++i) {
      const Tensor<float> row = test_set.x.row(i);
      std::vector<float> key(row.values().begin(), row.values().end());
      key.push_back(static_cast<float>(test_set.labels[i]));
      if (seen.emplace(key, true).second) {
        out.pairs.emplace_back(test_set.x.row(i).cast<double>(), test_set.w.row(i).cast<double>());
      }
    }
    out.seconds = since(start);
    return out;
  }();
  return t;
}

// ---- 3. oracle agreement ---------------------------------------------------

void criterion_oracle() {
  const auto start = Clock::now();
  const Tiny& t = tiny();
  const Model<double>& m = t.model;
  double err_x = 0, err_w = 0, err_w_prior = 0, err_cond = 0, err_joint = 0, gap_cond = 0, gap_joint = 0;
  std::uint64_t stream = 0;
  for (const auto& [x, w] : t.pairs) {
    const double qx = quadrature_oracle(m, Target::marginal_x, &x, nullptr);
    const double qw = quadrature_oracle(m, Target::marginal_w, nullptr, &w);
    const double qc = quadrature_oracle(m, Target::conditional_x_given_w, &x, &w);
    const double qj = quadrature_oracle(m, Target::joint_xw, &x, &w);
    auto bound = [&](Target target, EncoderPath path, double lpw = 0.0) {
      Engine e = make_engine(3, Stream::evaluation, ++stream);
      return iw_bound(m, {target, path, kOracleK, kOracleNw}, x, &w, e, lpw);
    };
    Engine prior = make_engine(3, Stream::prior, stream);
    const double lpw = log_p_w(m, w, kOracleNw, prior);
    err_x = std::max(err_x, std::abs(bound(Target::marginal_x, EncoderPath::single_x) - qx));
    err_w = std::max(err_w, std::abs(bound(Target::marginal_w, EncoderPath::single_w) - qw));
    err_w_prior = std::max(err_w_prior, std::abs(lpw - qw));
    const double cm = bound(Target::conditional_x_given_w, EncoderPath::multiple, lpw);
    const double cs = bound(Target::conditional_x_given_w, EncoderPath::single_w, lpw);
    err_cond = std::max(err_cond, std::abs(cm - qc));
    gap_cond = std::max(gap_cond, std::abs(cm - cs));
    const double jm = bound(Target::joint_xw, EncoderPath::multiple);
    const double js = bound(Target::joint_xw, EncoderPath::single_w);
    err_joint = std::max(err_joint, std::abs(jm - qj));
    gap_joint = std::max(gap_joint, std::abs(jm - js));
  }
  const double seconds = since(start);
  const double worst_err = std::max({err_x, err_w, err_w_prior, err_cond, err_joint});
  const double worst_gap = std::max(gap_cond, gap_joint);
  note(fmt("tiny jmvae-kl trained in %.1fs; %zu distinct test pairs, k=%zu, N_w=%zu", t.seconds, t.pairs.size(),
           kOracleK, kOracleNw));
  note(fmt("max |bound - quadrature|: p(x) %.4f  p(w) %.4f (prior MC %.4f)  p(x|w) %.4f  p(x,w) %.4f", err_x, err_w,
           err_w_prior, err_cond, err_joint));
  verdict(3, "oracle agreement",
          worst_err < kOracleTolerance && worst_gap < kOracleGap && seconds < kOracleSeconds,
          fmt("max error %.4f nats (limit %.2f), single/multiple gap %.4f conditional, %.4f joint (limit %.1f), "
              "%.1fs (limit %.0fs)",
              worst_err, kOracleTolerance, gap_cond, gap_joint, kOracleGap, seconds, kOracleSeconds));
}

// ---- 4. Jensen and tightening ---------------------------------------------

// E_q[log p(target | z)] - KL(q || p) for a 1-D latent, by trapezoid over the
// standardised noise on [-10, 10].
double exact_elbo(const Model<double>& m, Target target, EncoderPath path, const Tensor<double>& x,
                  const Tensor<double>& w) {
  constexpr std::size_t n = 20001;
  Tape<double> t;
  t.set_recording(false);
  const DiagGaussian<double> q = path == EncoderPath::single_x ? encode<double>(t, m, &x, nullptr) : encode(t, m, &x, &w);
  const double mu = q.mean.value().item(), sigma = std::exp(0.5 * q.log_var.value().item());
  Tensor<double> z(Shape{n, 1});
  std::vector<double> weight(n);
  const double h = 20.0 / (n - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const double eps = -10.0 + h * static_cast<double>(i);
    z[i] = mu + sigma * eps;
    weight[i] = (i == 0 || i + 1 == n ? h / 2 : h) * std::exp(-0.5 * eps * eps) / std::sqrt(2 * std::numbers::pi);
  }
  const V zv = t.constant(z);
  const Tensor<double> xs = repeat_rows(x, n), ws = repeat_rows(w, n);
  V ll;
  if (m.variant() == Variant::cvae) {
    ll = log_likelihood(generate(t, m, zv, Modality::x, &ws), xs);
  } else if (target == Target::marginal_x) {
    ll = log_likelihood(generate(t, m, zv, Modality::x), xs);
  } else {
    ll = log_likelihood(generate(t, m, zv, Modality::x), xs) + log_likelihood(generate(t, m, zv, Modality::w), ws);
  }
  double expectation = 0;
  for (std::size_t i = 0; i < n; ++i) expectation += weight[i] * ll.value()[i];
  return expectation - kl_to_standard_normal(q).value().item();
}

void criterion_jensen() {
  double worst_excess = -INFINITY;
  int raw_exceed = 0;
  const Variant variants[] = {Variant::vae, Variant::jmvae_zero, Variant::cvae};
  for (int i = 0; i < kJensenDraws; ++i) {
    const Variant v = variants[i % 3];
    Model<double> m(fixtures::tiny_config(v), 7000 + i);
    Engine e = make_engine(7000 + i, Stream::noise);
    // spread the draws beyond the default initialisation scale
    const double spread = std::uniform_real_distribution<double>(0.5, 3.0)(e);
    for (auto* p : m.parameters()) {
      for (auto& val : p->value.values()) val = val * spread + std::normal_distribution<double>(0, 0.3)(e);
    }
    const auto x = fixtures::random_binary<double>(1, 4, e);
    const auto w = fixtures::random_one_hot<double>(1, 2, e);
    const Target target = v == Variant::vae          ? Target::marginal_x
                          : v == Variant::jmvae_zero ? Target::joint_xw
                                                     : Target::conditional_x_given_w;
    const EncoderPath path = v == Variant::vae ? EncoderPath::single_x : EncoderPath::multiple;
    const double truth = quadrature_oracle(m, target, &x, &w);
    worst_excess = std::max(worst_excess, exact_elbo(m, target, path, x, w) - truth);
    Engine draw = make_engine(7000 + i, Stream::evaluation);
    raw_exceed += iw_bound(m, {target, path, 1}, x, &w, draw) > truth + kJensenSlack;
  }

  // tightening: mean over seeds at k=100 against k=1, nested noise; the
  // intermediate k are printed only
  const Tiny& t = tiny();
  bool tightens = true;
  const std::vector<std::tuple<const Model<double>*, Target, EncoderPath, std::size_t>> setups = {
      {&t.model, Target::marginal_x, EncoderPath::single_x, 0},
      {&t.model, Target::joint_xw, EncoderPath::single_w, 1},
      {&t.model, Target::conditional_x_given_w, EncoderPath::multiple, 2},
  };
  for (const auto& [model, target, path, pair] : setups) {
    const auto& [x, w] = t.pairs[pair % t.pairs.size()];
    Engine prior = make_engine(4, Stream::prior);
    const double lpw = log_p_w(*model, w, kOracleNw, prior);
    double first = 0, last = 0;
    std::string row = std::string(to_string(target)) + "/" + std::string(to_string(path)) + ":";
    for (std::size_t k : kTighteningK) {
      double s = 0;
      for (int seed = 0; seed < kTighteningSeeds; ++seed) {
        Engine e = make_engine(seed, Stream::evaluation);
        s += iw_bound(*model, {target, path, k, kOracleNw}, x, &w, e, lpw);
      }
      const double mean = s / kTighteningSeeds;
      if (k == kTighteningK.front()) first = mean;
      last = mean;
      row += fmt(" %.4f", mean);
    }
    tightens = tightens && last >= first;
    note(row);
  }
  note(fmt("raw one-sample estimates above the truth: %d/%d (a single draw may exceed it)", raw_exceed, kJensenDraws));
  verdict(4, "jensen and tightening", worst_excess <= kJensenSlack && tightens,
          fmt("max (ELBO - log p) over %d draws %.3e (limit %.0e); mean bound over %d seeds at k=%zu >= k=%zu "
              "on 3 targets: %s",
              kJensenDraws, worst_excess, kJensenSlack, kTighteningSeeds, kTighteningK.back(), kTighteningK.front(),
              tightens ? "yes" : "no"));
}

// ---- 5. variation-of-information bound -------------------------------------

void criterion_variation() {
  const Tiny& t = tiny();
  Model<double> m = t.model;
  m.set_alpha(1.0);
  int ok = 0;
  double worst_margin = INFINITY;
  std::map<std::pair<std::vector<double>, std::vector<double>>, std::pair<double, double>> cache;
  for (std::size_t i = 0; i < t.test.size(); ++i) {
    const Tensor<double> x = t.test.x.row(i).cast<double>(), w = t.test.w.row(i).cast<double>();
    const auto key = std::make_pair(std::vector<double>(x.values().begin(), x.values().end()),
                                    std::vector<double>(w.values().begin(), w.values().end()));
    auto it = cache.find(key);
    if (it == cache.end()) {
      const double log_x_given_w = quadrature_oracle(m, Target::conditional_x_given_w, &x, &w);
      const double log_w_given_x =
          quadrature_oracle(m, Target::joint_xw, &x, &w) - quadrature_oracle(m, Target::marginal_x, &x, nullptr);
      Engine e = make_engine(5, Stream::noise, i);
      Tape<double> tape;
      tape.set_recording(false);
      const auto obj = objective_jmkl(tape, m, repeat_rows(x, kVariationSamples), repeat_rows(w, kVariationSamples),
                                      standard_normal<double>(kVariationSamples, 1, e));
      const auto& v = obj.per_datum.value();
      double s = 0, s2 = 0;
      for (double a : v.values()) s += a, s2 += a * a;
      const double n = static_cast<double>(kVariationSamples);
      const double mc = s / n, se = std::sqrt((s2 / n - mc * mc) / (n - 1));
      it = cache.emplace(key, std::make_pair(log_x_given_w + log_w_given_x, mc - kVariationStandardErrors * se)).first;
    }
    const auto [truth, lower] = it->second;
    ok += truth >= lower;
    worst_margin = std::min(worst_margin, truth - lower);
  }
  verdict(5, "variation-of-information bound", ok == static_cast<int>(t.test.size()),
          fmt("%d/%zu test pairs satisfy log p(x|w) + log p(w|x) >= L(alpha=1) - %.0f SE (%zu samples); smallest "
              "margin %.4f nats",
              ok, t.test.size(), kVariationStandardErrors, kVariationSamples, worst_margin));
}

// ---- toy runs --------------------------------------------------------------

TrainConfig toy_train_config() {
  TrainConfig tc;
  tc.epochs = 20;
  tc.batch_size = 100;
  tc.learning_rate = 1e-3;
  tc.warmup_epochs = 5;
  tc.seed = 1;
  tc.precision = Precision::f32;
  return tc;
}

struct ToyRun {
  Model<float> model;
  std::vector<EpochMetrics> history;
  double seconds;
};

ToyRun train_toy(const ModelConfig& config, const BimodalDataset& data) {
  const auto start = Clock::now();
  ToyRun run{Model<float>(config, toy_train_config().seed), {}, 0};
  run.history = train<float>(run.model, data, toy_train_config());
  run.seconds = since(start);
  return run;
}

const std::pair<BimodalDataset, BimodalDataset>& toy_data() {
  static const auto data = fixtures::toy_split();
  return data;
}

// ---- 6. conditional bound trends -------------------------------------------

const ToyRun* toy_kl_run = nullptr;

void criterion_toy(const ToyRun& zero, const ToyRun& kl, double train_seconds) {
  const auto start = Clock::now();
  const auto& test = toy_data().second;
  const Model<double> z64 = model_cast<double>(zero.model), k64 = model_cast<double>(kl.model);
  auto bound = [&](const Model<double>& m, EncoderPath path) {
    return evaluate(m, test, {Target::conditional_x_given_w, path, kToyK, kToyNw}, 11, threads()).mean;
  };
  const double zero_single = bound(z64, EncoderPath::single_w), kl_single = bound(k64, EncoderPath::single_w);
  const double zero_multi = bound(z64, EncoderPath::multiple), kl_multi = bound(k64, EncoderPath::multiple);

  const Tensor<float> prototypes = toy_prototypes(10, 64);
  auto accuracy = [&](const Model<double>& m) {
    double total = 0;
    for (std::size_t c = 0; c < 10; ++c) {
      const auto images = generate_x_from_w(m, c, {kGenerationCount, true, 1.0, 100 + c});
      total += prototype_accuracy(images, prototypes, c);
    }
    return total / 10;
  };
  const double acc_zero = accuracy(z64), acc_kl = accuracy(k64);
  const double seconds = train_seconds + since(start);

  const bool a = kl_single - zero_single > kSingleGapMin;
  const bool b = std::abs(kl_multi - zero_multi) < kMultipleAgreement;
  const bool c = acc_kl - acc_zero >= kGenerationGapMin;
  note(fmt("6a %s: single-w log p(x|w) kl %.2f vs zero %.2f, gap %.2f nats (need > %.0f)", a ? "pass" : "fail",
           kl_single, zero_single, kl_single - zero_single, kSingleGapMin));
  note(fmt("6b %s: multiple log p(x|w) kl %.2f vs zero %.2f, |diff| %.2f nats (need < %.0f)", b ? "pass" : "fail",
           kl_multi, zero_multi, std::abs(kl_multi - zero_multi), kMultipleAgreement));
  note(fmt("6c %s: nearest-prototype accuracy of x ~ p(x|w) kl %.1f%% vs zero %.1f%% (need >= %.0f pp)",
           c ? "pass" : "fail", 100 * acc_kl, 100 * acc_zero, 100 * kGenerationGapMin));
  verdict(6, "toy conditional-bound trends", a && b && c && seconds < kToySeconds,
          fmt("6a %s, 6b %s, 6c %s; k=%zu, N_w=%zu, %zu test pairs, %.1fs (limit %.0fs)", a ? "pass" : "FAIL",
              b ? "pass" : "FAIL", c ? "pass" : "FAIL", kToyK, kToyNw, test.size(), seconds, kToySeconds));
}

// ---- 7. warm-up and alpha = 0 ----------------------------------------------

void criterion_warmup(const ToyRun& kl) {
  bool ok = true;
  for (std::size_t nt : {1, 2, 5, 7, 200}) {
    double prev = 0;
    for (std::size_t e = 0; e < nt + 20; ++e) {
      const double b = warmup_beta(e, nt);
      ok = ok && b >= prev && b > 0 && b <= 1.0;
      if (e >= nt) ok = ok && b == 1.0;
      prev = b;
    }
  }
  bool history = true;
  for (const auto& row : kl.history) history = history && row.parts.beta == warmup_beta(row.epoch, 5);

  bool bitwise = true;
  for (int i = 0; i < 5; ++i) {
    Engine e = make_engine(8000 + i, Stream::init);
    auto c = random_model(Variant::jmvae_kl, e);
    c.alpha = 0.0;
    Model<double> m(c, i);
    Model<float> mf = model_cast<float>(m);
    const auto x = fixtures::random_binary<double>(6, c.x.dimension, e);
    const auto w = fixtures::random_one_hot<double>(6, c.w.dimension, e);
    const auto eps = standard_normal<double>(6, c.latent, e);
    Tape<double> t1, t2;
    const auto a = objective_jmkl(t1, m, x, w, eps, {0.3});
    const auto b = elbo_jm(t2, m, x, w, eps, {0.3});
    bitwise = bitwise && a.per_datum.value() == b.per_datum.value() && a.parts.total == b.parts.total;
    Tape<float> f1, f2;
    const auto af = objective_jmkl(f1, mf, x.cast<float>(), w.cast<float>(), eps.cast<float>(), {0.3});
    const auto bf = elbo_jm(f2, mf, x.cast<float>(), w.cast<float>(), eps.cast<float>(), {0.3});
    bitwise = bitwise && af.per_datum.value() == bf.per_datum.value();
  }
  verdict(7, "warm-up and alpha = 0", ok && history && bitwise,
          fmt("beta schedule monotone and exactly 1 from N_t on: %s; training log matches: %s; alpha=0 objective "
              "bitwise equal to the joint bound (f64 and f32): %s",
              ok ? "yes" : "no", history ? "yes" : "no", bitwise ? "yes" : "no"));
}

// ---- 8. determinism and serialisation --------------------------------------

void criterion_determinism(const ToyRun& kl) {
  const auto& train_set = toy_data().first;
  TrainConfig tc = toy_train_config();
  tc.epochs = 1;
  tc.precision = Precision::f64;
  const auto config = fixtures::toy_config(Variant::jmvae_kl);
  Model<double> a(config, tc.seed), b(config, tc.seed);
  const auto ha = train<double>(a, train_set, tc);
  const auto hb = train<double>(b, train_set, tc);
  const auto& pa = ha[0].parts;
  const auto& pb = hb[0].parts;
  const bool metrics = pa.total == pb.total && pa.kl_prior == pb.kl_prior && pa.recon_x == pb.recon_x &&
                       pa.recon_w == pb.recon_w && pa.kl_single_x == pb.kl_single_x &&
                       pa.kl_single_w == pb.kl_single_w && pa.beta == pb.beta;
  bool weights = true;
  const auto wa = a.parameters(), wb = b.parameters();
  for (std::size_t i = 0; i < wa.size(); ++i) weights = weights && wa[i]->value == wb[i]->value;

  const auto bytes = serialize(kl.model, {1, 20});
  const auto loaded = deserialize(bytes);
  const bool resave = serialize(loaded.model, loaded.info) == bytes;
  const BoundSpec spec{Target::conditional_x_given_w, EncoderPath::multiple, kToyK, kToyNw};
  const auto& test = toy_data().second;
  const auto before = evaluate(model_cast<double>(kl.model), test, spec, 13, threads());
  const auto after = evaluate(model_cast<double>(loaded.model), test, spec, 13, threads());
  const bool same_eval = before.values == after.values;
  verdict(8, "determinism and serialisation", metrics && weights && resave && same_eval,
          fmt("64-bit epoch-1 metrics bitwise equal: %s (objective %.17g), weights equal: %s; 32-bit checkpoint "
              "round trip keeps k=%zu bounds exactly: %s (mean %.6f), re-save byte-identical: %s",
              metrics ? "yes" : "no", pa.total, weights ? "yes" : "no", kToyK, same_eval ? "yes" : "no", after.mean,
              resave ? "yes" : "no"));
}

// ---- 9. latent class separation ---------------------------------------------

void criterion_separation() {
  const auto& [train_set, test_set] = toy_data();
  const ToyRun jm = train_toy(fixtures::toy_config(Variant::jmvae_kl, 2), train_set);
  const ToyRun vae = train_toy(fixtures::toy_config(Variant::vae, 2), train_set);
  const double s_jm =
      centroid_separation(latent_means(model_cast<double>(jm.model), test_set, EncoderPath::multiple), test_set.labels);
  const double s_vae =
      centroid_separation(latent_means(model_cast<double>(vae.model), test_set, EncoderPath::single_x), test_set.labels);
  verdict(9, "latent class separation", s_jm > s_vae,
          fmt("2-D latent, inter/intra centroid ratio: jmvae-kl %.3f vs vae %.3f (same seed, %zu test points)", s_jm,
              s_vae, test_set.size()));
}

}  // namespace

int main() {
  const auto start = Clock::now();
  criterion_gradients();
  criterion_kl();
  criterion_oracle();
  criterion_jensen();
  criterion_variation();

  const auto& train_set = toy_data().first;
  const auto toy_start = Clock::now();
  const ToyRun zero = train_toy(fixtures::toy_config(Variant::jmvae_zero), train_set);
  const ToyRun kl = train_toy(fixtures::toy_config(Variant::jmvae_kl), train_set);
  note(fmt("toy runs: jmvae-zero %.1fs, jmvae-kl %.1fs (20 epochs, %zu training pairs)", zero.seconds, kl.seconds,
           train_set.size()));
  criterion_toy(zero, kl, since(toy_start));
  criterion_warmup(kl);
  criterion_determinism(kl);
  criterion_separation();

  std::printf("%d of 9 criteria failed (%.1fs)\n", failures, since(start));
  return failures == 0 ? 0 : 1;
}
