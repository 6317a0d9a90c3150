#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include <thread>

#include "jmvae/checkpoint.hpp"
#include "jmvae/evaluation.hpp"
#include "jmvae/training.hpp"

namespace py = pybind11;
using namespace jmvae;

namespace {

template <typename T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
  py::array_t<T> out({t.rows(), t.cols()});
  std::copy(t.values().begin(), t.values().end(), out.mutable_data());
  return out;
}

template <typename T>
py::array_t<T> to_numpy(const std::vector<T>& v) {
  py::array_t<T> out(std::vector<py::ssize_t>{static_cast<py::ssize_t>(v.size())});
  std::copy(v.begin(), v.end(), out.mutable_data());
  return out;
}

template <typename T>
Tensor<T> from_numpy(const py::array_t<T, py::array::c_style | py::array::forcecast>& a) {
  if (a.ndim() == 1) {
    Tensor<T> t(Shape{1, static_cast<std::size_t>(a.shape(0))});
    std::copy(a.data(), a.data() + a.size(), t.values().begin());
    return t;
  }
  if (a.ndim() != 2) throw std::invalid_argument("expected a 1-D or 2-D array");
  Tensor<T> t(Shape{static_cast<std::size_t>(a.shape(0)), static_cast<std::size_t>(a.shape(1))});
  std::copy(a.data(), a.data() + a.size(), t.values().begin());
  return t;
}

// Python-side model: float weights as stored in checkpoints, promoted to
// double for evaluation.
struct PyModel {
  Model<float> model;
  CheckpointInfo info;

  Model<double> f64() const { return model_cast<double>(model); }
};

PyModel make_model(const std::string& variant, const BimodalDataset& data, std::size_t latent,
                   std::vector<std::size_t> encoder_hidden, std::size_t shared_top,
                   std::vector<std::size_t> decoder_hidden, double alpha, double leaky_slope,
                   const std::string& fusion, std::uint64_t seed) {
  ModelConfig c;
  c.variant = parse_variant(variant);
  c.x = data.x_spec;
  c.w = data.w_spec;
  c.latent = latent;
  c.encoder_hidden = std::move(encoder_hidden);
  c.shared_top = shared_top;
  c.decoder_hidden = std::move(decoder_hidden);
  c.alpha = alpha;
  c.leaky_slope = leaky_slope;
  c.fusion = parse_fusion(fusion);
  validate(c);
  return {Model<float>(c, seed), {seed, 0}};
}

py::list train_model(PyModel& m, const BimodalDataset& data, std::size_t epochs, std::size_t batch_size,
                     double learning_rate, std::size_t warmup_epochs, std::uint64_t seed, const std::string& precision) {
  TrainConfig tc;
  tc.epochs = epochs;
  tc.batch_size = batch_size;
  tc.learning_rate = learning_rate;
  tc.warmup_epochs = warmup_epochs;
  tc.seed = seed;
  if (precision == "f64") {
    tc.precision = Precision::f64;
  } else if (precision != "f32") {
    throw std::invalid_argument("precision must be f32 or f64, got '" + precision + "'");
  }
  std::vector<EpochMetrics> history;
  {
    py::gil_scoped_release release;
    if (tc.precision == Precision::f64) {
      Model<double> d = m.f64();
      history = train<double>(d, data, tc);
      m.model = model_cast<float>(d);
    } else {
      history = train<float>(m.model, data, tc);
    }
  }
  m.info = {seed, m.info.epoch + epochs};
  py::list out;
  for (const auto& row : history) {
    py::dict d;
    d["epoch"] = row.epoch;
    d["beta"] = row.parts.beta;
    d["total"] = row.parts.total;
    d["kl_prior"] = row.parts.kl_prior;
    d["recon_x"] = row.parts.recon_x;
    d["recon_w"] = row.parts.recon_w;
    d["kl_sx"] = row.parts.kl_single_x;
    d["kl_sw"] = row.parts.kl_single_w;
    d["seconds"] = row.seconds;
    out.append(d);
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_jmvae, mod) {
  mod.doc() = "Joint multimodal VAEs on a small reverse-mode autodiff core";

  py::register_exception<CheckpointError>(mod, "CheckpointError", PyExc_RuntimeError);
  py::register_exception<TrainingError>(mod, "TrainingError", PyExc_RuntimeError);
  py::register_exception<IdxError>(mod, "IdxError", PyExc_RuntimeError);

  py::class_<BimodalDataset>(mod, "Dataset")
      .def_property_readonly("x", [](const BimodalDataset& d) { return to_numpy(d.x); })
      .def_property_readonly("w", [](const BimodalDataset& d) { return to_numpy(d.w); })
      .def_property_readonly("labels", [](const BimodalDataset& d) {
        return to_numpy(std::vector<std::int64_t>(d.labels.begin(), d.labels.end()));
      })
      .def_readonly("split", &BimodalDataset::split)
      .def("__len__", &BimodalDataset::size);

  mod.def(
      "make_toy",
      [](std::size_t classes, std::size_t dim, std::size_t per_class, double noise, std::uint64_t seed) {
        return make_toy({classes, dim, per_class, noise, seed});
      },
      py::arg("classes") = 10, py::arg("dim") = 64, py::arg("per_class") = 500, py::arg("noise") = 0.05,
      py::arg("seed") = 0);
  mod.def("split", &split, py::arg("data"), py::arg("train_fraction"), py::arg("seed") = 0);
  mod.def(
      "load_idx", [](const std::filesystem::path& images, const std::filesystem::path& labels) {
        return load_idx(images, labels);
      },
      py::arg("images"), py::arg("labels"));
  mod.def("warmup_beta", &warmup_beta, py::arg("epoch"), py::arg("warmup_epochs"));
  mod.def(
      "centroid_separation",
      [](const py::array_t<double, py::array::c_style | py::array::forcecast>& latents,
         const std::vector<std::uint32_t>& labels) { return centroid_separation(from_numpy(latents), labels); },
      py::arg("latents"), py::arg("labels"));

  py::class_<PyModel>(mod, "Model")
      .def(py::init(&make_model), py::arg("variant"), py::arg("data"), py::arg("latent") = 16,
           py::arg("encoder_hidden") = std::vector<std::size_t>{128, 128}, py::arg("shared_top") = 64,
           py::arg("decoder_hidden") = std::vector<std::size_t>{128, 128, 128}, py::arg("alpha") = 0.1,
           py::arg("leaky_slope") = 0.01, py::arg("fusion") = "sum", py::arg("seed") = 0)
      .def_static(
          "load", [](const std::filesystem::path& p) {
            auto ck = load(p);
            return PyModel{std::move(ck.model), ck.info};
          },
          py::arg("path"))
      .def("save", [](const PyModel& m, const std::filesystem::path& p) { save(m.model, p, m.info); }, py::arg("path"))
      .def_property_readonly("variant", [](const PyModel& m) { return std::string(to_string(m.model.variant())); })
      .def_property_readonly("latent", [](const PyModel& m) { return m.model.config().latent; })
      .def_property_readonly("parameter_count", [](const PyModel& m) { return m.model.parameter_count(); })
      .def_property_readonly("epoch", [](const PyModel& m) { return m.info.epoch; })
      .def("train", &train_model, py::arg("data"), py::arg("epochs") = 20, py::arg("batch_size") = 100,
           py::arg("learning_rate") = 1e-3, py::arg("warmup_epochs") = 1, py::arg("seed") = 0,
           py::arg("precision") = "f32")
      .def(
          "evaluate",
          [](const PyModel& m, const BimodalDataset& data, const std::string& target, const std::string& path,
             std::size_t k, std::size_t n_w, std::uint64_t seed, unsigned threads) {
            const BoundSpec spec{parse_target(target), parse_path(path), k, n_w};
            if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
            const Model<double> d = m.f64();
            BoundReport r;
            {
              py::gil_scoped_release release;
              r = evaluate(d, data, spec, seed, threads);
            }
            py::dict out;
            out["values"] = to_numpy(r.values);
            out["mean"] = r.mean;
            out["standard_error"] = r.standard_error;
            return out;
          },
          py::arg("data"), py::arg("target") = "marginal-x", py::arg("path") = "single-x", py::arg("k") = 1,
          py::arg("n_w") = 5000, py::arg("seed") = 0, py::arg("threads") = 1)
      .def(
          "quadrature",
          [](const PyModel& m, const std::string& target, std::optional<py::array_t<double>> x,
             std::optional<py::array_t<double>> w) {
            std::optional<Tensor<double>> tx, tw;
            if (x) tx = from_numpy<double>(*x);
            if (w) tw = from_numpy<double>(*w);
            return quadrature_oracle(m.f64(), parse_target(target), tx ? &*tx : nullptr, tw ? &*tw : nullptr);
          },
          py::arg("target"), py::arg("x") = py::none(), py::arg("w") = py::none())
      .def(
          "latent_means",
          [](const PyModel& m, const BimodalDataset& data, const std::string& path) {
            return to_numpy(latent_means(m.f64(), data, parse_path(path)));
          },
          py::arg("data"), py::arg("path") = "multiple")
      .def(
          "generate_x_from_w",
          [](const PyModel& m, std::size_t label, std::size_t count, bool sample, double zeta, std::uint64_t seed) {
            return to_numpy(generate_x_from_w(m.f64(), label, {count, sample, zeta, seed}));
          },
          py::arg("label"), py::arg("count") = 1, py::arg("sample") = false, py::arg("zeta") = 1.0,
          py::arg("seed") = 0)
      .def(
          "generate_w_from_x",
          [](const PyModel& m, const py::array_t<double>& x, std::size_t count, bool sample, double zeta,
             std::uint64_t seed) {
            return to_numpy(generate_w_from_x(m.f64(), from_numpy<double>(x), {count, sample, zeta, seed}));
          },
          py::arg("x"), py::arg("count") = 1, py::arg("sample") = false, py::arg("zeta") = 1.0, py::arg("seed") = 0);
}
