// SPDX-License-Identifier: Apache-2.0
//
// Python bindings for the simulator's main operations: the loss family,
// the partitioners, dataset builders, and the round loop.

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cstring>
#include <map>
#include <optional>
#include <string>

#include "fedlmd/experiment.hpp"
#include "fedlmd/gradcheck.hpp"

namespace py = pybind11;
using namespace fedlmd;

namespace {

Tensor np_to_tensor(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  Tensor t;
  t.shape.assign(a.ndim(), 0);
  for (py::ssize_t i = 0; i < a.ndim(); ++i) t.shape[static_cast<size_t>(i)] = a.shape(i);
  t.data.resize(static_cast<size_t>(a.size()));
  std::memcpy(t.data.data(), a.data(), sizeof(float) * static_cast<size_t>(a.size()));
  return t;
}

py::array_t<float> tensor_to_np(const Tensor& t) {
  std::vector<py::ssize_t> shape(t.shape.begin(), t.shape.end());
  py::array_t<float> a(shape);
  std::memcpy(a.mutable_data(), t.data.data(), sizeof(float) * t.data.size());
  return a;
}

Tensor as_logits(const py::array_t<float, py::array::c_style | py::array::forcecast>& a) {
  Tensor t = np_to_tensor(a);
  if (t.rank() == 1) t.shape = {1, t.shape[0]};  // single-row convenience
  return t;
}

ClientPartition part_from_counts(const std::vector<int64_t>& label_counts,
                                 const std::string& rule) {
  ClientPartition p;
  p.label_counts = label_counts;
  int64_t at = 0;
  for (int64_t c : label_counts)
    for (int64_t i = 0; i < c; ++i) p.indices.push_back(at++);
  classify_majority(p, majority_rule_from_name(rule));
  return p;
}

py::dict record_to_dict(const RoundRecord& r) {
  py::dict d;
  d["round"] = r.round;
  d["accuracy"] = r.accuracy;
  d["pred_counts"] = r.pred_counts;
  d["sample_counts"] = r.sample_counts;
  d["loss_kind"] = r.loss_kind;
  d["lr"] = r.lr;
  d["selected"] = r.selected;
  d["train_seconds"] = r.train_seconds;
  return d;
}

}  // namespace

PYBIND11_MODULE(_fedlmd, m) {
  m.doc() = "Federated learning simulator with label-masking distillation";

  py::class_<Dataset>(m, "Dataset")
      .def_readonly("name", &Dataset::name)
      .def_readonly("num_classes", &Dataset::num_classes)
      .def_readonly("feature_shape", &Dataset::feature_shape)
      .def_property_readonly("labels", [](const Dataset& d) { return d.labels; })
      .def("__len__", [](const Dataset& d) { return d.size(); })
      .def("features",
           [](const Dataset& d) {
             std::vector<py::ssize_t> shape{static_cast<py::ssize_t>(d.size())};
             for (int64_t s : d.feature_shape) shape.push_back(static_cast<py::ssize_t>(s));
             py::array_t<float> a(shape);
             std::memcpy(a.mutable_data(), d.features.data(), sizeof(float) * d.features.size());
             return a;
           })
      .def("label_histogram", &Dataset::label_histogram);

  py::class_<ClientPartition>(m, "ClientPartition")
      .def_readonly("client_id", &ClientPartition::client_id)
      .def_readonly("indices", &ClientPartition::indices)
      .def_readonly("label_counts", &ClientPartition::label_counts)
      .def_readonly("majority_set", &ClientPartition::majority_set)
      .def("minority_set", &ClientPartition::minority_set)
      .def("__len__", [](const ClientPartition& p) { return p.total(); });

  py::class_<ModelWeights>(m, "Model")
      .def(py::init([](const std::string& arch, const std::vector<int64_t>& input_shape,
                       int num_classes, uint64_t seed) {
             return init_model(arch_from_name(arch), input_shape, num_classes, seed);
           }),
           py::arg("arch"), py::arg("input_shape"), py::arg("num_classes"), py::arg("seed"))
      .def("forward",
           [](const ModelWeights& mw,
              const py::array_t<float, py::array::c_style | py::array::forcecast>& batch) {
             return tensor_to_np(forward(mw, np_to_tensor(batch)));
           })
      .def_property_readonly("hash", &weights_hash)
      .def_property_readonly("param_count", &ModelWeights::param_count);

  m.def(
      "softmax_with_temperature",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& logits, double tau,
         std::optional<std::vector<int>> mask) {
        return tensor_to_np(softmax_with_temperature(np_to_tensor(logits), tau, mask));
      },
      py::arg("logits"), py::arg("tau") = 1.0, py::arg("mask") = py::none(),
      "Temperature softmax; masked labels (1-based) are zeroed and the rest renormalized.");

  m.def(
      "cross_entropy",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& logits,
         const std::vector<int>& labels) {
        BatchLoss bl = cross_entropy(as_logits(logits), labels);
        return py::make_tuple(bl.value, tensor_to_np(bl.dlogits));
      },
      py::arg("logits"), py::arg("labels"));

  m.def(
      "kd_loss",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& student,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& teacher,
         double tau) {
        BatchLoss bl = kd_loss(as_logits(student), as_logits(teacher), tau);
        return py::make_tuple(bl.value, tensor_to_np(bl.dlogits));
      },
      py::arg("student"), py::arg("teacher"), py::arg("tau") = 1.0);

  m.def(
      "masked_teacher_dist",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& teacher,
         const std::vector<int>& mask, double tau) {
        return tensor_to_np(masked_teacher_dist(as_logits(teacher), mask, tau));
      },
      py::arg("teacher"), py::arg("mask"), py::arg("tau") = 1.0);

  m.def(
      "masked_student_dist",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& student,
         const std::vector<int>& targets, double tau) {
        return tensor_to_np(masked_student_dist(as_logits(student), targets, tau));
      },
      py::arg("student"), py::arg("targets"), py::arg("tau") = 1.0);

  m.def(
      "lmd_loss",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& student,
         const std::vector<int>& targets, const std::vector<int64_t>& label_counts, double beta,
         double tau, std::optional<py::array_t<float, py::array::c_style | py::array::forcecast>>
                          teacher,
         const std::string& rule, const std::string& mask_set) {
        ClientPartition part = part_from_counts(label_counts, rule);
        LossSpec spec;
        spec.kind = teacher ? LossKind::LMD : LossKind::LMD_TF;
        spec.beta = beta;
        spec.tau = tau;
        TeacherContext ctx;
        Tensor tl;
        if (teacher) {
          ctx.mode = TeacherMode::GlobalModel;
          tl = as_logits(*teacher);
          ctx.teacher_logits = &tl;
        } else {
          ctx.mode = TeacherMode::FixedVector;
        }
        BatchLoss bl = lmd_loss(as_logits(student), ctx, targets, part, spec,
                                mask_set_from_name(mask_set));
        return py::make_tuple(bl.value, tensor_to_np(bl.dlogits), bl.degenerate);
      },
      py::arg("student"), py::arg("targets"), py::arg("label_counts"), py::arg("beta") = 1.0,
      py::arg("tau") = 1.0, py::arg("teacher") = py::none(), py::arg("rule") = "mean",
      py::arg("mask_set") = "majority",
      "LMD loss; teacher=None uses the fixed minority vector (teacher-free variant).");

  m.def(
      "ntd_loss",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& student,
         const py::array_t<float, py::array::c_style | py::array::forcecast>& teacher,
         const std::vector<int>& targets, double tau, double beta) {
        BatchLoss bl = ntd_loss(as_logits(student), as_logits(teacher), targets, tau, beta);
        return py::make_tuple(bl.value, tensor_to_np(bl.dlogits));
      },
      py::arg("student"), py::arg("teacher"), py::arg("targets"), py::arg("tau") = 1.0,
      py::arg("beta") = 1.0);

  m.def(
      "label_smoothing_loss",
      [](const py::array_t<float, py::array::c_style | py::array::forcecast>& logits,
         const std::vector<int>& targets, double mu) {
        BatchLoss bl = label_smoothing_loss(as_logits(logits), targets, mu);
        return py::make_tuple(bl.value, tensor_to_np(bl.dlogits));
      },
      py::arg("logits"), py::arg("targets"), py::arg("mu") = 0.1);

  m.def(
      "fixed_minority_vector",
      [](const std::vector<int64_t>& label_counts, const std::string& rule) {
        return tensor_to_np(fixed_minority_vector(part_from_counts(label_counts, rule)));
      },
      py::arg("label_counts"), py::arg("rule") = "mean");

  m.def(
      "synth_image_dataset",
      [](int num_classes, int per_class, uint64_t seed, const std::string& split) {
        return synth_image_dataset(num_classes, per_class, seed,
                                   split == "train" ? Split::Train : Split::Test);
      },
      py::arg("num_classes") = 10, py::arg("per_class") = 100, py::arg("seed") = 1,
      py::arg("split") = "train");

  m.def(
      "synth_gaussian_dataset",
      [](int num_classes, int per_class, int dim, uint64_t seed, double spacing) {
        return synth_gaussian_dataset(num_classes, per_class, dim, seed, spacing);
      },
      py::arg("num_classes"), py::arg("per_class"), py::arg("dim"), py::arg("seed") = 1,
      py::arg("spacing") = 3.0);

  m.def(
      "load_idx_dataset",
      [](const std::string& images, const std::string& labels, double mean, double std) {
        return load_idx_dataset(images, labels, mean, std);
      },
      py::arg("images"), py::arg("labels"), py::arg("mean") = 0.0, py::arg("std") = 1.0);

  m.def("load_csv_dataset",
        [](const std::string& path) { return load_csv_dataset(path); }, py::arg("path"));

  m.def(
      "partition_sharding",
      [](const Dataset& ds, int clients, int shards_per_client, uint64_t seed,
         const std::string& rule) {
        auto parts = partition_sharding(ds, clients, shards_per_client, seed);
        for (auto& p : parts) classify_majority(p, majority_rule_from_name(rule));
        return parts;
      },
      py::arg("dataset"), py::arg("clients"), py::arg("shards_per_client") = 2,
      py::arg("seed") = 0, py::arg("rule") = "mean");

  m.def(
      "partition_lda",
      [](const Dataset& ds, int clients, double alpha, uint64_t seed, bool require_nonempty,
         int retries, const std::string& rule) {
        auto parts = partition_lda(ds, clients, alpha, seed, require_nonempty, retries);
        for (auto& p : parts) classify_majority(p, majority_rule_from_name(rule));
        return parts;
      },
      py::arg("dataset"), py::arg("clients"), py::arg("alpha") = 0.1, py::arg("seed") = 0,
      py::arg("require_nonempty") = false, py::arg("retries") = 10, py::arg("rule") = "mean");

  m.def(
      "run_from_config",
      [](const std::map<std::string, std::string>& overrides, bool write_outputs) {
        RunConfig cfg;
        apply_overrides(cfg, overrides);
        ExperimentResult res = run_experiment(cfg, write_outputs);
        py::list records;
        for (const auto& r : res.records) records.append(record_to_dict(r));
        py::dict out;
        out["records"] = records;
        out["best_accuracy"] = res.best_acc;
        out["best_round"] = res.best_round;
        out["run_dir"] = res.run_dir;
        return out;
      },
      py::arg("config"), py::arg("write_outputs") = false,
      "Runs a full experiment from {'section.key': 'value'} overrides over the defaults.");

  m.def(
      "speedup",
      [](const std::vector<double>& baseline_acc, const std::vector<double>& method_acc) {
        auto to_records = [](const std::vector<double>& accs) {
          std::vector<RoundRecord> out;
          for (size_t t = 0; t < accs.size(); ++t) {
            RoundRecord r;
            r.round = static_cast<int>(t);
            r.accuracy = accs[t];
            out.push_back(r);
          }
          return out;
        };
        SpeedupReport rep = speedup(to_records(baseline_acc), to_records(method_acc));
        py::dict d;
        d["target"] = rep.target;
        d["baseline_rounds"] = rep.baseline_rounds;
        d["failed"] = rep.failed;
        if (!rep.failed) {
          d["method_rounds"] = rep.method_rounds;
          d["ratio"] = rep.ratio;
        }
        return d;
      },
      py::arg("baseline_acc"), py::arg("method_acc"),
      "Rounds-to-target ratio against the baseline's best accuracy.");

  m.def(
      "gradcheck",
      [](int samples, uint64_t seed) {
        auto reports = run_loss_gradchecks(samples, seed);
        py::list out;
        for (const auto& r : reports) {
          py::dict d;
          d["name"] = r.name;
          d["instances"] = r.instances;
          d["entries"] = r.entries;
          d["failures"] = r.failures;
          d["max_rel_err"] = r.max_rel_err;
          out.append(d);
        }
        return out;
      },
      py::arg("samples") = 30, py::arg("seed") = 42);

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<MaskError>(m, "MaskError", PyExc_ValueError);
  py::register_exception<PartitionError>(m, "PartitionError", PyExc_ValueError);
  py::register_exception<ShapeError>(m, "ShapeError", PyExc_ValueError);

  m.attr("__version__") = "0.1.0";
}
