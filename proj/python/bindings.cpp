#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "stemc/error.hpp"
#include "stemc/fixtures.hpp"
#include "stemc/log.hpp"
#include "stemc/metrics.hpp"
#include "stemc/model_io.hpp"
#include "stemc/netsim.hpp"
#include "stemc/refengine.hpp"
#include "stemc/stem.hpp"
#include "stemc/tuner.hpp"

namespace py = pybind11;
using namespace stemc;

namespace {

using FloatArray = py::array_t<float, py::array::c_style | py::array::forcecast>;
using IntArray = py::array_t<std::int32_t, py::array::c_style | py::array::forcecast>;

Shape shape_of(const py::array& a) { return Shape(a.shape(), a.shape() + a.ndim()); }

FloatTensor to_float(const FloatArray& a) {
  return FloatTensor(shape_of(a), std::vector<float>(a.data(), a.data() + a.size()));
}

IntTensor to_int(const IntArray& a) {
  return IntTensor(shape_of(a), std::vector<std::int32_t>(a.data(), a.data() + a.size()));
}

template <typename T>
py::array_t<T> to_numpy(const Tensor<T>& t) {
  py::array_t<T> out(std::vector<py::ssize_t>(t.shape.begin(), t.shape.end()));
  std::copy(t.data.begin(), t.data.end(), out.mutable_data());
  return out;
}

std::vector<FloatTensor> split_batch(const FloatArray& batch) {
  if (batch.ndim() < 2) throw Error(ErrorKind::Shape, "inputs must be [count, ...]");
  const Shape sample_shape(batch.shape() + 1, batch.shape() + batch.ndim());
  const std::size_t size = element_count(sample_shape);
  std::vector<FloatTensor> out;
  for (py::ssize_t i = 0; i < batch.shape(0); ++i) {
    const float* p = batch.data() + static_cast<std::size_t>(i) * size;
    out.emplace_back(sample_shape, std::vector<float>(p, p + size));
  }
  return out;
}

std::vector<Sample> to_samples(const FloatArray& inputs, const IntArray& labels) {
  auto tensors = split_batch(inputs);
  if (labels.ndim() != 1 || static_cast<std::size_t>(labels.shape(0)) != tensors.size()) {
    throw Error(ErrorKind::Shape, "labels must be [count]");
  }
  std::vector<Sample> samples;
  for (std::size_t i = 0; i < tensors.size(); ++i) samples.push_back({std::move(tensors[i]), {labels.data()[i]}});
  return samples;
}

py::tuple from_samples(const std::vector<Sample>& samples, const Shape& input_shape) {
  std::vector<py::ssize_t> dims{static_cast<py::ssize_t>(samples.size())};
  dims.insert(dims.end(), input_shape.begin(), input_shape.end());
  py::array_t<float> inputs(dims);
  py::array_t<std::int32_t> labels(static_cast<py::ssize_t>(samples.size()));
  const std::size_t size = element_count(input_shape);
  for (std::size_t i = 0; i < samples.size(); ++i) {
    std::copy(samples[i].input.data.begin(), samples[i].input.data.end(), inputs.mutable_data() + i * size);
    labels.mutable_data()[i] = samples[i].label.empty() ? -1 : samples[i].label[0];
  }
  return py::make_tuple(inputs, labels);
}

py::dict run_dict(const SpikingNetwork& snet, const RunResult& r) {
  py::dict d;
  d["output"] = to_numpy(r.output);
  d["dequantized"] = r.dequantized;
  d["steps"] = r.steps;
  d["sops"] = r.total_sops();
  d["hidden_sops"] = total_sops(snet, r.layers, false);
  d["saturations"] = r.total_saturations();
  py::list layers;
  for (const auto& l : r.layers) {
    py::dict ld;
    ld["layer"] = l.layer;
    ld["sops"] = l.sops;
    ld["saturations"] = l.saturations;
    ld["spikes_in"] = l.spikes_in;
    ld["spikes_out"] = l.spikes_out;
    layers.append(ld);
  }
  d["layers"] = layers;
  return d;
}

std::vector<IntTensor> to_int_batch(const IntArray& batch) {
  if (batch.ndim() < 2) throw Error(ErrorKind::Shape, "inputs must be [count, ...]");
  const Shape sample_shape(batch.shape() + 1, batch.shape() + batch.ndim());
  const std::size_t size = element_count(sample_shape);
  std::vector<IntTensor> out;
  for (py::ssize_t i = 0; i < batch.shape(0); ++i) {
    const auto* p = batch.data() + static_cast<std::size_t>(i) * size;
    out.emplace_back(sample_shape, std::vector<std::int32_t>(p, p + size));
  }
  return out;
}

}  // namespace

PYBIND11_MODULE(_stemc, m) {
  m.doc() = "Bit-serial spiking execution of quantized networks";
  init_logging_from_env();

  static py::exception<Error> error(m, "StemcError", PyExc_RuntimeError);
  py::register_exception_translator([](std::exception_ptr p) {
    try {
      if (p) std::rethrow_exception(p);
    } catch (const Error& e) {
      PyErr_SetString(error.ptr(), (std::string(to_string(e.kind())) + ": " + e.what()).c_str());
    }
  });

  py::class_<FixedMult>(m, "FixedMult")
      .def(py::init([](std::int32_t mantissa, int shift) { return FixedMult{mantissa, shift}; }), py::arg("mantissa"),
           py::arg("shift"))
      .def_static("from_real", &FixedMult::from_real)
      .def_readonly("mantissa", &FixedMult::mantissa)
      .def_readonly("shift", &FixedMult::shift)
      .def("value", &FixedMult::value)
      .def("apply", [](const FixedMult& f, std::int64_t x) { return apply(f, x); })
      .def("__eq__", [](const FixedMult& a, const FixedMult& b) { return a == b; })
      .def("__repr__", [](const FixedMult& f) {
        return "FixedMult(" + std::to_string(f.mantissa) + ", " + std::to_string(f.shift) + ")";
      });

  py::class_<FloatModel>(m, "FloatModel")
      .def_readonly("name", &FloatModel::name)
      .def_readonly("input_shape", &FloatModel::input_shape)
      .def_property_readonly("layers", [](const FloatModel& f) {
        std::vector<std::string> names;
        for (const auto& l : f.layers) names.push_back(l.spec.name);
        return names;
      });

  py::class_<QuantizedNetwork>(m, "QuantizedNetwork")
      .def_readonly("name", &QuantizedNetwork::name)
      .def_readonly("input_shape", &QuantizedNetwork::input_shape)
      .def_property_readonly("k", &QuantizedNetwork::k)
      .def_property_readonly("acc_bits", &QuantizedNetwork::n)
      .def_property_readonly("input_scale", [](const QuantizedNetwork& q) { return q.input.scale; })
      .def_property_readonly("layers", [](const QuantizedNetwork& q) {
        py::list out;
        for (const auto& l : q.layers) {
          py::dict d;
          d["name"] = l.spec.name;
          d["kind"] = std::string(to_string(l.spec.kind));
          d["bias_scheme"] = std::string(to_string(l.bias_scheme));
          d["i_max"] = l.i_max;
          d["m_hat"] = l.m_hat;
          d["m0"] = l.m0;
          d["m1"] = l.m1;
          d["output_scale"] = l.out.scale;
          out.append(d);
        }
        return out;
      })
      .def_property_readonly("sparsity", [](const QuantizedNetwork& q) {
        std::vector<std::tuple<std::string, int, int>> out;
        for (const auto& e : q.sparsity.entries) out.emplace_back(e.layer, e.rot_bits, e.drlo_bits);
        return out;
      });

  py::class_<SpikingNetwork>(m, "SpikingNetwork")
      .def_readonly("name", &SpikingNetwork::name)
      .def_readonly("k", &SpikingNetwork::k)
      .def_property_readonly("depth", &SpikingNetwork::depth_count)
      .def_property_readonly("populations", [](const SpikingNetwork& s) {
        std::vector<std::string> names;
        for (const auto& p : s.populations) names.push_back(p.name);
        return names;
      });

  m.def("fixture_names", &fixtures::names);
  m.def("fixture", &fixtures::by_name, py::arg("name"), py::arg("seed") = 1);
  m.def(
      "fixture_samples",
      [](const std::string& name, const FloatModel& model, std::size_t count, std::uint64_t seed) {
        return from_samples(fixtures::samples_for(name, model, count, seed), model.input_shape);
      },
      py::arg("name"), py::arg("model"), py::arg("count"), py::arg("seed") = 7,
      "Labelled inputs as (inputs[count, ...], labels[count])");

  m.def("load_float_model", &load_float_model);
  m.def("save_float_model", &save_float_model);
  m.def("load_quantized_model", &load_quantized_model);
  m.def("save_quantized_model", &save_quantized_model);
  m.def("load_dataset", [](const std::filesystem::path& p) {
    const auto samples = load_dataset(p);
    return from_samples(samples, samples.empty() ? Shape{} : samples[0].input.shape);
  });
  m.def(
      "save_dataset",
      [](const FloatArray& inputs, const IntArray& labels, const std::filesystem::path& p) {
        const auto samples = to_samples(inputs, labels);
        save_dataset(samples, Shape(inputs.shape() + 1, inputs.shape() + inputs.ndim()), 1, p);
      },
      py::arg("inputs"), py::arg("labels"), py::arg("path"));

  m.def(
      "quantize",
      [](const FloatModel& model, const FloatArray& inputs, int k, int acc_bits, int bias_bits, int jobs) {
        QuantConfig config;
        config.activation_bits = k;
        config.acc_bits = acc_bits;
        config.bias_bits = bias_bits;
        config.validate();
        const auto samples = split_batch(inputs);
        py::gil_scoped_release release;
        return build_quantized_network(model, calibrate(model, samples, config, jobs), config);
      },
      py::arg("model"), py::arg("inputs"), py::arg("k") = 8, py::arg("acc_bits") = 16, py::arg("bias_bits") = 16,
      py::arg("jobs") = 1);

  m.def("quantize_input", [](const QuantizedNetwork& q, const FloatArray& x) {
    return to_numpy(quantize_input(q, to_float(x)));
  });
  m.def(
      "int_forward",
      [](const QuantizedNetwork& q, const IntArray& x, bool emulate) {
        const auto rec = int_forward(q, to_int(x), emulate ? IntMode::Emulated : IntMode::Ideal);
        return py::make_tuple(to_numpy(rec.output()), rec.saturation_count());
      },
      py::arg("qnet"), py::arg("x"), py::arg("emulate") = true, "Returns (output, saturation_count)");

  m.def(
      "compile",
      [](const QuantizedNetwork& q, int rot_bits, int drlo_bits, bool strict) {
        if (rot_bits == 0 && drlo_bits == 0) return compile(q, nullptr, {}, strict);
        const auto plan = uniform_plan(q, rot_bits, drlo_bits);
        return compile(q, &plan, {}, strict);
      },
      py::arg("qnet"), py::arg("rot_bits") = 0, py::arg("drlo_bits") = 0, py::arg("strict") = false);
  m.def("run_sample", [](const SpikingNetwork& s, const IntArray& x) { return run_dict(s, run_sample(s, to_int(x))); });
  m.def(
      "run_pipeline",
      [](const SpikingNetwork& s, const IntArray& batch) {
        const auto inputs = to_int_batch(batch);
        const auto r = run_pipeline(s, inputs);
        py::dict d;
        d["total_steps"] = r.total_steps;
        d["sequential_steps"] = r.sequential_steps;
        py::list samples;
        for (const auto& sample : r.samples) samples.append(run_dict(s, sample));
        d["samples"] = samples;
        return d;
      },
      py::arg("snet"), py::arg("inputs"));

  m.def(
      "tune_sparsity",
      [](const QuantizedNetwork& q, const FloatArray& inputs, const IntArray& labels, double budget, bool include_io,
         int jobs) {
        const auto samples = to_samples(inputs, labels);
        TuneOptions options;
        options.budget = budget;
        options.include_io = include_io;
        options.jobs = jobs;
        TuneResult r;
        {
          py::gil_scoped_release release;
          r = tune_hybrid(q, samples, options);
        }
        QuantizedNetwork tuned = q;
        tuned.sparsity = r.plan;
        py::dict d;
        d["qnet"] = tuned;
        d["baseline_accuracy"] = r.baseline_accuracy;
        d["accuracy"] = r.accuracy;
        d["baseline_sops"] = r.baseline_sops;
        d["sops"] = r.sops;
        return d;
      },
      py::arg("qnet"), py::arg("inputs"), py::arg("labels"), py::arg("budget") = 0.015,
      py::arg("include_io") = false, py::arg("jobs") = 1);

  m.def(
      "encode",
      [](std::int64_t q, int k, bool is_signed) { return encode_integer(q, k, is_signed); }, py::arg("q"),
      py::arg("k") = 8, py::arg("signed") = true);
  m.def(
      "decode",
      [](const std::vector<std::uint8_t>& train, bool is_signed) {
        return decode_train(train, {static_cast<int>(train.size()), is_signed});
      },
      py::arg("train"), py::arg("signed") = true);
  m.def("rot", &rot, py::arg("v"), py::arg("rot_bits"), py::arg("k") = 8);
  m.def("drlo", &drlo, py::arg("v"), py::arg("drlo_bits"));

  m.def("count_macs", &count_macs, py::arg("qnet"), py::arg("include_adds") = false);
  m.def(
      "energy_estimate",
      [](double macs, double sops) {
        const auto e = energy_estimate(macs, sops);
        return py::make_tuple(e.ann_uj, e.sdann_uj);
      },
      py::arg("macs"), py::arg("sops"), "Returns (ann_uj, sdann_uj)");
}
