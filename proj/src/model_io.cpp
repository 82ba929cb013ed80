#include "stemc/model_io.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <json.hpp>

#include "stemc/error.hpp"

namespace stemc {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kFloatFormat = "stemc-float-model";
constexpr const char* kQuantizedFormat = "stemc-quantized-model";

template <typename T>
void append_le(std::string& buf, T value) {
  using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  const auto bits = std::bit_cast<Bits>(value);
  for (std::size_t i = 0; i < sizeof(T); ++i) buf.push_back(static_cast<char>((bits >> (8 * i)) & 0xFF));
}

template <typename T>
T read_le(const char* p) {
  using Bits = std::conditional_t<sizeof(T) == 1, std::uint8_t,
                                  std::conditional_t<sizeof(T) == 4, std::uint32_t, std::uint64_t>>;
  Bits bits = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    bits |= static_cast<Bits>(static_cast<Bits>(static_cast<unsigned char>(p[i])) << (8 * i));
  }
  return std::bit_cast<T>(bits);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot open '" + path.string() + "'");
  return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

void write_file(const fs::path& path, const std::string& bytes) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

template <typename T>
std::vector<T> read_blob(const fs::path& dir, const std::string& file, std::size_t count) {
  const fs::path path = dir / file;
  if (!fs::exists(path)) throw Error(ErrorKind::Format, "dangling blob reference '" + file + "'");
  const std::string bytes = read_file(path);
  if (bytes.size() != count * sizeof(T)) {
    throw Error(ErrorKind::Format, "blob '" + file + "' length mismatch: " + std::to_string(bytes.size()) +
                                       " bytes, expected " + std::to_string(count * sizeof(T)));
  }
  std::vector<T> values(count);
  for (std::size_t i = 0; i < count; ++i) values[i] = read_le<T>(bytes.data() + i * sizeof(T));
  return values;
}

template <typename T>
void write_blob(const fs::path& dir, const std::string& file, const std::vector<T>& values) {
  std::string bytes;
  bytes.reserve(values.size() * sizeof(T));
  for (const T& v : values) append_le(bytes, v);
  write_file(dir / file, bytes);
}

json parse_manifest(const fs::path& path, const char* expected_format) {
  json doc;
  try {
    doc = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, "malformed manifest '" + path.string() + "': " + e.what());
  }
  if (!doc.is_object() || !doc.contains("format_version")) {
    throw Error(ErrorKind::Format, "manifest '" + path.string() + "' has no format_version");
  }
  if (doc.value("format", std::string{}) != expected_format) {
    throw Error(ErrorKind::Format, "manifest '" + path.string() + "' is not a " + expected_format);
  }
  const int version = doc.at("format_version").get<int>();
  if (version != kManifestVersion) {
    throw Error(ErrorKind::Version, "unsupported manifest format_version " + std::to_string(version) +
                                        " (expected " + std::to_string(kManifestVersion) + ")");
  }
  return doc;
}

json spec_to_json(const LayerSpec& spec) {
  json j;
  j["name"] = spec.name;
  j["kind"] = std::string(to_string(spec.kind));
  j["activation"] = std::string(to_string(spec.activation));
  j["inputs"] = spec.inputs;
  json attrs = json::object();
  switch (spec.kind) {
    case LayerKind::FullyConnected:
      attrs = {{"in_features", spec.in_features}, {"out_features", spec.out_features}};
      break;
    case LayerKind::Conv2d:
      attrs = {{"in_channels", spec.in_channels}, {"out_channels", spec.out_channels},
               {"kernel", spec.kernel},           {"stride", spec.stride},
               {"padding", spec.padding}};
      break;
    case LayerKind::AvgPool2d:
      attrs = {{"kernel", spec.kernel}, {"stride", spec.stride}};
      break;
    default:
      break;
  }
  j["attrs"] = attrs;
  return j;
}

LayerSpec spec_from_json(const json& j) {
  LayerSpec spec;
  spec.name = j.at("name").get<std::string>();
  spec.kind = parse_layer_kind(j.at("kind").get<std::string>());
  spec.activation = parse_activation(j.value("activation", std::string("relu")));
  spec.inputs = j.at("inputs").get<std::vector<std::string>>();
  const json attrs = j.value("attrs", json::object());
  spec.in_features = attrs.value("in_features", 0);
  spec.out_features = attrs.value("out_features", 0);
  spec.in_channels = attrs.value("in_channels", 0);
  spec.out_channels = attrs.value("out_channels", 0);
  spec.kernel = attrs.value("kernel", 0);
  spec.stride = attrs.value("stride", spec.kind == LayerKind::AvgPool2d ? spec.kernel : 1);
  spec.padding = attrs.value("padding", 0);
  return spec;
}

json fixed_to_json(FixedMult m) { return {{"mantissa", m.mantissa}, {"shift", m.shift}}; }

FixedMult fixed_from_json(const json& j) {
  FixedMult m{j.at("mantissa").get<std::int32_t>(), j.at("shift").get<int>()};
  if (m.shift < 0 || m.shift > FixedMult::kMaxShift) throw Error(ErrorKind::Format, "fixed-point shift out of range");
  return m;
}

json params_to_json(const QuantParams& p) { return {{"scale", p.scale}, {"q_min", p.q_min}, {"q_max", p.q_max}}; }

QuantParams params_from_json(const json& j) {
  return QuantParams{j.at("scale").get<double>(), 0, j.at("q_min").get<int>(), j.at("q_max").get<int>()};
}

std::string blob_name(const fs::path& manifest, const std::string& layer, const char* what, const char* dtype) {
  return manifest.stem().string() + "." + layer + "." + what + "." + dtype;
}

template <typename Fn>
auto with_format_errors(const fs::path& path, Fn&& fn) {
  try {
    return fn();
  } catch (const json::exception& e) {
    throw Error(ErrorKind::Format, "malformed manifest '" + path.string() + "': " + e.what());
  }
}

}  // namespace

FloatModel load_float_model(const fs::path& manifest) {
  const json doc = parse_manifest(manifest, kFloatFormat);
  const fs::path dir = manifest.parent_path();
  return with_format_errors(manifest, [&] {
    FloatModel model;
    model.name = doc.value("name", std::string{});
    model.input_shape = doc.at("input_shape").get<Shape>();
    for (const auto& lj : doc.at("layers")) {
      FloatLayer layer;
      layer.spec = spec_from_json(lj);
      if (lj.contains("weights_file")) {
        layer.weights.shape = lj.at("weights_shape").get<Shape>();
        layer.weights.data = read_blob<float>(dir, lj.at("weights_file").get<std::string>(),
                                              element_count(layer.weights.shape));
      }
      if (lj.contains("bias_file")) {
        const std::size_t count = lj.value("bias_length", expected_bias_length(layer.spec));
        layer.bias = read_blob<float>(dir, lj.at("bias_file").get<std::string>(), count);
      }
      model.layers.push_back(std::move(layer));
    }
    validate(model);
    return model;
  });
}

void save_float_model(const FloatModel& model, const fs::path& manifest) {
  const fs::path dir = manifest.parent_path();
  json doc;
  doc["format"] = kFloatFormat;
  doc["format_version"] = kManifestVersion;
  doc["name"] = model.name;
  doc["input_shape"] = model.input_shape;
  doc["layers"] = json::array();
  for (const auto& layer : model.layers) {
    json lj = spec_to_json(layer.spec);
    if (has_parameters(layer.spec.kind)) {
      lj["weights_file"] = blob_name(manifest, layer.spec.name, "weights", "f32");
      lj["weights_shape"] = layer.weights.shape;
      lj["bias_file"] = blob_name(manifest, layer.spec.name, "bias", "f32");
      lj["bias_length"] = layer.bias.size();
      write_blob(dir, lj["weights_file"].get<std::string>(), layer.weights.data);
      write_blob(dir, lj["bias_file"].get<std::string>(), layer.bias);
    }
    doc["layers"].push_back(std::move(lj));
  }
  write_file(manifest, doc.dump(2) + "\n");
}

QuantizedNetwork load_quantized_model(const fs::path& manifest) {
  const json doc = parse_manifest(manifest, kQuantizedFormat);
  const fs::path dir = manifest.parent_path();
  return with_format_errors(manifest, [&] {
    QuantizedNetwork qnet;
    qnet.name = doc.value("name", std::string{});
    qnet.input_shape = doc.at("input_shape").get<Shape>();
    qnet.input = params_from_json(doc.at("input"));
    qnet.config.activation_bits = doc.at("k").get<int>();
    qnet.config.acc_bits = doc.at("acc_bits").get<int>();
    qnet.config.weight_bits = doc.at("weight_bits").get<int>();
    qnet.config.bias_bits = doc.at("bias_bits").get<int>();
    for (const auto& lj : doc.at("layers")) {
      QuantizedLayer layer;
      layer.spec = spec_from_json(lj);
      layer.in = params_from_json(lj.at("scale_in"));
      layer.w = params_from_json(lj.at("scale_w"));
      layer.out = params_from_json(lj.at("scale_out"));
      layer.m_hat = fixed_from_json(lj.at("m_hat"));
      layer.m0 = fixed_from_json(lj.at("m0"));
      layer.m1 = fixed_from_json(lj.at("m1"));
      layer.i_max = lj.at("i_max").get<std::int64_t>();
      layer.bias_scheme = parse_bias_scheme(lj.at("bias_scheme").get<std::string>());
      if (lj.contains("weights_file")) {
        layer.weights.shape = lj.at("weights_shape").get<Shape>();
        layer.weights.data = read_blob<std::int8_t>(dir, lj.at("weights_file").get<std::string>(),
                                                    element_count(layer.weights.shape));
      }
      if (lj.contains("bias_file")) {
        layer.bias = read_blob<std::int32_t>(dir, lj.at("bias_file").get<std::string>(),
                                             lj.at("bias_length").get<std::size_t>());
      }
      qnet.layers.push_back(std::move(layer));
    }
    for (const auto& ej : doc.value("sparsity", json::array())) {
      qnet.sparsity.entries.push_back(
          {ej.at("layer").get<std::string>(), ej.at("rot").get<int>(), ej.at("drlo").get<int>()});
    }
    std::vector<LayerSpec> specs;
    for (const auto& l : qnet.layers) specs.push_back(l.spec);
    sort_layers(qnet.input_shape, qnet.layers);
    validate(qnet);
    return qnet;
  });
}

void save_quantized_model(const QuantizedNetwork& qnet, const fs::path& manifest) {
  validate(qnet);
  const fs::path dir = manifest.parent_path();
  json doc;
  doc["format"] = kQuantizedFormat;
  doc["format_version"] = kManifestVersion;
  doc["name"] = qnet.name;
  doc["input_shape"] = qnet.input_shape;
  doc["input"] = params_to_json(qnet.input);
  doc["k"] = qnet.config.activation_bits;
  doc["acc_bits"] = qnet.config.acc_bits;
  doc["weight_bits"] = qnet.config.weight_bits;
  doc["bias_bits"] = qnet.config.bias_bits;
  doc["layers"] = json::array();
  for (const auto& layer : qnet.layers) {
    json lj = spec_to_json(layer.spec);
    lj["scale_in"] = params_to_json(layer.in);
    lj["scale_w"] = params_to_json(layer.w);
    lj["scale_out"] = params_to_json(layer.out);
    lj["m_hat"] = fixed_to_json(layer.m_hat);
    lj["m0"] = fixed_to_json(layer.m0);
    lj["m1"] = fixed_to_json(layer.m1);
    lj["i_max"] = layer.i_max;
    lj["bias_scheme"] = std::string(to_string(layer.bias_scheme));
    if (has_parameters(layer.spec.kind)) {
      lj["weights_file"] = blob_name(manifest, layer.spec.name, "weights", "i8");
      lj["weights_shape"] = layer.weights.shape;
      lj["bias_file"] = blob_name(manifest, layer.spec.name, "bias", "i32");
      lj["bias_length"] = layer.bias.size();
      write_blob(dir, lj["weights_file"].get<std::string>(), layer.weights.data);
      write_blob(dir, lj["bias_file"].get<std::string>(), layer.bias);
    }
    doc["layers"].push_back(std::move(lj));
  }
  doc["sparsity"] = json::array();
  for (const auto& e : qnet.sparsity.entries) {
    doc["sparsity"].push_back({{"layer", e.layer}, {"rot", e.rot_bits}, {"drlo", e.drlo_bits}});
  }
  write_file(manifest, doc.dump(2) + "\n");
}

std::vector<Sample> load_dataset(const fs::path& path) {
  const std::string bytes = read_file(path);
  std::size_t pos = 0;
  auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n) throw Error(ErrorKind::Format, "dataset '" + path.string() + "' is truncated");
  };
  auto u32 = [&] {
    need(4);
    const auto v = read_le<std::uint32_t>(bytes.data() + pos);
    pos += 4;
    return v;
  };
  need(4);
  if (bytes.compare(0, 4, "STDS") != 0) throw Error(ErrorKind::Format, "'" + path.string() + "' is not a dataset");
  pos = 4;
  const auto version = u32();
  if (version != kDatasetVersion) {
    throw Error(ErrorKind::Version, "unsupported dataset version " + std::to_string(version));
  }
  const std::size_t count = u32();
  const std::size_t rank = u32();
  if (rank == 0 || rank > 8) throw Error(ErrorKind::Format, "dataset rank out of range");
  Shape shape;
  for (std::size_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(u32()));
  const std::size_t label_width = u32();
  const std::size_t elems = element_count(shape);
  const std::size_t payload = count * (elems * 4 + label_width * 4);
  if (bytes.size() - pos != payload) {
    throw Error(ErrorKind::Format, "dataset payload length mismatch: header promises " + std::to_string(payload) +
                                       " bytes, file has " + std::to_string(bytes.size() - pos));
  }
  std::vector<Sample> samples(count);
  for (std::size_t s = 0; s < count; ++s) {
    samples[s].input = FloatTensor(shape);
    for (std::size_t i = 0; i < elems; ++i, pos += 4) samples[s].input[i] = read_le<float>(bytes.data() + pos);
  }
  for (std::size_t s = 0; s < count; ++s) {
    samples[s].label.resize(label_width);
    for (std::size_t i = 0; i < label_width; ++i, pos += 4) {
      samples[s].label[i] = read_le<std::int32_t>(bytes.data() + pos);
    }
  }
  return samples;
}

void save_dataset(const std::vector<Sample>& samples, const Shape& input_shape, int label_width,
                  const fs::path& path) {
  std::string bytes = "STDS";
  append_le<std::uint32_t>(bytes, kDatasetVersion);
  append_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(samples.size()));
  append_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(input_shape.size()));
  for (int d : input_shape) append_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(d));
  append_le<std::uint32_t>(bytes, static_cast<std::uint32_t>(label_width));
  for (const auto& s : samples) {
    if (s.input.size() != element_count(input_shape)) throw Error(ErrorKind::Shape, "sample shape mismatch");
    for (float v : s.input.data) append_le(bytes, v);
  }
  for (const auto& s : samples) {
    if (s.label.size() != static_cast<std::size_t>(label_width)) throw Error(ErrorKind::Shape, "label width mismatch");
    for (auto v : s.label) append_le(bytes, v);
  }
  write_file(path, bytes);
}

}  // namespace stemc
