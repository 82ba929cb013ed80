#pragma once

#include <string>
#include <string_view>
#include <vector>

#include "stemc/tensor.hpp"

namespace stemc {

enum class LayerKind { FullyConnected, Conv2d, AvgPool2d, ResidualAdd, Flatten };
enum class Activation { Relu, None };

std::string_view to_string(LayerKind kind);
LayerKind parse_layer_kind(std::string_view text);
std::string_view to_string(Activation act);
Activation parse_activation(std::string_view text);

inline constexpr int kNetworkInput = -1;
inline constexpr std::string_view kInputName = "input";

/// Structural description of one layer, shared by float and quantized models.
struct LayerSpec {
  std::string name;
  LayerKind kind = LayerKind::FullyConnected;
  Activation activation = Activation::Relu;
  std::vector<std::string> inputs;

  // fully-connected
  int in_features = 0;
  int out_features = 0;
  // conv2d / avgpool2d
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 0;
  int stride = 1;
  int padding = 0;

  // Filled in by resolve_graph.
  std::vector<int> input_ids;
  Shape in_shape;
  Shape out_shape;

  bool is_signed_output() const { return activation == Activation::None; }
  bool operator==(const LayerSpec&) const = default;
};

bool has_parameters(LayerKind kind);

/// Expected weight shape: [out, in] for fully-connected, [oc, ic, k, k] for
/// conv2d, empty otherwise.
Shape expected_weight_shape(const LayerSpec& spec);
std::size_t expected_bias_length(const LayerSpec& spec);

/// Validates the layer graph and returns a topological order of `specs`.
/// Resolves `input_ids` (indices into the returned order's source vector) and
/// infers every in/out shape. The unique sink is placed last.
std::vector<std::size_t> resolve_graph(const Shape& input_shape, std::vector<LayerSpec>& specs);

/// Reorders `layers` (anything with a `spec` member) topologically and
/// rewrites input ids to refer to the new positions.
template <typename Layer>
void sort_layers(const Shape& input_shape, std::vector<Layer>& layers) {
  std::vector<LayerSpec> specs;
  specs.reserve(layers.size());
  for (auto& l : layers) specs.push_back(l.spec);
  const auto order = resolve_graph(input_shape, specs);
  std::vector<int> position(layers.size());
  for (std::size_t i = 0; i < order.size(); ++i) position[order[i]] = static_cast<int>(i);
  std::vector<Layer> sorted;
  sorted.reserve(layers.size());
  for (std::size_t idx : order) {
    Layer l = std::move(layers[idx]);
    l.spec = specs[idx];
    for (int& id : l.spec.input_ids) {
      if (id != kNetworkInput) id = position[id];
    }
    sorted.push_back(std::move(l));
  }
  layers = std::move(sorted);
}

}  // namespace stemc
