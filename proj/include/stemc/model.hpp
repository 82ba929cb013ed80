#pragma once

#include <string>
#include <vector>

#include "stemc/graph.hpp"
#include "stemc/tensor.hpp"

namespace stemc {

struct FloatLayer {
  LayerSpec spec;
  FloatTensor weights;      // [out, in] or [oc, ic, k, k]; empty for parameter-free kinds
  std::vector<float> bias;  // one per output feature/channel; may be empty (treated as zero)
};

/// A trained real-valued network. Batch-norm must already be folded into the
/// conv/fully-connected parameters.
struct FloatModel {
  std::string name;
  Shape input_shape;
  std::vector<FloatLayer> layers;  // topological order, output layer last

  const FloatLayer& output_layer() const { return layers.back(); }
};

/// Checks parameter shapes against each layer's declared attributes, resolves
/// the graph and sorts layers topologically. Throws Error on any violation.
void validate(FloatModel& model);

struct Sample {
  FloatTensor input;
  std::vector<std::int32_t> label;
};

}  // namespace stemc
