#include "stemc/model.hpp"

#include "stemc/error.hpp"

namespace stemc {

void validate(FloatModel& model) {
  for (auto& layer : model.layers) {
    const auto& spec = layer.spec;
    const Shape expected = expected_weight_shape(spec);
    if (!has_parameters(spec.kind)) {
      if (!layer.weights.data.empty() || !layer.bias.empty()) {
        throw Error(ErrorKind::Shape, "layer '" + spec.name + "' of kind " +
                                          std::string(to_string(spec.kind)) + " carries parameters");
      }
      continue;
    }
    if (layer.weights.shape != expected) {
      throw Error(ErrorKind::Shape, "layer '" + spec.name + "': weight shape " +
                                        shape_to_string(layer.weights.shape) + " does not match attrs " +
                                        shape_to_string(expected));
    }
    if (layer.weights.data.size() != element_count(expected)) {
      throw Error(ErrorKind::Shape, "layer '" + spec.name + "': weight data length mismatch");
    }
    if (layer.bias.empty()) layer.bias.assign(expected_bias_length(spec), 0.0F);
    if (layer.bias.size() != expected_bias_length(spec)) {
      throw Error(ErrorKind::Shape, "layer '" + spec.name + "': bias length " +
                                        std::to_string(layer.bias.size()) + ", expected " +
                                        std::to_string(expected_bias_length(spec)));
    }
  }
  sort_layers(model.input_shape, model.layers);
}

}  // namespace stemc
