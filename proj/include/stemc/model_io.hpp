#pragma once

#include <filesystem>
#include <vector>

#include "stemc/model.hpp"
#include "stemc/quantizer.hpp"

namespace stemc {

inline constexpr int kManifestVersion = 1;
inline constexpr int kDatasetVersion = 1;

/// Reads a JSON manifest plus the raw little-endian f32 blobs it references
/// (paths relative to the manifest's directory) and validates the model.
FloatModel load_float_model(const std::filesystem::path& manifest);
void save_float_model(const FloatModel& model, const std::filesystem::path& manifest);

/// Weights are stored as i8 blobs and biases as i32 blobs; every scale,
/// multiplier and I_max lives in the manifest so load(save(x)) == x exactly.
QuantizedNetwork load_quantized_model(const std::filesystem::path& manifest);
void save_quantized_model(const QuantizedNetwork& qnet, const std::filesystem::path& manifest);

/// Binary layout, all little-endian:
///   "STDS" | u32 version | u32 count | u32 rank | u32 dims[rank] | u32 label_width
///   | f32 inputs[count * prod(dims)] | i32 labels[count * label_width]
std::vector<Sample> load_dataset(const std::filesystem::path& path);
void save_dataset(const std::vector<Sample>& samples, const Shape& input_shape, int label_width,
                  const std::filesystem::path& path);

}  // namespace stemc
