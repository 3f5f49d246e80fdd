#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "phyadv/nn/model.hpp"

namespace phyadv::nn {

/// One record of the "PHYADVW1" container: an ASCII kind tag (at most 8 bytes),
/// kind-specific sizes and a list of tensors.
struct WeightRecord {
  std::string tag;
  std::vector<std::uint32_t> sizes;
  std::vector<Tensor> tensors;
};

/// Generic container behind both model weights and saved perturbations.
///
/// Layout (little-endian):
///   "PHYADVW1" | u32 version=1 | u64 seed | u32 input rank | u32 dims...
///   | u32 record count | per record: char[8] tag (NUL padded), u32 n_sizes,
///     u32 sizes..., u32 n_tensors, per tensor: u32 rank, u32 dims...
///   | payload: every tensor as f32, row-major, in record order.
struct WeightFile {
  std::uint64_t seed = 0;
  Shape input_shape;
  std::vector<WeightRecord> records;
};

std::vector<std::uint8_t> encode_weight_file(const WeightFile& file);
/// Throws FormatError on bad magic, version, truncation, trailing bytes or inconsistent shapes.
WeightFile decode_weight_file(std::vector<std::uint8_t> bytes);

WeightFile to_weight_file(const ModelState& model);
ModelState from_weight_file(const WeightFile& file);

void save_weights(const ModelState& model, const std::filesystem::path& path);
/// Builds a fresh ModelState from the file; nothing is returned on error.
ModelState load_weights(const std::filesystem::path& path);
/// Loads into an existing model whose spec must match the file exactly.
void load_weights(ModelState& model, const std::filesystem::path& path);

/// Model parameters rounded to f32 precision (what a save/load cycle yields).
ModelState rounded_to_f32(ModelState model);

}  // namespace phyadv::nn
