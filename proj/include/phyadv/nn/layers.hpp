#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string_view>
#include <vector>

#include "phyadv/nn/tensor.hpp"

namespace phyadv::nn {

enum class LayerKind : std::uint8_t { dense, conv1d, relu, softmax, energy_norm, flatten };

/// Short ASCII tag used in the weight-file container ("DENSE", "CONV1D", ...).
std::string_view layer_tag(LayerKind kind) noexcept;
std::optional<LayerKind> layer_kind_from_tag(std::string_view tag) noexcept;

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // dense
  std::size_t in = 0;
  std::size_t out = 0;
  // conv1d, input [in_channels, length]
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel = 0;
  std::size_t stride = 1;
  // energy_norm: rescales each sample to mean(x^2) = 1 over `norm_dim` values
  std::size_t norm_dim = 0;

  static LayerSpec dense(std::size_t in, std::size_t out);
  static LayerSpec conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                          std::size_t stride = 1);
  static LayerSpec relu();
  static LayerSpec softmax();
  static LayerSpec energy_norm(std::size_t n);
  static LayerSpec flatten();

  bool has_params() const noexcept { return kind == LayerKind::dense || kind == LayerKind::conv1d; }
  /// Kind-specific sizes in a fixed order (dense: in,out; conv1d: cin,cout,k,stride; energy-norm: n).
  std::vector<std::uint32_t> sizes() const;
  static LayerSpec from_sizes(LayerKind kind, const std::vector<std::uint32_t>& sizes);

  bool operator==(const LayerSpec&) const = default;
};

/// Sequential network description. `input_shape` is per sample; a leading batch
/// axis is added at run time.
struct ModelSpec {
  Shape input_shape;
  std::vector<LayerSpec> layers;

  /// Per-sample shape entering each layer plus the final output (size layers+1).
  /// Throws ConfigError when consecutive layers disagree.
  std::vector<Shape> activation_shapes() const;
  Shape output_shape() const { return activation_shapes().back(); }
  void validate() const { (void)activation_shapes(); }

  bool operator==(const ModelSpec&) const = default;
};

}  // namespace phyadv::nn
