#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "phyadv/nn/layers.hpp"
#include "phyadv/nn/tensor.hpp"

namespace phyadv::nn {

/// Weight and bias of one layer; both empty for parameter-free layers.
/// dense: weight [out, in], bias [out]. conv1d: weight [cout, cin, k], bias [cout].
struct LayerParams {
  Tensor weight;
  Tensor bias;

  bool empty() const noexcept { return weight.empty(); }
  bool operator==(const LayerParams&) const = default;
};

struct ModelState {
  ModelSpec spec;
  std::vector<LayerParams> params;
  std::uint64_t seed = 0;

  /// Non-empty parameter tensors in layer order (weight then bias).
  std::vector<Tensor*> parameters();
  std::vector<const Tensor*> parameters() const;
  std::size_t parameter_count() const;
  bool ends_with_softmax() const noexcept;

  bool operator==(const ModelState&) const = default;
};

/// Activations retained by a recorded forward pass. activations[0] is the
/// (batched) input and activations[i + 1] the output of layer i.
struct Tape {
  std::vector<Tensor> activations;
  bool unbatched = false;

  bool recorded() const noexcept { return !activations.empty(); }
  std::size_t layers_run() const noexcept { return activations.empty() ? 0 : activations.size() - 1; }
};

struct Gradients {
  std::vector<LayerParams> params;  // empty when only the input gradient was requested
  Tensor input;

  std::vector<const Tensor*> tensors() const;
};

enum class GradTarget { params_and_input, input_only };

inline constexpr std::size_t kAllLayers = std::numeric_limits<std::size_t>::max();

/// Glorot-uniform weights, zero biases. Weights are drawn in f32 precision so a
/// freshly initialized model survives the f32 weight file bit-for-bit.
ModelState init_model(const ModelSpec& spec, std::uint64_t seed);

/// Runs the first `layer_count` layers. `input` is either one sample (shape ==
/// spec.input_shape) or a batch with a leading batch axis. When `tape` is given
/// every intermediate activation is retained for backward().
Tensor forward(const ModelState& model, const Tensor& input, Tape* tape = nullptr,
               std::size_t layer_count = kAllLayers);

/// Forward through all layers except a trailing softmax.
Tensor logits(const ModelState& model, const Tensor& input, Tape* tape = nullptr);

/// Reverse pass over the layers recorded in `tape`. `output_grad` is shaped
/// like the tape's last activation (or empty, meaning zero). `injected`, when
/// non-empty, holds one tensor per activation (empty entries allowed) whose
/// values are added to the upstream gradient at that activation.
Gradients backward(const ModelState& model, const Tape& tape, const Tensor& output_grad,
                   GradTarget target = GradTarget::params_and_input, std::span<const Tensor> injected = {});

}  // namespace phyadv::nn
