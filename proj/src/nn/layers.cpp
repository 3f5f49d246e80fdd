#include "phyadv/nn/layers.hpp"

#include <array>
#include <string>

#include "phyadv/errors.hpp"

namespace phyadv::nn {

namespace {
constexpr std::array<std::pair<LayerKind, std::string_view>, 6> kTags{{
    {LayerKind::dense, "DENSE"},
    {LayerKind::conv1d, "CONV1D"},
    {LayerKind::relu, "RELU"},
    {LayerKind::softmax, "SOFTMAX"},
    {LayerKind::energy_norm, "ENORM"},
    {LayerKind::flatten, "FLATTEN"},
}};
}  // namespace

std::string_view layer_tag(LayerKind kind) noexcept {
  for (const auto& [k, tag] : kTags)
    if (k == kind) return tag;
  return "?";
}

std::optional<LayerKind> layer_kind_from_tag(std::string_view tag) noexcept {
  for (const auto& [k, t] : kTags)
    if (t == tag) return k;
  return std::nullopt;
}

LayerSpec LayerSpec::dense(std::size_t in, std::size_t out) {
  LayerSpec s;
  s.kind = LayerKind::dense;
  s.in = in;
  s.out = out;
  return s;
}

LayerSpec LayerSpec::conv1d(std::size_t in_channels, std::size_t out_channels, std::size_t kernel,
                            std::size_t stride) {
  LayerSpec s;
  s.kind = LayerKind::conv1d;
  s.in_channels = in_channels;
  s.out_channels = out_channels;
  s.kernel = kernel;
  s.stride = stride;
  return s;
}

LayerSpec LayerSpec::relu() { return LayerSpec{}; }

LayerSpec LayerSpec::softmax() {
  LayerSpec s;
  s.kind = LayerKind::softmax;
  return s;
}

LayerSpec LayerSpec::energy_norm(std::size_t n) {
  LayerSpec s;
  s.kind = LayerKind::energy_norm;
  s.norm_dim = n;
  return s;
}

LayerSpec LayerSpec::flatten() {
  LayerSpec s;
  s.kind = LayerKind::flatten;
  return s;
}

std::vector<std::uint32_t> LayerSpec::sizes() const {
  auto u = [](std::size_t v) { return static_cast<std::uint32_t>(v); };
  switch (kind) {
    case LayerKind::dense:
      return {u(in), u(out)};
    case LayerKind::conv1d:
      return {u(in_channels), u(out_channels), u(kernel), u(stride)};
    case LayerKind::energy_norm:
      return {u(norm_dim)};
    default:
      return {};
  }
}

LayerSpec LayerSpec::from_sizes(LayerKind kind, const std::vector<std::uint32_t>& sizes) {
  auto need = [&](std::size_t n) {
    if (sizes.size() != n)
      throw FormatError(std::string(layer_tag(kind)) + " expects " + std::to_string(n) + " sizes, got " +
                        std::to_string(sizes.size()));
  };
  switch (kind) {
    case LayerKind::dense:
      need(2);
      return dense(sizes[0], sizes[1]);
    case LayerKind::conv1d:
      need(4);
      return conv1d(sizes[0], sizes[1], sizes[2], sizes[3]);
    case LayerKind::energy_norm:
      need(1);
      return energy_norm(sizes[0]);
    case LayerKind::relu:
      need(0);
      return relu();
    case LayerKind::softmax:
      need(0);
      return softmax();
    case LayerKind::flatten:
      need(0);
      return flatten();
  }
  throw FormatError("unknown layer kind");
}

std::vector<Shape> ModelSpec::activation_shapes() const {
  if (input_shape.empty()) throw ConfigError("model input shape is empty");
  for (auto d : input_shape)
    if (d == 0) throw ConfigError("model input shape has a zero dimension");
  std::vector<Shape> shapes{input_shape};
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const auto& l = layers[i];
    const Shape& s = shapes.back();
    auto fail = [&](const std::string& what) {
      throw ConfigError("layer " + std::to_string(i) + " (" + std::string(layer_tag(l.kind)) + "): " + what +
                        ", incoming shape " + shape_string(s));
    };
    switch (l.kind) {
      case LayerKind::dense:
        if (l.in == 0 || l.out == 0) fail("dense sizes must be positive");
        if (s.size() != 1 || s[0] != l.in) fail("expects [" + std::to_string(l.in) + "]");
        shapes.push_back({l.out});
        break;
      case LayerKind::conv1d: {
        if (l.in_channels == 0 || l.out_channels == 0 || l.kernel == 0 || l.stride == 0)
          fail("conv1d sizes must be positive");
        if (s.size() != 2 || s[0] != l.in_channels) fail("expects [" + std::to_string(l.in_channels) + ",L]");
        if (s[1] < l.kernel) fail("kernel longer than input");
        shapes.push_back({l.out_channels, (s[1] - l.kernel) / l.stride + 1});
        break;
      }
      case LayerKind::relu:
        shapes.push_back(s);
        break;
      case LayerKind::softmax:
        if (s.size() != 1) fail("softmax expects a rank-1 sample");
        shapes.push_back(s);
        break;
      case LayerKind::energy_norm:
        if (s.size() != 1 || s[0] != l.norm_dim) fail("energy-norm expects [" + std::to_string(l.norm_dim) + "]");
        shapes.push_back(s);
        break;
      case LayerKind::flatten:
        shapes.push_back({shape_size(s)});
        break;
    }
  }
  return shapes;
}

}  // namespace phyadv::nn
