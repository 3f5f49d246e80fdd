#include "phyadv/nn/model.hpp"

#include <Eigen/Core>
#include <cmath>
#include <random>

#include "phyadv/errors.hpp"
#include "phyadv/rng.hpp"

namespace phyadv::nn {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MapMat = Eigen::Map<RowMat>;
using ConstMapMat = Eigen::Map<const RowMat>;
using Eigen::Index;

Index ix(std::size_t v) { return static_cast<Index>(v); }

Shape batched(std::size_t batch, const Shape& sample) {
  Shape s{batch};
  s.insert(s.end(), sample.begin(), sample.end());
  return s;
}

// ---- dense --------------------------------------------------------------

void dense_forward(const LayerSpec& l, const LayerParams& p, const Tensor& x, Tensor& y) {
  const auto b = x.dim(0);
  ConstMapMat X(x.raw(), ix(b), ix(l.in));
  ConstMapMat W(p.weight.raw(), ix(l.out), ix(l.in));
  MapMat Y(y.raw(), ix(b), ix(l.out));
  Y.noalias() = X * W.transpose();
  Y.rowwise() += Eigen::Map<const Eigen::RowVectorXd>(p.bias.raw(), ix(l.out));
}

void dense_backward(const LayerSpec& l, const LayerParams& p, const Tensor& x, const Tensor& dy, Tensor& dx,
                    LayerParams* dp) {
  const auto b = x.dim(0);
  ConstMapMat dY(dy.raw(), ix(b), ix(l.out));
  ConstMapMat W(p.weight.raw(), ix(l.out), ix(l.in));
  MapMat dX(dx.raw(), ix(b), ix(l.in));
  dX.noalias() = dY * W;
  if (dp) {
    ConstMapMat X(x.raw(), ix(b), ix(l.in));
    MapMat dW(dp->weight.raw(), ix(l.out), ix(l.in));
    dW.noalias() += dY.transpose() * X;
    Eigen::Map<Eigen::RowVectorXd>(dp->bias.raw(), ix(l.out)) += dY.colwise().sum();
  }
}

// ---- conv1d (im2col per sample) -------------------------------------------

void im2col(const LayerSpec& l, const double* x, std::size_t len, std::size_t out_len, RowMat& cols) {
  cols.resize(ix(l.in_channels * l.kernel), ix(out_len));
  for (std::size_t c = 0; c < l.in_channels; ++c)
    for (std::size_t k = 0; k < l.kernel; ++k) {
      double* row = cols.data() + (c * l.kernel + k) * out_len;
      const double* src = x + c * len + k;
      for (std::size_t t = 0; t < out_len; ++t) row[t] = src[t * l.stride];
    }
}

void conv_forward(const LayerSpec& l, const LayerParams& p, const Tensor& x, Tensor& y) {
  const auto b = x.dim(0), len = x.dim(2), out_len = y.dim(2);
  ConstMapMat W(p.weight.raw(), ix(l.out_channels), ix(l.in_channels * l.kernel));
  RowMat cols;
  for (std::size_t s = 0; s < b; ++s) {
    im2col(l, x.raw() + s * l.in_channels * len, len, out_len, cols);
    MapMat Y(y.raw() + s * l.out_channels * out_len, ix(l.out_channels), ix(out_len));
    Y.noalias() = W * cols;
    Y.colwise() += Eigen::Map<const Eigen::VectorXd>(p.bias.raw(), ix(l.out_channels));
  }
}

void conv_backward(const LayerSpec& l, const LayerParams& p, const Tensor& x, const Tensor& dy, Tensor& dx,
                   LayerParams* dp) {
  const auto b = x.dim(0), len = x.dim(2), out_len = dy.dim(2);
  const auto ck = l.in_channels * l.kernel;
  ConstMapMat W(p.weight.raw(), ix(l.out_channels), ix(ck));
  RowMat cols, dcols;
  dx.fill(0.0);
  for (std::size_t s = 0; s < b; ++s) {
    ConstMapMat dY(dy.raw() + s * l.out_channels * out_len, ix(l.out_channels), ix(out_len));
    if (dp) {
      im2col(l, x.raw() + s * l.in_channels * len, len, out_len, cols);
      MapMat(dp->weight.raw(), ix(l.out_channels), ix(ck)).noalias() += dY * cols.transpose();
      Eigen::Map<Eigen::VectorXd>(dp->bias.raw(), ix(l.out_channels)) += dY.rowwise().sum();
    }
    dcols.noalias() = W.transpose() * dY;
    double* dxs = dx.raw() + s * l.in_channels * len;
    for (std::size_t c = 0; c < l.in_channels; ++c)
      for (std::size_t k = 0; k < l.kernel; ++k) {
        const double* row = dcols.data() + (c * l.kernel + k) * out_len;
        double* dst = dxs + c * len + k;
        for (std::size_t t = 0; t < out_len; ++t) dst[t * l.stride] += row[t];
      }
  }
}

// ---- pointwise / normalizing layers ----------------------------------------

void softmax_rows(const double* x, double* y, std::size_t rows, std::size_t n) {
  for (std::size_t r = 0; r < rows; ++r) {
    const double* xr = x + r * n;
    double* yr = y + r * n;
    double m = xr[0];
    for (std::size_t i = 1; i < n; ++i) m = std::max(m, xr[i]);
    double sum = 0.0;
    for (std::size_t i = 0; i < n; ++i) sum += (yr[i] = std::exp(xr[i] - m));
    for (std::size_t i = 0; i < n; ++i) yr[i] /= sum;
  }
}

void energy_norm_forward(const LayerSpec& l, const Tensor& x, Tensor& y) {
  const auto n = l.norm_dim;
  const double root_n = std::sqrt(static_cast<double>(n));
  for (std::size_t s = 0; s < x.dim(0); ++s) {
    auto xs = x.row(s);
    auto ys = y.row(s);
    const double norm = l2_norm(xs);
    if (!(norm > 0.0) || !std::isfinite(norm)) throw NumericError("energy-norm applied to a zero or non-finite vector");
    for (std::size_t i = 0; i < n; ++i) ys[i] = root_n * xs[i] / norm;
  }
}

// dx = (sqrt(n)/|v|) (dy - u (u.dy)), u = v/|v|
void energy_norm_backward(const LayerSpec& l, const Tensor& x, const Tensor& dy, Tensor& dx) {
  const auto n = l.norm_dim;
  const double root_n = std::sqrt(static_cast<double>(n));
  for (std::size_t s = 0; s < x.dim(0); ++s) {
    auto xs = x.row(s);
    auto dys = dy.row(s);
    auto dxs = dx.row(s);
    const double norm = l2_norm(xs);
    const double u_dot_dy = dot(xs, dys) / norm;
    for (std::size_t i = 0; i < n; ++i) dxs[i] = root_n / norm * (dys[i] - xs[i] / norm * u_dot_dy);
  }
}

void run_layer(const LayerSpec& l, const LayerParams& p, const Tensor& x, Tensor& y) {
  switch (l.kind) {
    case LayerKind::dense:
      dense_forward(l, p, x, y);
      break;
    case LayerKind::conv1d:
      conv_forward(l, p, x, y);
      break;
    case LayerKind::relu:
      for (std::size_t i = 0; i < x.size(); ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
      break;
    case LayerKind::softmax:
      softmax_rows(x.raw(), y.raw(), x.dim(0), x.row_size());
      break;
    case LayerKind::energy_norm:
      energy_norm_forward(l, x, y);
      break;
    case LayerKind::flatten:
      std::copy(x.data().begin(), x.data().end(), y.data().begin());
      break;
  }
}

void layer_backward(const LayerSpec& l, const LayerParams& p, const Tensor& x, const Tensor& y, const Tensor& dy,
                    Tensor& dx, LayerParams* dp) {
  switch (l.kind) {
    case LayerKind::dense:
      dense_backward(l, p, x, dy, dx, dp);
      break;
    case LayerKind::conv1d:
      conv_backward(l, p, x, dy, dx, dp);
      break;
    case LayerKind::relu:
      for (std::size_t i = 0; i < x.size(); ++i) dx[i] = x[i] > 0.0 ? dy[i] : 0.0;
      break;
    case LayerKind::softmax: {
      const auto n = y.row_size();
      for (std::size_t s = 0; s < y.dim(0); ++s) {
        auto ys = y.row(s);
        auto dys = dy.row(s);
        auto dxs = dx.row(s);
        const double inner = dot(ys, dys);
        for (std::size_t i = 0; i < n; ++i) dxs[i] = ys[i] * (dys[i] - inner);
      }
      break;
    }
    case LayerKind::energy_norm:
      energy_norm_backward(l, x, dy, dx);
      break;
    case LayerKind::flatten:
      std::copy(dy.data().begin(), dy.data().end(), dx.data().begin());
      break;
  }
}

LayerParams zero_like(const LayerParams& p) {
  if (p.empty()) return {};
  return {Tensor(p.weight.shape()), Tensor(p.bias.shape())};
}

}  // namespace

std::vector<Tensor*> ModelState::parameters() {
  std::vector<Tensor*> out;
  for (auto& p : params)
    if (!p.empty()) {
      out.push_back(&p.weight);
      out.push_back(&p.bias);
    }
  return out;
}

std::vector<const Tensor*> ModelState::parameters() const {
  std::vector<const Tensor*> out;
  for (const auto& p : params)
    if (!p.empty()) {
      out.push_back(&p.weight);
      out.push_back(&p.bias);
    }
  return out;
}

std::size_t ModelState::parameter_count() const {
  std::size_t n = 0;
  for (const auto* t : parameters()) n += t->size();
  return n;
}

bool ModelState::ends_with_softmax() const noexcept {
  return !spec.layers.empty() && spec.layers.back().kind == LayerKind::softmax;
}

std::vector<const Tensor*> Gradients::tensors() const {
  std::vector<const Tensor*> out;
  for (const auto& p : params)
    if (!p.empty()) {
      out.push_back(&p.weight);
      out.push_back(&p.bias);
    }
  return out;
}

ModelState init_model(const ModelSpec& spec, std::uint64_t seed) {
  spec.validate();
  ModelState m;
  m.spec = spec;
  m.seed = seed;
  Rng rng(mix_seed(seed));
  for (const auto& l : spec.layers) {
    LayerParams p;
    std::size_t fan_in = 0, fan_out = 0;
    if (l.kind == LayerKind::dense) {
      p.weight = Tensor({l.out, l.in});
      p.bias = Tensor({l.out});
      fan_in = l.in;
      fan_out = l.out;
    } else if (l.kind == LayerKind::conv1d) {
      p.weight = Tensor({l.out_channels, l.in_channels, l.kernel});
      p.bias = Tensor({l.out_channels});
      fan_in = l.in_channels * l.kernel;
      fan_out = l.out_channels * l.kernel;
    }
    if (!p.empty()) {
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      std::uniform_real_distribution<double> dist(-limit, limit);
      for (auto& w : p.weight.data()) w = static_cast<double>(static_cast<float>(dist(rng)));
    }
    m.params.push_back(std::move(p));
  }
  return m;
}

Tensor forward(const ModelState& model, const Tensor& input, Tape* tape, std::size_t layer_count) {
  const auto shapes = model.spec.activation_shapes();
  const auto& in_shape = shapes.front();
  const std::size_t n_layers = std::min(layer_count, model.spec.layers.size());

  bool unbatched = false;
  std::size_t batch = 0;
  if (input.shape() == in_shape) {
    unbatched = true;
    batch = 1;
  } else if (input.rank() == in_shape.size() + 1 && Shape(input.shape().begin() + 1, input.shape().end()) == in_shape) {
    batch = input.dim(0);
  } else {
    throw ConfigError("input shape " + shape_string(input.shape()) + " does not match model input " +
                      shape_string(in_shape));
  }
  if (model.params.size() != model.spec.layers.size()) throw ConfigError("model params do not match spec");

  Tensor x = input.reshaped(batched(batch, in_shape));
  if (tape) {
    tape->activations.clear();
    tape->activations.reserve(n_layers + 1);
    tape->activations.push_back(x);
    tape->unbatched = unbatched;
  }
  for (std::size_t i = 0; i < n_layers; ++i) {
    Tensor y(batched(batch, shapes[i + 1]));
    run_layer(model.spec.layers[i], model.params[i], x, y);
    if (tape) tape->activations.push_back(y);
    x = std::move(y);
  }
  if (unbatched) return x.reshaped(shapes[n_layers]);
  return x;
}

Tensor logits(const ModelState& model, const Tensor& input, Tape* tape) {
  const auto n = model.spec.layers.size() - (model.ends_with_softmax() ? 1 : 0);
  return forward(model, input, tape, n);
}

Gradients backward(const ModelState& model, const Tape& tape, const Tensor& output_grad, GradTarget target,
                   std::span<const Tensor> injected) {
  if (!tape.recorded()) throw StateError("backward called without a recorded forward pass");
  const auto n_layers = tape.layers_run();
  if (!injected.empty() && injected.size() != tape.activations.size())
    throw ConfigError("injected gradients must have one entry per activation");

  const Tensor& out = tape.activations.back();
  Tensor dy(out.shape());
  if (!output_grad.empty()) {
    if (output_grad.size() != out.size())
      throw ConfigError("loss gradient shape " + shape_string(output_grad.shape()) + " does not match output " +
                        shape_string(out.shape()));
    std::copy(output_grad.data().begin(), output_grad.data().end(), dy.data().begin());
  }

  Gradients g;
  const bool want_params = target == GradTarget::params_and_input;
  if (want_params) {
    g.params.reserve(model.params.size());
    for (const auto& p : model.params) g.params.push_back(zero_like(p));
  }
  auto add_injected = [&](std::size_t a, Tensor& grad) {
    if (!injected.empty() && !injected[a].empty()) axpy(1.0, injected[a].data(), grad.data());
  };

  add_injected(n_layers, dy);
  for (std::size_t i = n_layers; i-- > 0;) {
    const auto& l = model.spec.layers[i];
    const Tensor& x = tape.activations[i];
    Tensor dx(x.shape());
    LayerParams* dp = (want_params && l.has_params()) ? &g.params[i] : nullptr;
    layer_backward(l, model.params[i], x, tape.activations[i + 1], dy, dx, dp);
    add_injected(i, dx);
    dy = std::move(dx);
  }
  if (tape.unbatched) {
    Shape s(dy.shape().begin() + 1, dy.shape().end());
    g.input = dy.reshaped(std::move(s));
  } else {
    g.input = std::move(dy);
  }
  return g;
}

}  // namespace phyadv::nn
