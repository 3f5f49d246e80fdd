#include "phyadv/nn/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>

#include "phyadv/errors.hpp"

namespace phyadv::nn {

std::size_t shape_size(const Shape& shape) noexcept {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

namespace {
void check_shape(const Shape& shape) {
  if (shape.empty()) throw ConfigError("tensor shape must have at least one dimension");
  for (auto d : shape)
    if (d == 0) throw ConfigError("tensor dimensions must be positive, got " + shape_string(shape));
}
}  // namespace

Tensor::Tensor(Shape shape, double fill) : shape_(std::move(shape)) {
  check_shape(shape_);
  data_.assign(shape_size(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(data.begin(), data.end()) {
  check_shape(shape_);
  if (shape_size(shape_) != data_.size())
    throw ConfigError("tensor data length " + std::to_string(data_.size()) + " does not match shape " +
                      shape_string(shape_));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return Tensor({values.size()}, std::vector<double>(values));
}

std::size_t Tensor::row_size() const noexcept { return shape_.empty() ? 0 : data_.size() / shape_[0]; }

std::span<double> Tensor::row(std::size_t i) {
  const auto n = row_size();
  return std::span<double>(data_).subspan(i * n, n);
}

std::span<const double> Tensor::row(std::size_t i) const {
  const auto n = row_size();
  return std::span<const double>(data_).subspan(i * n, n);
}

std::span<double> Tensor::grad() {
  if (!grad_) grad_.emplace(data_.size(), 0.0);
  return *grad_;
}

std::span<const double> Tensor::grad() const {
  if (!grad_) throw StateError("tensor has no gradient");
  return *grad_;
}

void Tensor::zero_grad() {
  if (grad_)
    std::fill(grad_->begin(), grad_->end(), 0.0);
  else
    grad_.emplace(data_.size(), 0.0);
}

Tensor Tensor::reshaped(Shape shape) const {
  if (shape_size(shape) != data_.size())
    throw ConfigError("cannot reshape " + shape_string(shape_) + " to " + shape_string(shape));
  Tensor out;
  out.shape_ = std::move(shape);
  out.data_ = data_;
  return out;
}

void Tensor::fill(double value) noexcept { std::fill(data_.begin(), data_.end(), value); }

bool Tensor::all_finite() const noexcept {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

double dot(std::span<const double> a, std::span<const double> b) noexcept {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double squared_norm(std::span<const double> a) noexcept { return dot(a, a); }

double l2_norm(std::span<const double> a) noexcept { return std::sqrt(squared_norm(a)); }

void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += alpha * x[i];
}

void scale(std::span<double> x, double alpha) noexcept {
  for (auto& v : x) v *= alpha;
}

void project_l2_ball(std::span<double> x, double radius) noexcept {
  const double norm = l2_norm(x);
  if (norm > radius && norm > 0.0) scale(x, radius / norm);
}

std::size_t argmax(std::span<const double> x) noexcept {
  return static_cast<std::size_t>(std::distance(x.begin(), std::max_element(x.begin(), x.end())));
}

}  // namespace phyadv::nn
