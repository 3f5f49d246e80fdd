#pragma once

#include <cstddef>
#include <initializer_list>
#include <new>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace phyadv::nn {

/// Cache-line aligned allocator. Vectorized kernels pick their peeling from the
/// buffer address, so a fixed alignment keeps results independent of where a
/// tensor happens to be allocated.
template <typename T>
struct AlignedAllocator {
  using value_type = T;
  static constexpr std::align_val_t kAlign{64};

  AlignedAllocator() noexcept = default;
  template <typename U>
  AlignedAllocator(const AlignedAllocator<U>&) noexcept {}

  T* allocate(std::size_t n) { return static_cast<T*>(::operator new(n * sizeof(T), kAlign)); }
  void deallocate(T* p, std::size_t) noexcept { ::operator delete(p, kAlign); }

  template <typename U>
  bool operator==(const AlignedAllocator<U>&) const noexcept { return true; }
};

using Buffer = std::vector<double, AlignedAllocator<double>>;

using Shape = std::vector<std::size_t>;

std::size_t shape_size(const Shape& shape) noexcept;
std::string shape_string(const Shape& shape);

/// Dense n-dimensional real array, row-major, with an optional gradient slot of
/// identical shape.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, double fill = 0.0);
  Tensor(Shape shape, std::vector<double> data);

  /// Rank-1 tensor from a literal list.
  static Tensor vector(std::initializer_list<double> values);

  const Shape& shape() const noexcept { return shape_; }
  std::size_t rank() const noexcept { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }
  double* raw() noexcept { return data_.data(); }
  const double* raw() const noexcept { return data_.data(); }

  double& operator[](std::size_t i) noexcept { return data_[i]; }
  double operator[](std::size_t i) const noexcept { return data_[i]; }

  /// Row `i` along the leading axis.
  std::span<double> row(std::size_t i);
  std::span<const double> row(std::size_t i) const;
  std::size_t row_size() const noexcept;

  bool has_grad() const noexcept { return grad_.has_value(); }
  /// Allocates a zero gradient if absent.
  std::span<double> grad();
  std::span<const double> grad() const;
  void zero_grad();
  void drop_grad() noexcept { grad_.reset(); }

  /// Same data viewed under a new shape of equal size.
  Tensor reshaped(Shape shape) const;

  void fill(double value) noexcept;
  bool all_finite() const noexcept;

  bool operator==(const Tensor& other) const noexcept {
    return shape_ == other.shape_ && data_ == other.data_;
  }

 private:
  Shape shape_;
  Buffer data_;
  std::optional<Buffer> grad_;
};

double dot(std::span<const double> a, std::span<const double> b) noexcept;
double squared_norm(std::span<const double> a) noexcept;
double l2_norm(std::span<const double> a) noexcept;
/// y += alpha * x
void axpy(double alpha, std::span<const double> x, std::span<double> y) noexcept;
void scale(std::span<double> x, double alpha) noexcept;
/// Scales `x` onto the L2 ball of the given radius if it lies outside.
void project_l2_ball(std::span<double> x, double radius) noexcept;
std::size_t argmax(std::span<const double> x) noexcept;

}  // namespace phyadv::nn
