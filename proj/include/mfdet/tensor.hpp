#pragma once

#include <cstddef>
#include <initializer_list>
#include <span>
#include <string>
#include <vector>

namespace mfdet {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_to_string(const Shape& shape);

/// Dense row-major float32 array with an optional gradient buffer.
///
/// The shape is fixed at construction; `reshaped` returns a copy with the
/// same element count. The gradient buffer is allocated lazily by
/// `enable_grad` and always has the same length as the data.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(Shape shape, float fill = 0.0f);
  Tensor(Shape shape, std::vector<float> data);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t size() const { return data_.size(); }
  bool empty() const { return data_.empty(); }

  std::span<float> data() { return data_; }
  std::span<const float> data() const { return data_; }
  float* raw() { return data_.data(); }
  const float* raw() const { return data_.data(); }
  float& operator[](std::size_t i) { return data_[i]; }
  float operator[](std::size_t i) const { return data_[i]; }

  /// NCHW element access; requires rank 4.
  float& at(std::size_t n, std::size_t c, std::size_t h, std::size_t w);
  float at(std::size_t n, std::size_t c, std::size_t h, std::size_t w) const;

  bool requires_grad() const { return grad_enabled_; }
  void enable_grad();
  std::span<float> grad();
  std::span<const float> grad() const;
  void zero_grad();

  Tensor reshaped(Shape shape) const;
  void fill(float value);

  /// Bitwise equality of shape and data (gradients ignored).
  bool identical(const Tensor& other) const;

 private:
  Shape shape_;
  std::vector<float> data_;
  std::vector<float> grad_;
  bool grad_enabled_ = false;
};

float max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace mfdet
