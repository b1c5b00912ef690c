#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace loren {

// Dense row-major array of doubles. Grid-shaped activations use [T, F, C]
// with the channel axis last.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int64_t> shape);  // zero filled
  Tensor(const Tensor& other);
  Tensor(Tensor&& other) noexcept = default;
  Tensor& operator=(const Tensor& other);
  Tensor& operator=(Tensor&& other) noexcept = default;

  static Tensor zeros(std::vector<int64_t> shape);
  static Tensor full(std::vector<int64_t> shape, double value);
  static Tensor scalar(double value);
  static Tensor from(std::vector<int64_t> shape, std::vector<double> values);

  const std::vector<int64_t>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int64_t dim(int axis) const { return shape_[static_cast<size_t>(axis)]; }
  int64_t numel() const { return static_cast<int64_t>(data_.size()); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  double& operator[](int64_t i) { return data_[static_cast<size_t>(i)]; }
  double operator[](int64_t i) const { return data_[static_cast<size_t>(i)]; }

  // Rank-3 accessors for [T, F, C] tensors.
  double& at(int64_t t, int64_t f, int64_t c) {
    return data_[static_cast<size_t>((t * shape_[1] + f) * shape_[2] + c)];
  }
  double at(int64_t t, int64_t f, int64_t c) const {
    return data_[static_cast<size_t>((t * shape_[1] + f) * shape_[2] + c)];
  }

  bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
  bool all_finite() const;
  std::string shape_str() const;  // "[14,128,32]"

 private:
  std::vector<int64_t> shape_;
  std::vector<double> data_;
};

int64_t shape_numel(const std::vector<int64_t>& shape);

// Process-wide count of tensor buffer allocations. Tests use deltas of this
// to assert that an operation allocates no tensor storage.
uint64_t tensor_allocations();

}  // namespace loren
