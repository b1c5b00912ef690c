#include "loren/tensor.hpp"

#include <atomic>
#include <cmath>
#include <utility>

#include "loren/errors.hpp"

namespace loren {

namespace {
std::atomic<uint64_t> g_tensor_allocations{0};
}

int64_t shape_numel(const std::vector<int64_t>& shape) {
  int64_t n = 1;
  for (int64_t d : shape) {
    if (d < 0) throw ShapeError("negative tensor dimension");
    n *= d;
  }
  return n;
}

Tensor::Tensor(std::vector<int64_t> shape) : shape_(std::move(shape)) {
  const int64_t n = shape_numel(shape_);
  data_.assign(static_cast<size_t>(n), 0.0);
  if (n > 0) g_tensor_allocations.fetch_add(1, std::memory_order_relaxed);
}

Tensor::Tensor(const Tensor& other) : shape_(other.shape_), data_(other.data_) {
  if (!data_.empty()) g_tensor_allocations.fetch_add(1, std::memory_order_relaxed);
}

Tensor& Tensor::operator=(const Tensor& other) {
  if (this != &other) {
    shape_ = other.shape_;
    data_ = other.data_;
    if (!data_.empty()) g_tensor_allocations.fetch_add(1, std::memory_order_relaxed);
  }
  return *this;
}

Tensor Tensor::zeros(std::vector<int64_t> shape) { return Tensor(std::move(shape)); }

Tensor Tensor::full(std::vector<int64_t> shape, double value) {
  Tensor t(std::move(shape));
  for (int64_t i = 0; i < t.numel(); ++i) t[i] = value;
  return t;
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from(std::vector<int64_t> shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<int64_t>(values.size()))
    throw ShapeError("Tensor::from: shape does not match value count");
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  if (!t.data_.empty()) g_tensor_allocations.fetch_add(1, std::memory_order_relaxed);
  return t;
}

bool Tensor::all_finite() const {
  for (double v : data_)
    if (!std::isfinite(v)) return false;
  return true;
}

std::string Tensor::shape_str() const {
  std::string s = "[";
  for (size_t i = 0; i < shape_.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(shape_[i]);
  }
  s += ']';
  return s;
}

uint64_t tensor_allocations() { return g_tensor_allocations.load(std::memory_order_relaxed); }

}  // namespace loren
