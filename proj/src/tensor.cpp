#include "xlnbt/tensor.hpp"

#include <cmath>
#include <cstring>
#include <numeric>
#include <sstream>

namespace xlnbt {

std::size_t shape_product(const std::vector<std::size_t>& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1},
                         [](std::size_t a, std::size_t b) { return a * b; });
}

std::string shape_string(const std::vector<std::size_t>& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) out << 'x';
    out << shape[i];
  }
  out << ']';
  return out.str();
}

Tensor::Tensor(std::vector<std::size_t> shape)
    : shape_(std::move(shape)), data_(shape_product(shape_), 0.0) {}

Tensor::Tensor(std::vector<std::size_t> shape, std::vector<double> data)
    : shape_(std::move(shape)), data_(std::move(data)) {
  if (shape_product(shape_) != data_.size()) {
    throw ShapeError("tensor shape " + shape_string(shape_) + " does not match " +
                     std::to_string(data_.size()) + " values");
  }
}

Tensor Tensor::vector(std::vector<double> values) {
  const std::size_t n = values.size();
  return Tensor({n}, std::move(values));
}

Tensor Tensor::matrix(std::size_t rows, std::size_t cols, std::vector<double> values) {
  return Tensor({rows, cols}, std::move(values));
}

std::size_t Tensor::rows() const {
  if (shape_.empty()) return 1;
  return shape_[0];
}

std::size_t Tensor::cols() const {
  if (shape_.size() < 2) return 1;
  return shape_[1];
}

bool Tensor::all_finite() const {
  for (double v : data_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

void Tensor::check_finite(std::string_view what) const {
  if (!all_finite()) {
    throw NumericError("non-finite value in " + std::string(what));
  }
}

std::vector<double> affine(const Tensor& weight, std::span<const double> x,
                           std::span<const double> bias) {
  if (weight.rank() != 2 || weight.cols() != x.size() || weight.rows() != bias.size()) {
    throw ShapeError("affine: weight " + shape_string(weight.shape()) + " with x of length " +
                     std::to_string(x.size()) + " and bias of length " +
                     std::to_string(bias.size()));
  }
  const std::size_t rows = weight.rows();
  const std::size_t cols = weight.cols();
  std::vector<double> out(rows);
  const double* w = weight.data().data();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = bias[i];
    for (std::size_t j = 0; j < cols; ++j) acc += w[i * cols + j] * x[j];
    out[i] = acc;
  }
  return out;
}

void ParameterSet::add(const std::string& name, Tensor value, bool trainable) {
  if (entries_.contains(name)) throw Error("duplicate parameter name: " + name);
  entries_.emplace(name, Entry{std::move(value), trainable});
}

bool ParameterSet::contains(const std::string& name) const { return entries_.contains(name); }

const Tensor& ParameterSet::get(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  return it->second.value;
}

Tensor& ParameterSet::get_mutable(const std::string& name) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  return it->second.value;
}

bool ParameterSet::trainable(const std::string& name) const {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  return it->second.trainable;
}

void ParameterSet::set_trainable(const std::string& name, bool trainable) {
  auto it = entries_.find(name);
  if (it == entries_.end()) throw Error("unknown parameter: " + name);
  it->second.trainable = trainable;
}

std::vector<std::string> ParameterSet::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [name, _] : entries_) out.push_back(name);
  return out;
}

bool bitwise_equal(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  return std::memcmp(a.data().data(), b.data().data(), a.size() * sizeof(double)) == 0;
}

}  // namespace xlnbt
