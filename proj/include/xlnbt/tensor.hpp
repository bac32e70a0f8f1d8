#pragma once

#include <cstddef>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "xlnbt/error.hpp"

namespace xlnbt {

// Dense row-major storage with an explicit shape. Vectors have rank 1,
// matrices rank 2. Values are always 64-bit.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<std::size_t> shape);
  Tensor(std::vector<std::size_t> shape, std::vector<double> data);

  static Tensor vector(std::vector<double> values);
  static Tensor matrix(std::size_t rows, std::size_t cols, std::vector<double> values);

  const std::vector<std::size_t>& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t size() const { return data_.size(); }
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> data() { return data_; }
  std::span<const double> data() const { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator[](std::size_t i) { return data_[i]; }
  double operator[](std::size_t i) const { return data_[i]; }
  double& at(std::size_t r, std::size_t c) { return data_[r * cols() + c]; }
  double at(std::size_t r, std::size_t c) const { return data_[r * cols() + c]; }

  bool all_finite() const;
  // Throws NumericError naming `what` if any value is NaN or infinite.
  void check_finite(std::string_view what) const;

  friend bool operator==(const Tensor&, const Tensor&) = default;

 private:
  std::vector<std::size_t> shape_;
  std::vector<double> data_;
};

std::size_t shape_product(const std::vector<std::size_t>& shape);
std::string shape_string(const std::vector<std::size_t>& shape);

// W·x + b for a rows×cols matrix W.
std::vector<double> affine(const Tensor& weight, std::span<const double> x,
                           std::span<const double> bias);

// Named tensors with a per-entry trainable flag. Iteration order is the
// lexicographic order of names, which keeps serialization deterministic.
class ParameterSet {
 public:
  struct Entry {
    Tensor value;
    bool trainable = true;
  };

  void add(const std::string& name, Tensor value, bool trainable = true);
  bool contains(const std::string& name) const;
  const Tensor& get(const std::string& name) const;
  Tensor& get_mutable(const std::string& name);
  bool trainable(const std::string& name) const;
  void set_trainable(const std::string& name, bool trainable);
  std::vector<std::string> names() const;
  std::size_t size() const { return entries_.size(); }

  auto begin() const { return entries_.begin(); }
  auto end() const { return entries_.end(); }
  auto begin() { return entries_.begin(); }
  auto end() { return entries_.end(); }

  friend bool operator==(const ParameterSet& a, const ParameterSet& b);

 private:
  std::map<std::string, Entry> entries_;
};

inline bool operator==(const ParameterSet::Entry& a, const ParameterSet::Entry& b) {
  return a.trainable == b.trainable && a.value == b.value;
}

inline bool operator==(const ParameterSet& a, const ParameterSet& b) {
  return a.entries_ == b.entries_;
}

using GradientMap = std::map<std::string, Tensor>;

// Bitwise equality (distinguishes -0.0 from 0.0 and compares NaN payloads).
bool bitwise_equal(const Tensor& a, const Tensor& b);

}  // namespace xlnbt
