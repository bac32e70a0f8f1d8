#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

#include "xlnbt/batch_norm.hpp"
#include "xlnbt/tensor.hpp"

namespace xlnbt {

// Handle to a node recorded on a Tape.
struct Var {
  static constexpr std::uint32_t kNone = 0xffffffffu;
  std::uint32_t id = kNone;
  bool valid() const { return id != kNone; }
};

// A minimal reverse-mode tape over dense vectors. Nodes are appended in
// evaluation order, so replaying them backwards is a valid topological
// order. Only the handful of operations the tracker needs are provided.
//
// Leaves created with track=true are the differentiation targets; their
// gradients are returned by gradients() keyed by the name given at creation.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  Var constant(std::vector<double> values);
  Var constant(std::span<const double> values);
  Var scalar(double value);
  Var zeros(std::size_t n);
  // Leaf bound to a tensor. Repeated calls with the same tensor object return
  // the same node.
  Var leaf(const Tensor& tensor, const std::string& name, bool track);

  std::span<const double> value(Var v) const { return nodes_[v.id].value; }
  double scalar_value(Var v) const { return nodes_[v.id].value.at(0); }
  std::size_t size(Var v) const { return nodes_[v.id].value.size(); }
  bool requires_grad(Var v) const { return nodes_[v.id].requires_grad; }
  std::size_t node_count() const { return nodes_.size(); }

  // Matrix-vector product; `w` must be a rank-2 leaf.
  Var matvec(Var w, Var x);
  Var add(Var a, Var b);
  Var sub(Var a, Var b);
  Var mul(Var a, Var b);  // elementwise
  Var add_n(std::span<const Var> terms);
  Var scale(Var a, double c);
  Var add_scalar(Var a, double c);
  Var scale_by(Var v, Var s);  // v * s, with s of size 1
  Var broadcast(Var s, std::size_t n);
  Var dot(Var a, Var b);
  Var sum(Var a);
  Var squared_norm(Var a);
  Var sigmoid(Var a);
  Var relu(Var a);
  Var mul_const(Var a, std::span<const double> factors);
  // Elementwise max across equally sized vectors.
  Var max_pool(std::span<const Var> items);
  Var concat(std::span<const Var> parts);
  Var slice(Var a, std::size_t offset, std::size_t length);
  // Binary cross-entropy of sigmoid(logit) against a {0,1} label, computed
  // in the numerically stable softplus form.
  Var bce_with_logits(Var logit, double label);
  Var mean(std::span<const Var> scalars);

  // Normalizes each dimension across `rows` with the batch statistics. The
  // statistics are written to `stats` when it is non-null.
  std::vector<Var> batch_norm(std::span<const Var> rows, double epsilon,
                              BatchStats* stats = nullptr);
  // Normalizes with fixed statistics (inference).
  Var normalize(Var x, std::span<const double> mean, std::span<const double> var,
                double epsilon);

  void backward(Var root);
  std::span<const double> grad(Var v) const { return nodes_[v.id].grad; }
  GradientMap gradients() const;

 private:
  struct Node {
    std::vector<double> value;
    std::vector<double> grad;
    std::size_t rows = 0;
    std::size_t cols = 0;
    bool requires_grad = false;
    std::function<void(Tape&, std::uint32_t)> backward;
  };
  struct TrackedLeaf {
    Var var;
    std::string name;
    std::vector<std::size_t> shape;
  };

  Var push(std::vector<double> value, bool requires_grad,
           std::function<void(Tape&, std::uint32_t)> backward);
  std::vector<double>& grad_of(std::uint32_t id);
  void check_same_size(Var a, Var b, const char* op) const;

  std::vector<Node> nodes_;
  std::unordered_map<const Tensor*, Var> leaf_cache_;
  std::vector<TrackedLeaf> tracked_;
};

}  // namespace xlnbt
