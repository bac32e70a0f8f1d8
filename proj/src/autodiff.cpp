#include "xlnbt/autodiff.hpp"

#include <algorithm>
#include <cmath>

namespace xlnbt {

namespace {

double stable_sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Var Tape::push(std::vector<double> value, bool requires_grad,
               std::function<void(Tape&, std::uint32_t)> backward) {
  Node node;
  node.value = std::move(value);
  node.requires_grad = requires_grad;
  if (requires_grad) node.backward = std::move(backward);
  nodes_.push_back(std::move(node));
  return Var{static_cast<std::uint32_t>(nodes_.size() - 1)};
}

std::vector<double>& Tape::grad_of(std::uint32_t id) {
  Node& node = nodes_[id];
  if (node.grad.empty()) node.grad.assign(node.value.size(), 0.0);
  return node.grad;
}

void Tape::check_same_size(Var a, Var b, const char* op) const {
  if (size(a) != size(b)) {
    throw ShapeError(std::string(op) + ": operand sizes " + std::to_string(size(a)) + " and " +
                     std::to_string(size(b)));
  }
}

Var Tape::constant(std::vector<double> values) { return push(std::move(values), false, {}); }

Var Tape::constant(std::span<const double> values) {
  return push(std::vector<double>(values.begin(), values.end()), false, {});
}

Var Tape::scalar(double value) { return push({value}, false, {}); }

Var Tape::zeros(std::size_t n) { return push(std::vector<double>(n, 0.0), false, {}); }

Var Tape::leaf(const Tensor& tensor, const std::string& name, bool track) {
  if (auto it = leaf_cache_.find(&tensor); it != leaf_cache_.end()) return it->second;
  Var v = push(tensor.values(), track, track ? [](Tape&, std::uint32_t) {}
                                             : std::function<void(Tape&, std::uint32_t)>{});
  nodes_[v.id].rows = tensor.rows();
  nodes_[v.id].cols = tensor.rank() == 2 ? tensor.cols() : 1;
  leaf_cache_.emplace(&tensor, v);
  if (track) tracked_.push_back({v, name, tensor.shape()});
  return v;
}

Var Tape::matvec(Var w, Var x) {
  const Node& wn = nodes_[w.id];
  const std::size_t rows = wn.rows;
  const std::size_t cols = wn.cols;
  if (rows * cols != wn.value.size() || cols != size(x)) {
    throw ShapeError("matvec: matrix " + std::to_string(rows) + "x" + std::to_string(cols) +
                     " with vector of length " + std::to_string(size(x)));
  }
  std::vector<double> out(rows, 0.0);
  const double* wd = wn.value.data();
  const double* xd = nodes_[x.id].value.data();
  for (std::size_t i = 0; i < rows; ++i) {
    double acc = 0.0;
    const double* row = wd + i * cols;
    for (std::size_t j = 0; j < cols; ++j) acc += row[j] * xd[j];
    out[i] = acc;
  }
  const bool rg = requires_grad(w) || requires_grad(x);
  return push(std::move(out), rg, [w, x, rows, cols](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    if (t.requires_grad(w)) {
      auto& gw = t.grad_of(w.id);
      const auto& xv = t.nodes_[x.id].value;
      for (std::size_t i = 0; i < rows; ++i) {
        if (g[i] == 0.0) continue;
        double* row = gw.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) row[j] += g[i] * xv[j];
      }
    }
    if (t.requires_grad(x)) {
      auto& gx = t.grad_of(x.id);
      const auto& wv = t.nodes_[w.id].value;
      for (std::size_t i = 0; i < rows; ++i) {
        if (g[i] == 0.0) continue;
        const double* row = wv.data() + i * cols;
        for (std::size_t j = 0; j < cols; ++j) gx[j] += g[i] * row[j];
      }
    }
  });
}

Var Tape::add(Var a, Var b) {
  check_same_size(a, b, "add");
  std::vector<double> out(nodes_[a.id].value);
  const auto& bv = nodes_[b.id].value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [a, b](Tape& t, std::uint32_t self) {
                const auto& g = t.nodes_[self].grad;
                for (Var p : {a, b}) {
                  if (!t.requires_grad(p)) continue;
                  auto& gp = t.grad_of(p.id);
                  for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
                }
              });
}

Var Tape::sub(Var a, Var b) {
  check_same_size(a, b, "sub");
  std::vector<double> out(nodes_[a.id].value);
  const auto& bv = nodes_[b.id].value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [a, b](Tape& t, std::uint32_t self) {
                const auto& g = t.nodes_[self].grad;
                if (t.requires_grad(a)) {
                  auto& ga = t.grad_of(a.id);
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
                }
                if (t.requires_grad(b)) {
                  auto& gb = t.grad_of(b.id);
                  for (std::size_t i = 0; i < g.size(); ++i) gb[i] -= g[i];
                }
              });
}

Var Tape::mul(Var a, Var b) {
  check_same_size(a, b, "mul");
  std::vector<double> out(nodes_[a.id].value);
  const auto& bv = nodes_[b.id].value;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= bv[i];
  return push(std::move(out), requires_grad(a) || requires_grad(b),
              [a, b](Tape& t, std::uint32_t self) {
                const auto& g = t.nodes_[self].grad;
                if (t.requires_grad(a)) {
                  auto& ga = t.grad_of(a.id);
                  const auto& bv = t.nodes_[b.id].value;
                  for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * bv[i];
                }
                if (t.requires_grad(b)) {
                  auto& gb = t.grad_of(b.id);
                  const auto& av = t.nodes_[a.id].value;
                  for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i] * av[i];
                }
              });
}

Var Tape::add_n(std::span<const Var> terms) {
  if (terms.empty()) throw ShapeError("add_n: no terms");
  std::vector<double> out(nodes_[terms[0].id].value.size(), 0.0);
  bool rg = false;
  for (Var v : terms) {
    check_same_size(terms[0], v, "add_n");
    const auto& vv = nodes_[v.id].value;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += vv[i];
    rg = rg || requires_grad(v);
  }
  std::vector<Var> parents(terms.begin(), terms.end());
  return push(std::move(out), rg, [parents](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    for (Var p : parents) {
      if (!t.requires_grad(p)) continue;
      auto& gp = t.grad_of(p.id);
      for (std::size_t i = 0; i < g.size(); ++i) gp[i] += g[i];
    }
  });
}

Var Tape::scale(Var a, double c) {
  std::vector<double> out(nodes_[a.id].value);
  for (double& v : out) v *= c;
  return push(std::move(out), requires_grad(a), [a, c](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += c * g[i];
  });
}

Var Tape::add_scalar(Var a, double c) {
  std::vector<double> out(nodes_[a.id].value);
  for (double& v : out) v += c;
  return push(std::move(out), requires_grad(a), [a](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
  });
}

Var Tape::scale_by(Var v, Var s) {
  if (size(s) != 1) throw ShapeError("scale_by: scale must be a scalar");
  const double sv = scalar_value(s);
  std::vector<double> out(nodes_[v.id].value);
  for (double& x : out) x *= sv;
  return push(std::move(out), requires_grad(v) || requires_grad(s),
              [v, s](Tape& t, std::uint32_t self) {
                const auto& g = t.nodes_[self].grad;
                if (t.requires_grad(v)) {
                  const double sv = t.scalar_value(s);
                  auto& gv = t.grad_of(v.id);
                  for (std::size_t i = 0; i < g.size(); ++i) gv[i] += sv * g[i];
                }
                if (t.requires_grad(s)) {
                  const auto& vv = t.nodes_[v.id].value;
                  double acc = 0.0;
                  for (std::size_t i = 0; i < g.size(); ++i) acc += vv[i] * g[i];
                  t.grad_of(s.id)[0] += acc;
                }
              });
}

Var Tape::broadcast(Var s, std::size_t n) {
  if (size(s) != 1) throw ShapeError("broadcast: input must be a scalar");
  return push(std::vector<double>(n, scalar_value(s)), requires_grad(s),
              [s](Tape& t, std::uint32_t self) {
                const auto& g = t.nodes_[self].grad;
                double acc = 0.0;
                for (double x : g) acc += x;
                t.grad_of(s.id)[0] += acc;
              });
}

Var Tape::dot(Var a, Var b) {
  check_same_size(a, b, "dot");
  const auto& av = nodes_[a.id].value;
  const auto& bv = nodes_[b.id].value;
  double acc = 0.0;
  for (std::size_t i = 0; i < av.size(); ++i) acc += av[i] * bv[i];
  return push({acc}, requires_grad(a) || requires_grad(b), [a, b](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad[0];
    if (t.requires_grad(a)) {
      auto& ga = t.grad_of(a.id);
      const auto& bv = t.nodes_[b.id].value;
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g * bv[i];
    }
    if (t.requires_grad(b)) {
      auto& gb = t.grad_of(b.id);
      const auto& av = t.nodes_[a.id].value;
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g * av[i];
    }
  });
}

Var Tape::sum(Var a) {
  double acc = 0.0;
  for (double x : nodes_[a.id].value) acc += x;
  return push({acc}, requires_grad(a), [a](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad[0];
    for (double& x : t.grad_of(a.id)) x += g;
  });
}

Var Tape::squared_norm(Var a) {
  double acc = 0.0;
  for (double x : nodes_[a.id].value) acc += x * x;
  return push({acc}, requires_grad(a), [a](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad[0];
    auto& ga = t.grad_of(a.id);
    const auto& av = t.nodes_[a.id].value;
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += 2.0 * g * av[i];
  });
}

Var Tape::sigmoid(Var a) {
  std::vector<double> out(nodes_[a.id].value);
  for (double& v : out) v = stable_sigmoid(v);
  return push(std::move(out), requires_grad(a), [a](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    const auto& y = t.nodes_[self].value;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * y[i] * (1.0 - y[i]);
  });
}

Var Tape::relu(Var a) {
  std::vector<double> out(nodes_[a.id].value);
  for (double& v : out) v = v > 0.0 ? v : 0.0;
  return push(std::move(out), requires_grad(a), [a](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    const auto& x = t.nodes_[a.id].value;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (x[i] > 0.0) ga[i] += g[i];
    }
  });
}

Var Tape::mul_const(Var a, std::span<const double> factors) {
  if (factors.size() != size(a)) throw ShapeError("mul_const: size mismatch");
  std::vector<double> out(nodes_[a.id].value);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= factors[i];
  std::vector<double> f(factors.begin(), factors.end());
  return push(std::move(out), requires_grad(a), [a, f](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i] * f[i];
  });
}

Var Tape::max_pool(std::span<const Var> items) {
  if (items.empty()) throw ShapeError("max_pool: no inputs");
  const std::size_t n = size(items[0]);
  std::vector<double> out(nodes_[items[0].id].value);
  std::vector<std::uint32_t> argmax(n, 0);
  bool rg = requires_grad(items[0]);
  for (std::uint32_t k = 1; k < items.size(); ++k) {
    check_same_size(items[0], items[k], "max_pool");
    const auto& v = nodes_[items[k].id].value;
    for (std::size_t i = 0; i < n; ++i) {
      if (v[i] > out[i]) {
        out[i] = v[i];
        argmax[i] = k;
      }
    }
    rg = rg || requires_grad(items[k]);
  }
  std::vector<Var> parents(items.begin(), items.end());
  return push(std::move(out), rg, [parents, argmax](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Var p = parents[argmax[i]];
      if (t.requires_grad(p)) t.grad_of(p.id)[i] += g[i];
    }
  });
}

Var Tape::concat(std::span<const Var> parts) {
  std::vector<double> out;
  bool rg = false;
  for (Var p : parts) {
    const auto& v = nodes_[p.id].value;
    out.insert(out.end(), v.begin(), v.end());
    rg = rg || requires_grad(p);
  }
  std::vector<Var> parents(parts.begin(), parts.end());
  return push(std::move(out), rg, [parents](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    std::size_t offset = 0;
    for (Var p : parents) {
      const std::size_t n = t.size(p);
      if (t.requires_grad(p)) {
        auto& gp = t.grad_of(p.id);
        for (std::size_t i = 0; i < n; ++i) gp[i] += g[offset + i];
      }
      offset += n;
    }
  });
}

Var Tape::slice(Var a, std::size_t offset, std::size_t length) {
  if (offset + length > size(a)) throw ShapeError("slice: out of range");
  const auto& av = nodes_[a.id].value;
  std::vector<double> out(av.begin() + static_cast<std::ptrdiff_t>(offset),
                          av.begin() + static_cast<std::ptrdiff_t>(offset + length));
  return push(std::move(out), requires_grad(a), [a, offset](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    auto& ga = t.grad_of(a.id);
    for (std::size_t i = 0; i < g.size(); ++i) ga[offset + i] += g[i];
  });
}

Var Tape::bce_with_logits(Var logit, double label) {
  if (size(logit) != 1) throw ShapeError("bce_with_logits: logit must be a scalar");
  const double z = scalar_value(logit);
  // log(1 + e^z) - label * z
  const double softplus = z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z));
  const double loss = softplus - label * z;
  return push({loss}, requires_grad(logit), [logit, label, z](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad[0];
    t.grad_of(logit.id)[0] += g * (stable_sigmoid(z) - label);
  });
}

Var Tape::mean(std::span<const Var> scalars) {
  if (scalars.empty()) throw ShapeError("mean: no inputs");
  double acc = 0.0;
  bool rg = false;
  for (Var s : scalars) {
    if (size(s) != 1) throw ShapeError("mean: inputs must be scalars");
    acc += scalar_value(s);
    rg = rg || requires_grad(s);
  }
  const double n = static_cast<double>(scalars.size());
  std::vector<Var> parents(scalars.begin(), scalars.end());
  return push({acc / n}, rg, [parents, n](Tape& t, std::uint32_t self) {
    const double g = t.nodes_[self].grad[0] / n;
    for (Var p : parents) {
      if (t.requires_grad(p)) t.grad_of(p.id)[0] += g;
    }
  });
}

std::vector<Var> Tape::batch_norm(std::span<const Var> rows, double epsilon, BatchStats* stats) {
  if (rows.size() < 2) throw Error("batch norm: train mode needs a batch of at least 2");
  const std::size_t batch = rows.size();
  const std::size_t dim = size(rows[0]);
  std::vector<std::vector<double>> values;
  values.reserve(batch);
  bool rg = false;
  for (Var r : rows) {
    check_same_size(rows[0], r, "batch_norm");
    values.push_back(nodes_[r.id].value);
    rg = rg || requires_grad(r);
  }
  BatchStats s = batch_statistics(values);
  std::vector<double> inv_std(dim);
  for (std::size_t j = 0; j < dim; ++j) inv_std[j] = 1.0 / std::sqrt(s.var[j] + epsilon);

  // One node holds the whole normalized batch; per-row outputs are slices.
  std::vector<double> normalized(batch * dim);
  for (std::size_t i = 0; i < batch; ++i) {
    for (std::size_t j = 0; j < dim; ++j) {
      normalized[i * dim + j] = (values[i][j] - s.mean[j]) * inv_std[j];
    }
  }
  std::vector<Var> parents(rows.begin(), rows.end());
  Var joint = push(std::move(normalized), rg,
                   [parents, inv_std, batch, dim](Tape& t, std::uint32_t self) {
                     const auto& g = t.nodes_[self].grad;
                     const auto& xhat = t.nodes_[self].value;
                     const double n = static_cast<double>(batch);
                     for (std::size_t j = 0; j < dim; ++j) {
                       double mean_g = 0.0;
                       double mean_gx = 0.0;
                       for (std::size_t i = 0; i < batch; ++i) {
                         mean_g += g[i * dim + j];
                         mean_gx += g[i * dim + j] * xhat[i * dim + j];
                       }
                       mean_g /= n;
                       mean_gx /= n;
                       for (std::size_t i = 0; i < batch; ++i) {
                         if (!t.requires_grad(parents[i])) continue;
                         t.grad_of(parents[i].id)[j] +=
                             inv_std[j] * (g[i * dim + j] - mean_g - xhat[i * dim + j] * mean_gx);
                       }
                     }
                   });
  if (stats) *stats = std::move(s);
  std::vector<Var> out;
  out.reserve(batch);
  for (std::size_t i = 0; i < batch; ++i) out.push_back(slice(joint, i * dim, dim));
  return out;
}

Var Tape::normalize(Var x, std::span<const double> mean, std::span<const double> var,
                    double epsilon) {
  const std::size_t n = size(x);
  if (mean.size() != n || var.size() != n) throw ShapeError("normalize: statistics size");
  std::vector<double> inv_std(n);
  std::vector<double> out(nodes_[x.id].value);
  for (std::size_t j = 0; j < n; ++j) {
    inv_std[j] = 1.0 / std::sqrt(var[j] + epsilon);
    out[j] = (out[j] - mean[j]) * inv_std[j];
  }
  return push(std::move(out), requires_grad(x), [x, inv_std](Tape& t, std::uint32_t self) {
    const auto& g = t.nodes_[self].grad;
    auto& gx = t.grad_of(x.id);
    for (std::size_t j = 0; j < g.size(); ++j) gx[j] += g[j] * inv_std[j];
  });
}

void Tape::backward(Var root) {
  if (size(root) != 1) throw ShapeError("backward: root must be a scalar");
  for (auto& node : nodes_) std::fill(node.grad.begin(), node.grad.end(), 0.0);
  if (!requires_grad(root)) return;
  grad_of(root.id)[0] = 1.0;
  for (std::uint32_t id = root.id + 1; id-- > 0;) {
    Node& node = nodes_[id];
    if (!node.requires_grad || node.grad.empty()) continue;
    node.backward(*this, id);
  }
}

GradientMap Tape::gradients() const {
  GradientMap out;
  for (const auto& leaf : tracked_) {
    const Node& node = nodes_[leaf.var.id];
    std::vector<double> g = node.grad;
    if (g.empty()) g.assign(node.value.size(), 0.0);
    out.emplace(leaf.name, Tensor(leaf.shape, std::move(g)));
  }
  return out;
}

}  // namespace xlnbt
