#include "lal/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <unordered_set>

namespace lal::ad {
namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatMap = Eigen::Map<RowMat>;
using ConstMatMap = Eigen::Map<const RowMat>;

Tensor make(const char* op, Shape shape, std::vector<double> value, std::initializer_list<const Tensor*> inputs,
            std::function<void(Node&)> bw) {
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(value);
  n->op = op;
  for (const auto* t : inputs) n->requires_grad = n->requires_grad || t->requires_grad();
  if (n->requires_grad) {
    for (const auto* t : inputs) n->parents.push_back(t->node());
    n->backward = std::move(bw);
  }
  return Tensor(std::move(n));
}

// Grad buffer of a parent, or nullptr when it is not tracked.
double* grad_of(Node& self, std::size_t parent) {
  Node& p = *self.parents[parent];
  return p.requires_grad ? p.grad.data() : nullptr;
}

[[noreturn]] void shape_error(const char* op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(op) + ": incompatible shapes " + shape_string(a.shape()) + " and " +
                   shape_string(b.shape()));
}

template <typename F, typename G>
Tensor unary(const char* op, const Tensor& a, F forward, G derivative) {
  std::vector<double> out(a.size());
  const auto in = a.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = forward(in[i]);
  return make(op, a.shape(), std::move(out), {&a}, [derivative](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    const auto& x = self.parents[0]->value;
    for (std::size_t i = 0; i < x.size(); ++i) ga[i] += self.grad[i] * derivative(x[i], self.value[i]);
  });
}

double stable_softplus(double x) { return x > 0 ? x + std::log1p(std::exp(-x)) : std::log1p(std::exp(x)); }
double stable_sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

std::size_t shape_size(const Shape& shape) {
  std::size_t n = 1;
  for (auto d : shape) n *= d;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::ostringstream o;
  o << "[";
  for (std::size_t i = 0; i < shape.size(); ++i) o << (i ? "," : "") << shape[i];
  o << "]";
  return o.str();
}

Tensor Tensor::constant(Shape shape, std::vector<double> data) {
  if (shape_size(shape) != data.size()) throw ShapeError("constant: data length does not match shape " + shape_string(shape));
  auto n = std::make_shared<Node>();
  n->shape = std::move(shape);
  n->value = std::move(data);
  return Tensor(std::move(n));
}

Tensor Tensor::parameter(Shape shape, std::vector<double> data) {
  Tensor t = constant(std::move(shape), std::move(data));
  t.node_->requires_grad = true;
  t.node_->grad.assign(t.node_->value.size(), 0.0);
  return t;
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + shape_string(shape()));
  return node_->value[0];
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.rank() < 2) shape_error("matmul", a, b);
  if (b.rank() == 2) {
    const std::size_t k = b.dim(0), m = b.dim(1);
    if (a.last_dim() != k) shape_error("matmul", a, b);
    const std::size_t rows = a.size() / k;
    std::vector<double> out(rows * m);
    MatMap(out.data(), rows, m).noalias() = ConstMatMap(a.data().data(), rows, k) * ConstMatMap(b.data().data(), k, m);
    Shape shape = a.shape();
    shape.back() = m;
    return make("matmul", std::move(shape), std::move(out), {&a, &b}, [rows, k, m](Node& self) {
      ConstMatMap g(self.grad.data(), rows, m);
      if (double* ga = grad_of(self, 0)) {
        MatMap(ga, rows, k).noalias() += g * ConstMatMap(self.parents[1]->value.data(), k, m).transpose();
      }
      if (double* gb = grad_of(self, 1)) {
        MatMap(gb, k, m).noalias() += ConstMatMap(self.parents[0]->value.data(), rows, k).transpose() * g;
      }
    });
  }
  if (a.rank() == 3 && b.rank() == 3 && a.dim(0) == b.dim(0) && a.dim(2) == b.dim(1)) {
    const std::size_t batch = a.dim(0), n = a.dim(1), k = a.dim(2), m = b.dim(2);
    std::vector<double> out(batch * n * m);
    for (std::size_t i = 0; i < batch; ++i) {
      MatMap(out.data() + i * n * m, n, m).noalias() =
          ConstMatMap(a.data().data() + i * n * k, n, k) * ConstMatMap(b.data().data() + i * k * m, k, m);
    }
    return make("matmul", {batch, n, m}, std::move(out), {&a, &b}, [batch, n, k, m](Node& self) {
      double* ga = grad_of(self, 0);
      double* gb = grad_of(self, 1);
      const double* av = self.parents[0]->value.data();
      const double* bv = self.parents[1]->value.data();
      for (std::size_t i = 0; i < batch; ++i) {
        ConstMatMap g(self.grad.data() + i * n * m, n, m);
        if (ga) MatMap(ga + i * n * k, n, k).noalias() += g * ConstMatMap(bv + i * k * m, k, m).transpose();
        if (gb) MatMap(gb + i * k * m, k, m).noalias() += ConstMatMap(av + i * n * k, n, k).transpose() * g;
      }
    });
  }
  shape_error("matmul", a, b);
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) {
    std::vector<double> out(a.size());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] + b.data()[i];
    return make("add", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
      for (std::size_t p = 0; p < 2; ++p) {
        if (double* g = grad_of(self, p)) {
          for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
        }
      }
    });
  }
  if (b.rank() == 1 && a.rank() >= 1 && b.dim(0) == a.last_dim()) {
    const std::size_t width = b.dim(0), rows = a.size() / width;
    std::vector<double> out(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < width; ++j) out[r * width + j] = a.data()[r * width + j] + b.data()[j];
    }
    return make("add", a.shape(), std::move(out), {&a, &b}, [rows, width](Node& self) {
      if (double* g = grad_of(self, 0)) {
        for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
      }
      if (double* g = grad_of(self, 1)) {
        for (std::size_t r = 0; r < rows; ++r) {
          for (std::size_t j = 0; j < width; ++j) g[j] += self.grad[r * width + j];
        }
      }
    });
  }
  shape_error("add", a, b);
}

Tensor sub(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("sub", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] - b.data()[i];
  return make("sub", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  if (b.rank() == 1 && a.rank() > 1 && b.dim(0) == a.last_dim()) {
    const std::size_t width = b.dim(0), rows = a.size() / width;
    std::vector<double> out(a.size());
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < width; ++j) out[r * width + j] = a.data()[r * width + j] * b.data()[j];
    }
    return make("mul", a.shape(), std::move(out), {&a, &b}, [rows, width](Node& self) {
      const auto& av = self.parents[0]->value;
      const auto& bv = self.parents[1]->value;
      double* ga = grad_of(self, 0);
      double* gb = grad_of(self, 1);
      for (std::size_t r = 0; r < rows; ++r) {
        for (std::size_t j = 0; j < width; ++j) {
          const double g = self.grad[r * width + j];
          if (ga) ga[r * width + j] += g * bv[j];
          if (gb) gb[j] += g * av[r * width + j];
        }
      }
    });
  }
  if (a.shape() != b.shape()) shape_error("mul", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] * b.data()[i];
  return make("mul", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& av = self.parents[0]->value;
    const auto& bv = self.parents[1]->value;
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * bv[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] * av[i];
    }
  });
}

Tensor div(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error("div", a, b);
  std::vector<double> out(a.size());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a.data()[i] / b.data()[i];
  return make("div", a.shape(), std::move(out), {&a, &b}, [](Node& self) {
    const auto& bv = self.parents[1]->value;
    if (double* g = grad_of(self, 0)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] += self.grad[i] / bv[i];
    }
    if (double* g = grad_of(self, 1)) {
      for (std::size_t i = 0; i < self.grad.size(); ++i) g[i] -= self.grad[i] * self.value[i] / bv[i];
    }
  });
}

Tensor scale(const Tensor& a, double c) {
  return unary("scale", a, [c](double x) { return c * x; }, [c](double, double) { return c; });
}

Tensor add_scalar(const Tensor& a, double c) {
  return unary("add_scalar", a, [c](double x) { return x + c; }, [](double, double) { return 1.0; });
}

Tensor relu(const Tensor& a) {
  return unary("relu", a, [](double x) { return x > 0 ? x : 0.0; }, [](double x, double) { return x > 0 ? 1.0 : 0.0; });
}

Tensor exp(const Tensor& a) {
  return unary("exp", a, [](double x) { return std::exp(x); }, [](double, double y) { return y; });
}

Tensor log(const Tensor& a) {
  return unary("log", a, [](double x) { return std::log(x); }, [](double x, double) { return 1.0 / x; });
}

Tensor square(const Tensor& a) {
  return unary("square", a, [](double x) { return x * x; }, [](double x, double) { return 2.0 * x; });
}

Tensor softplus(const Tensor& a) {
  return unary("softplus", a, stable_softplus, [](double x, double) { return stable_sigmoid(x); });
}

Tensor softmax(const Tensor& a) {
  if (a.rank() < 1) throw ShapeError("softmax: needs rank >= 1");
  const std::size_t width = a.last_dim(), rows = a.size() / width;
  std::vector<double> out(a.size());
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.data().data() + r * width;
    double* y = out.data() + r * width;
    const double top = *std::max_element(x, x + width);
    double s = 0.0;
    for (std::size_t j = 0; j < width; ++j) s += (y[j] = std::exp(x[j] - top));
    for (std::size_t j = 0; j < width; ++j) y[j] /= s;
  }
  return make("softmax", a.shape(), std::move(out), {&a}, [rows, width](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * width;
      const double* g = self.grad.data() + r * width;
      double dot = 0.0;
      for (std::size_t j = 0; j < width; ++j) dot += g[j] * y[j];
      for (std::size_t j = 0; j < width; ++j) ga[r * width + j] += y[j] * (g[j] - dot);
    }
  });
}

Tensor layer_norm(const Tensor& a, double eps) {
  if (a.rank() < 1) throw ShapeError("layer_norm: needs rank >= 1");
  const std::size_t width = a.last_dim(), rows = a.size() / width;
  std::vector<double> out(a.size());
  std::vector<double> inv_std(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* x = a.data().data() + r * width;
    double mu = 0.0;
    for (std::size_t j = 0; j < width; ++j) mu += x[j];
    mu /= static_cast<double>(width);
    double var = 0.0;
    for (std::size_t j = 0; j < width; ++j) var += (x[j] - mu) * (x[j] - mu);
    var /= static_cast<double>(width);
    inv_std[r] = 1.0 / std::sqrt(var + eps);
    for (std::size_t j = 0; j < width; ++j) out[r * width + j] = (x[j] - mu) * inv_std[r];
  }
  return make("layer_norm", a.shape(), std::move(out), {&a}, [rows, width, inv_std = std::move(inv_std)](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    const double n = static_cast<double>(width);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* y = self.value.data() + r * width;
      const double* g = self.grad.data() + r * width;
      double mean_g = 0.0, mean_gy = 0.0;
      for (std::size_t j = 0; j < width; ++j) {
        mean_g += g[j];
        mean_gy += g[j] * y[j];
      }
      mean_g /= n;
      mean_gy /= n;
      for (std::size_t j = 0; j < width; ++j) ga[r * width + j] += inv_std[r] * (g[j] - mean_g - y[j] * mean_gy);
    }
  });
}

Tensor concat(const Tensor& a, const Tensor& b) {
  if (a.rank() < 1 || a.rank() != b.rank()) shape_error("concat", a, b);
  for (std::size_t i = 0; i + 1 < a.rank(); ++i) {
    if (a.dim(i) != b.dim(i)) shape_error("concat", a, b);
  }
  const std::size_t p = a.last_dim(), q = b.last_dim(), rows = a.size() / p;
  std::vector<double> out(rows * (p + q));
  for (std::size_t r = 0; r < rows; ++r) {
    std::copy_n(a.data().data() + r * p, p, out.data() + r * (p + q));
    std::copy_n(b.data().data() + r * q, q, out.data() + r * (p + q) + p);
  }
  Shape shape = a.shape();
  shape.back() = p + q;
  return make("concat", std::move(shape), std::move(out), {&a, &b}, [rows, p, q](Node& self) {
    double* ga = grad_of(self, 0);
    double* gb = grad_of(self, 1);
    for (std::size_t r = 0; r < rows; ++r) {
      const double* g = self.grad.data() + r * (p + q);
      if (ga) {
        for (std::size_t j = 0; j < p; ++j) ga[r * p + j] += g[j];
      }
      if (gb) {
        for (std::size_t j = 0; j < q; ++j) gb[r * q + j] += g[p + j];
      }
    }
  });
}

Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len) {
  const std::size_t width = a.last_dim();
  if (a.rank() < 1 || start + len > width || len == 0) {
    throw ShapeError("slice_last: range [" + std::to_string(start) + ", " + std::to_string(start + len) +
                     ") outside " + shape_string(a.shape()));
  }
  const std::size_t rows = a.size() / width;
  std::vector<double> out(rows * len);
  for (std::size_t r = 0; r < rows; ++r) std::copy_n(a.data().data() + r * width + start, len, out.data() + r * len);
  Shape shape = a.shape();
  shape.back() = len;
  return make("slice_last", std::move(shape), std::move(out), {&a}, [rows, width, start, len](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t j = 0; j < len; ++j) ga[r * width + start + j] += self.grad[r * len + j];
    }
  });
}

Tensor sum(const Tensor& a) {
  double s = 0.0;
  for (double v : a.data()) s += v;
  return make("sum", {}, {s}, {&a}, [](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    const double g = self.grad[0];
    for (std::size_t i = 0; i < self.parents[0]->value.size(); ++i) ga[i] += g;
  });
}

Tensor reduce_mean(const Tensor& a) {
  if (a.size() == 0) throw ShapeError("reduce_mean of an empty tensor");
  return scale(sum(a), 1.0 / static_cast<double>(a.size()));
}

Tensor reshape(const Tensor& a, Shape shape) {
  if (shape_size(shape) != a.size()) {
    throw ShapeError("reshape: " + shape_string(a.shape()) + " to " + shape_string(shape));
  }
  std::vector<double> out(a.data().begin(), a.data().end());
  return make("reshape", std::move(shape), std::move(out), {&a}, [](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) ga[i] += self.grad[i];
  });
}

Tensor transpose_last2(const Tensor& a) {
  if (a.rank() != 3) throw ShapeError("transpose_last2: needs rank 3, got " + shape_string(a.shape()));
  const std::size_t batch = a.dim(0), n = a.dim(1), m = a.dim(2);
  std::vector<double> out(a.size());
  for (std::size_t b = 0; b < batch; ++b) {
    MatMap(out.data() + b * n * m, m, n) = ConstMatMap(a.data().data() + b * n * m, n, m).transpose();
  }
  return make("transpose_last2", {batch, m, n}, std::move(out), {&a}, [batch, n, m](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t b = 0; b < batch; ++b) {
      MatMap(ga + b * n * m, n, m) += ConstMatMap(self.grad.data() + b * n * m, m, n).transpose();
    }
  });
}

Tensor split_heads(const Tensor& a, std::size_t heads) {
  if (a.rank() != 3 || heads == 0 || a.dim(2) % heads != 0) {
    throw ShapeError("split_heads: cannot split " + shape_string(a.shape()) + " into " + std::to_string(heads) + " heads");
  }
  const std::size_t batch = a.dim(0), n = a.dim(1), d = a.dim(2) / heads;
  std::vector<double> out(a.size());
  auto src = [=](std::size_t b, std::size_t i, std::size_t h, std::size_t e) { return (b * n + i) * heads * d + h * d + e; };
  auto dst = [=](std::size_t b, std::size_t i, std::size_t h, std::size_t e) { return ((b * heads + h) * n + i) * d + e; };
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t e = 0; e < d; ++e) out[dst(b, i, h, e)] = a.data()[src(b, i, h, e)];
  return make("split_heads", {batch * heads, n, d}, std::move(out), {&a}, [=](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t e = 0; e < d; ++e) ga[src(b, i, h, e)] += self.grad[dst(b, i, h, e)];
  });
}

Tensor merge_heads(const Tensor& a, std::size_t heads) {
  if (a.rank() != 3 || heads == 0 || a.dim(0) % heads != 0) {
    throw ShapeError("merge_heads: cannot merge " + shape_string(a.shape()) + " from " + std::to_string(heads) + " heads");
  }
  const std::size_t batch = a.dim(0) / heads, n = a.dim(1), d = a.dim(2);
  std::vector<double> out(a.size());
  auto merged = [=](std::size_t b, std::size_t i, std::size_t h, std::size_t e) { return (b * n + i) * heads * d + h * d + e; };
  auto split = [=](std::size_t b, std::size_t i, std::size_t h, std::size_t e) { return ((b * heads + h) * n + i) * d + e; };
  for (std::size_t b = 0; b < batch; ++b)
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t h = 0; h < heads; ++h)
        for (std::size_t e = 0; e < d; ++e) out[merged(b, i, h, e)] = a.data()[split(b, i, h, e)];
  return make("merge_heads", {batch, n, heads * d}, std::move(out), {&a}, [=](Node& self) {
    double* ga = grad_of(self, 0);
    if (!ga) return;
    for (std::size_t b = 0; b < batch; ++b)
      for (std::size_t i = 0; i < n; ++i)
        for (std::size_t h = 0; h < heads; ++h)
          for (std::size_t e = 0; e < d; ++e) ga[split(b, i, h, e)] += self.grad[merged(b, i, h, e)];
  });
}

void backward(const Tensor& loss) {
  if (loss.size() != 1) throw ShapeError("backward: loss must be scalar, got " + shape_string(loss.shape()));
  if (!loss.requires_grad()) return;
  // Iterative post-order DFS gives a topological order (parents before children).
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  visited.insert(loss.node().get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (p->requires_grad && visited.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  for (Node* n : order) n->grad.assign(n->value.size(), 0.0);
  loss.node()->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    if ((*it)->backward) (*it)->backward(**it);
  }
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) std::fill(p.grad().begin(), p.grad().end(), 0.0);
}

void adam_step(std::span<Tensor> params, AdamState& state) {
  if (state.m.empty()) {
    for (const auto& p : params) {
      state.m.emplace_back(p.size(), 0.0);
      state.v.emplace_back(p.size(), 0.0);
    }
  }
  if (state.m.size() != params.size()) throw ShapeError("adam_step: parameter list changed");
  ++state.step;
  const double c1 = 1.0 - std::pow(state.beta1, static_cast<double>(state.step));
  const double c2 = 1.0 - std::pow(state.beta2, static_cast<double>(state.step));
  for (std::size_t k = 0; k < params.size(); ++k) {
    auto theta = params[k].data();
    auto g = params[k].grad();
    auto& m = state.m[k];
    auto& v = state.v[k];
    if (m.size() != theta.size() || g.size() != theta.size()) throw ShapeError("adam_step: shape mismatch");
    for (std::size_t i = 0; i < theta.size(); ++i) {
      m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
      v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
      const double mhat = m[i] / c1, vhat = v[i] / c2;
      theta[i] -= state.lr * mhat / (std::sqrt(vhat) + state.eps);
    }
  }
}

double check_gradients(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps) {
  Tensor leaf = Tensor::parameter(x.shape(), std::vector<double>(x.data().begin(), x.data().end()));
  Tensor y = f(leaf);
  if (y.size() != 1) throw ShapeError("check_gradients: f must be scalar-valued");
  backward(y);
  const std::vector<double> analytic(leaf.grad().begin(), leaf.grad().end());
  double worst = 0.0;
  std::vector<double> probe(x.data().begin(), x.data().end());
  for (std::size_t i = 0; i < probe.size(); ++i) {
    const double saved = probe[i];
    probe[i] = saved + eps;
    const double up = f(Tensor::constant(x.shape(), probe)).item();
    probe[i] = saved - eps;
    const double down = f(Tensor::constant(x.shape(), probe)).item();
    probe[i] = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max({std::abs(analytic[i]), std::abs(numeric), 1e-8});
    worst = std::max(worst, std::abs(analytic[i] - numeric) / denom);
  }
  return worst;
}

}  // namespace lal::ad
