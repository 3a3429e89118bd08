#pragma once

#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "lal/types.hpp"

/// Minimal dense reverse-mode autodiff over row-major float64 tensors.
namespace lal::ad {

using Shape = std::vector<std::size_t>;

struct Node {
  Shape shape;
  std::vector<double> value;
  std::vector<double> grad;
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward;
  const char* op = "leaf";  // producing op, for graph inspection
};

class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

  /// Untracked input.
  static Tensor constant(Shape shape, std::vector<double> data);
  /// Tracked leaf; its grad buffer is allocated (zero) at construction.
  static Tensor parameter(Shape shape, std::vector<double> data);
  static Tensor scalar(double v) { return constant({}, {v}); }

  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t size() const { return node_->value.size(); }
  std::size_t dim(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t last_dim() const { return node_->shape.empty() ? 1 : node_->shape.back(); }

  std::span<const double> data() const { return node_->value; }
  std::span<double> data() { return node_->value; }
  std::span<const double> grad() const { return node_->grad; }
  std::span<double> grad() { return node_->grad; }
  double item() const;
  bool requires_grad() const { return node_->requires_grad; }
  const std::shared_ptr<Node>& node() const { return node_; }

 private:
  std::shared_ptr<Node> node_;
};

std::string shape_string(const Shape& shape);
std::size_t shape_size(const Shape& shape);

// Forward ops; every op records its backward rule when an input is tracked.

/// a [..., n, k] x b [k, m] -> [..., n, m]; or batched a [B, n, k] x b [B, k, m].
Tensor matmul(const Tensor& a, const Tensor& b);
/// Same shape, or b a vector matching a's last dim (broadcast over rows).
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
/// Same shape, or b broadcast over a's last dim like add.
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
Tensor relu(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor square(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor softmax(const Tensor& a);
/// Normalizes each last-dim row to mean 0, variance 1 (no affine part).
Tensor layer_norm(const Tensor& a, double eps = 1e-8);
Tensor concat(const Tensor& a, const Tensor& b);
Tensor slice_last(const Tensor& a, std::size_t start, std::size_t len);
Tensor reduce_mean(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
/// [B, n, m] -> [B, m, n].
Tensor transpose_last2(const Tensor& a);
/// [B, n, H*d] -> [B*H, n, d].
Tensor split_heads(const Tensor& a, std::size_t heads);
/// [B*H, n, d] -> [B, n, H*d].
Tensor merge_heads(const Tensor& a, std::size_t heads);

/// Reverse-mode sweep from a scalar. Grads of every tracked node reachable from
/// `loss` are overwritten; other leaves keep their buffers untouched.
void backward(const Tensor& loss);

void zero_grad(std::span<Tensor> params);

struct AdamState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  std::vector<std::vector<double>> m;
  std::vector<std::vector<double>> v;
  long step = 0;
};

/// One bias-corrected Adam update using the params' current grads.
void adam_step(std::span<Tensor> params, AdamState& state);

/// Max over components of |analytic - numeric| / max(|analytic|, |numeric|, 1e-8),
/// numeric gradients by central differences of `f` around `x`.
double check_gradients(const std::function<Tensor(const Tensor&)>& f, const Tensor& x, double eps = 1e-5);

}  // namespace lal::ad
