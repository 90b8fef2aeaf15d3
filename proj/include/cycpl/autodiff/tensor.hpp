#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

namespace cycpl::ad {

using Shape = std::vector<std::size_t>;

std::size_t numel(const Shape& s);
std::string shape_str(const Shape& s);

enum class OpKind {
  Leaf,
  Add,
  Sub,
  Mul,
  Div,
  ScalarMul,
  AddScalar,
  MatMul,
  Conv2d,
  Conv3d,
  Relu,
  MaxPool2d,
  MaxPool3d,
  NearestUpsample3d,
  InstanceNorm3d,
  Dropout,
  Mean,
  Sum,
  Square,
  Tanh,
  Concat,
  SliceView,
  Reshape,
  Permute,
  MinMaxNormalize,
  StopGradient,
};

const char* to_string(OpKind k);

template <typename T>
struct Node {
  Shape shape;
  std::vector<T> value;
  std::vector<T> grad;  // empty until first accumulation
  bool requires_grad = false;
  OpKind kind = OpKind::Leaf;
  std::vector<std::shared_ptr<Node>> parents;
  /// Reads this->grad and accumulates into the parents that require grad.
  std::function<void(Node&)> backward_fn;

  bool is_leaf() const { return kind == OpKind::Leaf || kind == OpKind::StopGradient; }
  std::vector<T>& ensure_grad() {
    if (grad.empty()) grad.assign(value.size(), T(0));
    return grad;
  }
};

/// Handle to a node of the computation graph. Copies share the node.
template <typename T>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::shared_ptr<Node<T>> node) : node_(std::move(node)) {}

  static Tensor constant(Shape shape, std::vector<T> values);
  static Tensor parameter(Shape shape, std::vector<T> values);
  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor scalar(T v) { return constant({1}, {v}); }

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t dim(std::size_t i) const { return node_->shape.at(i); }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t numel() const { return node_->value.size(); }
  bool requires_grad() const { return node_->requires_grad; }
  OpKind kind() const { return node_->kind; }

  std::span<const T> values() const { return node_->value; }
  /// Leaves only (parameters updated by an optimizer).
  std::span<T> mutable_values();
  std::span<const T> grad() const { return node_->grad; }
  bool has_grad() const { return !node_->grad.empty(); }
  void zero_grad() { node_->grad.clear(); }
  T item() const;

  Node<T>* node() const { return node_.get(); }
  const std::shared_ptr<Node<T>>& node_ptr() const { return node_; }

 private:
  std::shared_ptr<Node<T>> node_;
};

/// Builds an op result. Records parents and the backward rule only when
/// grad mode is on and some input requires grad.
template <typename T>
Tensor<T> make_result(OpKind kind, Shape shape, std::vector<T> value,
                      std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward_fn);

/// Runs reverse-mode accumulation from a scalar. Leaf gradients accumulate
/// across calls; intermediate gradients are reset for every call.
template <typename T>
void backward(const Tensor<T>& loss);

/// Thread-local switch that disables graph recording (inference).
bool grad_enabled();

class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

template <typename To, typename From>
Tensor<To> cast_constant(const Tensor<From>& t);

}  // namespace cycpl::ad
