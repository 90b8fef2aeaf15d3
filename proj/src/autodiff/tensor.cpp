#include "cycpl/autodiff/tensor.hpp"

#include <unordered_set>

#include "cycpl/error.hpp"

namespace cycpl::ad {

namespace {
thread_local bool g_grad_enabled = true;
}

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }

std::size_t numel(const Shape& s) {
  std::size_t n = 1;
  for (std::size_t d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

const char* to_string(OpKind k) {
  switch (k) {
    case OpKind::Leaf: return "leaf";
    case OpKind::Add: return "add";
    case OpKind::Sub: return "sub";
    case OpKind::Mul: return "mul";
    case OpKind::Div: return "div";
    case OpKind::ScalarMul: return "scalar_mul";
    case OpKind::AddScalar: return "add_scalar";
    case OpKind::MatMul: return "matmul";
    case OpKind::Conv2d: return "conv2d";
    case OpKind::Conv3d: return "conv3d";
    case OpKind::Relu: return "relu";
    case OpKind::MaxPool2d: return "max_pool2d";
    case OpKind::MaxPool3d: return "max_pool3d";
    case OpKind::NearestUpsample3d: return "nearest_upsample3d";
    case OpKind::InstanceNorm3d: return "instance_norm3d";
    case OpKind::Dropout: return "dropout";
    case OpKind::Mean: return "mean";
    case OpKind::Sum: return "sum";
    case OpKind::Square: return "square";
    case OpKind::Tanh: return "tanh";
    case OpKind::Concat: return "concat";
    case OpKind::SliceView: return "slice_view";
    case OpKind::Reshape: return "reshape";
    case OpKind::Permute: return "permute";
    case OpKind::MinMaxNormalize: return "minmax_normalize";
    case OpKind::StopGradient: return "stop_gradient";
  }
  return "?";
}

template <typename T>
Tensor<T> Tensor<T>::constant(Shape shape, std::vector<T> values) {
  if (ad::numel(shape) != values.size())
    fail(ErrorCode::ShapeMismatch,
         "tensor " + shape_str(shape) + " given " + std::to_string(values.size()) + " values");
  auto n = std::make_shared<Node<T>>();
  n->shape = std::move(shape);
  n->value = std::move(values);
  return Tensor(std::move(n));
}

template <typename T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t = constant(std::move(shape), std::move(values));
  t.node_->requires_grad = true;
  return t;
}

template <typename T>
Tensor<T> Tensor<T>::zeros(Shape shape, bool requires_grad) {
  const std::size_t n = ad::numel(shape);
  Tensor t = constant(std::move(shape), std::vector<T>(n, T(0)));
  t.node_->requires_grad = requires_grad;
  return t;
}

template <typename T>
std::span<T> Tensor<T>::mutable_values() {
  if (!node_->is_leaf()) fail(ErrorCode::InvalidAttribute, "only leaf tensors are mutable");
  return node_->value;
}

template <typename T>
T Tensor<T>::item() const {
  if (numel() != 1) fail(ErrorCode::NonScalarLoss, "item() on tensor " + shape_str(shape()));
  return node_->value[0];
}

template <typename T>
Tensor<T> make_result(OpKind kind, Shape shape, std::vector<T> value,
                      std::vector<Tensor<T>> inputs, std::function<void(Node<T>&)> backward_fn) {
  auto n = std::make_shared<Node<T>>();
  n->kind = kind;
  n->shape = std::move(shape);
  n->value = std::move(value);
  bool needs = false;
  if (g_grad_enabled) {
    for (const auto& in : inputs) needs = needs || in.requires_grad();
  }
  if (needs) {
    n->requires_grad = true;
    n->parents.reserve(inputs.size());
    for (auto& in : inputs) n->parents.push_back(in.node_ptr());
    n->backward_fn = std::move(backward_fn);
  }
  return Tensor<T>(std::move(n));
}

template <typename T>
void backward(const Tensor<T>& loss) {
  if (loss.numel() != 1)
    fail(ErrorCode::NonScalarLoss, "backward needs a scalar, got " + shape_str(loss.shape()));
  Node<T>* root = loss.node();
  if (!root->requires_grad) return;

  // iterative post-order DFS gives a topological order (parents first)
  std::vector<Node<T>*> order;
  std::unordered_set<Node<T>*> seen;
  std::vector<std::pair<Node<T>*, std::size_t>> stack;
  stack.emplace_back(root, 0);
  seen.insert(root);
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node<T>* p = node->parents[next++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  for (Node<T>* n : order)
    if (!n->is_leaf()) n->grad.assign(n->value.size(), T(0));
  root->ensure_grad()[0] += T(1);

  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<T>* n = *it;
    if (n->is_leaf()) continue;
    if (n->backward_fn) n->backward_fn(*n);
    if (n != root) {
      n->grad.clear();
      n->grad.shrink_to_fit();
    }
  }
}

template <typename To, typename From>
Tensor<To> cast_constant(const Tensor<From>& t) {
  std::vector<To> v(t.values().begin(), t.values().end());
  return Tensor<To>::constant(t.shape(), std::move(v));
}

template class Tensor<float>;
template class Tensor<double>;
template Tensor<float> make_result(OpKind, Shape, std::vector<float>, std::vector<Tensor<float>>,
                                   std::function<void(Node<float>&)>);
template Tensor<double> make_result(OpKind, Shape, std::vector<double>,
                                    std::vector<Tensor<double>>,
                                    std::function<void(Node<double>&)>);
template void backward(const Tensor<float>&);
template void backward(const Tensor<double>&);
template Tensor<double> cast_constant(const Tensor<float>&);
template Tensor<float> cast_constant(const Tensor<double>&);

}  // namespace cycpl::ad
