#include "elp/tensor.hpp"

#include <unordered_set>

namespace elp::nn {

namespace {

std::size_t shape_size(const std::vector<std::size_t>& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

}  // namespace

Tensor Tensor::zeros(std::vector<std::size_t> shape) {
  if (shape.empty()) throw Error("tensor: empty shape");
  Tensor t;
  t.node_ = std::make_shared<TensorNode>();
  t.node_->shape = std::move(shape);
  const std::size_t n = shape_size(t.node_->shape);
  if (n == 0) throw Error("tensor: zero-sized dimension");
  t.node_->value.assign(n, 0.0);
  t.node_->grad.assign(n, 0.0);
  return t;
}

Tensor Tensor::scalar(double v) {
  Tensor t = zeros({1});
  t.node_->value[0] = v;
  return t;
}

std::size_t Tensor::rows() const {
  return node_->shape.size() >= 2 ? node_->shape[0] : 1;
}

std::size_t Tensor::cols() const {
  return node_->shape.size() >= 2 ? node_->shape[1] : node_->shape[0];
}

double Tensor::item() const {
  if (node_->value.size() != 1)
    throw Error("tensor: item() on non-scalar of size " +
                std::to_string(node_->value.size()));
  return node_->value[0];
}

Tensor Tensor::make_op(std::vector<std::size_t> shape,
                       std::vector<std::shared_ptr<TensorNode>> parents) {
  Tensor t = zeros(std::move(shape));
  t.node_->parents = std::move(parents);
  return t;
}

void backward(Tensor& loss, double seed) {
  if (!loss.valid()) throw Error("backward: null tensor");
  if (loss.size() != 1) throw Error("backward: loss must be scalar");

  // Depth-first topological order, iterative to survive deep LSTM graphs.
  std::vector<TensorNode*> order;
  std::unordered_set<TensorNode*> done;
  std::vector<std::pair<TensorNode*, std::size_t>> stack;
  stack.emplace_back(loss.node().get(), 0);
  while (!stack.empty()) {
    auto& [node, next_child] = stack.back();
    if (done.count(node) != 0) {
      stack.pop_back();
      continue;
    }
    if (next_child < node->parents.size()) {
      TensorNode* child = node->parents[next_child].get();
      ++next_child;
      if (done.count(child) == 0) stack.emplace_back(child, 0);
      continue;
    }
    done.insert(node);
    order.push_back(node);
    stack.pop_back();
  }

  loss.grad()[0] += seed;
  for (auto it = order.rbegin(); it != order.rend(); ++it)
    if ((*it)->backward_fn) (*it)->backward_fn();
}

}  // namespace elp::nn
