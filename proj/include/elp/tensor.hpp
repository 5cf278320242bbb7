#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <span>
#include <vector>

#include "elp/common.hpp"

namespace elp::nn {

// One node of the computation tape. Ops allocate a node per output, capture
// their inputs as parents and record a closure that adds into the parents'
// gradients. Leaves (parameters, constants) have no closure.
struct TensorNode {
  std::vector<std::size_t> shape;
  std::vector<double> value;
  std::vector<double> grad;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void()> backward_fn;
};

// Shared handle to a node. Copies alias the same storage.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<std::size_t> shape);
  static Tensor scalar(double v);

  bool valid() const { return node_ != nullptr; }
  const std::vector<std::size_t>& shape() const { return node_->shape; }
  std::size_t size() const { return node_->value.size(); }

  // 2D helpers; a 1D tensor counts as a single row.
  std::size_t rows() const;
  std::size_t cols() const;

  std::span<double> value() { return node_->value; }
  std::span<const double> value() const { return node_->value; }
  std::span<double> grad() { return node_->grad; }
  std::span<const double> grad() const { return node_->grad; }
  double item() const;

  void zero_grad() {
    for (double& g : node_->grad) g = 0.0;
  }

  std::shared_ptr<TensorNode>& node() { return node_; }
  const std::shared_ptr<TensorNode>& node() const { return node_; }

  // Internal: allocate an op output wired to its parents.
  static Tensor make_op(std::vector<std::size_t> shape,
                        std::vector<std::shared_ptr<TensorNode>> parents);

 private:
  std::shared_ptr<TensorNode> node_;
};

// Reverse-mode sweep from `loss` (a scalar): seeds d(loss)/d(loss) = seed,
// then runs every recorded closure in reverse topological order. Gradients
// accumulate, so calling backward for several losses before an optimizer
// step sums their gradients.
void backward(Tensor& loss, double seed = 1.0);

}  // namespace elp::nn
