#pragma once

#include <functional>
#include <map>
#include <vector>

#include "epf/matrix.hpp"

namespace epf {

struct TapeValue {
  int node = -1;
  bool valid() const { return node >= 0; }
};

// Reverse-mode gradient tape over Matrix values. A fresh tape is built for
// every training step: forward ops append nodes, backward() walks them in
// reverse and accumulates adjoints. The op set is exactly what the branch
// forwards and the elastic-net loss need; there is no graph optimization.
class Tape {
 public:
  // Leaf registered as a trainable parameter. Gradients of registered
  // parameters are always defined after backward(), zero when unused.
  TapeValue param(const Matrix& value, int param_id);
  // Leaf that never receives a gradient.
  TapeValue constant(Matrix value);

  TapeValue matmul(TapeValue a, TapeValue b);
  TapeValue add(TapeValue a, TapeValue b);  // same shape
  // m [r x c] + col [r x 1] broadcast across columns
  TapeValue add_col_broadcast(TapeValue m, TapeValue col);
  TapeValue relu(TapeValue a);
  // elementwise product with a fixed mask (dropout)
  TapeValue mul_mask(TapeValue a, Matrix mask);
  // Per-hour linear model over a batch: coef is [24 x (p+1)] with the
  // intercept in column 0; design is [n*24 x p] with row i*24+s holding the
  // regressors of sample i, hour s. Result is [24 x n].
  TapeValue lem_rows(TapeValue coef, Matrix design);
  // sum of squared entries of (pred - target), as a 1x1 node
  TapeValue sum_sq_diff(TapeValue pred, Matrix target);
  // sum |a_ij| over all entries, skipping the first skip_cols columns
  TapeValue l1_norm(TapeValue a, std::size_t skip_cols = 0);
  TapeValue scale(TapeValue a, double c);

  const Matrix& value(TapeValue v) const { return nodes_[v.node].value; }
  const Matrix& grad(TapeValue v) const { return nodes_[v.node].grad; }

  // Seeds d(loss)/d(loss) = 1 and accumulates gradients into every node.
  // loss must be a 1x1 node; an invalid handle (empty tape) is a no-op.
  void backward(TapeValue loss);

  // param_id -> gradient, zero-filled for untouched parameters.
  std::map<int, Matrix> parameter_grads() const;

  std::size_t node_count() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix value;
    Matrix grad;
    std::function<void(Tape&)> back;  // empty for leaves
  };

  TapeValue push(Matrix value, std::function<void(Tape&)> back);
  Matrix& grad_ref(int node) { return nodes_[node].grad; }

  std::vector<Node> nodes_;
  std::vector<std::pair<int, int>> params_;  // (param_id, node index)
};

// Functional wrapper: backward pass + gradient extraction.
std::map<int, Matrix> grad_backward(Tape& tape, TapeValue loss);

}  // namespace epf
