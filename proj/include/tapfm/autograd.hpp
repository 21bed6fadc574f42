#pragma once

#include <functional>
#include <memory>
#include <vector>

#include "tapfm/tensor.hpp"

namespace tapfm {

// Reverse-mode autodiff over Tensor values. Nodes form a DAG; backward()
// runs the tape in reverse topological order. Values are immutable after
// construction; grads accumulate into leaf nodes.
struct Node;
using Value = std::shared_ptr<Node>;

struct Node {
  Tensor val;
  Tensor grad;  // allocated lazily, same shape as val
  bool requires_grad = false;
  std::vector<Value> parents;
  std::function<void(Node&)> backprop;  // adds contributions into parents' grads

  Tensor& g() {
    if (grad.numel() == 0) grad = Tensor(val.rows, val.cols);
    return grad;
  }
};

Value make_constant(Tensor t);
Value make_leaf(Tensor t);  // requires_grad = true

// Runs reverse-mode accumulation from a scalar root (seeds d(root)/d(root)=1).
void backward(const Value& root);
void zero_grad(const Value& v);

// ---- elementwise / scalar ----
Value add(const Value& a, const Value& b);
Value sub(const Value& a, const Value& b);
Value mul(const Value& a, const Value& b);
Value neg(const Value& a);
Value scalar_mul(const Value& a, double s);
Value scalar_add(const Value& a, double s);
Value tanh_v(const Value& a);
Value sigmoid_v(const Value& a);
Value square_v(const Value& a);
Value sqrt_eps(const Value& a, double eps);  // sqrt(a + eps), a >= 0

// ---- linear algebra ----
Value matmul(const Value& a, const Value& b);
Value transpose(const Value& a);

// ---- broadcasts ----
Value add_rowvec(const Value& x, const Value& r);   // x[n,d] + r[1,d]
Value mul_rowvec(const Value& x, const Value& r);   // x[n,d] * r[1,d]
Value add_colvec(const Value& x, const Value& c);   // x[n,d] + c[n,1]
Value div_colvec(const Value& x, const Value& c);   // x[n,d] / c[n,1]

// ---- reductions ----
Value sum_all(const Value& x);         // -> 1x1
Value mean_all(const Value& x);        // -> 1x1
Value row_mean(const Value& x);        // -> n x 1
Value logsumexp_rows(const Value& x);  // -> n x 1, stable
Value softmax_rows(const Value& x);
Value log_softmax_rows(const Value& x);
Value l2_normalize_rows(const Value& x);  // throws on row norm < 1e-12

// ---- structure ----
Value slice_rows(const Value& x, int r0, int r1);  // [r0, r1)
Value slice_cols(const Value& x, int c0, int c1);
Value concat_rows(const std::vector<Value>& parts);
Value concat_cols(const std::vector<Value>& parts);
Value gather_rows(const Value& table, const std::vector<int>& idx);
Value at_elem(const Value& x, int r, int c);  // -> 1x1
Value detach(const Value& x);                 // value copy, no gradient flow

// Mean over positions with target != ignore of -logp[i, target[i]].
// logp must be log-probabilities (rows of log_softmax). If every target is
// ignored, returns constant 0.
Value nll_rows(const Value& logp, const std::vector<int>& targets, int ignore = -1);

// Depthwise 1-D convolution along rows with kernel size 3, same padding.
// x[n,d], w[3,d]: out[t,c] = sum_k w[k,c] * x[t+k-1,c] (zero-padded).
Value conv_dw3(const Value& x, const Value& w);

}  // namespace tapfm
