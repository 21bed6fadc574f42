#include "tapfm/autograd.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

namespace tapfm {

namespace {

Value make_node(Tensor t, std::vector<Value> parents) {
  auto n = std::make_shared<Node>();
  n->val = std::move(t);
  n->parents = std::move(parents);
  for (const auto& p : n->parents)
    if (p->requires_grad) n->requires_grad = true;
  return n;
}

void check_same_shape(const Value& a, const Value& b, const char* op) {
  if (!a->val.same_shape(b->val))
    throw std::invalid_argument(std::string(op) + ": shape mismatch " + a->val.shape_str() +
                                " vs " + b->val.shape_str());
}

}  // namespace

Value make_constant(Tensor t) { return make_node(std::move(t), {}); }

Value make_leaf(Tensor t) {
  auto n = make_node(std::move(t), {});
  n->requires_grad = true;
  return n;
}

void backward(const Value& root) {
  if (root->val.numel() != 1) throw std::logic_error("backward() root must be scalar");
  // iterative post-order topological sort
  std::vector<Node*> order;
  std::unordered_set<Node*> seen;
  std::vector<std::pair<Node*, size_t>> stack;
  stack.emplace_back(root.get(), 0);
  seen.insert(root.get());
  while (!stack.empty()) {
    auto& [n, i] = stack.back();
    if (i < n->parents.size()) {
      Node* p = n->parents[i++].get();
      if (p->requires_grad && seen.insert(p).second) stack.emplace_back(p, 0);
    } else {
      order.push_back(n);
      stack.pop_back();
    }
  }
  root->g().data[0] += 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* n = *it;
    if (n->backprop && n->requires_grad) n->backprop(*n);
  }
}

void zero_grad(const Value& v) { v->grad = Tensor(); }

// ---- elementwise ----

Value add(const Value& a, const Value& b) {
  check_same_shape(a, b, "add");
  Tensor out = a->val;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] += b->val.data[i];
  auto n = make_node(std::move(out), {a, b});
  n->backprop = [](Node& self) {
    for (auto& p : self.parents)
      if (p->requires_grad) {
        auto& g = p->g();
        for (size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
      }
  };
  return n;
}

Value sub(const Value& a, const Value& b) { return add(a, neg(b)); }

Value mul(const Value& a, const Value& b) {
  check_same_shape(a, b, "mul");
  Tensor out = a->val;
  for (size_t i = 0; i < out.numel(); ++i) out.data[i] *= b->val.data[i];
  auto n = make_node(std::move(out), {a, b});
  n->backprop = [](Node& self) {
    const auto& a = self.parents[0];
    const auto& b = self.parents[1];
    if (a->requires_grad) {
      auto& g = a->g();
      for (size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i] * b->val.data[i];
    }
    if (b->requires_grad) {
      auto& g = b->g();
      for (size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i] * a->val.data[i];
    }
  };
  return n;
}

Value neg(const Value& a) { return scalar_mul(a, -1.0); }

Value scalar_mul(const Value& a, double s) {
  Tensor out = a->val;
  for (auto& x : out.data) x *= s;
  auto n = make_node(std::move(out), {a});
  n->backprop = [s](Node& self) {
    auto& g = self.parents[0]->g();
    for (size_t i = 0; i < g.numel(); ++i) g.data[i] += s * self.grad.data[i];
  };
  return n;
}

Value scalar_add(const Value& a, double s) {
  Tensor out = a->val;
  for (auto& x : out.data) x += s;
  auto n = make_node(std::move(out), {a});
  n->backprop = [](Node& self) {
    auto& g = self.parents[0]->g();
    for (size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
  };
  return n;
}

Value tanh_v(const Value& a) {
  Tensor out = a->val;
  for (auto& x : out.data) x = std::tanh(x);
  auto n = make_node(std::move(out), {a});
  n->backprop = [](Node& self) {
    auto& g = self.parents[0]->g();
    for (size_t i = 0; i < g.numel(); ++i) {
      double y = self.val.data[i];
      g.data[i] += self.grad.data[i] * (1.0 - y * y);
    }
  };
  return n;
}

Value sigmoid_v(const Value& a) {
  Tensor out = a->val;
  for (auto& x : out.data) x = 1.0 / (1.0 + std::exp(-x));
  auto n = make_node(std::move(out), {a});
  n->backprop = [](Node& self) {
    auto& g = self.parents[0]->g();
    for (size_t i = 0; i < g.numel(); ++i) {
      double y = self.val.data[i];
      g.data[i] += self.grad.data[i] * y * (1.0 - y);
    }
  };
  return n;
}

Value square_v(const Value& a) { return mul(a, a); }

Value sqrt_eps(const Value& a, double eps) {
  Tensor out = a->val;
  for (auto& x : out.data) x = std::sqrt(x + eps);
  auto n = make_node(std::move(out), {a});
  n->backprop = [](Node& self) {
    auto& g = self.parents[0]->g();
    for (size_t i = 0; i < g.numel(); ++i)
      g.data[i] += self.grad.data[i] * 0.5 / self.val.data[i];
  };
  return n;
}

// ---- linear algebra ----

Value matmul(const Value& a, const Value& b) {
  if (a->val.cols != b->val.rows)
    throw std::invalid_argument("matmul: inner dims " + a->val.shape_str() + " vs " +
                                b->val.shape_str());
  const int n = a->val.rows, k = a->val.cols, m = b->val.cols;
  Tensor out(n, m);
  for (int i = 0; i < n; ++i)
    for (int p = 0; p < k; ++p) {
      double av = a->val.at(i, p);
      if (av == 0.0) continue;
      for (int j = 0; j < m; ++j) out.at(i, j) += av * b->val.at(p, j);
    }
  auto node = make_node(std::move(out), {a, b});
  node->backprop = [n, k, m](Node& self) {
    const auto& a = self.parents[0];
    const auto& b = self.parents[1];
    if (a->requires_grad) {
      auto& g = a->g();
      for (int i = 0; i < n; ++i)
        for (int p = 0; p < k; ++p) {
          double acc = 0.0;
          for (int j = 0; j < m; ++j) acc += self.grad.at(i, j) * b->val.at(p, j);
          g.at(i, p) += acc;
        }
    }
    if (b->requires_grad) {
      auto& g = b->g();
      for (int p = 0; p < k; ++p)
        for (int i = 0; i < n; ++i) {
          double av = a->val.at(i, p);
          if (av == 0.0) continue;
          for (int j = 0; j < m; ++j) g.at(p, j) += av * self.grad.at(i, j);
        }
    }
  };
  return node;
}

Value transpose(const Value& a) {
  Tensor out(a->val.cols, a->val.rows);
  for (int i = 0; i < a->val.rows; ++i)
    for (int j = 0; j < a->val.cols; ++j) out.at(j, i) = a->val.at(i, j);
  auto n = make_node(std::move(out), {a});
  n->backprop = [](Node& self) {
    auto& g = self.parents[0]->g();
    for (int i = 0; i < self.val.rows; ++i)
      for (int j = 0; j < self.val.cols; ++j) g.at(j, i) += self.grad.at(i, j);
  };
  return n;
}

// ---- broadcasts ----

Value add_rowvec(const Value& x, const Value& r) {
  if (r->val.rows != 1 || r->val.cols != x->val.cols)
    throw std::invalid_argument("add_rowvec: bad shapes");
  Tensor out = x->val;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) += r->val.data[j];
  auto n = make_node(std::move(out), {x, r});
  n->backprop = [](Node& self) {
    const auto& x = self.parents[0];
    const auto& r = self.parents[1];
    if (x->requires_grad) {
      auto& g = x->g();
      for (size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
    }
    if (r->requires_grad) {
      auto& g = r->g();
      for (int i = 0; i < self.val.rows; ++i)
        for (int j = 0; j < self.val.cols; ++j) g.data[j] += self.grad.at(i, j);
    }
  };
  return n;
}

Value mul_rowvec(const Value& x, const Value& r) {
  if (r->val.rows != 1 || r->val.cols != x->val.cols)
    throw std::invalid_argument("mul_rowvec: bad shapes");
  Tensor out = x->val;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) *= r->val.data[j];
  auto n = make_node(std::move(out), {x, r});
  n->backprop = [](Node& self) {
    const auto& x = self.parents[0];
    const auto& r = self.parents[1];
    if (x->requires_grad) {
      auto& g = x->g();
      for (int i = 0; i < self.val.rows; ++i)
        for (int j = 0; j < self.val.cols; ++j)
          g.at(i, j) += self.grad.at(i, j) * r->val.data[j];
    }
    if (r->requires_grad) {
      auto& g = r->g();
      for (int i = 0; i < self.val.rows; ++i)
        for (int j = 0; j < self.val.cols; ++j)
          g.data[j] += self.grad.at(i, j) * x->val.at(i, j);
    }
  };
  return n;
}

Value add_colvec(const Value& x, const Value& c) {
  if (c->val.cols != 1 || c->val.rows != x->val.rows)
    throw std::invalid_argument("add_colvec: bad shapes");
  Tensor out = x->val;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) += c->val.data[i];
  auto n = make_node(std::move(out), {x, c});
  n->backprop = [](Node& self) {
    const auto& x = self.parents[0];
    const auto& c = self.parents[1];
    if (x->requires_grad) {
      auto& g = x->g();
      for (size_t i = 0; i < g.numel(); ++i) g.data[i] += self.grad.data[i];
    }
    if (c->requires_grad) {
      auto& g = c->g();
      for (int i = 0; i < self.val.rows; ++i)
        for (int j = 0; j < self.val.cols; ++j) g.data[i] += self.grad.at(i, j);
    }
  };
  return n;
}

Value div_colvec(const Value& x, const Value& c) {
  if (c->val.cols != 1 || c->val.rows != x->val.rows)
    throw std::invalid_argument("div_colvec: bad shapes");
  Tensor out = x->val;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) /= c->val.data[i];
  auto n = make_node(std::move(out), {x, c});
  n->backprop = [](Node& self) {
    const auto& x = self.parents[0];
    const auto& c = self.parents[1];
    if (x->requires_grad) {
      auto& g = x->g();
      for (int i = 0; i < self.val.rows; ++i)
        for (int j = 0; j < self.val.cols; ++j)
          g.at(i, j) += self.grad.at(i, j) / c->val.data[i];
    }
    if (c->requires_grad) {
      auto& g = c->g();
      for (int i = 0; i < self.val.rows; ++i) {
        double acc = 0.0;
        for (int j = 0; j < self.val.cols; ++j)
          acc += self.grad.at(i, j) * x->val.at(i, j);
        double ci = c->val.data[i];
        g.data[i] -= acc / (ci * ci);
      }
    }
  };
  return n;
}

// ---- reductions ----

Value sum_all(const Value& x) {
  double s = 0.0;
  for (double v : x->val.data) s += v;
  auto n = make_node(Tensor::scalar(s), {x});
  n->backprop = [](Node& self) {
    auto& g = self.parents[0]->g();
    for (auto& v : g.data) v += self.grad.data[0];
  };
  return n;
}

Value mean_all(const Value& x) {
  return scalar_mul(sum_all(x), 1.0 / static_cast<double>(x->val.numel()));
}

Value row_mean(const Value& x) {
  Tensor out(x->val.rows, 1);
  for (int i = 0; i < x->val.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < x->val.cols; ++j) s += x->val.at(i, j);
    out.data[i] = s / x->val.cols;
  }
  auto n = make_node(std::move(out), {x});
  n->backprop = [](Node& self) {
    const auto& x = self.parents[0];
    auto& g = x->g();
    double inv = 1.0 / x->val.cols;
    for (int i = 0; i < x->val.rows; ++i)
      for (int j = 0; j < x->val.cols; ++j) g.at(i, j) += self.grad.data[i] * inv;
  };
  return n;
}

Value logsumexp_rows(const Value& x) {
  Tensor out(x->val.rows, 1);
  for (int i = 0; i < x->val.rows; ++i) {
    double mx = x->val.at(i, 0);
    for (int j = 1; j < x->val.cols; ++j) mx = std::max(mx, x->val.at(i, j));
    double s = 0.0;
    for (int j = 0; j < x->val.cols; ++j) s += std::exp(x->val.at(i, j) - mx);
    out.data[i] = mx + std::log(s);
  }
  auto n = make_node(std::move(out), {x});
  n->backprop = [](Node& self) {
    const auto& x = self.parents[0];
    auto& g = x->g();
    for (int i = 0; i < x->val.rows; ++i)
      for (int j = 0; j < x->val.cols; ++j)
        g.at(i, j) += self.grad.data[i] * std::exp(x->val.at(i, j) - self.val.data[i]);
  };
  return n;
}

Value log_softmax_rows(const Value& x) {
  Value lse = logsumexp_rows(x);
  return add_colvec(x, neg(lse));
}

Value softmax_rows(const Value& x) {
  Tensor out = x->val;
  for (int i = 0; i < out.rows; ++i) {
    double mx = out.at(i, 0);
    for (int j = 1; j < out.cols; ++j) mx = std::max(mx, out.at(i, j));
    double s = 0.0;
    for (int j = 0; j < out.cols; ++j) {
      out.at(i, j) = std::exp(out.at(i, j) - mx);
      s += out.at(i, j);
    }
    for (int j = 0; j < out.cols; ++j) out.at(i, j) /= s;
  }
  auto n = make_node(std::move(out), {x});
  n->backprop = [](Node& self) {
    auto& g = self.parents[0]->g();
    for (int i = 0; i < self.val.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < self.val.cols; ++j)
        dot += self.grad.at(i, j) * self.val.at(i, j);
      for (int j = 0; j < self.val.cols; ++j)
        g.at(i, j) += self.val.at(i, j) * (self.grad.at(i, j) - dot);
    }
  };
  return n;
}

Value l2_normalize_rows(const Value& x) {
  Tensor norms(x->val.rows, 1);
  for (int i = 0; i < x->val.rows; ++i) {
    double s = 0.0;
    for (int j = 0; j < x->val.cols; ++j) s += x->val.at(i, j) * x->val.at(i, j);
    double nv = std::sqrt(s);
    if (nv < 1e-12) throw std::domain_error("degenerate span vector");
    norms.data[i] = nv;
  }
  Tensor out = x->val;
  for (int i = 0; i < out.rows; ++i)
    for (int j = 0; j < out.cols; ++j) out.at(i, j) /= norms.data[i];
  auto n = make_node(std::move(out), {x});
  n->backprop = [norms](Node& self) {
    auto& g = self.parents[0]->g();
    for (int i = 0; i < self.val.rows; ++i) {
      double dot = 0.0;
      for (int j = 0; j < self.val.cols; ++j)
        dot += self.grad.at(i, j) * self.val.at(i, j);
      for (int j = 0; j < self.val.cols; ++j)
        g.at(i, j) += (self.grad.at(i, j) - dot * self.val.at(i, j)) / norms.data[i];
    }
  };
  return n;
}

// ---- structure ----

Value slice_rows(const Value& x, int r0, int r1) {
  if (r0 < 0 || r1 > x->val.rows || r0 >= r1)
    throw std::out_of_range("slice_rows: bad range");
  Tensor out(r1 - r0, x->val.cols);
  for (int i = r0; i < r1; ++i)
    for (int j = 0; j < x->val.cols; ++j) out.at(i - r0, j) = x->val.at(i, j);
  auto n = make_node(std::move(out), {x});
  n->backprop = [r0](Node& self) {
    auto& g = self.parents[0]->g();
    for (int i = 0; i < self.val.rows; ++i)
      for (int j = 0; j < self.val.cols; ++j) g.at(r0 + i, j) += self.grad.at(i, j);
  };
  return n;
}

Value slice_cols(const Value& x, int c0, int c1) {
  if (c0 < 0 || c1 > x->val.cols || c0 >= c1)
    throw std::out_of_range("slice_cols: bad range");
  Tensor out(x->val.rows, c1 - c0);
  for (int i = 0; i < x->val.rows; ++i)
    for (int j = c0; j < c1; ++j) out.at(i, j - c0) = x->val.at(i, j);
  auto n = make_node(std::move(out), {x});
  n->backprop = [c0](Node& self) {
    auto& g = self.parents[0]->g();
    for (int i = 0; i < self.val.rows; ++i)
      for (int j = 0; j < self.val.cols; ++j) g.at(i, c0 + j) += self.grad.at(i, j);
  };
  return n;
}

Value concat_rows(const std::vector<Value>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_rows: empty");
  int cols = parts[0]->val.cols, rows = 0;
  for (const auto& p : parts) {
    if (p->val.cols != cols) throw std::invalid_argument("concat_rows: col mismatch");
    rows += p->val.rows;
  }
  Tensor out(rows, cols);
  int r = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < p->val.rows; ++i)
      for (int j = 0; j < cols; ++j) out.at(r + i, j) = p->val.at(i, j);
    r += p->val.rows;
  }
  auto n = make_node(std::move(out), parts);
  n->backprop = [](Node& self) {
    int r = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        auto& g = p->g();
        for (int i = 0; i < p->val.rows; ++i)
          for (int j = 0; j < p->val.cols; ++j) g.at(i, j) += self.grad.at(r + i, j);
      }
      r += p->val.rows;
    }
  };
  return n;
}

Value concat_cols(const std::vector<Value>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: empty");
  int rows = parts[0]->val.rows, cols = 0;
  for (const auto& p : parts) {
    if (p->val.rows != rows) throw std::invalid_argument("concat_cols: row mismatch");
    cols += p->val.cols;
  }
  Tensor out(rows, cols);
  int c = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < rows; ++i)
      for (int j = 0; j < p->val.cols; ++j) out.at(i, c + j) = p->val.at(i, j);
    c += p->val.cols;
  }
  auto n = make_node(std::move(out), parts);
  n->backprop = [](Node& self) {
    int c = 0;
    for (auto& p : self.parents) {
      if (p->requires_grad) {
        auto& g = p->g();
        for (int i = 0; i < p->val.rows; ++i)
          for (int j = 0; j < p->val.cols; ++j) g.at(i, j) += self.grad.at(i, c + j);
      }
      c += p->val.cols;
    }
  };
  return n;
}

Value gather_rows(const Value& table, const std::vector<int>& idx) {
  Tensor out(static_cast<int>(idx.size()), table->val.cols);
  for (size_t i = 0; i < idx.size(); ++i) {
    if (idx[i] < 0 || idx[i] >= table->val.rows)
      throw std::out_of_range("gather_rows: index out of range");
    for (int j = 0; j < table->val.cols; ++j)
      out.at(static_cast<int>(i), j) = table->val.at(idx[i], j);
  }
  auto n = make_node(std::move(out), {table});
  n->backprop = [idx](Node& self) {
    auto& g = self.parents[0]->g();
    for (size_t i = 0; i < idx.size(); ++i)
      for (int j = 0; j < self.val.cols; ++j)
        g.at(idx[i], j) += self.grad.at(static_cast<int>(i), j);
  };
  return n;
}

Value at_elem(const Value& x, int r, int c) {
  if (r < 0 || r >= x->val.rows || c < 0 || c >= x->val.cols)
    throw std::out_of_range("at_elem: out of range");
  auto n = make_node(Tensor::scalar(x->val.at(r, c)), {x});
  n->backprop = [r, c](Node& self) {
    self.parents[0]->g().at(r, c) += self.grad.data[0];
  };
  return n;
}

Value detach(const Value& x) { return make_constant(x->val); }

Value nll_rows(const Value& logp, const std::vector<int>& targets, int ignore) {
  if (static_cast<int>(targets.size()) != logp->val.rows)
    throw std::invalid_argument("nll_rows: target length mismatch");
  int active = 0;
  double loss = 0.0;
  for (size_t i = 0; i < targets.size(); ++i) {
    if (targets[i] == ignore) continue;
    if (targets[i] < 0 || targets[i] >= logp->val.cols)
      throw std::out_of_range("nll_rows: target out of range");
    loss -= logp->val.at(static_cast<int>(i), targets[i]);
    ++active;
  }
  if (active == 0) return make_constant(Tensor::scalar(0.0));
  auto n = make_node(Tensor::scalar(loss / active), {logp});
  n->backprop = [targets, ignore, active](Node& self) {
    auto& g = self.parents[0]->g();
    double s = self.grad.data[0] / active;
    for (size_t i = 0; i < targets.size(); ++i)
      if (targets[i] != ignore) g.at(static_cast<int>(i), targets[i]) -= s;
  };
  return n;
}

Value conv_dw3(const Value& x, const Value& w) {
  if (w->val.rows != 3 || w->val.cols != x->val.cols)
    throw std::invalid_argument("conv_dw3: kernel must be 3 x channels");
  const int n = x->val.rows, d = x->val.cols;
  Tensor out(n, d);
  for (int t = 0; t < n; ++t)
    for (int c = 0; c < d; ++c) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        int s = t + k - 1;
        if (s >= 0 && s < n) acc += w->val.at(k, c) * x->val.at(s, c);
      }
      out.at(t, c) = acc;
    }
  auto node = make_node(std::move(out), {x, w});
  node->backprop = [n, d](Node& self) {
    const auto& x = self.parents[0];
    const auto& w = self.parents[1];
    if (x->requires_grad) {
      auto& g = x->g();
      for (int t = 0; t < n; ++t)
        for (int c = 0; c < d; ++c)
          for (int k = 0; k < 3; ++k) {
            int s = t + k - 1;
            if (s >= 0 && s < n) g.at(s, c) += self.grad.at(t, c) * w->val.at(k, c);
          }
    }
    if (w->requires_grad) {
      auto& g = w->g();
      for (int t = 0; t < n; ++t)
        for (int c = 0; c < d; ++c)
          for (int k = 0; k < 3; ++k) {
            int s = t + k - 1;
            if (s >= 0 && s < n) g.at(k, c) += self.grad.at(t, c) * x->val.at(s, c);
          }
    }
  };
  return node;
}

}  // namespace tapfm
