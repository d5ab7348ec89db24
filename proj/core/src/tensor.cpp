#include "gypsum/tensor.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>
#include <unordered_set>

#include "gypsum/errors.hpp"

namespace gypsum {

namespace {

std::atomic<uint64_t> g_seq{1};
thread_local bool g_grad_enabled = true;

size_t shape_numel(const std::vector<int>& shape) {
  size_t n = 1;
  for (int d : shape) {
    if (d < 0) throw ShapeMismatch("negative dimension");
    n *= static_cast<size_t>(d);
  }
  return n;
}

void check_rank12(const std::vector<int>& shape) {
  if (shape.empty() || shape.size() > 2) throw ShapeMismatch("tensors are rank 1 or 2");
}

Tensor make_tensor(std::vector<int> shape, bool requires_grad) {
  check_rank12(shape);
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = std::move(shape);
  n->val.assign(shape_numel(n->shape), 0.0);
  n->requires_grad = requires_grad;
  if (n->requires_grad) n->ensure_grad();
  n->seq = g_seq.fetch_add(1);
  return Tensor(std::move(n));
}

Tensor make_op(std::vector<int> shape, std::vector<Tensor> parents,
               std::function<void(detail::TensorNode&)> backward) {
  check_rank12(shape);
  auto n = std::make_shared<detail::TensorNode>();
  n->shape = std::move(shape);
  n->val.assign(shape_numel(n->shape), 0.0);
  n->seq = g_seq.fetch_add(1);
  if (g_grad_enabled) {
    bool req = false;
    for (const auto& p : parents)
      if (p.requires_grad()) req = true;
    if (req) {
      n->requires_grad = true;
      n->ensure_grad();
      for (const auto& p : parents) n->parents.push_back(p.node_ptr());
      n->backward = std::move(backward);
    }
  }
  return Tensor(std::move(n));
}

// Accumulate g into parent p's grad if it participates in the tape.
inline bool wants_grad(const std::shared_ptr<detail::TensorNode>& p) {
  return p && p->requires_grad;
}

}  // namespace

NoGradGuard::NoGradGuard() : prev_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = prev_; }
bool grad_enabled() { return g_grad_enabled; }

// ---- Tensor members ----

const std::vector<int>& Tensor::shape() const { return node_->shape; }
int Tensor::rows() const { return node_->shape[0]; }
int Tensor::cols() const { return node_->shape.size() == 2 ? node_->shape[1] : 1; }
size_t Tensor::size() const { return node_->val.size(); }
std::vector<double>& Tensor::value() { return node_->val; }
const std::vector<double>& Tensor::value() const { return node_->val; }
std::vector<double>& Tensor::grad() {
  node_->ensure_grad();
  return node_->grad;
}
const std::vector<double>& Tensor::grad() const { return node_->grad; }
double Tensor::item() const {
  if (node_->val.size() != 1) throw ShapeMismatch("item() on non-scalar");
  return node_->val[0];
}
double Tensor::at(int i) const { return node_->val.at(static_cast<size_t>(i)); }
double Tensor::at(int r, int c) const {
  return node_->val.at(static_cast<size_t>(r) * static_cast<size_t>(cols()) +
                       static_cast<size_t>(c));
}
bool Tensor::requires_grad() const { return node_ && node_->requires_grad; }
void Tensor::zero_grad() {
  if (node_) {
    node_->ensure_grad();
    std::fill(node_->grad.begin(), node_->grad.end(), 0.0);
  }
}

Tensor Tensor::zeros(std::vector<int> shape, bool requires_grad) {
  return make_tensor(std::move(shape), requires_grad);
}

Tensor Tensor::full(std::vector<int> shape, double v, bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  std::fill(t.value().begin(), t.value().end(), v);
  return t;
}

Tensor Tensor::from_values(std::vector<int> shape, std::vector<double> vals,
                           bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  if (vals.size() != t.size()) throw ShapeMismatch("from_values: size mismatch");
  t.value() = std::move(vals);
  return t;
}

Tensor Tensor::scalar(double v, bool requires_grad) {
  return from_values({1}, {v}, requires_grad);
}

Tensor Tensor::rand_uniform(std::vector<int> shape, double bound, Rng& rng,
                            bool requires_grad) {
  Tensor t = make_tensor(std::move(shape), requires_grad);
  for (auto& v : t.value()) v = rng.uniform(-bound, bound);
  return t;
}

void Tensor::backward() {
  if (!node_) throw std::runtime_error("backward on undefined tensor");
  if (node_->val.size() != 1) throw ShapeMismatch("backward requires a scalar");
  if (!node_->requires_grad) return;

  // Reachable subgraph; reverse creation order is a valid topological order
  // because every op is created after its parents.
  std::vector<detail::TensorNode*> order;
  std::unordered_set<detail::TensorNode*> seen;
  std::vector<detail::TensorNode*> stack{node_.get()};
  seen.insert(node_.get());
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    order.push_back(n);
    for (auto& p : n->parents) {
      if (p && p->requires_grad && !seen.count(p.get())) {
        seen.insert(p.get());
        stack.push_back(p.get());
      }
    }
  }
  std::sort(order.begin(), order.end(),
            [](const detail::TensorNode* a, const detail::TensorNode* b) {
              return a->seq > b->seq;
            });
  node_->ensure_grad();
  node_->grad[0] += 1.0;
  for (auto* n : order)
    if (n->backward) n->backward(*n);
}

// ---- elementwise ----

static void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
  if (a.shape() != b.shape()) throw ShapeMismatch(std::string(op) + ": shape mismatch");
}

Tensor add(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "add");
  Tensor out = make_op(a.shape(), {a, b}, [](detail::TensorNode& self) {
    for (int k = 0; k < 2; ++k) {
      auto& p = self.parents[k];
      if (!wants_grad(p)) continue;
      p->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
    }
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = a.value()[i] + b.value()[i];
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "sub");
  Tensor out = make_op(a.shape(), {a, b}, [](detail::TensorNode& self) {
    if (wants_grad(self.parents[0])) {
      self.parents[0]->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) self.parents[0]->grad[i] += self.grad[i];
    }
    if (wants_grad(self.parents[1])) {
      self.parents[1]->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) self.parents[1]->grad[i] -= self.grad[i];
    }
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = a.value()[i] - b.value()[i];
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "mul");
  Tensor out = make_op(a.shape(), {a, b}, [](detail::TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants_grad(pa)) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] * pb->val[i];
    }
    if (wants_grad(pb)) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pb->grad[i] += self.grad[i] * pa->val[i];
    }
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = a.value()[i] * b.value()[i];
  return out;
}

Tensor neg(const Tensor& a) { return scale(a, -1.0); }

Tensor scale(const Tensor& a, double c) {
  Tensor out = make_op(a.shape(), {a}, [c](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += c * self.grad[i];
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = c * a.value()[i];
  return out;
}

Tensor add_scalar(const Tensor& a, double c) {
  Tensor out = make_op(a.shape(), {a}, [](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = a.value()[i] + c;
  return out;
}

Tensor div_elem(const Tensor& a, const Tensor& b) {
  check_same_shape(a, b, "div_elem");
  Tensor out = make_op(a.shape(), {a, b}, [](detail::TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants_grad(pa)) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] / pb->val[i];
    }
    if (wants_grad(pb)) {
      pb->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i)
        pb->grad[i] -= self.grad[i] * pa->val[i] / (pb->val[i] * pb->val[i]);
    }
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = a.value()[i] / b.value()[i];
  return out;
}

Tensor div_bcast(const Tensor& a, const Tensor& s) {
  if (s.size() != 1) throw ShapeMismatch("div_bcast: divisor must be scalar");
  Tensor out = make_op(a.shape(), {a, s}, [](detail::TensorNode& self) {
    auto& pa = self.parents[0];
    auto& ps = self.parents[1];
    double sv = ps->val[0];
    if (wants_grad(pa)) {
      pa->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pa->grad[i] += self.grad[i] / sv;
    }
    if (wants_grad(ps)) {
      ps->ensure_grad();
      double acc = 0.0;
      for (size_t i = 0; i < self.grad.size(); ++i) acc += self.grad[i] * pa->val[i];
      ps->grad[0] -= acc / (sv * sv);
    }
  });
  double sv = s.item();
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = a.value()[i] / sv;
  return out;
}

Tensor add_rowvec(const Tensor& m, const Tensor& v) {
  if (m.shape().size() != 2 || v.shape().size() != 1 || m.cols() != v.rows())
    throw ShapeMismatch("add_rowvec: need [r,c] and [c]");
  int r = m.rows(), c = m.cols();
  Tensor out = make_op(m.shape(), {m, v}, [r, c](detail::TensorNode& self) {
    auto& pm = self.parents[0];
    auto& pv = self.parents[1];
    if (wants_grad(pm)) {
      pm->ensure_grad();
      for (size_t i = 0; i < self.grad.size(); ++i) pm->grad[i] += self.grad[i];
    }
    if (wants_grad(pv)) {
      pv->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j) pv->grad[j] += self.grad[size_t(i) * c + j];
    }
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.value()[size_t(i) * c + j] = m.value()[size_t(i) * c + j] + v.value()[j];
  return out;
}

// ---- activations ----

Tensor relu(const Tensor& a) {
  Tensor out = make_op(a.shape(), {a}, [](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (p->val[i] > 0) p->grad[i] += self.grad[i];
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = a.value()[i] > 0 ? a.value()[i] : 0.0;
  return out;
}

Tensor leaky_relu(const Tensor& a, double slope) {
  Tensor out = make_op(a.shape(), {a}, [slope](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      p->grad[i] += self.grad[i] * (p->val[i] > 0 ? 1.0 : slope);
  });
  for (size_t i = 0; i < out.size(); ++i) {
    double x = a.value()[i];
    out.value()[i] = x > 0 ? x : slope * x;
  }
  return out;
}

Tensor elu(const Tensor& a, double alpha) {
  Tensor out = make_op(a.shape(), {a}, [alpha](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) {
      double d = p->val[i] > 0 ? 1.0 : self.val[i] + alpha;  // alpha*e^x = y + alpha
      p->grad[i] += self.grad[i] * d;
    }
  });
  for (size_t i = 0; i < out.size(); ++i) {
    double x = a.value()[i];
    out.value()[i] = x > 0 ? x : alpha * (std::exp(x) - 1.0);
  }
  return out;
}

Tensor tanh_t(const Tensor& a) {
  Tensor out = make_op(a.shape(), {a}, [](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      p->grad[i] += self.grad[i] * (1.0 - self.val[i] * self.val[i]);
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = std::tanh(a.value()[i]);
  return out;
}

Tensor log_t(const Tensor& a) {
  Tensor out = make_op(a.shape(), {a}, [](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i] / p->val[i];
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = std::log(a.value()[i]);
  return out;
}

Tensor clamp_min(const Tensor& a, double lo) {
  Tensor out = make_op(a.shape(), {a}, [lo](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i)
      if (p->val[i] > lo) p->grad[i] += self.grad[i];
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = std::max(a.value()[i], lo);
  return out;
}

// ---- shape / indexing ----

Tensor reshape(const Tensor& a, std::vector<int> shape) {
  if (shape_numel(shape) != a.size()) throw ShapeMismatch("reshape: element count differs");
  Tensor out = make_op(std::move(shape), {a}, [](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) p->grad[i] += self.grad[i];
  });
  out.value() = a.value();
  return out;
}

Tensor transpose(const Tensor& a) {
  if (a.shape().size() != 2) throw ShapeMismatch("transpose: rank-2 only");
  int r = a.rows(), c = a.cols();
  Tensor out = make_op({c, r}, {a}, [r, c](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j) p->grad[size_t(i) * c + j] += self.grad[size_t(j) * r + i];
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j) out.value()[size_t(j) * r + i] = a.value()[size_t(i) * c + j];
  return out;
}

Tensor concat_cols(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.rows() != b.rows())
    throw ShapeMismatch("concat_cols: row mismatch");
  int r = a.rows(), ca = a.cols(), cb = b.cols();
  Tensor out = make_op({r, ca + cb}, {a, b}, [r, ca, cb](detail::TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    int c = ca + cb;
    if (wants_grad(pa)) {
      pa->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < ca; ++j) pa->grad[size_t(i) * ca + j] += self.grad[size_t(i) * c + j];
    }
    if (wants_grad(pb)) {
      pb->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < cb; ++j)
          pb->grad[size_t(i) * cb + j] += self.grad[size_t(i) * c + ca + j];
    }
  });
  int c = ca + cb;
  for (int i = 0; i < r; ++i) {
    for (int j = 0; j < ca; ++j) out.value()[size_t(i) * c + j] = a.value()[size_t(i) * ca + j];
    for (int j = 0; j < cb; ++j)
      out.value()[size_t(i) * c + ca + j] = b.value()[size_t(i) * cb + j];
  }
  return out;
}

Tensor concat_vec(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 1 || b.shape().size() != 1)
    throw ShapeMismatch("concat_vec: rank-1 only");
  int na = a.rows(), nb = b.rows();
  Tensor out = make_op({na + nb}, {a, b}, [na, nb](detail::TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants_grad(pa)) {
      pa->ensure_grad();
      for (int i = 0; i < na; ++i) pa->grad[i] += self.grad[i];
    }
    if (wants_grad(pb)) {
      pb->ensure_grad();
      for (int i = 0; i < nb; ++i) pb->grad[i] += self.grad[size_t(na) + i];
    }
  });
  for (int i = 0; i < na; ++i) out.value()[i] = a.value()[i];
  for (int i = 0; i < nb; ++i) out.value()[size_t(na) + i] = b.value()[i];
  return out;
}

Tensor slice_cols(const Tensor& a, int start, int len) {
  if (a.shape().size() != 2) throw ShapeMismatch("slice_cols: rank-2 only");
  if (start < 0 || len < 0 || start + len > a.cols())
    throw ShapeMismatch("slice_cols: range out of bounds");
  int r = a.rows(), c = a.cols();
  Tensor out = make_op({r, len}, {a}, [r, c, start, len](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < len; ++j)
        p->grad[size_t(i) * c + start + j] += self.grad[size_t(i) * len + j];
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < len; ++j)
      out.value()[size_t(i) * len + j] = a.value()[size_t(i) * c + start + j];
  return out;
}

Tensor row(const Tensor& a, int r) {
  if (a.shape().size() != 2) throw ShapeMismatch("row: rank-2 only");
  if (r < 0 || r >= a.rows()) throw ShapeMismatch("row: index out of bounds");
  int c = a.cols();
  Tensor out = make_op({c}, {a}, [r, c](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (int j = 0; j < c; ++j) p->grad[size_t(r) * c + j] += self.grad[j];
  });
  for (int j = 0; j < c; ++j) out.value()[j] = a.value()[size_t(r) * c + j];
  return out;
}

Tensor stack_rows(const std::vector<Tensor>& rows) {
  if (rows.empty()) throw ShapeMismatch("stack_rows: empty");
  int d = rows[0].rows();
  for (const auto& t : rows)
    if (t.shape().size() != 1 || t.rows() != d) throw ShapeMismatch("stack_rows: ragged rows");
  int k = static_cast<int>(rows.size());
  Tensor out = make_op({k, d}, rows, [k, d](detail::TensorNode& self) {
    for (int i = 0; i < k; ++i) {
      auto& p = self.parents[i];
      if (!wants_grad(p)) continue;
      p->ensure_grad();
      for (int j = 0; j < d; ++j) p->grad[j] += self.grad[size_t(i) * d + j];
    }
  });
  for (int i = 0; i < k; ++i)
    for (int j = 0; j < d; ++j) out.value()[size_t(i) * d + j] = rows[i].value()[j];
  return out;
}

Tensor pick(const Tensor& v, int i) {
  if (v.shape().size() != 1) throw ShapeMismatch("pick: rank-1 only");
  if (i < 0 || i >= v.rows()) throw ShapeMismatch("pick: index out of bounds");
  Tensor out = make_op({1}, {v}, [i](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    p->grad[i] += self.grad[0];
  });
  out.value()[0] = v.value()[i];
  return out;
}

Tensor gather_rows(const Tensor& m, const std::vector<int>& idx) {
  if (m.shape().size() != 2) throw ShapeMismatch("gather_rows: rank-2 only");
  int c = m.cols();
  for (int i : idx)
    if (i < 0 || i >= m.rows()) throw ShapeMismatch("gather_rows: index out of bounds");
  int k = static_cast<int>(idx.size());
  Tensor out = make_op({k, c}, {m}, [idx, c](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t r = 0; r < idx.size(); ++r)
      for (int j = 0; j < c; ++j)
        p->grad[size_t(idx[r]) * c + j] += self.grad[r * c + j];
  });
  for (size_t r = 0; r < idx.size(); ++r)
    for (int j = 0; j < c; ++j)
      out.value()[r * c + j] = m.value()[size_t(idx[r]) * c + j];
  return out;
}

Tensor gather_vec(const Tensor& v, const std::vector<int>& idx) {
  if (v.shape().size() != 1) throw ShapeMismatch("gather_vec: rank-1 only");
  for (int i : idx)
    if (i < 0 || i >= v.rows()) throw ShapeMismatch("gather_vec: index out of bounds");
  int k = static_cast<int>(idx.size());
  Tensor out = make_op({k}, {v}, [idx](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t r = 0; r < idx.size(); ++r) p->grad[idx[r]] += self.grad[r];
  });
  for (size_t r = 0; r < idx.size(); ++r) out.value()[r] = v.value()[idx[r]];
  return out;
}

// ---- reductions ----

Tensor sum_all(const Tensor& a) {
  Tensor out = make_op({1}, {a}, [](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t i = 0; i < p->grad.size(); ++i) p->grad[i] += self.grad[0];
  });
  double acc = 0.0;
  for (double v : a.value()) acc += v;
  out.value()[0] = acc;
  return out;
}

Tensor mean_all(const Tensor& a) { return scale(sum_all(a), 1.0 / double(a.size())); }

Tensor sum_selected(const Tensor& v, const std::vector<int>& idx) {
  if (v.shape().size() != 1) throw ShapeMismatch("sum_selected: rank-1 only");
  for (int i : idx)
    if (i < 0 || i >= v.rows()) throw ShapeMismatch("sum_selected: index out of bounds");
  Tensor out = make_op({1}, {v}, [idx](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (int i : idx) p->grad[i] += self.grad[0];
  });
  double acc = 0.0;
  for (int i : idx) acc += v.value()[i];
  out.value()[0] = acc;
  return out;
}

// ---- linear algebra ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  if (a.shape().size() != 2 || b.shape().size() != 2 || a.cols() != b.rows())
    throw ShapeMismatch("matmul: inner dimension mismatch");
  int m = a.rows(), k = a.cols(), n = b.cols();
  Tensor out = make_op({m, n}, {a, b}, [m, k, n](detail::TensorNode& self) {
    auto& pa = self.parents[0];
    auto& pb = self.parents[1];
    if (wants_grad(pa)) {
      pa->ensure_grad();
      // dA = dC * B^T
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) {
          double g = self.grad[size_t(i) * n + j];
          if (g == 0.0) continue;
          for (int t = 0; t < k; ++t) pa->grad[size_t(i) * k + t] += g * pb->val[size_t(t) * n + j];
        }
    }
    if (wants_grad(pb)) {
      pb->ensure_grad();
      // dB = A^T * dC
      for (int i = 0; i < m; ++i)
        for (int t = 0; t < k; ++t) {
          double av = pa->val[size_t(i) * k + t];
          if (av == 0.0) continue;
          for (int j = 0; j < n; ++j)
            pb->grad[size_t(t) * n + j] += av * self.grad[size_t(i) * n + j];
        }
    }
  });
  for (int i = 0; i < m; ++i)
    for (int t = 0; t < k; ++t) {
      double av = a.value()[size_t(i) * k + t];
      if (av == 0.0) continue;
      for (int j = 0; j < n; ++j) out.value()[size_t(i) * n + j] += av * b.value()[size_t(t) * n + j];
    }
  return out;
}

Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b) {
  bool vec_in = x.shape().size() == 1;
  int t = vec_in ? 1 : x.rows();
  int d_in = vec_in ? x.rows() : x.cols();
  if (w.shape().size() != 2 || w.cols() != d_in) throw ShapeMismatch("linear: w shape");
  int d_out = w.rows();
  if (b.defined() && (b.shape().size() != 1 || b.rows() != d_out))
    throw ShapeMismatch("linear: b shape");
  std::vector<Tensor> parents = b.defined() ? std::vector<Tensor>{x, w, b}
                                            : std::vector<Tensor>{x, w};
  std::vector<int> oshape = vec_in ? std::vector<int>{d_out} : std::vector<int>{t, d_out};
  Tensor out = make_op(oshape, parents, [t, d_in, d_out](detail::TensorNode& self) {
    auto& px = self.parents[0];
    auto& pw = self.parents[1];
    bool has_b = self.parents.size() == 3;
    if (wants_grad(px)) {
      px->ensure_grad();
      for (int i = 0; i < t; ++i)
        for (int o = 0; o < d_out; ++o) {
          double g = self.grad[size_t(i) * d_out + o];
          if (g == 0.0) continue;
          for (int j = 0; j < d_in; ++j)
            px->grad[size_t(i) * d_in + j] += g * pw->val[size_t(o) * d_in + j];
        }
    }
    if (wants_grad(pw)) {
      pw->ensure_grad();
      for (int i = 0; i < t; ++i)
        for (int o = 0; o < d_out; ++o) {
          double g = self.grad[size_t(i) * d_out + o];
          if (g == 0.0) continue;
          for (int j = 0; j < d_in; ++j)
            pw->grad[size_t(o) * d_in + j] += g * px->val[size_t(i) * d_in + j];
        }
    }
    if (has_b && wants_grad(self.parents[2])) {
      auto& pb = self.parents[2];
      pb->ensure_grad();
      for (int i = 0; i < t; ++i)
        for (int o = 0; o < d_out; ++o) pb->grad[o] += self.grad[size_t(i) * d_out + o];
    }
  });
  for (int i = 0; i < t; ++i)
    for (int o = 0; o < d_out; ++o) {
      double acc = b.defined() ? b.value()[o] : 0.0;
      for (int j = 0; j < d_in; ++j)
        acc += x.value()[size_t(i) * d_in + j] * w.value()[size_t(o) * d_in + j];
      out.value()[size_t(i) * d_out + o] = acc;
    }
  return out;
}

// ---- softmax family ----

Tensor softmax_rows_masked(const Tensor& logits, const std::vector<uint8_t>& key_mask,
                           bool causal) {
  if (logits.shape().size() != 2) throw ShapeMismatch("softmax_rows_masked: rank-2 only");
  int r = logits.rows(), c = logits.cols();
  if (static_cast<int>(key_mask.size()) != c)
    throw ShapeMismatch("softmax_rows_masked: mask length mismatch");
  Tensor out = make_op(logits.shape(), {logits}, [r, c](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (int i = 0; i < r; ++i) {
      const double* y = &self.val[size_t(i) * c];
      const double* g = &self.grad[size_t(i) * c];
      double dot = 0.0;
      for (int j = 0; j < c; ++j) dot += y[j] * g[j];
      for (int j = 0; j < c; ++j) p->grad[size_t(i) * c + j] += y[j] * (g[j] - dot);
    }
  });
  for (int i = 0; i < r; ++i) {
    double mx = -1e300;
    bool any = false;
    for (int j = 0; j < c; ++j) {
      if (!key_mask[j] || (causal && j > i)) continue;
      any = true;
      mx = std::max(mx, logits.value()[size_t(i) * c + j]);
    }
    if (!any) throw DegenerateMask("softmax row with every position masked");
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      if (!key_mask[j] || (causal && j > i)) continue;
      z += std::exp(logits.value()[size_t(i) * c + j] - mx);
    }
    for (int j = 0; j < c; ++j) {
      if (!key_mask[j] || (causal && j > i)) {
        out.value()[size_t(i) * c + j] = 0.0;
      } else {
        out.value()[size_t(i) * c + j] = std::exp(logits.value()[size_t(i) * c + j] - mx) / z;
      }
    }
  }
  return out;
}

Tensor softmax_vec(const Tensor& logits) {
  if (logits.shape().size() != 1) throw ShapeMismatch("softmax_vec: rank-1 only");
  int n = logits.rows();
  Tensor out = make_op({n}, {logits}, [n](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    double dot = 0.0;
    for (int j = 0; j < n; ++j) dot += self.val[j] * self.grad[j];
    for (int j = 0; j < n; ++j) p->grad[j] += self.val[j] * (self.grad[j] - dot);
  });
  double mx = -1e300;
  for (int j = 0; j < n; ++j) mx = std::max(mx, logits.value()[j]);
  double z = 0.0;
  for (int j = 0; j < n; ++j) z += std::exp(logits.value()[j] - mx);
  for (int j = 0; j < n; ++j) out.value()[j] = std::exp(logits.value()[j] - mx) / z;
  return out;
}

Tensor segment_softmax(const Tensor& scores, const std::vector<int>& seg_offsets) {
  if (scores.shape().size() != 1) throw ShapeMismatch("segment_softmax: rank-1 only");
  if (seg_offsets.empty() || seg_offsets.front() != 0 ||
      seg_offsets.back() != scores.rows())
    throw ShapeMismatch("segment_softmax: bad offsets");
  Tensor out = make_op(scores.shape(), {scores}, [seg_offsets](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (size_t s = 0; s + 1 < seg_offsets.size(); ++s) {
      int lo = seg_offsets[s], hi = seg_offsets[s + 1];
      double dot = 0.0;
      for (int j = lo; j < hi; ++j) dot += self.val[j] * self.grad[j];
      for (int j = lo; j < hi; ++j) p->grad[j] += self.val[j] * (self.grad[j] - dot);
    }
  });
  for (size_t s = 0; s + 1 < seg_offsets.size(); ++s) {
    int lo = seg_offsets[s], hi = seg_offsets[s + 1];
    if (lo == hi) continue;
    double mx = -1e300;
    for (int j = lo; j < hi; ++j) mx = std::max(mx, scores.value()[j]);
    double z = 0.0;
    for (int j = lo; j < hi; ++j) z += std::exp(scores.value()[j] - mx);
    for (int j = lo; j < hi; ++j) out.value()[j] = std::exp(scores.value()[j] - mx) / z;
  }
  return out;
}

// ---- segmented / scaled row ops ----

Tensor scale_rows(const Tensor& m, const Tensor& s) {
  if (m.shape().size() != 2 || s.shape().size() != 1 || s.rows() != m.rows())
    throw ShapeMismatch("scale_rows: need [r,c] and [r]");
  int r = m.rows(), c = m.cols();
  Tensor out = make_op(m.shape(), {m, s}, [r, c](detail::TensorNode& self) {
    auto& pm = self.parents[0];
    auto& ps = self.parents[1];
    if (wants_grad(pm)) {
      pm->ensure_grad();
      for (int i = 0; i < r; ++i)
        for (int j = 0; j < c; ++j)
          pm->grad[size_t(i) * c + j] += self.grad[size_t(i) * c + j] * ps->val[i];
    }
    if (wants_grad(ps)) {
      ps->ensure_grad();
      for (int i = 0; i < r; ++i) {
        double acc = 0.0;
        for (int j = 0; j < c; ++j)
          acc += self.grad[size_t(i) * c + j] * pm->val[size_t(i) * c + j];
        ps->grad[i] += acc;
      }
    }
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.value()[size_t(i) * c + j] = m.value()[size_t(i) * c + j] * s.value()[i];
  return out;
}

Tensor segment_sum_rows(const Tensor& m, const std::vector<int>& seg_of_row, int n_seg) {
  if (m.shape().size() != 2) throw ShapeMismatch("segment_sum_rows: rank-2 only");
  if (static_cast<int>(seg_of_row.size()) != m.rows())
    throw ShapeMismatch("segment_sum_rows: id count mismatch");
  for (int s : seg_of_row)
    if (s < 0 || s >= n_seg) throw ShapeMismatch("segment_sum_rows: id out of range");
  int r = m.rows(), c = m.cols();
  Tensor out = make_op({n_seg, c}, {m}, [seg_of_row, r, c](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (int i = 0; i < r; ++i)
      for (int j = 0; j < c; ++j)
        p->grad[size_t(i) * c + j] += self.grad[size_t(seg_of_row[i]) * c + j];
  });
  for (int i = 0; i < r; ++i)
    for (int j = 0; j < c; ++j)
      out.value()[size_t(seg_of_row[i]) * c + j] += m.value()[size_t(i) * c + j];
  return out;
}

// ---- normalization / regularization ----

Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps) {
  bool vec_in = x.shape().size() == 1;
  int r = vec_in ? 1 : x.rows();
  int c = vec_in ? x.rows() : x.cols();
  if (gamma.shape().size() != 1 || gamma.rows() != c || beta.shape().size() != 1 ||
      beta.rows() != c)
    throw ShapeMismatch("layer_norm_rows: gamma/beta shape");
  Tensor out = make_op(x.shape(), {x, gamma, beta}, [r, c, eps](detail::TensorNode& self) {
    auto& px = self.parents[0];
    auto& pg = self.parents[1];
    auto& pb = self.parents[2];
    for (int i = 0; i < r; ++i) {
      const double* xv = &px->val[size_t(i) * c];
      double mu = 0.0;
      for (int j = 0; j < c; ++j) mu += xv[j];
      mu /= c;
      double var = 0.0;
      for (int j = 0; j < c; ++j) var += (xv[j] - mu) * (xv[j] - mu);
      var /= c;
      double inv = 1.0 / std::sqrt(var + eps);
      const double* g = &self.grad[size_t(i) * c];
      if (wants_grad(pg)) {
        pg->ensure_grad();
        for (int j = 0; j < c; ++j) pg->grad[j] += g[j] * (xv[j] - mu) * inv;
      }
      if (wants_grad(pb)) {
        pb->ensure_grad();
        for (int j = 0; j < c; ++j) pb->grad[j] += g[j];
      }
      if (wants_grad(px)) {
        px->ensure_grad();
        double mean_dxhat = 0.0, mean_dxhat_xhat = 0.0;
        for (int j = 0; j < c; ++j) {
          double dxhat = g[j] * pg->val[j];
          double xhat = (xv[j] - mu) * inv;
          mean_dxhat += dxhat;
          mean_dxhat_xhat += dxhat * xhat;
        }
        mean_dxhat /= c;
        mean_dxhat_xhat /= c;
        for (int j = 0; j < c; ++j) {
          double dxhat = g[j] * pg->val[j];
          double xhat = (xv[j] - mu) * inv;
          px->grad[size_t(i) * c + j] += inv * (dxhat - mean_dxhat - xhat * mean_dxhat_xhat);
        }
      }
    }
  });
  for (int i = 0; i < r; ++i) {
    const double* xv = &x.value()[size_t(i) * c];
    double mu = 0.0;
    for (int j = 0; j < c; ++j) mu += xv[j];
    mu /= c;
    double var = 0.0;
    for (int j = 0; j < c; ++j) var += (xv[j] - mu) * (xv[j] - mu);
    var /= c;
    double inv = 1.0 / std::sqrt(var + eps);
    for (int j = 0; j < c; ++j)
      out.value()[size_t(i) * c + j] = gamma.value()[j] * (xv[j] - mu) * inv + beta.value()[j];
  }
  return out;
}

Tensor dropout(const Tensor& x, double p, Rng& rng, bool training) {
  if (!training || p <= 0.0) return x;
  double keep = 1.0 - p;
  auto mask = std::make_shared<std::vector<double>>(x.size());
  for (auto& m : *mask) m = rng.uniform() < keep ? 1.0 / keep : 0.0;
  Tensor out = make_op(x.shape(), {x}, [mask](detail::TensorNode& self) {
    auto& px = self.parents[0];
    if (!wants_grad(px)) return;
    px->ensure_grad();
    for (size_t i = 0; i < self.grad.size(); ++i) px->grad[i] += self.grad[i] * (*mask)[i];
  });
  for (size_t i = 0; i < out.size(); ++i) out.value()[i] = x.value()[i] * (*mask)[i];
  return out;
}

Tensor mask_rows(const Tensor& m, const std::vector<uint8_t>& row_mask) {
  if (m.shape().size() != 2) throw ShapeMismatch("mask_rows: rank-2 only");
  if (static_cast<int>(row_mask.size()) != m.rows())
    throw ShapeMismatch("mask_rows: mask length mismatch");
  int r = m.rows(), c = m.cols();
  Tensor out = make_op(m.shape(), {m}, [row_mask, r, c](detail::TensorNode& self) {
    auto& p = self.parents[0];
    if (!wants_grad(p)) return;
    p->ensure_grad();
    for (int i = 0; i < r; ++i) {
      if (!row_mask[i]) continue;
      for (int j = 0; j < c; ++j) p->grad[size_t(i) * c + j] += self.grad[size_t(i) * c + j];
    }
  });
  for (int i = 0; i < r; ++i) {
    if (!row_mask[i]) continue;
    for (int j = 0; j < c; ++j) out.value()[size_t(i) * c + j] = m.value()[size_t(i) * c + j];
  }
  return out;
}

Tensor mean_of(const std::vector<Tensor>& ts) {
  if (ts.empty()) throw ShapeMismatch("mean_of: empty");
  for (const auto& t : ts) check_same_shape(ts[0], t, "mean_of");
  double inv = 1.0 / double(ts.size());
  size_t k = ts.size();
  Tensor out = make_op(ts[0].shape(), ts, [k, inv](detail::TensorNode& self) {
    for (size_t i = 0; i < k; ++i) {
      auto& p = self.parents[i];
      if (!wants_grad(p)) continue;
      p->ensure_grad();
      for (size_t j = 0; j < self.grad.size(); ++j) p->grad[j] += self.grad[j] * inv;
    }
  });
  for (size_t j = 0; j < out.size(); ++j) {
    double acc = 0.0;
    for (const auto& t : ts) acc += t.value()[j];
    out.value()[j] = acc * inv;
  }
  return out;
}

}  // namespace gypsum
