#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <vector>

#include "gypsum/rng.hpp"

namespace gypsum {

namespace detail {
struct TensorNode;
}

// Reverse-mode autodiff tensor, rank 1 or 2, double precision, row-major.
// Ops build a dynamic tape; Tensor::backward() on a scalar walks the tape in
// reverse creation order. Inside a NoGradGuard scope ops record nothing.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false);
  static Tensor full(std::vector<int> shape, double v, bool requires_grad = false);
  static Tensor from_values(std::vector<int> shape, std::vector<double> vals,
                            bool requires_grad = false);
  static Tensor scalar(double v, bool requires_grad = false);
  // Uniform init in [-bound, bound].
  static Tensor rand_uniform(std::vector<int> shape, double bound, Rng& rng,
                             bool requires_grad = false);

  bool defined() const { return node_ != nullptr; }
  const std::vector<int>& shape() const;
  int rows() const;  // rank-2 row count, rank-1 length
  int cols() const;  // rank-2 col count, 1 for rank-1
  size_t size() const;

  std::vector<double>& value();
  const std::vector<double>& value() const;
  std::vector<double>& grad();
  const std::vector<double>& grad() const;

  double item() const;  // value of a single-element tensor
  double at(int i) const;
  double at(int r, int c) const;

  bool requires_grad() const;
  void zero_grad();
  // Backpropagate from this scalar through the tape.
  void backward();

  detail::TensorNode* node() const { return node_.get(); }
  const std::shared_ptr<detail::TensorNode>& node_ptr() const { return node_; }

  explicit Tensor(std::shared_ptr<detail::TensorNode> n) : node_(std::move(n)) {}

 private:
  std::shared_ptr<detail::TensorNode> node_;
};

// Suppresses tape recording for the lifetime of the guard (inference mode).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

bool grad_enabled();

namespace detail {
struct TensorNode {
  std::vector<int> shape;
  std::vector<double> val;
  std::vector<double> grad;
  bool requires_grad = false;
  uint64_t seq = 0;
  std::vector<std::shared_ptr<TensorNode>> parents;
  std::function<void(TensorNode&)> backward;

  size_t size() const { return val.size(); }
  void ensure_grad() {
    if (grad.size() != val.size()) grad.assign(val.size(), 0.0);
  }
};
}  // namespace detail

// ---- elementwise / arithmetic ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor neg(const Tensor& a);
Tensor scale(const Tensor& a, double c);
Tensor add_scalar(const Tensor& a, double c);
// Elementwise division a / b (same shape).
Tensor div_elem(const Tensor& a, const Tensor& b);
// Divide every element of a by scalar tensor s ([1]).
Tensor div_bcast(const Tensor& a, const Tensor& s);
// Broadcast-add a rank-1 vector to every row of a rank-2 matrix.
Tensor add_rowvec(const Tensor& m, const Tensor& v);

// ---- activations / pointwise ----
Tensor relu(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double slope);
Tensor elu(const Tensor& a, double alpha = 1.0);
Tensor tanh_t(const Tensor& a);
Tensor log_t(const Tensor& a);
Tensor clamp_min(const Tensor& a, double lo);

// ---- shape / indexing ----
Tensor reshape(const Tensor& a, std::vector<int> shape);
Tensor transpose(const Tensor& a);
Tensor concat_cols(const Tensor& a, const Tensor& b);
Tensor concat_vec(const Tensor& a, const Tensor& b);  // rank-1 concat
Tensor slice_cols(const Tensor& a, int start, int len);
Tensor row(const Tensor& a, int r);                    // rank-1 view copy
Tensor stack_rows(const std::vector<Tensor>& rows);    // k rank-1 -> [k,d]
Tensor pick(const Tensor& v, int i);                   // rank-1 -> scalar
Tensor gather_rows(const Tensor& m, const std::vector<int>& idx);
Tensor gather_vec(const Tensor& v, const std::vector<int>& idx);

// ---- reductions ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);

// ---- linear algebra ----
Tensor matmul(const Tensor& a, const Tensor& b);
// x [t,d_in] * w^T [d_in,d_out] + b -> [t,d_out]; w is [d_out,d_in].
Tensor linear(const Tensor& x, const Tensor& w, const Tensor& b);

// ---- softmax family ----
// Row-wise softmax over unmasked key positions; masked positions get
// probability exactly 0. If causal, row i additionally masks keys j > i.
// Throws DegenerateMask if a row has no unmasked position.
Tensor softmax_rows_masked(const Tensor& logits, const std::vector<uint8_t>& key_mask,
                           bool causal = false);
Tensor softmax_vec(const Tensor& logits);
// Softmax over contiguous segments of a rank-1 score vector. seg_offsets has
// n_seg+1 entries; segment s spans [seg_offsets[s], seg_offsets[s+1]).
Tensor segment_softmax(const Tensor& scores, const std::vector<int>& seg_offsets);

// ---- segmented / scaled row ops (graph aggregation) ----
// Multiply row r of m by s[r].
Tensor scale_rows(const Tensor& m, const Tensor& s);
// Sum rows of m into n_seg buckets given per-row segment ids.
Tensor segment_sum_rows(const Tensor& m, const std::vector<int>& seg_of_row, int n_seg);
// Sum of selected entries of a rank-1 vector.
Tensor sum_selected(const Tensor& v, const std::vector<int>& idx);

// ---- normalization / regularization ----
Tensor layer_norm_rows(const Tensor& x, const Tensor& gamma, const Tensor& beta,
                       double eps = 1e-5);
Tensor dropout(const Tensor& x, double p, Rng& rng, bool training);

// Zero out masked rows of a rank-2 tensor (mask[r]==0 -> row r zeroed).
Tensor mask_rows(const Tensor& m, const std::vector<uint8_t>& row_mask);

// Mean of k same-shape tensors.
Tensor mean_of(const std::vector<Tensor>& ts);

}  // namespace gypsum
