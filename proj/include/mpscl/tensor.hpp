#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "mpscl/error.hpp"

namespace mpscl {

using Shape = std::vector<std::int64_t>;

std::int64_t shape_numel(const Shape& s);
std::string shape_str(const Shape& s);

namespace detail {

// One node of the computation tape. Parents keep upstream nodes alive;
// backward_fn pulls this node's gradient into the parents' buffers.
struct TensorImpl {
  Shape shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  bool leaf = true;
  const char* op = "leaf";
  std::vector<std::shared_ptr<TensorImpl>> parents;
  std::function<void(TensorImpl&)> backward_fn;
};

bool grad_enabled();

}  // namespace detail

// Dense 64-bit float tensor with reverse-mode gradient tracking. Handles are
// cheap to copy; copies share the underlying node. The tape for one forward
// pass is the parent DAG reachable from its output tensor: calling backward()
// on a scalar output zero-fills the gradient buffers of that tape, seeds the
// output with 1 and walks the tape once in reverse topological order.
class Tensor {
 public:
  Tensor() = default;

  static Tensor zeros(Shape shape);
  static Tensor full(Shape shape, double value);
  static Tensor scalar(double value);
  static Tensor from_data(Shape shape, std::vector<double> values);
  // Leaf with gradient tracking (a trainable parameter).
  static Tensor param(Shape shape, std::vector<double> values);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::int64_t dim(std::size_t axis) const;
  std::int64_t numel() const;

  const std::vector<double>& data() const;
  // In-place mutation is allowed on leaves only (optimizer updates,
  // checkpoint restore); graph nodes are immutable once produced.
  std::vector<double>& mut_data();
  double item() const;
  double at(std::int64_t flat_index) const;

  bool requires_grad() const;
  bool is_leaf() const;
  const char* op_name() const;
  bool has_grad() const;
  const std::vector<double>& grad() const;
  void zero_grad();

  // Reverse-mode pass from a scalar output.
  void backward() const;

  // Copy of the values, detached from any graph.
  Tensor detach() const;

  // internal: node handle plumbing
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}
  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// RAII guard that disables tape recording (pure evaluation).
struct NoGradGuard {
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool prev_;
};

// ---- elementwise binary ops (numpy-style broadcasting) ----
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor div(const Tensor& a, const Tensor& b);

// ---- scalar variants ----
Tensor add(const Tensor& a, double s);
Tensor mul(const Tensor& a, double s);

// ---- elementwise unary ops ----
Tensor neg(const Tensor& a);
Tensor log(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor cos(const Tensor& a);
Tensor acos(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor leaky_relu(const Tensor& a, double negative_slope);
// NaN inputs propagate; gradient passes only strictly inside (lo, hi).
Tensor clamp(const Tensor& a, double lo, double hi);

// ---- matrix / shape ops ----
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose2d(const Tensor& a);
Tensor reshape(const Tensor& a, Shape shape);
Tensor concat_rows(const std::vector<Tensor>& parts);
Tensor slice_rows(const Tensor& a, std::int64_t begin, std::int64_t end);
Tensor select_rows(const Tensor& a, const std::vector<std::int64_t>& rows);
// Per-row column pick: out[r, 0] = a[r, cols[r]].
Tensor gather_cols(const Tensor& a, const std::vector<std::int64_t>& cols);

// ---- reductions ----
Tensor sum_all(const Tensor& a);
Tensor mean_all(const Tensor& a);
// 2-D only; keeps the reduced axis with size 1.
Tensor sum_axis(const Tensor& a, int axis);

// Row-wise softmax of a 2-D tensor (numerically stable).
Tensor softmax_rows(const Tensor& a);

// ---- spatial ops on [C, H, W] tensors ----
Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::int64_t stride, std::int64_t pad);
Tensor maxpool2x2(const Tensor& x);
Tensor upsample_nearest2x(const Tensor& x);

// Value passthrough with a severed gradient path.
Tensor stop_gradient(const Tensor& a);

// ---- operators ----
inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator/(const Tensor& a, const Tensor& b) { return div(a, b); }
inline Tensor operator+(const Tensor& a, double s) { return add(a, s); }
inline Tensor operator-(const Tensor& a, double s) { return add(a, -s); }
inline Tensor operator*(const Tensor& a, double s) { return mul(a, s); }
inline Tensor operator*(double s, const Tensor& a) { return mul(a, s); }
inline Tensor operator-(const Tensor& a) { return neg(a); }

// Compares the analytic gradient of the scalar function f at x against
// central differences with step h. Returns the max over components of
// |analytic - numeric| / (|analytic| + |numeric| + 1e-12).
double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double h);

}  // namespace mpscl
