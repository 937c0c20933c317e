#include "mpscl/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>
#include <unordered_set>
#include <utility>

namespace mpscl {

namespace detail {

namespace {
thread_local bool t_grad_enabled = true;
}

bool grad_enabled() { return t_grad_enabled; }

}  // namespace detail

NoGradGuard::NoGradGuard() : prev_(detail::t_grad_enabled) {
  detail::t_grad_enabled = false;
}
NoGradGuard::~NoGradGuard() { detail::t_grad_enabled = prev_; }

std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) os << ",";
    os << s[i];
  }
  os << "]";
  return os.str();
}

using detail::TensorImpl;
using Impl = std::shared_ptr<TensorImpl>;

namespace {

Impl make_impl(Shape shape, std::vector<double> data) {
  auto impl = std::make_shared<TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  return impl;
}

void check_defined(const Tensor& t, const char* op) {
  if (!t.defined()) throw ValueError(std::string(op) + ": undefined tensor");
}

// Creates the result node of an operation. The tape records parents and the
// backward closure only while gradients are enabled and at least one parent
// requires them; otherwise the result is a plain constant.
Tensor make_op(const char* op, Shape shape, std::vector<double> data,
               std::vector<Tensor> parents,
               std::function<void(TensorImpl&)> backward_fn) {
  auto impl = make_impl(std::move(shape), std::move(data));
  impl->op = op;
  bool track = detail::grad_enabled();
  if (track) {
    bool any = false;
    for (const auto& p : parents) any = any || p.requires_grad();
    track = any;
  }
  if (track) {
    impl->requires_grad = true;
    impl->leaf = false;
    impl->parents.reserve(parents.size());
    for (auto& p : parents) impl->parents.push_back(p.impl());
    impl->backward_fn = std::move(backward_fn);
  }
  return Tensor(std::move(impl));
}

void accumulate(TensorImpl& parent, std::int64_t offset, double g) {
  if (parent.requires_grad) parent.grad[static_cast<std::size_t>(offset)] += g;
}

// ---- small GEMM kernels, accumulate into C ----

// C[m,n] += A[m,k] * B[k,n]. Four output rows per sweep so each B row is
// loaded once per block instead of once per row.
void gemm_acc(const double* __restrict a, const double* __restrict b,
              double* __restrict c, std::int64_t m, std::int64_t k, std::int64_t n) {
  std::int64_t i = 0;
  for (; i + 4 <= m; i += 4) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* a2 = a1 + k;
    const double* a3 = a2 + k;
    double* c0 = c + i * n;
    double* c1 = c0 + n;
    double* c2 = c1 + n;
    double* c3 = c2 + n;
    for (std::int64_t t = 0; t < k; ++t) {
      const double v0 = a0[t], v1 = a1[t], v2 = a2[t], v3 = a3[t];
      const double* brow = b + t * n;
      for (std::int64_t j = 0; j < n; ++j) {
        c0[j] += v0 * brow[j];
        c1[j] += v1 * brow[j];
        c2[j] += v2 * brow[j];
        c3[j] += v3 * brow[j];
      }
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    for (std::int64_t t = 0; t < k; ++t) {
      const double av = arow[t];
      const double* brow = b + t * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[k,n] += A^T[k,m] * B[m,n]   with A stored as [m,k]. Two reduction rows
// per sweep to halve the C row traffic.
void gemm_at_b_acc(const double* __restrict a, const double* __restrict b,
                   double* __restrict c, std::int64_t m, std::int64_t k, std::int64_t n) {
  std::int64_t i = 0;
  for (; i + 2 <= m; i += 2) {
    const double* a0 = a + i * k;
    const double* a1 = a0 + k;
    const double* b0 = b + i * n;
    const double* b1 = b0 + n;
    for (std::int64_t t = 0; t < k; ++t) {
      const double v0 = a0[t], v1 = a1[t];
      double* crow = c + t * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += v0 * b0[j] + v1 * b1[j];
    }
  }
  for (; i < m; ++i) {
    const double* arow = a + i * k;
    const double* brow = b + i * n;
    for (std::int64_t t = 0; t < k; ++t) {
      const double av = arow[t];
      double* crow = c + t * n;
      for (std::int64_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

// C[m,n] += A[m,k] * B^T[k,n]   with B stored as [n,k]. The j loop is
// unrolled 4-wide so the four dot products run on independent accumulators.
void gemm_a_bt_acc(const double* __restrict a, const double* __restrict b,
                   double* __restrict c, std::int64_t m, std::int64_t k, std::int64_t n) {
  for (std::int64_t i = 0; i < m; ++i) {
    const double* arow = a + i * k;
    double* crow = c + i * n;
    std::int64_t j = 0;
    for (; j + 4 <= n; j += 4) {
      const double* b0 = b + j * k;
      const double* b1 = b0 + k;
      const double* b2 = b1 + k;
      const double* b3 = b2 + k;
      double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
      for (std::int64_t t = 0; t < k; ++t) {
        const double av = arow[t];
        s0 += av * b0[t];
        s1 += av * b1[t];
        s2 += av * b2[t];
        s3 += av * b3[t];
      }
      crow[j] += s0;
      crow[j + 1] += s1;
      crow[j + 2] += s2;
      crow[j + 3] += s3;
    }
    for (; j < n; ++j) {
      const double* brow = b + j * k;
      double acc = 0.0;
      for (std::int64_t t = 0; t < k; ++t) acc += arow[t] * brow[t];
      crow[j] += acc;
    }
  }
}

// ---- broadcasting helpers ----

Shape broadcast_shape(const Shape& a, const Shape& b, const char* op) {
  const std::size_t r = std::max(a.size(), b.size());
  Shape out(r, 1);
  for (std::size_t i = 0; i < r; ++i) {
    const std::int64_t da = i < r - a.size() ? 1 : a[i - (r - a.size())];
    const std::int64_t db = i < r - b.size() ? 1 : b[i - (r - b.size())];
    if (da != db && da != 1 && db != 1) {
      throw ShapeError(std::string(op) + ": shapes " + shape_str(a) + " and " +
                       shape_str(b) + " are not broadcastable");
    }
    out[i] = std::max(da, db);
  }
  return out;
}

// Element strides of `in` aligned to the (right-aligned) broadcast shape
// `out`; 0 on broadcast dimensions.
std::vector<std::int64_t> broadcast_strides(const Shape& in, const Shape& out) {
  std::vector<std::int64_t> strides(out.size(), 0);
  std::int64_t s = 1;
  for (std::size_t i = 0; i < in.size(); ++i) {
    const std::size_t axis = in.size() - 1 - i;
    const std::size_t out_axis = out.size() - 1 - i;
    strides[out_axis] = (in[axis] == 1 && out[out_axis] != 1) ? 0 : s;
    s *= in[axis];
  }
  return strides;
}

// Walks the broadcast index space, invoking visit(out_off, a_off, b_off).
template <typename F>
void broadcast_walk(const Shape& out, const std::vector<std::int64_t>& sa,
                    const std::vector<std::int64_t>& sb, F&& visit) {
  const std::size_t r = out.size();
  if (r == 0) {
    visit(0, 0, 0);
    return;
  }
  std::vector<std::int64_t> idx(r, 0);
  std::int64_t offa = 0, offb = 0;
  const std::int64_t total = shape_numel(out);
  for (std::int64_t lin = 0; lin < total; ++lin) {
    visit(lin, offa, offb);
    std::size_t d = r;
    while (d-- > 0) {
      ++idx[d];
      offa += sa[d];
      offb += sb[d];
      if (idx[d] < out[d]) break;
      offa -= sa[d] * out[d];
      offb -= sb[d] * out[d];
      idx[d] = 0;
    }
  }
}

enum class BinOp { Add, Sub, Mul, Div };

Tensor binary_op(const char* name, BinOp kind, const Tensor& a, const Tensor& b) {
  check_defined(a, name);
  check_defined(b, name);
  const Shape out_shape = broadcast_shape(a.shape(), b.shape(), name);
  const auto sa = broadcast_strides(a.shape(), out_shape);
  const auto sb = broadcast_strides(b.shape(), out_shape);
  std::vector<double> out(static_cast<std::size_t>(shape_numel(out_shape)));
  const auto& da = a.data();
  const auto& db = b.data();
  broadcast_walk(out_shape, sa, sb,
                 [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
                   const double x = da[static_cast<std::size_t>(ia)];
                   const double y = db[static_cast<std::size_t>(ib)];
                   double v = 0.0;
                   switch (kind) {
                     case BinOp::Add: v = x + y; break;
                     case BinOp::Sub: v = x - y; break;
                     case BinOp::Mul: v = x * y; break;
                     case BinOp::Div: v = x / y; break;
                   }
                   out[static_cast<std::size_t>(o)] = v;
                 });
  Shape shape = out_shape;
  auto backward = [kind, out_shape, sa, sb](TensorImpl& self) {
    TensorImpl& pa = *self.parents[0];
    TensorImpl& pb = *self.parents[1];
    broadcast_walk(out_shape, sa, sb,
                   [&](std::int64_t o, std::int64_t ia, std::int64_t ib) {
                     const double g = self.grad[static_cast<std::size_t>(o)];
                     const double x = pa.data[static_cast<std::size_t>(ia)];
                     const double y = pb.data[static_cast<std::size_t>(ib)];
                     switch (kind) {
                       case BinOp::Add:
                         accumulate(pa, ia, g);
                         accumulate(pb, ib, g);
                         break;
                       case BinOp::Sub:
                         accumulate(pa, ia, g);
                         accumulate(pb, ib, -g);
                         break;
                       case BinOp::Mul:
                         accumulate(pa, ia, g * y);
                         accumulate(pb, ib, g * x);
                         break;
                       case BinOp::Div:
                         accumulate(pa, ia, g / y);
                         accumulate(pb, ib, -g * x / (y * y));
                         break;
                     }
                   });
  };
  return make_op(name, std::move(shape), std::move(out), {a, b}, backward);
}

template <typename Fwd, typename Bwd>
Tensor unary_op(const char* name, const Tensor& a, Fwd&& fwd, Bwd&& dfdx) {
  check_defined(a, name);
  const auto& da = a.data();
  std::vector<double> out(da.size());
  for (std::size_t i = 0; i < da.size(); ++i) out[i] = fwd(da[i]);
  auto backward = [dfdx](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) {
      p.grad[i] += self.grad[i] * dfdx(p.data[i], self.data[i]);
    }
  };
  return make_op(name, a.shape(), std::move(out), {a}, backward);
}

}  // namespace

// ---- Tensor basics ----

Tensor Tensor::zeros(Shape shape) {
  auto n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), 0.0)));
}

Tensor Tensor::full(Shape shape, double value) {
  auto n = shape_numel(shape);
  return Tensor(make_impl(std::move(shape), std::vector<double>(static_cast<std::size_t>(n), value)));
}

Tensor Tensor::scalar(double value) { return full({1}, value); }

Tensor Tensor::from_data(Shape shape, std::vector<double> values) {
  if (shape_numel(shape) != static_cast<std::int64_t>(values.size())) {
    throw ShapeError("from_data: shape " + shape_str(shape) + " expects " +
                     std::to_string(shape_numel(shape)) + " values, got " +
                     std::to_string(values.size()));
  }
  return Tensor(make_impl(std::move(shape), std::move(values)));
}

Tensor Tensor::param(Shape shape, std::vector<double> values) {
  Tensor t = from_data(std::move(shape), std::move(values));
  t.impl()->requires_grad = true;
  return t;
}

const Shape& Tensor::shape() const {
  if (!impl_) throw ValueError("shape(): undefined tensor");
  return impl_->shape;
}

std::int64_t Tensor::dim(std::size_t axis) const {
  const auto& s = shape();
  if (axis >= s.size()) {
    throw ShapeError("dim(): axis " + std::to_string(axis) + " out of range for " + shape_str(s));
  }
  return s[axis];
}

std::int64_t Tensor::numel() const { return shape_numel(shape()); }

const std::vector<double>& Tensor::data() const {
  if (!impl_) throw ValueError("data(): undefined tensor");
  return impl_->data;
}

std::vector<double>& Tensor::mut_data() {
  if (!impl_) throw ValueError("mut_data(): undefined tensor");
  if (!impl_->leaf) throw ValueError("mut_data(): only leaf tensors are mutable");
  return impl_->data;
}

double Tensor::item() const {
  if (numel() != 1) {
    throw ShapeError("item(): tensor of shape " + shape_str(shape()) + " is not a scalar");
  }
  return impl_->data[0];
}

double Tensor::at(std::int64_t flat_index) const {
  const auto& d = data();
  if (flat_index < 0 || flat_index >= static_cast<std::int64_t>(d.size())) {
    throw ValueError("at(): index " + std::to_string(flat_index) + " out of range");
  }
  return d[static_cast<std::size_t>(flat_index)];
}

bool Tensor::requires_grad() const { return impl_ && impl_->requires_grad; }
bool Tensor::is_leaf() const { return impl_ && impl_->leaf; }
const char* Tensor::op_name() const { return impl_ ? impl_->op : "undefined"; }
bool Tensor::has_grad() const { return impl_ && impl_->grad.size() == impl_->data.size(); }

const std::vector<double>& Tensor::grad() const {
  if (!has_grad()) {
    throw ValueError("grad(): no gradient buffer; run backward() on a scalar output first");
  }
  return impl_->grad;
}

void Tensor::zero_grad() {
  if (!impl_) return;
  impl_->grad.assign(impl_->data.size(), 0.0);
}

void Tensor::backward() const {
  if (!impl_) throw ValueError("backward(): undefined tensor");
  if (numel() != 1) {
    throw ShapeError("backward(): output must be a scalar, got shape " + shape_str(shape()));
  }
  if (!impl_->requires_grad) {
    throw ValueError("backward(): tensor is not attached to a computation graph; "
                     "run a forward pass with gradient tracking first");
  }
  // Iterative post-order DFS over requires_grad nodes.
  std::vector<TensorImpl*> order;
  std::unordered_set<TensorImpl*> visited;
  struct Frame {
    TensorImpl* node;
    std::size_t next_parent;
  };
  std::vector<Frame> stack;
  stack.push_back({impl_.get(), 0});
  visited.insert(impl_.get());
  while (!stack.empty()) {
    Frame& f = stack.back();
    if (f.next_parent < f.node->parents.size()) {
      TensorImpl* p = f.node->parents[f.next_parent++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(f.node);
      stack.pop_back();
    }
  }
  for (TensorImpl* n : order) n->grad.assign(n->data.size(), 0.0);
  impl_->grad[0] = 1.0;
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    TensorImpl* n = *it;
    if (n->backward_fn) n->backward_fn(*n);
  }
}

Tensor Tensor::detach() const {
  check_defined(*this, "detach");
  return Tensor(make_impl(impl_->shape, impl_->data));
}

// ---- binary ops ----

Tensor add(const Tensor& a, const Tensor& b) { return binary_op("add", BinOp::Add, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary_op("sub", BinOp::Sub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary_op("mul", BinOp::Mul, a, b); }
Tensor div(const Tensor& a, const Tensor& b) { return binary_op("div", BinOp::Div, a, b); }

Tensor add(const Tensor& a, double s) {
  return unary_op("add_scalar", a, [s](double x) { return x + s; },
                  [](double, double) { return 1.0; });
}

Tensor mul(const Tensor& a, double s) {
  return unary_op("mul_scalar", a, [s](double x) { return x * s; },
                  [s](double, double) { return s; });
}

// ---- unary ops ----

Tensor neg(const Tensor& a) {
  return unary_op("neg", a, [](double x) { return -x; },
                  [](double, double) { return -1.0; });
}

Tensor log(const Tensor& a) {
  return unary_op("log", a, [](double x) { return std::log(x); },
                  [](double x, double) { return 1.0 / x; });
}

Tensor exp(const Tensor& a) {
  return unary_op("exp", a, [](double x) { return std::exp(x); },
                  [](double, double y) { return y; });
}

Tensor sqrt(const Tensor& a) {
  return unary_op("sqrt", a, [](double x) { return std::sqrt(x); },
                  [](double, double y) { return 0.5 / y; });
}

Tensor cos(const Tensor& a) {
  return unary_op("cos", a, [](double x) { return std::cos(x); },
                  [](double x, double) { return -std::sin(x); });
}

Tensor acos(const Tensor& a) {
  return unary_op("acos", a, [](double x) { return std::acos(x); },
                  [](double x, double) { return -1.0 / std::sqrt(1.0 - x * x); });
}

Tensor sigmoid(const Tensor& a) {
  return unary_op("sigmoid", a,
                  [](double x) { return 1.0 / (1.0 + std::exp(-x)); },
                  [](double, double y) { return y * (1.0 - y); });
}

Tensor leaky_relu(const Tensor& a, double negative_slope) {
  return unary_op("leaky_relu", a,
                  [negative_slope](double x) { return x > 0.0 ? x : negative_slope * x; },
                  [negative_slope](double x, double) { return x > 0.0 ? 1.0 : negative_slope; });
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo <= hi)) {
    throw ValueError("clamp: lo " + std::to_string(lo) + " exceeds hi " + std::to_string(hi));
  }
  return unary_op("clamp", a,
                  [lo, hi](double x) {
                    if (std::isnan(x)) return x;
                    return std::min(hi, std::max(lo, x));
                  },
                  [lo, hi](double x, double) { return (x > lo && x < hi) ? 1.0 : 0.0; });
}

// ---- matrix / shape ops ----

Tensor matmul(const Tensor& a, const Tensor& b) {
  check_defined(a, "matmul");
  check_defined(b, "matmul");
  if (a.rank() != 2 || b.rank() != 2) {
    throw ShapeError("matmul: expects 2-D tensors, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  }
  const std::int64_t m = a.dim(0), k = a.dim(1), k2 = b.dim(0), n = b.dim(1);
  if (k != k2) {
    throw ShapeError("matmul: inner dimensions differ: " + shape_str(a.shape()) +
                     " x " + shape_str(b.shape()));
  }
  std::vector<double> out(static_cast<std::size_t>(m * n), 0.0);
  gemm_acc(a.data().data(), b.data().data(), out.data(), m, k, n);
  auto backward = [m, k, n](TensorImpl& self) {
    TensorImpl& pa = *self.parents[0];
    TensorImpl& pb = *self.parents[1];
    if (pa.requires_grad) {
      // dA[m,k] += G[m,n] * B^T
      gemm_a_bt_acc(self.grad.data(), pb.data.data(), pa.grad.data(), m, n, k);
    }
    if (pb.requires_grad) {
      // dB[k,n] += A^T * G[m,n]
      gemm_at_b_acc(pa.data.data(), self.grad.data(), pb.grad.data(), m, k, n);
    }
  };
  return make_op("matmul", {m, n}, std::move(out), {a, b}, backward);
}

Tensor transpose2d(const Tensor& a) {
  check_defined(a, "transpose2d");
  if (a.rank() != 2) {
    throw ShapeError("transpose2d: expects a 2-D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t m = a.dim(0), n = a.dim(1);
  std::vector<double> out(static_cast<std::size_t>(m * n));
  const auto& d = a.data();
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j)
      out[static_cast<std::size_t>(j * m + i)] = d[static_cast<std::size_t>(i * n + j)];
  auto backward = [m, n](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < n; ++j)
        p.grad[static_cast<std::size_t>(i * n + j)] +=
            self.grad[static_cast<std::size_t>(j * m + i)];
  };
  return make_op("transpose2d", {n, m}, std::move(out), {a}, backward);
}

Tensor reshape(const Tensor& a, Shape shape) {
  check_defined(a, "reshape");
  if (shape_numel(shape) != a.numel()) {
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " + shape_str(shape));
  }
  auto backward = [](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[i] += self.grad[i];
  };
  return make_op("reshape", std::move(shape), a.data(), {a}, backward);
}

Tensor concat_rows(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw ValueError("concat_rows: no tensors given");
  std::int64_t cols = -1, rows = 0;
  for (const auto& t : parts) {
    check_defined(t, "concat_rows");
    if (t.rank() != 2) {
      throw ShapeError("concat_rows: expects 2-D tensors, got " + shape_str(t.shape()));
    }
    if (cols < 0) cols = t.dim(1);
    if (t.dim(1) != cols) {
      throw ShapeError("concat_rows: column mismatch: expected " + std::to_string(cols) +
                       ", got " + shape_str(t.shape()));
    }
    rows += t.dim(0);
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(rows * cols));
  std::vector<std::int64_t> row_offsets;
  std::int64_t off = 0;
  for (const auto& t : parts) {
    row_offsets.push_back(off);
    out.insert(out.end(), t.data().begin(), t.data().end());
    off += t.dim(0);
  }
  auto backward = [row_offsets, cols](TensorImpl& self) {
    for (std::size_t pi = 0; pi < self.parents.size(); ++pi) {
      TensorImpl& p = *self.parents[pi];
      if (!p.requires_grad) continue;
      const std::size_t base = static_cast<std::size_t>(row_offsets[pi] * cols);
      for (std::size_t i = 0; i < p.data.size(); ++i) p.grad[i] += self.grad[base + i];
    }
  };
  return make_op("concat_rows", {rows, cols}, std::move(out), parts, backward);
}

Tensor slice_rows(const Tensor& a, std::int64_t begin, std::int64_t end) {
  check_defined(a, "slice_rows");
  if (a.rank() != 2) {
    throw ShapeError("slice_rows: expects a 2-D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t rows = a.dim(0), cols = a.dim(1);
  if (begin < 0 || end > rows || begin > end) {
    throw ValueError("slice_rows: range [" + std::to_string(begin) + "," +
                     std::to_string(end) + ") invalid for " + shape_str(a.shape()));
  }
  const auto& d = a.data();
  std::vector<double> out(d.begin() + begin * cols, d.begin() + end * cols);
  auto backward = [begin, cols](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    const std::size_t base = static_cast<std::size_t>(begin * cols);
    for (std::size_t i = 0; i < self.grad.size(); ++i) p.grad[base + i] += self.grad[i];
  };
  return make_op("slice_rows", {end - begin, cols}, std::move(out), {a}, backward);
}

Tensor select_rows(const Tensor& a, const std::vector<std::int64_t>& rows) {
  check_defined(a, "select_rows");
  if (a.rank() != 2) {
    throw ShapeError("select_rows: expects a 2-D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t nrows = a.dim(0), cols = a.dim(1);
  for (auto r : rows) {
    if (r < 0 || r >= nrows) {
      throw ValueError("select_rows: row " + std::to_string(r) + " out of range for " +
                       shape_str(a.shape()));
    }
  }
  std::vector<double> out(rows.size() * static_cast<std::size_t>(cols));
  const auto& d = a.data();
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::memcpy(out.data() + i * static_cast<std::size_t>(cols),
                d.data() + static_cast<std::size_t>(rows[i] * cols),
                sizeof(double) * static_cast<std::size_t>(cols));
  }
  auto idx = rows;
  auto backward = [idx, cols](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < idx.size(); ++i) {
      const std::size_t src = i * static_cast<std::size_t>(cols);
      const std::size_t dst = static_cast<std::size_t>(idx[i] * cols);
      for (std::int64_t j = 0; j < cols; ++j) p.grad[dst + j] += self.grad[src + j];
    }
  };
  return make_op("select_rows", {static_cast<std::int64_t>(rows.size()), cols},
                 std::move(out), {a}, backward);
}

Tensor gather_cols(const Tensor& a, const std::vector<std::int64_t>& cols) {
  check_defined(a, "gather_cols");
  if (a.rank() != 2) {
    throw ShapeError("gather_cols: expects a 2-D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t rows = a.dim(0), ncols = a.dim(1);
  if (static_cast<std::int64_t>(cols.size()) != rows) {
    throw ShapeError("gather_cols: need one column index per row (" + std::to_string(rows) +
                     "), got " + std::to_string(cols.size()));
  }
  for (auto c : cols) {
    if (c < 0 || c >= ncols) {
      throw ValueError("gather_cols: column " + std::to_string(c) + " out of range for " +
                       shape_str(a.shape()));
    }
  }
  std::vector<double> out(static_cast<std::size_t>(rows));
  const auto& d = a.data();
  for (std::int64_t r = 0; r < rows; ++r) {
    out[static_cast<std::size_t>(r)] = d[static_cast<std::size_t>(r * ncols + cols[r])];
  }
  auto idx = cols;
  auto backward = [idx, ncols](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t r = 0; r < idx.size(); ++r) {
      p.grad[r * static_cast<std::size_t>(ncols) + static_cast<std::size_t>(idx[r])] +=
          self.grad[r];
    }
  };
  return make_op("gather_cols", {rows, 1}, std::move(out), {a}, backward);
}

// ---- reductions ----

Tensor sum_all(const Tensor& a) {
  check_defined(a, "sum_all");
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  auto backward = [](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double g = self.grad[0];
    for (auto& pg : p.grad) pg += g;
  };
  return make_op("sum_all", {1}, {acc}, {a}, backward);
}

Tensor mean_all(const Tensor& a) {
  check_defined(a, "mean_all");
  if (a.numel() == 0) throw ValueError("mean_all: empty tensor");
  const double inv = 1.0 / static_cast<double>(a.numel());
  double acc = 0.0;
  for (double v : a.data()) acc += v;
  auto backward = [inv](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    const double g = self.grad[0] * inv;
    for (auto& pg : p.grad) pg += g;
  };
  return make_op("mean_all", {1}, {acc * inv}, {a}, backward);
}

Tensor sum_axis(const Tensor& a, int axis) {
  check_defined(a, "sum_axis");
  if (a.rank() != 2) {
    throw ShapeError("sum_axis: expects a 2-D tensor, got " + shape_str(a.shape()));
  }
  if (axis != 0 && axis != 1) throw ValueError("sum_axis: axis must be 0 or 1");
  const std::int64_t rows = a.dim(0), cols = a.dim(1);
  const auto& d = a.data();
  if (axis == 0) {
    std::vector<double> out(static_cast<std::size_t>(cols), 0.0);
    for (std::int64_t r = 0; r < rows; ++r)
      for (std::int64_t c = 0; c < cols; ++c)
        out[static_cast<std::size_t>(c)] += d[static_cast<std::size_t>(r * cols + c)];
    auto backward = [rows, cols](TensorImpl& self) {
      TensorImpl& p = *self.parents[0];
      if (!p.requires_grad) return;
      for (std::int64_t r = 0; r < rows; ++r)
        for (std::int64_t c = 0; c < cols; ++c)
          p.grad[static_cast<std::size_t>(r * cols + c)] += self.grad[static_cast<std::size_t>(c)];
    };
    return make_op("sum_axis0", {1, cols}, std::move(out), {a}, backward);
  }
  std::vector<double> out(static_cast<std::size_t>(rows), 0.0);
  for (std::int64_t r = 0; r < rows; ++r) {
    double acc = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) acc += d[static_cast<std::size_t>(r * cols + c)];
    out[static_cast<std::size_t>(r)] = acc;
  }
  auto backward = [rows, cols](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double g = self.grad[static_cast<std::size_t>(r)];
      for (std::int64_t c = 0; c < cols; ++c)
        p.grad[static_cast<std::size_t>(r * cols + c)] += g;
    }
  };
  return make_op("sum_axis1", {rows, 1}, std::move(out), {a}, backward);
}

Tensor softmax_rows(const Tensor& a) {
  check_defined(a, "softmax_rows");
  if (a.rank() != 2) {
    throw ShapeError("softmax_rows: expects a 2-D tensor, got " + shape_str(a.shape()));
  }
  const std::int64_t rows = a.dim(0), cols = a.dim(1);
  const auto& d = a.data();
  std::vector<double> out(d.size());
  for (std::int64_t r = 0; r < rows; ++r) {
    const double* x = d.data() + r * cols;
    double* y = out.data() + r * cols;
    double mx = x[0];
    for (std::int64_t c = 1; c < cols; ++c) mx = std::max(mx, x[c]);
    double z = 0.0;
    for (std::int64_t c = 0; c < cols; ++c) {
      y[c] = std::exp(x[c] - mx);
      z += y[c];
    }
    const double inv = 1.0 / z;
    for (std::int64_t c = 0; c < cols; ++c) y[c] *= inv;
  }
  auto backward = [rows, cols](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::int64_t r = 0; r < rows; ++r) {
      const double* y = self.data.data() + r * cols;
      const double* g = self.grad.data() + r * cols;
      double dot = 0.0;
      for (std::int64_t c = 0; c < cols; ++c) dot += g[c] * y[c];
      double* pg = p.grad.data() + r * cols;
      for (std::int64_t c = 0; c < cols; ++c) pg[c] += y[c] * (g[c] - dot);
    }
  };
  return make_op("softmax_rows", a.shape(), std::move(out), {a}, backward);
}

// ---- spatial ops ----

namespace {

// col has layout [cin*kh*kw, ho*wo]; row index is (ci*kh + r)*kw + s.
void im2col(const double* x, std::int64_t cin, std::int64_t h, std::int64_t w,
            std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad,
            std::int64_t ho, std::int64_t wo, double* col) {
  const std::int64_t hw = ho * wo;
  for (std::int64_t ci = 0; ci < cin; ++ci) {
    for (std::int64_t r = 0; r < kh; ++r) {
      for (std::int64_t s = 0; s < kw; ++s) {
        double* dst = col + ((ci * kh + r) * kw + s) * hw;
        for (std::int64_t oh = 0; oh < ho; ++oh) {
          const std::int64_t ih = oh * stride - pad + r;
          for (std::int64_t ow = 0; ow < wo; ++ow) {
            const std::int64_t iw = ow * stride - pad + s;
            dst[oh * wo + ow] =
                (ih >= 0 && ih < h && iw >= 0 && iw < w)
                    ? x[(ci * h + ih) * w + iw]
                    : 0.0;
          }
        }
      }
    }
  }
}

void col2im_acc(const double* col, std::int64_t cin, std::int64_t h, std::int64_t w,
                std::int64_t kh, std::int64_t kw, std::int64_t stride, std::int64_t pad,
                std::int64_t ho, std::int64_t wo, double* dx) {
  const std::int64_t hw = ho * wo;
  for (std::int64_t ci = 0; ci < cin; ++ci) {
    for (std::int64_t r = 0; r < kh; ++r) {
      for (std::int64_t s = 0; s < kw; ++s) {
        const double* src = col + ((ci * kh + r) * kw + s) * hw;
        for (std::int64_t oh = 0; oh < ho; ++oh) {
          const std::int64_t ih = oh * stride - pad + r;
          if (ih < 0 || ih >= h) continue;
          for (std::int64_t ow = 0; ow < wo; ++ow) {
            const std::int64_t iw = ow * stride - pad + s;
            if (iw < 0 || iw >= w) continue;
            dx[(ci * h + ih) * w + iw] += src[oh * wo + ow];
          }
        }
      }
    }
  }
}

}  // namespace

Tensor conv2d(const Tensor& x, const Tensor& w, const Tensor& b,
              std::int64_t stride, std::int64_t pad) {
  check_defined(x, "conv2d");
  check_defined(w, "conv2d");
  check_defined(b, "conv2d");
  if (x.rank() != 3) {
    throw ShapeError("conv2d: input expects [C,H,W], got " + shape_str(x.shape()));
  }
  if (w.rank() != 4) {
    throw ShapeError("conv2d: weight expects [Cout,Cin,kh,kw], got " + shape_str(w.shape()));
  }
  const std::int64_t cin = x.dim(0), h = x.dim(1), wdt = x.dim(2);
  const std::int64_t cout = w.dim(0), kh = w.dim(2), kw = w.dim(3);
  if (w.dim(1) != cin) {
    throw ShapeError("conv2d: weight expects " + std::to_string(w.dim(1)) +
                     " input channels, input has " + std::to_string(cin) +
                     " (input " + shape_str(x.shape()) + ", weight " + shape_str(w.shape()) + ")");
  }
  if (b.rank() != 1 || b.dim(0) != cout) {
    throw ShapeError("conv2d: bias expects [" + std::to_string(cout) + "], got " +
                     shape_str(b.shape()));
  }
  if (stride < 1 || pad < 0) throw ValueError("conv2d: stride must be >= 1 and pad >= 0");
  const std::int64_t ho = (h + 2 * pad - kh) / stride + 1;
  const std::int64_t wo = (wdt + 2 * pad - kw) / stride + 1;
  if (ho < 1 || wo < 1) {
    throw ShapeError("conv2d: kernel " + shape_str(w.shape()) + " does not fit input " +
                     shape_str(x.shape()));
  }
  const std::int64_t k = cin * kh * kw;
  const std::int64_t hw = ho * wo;
  std::vector<double> col(static_cast<std::size_t>(k * hw));
  im2col(x.data().data(), cin, h, wdt, kh, kw, stride, pad, ho, wo, col.data());
  std::vector<double> out(static_cast<std::size_t>(cout * hw), 0.0);
  gemm_acc(w.data().data(), col.data(), out.data(), cout, k, hw);
  const auto& bias = b.data();
  for (std::int64_t co = 0; co < cout; ++co) {
    double* row = out.data() + co * hw;
    const double bv = bias[static_cast<std::size_t>(co)];
    for (std::int64_t i = 0; i < hw; ++i) row[i] += bv;
  }
  // The column matrix is rebuilt in backward from the saved input; keeping it
  // alive for every node of a batch costs more memory than the rebuild costs time.
  auto backward = [cin, h, wdt, kh, kw, stride, pad, ho, wo, cout, k, hw](TensorImpl& self) {
    TensorImpl& px = *self.parents[0];
    TensorImpl& pw = *self.parents[1];
    TensorImpl& pb = *self.parents[2];
    if (pb.requires_grad) {
      for (std::int64_t co = 0; co < cout; ++co) {
        const double* g = self.grad.data() + co * hw;
        double acc = 0.0;
        for (std::int64_t i = 0; i < hw; ++i) acc += g[i];
        pb.grad[static_cast<std::size_t>(co)] += acc;
      }
    }
    std::vector<double> col(static_cast<std::size_t>(k * hw));
    if (pw.requires_grad || px.requires_grad) {
      im2col(px.data.data(), cin, h, wdt, kh, kw, stride, pad, ho, wo, col.data());
    }
    if (pw.requires_grad) {
      // dW[cout,k] += G[cout,hw] * col^T
      gemm_a_bt_acc(self.grad.data(), col.data(), pw.grad.data(), cout, hw, k);
    }
    if (px.requires_grad) {
      std::vector<double> dcol(static_cast<std::size_t>(k * hw), 0.0);
      // dcol[k,hw] += W^T * G
      gemm_at_b_acc(pw.data.data(), self.grad.data(), dcol.data(), cout, k, hw);
      col2im_acc(dcol.data(), cin, h, wdt, kh, kw, stride, pad, ho, wo, px.grad.data());
    }
  };
  return make_op("conv2d", {cout, ho, wo}, std::move(out), {x, w, b}, backward);
}

Tensor maxpool2x2(const Tensor& x) {
  check_defined(x, "maxpool2x2");
  if (x.rank() != 3) {
    throw ShapeError("maxpool2x2: input expects [C,H,W], got " + shape_str(x.shape()));
  }
  const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  if (h % 2 != 0 || w % 2 != 0) {
    throw ShapeError("maxpool2x2: H and W must be even, got " + shape_str(x.shape()));
  }
  const std::int64_t ho = h / 2, wo = w / 2;
  std::vector<double> out(static_cast<std::size_t>(c * ho * wo));
  std::vector<std::int64_t> argmax(out.size());
  const auto& d = x.data();
  for (std::int64_t ci = 0; ci < c; ++ci) {
    for (std::int64_t oh = 0; oh < ho; ++oh) {
      for (std::int64_t ow = 0; ow < wo; ++ow) {
        std::int64_t best = (ci * h + 2 * oh) * w + 2 * ow;
        double bv = d[static_cast<std::size_t>(best)];
        const std::int64_t cands[3] = {(ci * h + 2 * oh) * w + 2 * ow + 1,
                                       (ci * h + 2 * oh + 1) * w + 2 * ow,
                                       (ci * h + 2 * oh + 1) * w + 2 * ow + 1};
        for (std::int64_t idx : cands) {
          const double v = d[static_cast<std::size_t>(idx)];
          if (v > bv) {
            bv = v;
            best = idx;
          }
        }
        const std::size_t o = static_cast<std::size_t>((ci * ho + oh) * wo + ow);
        out[o] = bv;
        argmax[o] = best;
      }
    }
  }
  auto backward = [argmax](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::size_t i = 0; i < argmax.size(); ++i)
      p.grad[static_cast<std::size_t>(argmax[i])] += self.grad[i];
  };
  return make_op("maxpool2x2", {c, ho, wo}, std::move(out), {x}, backward);
}

Tensor upsample_nearest2x(const Tensor& x) {
  check_defined(x, "upsample_nearest2x");
  if (x.rank() != 3) {
    throw ShapeError("upsample_nearest2x: input expects [C,H,W], got " + shape_str(x.shape()));
  }
  const std::int64_t c = x.dim(0), h = x.dim(1), w = x.dim(2);
  const std::int64_t ho = 2 * h, wo = 2 * w;
  std::vector<double> out(static_cast<std::size_t>(c * ho * wo));
  const auto& d = x.data();
  for (std::int64_t ci = 0; ci < c; ++ci)
    for (std::int64_t oh = 0; oh < ho; ++oh)
      for (std::int64_t ow = 0; ow < wo; ++ow)
        out[static_cast<std::size_t>((ci * ho + oh) * wo + ow)] =
            d[static_cast<std::size_t>((ci * h + oh / 2) * w + ow / 2)];
  auto backward = [c, h, w, ho, wo](TensorImpl& self) {
    TensorImpl& p = *self.parents[0];
    if (!p.requires_grad) return;
    for (std::int64_t ci = 0; ci < c; ++ci)
      for (std::int64_t oh = 0; oh < ho; ++oh)
        for (std::int64_t ow = 0; ow < wo; ++ow)
          p.grad[static_cast<std::size_t>((ci * h + oh / 2) * w + ow / 2)] +=
              self.grad[static_cast<std::size_t>((ci * ho + oh) * wo + ow)];
  };
  return make_op("upsample_nearest2x", {c, ho, wo}, std::move(out), {x}, backward);
}

Tensor stop_gradient(const Tensor& a) { return a.detach(); }

// ---- finite differences ----

double finite_diff_check(const std::function<Tensor(const Tensor&)>& f,
                         const Tensor& x, double h) {
  check_defined(x, "finite_diff_check");
  if (h < 1e-7 || h > 1e-3) {
    throw ValueError("finite_diff_check: step h must lie in [1e-7, 1e-3], got " +
                     std::to_string(h));
  }
  Tensor xg = Tensor::param(x.shape(), x.data());
  Tensor y = f(xg);
  if (y.numel() != 1) {
    throw ShapeError("finite_diff_check: f must return a scalar, got shape " +
                     shape_str(y.shape()));
  }
  if (!y.requires_grad()) {
    // f does not depend on x; analytic and numeric gradients are both zero.
    std::vector<double> zero(x.data().size(), 0.0);
    return 0.0;
  }
  y.backward();
  const std::vector<double> analytic = xg.grad();

  NoGradGuard no_grad;
  std::vector<double> base = x.data();
  double max_rel = 0.0;
  for (std::size_t i = 0; i < base.size(); ++i) {
    std::vector<double> plus = base, minus = base;
    plus[i] += h;
    minus[i] -= h;
    const double fp = f(Tensor::from_data(x.shape(), std::move(plus))).item();
    const double fm = f(Tensor::from_data(x.shape(), std::move(minus))).item();
    const double numeric = (fp - fm) / (2.0 * h);
    const double a = analytic[i];
    if (std::isnan(a) || std::isnan(numeric)) {
      throw NumericalError("finite_diff_check: NaN gradient at component " + std::to_string(i));
    }
    const double rel = std::abs(a - numeric) / (std::abs(a) + std::abs(numeric) + 1e-12);
    max_rel = std::max(max_rel, rel);
  }
  return max_rel;
}

}  // namespace mpscl
