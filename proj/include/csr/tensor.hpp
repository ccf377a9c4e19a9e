#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <limits>
#include <memory>
#include <numeric>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "csr/errors.hpp"
#include "csr/rng.hpp"

namespace csr {

using Shape = std::vector<std::int64_t>;

inline std::int64_t shape_numel(const Shape& s) {
  std::int64_t n = 1;
  for (auto d : s) n *= d;
  return n;
}

inline std::string shape_str(const Shape& s) {
  std::ostringstream os;
  os << "[";
  for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "," : "") << s[i];
  os << "]";
  return os.str();
}

// When set, the leaky_relu backward rule is deliberately corrupted. Negative
// control for the gradient-check harness; never enable outside of it.
inline bool& gradcheck_fault_injection() {
  static bool flag = false;
  return flag;
}

template <typename T>
struct TensorData {
  Shape shape;
  std::vector<T> values;
  bool requires_grad = false;
  std::vector<T> grad;  // empty until first accumulation
};

/// Dense n-dimensional array with optional gradient tracking. Value-semantic
/// handle over shared storage: copies alias the same data, so an op's backward
/// closure can capture its operands cheaply.
template <typename T>
class Tensor {
 public:
  using Scalar = T;

  Tensor() : d_(std::make_shared<TensorData<T>>()) {}

  static Tensor zeros(Shape shape) {
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->values.assign(static_cast<std::size_t>(shape_numel(t.d_->shape)), T(0));
    return t;
  }

  static Tensor full(Shape shape, T v) {
    Tensor t = zeros(std::move(shape));
    for (auto& x : t.d_->values) x = v;
    return t;
  }

  static Tensor scalar(T v) { return full({}, v); }

  static Tensor from_vector(Shape shape, std::vector<T> values) {
    if (shape_numel(shape) != static_cast<std::int64_t>(values.size()))
      throw ShapeError("from_vector: shape " + shape_str(shape) + " needs " +
                       std::to_string(shape_numel(shape)) + " values, got " +
                       std::to_string(values.size()));
    Tensor t;
    t.d_->shape = std::move(shape);
    t.d_->values = std::move(values);
    return t;
  }

  const Shape& shape() const { return d_->shape; }
  int rank() const { return static_cast<int>(d_->shape.size()); }
  std::int64_t dim(int i) const { return d_->shape.at(static_cast<std::size_t>(i)); }
  std::int64_t numel() const { return static_cast<std::int64_t>(d_->values.size()); }

  std::span<T> data() { return d_->values; }
  std::span<const T> data() const { return d_->values; }
  T& operator[](std::int64_t i) { return d_->values[static_cast<std::size_t>(i)]; }
  T operator[](std::int64_t i) const { return d_->values[static_cast<std::size_t>(i)]; }

  T item() const {
    if (numel() != 1)
      throw ShapeError("item: tensor " + shape_str(shape()) + " is not a scalar");
    return d_->values[0];
  }

  bool requires_grad() const { return d_->requires_grad; }
  Tensor& set_requires_grad(bool v) {
    d_->requires_grad = v;
    return *this;
  }

  bool has_grad() const { return !d_->grad.empty(); }
  /// Allocates (zeroed) gradient storage if absent.
  std::vector<T>& ensure_grad() {
    if (d_->grad.empty()) d_->grad.assign(d_->values.size(), T(0));
    return d_->grad;
  }
  std::span<const T> grad() const { return d_->grad; }
  std::span<T> grad_mut() { return d_->grad; }
  void zero_grad() {
    for (auto& g : d_->grad) g = T(0);
  }

  /// Copy of the values with no autograd connection to this tensor.
  Tensor detach() const {
    Tensor t;
    t.d_->shape = d_->shape;
    t.d_->values = d_->values;
    return t;
  }

  bool same_storage(const Tensor& o) const { return d_ == o.d_; }

 private:
  std::shared_ptr<TensorData<T>> d_;
};

template <typename T>
Tensor<T> randn(Shape shape, Rng& rng) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.next_normal());
  return t;
}

template <typename T>
Tensor<T> rand_uniform(Shape shape, Rng& rng, double lo = 0.0, double hi = 1.0) {
  Tensor<T> t = Tensor<T>::zeros(std::move(shape));
  for (auto& v : t.data()) v = static_cast<T>(rng.next_uniform(lo, hi));
  return t;
}

/// Ordered record of executed operations. Ops append a backward closure while
/// a tape is active (see Scope); backward() replays the closures in reverse,
/// which visits every record exactly once and accumulates gradients additively
/// across fan-out. Single-writer: one tape per training step, no sharing of a
/// live tape across threads.
template <typename T>
class Tape {
 public:
  class Scope {
   public:
    explicit Scope(Tape& t) : prev_(slot()) { slot() = &t; }
    ~Scope() { slot() = prev_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* prev_;
  };

  static Tape* current() { return slot(); }

  void record(std::function<void()> backward_fn) {
    nodes_.push_back(std::move(backward_fn));
  }

  std::size_t size() const { return nodes_.size(); }
  void clear() { nodes_.clear(); }

  void backward(Tensor<T> loss) {
    if (loss.numel() != 1)
      throw ShapeError("backward: loss must be scalar, got " + shape_str(loss.shape()));
    if (nodes_.empty()) throw ValueError("backward: tape is empty");
    loss.ensure_grad()[0] += T(1);
    for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it) (*it)();
  }

 private:
  static Tape*& slot() {
    thread_local Tape* current = nullptr;
    return current;
  }

  std::vector<std::function<void()>> nodes_;
};

namespace detail {

template <typename T>
bool tracing(std::initializer_list<const Tensor<T>*> inputs) {
  if (Tape<T>::current() == nullptr) return false;
  for (const auto* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

template <typename T>
void record(Tensor<T>& out, std::function<void()> fn) {
  out.set_requires_grad(true);
  Tape<T>::current()->record(std::move(fn));
}

inline void check_same_shape(const Shape& a, const Shape& b, const char* op) {
  if (a != b)
    throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(a) + " vs " +
                     shape_str(b));
}

inline std::vector<std::int64_t> row_major_strides(const Shape& s) {
  std::vector<std::int64_t> st(s.size(), 1);
  for (int i = static_cast<int>(s.size()) - 2; i >= 0; --i)
    st[static_cast<std::size_t>(i)] =
        st[static_cast<std::size_t>(i) + 1] * s[static_cast<std::size_t>(i) + 1];
  return st;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Elementwise ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "add");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  if (detail::tracing<T>({&a, &b})) {
    detail::record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.ensure_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += og[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> sub(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "sub");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] - b[i];
  if (detail::tracing<T>({&a, &b})) {
    detail::record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i];
      }
      if (b.requires_grad()) {
        auto& gb = b.ensure_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= og[i];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  detail::check_same_shape(a.shape(), b.shape(), "mul");
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] * b[i];
  if (detail::tracing<T>({&a, &b})) {
    detail::record(out, [a, b, out]() mutable {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.ensure_grad();
        for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i] * b[static_cast<std::int64_t>(i)];
      }
      if (b.requires_grad()) {
        auto& gb = b.ensure_grad();
        for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += og[i] * a[static_cast<std::int64_t>(i)];
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> scale(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = c * a[i];
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out, c]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += c * og[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> neg(const Tensor<T>& a) {
  return scale(a, T(-1));
}

template <typename T>
Tensor<T> add_scalar(const Tensor<T>& a, T c) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] + c;
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> exp(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::exp(a[i]);
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i] * out[static_cast<std::int64_t>(i)];
    });
  }
  return out;
}

template <typename T>
Tensor<T> log(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::log(a[i]);
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i] / a[static_cast<std::int64_t>(i)];
    });
  }
  return out;
}

/// Elementwise absolute value; subgradient at 0 is 0.
template <typename T>
Tensor<T> abs(const Tensor<T>& a) {
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = std::abs(a[i]);
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) {
        const T x = a[static_cast<std::int64_t>(i)];
        ga[i] += og[i] * (x > T(0) ? T(1) : (x < T(0) ? T(-1) : T(0)));
      }
    });
  }
  return out;
}

/// max(x, slope*x); the subgradient at 0 is defined as `slope`.
template <typename T>
Tensor<T> leaky_relu(const Tensor<T>& a, double negative_slope) {
  if (negative_slope < 0.0 || negative_slope >= 1.0)
    throw ValueError("leaky_relu: negative_slope must be in [0,1), got " +
                     std::to_string(negative_slope));
  const T slope = static_cast<T>(negative_slope);
  Tensor<T> out = Tensor<T>::zeros(a.shape());
  for (std::int64_t i = 0; i < a.numel(); ++i) out[i] = a[i] > T(0) ? a[i] : slope * a[i];
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out, slope]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      const T s = gradcheck_fault_injection() ? slope + T(0.25) : slope;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] += og[i] * (a[static_cast<std::int64_t>(i)] > T(0) ? T(1) : s);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Shape ops
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> reshape(const Tensor<T>& a, Shape new_shape) {
  if (shape_numel(new_shape) != a.numel())
    throw ShapeError("reshape: cannot view " + shape_str(a.shape()) + " as " +
                     shape_str(new_shape));
  Tensor<T> out = Tensor<T>::from_vector(std::move(new_shape),
                                         std::vector<T>(a.data().begin(), a.data().end()));
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += og[i];
    });
  }
  return out;
}

template <typename T>
Tensor<T> transpose2d(const Tensor<T>& a) {
  if (a.rank() != 2)
    throw ShapeError("transpose2d: expected rank-2 tensor, got " + shape_str(a.shape()));
  const std::int64_t m = a.dim(0), n = a.dim(1);
  Tensor<T> out = Tensor<T>::zeros({n, m});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[j * m + i] = a[i * n + j];
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out, m, n]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < n; ++j)
          ga[static_cast<std::size_t>(i * n + j)] += og[static_cast<std::size_t>(j * m + i)];
    });
  }
  return out;
}

/// Column-wise concatenation of rank-2 tensors with a common row count.
template <typename T>
Tensor<T> concat_cols(const std::vector<Tensor<T>>& xs) {
  if (xs.empty()) throw ValueError("concat_cols: empty input list");
  const std::int64_t m = xs[0].rank() == 2 ? xs[0].dim(0) : -1;
  std::int64_t total = 0;
  for (const auto& x : xs) {
    if (x.rank() != 2 || x.dim(0) != m)
      throw ShapeError("concat_cols: all inputs must be [M,*] with equal M");
    total += x.dim(1);
  }
  Tensor<T> out = Tensor<T>::zeros({m, total});
  std::int64_t col = 0;
  for (const auto& x : xs) {
    const std::int64_t k = x.dim(1);
    for (std::int64_t i = 0; i < m; ++i)
      for (std::int64_t j = 0; j < k; ++j) out[i * total + col + j] = x[i * k + j];
    col += k;
  }
  bool track = false;
  for (const auto& x : xs) track = track || detail::tracing<T>({&x});
  if (track) {
    detail::record(out, [xs, out, m, total]() mutable {
      if (!out.has_grad()) return;
      auto og = out.grad();
      std::int64_t col = 0;
      for (auto& x : xs) {
        const std::int64_t k = x.dim(1);
        if (x.requires_grad()) {
          auto& gx = x.ensure_grad();
          for (std::int64_t i = 0; i < m; ++i)
            for (std::int64_t j = 0; j < k; ++j)
              gx[static_cast<std::size_t>(i * k + j)] +=
                  og[static_cast<std::size_t>(i * total + col + j)];
        }
        col += k;
      }
    });
  }
  return out;
}

/// Diagonal of a square matrix as a [M] vector.
template <typename T>
Tensor<T> diag2d(const Tensor<T>& a) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw ShapeError("diag2d: expected square matrix, got " + shape_str(a.shape()));
  const std::int64_t m = a.dim(0);
  Tensor<T> out = Tensor<T>::zeros({m});
  for (std::int64_t i = 0; i < m; ++i) out[i] = a[i * m + i];
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out, m]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) ga[static_cast<std::size_t>(i * m + i)] += og[static_cast<std::size_t>(i)];
    });
  }
  return out;
}

/// Copy of a square matrix with the diagonal replaced by a constant. The
/// replaced entries carry no gradient.
template <typename T>
Tensor<T> set_diag(const Tensor<T>& a, T value) {
  if (a.rank() != 2 || a.dim(0) != a.dim(1))
    throw ShapeError("set_diag: expected square matrix, got " + shape_str(a.shape()));
  const std::int64_t m = a.dim(0);
  Tensor<T> out = Tensor<T>::zeros({m, m});
  for (std::int64_t i = 0; i < m * m; ++i) out[i] = a[i];
  for (std::int64_t i = 0; i < m; ++i) out[i * m + i] = value;
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out, m]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i)
        for (std::int64_t j = 0; j < m; ++j)
          if (i != j) ga[static_cast<std::size_t>(i * m + j)] += og[static_cast<std::size_t>(i * m + j)];
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Reductions
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
Tensor<T> reduce_impl(const Tensor<T>& a, std::vector<int> axes, bool mean) {
  const int rank = a.rank();
  std::vector<bool> reduced(static_cast<std::size_t>(rank), false);
  for (int ax : axes) {
    if (ax < 0 || ax >= rank)
      throw ShapeError("reduce: axis " + std::to_string(ax) + " out of range for " +
                       shape_str(a.shape()));
    if (reduced[static_cast<std::size_t>(ax)])
      throw ValueError("reduce: duplicate axis " + std::to_string(ax));
    if (a.dim(ax) == 0) throw ValueError("reduce: empty reduction axis " + std::to_string(ax));
    reduced[static_cast<std::size_t>(ax)] = true;
  }
  Shape out_shape;
  std::int64_t count = 1;
  for (int i = 0; i < rank; ++i) {
    if (reduced[static_cast<std::size_t>(i)])
      count *= a.dim(i);
    else
      out_shape.push_back(a.dim(i));
  }
  Tensor<T> out = Tensor<T>::zeros(out_shape);

  // Map each input linear index to its output linear index once.
  const auto in_strides = row_major_strides(a.shape());
  const auto out_strides = row_major_strides(out_shape);
  std::vector<std::int64_t> out_index_of(static_cast<std::size_t>(a.numel()));
  for (std::int64_t lin = 0; lin < a.numel(); ++lin) {
    std::int64_t rem = lin, oi = 0;
    int od = 0;
    for (int d = 0; d < rank; ++d) {
      const std::int64_t idx = rem / in_strides[static_cast<std::size_t>(d)];
      rem %= in_strides[static_cast<std::size_t>(d)];
      if (!reduced[static_cast<std::size_t>(d)]) {
        oi += idx * out_strides[static_cast<std::size_t>(od)];
        ++od;
      }
    }
    out_index_of[static_cast<std::size_t>(lin)] = oi;
  }
  for (std::int64_t lin = 0; lin < a.numel(); ++lin)
    out[out_index_of[static_cast<std::size_t>(lin)]] += a[lin];
  const T inv = mean ? T(1) / static_cast<T>(count) : T(1);
  if (mean)
    for (std::int64_t i = 0; i < out.numel(); ++i) out[i] *= inv;

  if (tracing<T>({&a})) {
    record(out, [a, out, out_index_of, inv]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::size_t i = 0; i < ga.size(); ++i)
        ga[i] += inv * og[static_cast<std::size_t>(out_index_of[i])];
    });
  }
  return out;
}

}  // namespace detail

template <typename T>
Tensor<T> reduce_sum(const Tensor<T>& a, std::vector<int> axes) {
  return detail::reduce_impl(a, std::move(axes), false);
}

template <typename T>
Tensor<T> reduce_mean(const Tensor<T>& a, std::vector<int> axes) {
  return detail::reduce_impl(a, std::move(axes), true);
}

template <typename T>
Tensor<T> sum_all(const Tensor<T>& a) {
  std::vector<int> axes(static_cast<std::size_t>(a.rank()));
  std::iota(axes.begin(), axes.end(), 0);
  return detail::reduce_impl(a, std::move(axes), false);
}

template <typename T>
Tensor<T> mean_all(const Tensor<T>& a) {
  std::vector<int> axes(static_cast<std::size_t>(a.rank()));
  std::iota(axes.begin(), axes.end(), 0);
  return detail::reduce_impl(a, std::move(axes), true);
}

// ---------------------------------------------------------------------------
// log-sum-exp (max-subtraction stabilized)
// ---------------------------------------------------------------------------

namespace detail {

template <typename T>
void lse_row(const T* x, std::int64_t n, T& out) {
  T mx = -std::numeric_limits<T>::infinity();
  for (std::int64_t j = 0; j < n; ++j) mx = std::max(mx, x[j]);
  if (!(mx > -std::numeric_limits<T>::infinity())) {
    out = -std::numeric_limits<T>::infinity();
    return;
  }
  T s = T(0);
  for (std::int64_t j = 0; j < n; ++j) s += std::exp(x[j] - mx);
  out = mx + std::log(s);
}

template <typename T>
void lse_row_backward(const T* x, std::int64_t n, T lse, T og, T* gx) {
  if (!(lse > -std::numeric_limits<T>::infinity())) return;
  for (std::int64_t j = 0; j < n; ++j) gx[j] += og * std::exp(x[j] - lse);
}

}  // namespace detail

/// log(sum(exp(x))) over every element, max-stabilized. Exact for a single
/// element (returns it unchanged).
template <typename T>
Tensor<T> log_sum_exp(const Tensor<T>& a) {
  if (a.numel() == 0) throw ValueError("log_sum_exp: empty input");
  Tensor<T> out = Tensor<T>::zeros({});
  detail::lse_row(a.data().data(), a.numel(), out[0]);
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto& ga = a.ensure_grad();
      detail::lse_row_backward(a.data().data(), a.numel(), out[0], out.grad()[0], ga.data());
    });
  }
  return out;
}

/// Row-wise stabilized log-sum-exp of a [M,N] matrix -> [M].
template <typename T>
Tensor<T> log_sum_exp_rows(const Tensor<T>& a) {
  if (a.rank() != 2)
    throw ShapeError("log_sum_exp_rows: expected rank-2 tensor, got " + shape_str(a.shape()));
  const std::int64_t m = a.dim(0), n = a.dim(1);
  if (n == 0) throw ValueError("log_sum_exp_rows: empty rows");
  Tensor<T> out = Tensor<T>::zeros({m});
  for (std::int64_t i = 0; i < m; ++i)
    detail::lse_row(a.data().data() + i * n, n, out[i]);
  if (detail::tracing<T>({&a})) {
    detail::record(out, [a, out, m, n]() mutable {
      if (!out.has_grad() || !a.requires_grad()) return;
      auto og = out.grad();
      auto& ga = a.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i)
        detail::lse_row_backward(a.data().data() + i * n, n, out[i],
                                 og[static_cast<std::size_t>(i)], ga.data() + i * n);
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2)
    throw ShapeError("matmul: expected rank-2 operands, got " + shape_str(a.shape()) +
                     " and " + shape_str(b.shape()));
  if (a.dim(1) != b.dim(0))
    throw ShapeError("matmul: inner dimensions differ, " + shape_str(a.shape()) + " x " +
                     shape_str(b.shape()));
  const std::int64_t m = a.dim(0), k = a.dim(1), n = b.dim(1);
  Tensor<T> out = Tensor<T>::zeros({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t p = 0; p < k; ++p) {
      const T av = a[i * k + p];
      for (std::int64_t j = 0; j < n; ++j) out[i * n + j] += av * b[p * n + j];
    }
  if (detail::tracing<T>({&a, &b})) {
    detail::record(out, [a, b, out, m, k, n]() mutable {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (a.requires_grad()) {
        auto& ga = a.ensure_grad();
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t p = 0; p < k; ++p) {
            T acc = T(0);
            for (std::int64_t j = 0; j < n; ++j)
              acc += og[static_cast<std::size_t>(i * n + j)] * b[p * n + j];
            ga[static_cast<std::size_t>(i * k + p)] += acc;
          }
      }
      if (b.requires_grad()) {
        auto& gb = b.ensure_grad();
        for (std::int64_t p = 0; p < k; ++p)
          for (std::int64_t i = 0; i < m; ++i) {
            const T av = a[i * k + p];
            for (std::int64_t j = 0; j < n; ++j)
              gb[static_cast<std::size_t>(p * n + j)] += av * og[static_cast<std::size_t>(i * n + j)];
          }
      }
    });
  }
  return out;
}

/// Adds a [N] bias vector to every row of a [M,N] matrix.
template <typename T>
Tensor<T> add_bias_rows(const Tensor<T>& x, const Tensor<T>& bias) {
  if (x.rank() != 2 || bias.rank() != 1 || bias.dim(0) != x.dim(1))
    throw ShapeError("add_bias_rows: expected [M,N] and [N], got " + shape_str(x.shape()) +
                     " and " + shape_str(bias.shape()));
  const std::int64_t m = x.dim(0), n = x.dim(1);
  Tensor<T> out = Tensor<T>::zeros({m, n});
  for (std::int64_t i = 0; i < m; ++i)
    for (std::int64_t j = 0; j < n; ++j) out[i * n + j] = x[i * n + j] + bias[j];
  if (detail::tracing<T>({&x, &bias})) {
    detail::record(out, [x, bias, out, m, n]() mutable {
      if (!out.has_grad()) return;
      auto og = out.grad();
      if (x.requires_grad()) {
        auto& gx = x.ensure_grad();
        for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += og[i];
      }
      if (bias.requires_grad()) {
        auto& gb = bias.ensure_grad();
        for (std::int64_t i = 0; i < m; ++i)
          for (std::int64_t j = 0; j < n; ++j)
            gb[static_cast<std::size_t>(j)] += og[static_cast<std::size_t>(i * n + j)];
      }
    });
  }
  return out;
}

/// Rows of a [M,S] matrix divided by sqrt(sum of squares + epsilon). Row norms
/// come out <= 1 and converge to 1 for non-degenerate rows; the epsilon keeps
/// the all-zero row finite.
template <typename T>
Tensor<T> l2_normalize_rows(const Tensor<T>& x, double epsilon = 1e-8) {
  if (x.rank() != 2)
    throw ShapeError("l2_normalize_rows: expected rank-2 tensor, got " + shape_str(x.shape()));
  if (!(epsilon > 0)) throw ValueError("l2_normalize_rows: epsilon must be > 0");
  const std::int64_t m = x.dim(0), s = x.dim(1);
  const T eps = static_cast<T>(epsilon);
  Tensor<T> out = Tensor<T>::zeros({m, s});
  std::vector<T> inv_norm(static_cast<std::size_t>(m));
  for (std::int64_t i = 0; i < m; ++i) {
    T ss = T(0);
    for (std::int64_t j = 0; j < s; ++j) ss += x[i * s + j] * x[i * s + j];
    const T r = std::sqrt(ss + eps);
    inv_norm[static_cast<std::size_t>(i)] = T(1) / r;
    for (std::int64_t j = 0; j < s; ++j) out[i * s + j] = x[i * s + j] * inv_norm[static_cast<std::size_t>(i)];
  }
  if (detail::tracing<T>({&x})) {
    detail::record(out, [x, out, inv_norm, m, s]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto og = out.grad();
      auto& gx = x.ensure_grad();
      for (std::int64_t i = 0; i < m; ++i) {
        const T inv = inv_norm[static_cast<std::size_t>(i)];
        T dot = T(0);
        for (std::int64_t j = 0; j < s; ++j)
          dot += og[static_cast<std::size_t>(i * s + j)] * x[i * s + j];
        for (std::int64_t j = 0; j < s; ++j)
          gx[static_cast<std::size_t>(i * s + j)] +=
              og[static_cast<std::size_t>(i * s + j)] * inv - x[i * s + j] * dot * inv * inv * inv;
      }
    });
  }
  return out;
}

// ---------------------------------------------------------------------------
// Convolution and spatial ops (NCHW)
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>* bias,
                 int padding) {
  if (input.rank() != 4)
    throw ShapeError("conv2d: input must be [N,C,H,W], got " + shape_str(input.shape()));
  if (weight.rank() != 4)
    throw ShapeError("conv2d: weight must be [O,C,kH,kW], got " + shape_str(weight.shape()));
  const std::int64_t N = input.dim(0), C = input.dim(1), H = input.dim(2), W = input.dim(3);
  const std::int64_t O = weight.dim(0), kH = weight.dim(2), kW = weight.dim(3);
  if (weight.dim(1) != C)
    throw ShapeError("conv2d: input channel axis 1 (" + std::to_string(C) +
                     ") != weight channel axis 1 (" + std::to_string(weight.dim(1)) + ")");
  if (kH % 2 == 0 || kW % 2 == 0)
    throw ValueError("conv2d: kernel sides must be odd, got " + std::to_string(kH) + "x" +
                     std::to_string(kW));
  if (padding < 0) throw ValueError("conv2d: padding must be >= 0");
  if (bias && (bias->rank() != 1 || bias->dim(0) != O))
    throw ShapeError("conv2d: bias must be [O]=" + std::to_string(O) + ", got " +
                     shape_str(bias->shape()));
  const std::int64_t Ho = H + 2 * padding - kH + 1;
  const std::int64_t Wo = W + 2 * padding - kW + 1;
  if (Ho < 1 || Wo < 1)
    throw ShapeError("conv2d: kernel " + std::to_string(kH) + "x" + std::to_string(kW) +
                     " with padding " + std::to_string(padding) + " exceeds input axes 2,3 of " +
                     shape_str(input.shape()));

  Tensor<T> out = Tensor<T>::zeros({N, O, Ho, Wo});
  const T* in = input.data().data();
  const T* w = weight.data().data();
  T* o = out.data().data();
  const std::int64_t p = padding;

#pragma omp parallel for collapse(2) schedule(static)
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t oc = 0; oc < O; ++oc) {
      T* oplane = o + (n * O + oc) * Ho * Wo;
      if (bias) {
        const T bv = (*bias)[oc];
        for (std::int64_t i = 0; i < Ho * Wo; ++i) oplane[i] = bv;
      }
      for (std::int64_t c = 0; c < C; ++c) {
        const T* iplane = in + (n * C + c) * H * W;
        const T* wplane = w + (oc * C + c) * kH * kW;
        for (std::int64_t y = 0; y < Ho; ++y) {
          T* orow = oplane + y * Wo;
          for (std::int64_t ky = 0; ky < kH; ++ky) {
            const std::int64_t iy = y + ky - p;
            if (iy < 0 || iy >= H) continue;
            const T* irow = iplane + iy * W;
            for (std::int64_t kx = 0; kx < kW; ++kx) {
              const T wv = wplane[ky * kW + kx];
              const std::int64_t shift = kx - p;
              const std::int64_t x0 = std::max<std::int64_t>(0, -shift);
              const std::int64_t x1 = std::min<std::int64_t>(Wo, W - shift);
              for (std::int64_t x = x0; x < x1; ++x) orow[x] += wv * irow[x + shift];
            }
          }
        }
      }
    }

  const bool track = bias ? detail::tracing<T>({&input, &weight, bias})
                          : detail::tracing<T>({&input, &weight});
  if (track) {
    Tensor<T> bias_copy = bias ? *bias : Tensor<T>();
    const bool has_bias = bias != nullptr;
    detail::record(out, [input, weight, bias_copy, has_bias, out, N, C, H, W, O, kH, kW, Ho,
                         Wo, p]() mutable {
      if (!out.has_grad()) return;
      const T* og = out.grad_mut().data();
      if (has_bias && bias_copy.requires_grad()) {
        auto& gb = bias_copy.ensure_grad();
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t oc = 0; oc < O; ++oc) {
            const T* oplane = og + (n * O + oc) * Ho * Wo;
            T acc = T(0);
            for (std::int64_t i = 0; i < Ho * Wo; ++i) acc += oplane[i];
            gb[static_cast<std::size_t>(oc)] += acc;
          }
      }
      if (weight.requires_grad()) {
        auto& gw = weight.ensure_grad();
        const T* in = input.data().data();
        T* gwp = gw.data();
#pragma omp parallel for schedule(static)
        for (std::int64_t oc = 0; oc < O; ++oc)
          for (std::int64_t c = 0; c < C; ++c) {
            T* gwplane = gwp + (oc * C + c) * kH * kW;
            for (std::int64_t n = 0; n < N; ++n) {
              const T* iplane = in + (n * C + c) * H * W;
              const T* oplane = og + (n * O + oc) * Ho * Wo;
              for (std::int64_t ky = 0; ky < kH; ++ky)
                for (std::int64_t kx = 0; kx < kW; ++kx) {
                  T acc = T(0);
                  for (std::int64_t y = 0; y < Ho; ++y) {
                    const std::int64_t iy = y + ky - p;
                    if (iy < 0 || iy >= H) continue;
                    const T* irow = iplane + iy * W;
                    const T* orow = oplane + y * Wo;
                    const std::int64_t shift = kx - p;
                    const std::int64_t x0 = std::max<std::int64_t>(0, -shift);
                    const std::int64_t x1 = std::min<std::int64_t>(Wo, W - shift);
                    for (std::int64_t x = x0; x < x1; ++x) acc += irow[x + shift] * orow[x];
                  }
                  gwplane[ky * kW + kx] += acc;
                }
            }
          }
      }
      if (input.requires_grad()) {
        auto& gi = input.ensure_grad();
        const T* w = weight.data().data();
        T* gip = gi.data();
#pragma omp parallel for collapse(2) schedule(static)
        for (std::int64_t n = 0; n < N; ++n)
          for (std::int64_t c = 0; c < C; ++c) {
            T* giplane = gip + (n * C + c) * H * W;
            for (std::int64_t oc = 0; oc < O; ++oc) {
              const T* oplane = og + (n * O + oc) * Ho * Wo;
              const T* wplane = w + (oc * C + c) * kH * kW;
              for (std::int64_t ky = 0; ky < kH; ++ky)
                for (std::int64_t kx = 0; kx < kW; ++kx) {
                  const T wv = wplane[ky * kW + kx];
                  for (std::int64_t y = 0; y < Ho; ++y) {
                    const std::int64_t iy = y + ky - p;
                    if (iy < 0 || iy >= H) continue;
                    T* girow = giplane + iy * W;
                    const T* orow = oplane + y * Wo;
                    const std::int64_t shift = kx - p;
                    const std::int64_t x0 = std::max<std::int64_t>(0, -shift);
                    const std::int64_t x1 = std::min<std::int64_t>(Wo, W - shift);
                    for (std::int64_t x = x0; x < x1; ++x) girow[x + shift] += wv * orow[x];
                  }
                }
            }
          }
      }
    });
  }
  return out;
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, const Tensor<T>& bias,
                 int padding) {
  return conv2d(input, weight, &bias, padding);
}

template <typename T>
Tensor<T> conv2d(const Tensor<T>& input, const Tensor<T>& weight, int padding) {
  return conv2d(input, weight, static_cast<const Tensor<T>*>(nullptr), padding);
}

namespace detail {

// out[n, c, h*r+dy, w*r+dx] = in[n, c*r*r + dy*r + dx, h, w]
template <typename T>
void shuffle_copy(const T* in, T* out, std::int64_t N, std::int64_t Cout, std::int64_t r,
                  std::int64_t H, std::int64_t W, bool inverse, bool accumulate) {
  const std::int64_t Cin = Cout * r * r;
  for (std::int64_t n = 0; n < N; ++n)
    for (std::int64_t c = 0; c < Cout; ++c)
      for (std::int64_t dy = 0; dy < r; ++dy)
        for (std::int64_t dx = 0; dx < r; ++dx) {
          const std::int64_t cin = c * r * r + dy * r + dx;
          for (std::int64_t h = 0; h < H; ++h)
            for (std::int64_t w = 0; w < W; ++w) {
              const std::int64_t src = ((n * Cin + cin) * H + h) * W + w;
              const std::int64_t dst =
                  ((n * Cout + c) * (H * r) + (h * r + dy)) * (W * r) + (w * r + dx);
              const std::int64_t from = inverse ? dst : src;
              const std::int64_t to = inverse ? src : dst;
              if (accumulate)
                out[to] += in[from];
              else
                out[to] = in[from];
            }
        }
}

}  // namespace detail

/// Depth-to-space: [N, C*r^2, H, W] -> [N, C, H*r, W*r].
template <typename T>
Tensor<T> pixel_shuffle(const Tensor<T>& x, int r) {
  if (x.rank() != 4)
    throw ShapeError("pixel_shuffle: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (r < 1) throw ValueError("pixel_shuffle: r must be >= 1");
  const std::int64_t rr = static_cast<std::int64_t>(r) * r;
  if (x.dim(1) % rr != 0)
    throw ShapeError("pixel_shuffle: channel axis 1 (" + std::to_string(x.dim(1)) +
                     ") not divisible by r^2=" + std::to_string(rr));
  const std::int64_t N = x.dim(0), Cout = x.dim(1) / rr, H = x.dim(2), W = x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({N, Cout, H * r, W * r});
  detail::shuffle_copy(x.data().data(), out.data().data(), N, Cout, r, H, W, false, false);
  if (detail::tracing<T>({&x})) {
    detail::record(out, [x, out, N, Cout, r, H, W]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto& gx = x.ensure_grad();
      detail::shuffle_copy(out.grad_mut().data(), gx.data(), N, Cout, r, H, W, true, true);
    });
  }
  return out;
}

/// Space-to-depth inverse of pixel_shuffle: [N, C, H*r, W*r] -> [N, C*r^2, H, W].
template <typename T>
Tensor<T> pixel_unshuffle(const Tensor<T>& x, int r) {
  if (x.rank() != 4)
    throw ShapeError("pixel_unshuffle: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (r < 1) throw ValueError("pixel_unshuffle: r must be >= 1");
  if (x.dim(2) % r != 0 || x.dim(3) % r != 0)
    throw ShapeError("pixel_unshuffle: spatial axes 2,3 of " + shape_str(x.shape()) +
                     " not divisible by r=" + std::to_string(r));
  const std::int64_t N = x.dim(0), C = x.dim(1), H = x.dim(2) / r, W = x.dim(3) / r;
  Tensor<T> out = Tensor<T>::zeros({N, C * r * r, H, W});
  detail::shuffle_copy(x.data().data(), out.data().data(), N, C, r, H, W, true, false);
  if (detail::tracing<T>({&x})) {
    detail::record(out, [x, out, N, C, r, H, W]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto& gx = x.ensure_grad();
      detail::shuffle_copy(out.grad_mut().data(), gx.data(), N, C, r, H, W, false, true);
    });
  }
  return out;
}

/// Non-overlapping k x k average pooling; spatial sides must divide by k.
template <typename T>
Tensor<T> avg_pool2d(const Tensor<T>& x, int k) {
  if (x.rank() != 4)
    throw ShapeError("avg_pool2d: input must be [N,C,H,W], got " + shape_str(x.shape()));
  if (k < 1) throw ValueError("avg_pool2d: k must be >= 1");
  if (x.dim(2) % k != 0 || x.dim(3) % k != 0)
    throw ShapeError("avg_pool2d: spatial axes 2,3 of " + shape_str(x.shape()) +
                     " not divisible by k=" + std::to_string(k));
  const std::int64_t N = x.dim(0), C = x.dim(1), Ho = x.dim(2) / k, Wo = x.dim(3) / k;
  const std::int64_t H = x.dim(2), W = x.dim(3);
  Tensor<T> out = Tensor<T>::zeros({N, C, Ho, Wo});
  const T inv = T(1) / static_cast<T>(k * k);
  for (std::int64_t nc = 0; nc < N * C; ++nc) {
    const T* ip = x.data().data() + nc * H * W;
    T* op = out.data().data() + nc * Ho * Wo;
    for (std::int64_t y = 0; y < Ho; ++y)
      for (std::int64_t xw = 0; xw < Wo; ++xw) {
        T acc = T(0);
        for (std::int64_t dy = 0; dy < k; ++dy)
          for (std::int64_t dx = 0; dx < k; ++dx) acc += ip[(y * k + dy) * W + (xw * k + dx)];
        op[y * Wo + xw] = acc * inv;
      }
  }
  if (detail::tracing<T>({&x})) {
    detail::record(out, [x, out, N, C, Ho, Wo, H, W, k, inv]() mutable {
      if (!out.has_grad() || !x.requires_grad()) return;
      auto og = out.grad();
      auto& gx = x.ensure_grad();
      for (std::int64_t nc = 0; nc < N * C; ++nc) {
        const T* op = og.data() + nc * Ho * Wo;
        T* gp = gx.data() + nc * H * W;
        for (std::int64_t y = 0; y < Ho; ++y)
          for (std::int64_t xw = 0; xw < Wo; ++xw) {
            const T g = op[y * Wo + xw] * inv;
            for (std::int64_t dy = 0; dy < k; ++dy)
              for (std::int64_t dx = 0; dx < k; ++dx) gp[(y * k + dy) * W + (xw * k + dx)] += g;
          }
      }
    });
  }
  return out;
}

}  // namespace csr
