#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <random>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "keyhead/errors.hpp"

namespace keyhead {

// Dense row-major tensor with optional gradient storage. A Tensor is a
// cheap value-semantic handle: copies share the underlying buffers. Data
// is immutable after the forward op that produced it; only the grad slot
// is mutated (by the backward pass).
template <class Real>
class Tensor {
 public:
  Tensor() = default;

  Tensor(std::vector<int> shape, bool requires_grad = false)
      : shape_(std::move(shape)), requires_grad_(requires_grad) {
    std::size_t n = 1;
    for (int d : shape_) {
      if (d <= 0) throw ContractError("tensor: dimensions must be positive, got " + shape_string());
      n *= static_cast<std::size_t>(d);
    }
    data_ = std::make_shared<std::vector<Real>>(n, Real(0));
    if (requires_grad_) grad_ = std::make_shared<std::vector<Real>>(n, Real(0));
  }

  static Tensor zeros(std::vector<int> shape, bool requires_grad = false) {
    return Tensor(std::move(shape), requires_grad);
  }

  static Tensor full(std::vector<int> shape, Real value, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    std::fill(t.data().begin(), t.data().end(), value);
    return t;
  }

  static Tensor from_data(std::vector<int> shape, std::vector<Real> values, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    if (values.size() != t.numel()) {
      throw ContractError("tensor: data length " + std::to_string(values.size()) +
                          " does not match shape " + t.shape_string());
    }
    std::copy(values.begin(), values.end(), t.data().begin());
    return t;
  }

  static Tensor scalar(Real value, bool requires_grad = false) {
    return full({1}, value, requires_grad);
  }

  // Gaussian init via Box-Muller so draws depend only on the engine,
  // not on the standard library's distribution internals.
  static Tensor randn(std::vector<int> shape, std::mt19937_64& rng, Real stddev, bool requires_grad = false) {
    Tensor t(std::move(shape), requires_grad);
    for (Real& v : t.data()) {
      double u1 = std::max(1e-300, canonical(rng));
      double u2 = canonical(rng);
      v = static_cast<Real>(std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2) *
                            static_cast<double>(stddev));
    }
    return t;
  }

  bool defined() const { return static_cast<bool>(data_); }
  const std::vector<int>& shape() const { return shape_; }
  int rank() const { return static_cast<int>(shape_.size()); }
  int dim(int i) const { return shape_[static_cast<std::size_t>(i)]; }
  int rows() const { return shape_.empty() ? 0 : shape_[0]; }
  int cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }
  std::size_t numel() const { return data_ ? data_->size() : 0; }
  bool requires_grad() const { return requires_grad_; }

  std::vector<Real>& data() { return *data_; }
  const std::vector<Real>& data() const { return *data_; }

  bool has_grad() const { return static_cast<bool>(grad_); }
  std::vector<Real>& grad() {
    if (!grad_) throw ContractError("tensor: grad requested but tensor does not require grad");
    return *grad_;
  }
  const std::vector<Real>& grad() const {
    if (!grad_) throw ContractError("tensor: grad requested but tensor does not require grad");
    return *grad_;
  }

  void zero_grad() {
    if (grad_) std::fill(grad_->begin(), grad_->end(), Real(0));
  }

  Real& at(int i) { return (*data_)[static_cast<std::size_t>(i)]; }
  Real at(int i) const { return (*data_)[static_cast<std::size_t>(i)]; }
  Real& at(int i, int j) { return (*data_)[static_cast<std::size_t>(i) * cols() + j]; }
  Real at(int i, int j) const { return (*data_)[static_cast<std::size_t>(i) * cols() + j]; }

  std::string shape_string() const {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < shape_.size(); ++i) os << (i ? " x " : "") << shape_[i];
    os << "]";
    return os.str();
  }

  static double canonical(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
  }

 private:
  std::vector<int> shape_;
  std::shared_ptr<std::vector<Real>> data_;
  std::shared_ptr<std::vector<Real>> grad_;
  bool requires_grad_ = false;
};

// Ordered record of executed ops. Each forward op that touches a tensor
// requiring grad pushes one closure; backward() replays them in exact
// reverse order. A tape is confined to one thread; it is installed with
// an RAII Scope and rebuilt each forward pass.
template <class Real>
class Tape {
 public:
  using Step = std::function<void()>;

  void record(Step step) { steps_.push_back(std::move(step)); }
  std::size_t size() const { return steps_.size(); }
  void clear() { steps_.clear(); }

  void backward(Tensor<Real>& loss) {
    if (loss.numel() != 1) {
      throw ContractError("backward: loss must be scalar, got shape " + loss.shape_string());
    }
    if (!loss.requires_grad()) {
      throw ContractError("backward: loss does not require grad (was it computed under an active tape?)");
    }
    loss.grad()[0] = Real(1);
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)();
  }

  static Tape*& current_slot() {
    thread_local Tape* current = nullptr;
    return current;
  }
  static Tape* current() { return current_slot(); }

  class Scope {
   public:
    explicit Scope(Tape& tape) : previous_(current_slot()) { current_slot() = &tape; }
    ~Scope() { current_slot() = previous_; }
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

 private:
  std::vector<Step> steps_;
};

// Suspends recording (inference / finite-difference evaluation).
template <class Real>
class NoGradScope {
 public:
  NoGradScope() : previous_(Tape<Real>::current_slot()) { Tape<Real>::current_slot() = nullptr; }
  ~NoGradScope() { Tape<Real>::current_slot() = previous_; }
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape<Real>* previous_;
};

// Boolean attention mask; keep[i*cols+j] != 0 means position j is visible
// from position i. Masked-out positions receive -inf before softmax.
struct BoolMask {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint8_t> keep;

  bool at(int i, int j) const { return keep[static_cast<std::size_t>(i) * cols + j] != 0; }
};

inline BoolMask causal_mask(int n) {
  BoolMask m;
  m.rows = n;
  m.cols = n;
  m.keep.assign(static_cast<std::size_t>(n) * n, 0);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j <= i; ++j) m.keep[static_cast<std::size_t>(i) * n + j] = 1;
  return m;
}

namespace detail {

template <class Real>
bool grads_wanted(std::initializer_list<const Tensor<Real>*> inputs) {
  if (Tape<Real>::current() == nullptr) return false;
  for (const Tensor<Real>* t : inputs)
    if (t->requires_grad()) return true;
  return false;
}

template <class Real>
void require_matching_shape(const Tensor<Real>& a, const Tensor<Real>& b, const char* op) {
  if (a.shape() != b.shape()) {
    throw DimensionError(std::string(op) + ": shape mismatch " + a.shape_string() + " vs " + b.shape_string());
  }
}

template <class Real>
void require_matrix(const Tensor<Real>& t, const char* op) {
  if (t.rank() != 2) {
    throw DimensionError(std::string(op) + ": expected a matrix, got " + t.shape_string());
  }
}

}  // namespace detail

// ---------------------------------------------------------------------
// Primitive ops. Each computes its output eagerly and, when a tape is
// active and an input requires grad, records the local gradient rule.
// ---------------------------------------------------------------------

template <class Real>
Tensor<Real> matmul(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_matrix(a, "matmul");
  detail::require_matrix(b, "matmul");
  if (a.cols() != b.rows()) {
    throw DimensionError("matmul: inner dimensions disagree " + a.shape_string() + " vs " + b.shape_string());
  }
  const int m = a.rows(), k = a.cols(), n = b.cols();
  bool track = detail::grads_wanted<Real>({&a, &b});
  Tensor<Real> out({m, n}, track);
  const Real* pa = a.data().data();
  const Real* pb = b.data().data();
  Real* po = out.data().data();
  for (int i = 0; i < m; ++i) {
    Real* orow = po + static_cast<std::size_t>(i) * n;
    for (int p = 0; p < k; ++p) {
      const Real aip = pa[static_cast<std::size_t>(i) * k + p];
      if (aip == Real(0)) continue;
      const Real* brow = pb + static_cast<std::size_t>(p) * n;
      for (int j = 0; j < n; ++j) orow[j] += aip * brow[j];
    }
  }
  if (track) {
    Tape<Real>::current()->record([a = a, b = b, out = out, m = m, k = k, n = n]() mutable {
      const Real* g = out.grad().data();
      if (a.requires_grad()) {
        Real* ga = a.grad().data();
        const Real* pb2 = b.data().data();
        for (int i = 0; i < m; ++i) {
          const Real* grow = g + static_cast<std::size_t>(i) * n;
          for (int p = 0; p < k; ++p) {
            const Real* brow = pb2 + static_cast<std::size_t>(p) * n;
            Real acc = Real(0);
            for (int j = 0; j < n; ++j) acc += grow[j] * brow[j];
            ga[static_cast<std::size_t>(i) * k + p] += acc;
          }
        }
      }
      if (b.requires_grad()) {
        Real* gb = b.grad().data();
        const Real* pa2 = a.data().data();
        for (int i = 0; i < m; ++i) {
          const Real* grow = g + static_cast<std::size_t>(i) * n;
          for (int p = 0; p < k; ++p) {
            const Real aip = pa2[static_cast<std::size_t>(i) * k + p];
            if (aip == Real(0)) continue;
            Real* gbrow = gb + static_cast<std::size_t>(p) * n;
            for (int j = 0; j < n; ++j) gbrow[j] += aip * grow[j];
          }
        }
      }
    });
  }
  return out;
}

template <class Real>
Tensor<Real> transpose(const Tensor<Real>& a) {
  detail::require_matrix(a, "transpose");
  const int m = a.rows(), n = a.cols();
  bool track = detail::grads_wanted<Real>({&a});
  Tensor<Real> out({n, m}, track);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(j, i) = a.at(i, j);
  if (track) {
    Tape<Real>::current()->record([a = a, out = out, m = m, n = n]() mutable {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) a.grad()[static_cast<std::size_t>(i) * n + j] += out.grad()[static_cast<std::size_t>(j) * m + i];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> add(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_matching_shape(a, b, "add");
  bool track = detail::grads_wanted<Real>({&a, &b});
  Tensor<Real> out(a.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] + b.data()[i];
  if (track) {
    Tape<Real>::current()->record([a = a, b = b, out = out, n = n]() mutable {
      if (a.requires_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> sub(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_matching_shape(a, b, "sub");
  bool track = detail::grads_wanted<Real>({&a, &b});
  Tensor<Real> out(a.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] - b.data()[i];
  if (track) {
    Tape<Real>::current()->record([a = a, b = b, out = out, n = n]() mutable {
      if (a.requires_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] -= out.grad()[i];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> mul(const Tensor<Real>& a, const Tensor<Real>& b) {
  detail::require_matching_shape(a, b, "mul");
  bool track = detail::grads_wanted<Real>({&a, &b});
  Tensor<Real> out(a.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = a.data()[i] * b.data()[i];
  if (track) {
    Tape<Real>::current()->record([a = a, b = b, out = out, n = n]() mutable {
      if (a.requires_grad())
        for (std::size_t i = 0; i < n; ++i) a.grad()[i] += out.grad()[i] * b.data()[i];
      if (b.requires_grad())
        for (std::size_t i = 0; i < n; ++i) b.grad()[i] += out.grad()[i] * a.data()[i];
    });
  }
  return out;
}

// out = a * x + b elementwise, scalars a and b.
template <class Real>
Tensor<Real> affine(const Tensor<Real>& x, Real mul_by, Real add_to) {
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out(x.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = mul_by * x.data()[i] + add_to;
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, mul_by = mul_by, n = n]() mutable {
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += mul_by * out.grad()[i];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> scale(const Tensor<Real>& x, Real factor) {
  return affine(x, factor, Real(0));
}

// Row-wise bias broadcast: x is [m x n], bias has n entries.
template <class Real>
Tensor<Real> add_row_bias(const Tensor<Real>& x, const Tensor<Real>& bias) {
  detail::require_matrix(x, "add_row_bias");
  if (static_cast<int>(bias.numel()) != x.cols()) {
    throw DimensionError("add_row_bias: bias " + bias.shape_string() + " does not match columns of " + x.shape_string());
  }
  const int m = x.rows(), n = x.cols();
  bool track = detail::grads_wanted<Real>({&x, &bias});
  Tensor<Real> out({m, n}, track);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) + bias.at(j);
  if (track) {
    Tape<Real>::current()->record([x = x, bias = bias, out = out, m = m, n = n]() mutable {
      if (x.requires_grad())
        for (std::size_t i = 0; i < out.numel(); ++i) x.grad()[i] += out.grad()[i];
      if (bias.requires_grad())
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) bias.grad()[static_cast<std::size_t>(j)] += out.grad()[static_cast<std::size_t>(i) * n + j];
    });
  }
  return out;
}

// Scales row i of x by s[i]; s has m entries (shape [m] or [m x 1]).
template <class Real>
Tensor<Real> mul_rows(const Tensor<Real>& x, const Tensor<Real>& s) {
  detail::require_matrix(x, "mul_rows");
  if (static_cast<int>(s.numel()) != x.rows()) {
    throw DimensionError("mul_rows: scale " + s.shape_string() + " does not match rows of " + x.shape_string());
  }
  const int m = x.rows(), n = x.cols();
  bool track = detail::grads_wanted<Real>({&x, &s});
  Tensor<Real> out({m, n}, track);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = x.at(i, j) * s.at(i);
  if (track) {
    Tape<Real>::current()->record([x = x, s = s, out = out, m = m, n = n]() mutable {
      if (x.requires_grad())
        for (int i = 0; i < m; ++i)
          for (int j = 0; j < n; ++j) x.grad()[static_cast<std::size_t>(i) * n + j] += out.grad()[static_cast<std::size_t>(i) * n + j] * s.at(i);
      if (s.requires_grad())
        for (int i = 0; i < m; ++i) {
          Real acc = Real(0);
          for (int j = 0; j < n; ++j) acc += out.grad()[static_cast<std::size_t>(i) * n + j] * x.at(i, j);
          s.grad()[static_cast<std::size_t>(i)] += acc;
        }
    });
  }
  return out;
}

// Numerically stable row softmax (row-max subtraction). A row whose max is
// -inf (everything masked) degrades to the uniform distribution.
template <class Real>
Tensor<Real> softmax_rows(const Tensor<Real>& x) {
  detail::require_matrix(x, "softmax_rows");
  const int m = x.rows(), n = x.cols();
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out({m, n}, track);
  for (int i = 0; i < m; ++i) {
    Real mx = x.at(i, 0);
    for (int j = 1; j < n; ++j) mx = std::max(mx, x.at(i, j));
    if (!(mx > -std::numeric_limits<Real>::infinity())) {
      for (int j = 0; j < n; ++j) out.at(i, j) = Real(1) / Real(n);
      continue;
    }
    Real sum = Real(0);
    for (int j = 0; j < n; ++j) {
      Real e = std::exp(x.at(i, j) - mx);
      out.at(i, j) = e;
      sum += e;
    }
    for (int j = 0; j < n; ++j) out.at(i, j) /= sum;
  }
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, m = m, n = n]() mutable {
      for (int i = 0; i < m; ++i) {
        Real dot = Real(0);
        for (int j = 0; j < n; ++j) dot += out.grad()[static_cast<std::size_t>(i) * n + j] * out.at(i, j);
        for (int j = 0; j < n; ++j) {
          x.grad()[static_cast<std::size_t>(i) * n + j] +=
              out.at(i, j) * (out.grad()[static_cast<std::size_t>(i) * n + j] - dot);
        }
      }
    });
  }
  return out;
}

// Per-row normalization to zero mean / unit variance followed by the
// gain/bias affine map. Variance is the biased (divide-by-d) estimate.
template <class Real>
Tensor<Real> layer_norm(const Tensor<Real>& x, const Tensor<Real>& gain, const Tensor<Real>& bias, Real eps) {
  detail::require_matrix(x, "layer_norm");
  const int m = x.rows(), d = x.cols();
  if (static_cast<int>(gain.numel()) != d || static_cast<int>(bias.numel()) != d) {
    throw DimensionError("layer_norm: gain/bias must have " + std::to_string(d) + " entries");
  }
  bool track = detail::grads_wanted<Real>({&x, &gain, &bias});
  Tensor<Real> out({m, d}, track);
  Tensor<Real> normed({m, d});   // cached x-hat for backward
  Tensor<Real> inv_sigma({m});
  for (int i = 0; i < m; ++i) {
    Real mean = Real(0);
    for (int j = 0; j < d; ++j) mean += x.at(i, j);
    mean /= Real(d);
    Real var = Real(0);
    for (int j = 0; j < d; ++j) {
      Real c = x.at(i, j) - mean;
      var += c * c;
    }
    var /= Real(d);
    Real inv = Real(1) / std::sqrt(var + eps);
    inv_sigma.at(i) = inv;
    for (int j = 0; j < d; ++j) {
      Real nh = (x.at(i, j) - mean) * inv;
      normed.at(i, j) = nh;
      out.at(i, j) = gain.at(j) * nh + bias.at(j);
    }
  }
  if (track) {
    Tape<Real>::current()->record([x = x, gain = gain, bias = bias, out = out, normed = normed, inv_sigma = inv_sigma, m = m, d = d]() mutable {
      for (int i = 0; i < m; ++i) {
        if (gain.requires_grad() || bias.requires_grad()) {
          for (int j = 0; j < d; ++j) {
            Real g = out.grad()[static_cast<std::size_t>(i) * d + j];
            if (gain.requires_grad()) gain.grad()[static_cast<std::size_t>(j)] += g * normed.at(i, j);
            if (bias.requires_grad()) bias.grad()[static_cast<std::size_t>(j)] += g;
          }
        }
        if (x.requires_grad()) {
          Real mean_gh = Real(0), mean_ghn = Real(0);
          for (int j = 0; j < d; ++j) {
            Real gh = out.grad()[static_cast<std::size_t>(i) * d + j] * gain.at(j);
            mean_gh += gh;
            mean_ghn += gh * normed.at(i, j);
          }
          mean_gh /= Real(d);
          mean_ghn /= Real(d);
          for (int j = 0; j < d; ++j) {
            Real gh = out.grad()[static_cast<std::size_t>(i) * d + j] * gain.at(j);
            x.grad()[static_cast<std::size_t>(i) * d + j] +=
                inv_sigma.at(i) * (gh - mean_gh - normed.at(i, j) * mean_ghn);
          }
        }
      }
    });
  }
  return out;
}

template <class Real>
Tensor<Real> relu(const Tensor<Real>& x) {
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out(x.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = x.data()[i] > Real(0) ? x.data()[i] : Real(0);
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, n = n]() mutable {
      for (std::size_t i = 0; i < n; ++i)
        if (x.data()[i] > Real(0)) x.grad()[i] += out.grad()[i];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> sigmoid(const Tensor<Real>& x) {
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out(x.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) {
    Real v = x.data()[i];
    out.data()[i] = v >= Real(0) ? Real(1) / (Real(1) + std::exp(-v))
                                 : std::exp(v) / (Real(1) + std::exp(v));
  }
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, n = n]() mutable {
      for (std::size_t i = 0; i < n; ++i) x.grad()[i] += out.grad()[i] * out.data()[i] * (Real(1) - out.data()[i]);
    });
  }
  return out;
}

// ln(max(x, floor)); keeps the loss finite on degenerate probabilities.
template <class Real>
Tensor<Real> log_floor(const Tensor<Real>& x, Real floor) {
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out(x.shape(), track);
  const std::size_t n = out.numel();
  for (std::size_t i = 0; i < n; ++i) out.data()[i] = std::log(std::max(x.data()[i], floor));
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, n = n, floor = floor]() mutable {
      for (std::size_t i = 0; i < n; ++i)
        if (x.data()[i] > floor) x.grad()[i] += out.grad()[i] / x.data()[i];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> embedding_rows(const Tensor<Real>& table, const std::vector<int>& ids) {
  detail::require_matrix(table, "embedding_rows");
  if (ids.empty()) throw ContractError("embedding_rows: empty id sequence");
  const int v = table.rows(), d = table.cols();
  for (int id : ids) {
    if (id < 0 || id >= v) {
      throw ContractError("embedding_rows: id " + std::to_string(id) + " outside vocabulary of size " + std::to_string(v));
    }
  }
  bool track = detail::grads_wanted<Real>({&table});
  Tensor<Real> out({static_cast<int>(ids.size()), d}, track);
  for (std::size_t i = 0; i < ids.size(); ++i)
    for (int j = 0; j < d; ++j) out.at(static_cast<int>(i), j) = table.at(ids[i], j);
  if (track) {
    Tape<Real>::current()->record([table = table, out = out, ids = ids, d = d]() mutable {
      for (std::size_t i = 0; i < ids.size(); ++i)
        for (int j = 0; j < d; ++j)
          table.grad()[static_cast<std::size_t>(ids[i]) * d + j] += out.grad()[i * d + j];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> concat_cols(const std::vector<Tensor<Real>>& parts) {
  if (parts.empty()) throw ContractError("concat_cols: no inputs");
  const int m = parts[0].rows();
  int total = 0;
  bool track = false;
  for (const auto& p : parts) {
    detail::require_matrix(p, "concat_cols");
    if (p.rows() != m) throw DimensionError("concat_cols: row counts differ");
    total += p.cols();
    if (Tape<Real>::current() && p.requires_grad()) track = true;
  }
  Tensor<Real> out({m, total}, track);
  int col = 0;
  for (const auto& p : parts) {
    for (int i = 0; i < m; ++i)
      for (int j = 0; j < p.cols(); ++j) out.at(i, col + j) = p.at(i, j);
    col += p.cols();
  }
  if (track) {
    Tape<Real>::current()->record([parts = parts, out = out, m = m, total = total]() mutable {
      int c = 0;
      for (auto& p : parts) {
        if (p.requires_grad()) {
          for (int i = 0; i < m; ++i)
            for (int j = 0; j < p.cols(); ++j)
              p.grad()[static_cast<std::size_t>(i) * p.cols() + j] += out.grad()[static_cast<std::size_t>(i) * total + c + j];
        }
        c += p.cols();
      }
    });
  }
  return out;
}

// out[i] = x[i, ids[i]]; the per-target-token probability gather.
template <class Real>
Tensor<Real> pick_per_row(const Tensor<Real>& x, const std::vector<int>& ids) {
  detail::require_matrix(x, "pick_per_row");
  if (static_cast<int>(ids.size()) != x.rows()) {
    throw DimensionError("pick_per_row: need one index per row of " + x.shape_string());
  }
  for (int id : ids)
    if (id < 0 || id >= x.cols()) throw ContractError("pick_per_row: column index out of range");
  const int m = x.rows(), n = x.cols();
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out({m}, track);
  for (int i = 0; i < m; ++i) out.at(i) = x.at(i, ids[i]);
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, ids = ids, n = n]() mutable {
      for (std::size_t i = 0; i < ids.size(); ++i)
        x.grad()[i * n + static_cast<std::size_t>(ids[i])] += out.grad()[i];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> row_sums(const Tensor<Real>& x) {
  detail::require_matrix(x, "row_sums");
  const int m = x.rows(), n = x.cols();
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out({m}, track);
  for (int i = 0; i < m; ++i) {
    Real acc = Real(0);
    for (int j = 0; j < n; ++j) acc += x.at(i, j);
    out.at(i) = acc;
  }
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, m = m, n = n]() mutable {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j) x.grad()[static_cast<std::size_t>(i) * n + j] += out.grad()[static_cast<std::size_t>(i)];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> sum_all(const Tensor<Real>& x) {
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out({1}, track);
  Real acc = Real(0);
  for (Real v : x.data()) acc += v;
  out.at(0) = acc;
  if (track) {
    Tape<Real>::current()->record([x = x, out = out]() mutable {
      for (std::size_t i = 0; i < x.numel(); ++i) x.grad()[i] += out.grad()[0];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> mean_all(const Tensor<Real>& x) {
  return scale(sum_all(x), Real(1) / static_cast<Real>(x.numel()));
}

// Copy-distribution aggregation: out[i, ids[j]] += w[i, j]. Mass over
// source positions lands on the positions' token ids.
template <class Real>
Tensor<Real> scatter_cols_by_id(const Tensor<Real>& w, const std::vector<int>& ids, int n_cols) {
  detail::require_matrix(w, "scatter_cols_by_id");
  if (static_cast<int>(ids.size()) != w.cols()) {
    throw DimensionError("scatter_cols_by_id: need one id per column of " + w.shape_string());
  }
  for (int id : ids)
    if (id < 0 || id >= n_cols) throw ContractError("scatter_cols_by_id: id out of range");
  const int m = w.rows(), s = w.cols();
  bool track = detail::grads_wanted<Real>({&w});
  Tensor<Real> out({m, n_cols}, track);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < s; ++j) out.at(i, ids[j]) += w.at(i, j);
  if (track) {
    Tape<Real>::current()->record([w = w, out = out, ids = ids, m = m, s = s, n_cols = n_cols]() mutable {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < s; ++j)
          w.grad()[static_cast<std::size_t>(i) * s + j] += out.grad()[static_cast<std::size_t>(i) * n_cols + ids[j]];
    });
  }
  return out;
}

template <class Real>
Tensor<Real> masked_fill(const Tensor<Real>& x, const BoolMask& mask, Real value) {
  detail::require_matrix(x, "masked_fill");
  if (mask.rows != x.rows() || mask.cols != x.cols()) {
    throw DimensionError("masked_fill: mask " + std::to_string(mask.rows) + "x" + std::to_string(mask.cols) +
                         " does not match " + x.shape_string());
  }
  const int m = x.rows(), n = x.cols();
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out({m, n}, track);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < n; ++j) out.at(i, j) = mask.at(i, j) ? x.at(i, j) : value;
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, mask = mask, m = m, n = n]() mutable {
      for (int i = 0; i < m; ++i)
        for (int j = 0; j < n; ++j)
          if (mask.at(i, j)) x.grad()[static_cast<std::size_t>(i) * n + j] += out.grad()[static_cast<std::size_t>(i) * n + j];
    });
  }
  return out;
}

// Inverted dropout; draws one uniform per element from the given engine,
// so the mask stream is reproducible from the training seed.
template <class Real>
Tensor<Real> dropout(const Tensor<Real>& x, double rate, std::mt19937_64& rng) {
  if (rate < 0.0 || rate >= 1.0) throw ContractError("dropout: rate must be in [0, 1)");
  if (rate == 0.0) return x;
  bool track = detail::grads_wanted<Real>({&x});
  Tensor<Real> out(x.shape(), track);
  auto mask = std::make_shared<std::vector<std::uint8_t>>(x.numel());
  const Real inv_keep = Real(1.0 / (1.0 - rate));
  for (std::size_t i = 0; i < x.numel(); ++i) {
    bool keep = Tensor<Real>::canonical(rng) >= rate;
    (*mask)[i] = keep ? 1 : 0;
    out.data()[i] = keep ? x.data()[i] * inv_keep : Real(0);
  }
  if (track) {
    Tape<Real>::current()->record([x = x, out = out, mask = mask, inv_keep = inv_keep]() mutable {
      for (std::size_t i = 0; i < x.numel(); ++i)
        if ((*mask)[i]) x.grad()[i] += out.grad()[i] * inv_keep;
    });
  }
  return out;
}

// Scaled dot-product attention: softmax(q kT / sqrt(d_k)) v.
template <class Real>
Tensor<Real> attention(const Tensor<Real>& q, const Tensor<Real>& k, const Tensor<Real>& v,
                       const BoolMask* mask = nullptr) {
  detail::require_matrix(q, "attention");
  detail::require_matrix(k, "attention");
  detail::require_matrix(v, "attention");
  if (q.cols() != k.cols()) {
    throw DimensionError("attention: query/key widths disagree " + q.shape_string() + " vs " + k.shape_string());
  }
  if (k.rows() != v.rows()) {
    throw DimensionError("attention: key/value row counts disagree " + k.shape_string() + " vs " + v.shape_string());
  }
  if (mask && (mask->rows != q.rows() || mask->cols != k.rows())) {
    throw DimensionError("attention: mask must be q_rows x k_rows");
  }
  Tensor<Real> scores = matmul(q, transpose(k));
  scores = scale(scores, Real(1) / std::sqrt(static_cast<Real>(q.cols())));
  if (mask) scores = masked_fill(scores, *mask, -std::numeric_limits<Real>::infinity());
  return matmul(softmax_rows(scores), v);
}

}  // namespace keyhead
