#pragma once

#include <Eigen/Core>

#include <cmath>
#include <cstddef>
#include <functional>
#include <numeric>
#include <string>
#include <utility>
#include <vector>

#include "addidec/errors.hpp"

namespace addidec::ad {

using EMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using CMap = Eigen::Map<const EMat>;
using MMap = Eigen::Map<EMat>;

inline std::string shape_str(const std::vector<std::size_t>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

// Leaf tensor: owns parameter values and accumulated gradients. Activations
// live on the tape, not here.
struct Tensor {
  std::string name;
  std::vector<std::size_t> shape;
  std::vector<double> data;
  bool requires_grad = true;
  std::vector<double> grad;  // empty until a backward pass touches it

  std::size_t numel() const {
    return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  }
  static Tensor zeros(std::string name, std::vector<std::size_t> shape, bool requires_grad = true) {
    Tensor t;
    t.name = std::move(name);
    t.shape = std::move(shape);
    t.data.assign(t.numel(), 0.0);
    t.requires_grad = requires_grad;
    return t;
  }
  void zero_grad() { grad.assign(numel(), 0.0); }
  void accumulate_grad(const std::vector<double>& g) {
    if (grad.size() != numel()) grad.assign(numel(), 0.0);
    for (std::size_t i = 0; i < g.size(); ++i) grad[i] += g[i];
  }
};

using VarId = std::size_t;

// Reverse-mode tape. One forward/backward pair per instance: backward pulls
// gradients to the leaves, then clears the op records.
class Tape {
 public:
  struct Var {
    std::vector<std::size_t> shape;
    std::vector<double> val;
    std::vector<double> grad;
    bool needs_grad = false;
    Tensor* leaf = nullptr;
  };

  VarId leaf(Tensor& t) {
    Var v;
    v.shape = t.shape;
    v.val = t.data;
    v.needs_grad = t.requires_grad;
    v.leaf = &t;
    if (v.needs_grad) v.grad.assign(v.val.size(), 0.0);
    vars_.push_back(std::move(v));
    return vars_.size() - 1;
  }

  VarId constant(std::vector<std::size_t> shape, std::vector<double> data) {
    Var v;
    v.shape = std::move(shape);
    v.val = std::move(data);
    vars_.push_back(std::move(v));
    return vars_.size() - 1;
  }

  VarId fresh(std::vector<std::size_t> shape, bool needs_grad) {
    Var v;
    v.shape = std::move(shape);
    v.val.assign(std::accumulate(v.shape.begin(), v.shape.end(), std::size_t{1},
                                 std::multiplies<>{}),
                 0.0);
    v.needs_grad = needs_grad;
    if (needs_grad) v.grad.assign(v.val.size(), 0.0);
    vars_.push_back(std::move(v));
    return vars_.size() - 1;
  }

  Var& at(VarId id) { return vars_[id]; }
  const Var& at(VarId id) const { return vars_[id]; }
  const std::vector<double>& value(VarId id) const { return vars_[id].val; }
  const std::vector<std::size_t>& shape(VarId id) const { return vars_[id].shape; }

  void record(std::function<void()> pull) { recs_.push_back(std::move(pull)); }

  // populate leaf gradients from a scalar loss; consumes the tape
  void backward(VarId loss) {
    if (consumed_)
      throw PreconditionError("tape already consumed by backward; re-run the forward pass");
    if (vars_[loss].val.size() != 1)
      throw PreconditionError("backward needs a scalar loss, got shape " + shape_str(vars_[loss].shape));
    if (recs_.empty()) throw PreconditionError("backward on an empty tape");
    consumed_ = true;
    if (vars_[loss].needs_grad) vars_[loss].grad[0] = 1.0;
    for (auto it = recs_.rbegin(); it != recs_.rend(); ++it) (*it)();
    for (auto& v : vars_)
      if (v.leaf && v.needs_grad) v.leaf->accumulate_grad(v.grad);
    recs_.clear();
    vars_.clear();
  }

  bool consumed() const { return consumed_; }

 private:
  std::vector<Var> vars_;
  std::vector<std::function<void()>> recs_;
  bool consumed_ = false;
};

namespace detail {
inline void need_2d(const Tape& t, VarId a, const char* op) {
  if (t.shape(a).size() != 2)
    throw PreconditionError(std::string(op) + ": expected a matrix, got shape " + shape_str(t.shape(a)));
}
}  // namespace detail

// ------------------------------------------------------------- primitives

// (m,k) x (k,n) -> (m,n)
inline VarId matmul(Tape& t, VarId a, VarId b) {
  detail::need_2d(t, a, "matmul");
  detail::need_2d(t, b, "matmul");
  auto sa = t.shape(a), sb = t.shape(b);
  if (sa[1] != sb[0])
    throw PreconditionError("matmul: inner dimensions differ, " + shape_str(sa) + " vs " + shape_str(sb));
  const std::size_t m = sa[0], k = sa[1], n = sb[1];
  bool ng = t.at(a).needs_grad || t.at(b).needs_grad;
  VarId c = t.fresh({m, n}, ng);
  {
    CMap A(t.value(a).data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
    CMap B(t.value(b).data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
    MMap C(t.at(c).val.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
    C.noalias() = A * B;
  }
  if (ng)
    t.record([&t, a, b, c, m, k, n] {
      CMap G(t.at(c).grad.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(n));
      if (t.at(a).needs_grad) {
        CMap B(t.value(b).data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
        MMap GA(t.at(a).grad.data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
        GA.noalias() += G * B.transpose();
      }
      if (t.at(b).needs_grad) {
        CMap A(t.value(a).data(), static_cast<Eigen::Index>(m), static_cast<Eigen::Index>(k));
        MMap GB(t.at(b).grad.data(), static_cast<Eigen::Index>(k), static_cast<Eigen::Index>(n));
        GB.noalias() += A.transpose() * G;
      }
    });
  return c;
}

inline VarId add(Tape& t, VarId a, VarId b) {
  if (t.shape(a) != t.shape(b))
    throw PreconditionError("add: shape mismatch, " + shape_str(t.shape(a)) + " vs " + shape_str(t.shape(b)));
  bool ng = t.at(a).needs_grad || t.at(b).needs_grad;
  VarId c = t.fresh(t.shape(a), ng);
  const auto& va = t.value(a);
  const auto& vb = t.value(b);
  auto& vc = t.at(c).val;
  for (std::size_t i = 0; i < vc.size(); ++i) vc[i] = va[i] + vb[i];
  if (ng)
    t.record([&t, a, b, c] {
      const auto& g = t.at(c).grad;
      if (t.at(a).needs_grad) {
        auto& ga = t.at(a).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (t.at(b).needs_grad) {
        auto& gb = t.at(b).grad;
        for (std::size_t i = 0; i < g.size(); ++i) gb[i] += g[i];
      }
    });
  return c;
}

// (m,n) + (n,) broadcast over rows
inline VarId add_bias(Tape& t, VarId a, VarId b) {
  detail::need_2d(t, a, "add_bias");
  if (t.shape(b).size() != 1 || t.shape(b)[0] != t.shape(a)[1])
    throw PreconditionError("add_bias: bias shape " + shape_str(t.shape(b)) +
                            " does not match matrix " + shape_str(t.shape(a)));
  const std::size_t m = t.shape(a)[0], n = t.shape(a)[1];
  bool ng = t.at(a).needs_grad || t.at(b).needs_grad;
  VarId c = t.fresh({m, n}, ng);
  const auto& va = t.value(a);
  const auto& vb = t.value(b);
  auto& vc = t.at(c).val;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) vc[i * n + j] = va[i * n + j] + vb[j];
  if (ng)
    t.record([&t, a, b, c, m, n] {
      const auto& g = t.at(c).grad;
      if (t.at(a).needs_grad) {
        auto& ga = t.at(a).grad;
        for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
      }
      if (t.at(b).needs_grad) {
        auto& gb = t.at(b).grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gb[j] += g[i * n + j];
      }
    });
  return c;
}

// (m,n) scaled per column by (n,); the desk stand-in for batch norm pairs
// this with add_bias to form the learnable affine
inline VarId col_scale(Tape& t, VarId a, VarId s) {
  detail::need_2d(t, a, "col_scale");
  if (t.shape(s).size() != 1 || t.shape(s)[0] != t.shape(a)[1])
    throw PreconditionError("col_scale: scale shape " + shape_str(t.shape(s)) +
                            " does not match matrix " + shape_str(t.shape(a)));
  const std::size_t m = t.shape(a)[0], n = t.shape(a)[1];
  bool ng = t.at(a).needs_grad || t.at(s).needs_grad;
  VarId c = t.fresh({m, n}, ng);
  const auto& va = t.value(a);
  const auto& vs = t.value(s);
  auto& vc = t.at(c).val;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) vc[i * n + j] = va[i * n + j] * vs[j];
  if (ng)
    t.record([&t, a, s, c, m, n] {
      const auto& g = t.at(c).grad;
      const auto& va = t.value(a);
      const auto& vs = t.value(s);
      if (t.at(a).needs_grad) {
        auto& ga = t.at(a).grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) ga[i * n + j] += g[i * n + j] * vs[j];
      }
      if (t.at(s).needs_grad) {
        auto& gs = t.at(s).grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < n; ++j) gs[j] += g[i * n + j] * va[i * n + j];
      }
    });
  return c;
}

inline VarId scalar_mul(Tape& t, VarId a, double k) {
  VarId c = t.fresh(t.shape(a), t.at(a).needs_grad);
  const auto& va = t.value(a);
  auto& vc = t.at(c).val;
  for (std::size_t i = 0; i < vc.size(); ++i) vc[i] = k * va[i];
  if (t.at(a).needs_grad)
    t.record([&t, a, c, k] {
      const auto& g = t.at(c).grad;
      auto& ga = t.at(a).grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += k * g[i];
    });
  return c;
}

inline VarId leaky_relu(Tape& t, VarId a, double slope) {
  VarId c = t.fresh(t.shape(a), t.at(a).needs_grad);
  const auto& va = t.value(a);
  auto& vc = t.at(c).val;
  for (std::size_t i = 0; i < vc.size(); ++i) vc[i] = va[i] >= 0 ? va[i] : slope * va[i];
  if (t.at(a).needs_grad)
    t.record([&t, a, c, slope] {
      const auto& g = t.at(c).grad;
      const auto& va = t.value(a);
      auto& ga = t.at(a).grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += (va[i] >= 0 ? 1.0 : slope) * g[i];
    });
  return c;
}

inline VarId reshape(Tape& t, VarId a, std::vector<std::size_t> shape) {
  std::size_t numel = std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>{});
  if (numel != t.value(a).size())
    throw PreconditionError("reshape: " + shape_str(t.shape(a)) + " has different element count than " +
                            shape_str(shape));
  VarId c = t.fresh(shape, t.at(a).needs_grad);
  t.at(c).val = t.value(a);
  if (t.at(a).needs_grad)
    t.record([&t, a, c] {
      const auto& g = t.at(c).grad;
      auto& ga = t.at(a).grad;
      for (std::size_t i = 0; i < g.size(); ++i) ga[i] += g[i];
    });
  return c;
}

// column-wise concatenation of two matrices with equal row counts
inline VarId concat(Tape& t, VarId a, VarId b) {
  detail::need_2d(t, a, "concat");
  detail::need_2d(t, b, "concat");
  if (t.shape(a)[0] != t.shape(b)[0])
    throw PreconditionError("concat: row counts differ, " + shape_str(t.shape(a)) + " vs " +
                            shape_str(t.shape(b)));
  const std::size_t m = t.shape(a)[0], p = t.shape(a)[1], q = t.shape(b)[1];
  bool ng = t.at(a).needs_grad || t.at(b).needs_grad;
  VarId c = t.fresh({m, p + q}, ng);
  const auto& va = t.value(a);
  const auto& vb = t.value(b);
  auto& vc = t.at(c).val;
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = 0; j < p; ++j) vc[i * (p + q) + j] = va[i * p + j];
    for (std::size_t j = 0; j < q; ++j) vc[i * (p + q) + p + j] = vb[i * q + j];
  }
  if (ng)
    t.record([&t, a, b, c, m, p, q] {
      const auto& g = t.at(c).grad;
      if (t.at(a).needs_grad) {
        auto& ga = t.at(a).grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < p; ++j) ga[i * p + j] += g[i * (p + q) + j];
      }
      if (t.at(b).needs_grad) {
        auto& gb = t.at(b).grad;
        for (std::size_t i = 0; i < m; ++i)
          for (std::size_t j = 0; j < q; ++j) gb[i * q + j] += g[i * (p + q) + p + j];
      }
    });
  return c;
}

// column slice [lo, hi) of a matrix
inline VarId slice(Tape& t, VarId a, std::size_t lo, std::size_t hi) {
  detail::need_2d(t, a, "slice");
  const std::size_t m = t.shape(a)[0], n = t.shape(a)[1];
  if (lo >= hi || hi > n)
    throw PreconditionError("slice: bad column range [" + std::to_string(lo) + "," +
                            std::to_string(hi) + ") for shape " + shape_str(t.shape(a)));
  const std::size_t w = hi - lo;
  VarId c = t.fresh({m, w}, t.at(a).needs_grad);
  const auto& va = t.value(a);
  auto& vc = t.at(c).val;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < w; ++j) vc[i * w + j] = va[i * n + lo + j];
  if (t.at(a).needs_grad)
    t.record([&t, a, c, m, n, lo, w] {
      const auto& g = t.at(c).grad;
      auto& ga = t.at(a).grad;
      for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < w; ++j) ga[i * n + lo + j] += g[i * w + j];
    });
  return c;
}

inline VarId sum(Tape& t, VarId a) {
  VarId c = t.fresh({1}, t.at(a).needs_grad);
  const auto& va = t.value(a);
  double s = 0;
  for (double v : va) s += v;
  t.at(c).val[0] = s;
  if (t.at(a).needs_grad)
    t.record([&t, a, c] {
      double g = t.at(c).grad[0];
      auto& ga = t.at(a).grad;
      for (auto& v : ga) v += g;
    });
  return c;
}

// mean over all elements of (pred - target)^2
inline VarId mse(Tape& t, VarId pred, VarId target) {
  if (t.shape(pred) != t.shape(target))
    throw PreconditionError("mse: shape mismatch, " + shape_str(t.shape(pred)) + " vs " +
                            shape_str(t.shape(target)));
  bool ng = t.at(pred).needs_grad || t.at(target).needs_grad;
  VarId c = t.fresh({1}, ng);
  const auto& vp = t.value(pred);
  const auto& vt = t.value(target);
  const double inv_n = 1.0 / static_cast<double>(vp.size());
  double s = 0;
  for (std::size_t i = 0; i < vp.size(); ++i) {
    double d = vp[i] - vt[i];
    s += d * d;
  }
  t.at(c).val[0] = s * inv_n;
  if (ng)
    t.record([&t, pred, target, c, inv_n] {
      double g = t.at(c).grad[0];
      const auto& vp = t.value(pred);
      const auto& vt = t.value(target);
      if (t.at(pred).needs_grad) {
        auto& gp = t.at(pred).grad;
        for (std::size_t i = 0; i < vp.size(); ++i) gp[i] += 2.0 * inv_n * (vp[i] - vt[i]) * g;
      }
      if (t.at(target).needs_grad) {
        auto& gt = t.at(target).grad;
        for (std::size_t i = 0; i < vp.size(); ++i) gt[i] -= 2.0 * inv_n * (vp[i] - vt[i]) * g;
      }
    });
  return c;
}

}  // namespace addidec::ad
