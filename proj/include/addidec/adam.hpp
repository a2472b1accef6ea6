#pragma once

#include <cmath>
#include <cstddef>
#include <vector>

#include "addidec/errors.hpp"
#include "addidec/tensor.hpp"

namespace addidec {

// Adam with decoupled weight decay. beta/eps defaults are the conventional
// constants; lr and weight_decay carry the training defaults.
struct AdamState {
  double lr = 5e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 5e-4;
  std::size_t step = 0;
  std::vector<std::vector<double>> m, v;

  void init(const std::vector<ad::Tensor*>& params) {
    m.clear();
    v.clear();
    for (const auto* p : params) {
      m.emplace_back(p->numel(), 0.0);
      v.emplace_back(p->numel(), 0.0);
    }
    step = 0;
  }
};

inline void adam_step(const std::vector<ad::Tensor*>& params, AdamState& st) {
  if (st.m.size() != params.size()) throw PreconditionError("adam state not initialized for these parameters");
  ++st.step;
  const double bc1 = 1.0 - std::pow(st.beta1, static_cast<double>(st.step));
  const double bc2 = 1.0 - std::pow(st.beta2, static_cast<double>(st.step));
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    ad::Tensor& p = *params[pi];
    if (!p.requires_grad) continue;
    if (p.grad.size() != p.numel())
      throw PreconditionError("missing gradient for parameter \"" + p.name + "\"");
    auto& m = st.m[pi];
    auto& v = st.v[pi];
    for (std::size_t i = 0; i < p.data.size(); ++i) {
      double g = p.grad[i];
      if (!std::isfinite(g))
        throw NumericError("non-finite gradient poisons parameter \"" + p.name + "\"");
      m[i] = st.beta1 * m[i] + (1.0 - st.beta1) * g;
      v[i] = st.beta2 * v[i] + (1.0 - st.beta2) * g * g;
      double mhat = m[i] / bc1;
      double vhat = v[i] / bc2;
      p.data[i] -= st.lr * (mhat / (std::sqrt(vhat) + st.eps) + st.weight_decay * p.data[i]);
    }
  }
}

}  // namespace addidec
