#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace addidec {

using VecFn = std::function<std::vector<double>(const std::vector<double>&)>;
using ScalarFn = std::function<double(const std::vector<double>&)>;

// central differences; J is m x n row-major, column j = df/dx_j
inline std::vector<double> finite_diff_jacobian(const VecFn& f, const std::vector<double>& x,
                                                double h, std::size_t* out_m = nullptr) {
  const std::size_t n = x.size();
  std::vector<double> xp = x, xm = x;
  std::vector<double> J;
  std::size_t m = 0;
  for (std::size_t j = 0; j < n; ++j) {
    xp[j] = x[j] + h;
    xm[j] = x[j] - h;
    std::vector<double> fp = f(xp), fm = f(xm);
    if (j == 0) {
      m = fp.size();
      J.assign(m * n, 0.0);
    }
    for (std::size_t i = 0; i < m; ++i) J[i * n + j] = (fp[i] - fm[i]) / (2 * h);
    xp[j] = x[j];
    xm[j] = x[j];
  }
  if (out_m) *out_m = m;
  return J;
}

// central second differences, symmetric by construction
inline std::vector<double> finite_diff_hessian(const ScalarFn& f, const std::vector<double>& x,
                                               double h) {
  const std::size_t n = x.size();
  std::vector<double> H(n * n, 0.0);
  std::vector<double> p = x;
  const double f0 = f(x);
  for (std::size_t i = 0; i < n; ++i) {
    p[i] = x[i] + h;
    double fp = f(p);
    p[i] = x[i] - h;
    double fm = f(p);
    p[i] = x[i];
    H[i * n + i] = (fp - 2 * f0 + fm) / (h * h);
    for (std::size_t j = i + 1; j < n; ++j) {
      p[i] = x[i] + h;
      p[j] = x[j] + h;
      double fpp = f(p);
      p[j] = x[j] - h;
      double fpm = f(p);
      p[i] = x[i] - h;
      double fmm = f(p);
      p[j] = x[j] + h;
      double fmp = f(p);
      p[i] = x[i];
      p[j] = x[j];
      double v = (fpp - fpm - fmp + fmm) / (4 * h * h);
      H[i * n + j] = v;
      H[j * n + i] = v;
    }
  }
  return H;
}

}  // namespace addidec
