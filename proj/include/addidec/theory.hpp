#pragma once

#include <Eigen/Dense>
#include <json.hpp>

#include <array>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <limits>
#include <string>
#include <vector>

#include "addidec/errors.hpp"

namespace addidec {

// Canonical additive pair used for the numerical verification of the
// sufficient-nonlinearity condition: two stacks of quartic monomials.
inline std::array<double, 4> example_f1(double z1) {
  return {z1, z1 * z1, z1 * z1 * z1, z1 * z1 * z1 * z1};
}

inline std::array<double, 4> example_f2(double z2) {
  const double v = z2 + 1.0;
  return {v, v * v, v * v * v, v * v * v * v};
}

inline std::vector<double> example_f(const std::vector<double>& z) {
  if (z.size() != 2) throw PreconditionError("example_f expects a 2-vector");
  const auto a = example_f1(z[0]);
  const auto b = example_f2(z[1]);
  std::vector<double> out(4);
  for (int i = 0; i < 4; ++i) out[i] = a[i] + b[i];
  return out;
}

// 4x2 Jacobian [D1 f^(1) | D2 f^(2)], row-major
inline std::array<double, 8> df_matrix(const std::vector<double>& z) {
  if (z.size() != 2) throw PreconditionError("df_matrix expects a 2-vector");
  const double u = z[0], v = z[1] + 1.0;
  return {1.0,         1.0,          //
          2.0 * u,     2.0 * v,      //
          3.0 * u * u, 3.0 * v * v,  //
          4.0 * u * u * u, 4.0 * v * v * v};
}

// columns [D1 f^(1), D^2_11 f^(1), D2 f^(2), D^2_22 f^(2)], row-major 4x4;
// every column is a function of its own block variable only
inline std::array<double, 16> w_matrix(const std::vector<double>& z) {
  if (z.size() != 2) throw PreconditionError("w_matrix expects a 2-vector");
  const double u = z[0], v = z[1] + 1.0;
  return {1.0,             0.0,           1.0,             0.0,            //
          2.0 * u,         2.0,           2.0 * v,         2.0,            //
          3.0 * u * u,     6.0 * u,       3.0 * v * v,     6.0 * v,        //
          4.0 * u * u * u, 12.0 * u * u,  4.0 * v * v * v, 12.0 * v * v};
}

// cofactor expansion along the first row; columns of exact zeros yield an
// exact zero determinant
inline double det4(const std::array<double, 16>& m) {
  auto det3 = [&](int c0, int c1, int c2) {
    auto e = [&](int r, int c) { return m[static_cast<std::size_t>(4 * r + c)]; };
    return e(1, c0) * (e(2, c1) * e(3, c2) - e(2, c2) * e(3, c1)) -
           e(1, c1) * (e(2, c0) * e(3, c2) - e(2, c2) * e(3, c0)) +
           e(1, c2) * (e(2, c0) * e(3, c1) - e(2, c1) * e(3, c0));
  };
  return m[0] * det3(1, 2, 3) - m[1] * det3(0, 2, 3) + m[2] * det3(0, 1, 3) -
         m[3] * det3(0, 1, 2);
}

// det(Df^T Df) via the 2x2 Gram determinant
inline double det_df_gram(const std::vector<double>& z) {
  const auto J = df_matrix(z);
  double g11 = 0, g22 = 0, g12 = 0;
  for (int i = 0; i < 4; ++i) {
    g11 += J[static_cast<std::size_t>(2 * i)] * J[static_cast<std::size_t>(2 * i)];
    g22 += J[static_cast<std::size_t>(2 * i + 1)] * J[static_cast<std::size_t>(2 * i + 1)];
    g12 += J[static_cast<std::size_t>(2 * i)] * J[static_cast<std::size_t>(2 * i + 1)];
  }
  return g11 * g22 - g12 * g12;
}

inline int matrix_rank(const double* data, int rows, int cols) {
  Eigen::MatrixXd M(rows, cols);
  for (int r = 0; r < rows; ++r)
    for (int c = 0; c < cols; ++c) M(r, c) = data[r * cols + c];
  return static_cast<int>(Eigen::FullPivLU<Eigen::MatrixXd>(M).rank());
}

// ------------------------------------------------------------------ grid scan

struct GridScan {
  double delta = 0.0025;
  bool wide = false;  // diagnostic scan over the enclosing square
  std::vector<double> z1_axis, z2_axis;
  std::vector<double> det_w, det_jtj;  // n1 x n2, z2 fastest
  double min_abs_det_w = std::numeric_limits<double>::infinity();
  double min_det_jtj = std::numeric_limits<double>::infinity();
  std::array<double, 2> argmin_w{}, argmin_jtj{};
};

namespace detail {
// axis lo + i*delta; halving delta keeps shared points bitwise identical
inline std::vector<double> scan_axis(double lo, double hi, double delta) {
  std::vector<double> axis;
  for (std::size_t i = 0;; ++i) {
    const double v = lo + static_cast<double>(i) * delta;
    if (v > hi + 1e-12) break;
    axis.push_back(v);
  }
  // i*delta accumulates (or fuses) past the exact endpoint; snap it back so
  // the grid closes on hi itself
  if (std::abs(axis.back() - hi) <= 1e-12) axis.back() = hi;
  return axis;
}
}  // namespace detail

// |det W| and det(Df^T Df) over the square [-1,0]x[0,1] (the domain the
// diffeomorphism claim concerns); wide=true scans [-1.1,1.1]^2 instead, as a
// diagnostic only — W degenerates where z1 = z2 + 1, which that square contains.
inline GridScan scan_sufficient_nonlinearity(double delta, bool wide = false) {
  if (!(delta > 0.0) || delta > 0.1)
    throw PreconditionError("scan step must lie in (0, 0.1]");
  GridScan s;
  s.delta = delta;
  s.wide = wide;
  s.z1_axis = detail::scan_axis(wide ? -1.1 : -1.0, wide ? 1.1 : 0.0, delta);
  s.z2_axis = detail::scan_axis(wide ? -1.1 : 0.0, wide ? 1.1 : 1.0, delta);
  const std::size_t n1 = s.z1_axis.size(), n2 = s.z2_axis.size();
  s.det_w.resize(n1 * n2);
  s.det_jtj.resize(n1 * n2);
  for (std::size_t i = 0; i < n1; ++i)
    for (std::size_t j = 0; j < n2; ++j) {
      const std::vector<double> z = {s.z1_axis[i], s.z2_axis[j]};
      const double dw = det4(w_matrix(z));
      const double dj = det_df_gram(z);
      s.det_w[i * n2 + j] = dw;
      s.det_jtj[i * n2 + j] = dj;
      if (std::abs(dw) < s.min_abs_det_w) {
        s.min_abs_det_w = std::abs(dw);
        s.argmin_w = {z[0], z[1]};
      }
      if (dj < s.min_det_jtj) {
        s.min_det_jtj = dj;
        s.argmin_jtj = {z[0], z[1]};
      }
    }
  return s;
}

inline void grid_scan_write_csv(const GridScan& s, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open \"" + path + "\" for writing");
  auto num = [](double v) { return nlohmann::json(v).dump(); };
  out << "z1,z2,det_w,det_jtj\n";
  const std::size_t n2 = s.z2_axis.size();
  for (std::size_t i = 0; i < s.z1_axis.size(); ++i)
    for (std::size_t j = 0; j < n2; ++j)
      out << num(s.z1_axis[i]) << ',' << num(s.z2_axis[j]) << ','
          << num(s.det_w[i * n2 + j]) << ',' << num(s.det_jtj[i * n2 + j]) << '\n';
  if (!out) throw DataError("failed while writing \"" + path + "\"");
}

inline nlohmann::json scan_summary_json(const GridScan& s) {
  return nlohmann::json{{"delta", s.delta},
                        {"wide", s.wide},
                        {"n_z1", s.z1_axis.size()},
                        {"n_z2", s.z2_axis.size()},
                        {"min_abs_det_w", s.min_abs_det_w},
                        {"argmin_det_w", {s.argmin_w[0], s.argmin_w[1]}},
                        {"min_det_jtj", s.min_det_jtj},
                        {"argmin_det_jtj", {s.argmin_jtj[0], s.argmin_jtj[1]}}};
}

// ---------------------------------------------------------- injectivity probe

struct InjectivityReport {
  double delta = 0.01;
  double tolerance = 1e-9;
  std::size_t n_points = 0, n_pairs = 0, collisions = 0;
  double min_image_separation = std::numeric_limits<double>::infinity();
  std::array<double, 2> worst_a{}, worst_b{};
};

// Brute-force check that the first two components (f1, f2) already separate
// the square: any two grid points further than 2*delta apart must map to
// (f1, f2) values at least `tolerance` apart.
inline InjectivityReport injectivity_probe(double delta) {
  if (!(delta > 0.0) || delta > 0.05)
    throw PreconditionError("probe step must lie in (0, 0.05]");
  InjectivityReport rep;
  rep.delta = delta;
  const std::vector<double> a1 = detail::scan_axis(-1.0, 0.0, delta);
  const std::vector<double> a2 = detail::scan_axis(0.0, 1.0, delta);
  std::vector<double> z1s, z2s, f1s, f2s;
  for (double u : a1)
    for (double w : a2) {
      z1s.push_back(u);
      z2s.push_back(w);
      const double v = w + 1.0;
      f1s.push_back(u + v);
      f2s.push_back(u * u + v * v);
    }
  rep.n_points = z1s.size();
  const double far2 = 4.0 * delta * delta;
  const double tol2 = rep.tolerance * rep.tolerance;
  double best2 = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < rep.n_points; ++i)
    for (std::size_t j = i + 1; j < rep.n_points; ++j) {
      const double dz1 = z1s[i] - z1s[j], dz2 = z2s[i] - z2s[j];
      if (dz1 * dz1 + dz2 * dz2 <= far2) continue;  // nearby pairs are exempt
      ++rep.n_pairs;
      const double d1 = f1s[i] - f1s[j], d2 = f2s[i] - f2s[j];
      const double sep2 = d1 * d1 + d2 * d2;
      if (sep2 < best2) {
        best2 = sep2;
        rep.worst_a = {z1s[i], z2s[i]};
        rep.worst_b = {z1s[j], z2s[j]};
      }
      if (sep2 < tol2) ++rep.collisions;
    }
  rep.min_image_separation = std::sqrt(best2);
  return rep;
}

}  // namespace addidec
