#pragma once

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <limits>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

#include "addidec/errors.hpp"
#include "addidec/models.hpp"
#include "addidec/partition.hpp"
#include "addidec/rng.hpp"
#include "addidec/scenegen.hpp"

namespace addidec {

// ---------------------------------------------------------------- spearman

// fractional average ranks, 1-based; ties share the mean of their positions
inline std::vector<double> fractional_ranks(const std::vector<double>& v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> r(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && v[idx[j + 1]] == v[idx[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t k = i; k <= j; ++k) r[idx[k]] = rank;
    i = j + 1;
  }
  return r;
}

inline double pearson(const std::vector<double>& a, const std::vector<double>& b) {
  const std::size_t n = a.size();
  double ma = 0, mb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    ma += a[i];
    mb += b[i];
  }
  ma /= static_cast<double>(n);
  mb /= static_cast<double>(n);
  double cov = 0, va = 0, vb = 0;
  for (std::size_t i = 0; i < n; ++i) {
    cov += (a[i] - ma) * (b[i] - mb);
    va += (a[i] - ma) * (a[i] - ma);
    vb += (b[i] - mb) * (b[i] - mb);
  }
  if (va == 0 || vb == 0) throw UndefinedStatError("correlation undefined for constant input");
  return cov / std::sqrt(va * vb);
}

inline double spearman(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw PreconditionError("spearman: length mismatch");
  if (x.size() < 2) throw PreconditionError("spearman: need at least 2 samples");
  return pearson(fractional_ranks(x), fractional_ranks(y));
}

// -------------------------------------------------------------------- LMS

struct LmsOutcome {
  double value = 0.0;
  std::vector<int> assignment;   // true block -> learned block
  std::vector<int> permutation;  // true coordinate -> learned coordinate
};

namespace detail {
// order-preserving index map induced by a block assignment
inline std::vector<int> index_permutation(const std::vector<std::vector<int>>& rows,
                                          const std::vector<std::vector<int>>& cols,
                                          const std::vector<int>& assign, int d) {
  std::vector<int> perm(static_cast<std::size_t>(d), -1);
  for (std::size_t b = 0; b < rows.size(); ++b) {
    std::vector<int> src = rows[b], dst = cols[static_cast<std::size_t>(assign[b])];
    std::sort(src.begin(), src.end());
    std::sort(dst.begin(), dst.end());
    for (std::size_t k = 0; k < src.size(); ++k)
      perm[static_cast<std::size_t>(src[k])] = dst[k];
  }
  return perm;
}

// max over bijections between equal-sized row and column blocks; candidates
// visited in lexicographic order so ties keep the smallest assignment
inline LmsOutcome lms_over_blocks(const std::vector<std::vector<double>>& s,
                                  const std::vector<std::vector<int>>& rows,
                                  const std::vector<std::vector<int>>& cols, int d) {
  const std::size_t l = rows.size();
  if (s.size() != l) throw PreconditionError("score matrix rows do not match block count");
  for (const auto& row : s)
    if (row.size() != cols.size()) throw PreconditionError("score matrix is not square over blocks");

  std::vector<int> cand(l);
  std::iota(cand.begin(), cand.end(), 0);
  LmsOutcome best;
  best.value = -std::numeric_limits<double>::infinity();
  do {
    bool ok = true;
    for (std::size_t b = 0; b < l && ok; ++b)
      ok = rows[b].size() == cols[static_cast<std::size_t>(cand[b])].size();
    if (!ok) continue;
    double v = 0;
    for (std::size_t b = 0; b < l; ++b) v += s[b][static_cast<std::size_t>(cand[b])];
    v /= static_cast<double>(l);
    if (v > best.value) {
      best.value = v;
      best.assignment = cand;
    }
  } while (std::next_permutation(cand.begin(), cand.end()));
  if (best.assignment.empty()) throw PreconditionError("no size-compatible block assignment");
  best.permutation = index_permutation(rows, cols, best.assignment, d);
  return best;
}
}  // namespace detail

inline LmsOutcome lms(const std::vector<std::vector<double>>& s, const Partition& p) {
  return detail::lms_over_blocks(s, p.blocks, p.blocks, p.d_z);
}

// |spearman| between every pair of true/learned coordinates; a constant
// coordinate contributes score 0 and bumps the warning counter
inline std::vector<std::vector<double>> spearman_abs_scores(const std::vector<double>& z_true,
                                                            const std::vector<double>& z_hat,
                                                            std::size_t n, int d,
                                                            std::size_t* warnings = nullptr) {
  auto col = [n, d](const std::vector<double>& m, int j) {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = m[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
    return c;
  };
  std::vector<std::vector<double>> s(static_cast<std::size_t>(d),
                                     std::vector<double>(static_cast<std::size_t>(d), 0.0));
  for (int i = 0; i < d; ++i) {
    std::vector<double> ti = col(z_true, i);
    for (int j = 0; j < d; ++j) {
      try {
        s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] =
            std::abs(spearman(ti, col(z_hat, j)));
      } catch (const UndefinedStatError&) {
        if (warnings) ++*warnings;
      }
    }
  }
  return s;
}

inline LmsOutcome lms_spear(const std::vector<double>& z_true, const std::vector<double>& z_hat,
                            std::size_t n, int d, std::size_t* warnings = nullptr) {
  return lms(spearman_abs_scores(z_true, z_hat, n, d, warnings), Partition::singletons(d));
}

// ---------------------------------------------------------- regression tree

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  double value = 0.0;
  int left = -1, right = -1;
};

// CART with greedy variance-reduction splits; thresholds at midpoints of
// consecutive sorted unique values, ties broken toward the lowest feature
// index then the lowest threshold, so identical data grows identical trees
class RegressionTree {
 public:
  void fit(const std::vector<double>& X, std::size_t n, std::size_t k,
           const std::vector<double>& y, int max_depth = 10) {
    if (n < 2) throw PreconditionError("regression tree needs at least 2 samples");
    if (X.size() != n * k || y.size() != n)
      throw PreconditionError("regression tree: data shape mismatch");
    nodes_.clear();
    k_ = k;
    std::vector<std::size_t> idx(n);
    std::iota(idx.begin(), idx.end(), std::size_t{0});
    grow(X, y, idx, 0, max_depth);
  }

  double predict_one(const double* x) const {
    int at = 0;
    while (nodes_[static_cast<std::size_t>(at)].feature >= 0) {
      const TreeNode& nd = nodes_[static_cast<std::size_t>(at)];
      at = x[nd.feature] <= nd.threshold ? nd.left : nd.right;
    }
    return nodes_[static_cast<std::size_t>(at)].value;
  }

  std::vector<double> predict(const std::vector<double>& X, std::size_t n) const {
    std::vector<double> out(n);
    for (std::size_t i = 0; i < n; ++i) out[i] = predict_one(&X[i * k_]);
    return out;
  }

  const std::vector<TreeNode>& nodes() const { return nodes_; }

 private:
  int grow(const std::vector<double>& X, const std::vector<double>& y,
           std::vector<std::size_t>& idx, int depth, int max_depth) {
    const std::size_t m = idx.size();
    double mean = 0;
    for (std::size_t i : idx) mean += y[i];
    mean /= static_cast<double>(m);
    double sse = 0;
    for (std::size_t i : idx) sse += (y[i] - mean) * (y[i] - mean);

    const int me = static_cast<int>(nodes_.size());
    nodes_.push_back(TreeNode{});
    nodes_[static_cast<std::size_t>(me)].value = mean;
    if (depth >= max_depth || m < 2 || sse == 0) return me;

    int best_f = -1;
    double best_thr = 0, best_cost = sse;
    std::vector<std::size_t> sorted = idx;
    for (std::size_t f = 0; f < k_; ++f) {
      std::sort(sorted.begin(), sorted.end(),
                [&](std::size_t a, std::size_t b) { return X[a * k_ + f] < X[b * k_ + f]; });
      double sy = 0, syy = 0;
      std::vector<double> py(m + 1, 0), pyy(m + 1, 0);
      for (std::size_t i = 0; i < m; ++i) {
        sy += y[sorted[i]];
        syy += y[sorted[i]] * y[sorted[i]];
        py[i + 1] = sy;
        pyy[i + 1] = syy;
      }
      for (std::size_t i = 1; i < m; ++i) {
        const double xl = X[sorted[i - 1] * k_ + f], xr = X[sorted[i] * k_ + f];
        if (xl == xr) continue;
        const double nl = static_cast<double>(i), nr = static_cast<double>(m - i);
        const double ssl = pyy[i] - py[i] * py[i] / nl;
        const double ssr = (pyy[m] - pyy[i]) - (py[m] - py[i]) * (py[m] - py[i]) / nr;
        const double cost = ssl + ssr;
        if (cost < best_cost) {
          best_cost = cost;
          best_f = static_cast<int>(f);
          best_thr = 0.5 * (xl + xr);
        }
      }
    }
    if (best_f < 0) return me;  // no informative split anywhere

    std::vector<std::size_t> li, ri;
    for (std::size_t i : idx)
      (X[i * k_ + static_cast<std::size_t>(best_f)] <= best_thr ? li : ri).push_back(i);
    nodes_[static_cast<std::size_t>(me)].feature = best_f;
    nodes_[static_cast<std::size_t>(me)].threshold = best_thr;
    const int lc = grow(X, y, li, depth + 1, max_depth);
    nodes_[static_cast<std::size_t>(me)].left = lc;
    const int rc = grow(X, y, ri, depth + 1, max_depth);
    nodes_[static_cast<std::size_t>(me)].right = rc;
    return me;
  }

  std::vector<TreeNode> nodes_;
  std::size_t k_ = 0;
};

inline double r2_score(const std::vector<double>& y, const std::vector<double>& pred) {
  if (y.size() != pred.size() || y.empty()) throw PreconditionError("r2: shape mismatch");
  double mean = 0;
  for (double v : y) mean += v;
  mean /= static_cast<double>(y.size());
  double sst = 0, sse = 0;
  for (std::size_t i = 0; i < y.size(); ++i) {
    sst += (y[i] - mean) * (y[i] - mean);
    sse += (y[i] - pred[i]) * (y[i] - pred[i]);
  }
  if (sst == 0) throw UndefinedStatError("R^2 undefined on a zero-variance target");
  return 1.0 - sse / sst;
}

// 75/25 held-out R^2 of a depth-limited tree, seeded split
inline double tree_holdout_r2(const std::vector<double>& X, std::size_t n, std::size_t k,
                              const std::vector<double>& y, std::uint64_t seed,
                              int max_depth = 10) {
  if (n < 4) throw PreconditionError("held-out R^2 needs at least 4 samples");
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  shuffle(idx, rng);
  const std::size_t n_test = n / 4;
  std::vector<double> Xtr, ytr, Xte, yte;
  for (std::size_t i = 0; i < n; ++i) {
    auto& xb = i < n_test ? Xte : Xtr;
    auto& yb = i < n_test ? yte : ytr;
    for (std::size_t j = 0; j < k; ++j) xb.push_back(X[idx[i] * k + j]);
    yb.push_back(y[idx[i]]);
  }
  RegressionTree tree;
  tree.fit(Xtr, ytr.size(), k, ytr, max_depth);
  return r2_score(yte, tree.predict(Xte, yte.size()));
}

// ---------------------------------------------------------------- LMS_tree

struct TreeLmsOutcome {
  LmsOutcome lms;
  std::vector<std::vector<double>> raw_scores;   // pre-clamp diagnostics
  std::vector<std::vector<int>> learned_blocks;  // learned-side partition used
  std::size_t warnings = 0;
};

// s[B][B'] = held-out R^2 of trees predicting each coordinate of true block B
// from the learned coordinates of block B', averaged over the block; negative
// R^2 is clamped to 0 in the score matrix (kept raw in diagnostics). With
// search_partitions set, all equal-block-size partitions of the learned
// coordinates are tried and the best LMS wins.
inline TreeLmsOutcome lms_tree(const std::vector<double>& z_true, const std::vector<double>& z_hat,
                               std::size_t n, int d, const Partition& p, bool search_partitions,
                               std::uint64_t seed) {
  if (p.d_z != d) throw PreconditionError("partition does not cover d_z");
  std::vector<std::vector<std::vector<int>>> candidates;
  if (search_partitions) {
    const std::size_t bs = p.blocks[0].size();
    for (const auto& b : p.blocks)
      if (b.size() != bs)
        throw PreconditionError("partition search needs equal-sized blocks");
    candidates = equal_size_partitions(d, static_cast<int>(bs));
  } else {
    candidates = {p.blocks};
  }

  auto col = [n, d](const std::vector<double>& m, int j) {
    std::vector<double> c(n);
    for (std::size_t i = 0; i < n; ++i) c[i] = m[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(j)];
    return c;
  };

  TreeLmsOutcome best;
  best.lms.value = -std::numeric_limits<double>::infinity();
  const std::size_t l = p.blocks.size();
  for (const auto& Q : candidates) {
    std::vector<std::vector<double>> raw(l, std::vector<double>(l, 0.0));
    std::vector<std::vector<double>> clamped(l, std::vector<double>(l, 0.0));
    std::size_t warns = 0;
    for (std::size_t bi = 0; bi < l; ++bi) {
      for (std::size_t bj = 0; bj < l; ++bj) {
        std::vector<double> Xb(n * Q[bj].size());
        for (std::size_t i = 0; i < n; ++i)
          for (std::size_t j = 0; j < Q[bj].size(); ++j)
            Xb[i * Q[bj].size() + j] =
                z_hat[i * static_cast<std::size_t>(d) + static_cast<std::size_t>(Q[bj][j])];
        double acc_raw = 0, acc = 0;
        for (std::size_t ci = 0; ci < p.blocks[bi].size(); ++ci) {
          const int coord = p.blocks[bi][ci];
          try {
            double r2 = tree_holdout_r2(Xb, n, Q[bj].size(), col(z_true, coord),
                                        mix_seed(seed, (bi * l + bj) * static_cast<std::size_t>(d) +
                                                           static_cast<std::size_t>(coord)));
            acc_raw += r2;
            acc += std::max(0.0, r2);
          } catch (const UndefinedStatError&) {
            ++warns;
          }
        }
        raw[bi][bj] = acc_raw / static_cast<double>(p.blocks[bi].size());
        clamped[bi][bj] = acc / static_cast<double>(p.blocks[bi].size());
      }
    }
    LmsOutcome out = detail::lms_over_blocks(clamped, p.blocks, Q, d);
    if (out.value > best.lms.value) {
      best.lms = out;
      best.raw_scores = raw;
      best.learned_blocks = Q;
      best.warnings = warns;
    }
  }
  return best;
}

// ------------------------------------------------------------- RMSE / OOS

inline double rmse(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) throw PreconditionError("rmse: shape mismatch");
  double sse = 0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    sse += d * d;
  }
  return std::sqrt(sse / static_cast<double>(a.size()));
}

// uniform draws from the excluded quadrant (0.5,1)^2 of the L support
inline std::vector<double> sample_oos_scalarl(std::size_t n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("out-of-support sample count must be >= 1");
  std::vector<double> z(n * 2);
  for (std::size_t i = 0; i < n; ++i) {
    Rng rng(mix_seed(seed, i));
    double a, b;
    do {
      a = rng.uniform(0.5, 1.0);
      b = rng.uniform(0.5, 1.0);
    } while (!(a > 0.5 && b > 0.5));  // the quadrant boundary stays in-support
    z[2 * i] = a;
    z[2 * i + 1] = b;
  }
  return z;
}

struct OosReport {
  double rmse = 0.0;
  double lms = 0.0;
  std::vector<int> permutation;
  std::size_t warnings = 0;
};

// reconstruction quality on the never-trained quadrant: render, autoencode,
// score pixels (normalized space) and latent recovery on those samples only
inline OosReport oos_eval(const Model& model, const SupportSpec& support, std::size_t n,
                          std::uint64_t seed) {
  if (support.kind != SupportKind::ScalarL)
    throw CapabilityError("out-of-support evaluation is defined for the scalarl support only");
  support.validate();
  if (static_cast<std::size_t>(support.pixels()) != model.cfg.d_x())
    throw PreconditionError("support resolution does not match the model");

  const std::vector<double> z_true = sample_oos_scalarl(n, seed);
  const std::size_t dx = model.cfg.d_x();
  const NormStats ns;
  std::vector<double> z_hat(n * 2);
  double sse = 0;
  const std::size_t slab = 512;
  for (std::size_t lo = 0; lo < n; lo += slab) {
    const std::size_t rows = std::min(slab, n - lo);
    std::vector<double> x(rows * dx);
    for (std::size_t r = 0; r < rows; ++r) {
      std::vector<double> img = render(&z_true[(lo + r) * 2], support);
      normalize(img, support, ns);
      std::copy(img.begin(), img.end(), x.begin() + static_cast<std::ptrdiff_t>(r * dx));
    }
    std::vector<double> z = encode(model, x, rows);
    std::copy(z.begin(), z.end(), z_hat.begin() + static_cast<std::ptrdiff_t>(lo * 2));
    std::vector<double> rec = decode(model, z, rows);
    for (std::size_t i = 0; i < rec.size(); ++i) {
      const double dv = rec[i] - x[i];
      sse += dv * dv;
    }
  }

  OosReport rep;
  rep.rmse = std::sqrt(sse / (static_cast<double>(n) * static_cast<double>(dx)));
  LmsOutcome lo = lms_spear(z_true, z_hat, n, 2, &rep.warnings);
  rep.lms = lo.value;
  rep.permutation = lo.permutation;
  return rep;
}

// ------------------------------------------------------------- report IO

struct MetricsReport {
  std::string dataset;
  std::string decoder_kind;
  std::uint64_t seed = 0;
  double rmse = 0.0;
  double lms = 0.0;
  std::string lms_kind;  // "spear" | "tree"
  std::optional<double> oos_rmse, oos_lms;
  std::string permutation;

  static std::string csv_header() {
    return "dataset,decoder_kind,seed,rmse,lms,oos_rmse,oos_lms,permutation";
  }

  std::string csv_row() const {
    // shortest round-trip formatting, same as the JSON dump
    auto num = [](double v) { return nlohmann::json(v).dump(); };
    std::string row = dataset + "," + decoder_kind + "," + std::to_string(seed) + "," +
                      num(rmse) + "," + num(lms) + ",";
    if (oos_rmse) row += num(*oos_rmse);
    row += ",";
    if (oos_lms) row += num(*oos_lms);
    row += "," + permutation;
    return row;
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["dataset"] = dataset;
    j["decoder_kind"] = decoder_kind;
    j["seed"] = seed;
    j["rmse"] = rmse;
    j["lms"] = lms;
    j["lms_kind"] = lms_kind;
    j["oos_rmse"] = oos_rmse ? nlohmann::json(*oos_rmse) : nlohmann::json(nullptr);
    j["oos_lms"] = oos_lms ? nlohmann::json(*oos_lms) : nlohmann::json(nullptr);
    j["permutation"] = permutation;
    return j;
  }
};

}  // namespace addidec
