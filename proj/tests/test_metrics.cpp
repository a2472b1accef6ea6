#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "addidec/metrics.hpp"

using namespace addidec;
using Catch::Matchers::ContainsSubstring;

namespace {

std::vector<double> rand_matrix(std::size_t n, int d, Rng& rng, double lo = 0.0, double hi = 1.0) {
  std::vector<double> m(n * static_cast<std::size_t>(d));
  for (auto& v : m) v = rng.uniform(lo, hi);
  return m;
}

// independent exhaustive oracle: DFS over all block bijections with a size filter
void brute_assignments(const std::vector<std::vector<double>>& s,
                       const std::vector<std::size_t>& sizes, std::vector<int>& cur,
                       std::vector<bool>& used, double& best, std::vector<int>& best_a) {
  const std::size_t b = cur.size();
  if (b == sizes.size()) {
    double v = 0;
    for (std::size_t i = 0; i < sizes.size(); ++i) v += s[i][static_cast<std::size_t>(cur[i])];
    v /= static_cast<double>(sizes.size());
    if (v > best) {
      best = v;
      best_a = cur;
    }
    return;
  }
  for (std::size_t t = 0; t < sizes.size(); ++t) {
    if (used[t] || sizes[t] != sizes[b]) continue;
    used[t] = true;
    cur.push_back(static_cast<int>(t));
    brute_assignments(s, sizes, cur, used, best, best_a);
    cur.pop_back();
    used[t] = false;
  }
}

}  // namespace

TEST_CASE("fractional ranks and spearman", "[metrics]") {
  REQUIRE(fractional_ranks({10, 20, 30}) == std::vector<double>{1, 2, 3});
  REQUIRE(fractional_ranks({1, 1, 2}) == std::vector<double>{1.5, 1.5, 3});
  REQUIRE(fractional_ranks({5, 3, 3, 1}) == std::vector<double>{4, 2.5, 2.5, 1});

  REQUIRE(spearman({1, 2, 3}, {10, 20, 30}) == Catch::Approx(1.0).margin(1e-15));
  // ranks of (3,1,2) give sum of squared rank gaps 6: 1 - 36/24
  REQUIRE(spearman({1, 2, 3}, {3, 1, 2}) == Catch::Approx(-0.5).margin(1e-15));
  // tied pair: pearson((1.5,1.5,3),(1,2,3)) = 1.5/sqrt(1.5*2)
  REQUIRE(spearman({1, 1, 2}, {1, 2, 3}) ==
          Catch::Approx(std::sqrt(3.0) / 2.0).margin(1e-15));

  REQUIRE_THROWS_AS(spearman({1, 1, 1}, {1, 2, 3}), UndefinedStatError);
  REQUIRE_THROWS_AS(spearman({1, 2}, {1, 2, 3}), PreconditionError);
  REQUIRE_THROWS_AS(spearman({1}, {2}), PreconditionError);

  // invariant under strictly increasing maps of either argument
  Rng rng(42);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> a(30), b(30);
    for (auto& v : a) v = rng.uniform(-2, 2);
    for (auto& v : b) v = rng.uniform(-2, 2);
    double base = spearman(a, b);
    std::vector<double> a3 = a, bt = b;
    for (auto& v : a3) v = v * v * v;
    for (auto& v : bt) v = std::atan(v);
    REQUIRE(spearman(a3, b) == base);
    REQUIRE(spearman(a, bt) == base);
  }
}

TEST_CASE("block assignment enumeration", "[metrics]") {
  REQUIRE(enumerate_block_assignments(Partition::singletons(2)).size() == 2);
  REQUIRE(enumerate_block_assignments(Partition::singletons(1)).size() == 1);
  REQUIRE(enumerate_block_assignments(Partition::contiguous(4, 2)).size() == 2);
  REQUIRE(enumerate_full_permutations(Partition::contiguous(4, 2)).size() == 8);

  // mixed sizes: the singleton can only map to itself
  Partition mixed({{0}, {1, 2}}, 3);
  auto assigns = enumerate_block_assignments(mixed);
  REQUIRE(assigns.size() == 1);
  REQUIRE(assigns[0] == std::vector<int>{0, 1});

  auto parts = equal_size_partitions(4, 2);
  REQUIRE(parts.size() == 3);
  REQUIRE(parts[0] == std::vector<std::vector<int>>{{0, 1}, {2, 3}});
  REQUIRE(parts[1] == std::vector<std::vector<int>>{{0, 2}, {1, 3}});
  REQUIRE(parts[2] == std::vector<std::vector<int>>{{0, 3}, {1, 2}});
}

TEST_CASE("lms on frozen matrices", "[metrics]") {
  Partition p2 = Partition::singletons(2);

  LmsOutcome id = lms({{1, 0}, {0, 1}}, p2);
  REQUIRE(id.value == 1.0);
  REQUIRE(id.assignment == std::vector<int>{0, 1});
  REQUIRE(id.permutation == std::vector<int>{0, 1});
  REQUIRE(permutation_to_string(id.permutation) == "0->0;1->1");

  LmsOutcome sw = lms({{0, 1}, {1, 0}}, p2);
  REQUIRE(sw.value == 1.0);
  REQUIRE(sw.assignment == std::vector<int>{1, 0});

  LmsOutcome mx = lms({{0.8, 0.2}, {0.3, 0.9}}, p2);
  REQUIRE(mx.value == Catch::Approx(0.85).margin(1e-15));
  REQUIRE(mx.assignment == std::vector<int>{0, 1});

  // exact ties keep the lexicographically smallest assignment
  LmsOutcome tie = lms({{0.5, 0.5}, {0.5, 0.5}}, p2);
  REQUIRE(tie.assignment == std::vector<int>{0, 1});

  // invariance under simultaneous relabeling; identity is always a candidate
  Rng rng(7);
  Partition p3 = Partition::singletons(3);
  for (int trial = 0; trial < 300; ++trial) {
    std::vector<std::vector<double>> s(3, std::vector<double>(3));
    for (auto& row : s)
      for (auto& v : row) v = rng.uniform(-1, 1);
    double trace = (s[0][0] + s[1][1] + s[2][2]) / 3.0;
    LmsOutcome base = lms(s, p3);
    REQUIRE(base.value >= trace - 1e-15);

    std::vector<int> sigma = {0, 1, 2};
    shuffle(sigma, rng);
    std::vector<std::vector<double>> t(3, std::vector<double>(3));
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        t[static_cast<std::size_t>(sigma[i])][static_cast<std::size_t>(sigma[j])] =
            s[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)];
    REQUIRE(lms(t, p3).value == Catch::Approx(base.value).margin(1e-12));
  }
}

TEST_CASE("lms equals the exhaustive oracle", "[metrics]") {
  Rng rng(11);
  for (int trial = 0; trial < 1000; ++trial) {
    // random contiguous partition with block sizes drawn from {1,2}
    std::vector<std::vector<int>> blocks;
    int at = 0;
    const int d = 2 + static_cast<int>(rng.below(5));  // 2..6
    while (at < d) {
      int bs = (rng.below(2) == 0 || at + 1 == d) ? 1 : 2;
      std::vector<int> blk;
      for (int i = 0; i < bs; ++i) blk.push_back(at++);
      blocks.push_back(std::move(blk));
    }
    Partition p(blocks, d);
    const std::size_t l = p.block_count();
    std::vector<std::vector<double>> s(l, std::vector<double>(l));
    for (auto& row : s)
      for (auto& v : row) v = rng.uniform(-1, 1);

    std::vector<std::size_t> sizes;
    for (const auto& b : p.blocks) sizes.push_back(b.size());
    double brute = -2.0;
    std::vector<int> brute_a, cur;
    std::vector<bool> used(l, false);
    brute_assignments(s, sizes, cur, used, brute, brute_a);

    LmsOutcome out = lms(s, p);
    REQUIRE(out.value == brute);
    REQUIRE(out.assignment == brute_a);
  }
}

TEST_CASE("lms_spear identities, flips and noise floor", "[metrics]") {
  Rng rng(13);
  const std::size_t n = 200;
  std::vector<double> z = rand_matrix(n, 2, rng);

  LmsOutcome same = lms_spear(z, z, n, 2);
  REQUIRE(same.value == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(same.permutation == std::vector<int>{0, 1});

  // swap and negate: |spearman| shrugs off monotone flips
  std::vector<double> flipped(z.size());
  for (std::size_t i = 0; i < n; ++i) {
    flipped[2 * i] = -z[2 * i + 1];
    flipped[2 * i + 1] = -z[2 * i];
  }
  LmsOutcome sw = lms_spear(z, flipped, n, 2);
  REQUIRE(sw.value == Catch::Approx(1.0).margin(1e-15));
  REQUIRE(sw.permutation == std::vector<int>{1, 0});

  // independent noise has no matching signal at n = 10^4
  const std::size_t big = 10000;
  std::vector<double> zt = rand_matrix(big, 2, rng), zn = rand_matrix(big, 2, rng);
  REQUIRE(lms_spear(zt, zn, big, 2).value <= 0.05);

  // a constant learned coordinate degrades to score 0 with warnings
  std::vector<double> dead = z;
  for (std::size_t i = 0; i < n; ++i) dead[2 * i + 1] = 0.25;
  std::size_t warnings = 0;
  LmsOutcome deg = lms_spear(z, dead, n, 2, &warnings);
  REQUIRE(warnings == 2);
  REQUIRE(deg.value == Catch::Approx(0.5).margin(0.2));  // one perfect, one dead column
}

TEST_CASE("regression tree mechanics", "[metrics]") {
  Rng rng(17);

  SECTION("noise-free step is learned exactly and ties pick the lowest feature") {
    const std::size_t n = 400;
    std::vector<double> X(n * 2), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      double v = rng.uniform();
      X[2 * i] = v;
      X[2 * i + 1] = v;  // identical copy: split must use feature 0
      y[i] = v < 0.5 ? 0.0 : 1.0;
    }
    RegressionTree tree;
    tree.fit(X, n, 2, y, 10);
    REQUIRE(tree.nodes()[0].feature == 0);
    REQUIRE(tree_holdout_r2(X, n, 2, y, 123) == Catch::Approx(1.0).margin(1e-12));
  }

  SECTION("smooth target reaches the depth-10 approximation bound") {
    const std::size_t n = 2500;
    std::vector<double> X(n), y(n);
    for (std::size_t i = 0; i < n; ++i) {
      X[i] = rng.uniform();
      y[i] = std::sin(2 * M_PI * X[i]);
    }
    REQUIRE(tree_holdout_r2(X, n, 1, y, 31) >= 0.95);
  }

  SECTION("identical data grows identical trees") {
    const std::size_t n = 300;
    std::vector<double> X = rand_matrix(n, 2, rng), y(n);
    for (std::size_t i = 0; i < n; ++i) y[i] = X[2 * i] * 2 - X[2 * i + 1];
    RegressionTree t1, t2;
    t1.fit(X, n, 2, y, 10);
    t2.fit(X, n, 2, y, 10);
    std::vector<double> probe = rand_matrix(64, 2, rng);
    REQUIRE(t1.predict(probe, 64) == t2.predict(probe, 64));
  }

  SECTION("degenerate inputs") {
    std::vector<double> X = {0.1, 0.2, 0.3, 0.4}, yconst = {1, 1, 1, 1};
    RegressionTree tree;
    tree.fit(X, 4, 1, yconst, 10);
    REQUIRE(tree.nodes().size() == 1);  // zero variance: a single leaf
    REQUIRE(tree.predict_one(&X[0]) == 1.0);
    REQUIRE_THROWS_AS(r2_score(yconst, yconst), UndefinedStatError);

    RegressionTree tiny;
    REQUIRE_THROWS_AS(tiny.fit({1.0}, 1, 1, {1.0}, 10), PreconditionError);
    REQUIRE_THROWS_AS(tree_holdout_r2({1, 2, 3}, 3, 1, {1, 2, 3}, 0), PreconditionError);

    // depth 0 collapses to the global mean
    std::vector<double> y2 = {0, 1, 0, 1};
    RegressionTree flat;
    flat.fit(X, 4, 1, y2, 0);
    REQUIRE(flat.nodes().size() == 1);
    REQUIRE(flat.predict_one(&X[0]) == 0.5);
  }
}

TEST_CASE("lms_tree: warps match, cross-block mixing does not", "[metrics]") {
  Rng rng(19);
  const std::size_t n = 2000;
  const int d = 4;
  Partition p = Partition::contiguous(4, 2);
  std::vector<double> z = rand_matrix(n, d, rng);

  double identity_score = lms_tree(z, z, n, d, p, false, 5).lms.value;
  REQUIRE(identity_score == Catch::Approx(1.0).margin(0.01));

  // coordinate-wise cube: invertible within-block warp
  std::vector<double> warp = z;
  for (auto& v : warp) v = v * v * v;
  TreeLmsOutcome warp_out = lms_tree(z, warp, n, d, p, false, 5);
  REQUIRE(warp_out.lms.value >= 0.95);

  // 45-degree rotation across blocks (coords 0 and 2) mixes the blocks
  std::vector<double> mixed = z;
  const double c = std::sqrt(0.5);
  for (std::size_t i = 0; i < n; ++i) {
    double a = z[i * 4 + 0], b = z[i * 4 + 2];
    mixed[i * 4 + 0] = c * a - c * b;
    mixed[i * 4 + 2] = c * a + c * b;
  }
  TreeLmsOutcome mix_out = lms_tree(z, mixed, n, d, p, false, 5);
  REQUIRE(mix_out.lms.value < warp_out.lms.value);

  // partition search recovers a non-contiguous but clean grouping
  std::vector<double> shuffled(z.size());
  for (std::size_t i = 0; i < n; ++i) {
    shuffled[i * 4 + 0] = z[i * 4 + 0];
    shuffled[i * 4 + 1] = z[i * 4 + 2];
    shuffled[i * 4 + 2] = z[i * 4 + 1];
    shuffled[i * 4 + 3] = z[i * 4 + 3];
  }
  TreeLmsOutcome found = lms_tree(z, shuffled, n, d, p, true, 5);
  REQUIRE(found.lms.value == Catch::Approx(1.0).margin(0.01));
  REQUIRE(found.learned_blocks == std::vector<std::vector<int>>{{0, 2}, {1, 3}});
  double fixed_score = lms_tree(z, shuffled, n, d, p, false, 5).lms.value;
  REQUIRE(found.lms.value > fixed_score);

  // raw scores kept unclamped for diagnostics
  REQUIRE(found.raw_scores.size() == 2);
}

TEST_CASE("rmse and out-of-support sampling", "[metrics]") {
  std::vector<double> a = {1, 2, 3}, b = {1, 2, 3};
  REQUIRE(rmse(a, b) == 0.0);
  REQUIRE(rmse({0, 0}, {1, 1}) == Catch::Approx(1.0).margin(1e-15));
  REQUIRE_THROWS_AS(rmse({1}, {1, 2}), PreconditionError);

  SupportSpec spec;
  spec.kind = SupportKind::ScalarL;
  spec.height = 8;
  spec.width = 8;
  std::vector<double> z = sample_oos_scalarl(5000, 77);
  for (std::size_t i = 0; i < 5000; ++i) {
    REQUIRE_FALSE(in_support(&z[2 * i], spec));
    REQUIRE(z[2 * i] > 0.5);
    REQUIRE(z[2 * i] <= 1.0);
    REQUIRE(z[2 * i + 1] > 0.5);
    REQUIRE(z[2 * i + 1] <= 1.0);
  }
  REQUIRE_THROWS_AS(sample_oos_scalarl(0, 1), PreconditionError);

  ModelConfig mc;
  mc.d_z = 2;
  mc.partition = Partition::singletons(2);
  mc.image_shape = {3, 8, 8};
  mc.hidden_width = 32;
  mc.hidden_depth = 2;
  Model m = build_model(mc, 3);
  OosReport rep = oos_eval(m, spec, 64, 9);
  REQUIRE(std::isfinite(rep.rmse));
  REQUIRE(rep.rmse > 0.0);  // untrained model cannot reconstruct
  REQUIRE(rep.lms >= 0.0);
  REQUIRE(rep.lms <= 1.0);
  REQUIRE(rep.permutation.size() == 2);

  REQUIRE_THROWS_AS(oos_eval(m, spec, 0, 9), PreconditionError);
  SupportSpec blocks = spec;
  blocks.kind = SupportKind::BlockIndependent;
  REQUIRE_THROWS_AS(oos_eval(m, blocks, 64, 9), CapabilityError);
}

TEST_CASE("metrics report serialization", "[metrics]") {
  REQUIRE(MetricsReport::csv_header() ==
          "dataset,decoder_kind,seed,rmse,lms,oos_rmse,oos_lms,permutation");

  MetricsReport rep;
  rep.dataset = "scalarl";
  rep.decoder_kind = "additive";
  rep.seed = 7;
  rep.rmse = 0.25;
  rep.lms = 0.96;
  rep.lms_kind = "spear";
  rep.permutation = "0->0;1->1";
  REQUIRE(rep.csv_row() == "scalarl,additive,7,0.25,0.96,,,0->0;1->1");

  rep.oos_rmse = 0.5;
  rep.oos_lms = 0.125;
  REQUIRE(rep.csv_row() == "scalarl,additive,7,0.25,0.96,0.5,0.125,0->0;1->1");

  nlohmann::json j = rep.to_json();
  REQUIRE(j["dataset"] == "scalarl");
  REQUIRE(j["oos_rmse"] == 0.5);
  REQUIRE(j["lms"] == 0.96);

  rep.oos_rmse.reset();
  rep.oos_lms.reset();
  REQUIRE(rep.to_json()["oos_rmse"].is_null());

  // full-precision formatting survives a parse round trip
  rep.rmse = 0.1234567890123456789;  // not exactly representable
  nlohmann::json back = nlohmann::json::parse(rep.to_json().dump());
  REQUIRE(back["rmse"].get<double>() == rep.rmse);
}
