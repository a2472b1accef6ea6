#include <catch2/catch_amalgamated.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <limits>
#include <vector>

#include "addidec/train.hpp"

using namespace addidec;
using Catch::Matchers::ContainsSubstring;

namespace {

SupportSpec small_support() {
  SupportSpec s;
  s.kind = SupportKind::ScalarL;
  s.height = 8;
  s.width = 8;
  return s;
}

ModelConfig small_model_cfg() {
  ModelConfig cfg;
  cfg.d_z = 2;
  cfg.partition = Partition::singletons(2);
  cfg.image_shape = {3, 8, 8};
  cfg.hidden_width = 32;
  cfg.hidden_depth = 2;
  return cfg;
}

bool same_bits(const std::vector<double>& a, const std::vector<double>& b) {
  return a.size() == b.size() &&
         std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0;
}

}  // namespace

TEST_CASE("zero learning rate: parameters frozen, patience trips", "[train]") {
  Dataset tr = make_dataset(small_support(), 12, 100, Split::train);
  Dataset va = make_dataset(small_support(), 6, 200, Split::val);
  Model m = build_model(small_model_cfg(), 7);
  std::vector<std::vector<double>> before;
  for (auto* p : m.params()) before.push_back(p->data);

  TrainConfig cfg;
  cfg.batch_size = 4;
  cfg.learning_rate = 0.0;
  cfg.weight_decay = 0.0;
  cfg.max_epochs = 10;
  cfg.patience = 2;
  cfg.seed = 1;

  std::vector<bool> improved_flags;
  TrainReport rep = train_model(m, tr, va, cfg,
                                [&](std::size_t, double, double, bool imp) {
                                  improved_flags.push_back(imp);
                                });

  // nothing moves, so only the first epoch counts as an improvement and the
  // patience window runs out immediately after
  REQUIRE(rep.epochs_run() == 1 + cfg.patience);
  REQUIRE(rep.stop_reason == StopReason::early_stop);
  REQUIRE(rep.best_epoch == 1);
  REQUIRE(improved_flags == std::vector<bool>{true, false, false});
  REQUIRE(rep.val_mse[0] == rep.val_mse[1]);
  REQUIRE(rep.val_mse[1] == rep.val_mse[2]);
  for (std::size_t e = 1; e < rep.train_mse.size(); ++e)
    REQUIRE(rep.train_mse[e] == Catch::Approx(rep.train_mse[0]).margin(1e-12));

  auto params = m.params();
  for (std::size_t i = 0; i < params.size(); ++i) REQUIRE(same_bits(params[i]->data, before[i]));
}

TEST_CASE("rising validation loss early-stops and restores the best weights", "[train]") {
  Dataset tr = make_dataset(small_support(), 32, 300, Split::train);
  // validation images deliberately on the wrong side of the pixel statistics:
  // every gradient step toward the train set moves reconstructions away
  Dataset va = tr;
  va.split = Split::val;
  for (auto& v : va.images) v = -v;

  Model m = build_model(small_model_cfg(), 7);
  TrainConfig cfg;
  cfg.batch_size = 8;
  cfg.learning_rate = 1e-2;
  cfg.weight_decay = 0.0;
  cfg.max_epochs = 30;
  cfg.patience = 1;
  cfg.seed = 2;

  TrainReport rep = train_model(m, tr, va, cfg);
  REQUIRE(rep.stop_reason == StopReason::early_stop);
  REQUIRE(rep.epochs_run() < cfg.max_epochs);
  REQUIRE(rep.epochs_run() == rep.best_epoch + 1);

  // the returned model carries the best-epoch weights
  REQUIRE(eval_mse(m, va) == Catch::Approx(rep.best_val).margin(1e-15));
  REQUIRE(rep.best_val == *std::min_element(rep.val_mse.begin(), rep.val_mse.end()));
}

TEST_CASE("training descends and is a pure function of the seed", "[train]") {
  Dataset tr = make_dataset(small_support(), 48, 400, Split::train);
  Dataset va = make_dataset(small_support(), 16, 500, Split::val);

  TrainConfig cfg;
  cfg.batch_size = 16;
  cfg.learning_rate = 2e-3;
  cfg.weight_decay = 1e-4;
  cfg.max_epochs = 8;
  cfg.patience = 8;
  cfg.seed = 3;

  Model m1 = build_model(small_model_cfg(), 9);
  TrainReport r1 = train_model(m1, tr, va, cfg);
  REQUIRE(r1.train_mse.back() < 0.9 * r1.train_mse.front());
  REQUIRE(r1.best_val == *std::min_element(r1.val_mse.begin(), r1.val_mse.end()));
  REQUIRE(r1.val_mse[r1.best_epoch - 1] == r1.best_val);

  Model m2 = build_model(small_model_cfg(), 9);
  TrainReport r2 = train_model(m2, tr, va, cfg);
  REQUIRE(r1.train_mse == r2.train_mse);
  REQUIRE(r1.val_mse == r2.val_mse);
  auto p1 = m1.params(), p2 = m2.params();
  for (std::size_t i = 0; i < p1.size(); ++i) REQUIRE(same_bits(p1[i]->data, p2[i]->data));
}

TEST_CASE("non-finite loss aborts with the last finite epoch", "[train]") {
  Dataset tr = make_dataset(small_support(), 12, 600, Split::train);
  Dataset va = make_dataset(small_support(), 6, 700, Split::val);
  tr.images[0] = std::numeric_limits<float>::quiet_NaN();

  Model m = build_model(small_model_cfg(), 7);
  TrainConfig cfg;
  cfg.batch_size = 12;  // single batch: the poisoned row is hit in epoch 1
  cfg.max_epochs = 5;
  cfg.patience = 5;

  REQUIRE_THROWS_WITH(train_model(m, tr, va, cfg),
                      ContainsSubstring("epoch 1") && ContainsSubstring("last finite epoch 0"));
}

TEST_CASE("mismatched dataset and model are rejected", "[train]") {
  SupportSpec big = small_support();
  big.height = 16;
  big.width = 16;
  Dataset tr = make_dataset(big, 8, 800, Split::train);
  Dataset va = make_dataset(big, 4, 900, Split::val);
  Model m = build_model(small_model_cfg(), 7);
  TrainConfig cfg;
  REQUIRE_THROWS_AS(train_model(m, tr, va, cfg), PreconditionError);

  TrainConfig bad;
  bad.batch_size = 0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
  bad = TrainConfig{};
  bad.patience = 0;
  REQUIRE_THROWS_AS(bad.validate(), ConfigError);
}
