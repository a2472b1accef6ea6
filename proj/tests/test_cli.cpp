#include <catch2/catch_amalgamated.hpp>

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "addidec/cli.hpp"
#include "addidec/runconfig.hpp"

using namespace addidec;
using Catch::Matchers::ContainsSubstring;
namespace fs = std::filesystem;

namespace {

fs::path cli_scratch() {
  fs::path p = fs::temp_directory_path() / "addidec_cli_test";
  fs::create_directories(p);
  return p;
}

RunConfig parse(const std::string& text) {
  return RunConfig::from_json(nlohmann::json::parse(text));
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

std::string first_line(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::string line;
  REQUIRE(std::getline(in, line));
  return line;
}

int run_cli(const std::string& args) {
  const char* bin = std::getenv("ADDIDEC_BIN");
  REQUIRE(bin != nullptr);
  const int st = std::system((std::string(bin) + " " + args + " >/dev/null 2>&1").c_str());
  REQUIRE(st != -1);
  REQUIRE(WIFEXITED(st));
  return WEXITSTATUS(st);
}

ModelConfig tiny_model(DecoderKind kind) {
  ModelConfig mc;
  mc.d_z = 2;
  mc.partition = Partition::singletons(2);
  mc.image_shape = {3, 8, 8};
  mc.hidden_width = 16;
  mc.hidden_depth = 2;
  mc.decoder_kind = kind;
  return mc;
}

}  // namespace

TEST_CASE("run config defaults, round trip, and hashing", "[cli]") {
  RunConfig c = parse(R"({"dataset":{"kind":"scalarl"}})");
  c.validate();
  REQUIRE(c.support.kind == SupportKind::ScalarL);
  REQUIRE(c.support.height == 32);
  REQUIRE(c.support.width == 32);
  REQUIRE(c.support.ball_radius == 0.08);
  REQUIRE(c.n_train == 2000);
  REQUIRE(c.n_val == 500);
  REQUIRE(c.n_test == 10000);
  REQUIRE(c.hidden_width == 256);
  REQUIRE(c.hidden_depth == 3);
  REQUIRE(c.decoder == DecoderKind::Additive);
  REQUIRE(c.train.batch_size == 64);
  REQUIRE(c.train.learning_rate == 5e-4);
  REQUIRE(c.train.weight_decay == 5e-4);
  REQUIRE(c.grid_resolution == 7);
  REQUIRE(c.out_dir == "out");
  REQUIRE(c.seeds == std::vector<std::uint64_t>{1});

  // an empty document is the full default config
  RunConfig d = RunConfig::from_json(nlohmann::json::object());
  REQUIRE(d.to_json().dump() == c.to_json().dump());

  // serialization round trip is exact
  RunConfig r = RunConfig::from_json(c.to_json());
  REQUIRE(r.to_json().dump() == c.to_json().dump());

  // the hash covers run parameters, not placement or repetition
  const std::string h = config_hash_hex(c);
  REQUIRE(h.size() == 16);
  REQUIRE(h.find_first_not_of("0123456789abcdef") == std::string::npos);
  RunConfig moved = c;
  moved.out_dir = "elsewhere";
  moved.seeds = {5, 6, 7};
  REQUIRE(config_hash_hex(moved) == h);
  RunConfig tweaked = c;
  tweaked.train.learning_rate = 1e-3;
  REQUIRE(config_hash_hex(tweaked) != h);
  RunConfig swapped = c;
  swapped.decoder = DecoderKind::NonAdditive;
  REQUIRE(config_hash_hex(swapped) != h);
}

TEST_CASE("config schema errors name the offending key", "[cli]") {
  REQUIRE_THROWS_AS(parse(R"({"outdir":"x"})"), ConfigError);
  REQUIRE_THROWS_WITH(parse(R"({"outdir":"x"})"), ContainsSubstring("\"outdir\""));
  REQUIRE_THROWS_WITH(parse(R"({"dataset":{"kind":"scalarl","radius":0.1}})"),
                      ContainsSubstring("dataset.radius"));
  REQUIRE_THROWS_WITH(parse(R"({"dataset":{"kind":"scalar"}})"),
                      ContainsSubstring("dataset.kind"));
  REQUIRE_THROWS_WITH(parse(R"({"dataset":{"kind":7}})"), ContainsSubstring("dataset.kind"));
  REQUIRE_THROWS_WITH(parse(R"({"train":{"batch_size":"many"}})"),
                      ContainsSubstring("train.batch_size"));
  REQUIRE_THROWS_WITH(parse(R"({"train":{"batch_size":-4}})"),
                      ContainsSubstring("non-negative"));
  REQUIRE_THROWS_WITH(parse(R"({"model":{"decoder":"both"}})"),
                      ContainsSubstring("model.decoder"));
  REQUIRE_THROWS_WITH(parse(R"({"train":7})"), ContainsSubstring("\"train\""));
  REQUIRE_THROWS_WITH(parse(R"({"seeds":[]})"), ContainsSubstring("seeds"));
  REQUIRE_THROWS_WITH(parse(R"({"seeds":[-1]})"), ContainsSubstring("seeds[0]"));
  REQUIRE_THROWS_WITH(parse(R"({"analysis":{"probe_delta":"x"}})"),
                      ContainsSubstring("analysis.probe_delta"));

  // values that parse but cannot run are config errors too
  REQUIRE_THROWS_AS(parse(R"({"dataset":{"kind":"cpe"}})").validate(), ConfigError);
  REQUIRE_THROWS_WITH(parse(R"({"analysis":{"scan_delta":0.5}})").validate(),
                      ContainsSubstring("scan_delta"));
  REQUIRE_THROWS_WITH(parse(R"({"seeds":[1],"analysis":{"grid_resolution":1}})").validate(),
                      ContainsSubstring("grid_resolution"));

  const fs::path dir = cli_scratch();
  REQUIRE_THROWS_AS(RunConfig::load_file((dir / "missing.json").string()), ConfigError);
  std::ofstream(dir / "broken.json", std::ios::binary) << "{oops";
  REQUIRE_THROWS_WITH(RunConfig::load_file((dir / "broken.json").string()),
                      ContainsSubstring("not valid JSON"));
  fs::remove(dir / "broken.json");
}

TEST_CASE("model config derives from the dataset kind", "[cli]") {
  RunConfig c = parse(R"({
    "dataset": {"kind": "block_dependent", "height": 16, "width": 16},
    "model": {"hidden_width": 32, "hidden_depth": 2, "decoder": "nonadditive"}
  })");
  ModelConfig mc = c.model_config();
  REQUIRE(mc.d_z == 4);
  REQUIRE(mc.partition.blocks == std::vector<std::vector<int>>{{0, 1}, {2, 3}});
  REQUIRE(mc.image_shape == std::array<int, 3>{3, 16, 16});
  REQUIRE(mc.hidden_width == 32);
  REQUIRE(mc.decoder_kind == DecoderKind::NonAdditive);

  RunConfig s = parse(R"({"dataset":{"kind":"disconnected"}})");
  ModelConfig ms = s.model_config();
  REQUIRE(ms.d_z == 2);
  REQUIRE(ms.partition.blocks == std::vector<std::vector<int>>{{0}, {1}});
  REQUIRE(ms.decoder_kind == DecoderKind::Additive);
}

TEST_CASE("finite-difference hessian check separates decoder kinds", "[cli]") {
  Model add = build_model(tiny_model(DecoderKind::Additive), 41);
  cli::HessianCheck a = cli::hessian_check(add, 10, 16, 0.1, 99);
  REQUIRE(a.n_latents == 10);
  REQUIRE(a.n_coords == 16);
  REQUIRE(a.max_in_block > 0.0);
  REQUIRE(a.max_off_block <= 1e-6 * (1.0 + a.max_in_block));
  REQUIRE(a.pass);

  Model mono = build_model(tiny_model(DecoderKind::NonAdditive), 41);
  cli::HessianCheck b = cli::hessian_check(mono, 10, 16, 0.1, 99);
  REQUIRE(b.max_off_block > 1e-3);
  REQUIRE_FALSE(b.pass);

  // pure function of (model, arguments)
  cli::HessianCheck a2 = cli::hessian_check(add, 10, 16, 0.1, 99);
  REQUIRE(a2.max_in_block == a.max_in_block);
  REQUIRE(a2.max_off_block == a.max_off_block);

  REQUIRE_THROWS_AS(cli::hessian_check(add, 0, 4, 0.1, 1), PreconditionError);
  REQUIRE_THROWS_AS(cli::hessian_check(add, 4, 4, 0.0, 1), PreconditionError);
}

TEST_CASE("the binary drives a tiny pipeline end to end", "[cli]") {
  const fs::path dir = cli_scratch() / "pipeline";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path out = dir / "out";

  nlohmann::json doc = {
      {"dataset",
       {{"kind", "scalarl"},
        {"height", 8},
        {"width", 8},
        {"n_train", 48},
        {"n_val", 16},
        {"n_test", 48},
        {"seed", 9}}},
      {"model", {{"hidden_width", 8}, {"hidden_depth", 1}}},
      {"train", {{"batch_size", 16}, {"max_epochs", 2}, {"patience", 2}}},
      {"metrics", {{"seed", 5}}},
      {"analysis",
       {{"grid_resolution", 3},
        {"hessian_latents", 4},
        {"hessian_coords", 6},
        {"scan_delta", 0.05},
        {"probe_delta", 0.05}}},
      {"out_dir", out.string()},
      {"seeds", {7}}};
  const fs::path cfg_path = dir / "run.json";
  std::ofstream(cfg_path, std::ios::binary) << doc.dump(2) << "\n";
  const std::string cfg_arg = " --config " + cfg_path.string();
  const RunConfig cfg = RunConfig::load_file(cfg_path.string());
  const std::string hash = config_hash_hex(cfg);

  // ---- gen-data: artifacts, then a byte-identical rerun
  REQUIRE(run_cli("gen-data" + cfg_arg) == 0);
  const fs::path train_file = out / "data" / "train.adec";
  REQUIRE(fs::exists(train_file));
  REQUIRE(fs::exists(out / "data" / "val.adec"));
  REQUIRE(fs::exists(out / "data" / "test.adec"));
  REQUIRE(fs::exists(out / "data" / "meta.json"));
  const std::string bytes1 = slurp(train_file);
  const std::string meta1 = slurp(out / "data" / "meta.json");
  REQUIRE(run_cli("gen-data" + cfg_arg) == 0);
  REQUIRE(slurp(train_file) == bytes1);
  REQUIRE(slurp(out / "data" / "meta.json") == meta1);
  Dataset back = read_dataset(train_file.string());
  REQUIRE(back.support.kind == SupportKind::ScalarL);
  REQUIRE(back.n == 48);
  REQUIRE(back.split == Split::train);
  REQUIRE(nlohmann::json::parse(meta1)["config_hash"] == hash);

  // ---- train: checkpoint, epoch log, metrics with the config stamp
  REQUIRE(run_cli("train" + cfg_arg) == 0);
  const fs::path run = out / "runs" / "additive" / "seed7";
  REQUIRE(fs::exists(run / "model.adck"));
  REQUIRE(first_line(run / "epochs.csv") == "# config_hash=" + hash + " seed=7");
  {
    std::ifstream log(run / "epochs.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) ++lines;
    REQUIRE(lines == 4);  // stamp, header, two epochs
  }
  nlohmann::json mj = nlohmann::json::parse(slurp(run / "metrics.json"));
  REQUIRE(mj["config_hash"] == hash);
  REQUIRE(mj["seed"] == 7);
  REQUIRE(mj["dataset"] == "scalarl");
  REQUIRE(mj["lms_kind"] == "spear");
  REQUIRE(mj["oos_rmse"].is_number());
  nlohmann::json tj = nlohmann::json::parse(slurp(run / "train_report.json"));
  REQUIRE(tj["epochs_run"] == 2);
  REQUIRE(tj["stop_reason"] == "max_epochs");
  REQUIRE(first_line(run / "metrics.csv") == "# config_hash=" + hash + " seed=7");

  // ---- decoder sweep lands in its own directory with its own hash
  REQUIRE(run_cli("train" + cfg_arg + " --decoder nonadditive") == 0);
  const fs::path narun = out / "runs" / "nonadditive" / "seed7";
  REQUIRE(fs::exists(narun / "model.adck"));
  RunConfig nacfg = cfg;
  nacfg.decoder = DecoderKind::NonAdditive;
  REQUIRE(nlohmann::json::parse(slurp(narun / "metrics.json"))["config_hash"] ==
          config_hash_hex(nacfg));

  // ---- multi-seed flag overrides the config list, one subdirectory per seed
  REQUIRE(run_cli("train" + cfg_arg + " --seed 7 --seed 11") == 0);
  REQUIRE(fs::exists(out / "runs" / "additive" / "seed11" / "model.adck"));

  // ---- eval re-reads the checkpoint and rewrites the reports
  REQUIRE(run_cli("eval" + cfg_arg) == 0);
  REQUIRE(nlohmann::json::parse(slurp(run / "metrics.json"))["seed"] == 7);

  // ---- extrapolate: grid container, panel images, per-point table
  REQUIRE(run_cli("extrapolate" + cfg_arg) == 0);
  Dataset grid = read_dataset((run / "cpe_grid.adec").string());
  REQUIRE(grid.support.kind == SupportKind::Cpe);
  REQUIRE(grid.n == 9);
  REQUIRE(fs::exists(run / "extrapolation.ppm"));
  REQUIRE(fs::exists(run / "extrapolation.png"));
  REQUIRE(first_line(run / "cpe_points.csv") == "# config_hash=" + hash + " seed=7");
  nlohmann::json ej = nlohmann::json::parse(slurp(run / "extrapolation_report.json"));
  REQUIRE(ej["grid_points"] == 9);
  REQUIRE(ej["resolution"] == 3);

  // ---- check-hessian: additive checkpoints pass the additivity tolerance
  REQUIRE(run_cli("check-hessian" + cfg_arg) == 0);
  nlohmann::json hj = nlohmann::json::parse(slurp(run / "hessian.json"));
  REQUIRE(hj["pass"] == true);
  REQUIRE(hj["config_hash"] == hash);
  REQUIRE(run_cli("check-hessian" + cfg_arg + " --decoder nonadditive") == 0);
  nlohmann::json nhj = nlohmann::json::parse(slurp(narun / "hessian.json"));
  REQUIRE(nhj["max_off_block"].is_number());

  // ---- verify-nonlinearity: scan csv plus a stamped summary
  REQUIRE(run_cli("verify-nonlinearity" + cfg_arg) == 0);
  REQUIRE(first_line(out / "theory" / "scan.csv") == "z1,z2,det_w,det_jtj");
  nlohmann::json sj = nlohmann::json::parse(slurp(out / "theory" / "summary.json"));
  REQUIRE(sj["pass"] == true);
  REQUIRE(sj["min_abs_det_w"].get<double>() > 0.0);
  REQUIRE(sj["injectivity"]["collisions"] == 0);
  REQUIRE(sj["config_hash"] == hash);
  REQUIRE(sj["seed"].is_null());

  // ---- traversals need a block dataset: config misuse is a config error
  REQUIRE(run_cli("traverse" + cfg_arg) == 2);

  // ---- error classes map to distinct exit codes
  REQUIRE(run_cli("eval" + cfg_arg + " --seed 99") == 3);      // no checkpoint
  REQUIRE(run_cli("eval --config " + (dir / "nope.json").string()) == 2);
  std::ofstream(dir / "bad.json", std::ios::binary) << "{oops";
  REQUIRE(run_cli("eval --config " + (dir / "bad.json").string()) == 2);
  nlohmann::json unknown = doc;
  unknown["surprise"] = 1;
  std::ofstream(dir / "unknown.json", std::ios::binary) << unknown.dump() << "\n";
  REQUIRE(run_cli("gen-data --config " + (dir / "unknown.json").string()) == 2);
  nlohmann::json badkind = doc;
  badkind["dataset"]["kind"] = "pyramids";
  std::ofstream(dir / "badkind.json", std::ios::binary) << badkind.dump() << "\n";
  REQUIRE(run_cli("gen-data --config " + (dir / "badkind.json").string()) == 2);
  REQUIRE(run_cli("frobnicate" + cfg_arg) == 2);
  REQUIRE(run_cli("eval" + cfg_arg + " --decoder sideways") == 2);

  // ---- --out beats the config's out_dir
  const fs::path out2 = dir / "flagged";
  REQUIRE(run_cli("gen-data" + cfg_arg + " --out " + out2.string()) == 0);
  REQUIRE(fs::exists(out2 / "data" / "train.adec"));

  // ---- numeric divergence aborts with exit 4 and keeps the partial log
  nlohmann::json hot = doc;
  hot["train"]["learning_rate"] = 1e100;  // first step catapults the weights
  hot["train"]["max_epochs"] = 5;
  hot["train"]["patience"] = 5;
  hot["seeds"] = {3};
  std::ofstream(dir / "hot.json", std::ios::binary) << hot.dump() << "\n";
  REQUIRE(run_cli("train --config " + (dir / "hot.json").string()) == 4);
  const fs::path hotrun = out / "runs" / "additive" / "seed3";
  REQUIRE(fs::exists(hotrun / "epochs.csv"));
  REQUIRE_FALSE(fs::exists(hotrun / "model.adck"));
  {
    std::ifstream log(hotrun / "epochs.csv");
    std::string line;
    std::size_t lines = 0;
    while (std::getline(log, line)) ++lines;
    REQUIRE(lines == 2);  // the abort lands mid-epoch: stamp and header survive
  }

  fs::remove_all(dir);
}

TEST_CASE("the binary traverses a trained block model", "[cli]") {
  const fs::path dir = cli_scratch() / "block";
  fs::remove_all(dir);
  fs::create_directories(dir);
  const fs::path out = dir / "out";

  nlohmann::json doc = {
      {"dataset",
       {{"kind", "block_independent"},
        {"height", 8},
        {"width", 8},
        {"n_train", 32},
        {"n_val", 16},
        {"n_test", 32},
        {"seed", 4}}},
      {"model", {{"hidden_width", 8}, {"hidden_depth", 1}}},
      {"train", {{"batch_size", 16}, {"max_epochs", 1}, {"patience", 1}}},
      {"out_dir", out.string()},
      {"seeds", {2}}};
  const fs::path cfg_path = dir / "run.json";
  std::ofstream(cfg_path, std::ios::binary) << doc.dump(2) << "\n";
  const std::string cfg_arg = " --config " + cfg_path.string();
  const std::string hash = config_hash_hex(RunConfig::load_file(cfg_path.string()));

  REQUIRE(run_cli("gen-data" + cfg_arg) == 0);
  REQUIRE(run_cli("train" + cfg_arg) == 0);
  const fs::path run = out / "runs" / "additive" / "seed2";
  nlohmann::json mj = nlohmann::json::parse(slurp(run / "metrics.json"));
  REQUIRE(mj["lms_kind"] == "tree");
  REQUIRE(mj["oos_rmse"].is_null());

  REQUIRE(run_cli("traverse" + cfg_arg) == 0);
  for (const char* name : {"ball1_x", "ball2_x", "ball1_y", "ball2_y"}) {
    const fs::path p = run / ("traversal_" + std::string(name) + ".csv");
    REQUIRE(first_line(p) == "# config_hash=" + hash + " seed=2");
    std::ifstream in(p);
    std::string line;
    std::size_t lines = 0;
    while (std::getline(in, line)) ++lines;
    REQUIRE(lines == 12);  // stamp, header, ten points
  }

  fs::remove_all(dir);
}
