#pragma once

#include <json.hpp>

#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "addidec/binio.hpp"
#include "addidec/errors.hpp"
#include "addidec/models.hpp"
#include "addidec/scenegen.hpp"
#include "addidec/train.hpp"

namespace addidec {

namespace detail {

inline std::string key_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline void reject_unknown(const nlohmann::json& obj, const std::string& base,
                           std::initializer_list<const char*> allowed) {
  if (!obj.is_object())
    throw ConfigError("config key \"" + base + "\" must be an object");
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    bool known = false;
    for (const char* k : allowed) known = known || it.key() == k;
    if (!known) throw ConfigError("unknown config key \"" + key_path(base, it.key()) + "\"");
  }
}

inline const nlohmann::json* maybe(const nlohmann::json& obj, const char* key) {
  auto it = obj.find(key);
  return it == obj.end() ? nullptr : &*it;
}

inline double num_field(const nlohmann::json& obj, const std::string& base, const char* key,
                        double fallback) {
  const nlohmann::json* v = maybe(obj, key);
  if (!v) return fallback;
  if (!v->is_number())
    throw ConfigError("config key \"" + key_path(base, key) + "\" must be a number");
  return v->get<double>();
}

inline std::uint64_t uint_field(const nlohmann::json& obj, const std::string& base,
                                const char* key, std::uint64_t fallback) {
  const nlohmann::json* v = maybe(obj, key);
  if (!v) return fallback;
  const bool ok = v->is_number_unsigned() ||
                  (v->is_number_integer() && v->get<std::int64_t>() >= 0);
  if (!ok)
    throw ConfigError("config key \"" + key_path(base, key) +
                      "\" must be a non-negative integer");
  return v->get<std::uint64_t>();
}

inline std::string str_field(const nlohmann::json& obj, const std::string& base, const char* key,
                             const std::string& fallback) {
  const nlohmann::json* v = maybe(obj, key);
  if (!v) return fallback;
  if (!v->is_string())
    throw ConfigError("config key \"" + key_path(base, key) + "\" must be a string");
  return v->get<std::string>();
}

inline bool bool_field(const nlohmann::json& obj, const std::string& base, const char* key,
                       bool fallback) {
  const nlohmann::json* v = maybe(obj, key);
  if (!v) return fallback;
  if (!v->is_boolean())
    throw ConfigError("config key \"" + key_path(base, key) + "\" must be a boolean");
  return v->get<bool>();
}

}  // namespace detail

// One document drives every subcommand; defaults are the desk-scale setup
// (paper split sizes x 0.2). Unknown keys are rejected by full path.
struct RunConfig {
  SupportSpec support;
  std::size_t n_train = 2000, n_val = 500, n_test = 10000;
  std::uint64_t data_seed = 1234;

  std::size_t hidden_width = 256, hidden_depth = 3;
  DecoderKind decoder = DecoderKind::Additive;

  TrainConfig train{64, 5e-4, 5e-4, 2000, 400, 0};  // .seed filled per run

  std::uint64_t metrics_seed = 303;
  bool tree_search = true;  // try every equal-block partition of learned space

  std::size_t grid_resolution = 7;
  double jacobian_h = 1e-3, jacobian_tol = 0.1;
  std::size_t hessian_latents = 16, hessian_coords = 32;
  double hessian_h = 0.1;
  double scan_delta = 0.0025, probe_delta = 0.01;

  std::string out_dir = "out";
  std::vector<std::uint64_t> seeds{1};

  ModelConfig model_config() const {
    ModelConfig mc;
    mc.d_z = support.d_z();
    mc.partition = mc.d_z == 2 ? Partition::singletons(2) : Partition::contiguous(4, 2);
    mc.image_shape = {support.channels, support.height, support.width};
    mc.hidden_width = hidden_width;
    mc.hidden_depth = hidden_depth;
    mc.decoder_kind = decoder;
    return mc;
  }

  void validate() const {
    if (support.kind == SupportKind::Cpe)
      throw ConfigError("dataset.kind: \"cpe\" tags exported grids, it cannot be generated");
    support.validate();
    if (n_train < 1 || n_val < 1 || n_test < 1)
      throw ConfigError("dataset split sizes must be positive");
    model_config().validate();
    train.validate();
    if (seeds.empty()) throw ConfigError("seeds must hold at least one entry");
    if (grid_resolution < 2) throw ConfigError("analysis.grid_resolution must be >= 2");
    if (!(jacobian_h > 0)) throw ConfigError("analysis.jacobian_h must be positive");
    if (!(jacobian_tol > 0)) throw ConfigError("analysis.jacobian_tol must be positive");
    if (hessian_latents < 1 || hessian_coords < 1)
      throw ConfigError("analysis.hessian_latents/hessian_coords must be positive");
    if (!(hessian_h > 0)) throw ConfigError("analysis.hessian_h must be positive");
    if (!(scan_delta > 0) || scan_delta > 0.1)
      throw ConfigError("analysis.scan_delta must lie in (0, 0.1]");
    if (!(probe_delta > 0) || probe_delta > 0.05)
      throw ConfigError("analysis.probe_delta must lie in (0, 0.05]");
  }

  nlohmann::json to_json() const {
    nlohmann::json j;
    j["dataset"] = {{"kind", kind_name(support.kind)},
                    {"ball_radius", support.ball_radius},
                    {"height", support.height},
                    {"width", support.width},
                    {"n_train", n_train},
                    {"n_val", n_val},
                    {"n_test", n_test},
                    {"seed", data_seed}};
    j["model"] = {{"hidden_width", hidden_width},
                  {"hidden_depth", hidden_depth},
                  {"decoder", decoder_name(decoder)}};
    j["train"] = {{"batch_size", train.batch_size},
                  {"learning_rate", train.learning_rate},
                  {"weight_decay", train.weight_decay},
                  {"max_epochs", train.max_epochs},
                  {"patience", train.patience}};
    j["metrics"] = {{"seed", metrics_seed}, {"tree_search", tree_search}};
    j["analysis"] = {{"grid_resolution", grid_resolution},
                     {"jacobian_h", jacobian_h},
                     {"jacobian_tol", jacobian_tol},
                     {"hessian_latents", hessian_latents},
                     {"hessian_coords", hessian_coords},
                     {"hessian_h", hessian_h},
                     {"scan_delta", scan_delta},
                     {"probe_delta", probe_delta}};
    j["out_dir"] = out_dir;
    j["seeds"] = seeds;
    return j;
  }

  static RunConfig from_json(const nlohmann::json& j) {
    detail::reject_unknown(
        j, "", {"dataset", "model", "train", "metrics", "analysis", "out_dir", "seeds"});
    RunConfig c;
    if (const auto* d = detail::maybe(j, "dataset")) {
      detail::reject_unknown(*d, "dataset",
                             {"kind", "ball_radius", "height", "width", "n_train", "n_val",
                              "n_test", "seed"});
      if (const auto* k = detail::maybe(*d, "kind")) {
        if (!k->is_string())
          throw ConfigError("config key \"dataset.kind\" must be a string");
        try {
          c.support.kind = kind_from_name(k->get<std::string>());
        } catch (const ConfigError& e) {
          throw ConfigError(std::string("dataset.kind: ") + e.what());
        }
      }
      c.support.ball_radius = detail::num_field(*d, "dataset", "ball_radius", c.support.ball_radius);
      c.support.height = static_cast<int>(detail::uint_field(
          *d, "dataset", "height", static_cast<std::uint64_t>(c.support.height)));
      c.support.width = static_cast<int>(detail::uint_field(
          *d, "dataset", "width", static_cast<std::uint64_t>(c.support.width)));
      c.n_train = detail::uint_field(*d, "dataset", "n_train", c.n_train);
      c.n_val = detail::uint_field(*d, "dataset", "n_val", c.n_val);
      c.n_test = detail::uint_field(*d, "dataset", "n_test", c.n_test);
      c.data_seed = detail::uint_field(*d, "dataset", "seed", c.data_seed);
    }
    if (const auto* m = detail::maybe(j, "model")) {
      detail::reject_unknown(*m, "model", {"hidden_width", "hidden_depth", "decoder"});
      c.hidden_width = detail::uint_field(*m, "model", "hidden_width", c.hidden_width);
      c.hidden_depth = detail::uint_field(*m, "model", "hidden_depth", c.hidden_depth);
      const std::string dec = detail::str_field(*m, "model", "decoder", decoder_name(c.decoder));
      if (dec == "additive")
        c.decoder = DecoderKind::Additive;
      else if (dec == "nonadditive")
        c.decoder = DecoderKind::NonAdditive;
      else
        throw ConfigError("config key \"model.decoder\" must be \"additive\" or \"nonadditive\"");
    }
    if (const auto* t = detail::maybe(j, "train")) {
      detail::reject_unknown(
          *t, "train", {"batch_size", "learning_rate", "weight_decay", "max_epochs", "patience"});
      c.train.batch_size = detail::uint_field(*t, "train", "batch_size", c.train.batch_size);
      c.train.learning_rate = detail::num_field(*t, "train", "learning_rate", c.train.learning_rate);
      c.train.weight_decay = detail::num_field(*t, "train", "weight_decay", c.train.weight_decay);
      c.train.max_epochs = detail::uint_field(*t, "train", "max_epochs", c.train.max_epochs);
      c.train.patience = detail::uint_field(*t, "train", "patience", c.train.patience);
    }
    if (const auto* m = detail::maybe(j, "metrics")) {
      detail::reject_unknown(*m, "metrics", {"seed", "tree_search"});
      c.metrics_seed = detail::uint_field(*m, "metrics", "seed", c.metrics_seed);
      c.tree_search = detail::bool_field(*m, "metrics", "tree_search", c.tree_search);
    }
    if (const auto* a = detail::maybe(j, "analysis")) {
      detail::reject_unknown(*a, "analysis",
                             {"grid_resolution", "jacobian_h", "jacobian_tol", "hessian_latents",
                              "hessian_coords", "hessian_h", "scan_delta", "probe_delta"});
      c.grid_resolution = detail::uint_field(*a, "analysis", "grid_resolution", c.grid_resolution);
      c.jacobian_h = detail::num_field(*a, "analysis", "jacobian_h", c.jacobian_h);
      c.jacobian_tol = detail::num_field(*a, "analysis", "jacobian_tol", c.jacobian_tol);
      c.hessian_latents = detail::uint_field(*a, "analysis", "hessian_latents", c.hessian_latents);
      c.hessian_coords = detail::uint_field(*a, "analysis", "hessian_coords", c.hessian_coords);
      c.hessian_h = detail::num_field(*a, "analysis", "hessian_h", c.hessian_h);
      c.scan_delta = detail::num_field(*a, "analysis", "scan_delta", c.scan_delta);
      c.probe_delta = detail::num_field(*a, "analysis", "probe_delta", c.probe_delta);
    }
    c.out_dir = detail::str_field(j, "", "out_dir", c.out_dir);
    if (const auto* s = detail::maybe(j, "seeds")) {
      if (!s->is_array() || s->empty())
        throw ConfigError("config key \"seeds\" must be a non-empty array");
      c.seeds.clear();
      for (std::size_t i = 0; i < s->size(); ++i) {
        const auto& v = (*s)[i];
        const bool ok = v.is_number_unsigned() ||
                        (v.is_number_integer() && v.get<std::int64_t>() >= 0);
        if (!ok)
          throw ConfigError("config key \"seeds[" + std::to_string(i) +
                            "]\" must be a non-negative integer");
        c.seeds.push_back(v.get<std::uint64_t>());
      }
    }
    return c;
  }

  static RunConfig load_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("cannot open config file: " + path);
    std::ostringstream buf;
    buf << in.rdbuf();
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(buf.str());
    } catch (const nlohmann::json::parse_error& e) {
      throw ConfigError("config file " + path + " is not valid JSON: " + e.what());
    }
    return from_json(j);
  }
};

// Content hash of the run parameters. The output location and the seed list
// are excluded: they pick where and how often to run, not what a run computes
// (the report carries its own seed next to the hash).
inline std::string config_hash_hex(const RunConfig& c) {
  nlohmann::json j = c.to_json();
  j.erase("out_dir");
  j.erase("seeds");
  const std::uint64_t h = fnv1a64(j.dump());
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return std::string(buf);
}

}  // namespace addidec
