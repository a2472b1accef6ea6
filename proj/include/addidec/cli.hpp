#pragma once

#include <json.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "addidec/analysis.hpp"
#include "addidec/errors.hpp"
#include "addidec/metrics.hpp"
#include "addidec/models.hpp"
#include "addidec/rng.hpp"
#include "addidec/runconfig.hpp"
#include "addidec/scenegen.hpp"
#include "addidec/theory.hpp"
#include "addidec/train.hpp"

namespace addidec::cli {

// ------------------------------------------------------------------- layout
//
// <out>/data/{train,val,test}.adec (+ .meta.json each, + meta.json summary)
// <out>/runs/<decoder>/seed<k>/     per-run checkpoints and reports
// <out>/theory/                     analytic verification artifacts

inline std::filesystem::path data_dir(const RunConfig& c) {
  return std::filesystem::path(c.out_dir) / "data";
}

inline std::filesystem::path dataset_path(const RunConfig& c, Split s) {
  return data_dir(c) / (split_name(s) + ".adec");
}

inline std::filesystem::path run_dir(const RunConfig& c, std::uint64_t seed) {
  return std::filesystem::path(c.out_dir) / "runs" / decoder_name(c.decoder) /
         ("seed" + std::to_string(seed));
}

inline std::string json_num(double v) { return nlohmann::json(v).dump(); }

inline std::string csv_stamp(const RunConfig& c, std::uint64_t seed) {
  return "# config_hash=" + config_hash_hex(c) + " seed=" + std::to_string(seed) + "\n";
}

inline void write_text(const std::filesystem::path& p, const std::string& body) {
  std::ofstream out(p, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + p.string());
  out << body;
  if (!out) throw DataError("short write: " + p.string());
}

// datasets are inputs here; refuse silently mismatched artifacts instead of
// producing reports that no longer correspond to the config
inline Dataset load_split(const RunConfig& c, Split s) {
  const std::string path = dataset_path(c, s).string();
  Dataset d = read_dataset(path);
  if (d.support.kind != c.support.kind || d.support.height != c.support.height ||
      d.support.width != c.support.width || d.support.ball_radius != c.support.ball_radius)
    throw DataError(path + " was generated for a different dataset geometry; rerun gen-data");
  const std::size_t want = s == Split::train ? c.n_train : s == Split::val ? c.n_val : c.n_test;
  if (d.n != want)
    throw DataError(path + " holds " + std::to_string(d.n) + " rows but the config expects " +
                    std::to_string(want) + "; rerun gen-data");
  if (d.split != s) throw DataError(path + " carries the split tag \"" + split_name(d.split) +
                                    "\", expected \"" + split_name(s) + "\"");
  return d;
}

inline Model load_run_model(const RunConfig& c, std::uint64_t seed) {
  Model m = build_model(c.model_config(), seed);
  load_checkpoint(m, (run_dir(c, seed) / "model.adck").string());
  return m;
}

// ------------------------------------------------------------------ metrics

inline MetricsReport evaluate_model(const Model& m, const RunConfig& c, const Dataset& test,
                                    std::uint64_t seed) {
  const std::size_t n = static_cast<std::size_t>(test.n);
  const int d = test.d_z;
  SupportSample ss = encode_support_sample(m, test);
  std::vector<double> z_true(test.latents.begin(), test.latents.end());

  MetricsReport rep;
  rep.dataset = kind_name(test.support.kind);
  rep.decoder_kind = decoder_name(m.cfg.decoder_kind);
  rep.seed = seed;
  rep.rmse = std::sqrt(eval_mse(m, test));
  if (d == 2) {
    LmsOutcome lo = lms_spear(z_true, ss.points, n, d);
    rep.lms = lo.value;
    rep.lms_kind = "spear";
    rep.permutation = permutation_to_string(lo.permutation);
  } else {
    TreeLmsOutcome t =
        lms_tree(z_true, ss.points, n, d, m.cfg.partition, c.tree_search, c.metrics_seed);
    rep.lms = t.lms.value;
    rep.lms_kind = "tree";
    rep.permutation = permutation_to_string(t.lms.permutation);
  }
  if (test.support.kind == SupportKind::ScalarL) {
    OosReport oos = oos_eval(m, test.support, c.n_test, mix_seed(c.metrics_seed, 1));
    rep.oos_rmse = oos.rmse;
    rep.oos_lms = oos.lms;
  }
  return rep;
}

inline void write_metrics(const RunConfig& c, std::uint64_t seed, const MetricsReport& rep) {
  const auto dir = run_dir(c, seed);
  write_text(dir / "metrics.csv",
             csv_stamp(c, seed) + MetricsReport::csv_header() + "\n" + rep.csv_row() + "\n");
  nlohmann::json j = rep.to_json();
  j["config_hash"] = config_hash_hex(c);
  write_text(dir / "metrics.json", j.dump(2) + "\n");
}

// disentanglement scores render as percentages, reconstruction errors as-is
inline std::string metrics_table(const std::vector<MetricsReport>& reps) {
  std::string out = "dataset           decoder      seed  rmse      lms%   oos_rmse  oos_lms%\n";
  char line[160];
  for (const MetricsReport& r : reps) {
    char or_buf[24] = "-", ol_buf[24] = "-";
    if (r.oos_rmse) std::snprintf(or_buf, sizeof or_buf, "%.4f", *r.oos_rmse);
    if (r.oos_lms) std::snprintf(ol_buf, sizeof ol_buf, "%.1f", 100.0 * *r.oos_lms);
    std::snprintf(line, sizeof line, "%-17s %-12s %-5llu %-9.4f %-6.1f %-9s %s\n",
                  r.dataset.c_str(), r.decoder_kind.c_str(),
                  static_cast<unsigned long long>(r.seed), r.rmse, 100.0 * r.lms, or_buf, ol_buf);
    out += line;
  }
  return out;
}

// ------------------------------------------------------------- check-hessian

struct HessianCheck {
  std::size_t n_latents = 0, n_coords = 0;
  double h = 0.1;
  double max_off_block = 0.0, max_in_block = 0.0;
  double tolerance = 0.0;  // 1e-6 * (1 + max_in_block)
  bool pass = false;
};

// Central second differences of decoder outputs, batched per probe latent: all
// sampled output coordinates share one stencil decode. A mathematically
// additive decoder has exactly zero cross-block entries at any stencil width.
inline HessianCheck hessian_check(const Model& m, std::size_t n_latents, std::size_t n_coords,
                                  double h, std::uint64_t seed) {
  if (n_latents < 1 || n_coords < 1)
    throw PreconditionError("hessian check needs at least one latent and one coordinate");
  if (!(h > 0)) throw PreconditionError("hessian check needs a positive step");
  const std::size_t d = static_cast<std::size_t>(m.cfg.d_z);
  const std::size_t dx = m.cfg.d_x();
  n_coords = std::min(n_coords, dx);

  std::vector<std::size_t> coords;
  Rng pick(mix_seed(seed, 0xC0));
  while (coords.size() < n_coords) {
    const std::size_t k = pick.below(dx);
    if (std::find(coords.begin(), coords.end(), k) == coords.end()) coords.push_back(k);
  }

  std::vector<int> block_of(d, 0);
  for (std::size_t b = 0; b < m.cfg.partition.blocks.size(); ++b)
    for (int j : m.cfg.partition.blocks[b]) block_of[static_cast<std::size_t>(j)] = static_cast<int>(b);

  // stencil rows: center, +/-h per axis, then the four corners per axis pair
  const std::size_t pairs = d * (d - 1) / 2;
  const std::size_t rows = 1 + 2 * d + 4 * pairs;

  HessianCheck out;
  out.n_latents = n_latents;
  out.n_coords = n_coords;
  out.h = h;
  for (std::size_t t = 0; t < n_latents; ++t) {
    Rng rng(mix_seed(seed, t));
    std::vector<double> z(d);
    for (auto& v : z) v = rng.uniform(0.2, 0.8);

    std::vector<double> zs(rows * d);
    auto put = [&](std::size_t r, std::size_t i, double di, std::size_t j, double dj) {
      std::copy(z.begin(), z.end(), zs.begin() + static_cast<std::ptrdiff_t>(r * d));
      zs[r * d + i] += di;
      zs[r * d + j] += dj;
    };
    put(0, 0, 0.0, 0, 0.0);
    for (std::size_t i = 0; i < d; ++i) {
      put(1 + 2 * i, i, h, i, 0.0);
      put(2 + 2 * i, i, -h, i, 0.0);
    }
    std::size_t at = 1 + 2 * d;
    for (std::size_t i = 0; i < d; ++i)
      for (std::size_t j = i + 1; j < d; ++j) {
        put(at++, i, h, j, h);
        put(at++, i, h, j, -h);
        put(at++, i, -h, j, h);
        put(at++, i, -h, j, -h);
      }

    const std::vector<double> F = decode(m, zs, rows);
    for (std::size_t k : coords) {
      const double f0 = F[k];
      for (std::size_t i = 0; i < d; ++i) {
        const double hii =
            (F[(1 + 2 * i) * dx + k] - 2 * f0 + F[(2 + 2 * i) * dx + k]) / (h * h);
        out.max_in_block = std::max(out.max_in_block, std::abs(hii));
      }
      std::size_t p = 1 + 2 * d;
      for (std::size_t i = 0; i < d; ++i)
        for (std::size_t j = i + 1; j < d; ++j) {
          const double hij = (F[p * dx + k] - F[(p + 1) * dx + k] - F[(p + 2) * dx + k] +
                              F[(p + 3) * dx + k]) /
                             (4 * h * h);
          p += 4;
          auto& slot = block_of[i] == block_of[j] ? out.max_in_block : out.max_off_block;
          slot = std::max(slot, std::abs(hij));
        }
    }
  }
  out.tolerance = 1e-6 * (1.0 + out.max_in_block);
  out.pass = out.max_off_block <= out.tolerance;
  return out;
}

// -------------------------------------------------------------- subcommands

inline int cmd_gen_data(const RunConfig& c) {
  std::filesystem::create_directories(data_dir(c));
  const Split splits[] = {Split::train, Split::val, Split::test};
  const std::size_t sizes[] = {c.n_train, c.n_val, c.n_test};
  nlohmann::json meta;
  meta["config_hash"] = config_hash_hex(c);
  meta["dataset"] = c.to_json()["dataset"];
  for (int i = 0; i < 3; ++i) {
    Dataset d = make_dataset(c.support, sizes[i], mix_seed(c.data_seed, static_cast<std::uint64_t>(i)),
                             splits[i]);
    const std::string path = dataset_path(c, splits[i]).string();
    write_dataset(d, path);
    meta["files"][split_name(splits[i])] = split_name(splits[i]) + ".adec";
    std::printf("wrote %s (n=%zu, kind=%s)\n", path.c_str(), sizes[i],
                kind_name(c.support.kind).c_str());
  }
  write_text(data_dir(c) / "meta.json", meta.dump(2) + "\n");
  return 0;
}

inline int cmd_train(const RunConfig& c) {
  const Dataset tr = load_split(c, Split::train);
  const Dataset va = load_split(c, Split::val);
  const Dataset te = load_split(c, Split::test);
  std::vector<MetricsReport> reports;
  for (std::uint64_t seed : c.seeds) {
    const auto dir = run_dir(c, seed);
    std::filesystem::create_directories(dir);
    Model m = build_model(c.model_config(), seed);
    TrainConfig tc = c.train;
    tc.seed = seed;

    std::ofstream log(dir / "epochs.csv", std::ios::binary);
    if (!log) throw DataError("cannot open for writing: " + (dir / "epochs.csv").string());
    log << csv_stamp(c, seed) << "epoch,train_mse,val_mse,best\n";
    TrainReport trep;
    try {
      trep = train_model(m, tr, va, tc,
                         [&](std::size_t epoch, double train_mse, double val_mse, bool improved) {
                           log << epoch << ',' << json_num(train_mse) << ',' << json_num(val_mse)
                               << ',' << (improved ? 1 : 0) << '\n'
                               << std::flush;
                         });
    } catch (const NumericError&) {
      log.flush();  // keep the partial epoch log next to the abort
      throw;
    }
    save_checkpoint(m, (dir / "model.adck").string());

    nlohmann::json j{{"config_hash", config_hash_hex(c)},
                     {"seed", seed},
                     {"decoder", decoder_name(c.decoder)},
                     {"epochs_run", trep.epochs_run()},
                     {"best_epoch", trep.best_epoch},
                     {"best_val_mse", trep.best_val},
                     {"stop_reason", stop_reason_name(trep.stop_reason)},
                     {"final_train_mse", trep.train_mse.back()},
                     {"final_val_mse", trep.val_mse.back()}};
    write_text(dir / "train_report.json", j.dump(2) + "\n");

    MetricsReport rep = evaluate_model(m, c, te, seed);
    write_metrics(c, seed, rep);
    reports.push_back(rep);
    std::printf("seed %llu: %zu epochs (%s), best val mse %.3g at epoch %zu, %.1fs\n",
                static_cast<unsigned long long>(seed), trep.epochs_run(),
                stop_reason_name(trep.stop_reason).c_str(), trep.best_val, trep.best_epoch,
                trep.wall_seconds);
  }
  std::printf("%s", metrics_table(reports).c_str());
  return 0;
}

inline int cmd_eval(const RunConfig& c) {
  const Dataset te = load_split(c, Split::test);
  std::vector<MetricsReport> reports;
  for (std::uint64_t seed : c.seeds) {
    Model m = load_run_model(c, seed);
    MetricsReport rep = evaluate_model(m, c, te, seed);
    write_metrics(c, seed, rep);
    reports.push_back(rep);
  }
  std::printf("%s", metrics_table(reports).c_str());
  return 0;
}

inline int cmd_extrapolate(const RunConfig& c) {
  const Dataset tr = load_split(c, Split::train);
  for (std::uint64_t seed : c.seeds) {
    Model m = load_run_model(c, seed);
    const auto dir = run_dir(c, seed);
    SupportSample ss = encode_support_sample(m, tr);
    CPEGrid grid = cpe_grid(ss, c.grid_resolution);
    ExtrapolationResult er = extrapolate(m, grid, tr.support, tr.norm);

    write_dataset(cpe_to_dataset(grid, er, tr.support, tr.norm, seed),
                  (dir / "cpe_grid.adec").string());
    write_ppm(er.panel, er.panel_h, er.panel_w, (dir / "extrapolation.ppm").string());
    write_png(er.panel, er.panel_h, er.panel_w, (dir / "extrapolation.png").string());

    const std::size_t d = static_cast<std::size_t>(grid.d_z);
    std::string csv = csv_stamp(c, seed) + "index,row,col,extension";
    for (std::size_t k = 1; k <= d; ++k) csv += ",z" + std::to_string(k);
    csv += ",gt_ok";
    for (std::size_t k = 1; k <= d; ++k) csv += ",v" + std::to_string(k);
    csv += "\n";
    std::size_t n_ext = 0, n_ok = 0;
    for (std::size_t i = 0; i < grid.g; ++i) {
      csv += std::to_string(i) + "," + std::to_string(i / er.cols) + "," +
             std::to_string(i % er.cols) + "," + std::to_string(grid.extension[i]);
      for (std::size_t k = 0; k < d; ++k) csv += "," + json_num(grid.points[i * d + k]);
      csv += "," + std::to_string(er.gt_ok[i]);
      for (std::size_t k = 0; k < d; ++k)
        csv += "," + (er.gt_ok[i] ? json_num(er.gt_latents[i * d + k]) : std::string());
      csv += "\n";
      n_ext += grid.extension[i];
      n_ok += er.gt_ok[i];
    }
    write_text(dir / "cpe_points.csv", csv);

    nlohmann::json j{{"config_hash", config_hash_hex(c)},
                     {"seed", seed},
                     {"decoder", decoder_name(c.decoder)},
                     {"resolution", grid.res},
                     {"grid_points", grid.g},
                     {"nn_threshold", grid.nn_threshold},
                     {"extension_cells", n_ext},
                     {"gt_recovered", n_ok}};
    write_text(dir / "extrapolation_report.json", j.dump(2) + "\n");
    std::printf("seed %llu: %zu grid points, %zu extension cells, centroids on %zu\n",
                static_cast<unsigned long long>(seed), grid.g, n_ext, n_ok);
  }
  return 0;
}

inline int cmd_traverse(const RunConfig& c) {
  for (std::uint64_t seed : c.seeds) {
    Model m = load_run_model(c, seed);
    const auto dir = run_dir(c, seed);
    for (TraversalProtocol p : {TraversalProtocol::ball1_x, TraversalProtocol::ball2_x,
                                TraversalProtocol::ball1_y, TraversalProtocol::ball2_y}) {
      TraversalTable table = latent_traversal(m, c.support, p);
      const auto path = dir / ("traversal_" + traversal_name(p) + ".csv");
      write_text(path, csv_stamp(c, seed) + table.to_csv());
      std::printf("wrote %s\n", path.string().c_str());
    }
  }
  return 0;
}

inline int cmd_verify_nonlinearity(const RunConfig& c) {
  const auto dir = std::filesystem::path(c.out_dir) / "theory";
  std::filesystem::create_directories(dir);
  GridScan s = scan_sufficient_nonlinearity(c.scan_delta);
  grid_scan_write_csv(s, (dir / "scan.csv").string());
  InjectivityReport ir = injectivity_probe(c.probe_delta);

  nlohmann::json j = scan_summary_json(s);
  j["config_hash"] = config_hash_hex(c);
  j["seed"] = nullptr;  // purely analytic, nothing sampled
  j["injectivity"] = {{"delta", ir.delta},
                      {"tolerance", ir.tolerance},
                      {"n_points", ir.n_points},
                      {"n_pairs", ir.n_pairs},
                      {"collisions", ir.collisions},
                      {"min_image_separation", ir.min_image_separation},
                      {"worst_pair", {{ir.worst_a[0], ir.worst_a[1]}, {ir.worst_b[0], ir.worst_b[1]}}}};
  const bool pass = s.min_abs_det_w > 0 && s.min_det_jtj > 0 && ir.collisions == 0;
  j["pass"] = pass;
  write_text(dir / "summary.json", j.dump(2) + "\n");
  std::printf("min |det W| = %.6g at (%g, %g); min det(Df^T Df) = %.6g; collisions = %zu -> %s\n",
              s.min_abs_det_w, s.argmin_w[0], s.argmin_w[1], s.min_det_jtj, ir.collisions,
              pass ? "PASS" : "FAIL");
  return 0;
}

inline int cmd_check_hessian(const RunConfig& c) {
  for (std::uint64_t seed : c.seeds) {
    Model m = load_run_model(c, seed);
    const HessianCheck hc =
        hessian_check(m, c.hessian_latents, c.hessian_coords, c.hessian_h, mix_seed(seed, 0x48e5));
    const auto dir = run_dir(c, seed);
    nlohmann::json j{{"config_hash", config_hash_hex(c)},
                     {"seed", seed},
                     {"decoder", decoder_name(c.decoder)},
                     {"h", hc.h},
                     {"n_latents", hc.n_latents},
                     {"n_coords", hc.n_coords},
                     {"max_off_block", hc.max_off_block},
                     {"max_in_block", hc.max_in_block},
                     {"tolerance", hc.tolerance},
                     {"pass", hc.pass}};
    write_text(dir / "hessian.json", j.dump(2) + "\n");
    std::printf("seed %llu (%s): max off-block %.3g, max in-block %.3g -> %s\n",
                static_cast<unsigned long long>(seed), decoder_name(c.decoder).c_str(),
                hc.max_off_block, hc.max_in_block, hc.pass ? "PASS" : "off-block curvature");
  }
  return 0;
}

}  // namespace addidec::cli
